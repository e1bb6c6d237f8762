//! b-adic zooming: boxes, minimeasures, scenery walks at typical points and
//! checks of the minimeasure structure for strongly separated systems.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cloud::PointCloud;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::gibbs::{quasi_bernoulli_bracket, quasi_bernoulli_ratio, GibbsModel};
use crate::ifs::{check_strong_separation, cube_image, IfsSystem, SimilarityMap};
use crate::output;
use crate::region::Region;
use crate::symbolic::{Symbol, Word};

/// Frames are resolved to cylinders `b^RESOLUTION_LEVELS` times smaller
/// than the box.
pub const RESOLUTION_LEVELS: u32 = 4;
pub const MAX_WALK_STEPS: usize = 1000;
pub const MAX_FRAME_POINTS: usize = 1_000_000;
pub const MAX_LEAVES: usize = 1_000_000;
/// Walks in absolute coordinates (conformal systems) stop once the box side
/// is below this.
pub const ABSOLUTE_MIN_SIDE: f64 = 1e-9;
/// Similarity walks stop if a frame would need a cylinder magnified by more
/// than this, since rounding would then exceed `1e-10` frame units.
const MAX_MAGNIFICATION: f64 = 1e6;
const ATTEMPTS_PER_POINT: usize = 50;
/// Largest `b^n` for which `floor(x·b^n)` is computed in one step.
const EXACT_POWER: f64 = 9_007_199_254_740_992.0;

/// The box `∏ [i_j b^{−n}, (i_j + 1) b^{−n})`, stored as its b-adic digits
/// level by level so that arbitrarily deep boxes are exact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoxIndex {
    base: u32,
    dim: usize,
    digits: Vec<u32>,
}

impl BoxIndex {
    pub fn root(base: u32, dim: usize) -> Self {
        BoxIndex { base, dim, digits: Vec::new() }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        (self.digits.len() / self.dim) as u32
    }

    /// Sub-box one level down with the given digit per coordinate.
    pub fn child(&self, digit: &[u32]) -> BoxIndex {
        let mut digits = self.digits.clone();
        digits.extend_from_slice(digit);
        BoxIndex { base: self.base, dim: self.dim, digits }
    }

    /// `self` followed by the levels of `sub`.
    pub fn concat(&self, sub: &BoxIndex) -> BoxIndex {
        let mut digits = self.digits.clone();
        digits.extend_from_slice(&sub.digits);
        BoxIndex { base: self.base, dim: self.dim, digits }
    }

    /// Integer coordinates, `None` if they overflow `u64`.
    pub fn coords(&self) -> Option<Vec<u64>> {
        (0..self.dim)
            .map(|j| {
                self.digits.chunks(self.dim).try_fold(0u64, |acc, lv| {
                    acc.checked_mul(self.base as u64)?.checked_add(lv[j] as u64)
                })
            })
            .collect()
    }

    /// Exact decimal coordinates joined by `:`.
    pub fn label(&self) -> String {
        (0..self.dim)
            .map(|j| {
                let b = BigInt::from(self.base);
                self.digits
                    .chunks(self.dim)
                    .fold(BigInt::from(0), |acc, lv| acc * &b + lv[j])
                    .to_string()
            })
            .collect::<Vec<_>>()
            .join(":")
    }

    /// `b^n` as a float (may overflow to infinity).
    pub fn scale(&self) -> f64 {
        (self.base as f64).powi(self.level() as i32)
    }

    pub fn side(&self) -> f64 {
        1.0 / self.scale()
    }

    /// Lower corner, rounded to `f64`.
    pub fn lo(&self) -> Vec<f64> {
        let b = self.base as f64;
        (0..self.dim)
            .map(|j| {
                let mut w = 1.0;
                let mut x = 0.0;
                for lv in self.digits.chunks(self.dim) {
                    w /= b;
                    x += lv[j] as f64 * w;
                }
                x
            })
            .collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        let s = self.side();
        self.lo().iter().map(|l| l + s).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter().all(|&v| (0.0..1.0).contains(&v))
            && digits_of(x, self.base, self.level()) == self.digits
    }

    /// The homothety `T_B(x) = bⁿ x − i` onto `[0,1)^d`.
    pub fn renormalize(&self, x: &[f64]) -> Vec<f64> {
        let n = self.level();
        let b = self.base as f64;
        if self.scale() <= EXACT_POWER {
            let coords = self.coords().expect("fits below 2^53");
            x.iter().zip(coords).map(|(v, i)| v * self.scale() - i as f64).collect()
        } else {
            let mut y = x.to_vec();
            for l in 0..n as usize {
                for j in 0..self.dim {
                    y[j] = y[j] * b - self.digits[l * self.dim + j] as f64;
                }
            }
            y
        }
    }
}

/// Per-level digits of the box of generation `n` containing `x`.
fn digits_of(x: &[f64], b: u32, n: u32) -> Vec<u32> {
    let d = x.len();
    let bf = b as f64;
    // largest chunk of levels whose power of b is exact in f64
    let mut chunk = 0u32;
    while chunk < n && bf.powi(chunk as i32 + 1) <= EXACT_POWER {
        chunk += 1;
    }
    let chunk = chunk.max(1);
    let mut digits = vec![0u32; n as usize * d];
    let mut y = x.to_vec();
    let mut done = 0u32;
    while done < n {
        let m = chunk.min(n - done);
        let p = bf.powi(m as i32);
        for j in 0..d {
            let v = y[j] * p;
            let mut idx = (v.floor() as u64).min(p as u64 - 1);
            y[j] = v - idx as f64;
            for l in (0..m).rev() {
                digits[(done + l) as usize * d + j] = (idx % b as u64) as u32;
                idx /= b as u64;
            }
        }
        done += m;
    }
    digits
}

/// The generation-`n` b-adic box containing `x ∈ [0,1)^d`.
pub fn dyadic_box(x: &[f64], b: u32, n: u32) -> Result<BoxIndex> {
    if b < 2 {
        return Err(Error::input(format!("base must be at least 2, got {b}")));
    }
    if x.is_empty() {
        return Err(Error::input("point has no coordinates"));
    }
    if let Some(v) = x.iter().find(|v| !(0.0..1.0).contains(*v)) {
        return Err(Error::input(format!("coordinate {v} outside the half-open unit interval")));
    }
    Ok(BoxIndex { base: b, dim: x.len(), digits: digits_of(x, b, n) })
}

/// Normalized restriction of a measure to a b-adic box, pushed onto
/// `[0,1)^d` by the box's homothety.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZoomFrame {
    pub base: u32,
    pub level: u32,
    pub box_index: BoxIndex,
    /// `bⁿ`.
    pub scale: f64,
    pub measure: PointCloud,
    /// `μ(B)`.
    pub parent_mass: f64,
    pub log_parent_mass: f64,
}

impl ZoomFrame {
    /// Masses of the `k^d` equal sub-cells, indexed by `Σ c_j k^j`.
    pub fn cell_masses(&self, k: u32) -> Vec<f64> {
        let d = self.measure.dim();
        let mut out = vec![0.0; (k as usize).pow(d as u32)];
        for (p, w) in self.measure.points() {
            let mut idx = 0usize;
            for j in (0..d).rev() {
                let c = ((p[j] * k as f64) as usize).min(k as usize - 1);
                idx = idx * k as usize + c;
            }
            out[idx] += w;
        }
        let t: f64 = out.iter().sum();
        if t > 0.0 {
            out.iter_mut().for_each(|m| *m /= t);
        }
        out
    }

    /// Shannon entropy (natural log) of the frame's masses on its `b^d`
    /// child boxes.
    pub fn entropy(&self) -> f64 {
        self.cell_masses(self.base)
            .iter()
            .filter(|&&m| m > 0.0)
            .map(|&m| -m * m.ln())
            .sum()
    }

    /// Zoom further into the sub-box `sub` of the frame's own coordinates.
    pub fn zoom(&self, sub: &BoxIndex) -> Result<ZoomFrame> {
        if sub.base != self.base {
            return Err(Error::input("sub-box uses a different base"));
        }
        let inner = minimeasure(&self.measure, sub)?;
        Ok(ZoomFrame {
            base: self.base,
            level: self.level + inner.level,
            box_index: self.box_index.concat(sub),
            scale: self.scale * inner.scale,
            measure: inner.measure,
            parent_mass: self.parent_mass * inner.parent_mass,
            log_parent_mass: self.log_parent_mass + inner.log_parent_mass,
        })
    }
}

pub fn minimeasure(cloud: &PointCloud, bx: &BoxIndex) -> Result<ZoomFrame> {
    if cloud.dim() != bx.dim() {
        return Err(Error::input("box and cloud dimensions differ"));
    }
    let total = cloud.total_weight();
    let inside = cloud.filter(|p| bx.contains(p));
    let mass = inside.total_weight();
    if !(mass > 0.0 && total > 0.0) {
        return Err(Error::EmptyFrame(bx.label()));
    }
    let mut measure = inside.map(bx.dim(), |p| bx.renormalize(p));
    measure.normalize()?;
    let parent_mass = mass / total;
    Ok(ZoomFrame {
        base: bx.base(),
        level: bx.level(),
        box_index: bx.clone(),
        scale: bx.scale(),
        measure,
        parent_mass,
        log_parent_mass: parent_mass.ln(),
    })
}

/// Successive frames at a μ-typical point.
#[derive(Clone, Debug, Serialize)]
pub struct SceneryWalk {
    pub base: u32,
    /// The point, rounded to `f64`.
    pub x: Vec<f64>,
    /// Prefix of the point's coding sequence used to place it.
    pub word: Word,
    pub frames: Vec<ZoomFrame>,
    /// Level at which the walk was cut short, if it was.
    pub stop_level: Option<u32>,
}

fn validate_walk(sys: &IfsSystem, g: &GibbsModel, b: u32, steps: usize, points: usize) -> Result<()> {
    if g.system() != sys.symbolic() {
        return Err(Error::input("Gibbs model is built on a different subshift"));
    }
    if b < 2 {
        return Err(Error::input(format!("base must be at least 2, got {b}")));
    }
    if steps == 0 || points == 0 {
        return Err(Error::input("steps and points per frame must be positive"));
    }
    if steps > MAX_WALK_STEPS {
        return Err(Error::cap("walk steps", steps as u128, MAX_WALK_STEPS as u128));
    }
    if points > MAX_FRAME_POINTS {
        return Err(Error::cap("frame points", points as u128, MAX_FRAME_POINTS as u128));
    }
    Ok(())
}

/// Draw `x` from `μ` and emit the frames `μ^{Δ_b^n(x)}` for `n = 1..=steps`,
/// each resampled from cylinders `b^4` times finer than its box.
///
/// Similarity systems are walked in frame coordinates anchored at an exactly
/// computed `x`, so deep walks keep full precision. Conformal systems are
/// walked in absolute coordinates and stop when the box side drops below
/// [`ABSOLUTE_MIN_SIDE`].
pub fn scenery_walk(
    sys: &IfsSystem,
    g: &GibbsModel,
    x_seed: u64,
    b: u32,
    steps: usize,
    points_per_frame: usize,
) -> Result<SceneryWalk> {
    validate_walk(sys, g, b, steps, points_per_frame)?;
    if sys.is_similarity() {
        SimilarityWalker::new(sys, g, x_seed, b, steps)?.run(points_per_frame)
    } else {
        absolute_walk(sys, g, x_seed, b, steps, points_per_frame)
    }
}

struct Leaf {
    word: Vec<Symbol>,
    log_mass: f64,
    map: Option<SimilarityMap>,
}

struct SimilarityWalker<'a> {
    sys: &'a IfsSystem,
    g: &'a GibbsModel,
    rng: ChaCha8Rng,
    b: u32,
    steps: usize,
    alpha: Vec<Symbol>,
    /// Linear parts of `S_{α|k}`.
    prefix_linear: Vec<SimilarityMap>,
    /// `Π(σ^k α)` truncated consistently with `x`.
    suffix_points: Vec<Vec<f64>>,
    x: Vec<Dyadic>,
}

fn linear_part(s: &SimilarityMap) -> SimilarityMap {
    SimilarityMap::new(s.ratio(), s.orthogonal().to_vec(), vec![0.0; s.dim()])
        .expect("orthogonal part already validated")
}

impl<'a> SimilarityWalker<'a> {
    fn new(sys: &'a IfsSystem, g: &'a GibbsModel, seed: u64, b: u32, steps: usize) -> Result<Self> {
        let ln_b = (b as f64).ln();
        let budget = ((steps as u32 + RESOLUTION_LEVELS) as f64) * ln_b;
        if budget > 600.0 {
            let max = (600.0 / ln_b) as u128 - RESOLUTION_LEVELS as u128;
            return Err(Error::cap("walk steps for this base", steps as u128, max));
        }
        let d = sys.dim();
        let rho = sys.max_ratio();
        let k = ((budget + 40.0 * std::f64::consts::LN_10) / -rho.ln()).ceil() as usize + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = g.sample_word(&mut rng, k).0;
        let maps: Vec<&SimilarityMap> = (0..sys.symbolic().alphabet_size())
            .map(|i| sys.similarity(i).expect("similarity system"))
            .collect();

        let mut prefix_linear = vec![SimilarityMap::identity(d)];
        for &s in &alpha {
            let next = prefix_linear.last().unwrap().compose(&linear_part(maps[s]));
            prefix_linear.push(next);
        }
        let center = sys.domain().center();
        let mut suffix_points = vec![center.clone(); alpha.len() + 1];
        for i in (0..alpha.len()).rev() {
            suffix_points[i] = maps[alpha[i]].apply(&suffix_points[i + 1]);
        }
        let mut x: Vec<Dyadic> = center.iter().map(|&c| Dyadic::from_f64(c)).collect();
        for &s in alpha.iter().rev() {
            let f = maps[s];
            let o = f.orthogonal();
            x = (0..d)
                .map(|i| {
                    let lin = (0..d).fold(Dyadic::zero(), |acc, k| acc.add(&x[k].mul_f64(o[i * d + k])));
                    lin.mul_f64(f.ratio()).add(&Dyadic::from_f64(f.translation()[i]))
                })
                .collect();
        }
        if x.iter().any(|v| v.floor() != 0) {
            return Err(Error::Degenerate("sampled point lies on the outer boundary".into()));
        }
        Ok(SimilarityWalker {
            sys,
            g,
            rng,
            b,
            steps,
            alpha,
            prefix_linear,
            suffix_points,
            x,
        })
    }

    /// `T_n ∘ S_w` written as `ξ + bⁿ L_p (S_{w'}(·) − Π(σ^p α))` where `p`
    /// is the common prefix of `w` and `α`; `None` if the magnification of
    /// the shared prefix is too large for `f64`.
    fn frame_map(&self, w: &[Symbol], level: u32, xi: &[f64]) -> Option<SimilarityMap> {
        let p = w.iter().zip(&self.alpha).take_while(|(a, b)| a == b).count();
        let d = self.sys.dim();
        let lp = &self.prefix_linear[p];
        let mag = (level as f64 * (self.b as f64).ln() + lp.ratio().ln()).exp();
        if p < w.len() && mag > MAX_MAGNIFICATION {
            return None;
        }
        let rest = w[p..].iter().fold(SimilarityMap::identity(d), |acc, &s| {
            acc.compose(self.sys.similarity(s).expect("similarity system"))
        });
        let diff: Vec<f64> = rest
            .translation()
            .iter()
            .zip(&self.suffix_points[p])
            .map(|(t, x)| t - x)
            .collect();
        let shifted = lp.apply(&diff);
        let translation: Vec<f64> = xi.iter().zip(&shifted).map(|(a, s)| a + mag / lp.ratio() * s).collect();
        let lin = lp.compose(&linear_part(&rest));
        let ratio = mag * rest.ratio();
        SimilarityMap::new(ratio, lin.orthogonal().to_vec(), translation).ok()
    }

    fn run(mut self, points: usize) -> Result<SceneryWalk> {
        let d = self.sys.dim();
        let zeros = vec![0.0; d];
        let ones = vec![1.0; d];
        let res = (self.b as f64).powi(-(RESOLUTION_LEVELS as i32));
        let rho = self.sys.max_ratio();
        let center = self.sys.domain().center();
        let mut leaves: Vec<Leaf> = (0..self.sys.symbolic().alphabet_size())
            .map(|i| Leaf { word: vec![i], log_mass: self.g.log_cylinder_mass(&[i]), map: None })
            .collect();
        let mut bx = BoxIndex::root(self.b, d);
        let mut frames = Vec::with_capacity(self.steps);
        let mut stop_level = None;

        'levels: for level in 1..=self.steps as u32 {
            let digit: Vec<u32> = self
                .x
                .iter()
                .map(|v| (v.mul_int(self.b as u64).floor() as u32).min(self.b - 1))
                .collect();
            self.x = self
                .x
                .iter()
                .zip(&digit)
                .map(|(v, &j)| v.mul_int(self.b as u64).sub_int(j as u64))
                .collect();
            bx = bx.child(&digit);
            let xi: Vec<f64> = self.x.iter().map(Dyadic::to_f64).collect();

            let mut stack = std::mem::take(&mut leaves);
            while let Some(mut leaf) = stack.pop() {
                let Some(f) = self.frame_map(&leaf.word, level, &xi) else {
                    stop_level = Some(level);
                    break 'levels;
                };
                let region = cube_image(&f);
                if !region.meets_box(&zeros, &ones) {
                    continue;
                }
                if region.diameter() > res {
                    let last = *leaf.word.last().unwrap();
                    for s in self.sys.symbolic().successors(last) {
                        let mut w = leaf.word.clone();
                        w.push(s);
                        let log_mass = self.g.log_cylinder_mass(&w);
                        stack.push(Leaf { word: w, log_mass, map: None });
                    }
                } else {
                    leaf.map = Some(f);
                    leaves.push(leaf);
                }
                if leaves.len() + stack.len() > MAX_LEAVES {
                    return Err(Error::cap("frame cylinders", (leaves.len() + stack.len()) as u128, MAX_LEAVES as u128));
                }
            }
            leaves.sort_by(|a, b| a.word.cmp(&b.word));

            let (cloud, log_mass) = sample_leaves(&leaves, points, &mut self.rng, |leaf, rng| {
                let f = leaf.map.as_ref().expect("resolved leaf");
                let extra = ((1e-12f64.ln() - f.ratio().ln()) / rho.ln()).ceil().max(0.0) as usize;
                let w = self.g.extend_word(rng, &leaf.word, leaf.word.len() + extra);
                f.apply(&self.sys.eval_word(&w.symbols()[leaf.word.len()..], &center))
            });
            match cloud {
                Some(measure) => frames.push(ZoomFrame {
                    base: self.b,
                    level,
                    box_index: bx.clone(),
                    scale: bx.scale(),
                    measure,
                    parent_mass: log_mass.exp(),
                    log_parent_mass: log_mass,
                }),
                None => {
                    stop_level = Some(level);
                    break;
                }
            }
        }
        let x = self.suffix_points[0].clone();
        let word = Word::new(self.alpha.clone());
        Ok(SceneryWalk { base: self.b, x, word, frames, stop_level })
    }
}

/// Rejection sampling from cylinders weighted by mass, keeping points in
/// `[0,1)^d`. Returns the normalized cloud and `log μ(B)` estimated as the
/// total cylinder mass times the acceptance rate.
fn sample_leaves(
    leaves: &[Leaf],
    points: usize,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&Leaf, &mut ChaCha8Rng) -> Vec<f64>,
) -> (Option<PointCloud>, f64) {
    if leaves.is_empty() {
        return (None, f64::NEG_INFINITY);
    }
    let top = leaves.iter().map(|l| l.log_mass).fold(f64::NEG_INFINITY, f64::max);
    let mut cumulative = Vec::with_capacity(leaves.len());
    let mut acc = 0.0;
    for l in leaves {
        acc += (l.log_mass - top).exp();
        cumulative.push(acc);
    }
    let log_total = top + acc.ln();
    let mut coords = Vec::new();
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    while accepted < points && attempts < ATTEMPTS_PER_POINT * points {
        attempts += 1;
        let u = rng.gen::<f64>() * acc;
        let i = cumulative.partition_point(|&c| c <= u).min(leaves.len() - 1);
        let y = draw(&leaves[i], rng);
        if y.iter().all(|v| (0.0..1.0).contains(v)) {
            coords.extend(y);
            accepted += 1;
        }
    }
    if accepted == 0 {
        return (None, f64::NEG_INFINITY);
    }
    let d = coords.len() / accepted;
    let cloud = PointCloud::uniform(d, coords).expect("consistent coordinates");
    (Some(cloud), log_total + (accepted as f64 / attempts as f64).ln())
}

fn absolute_walk(
    sys: &IfsSystem,
    g: &GibbsModel,
    seed: u64,
    b: u32,
    steps: usize,
    points: usize,
) -> Result<SceneryWalk> {
    let d = sys.dim();
    let rho = sys.max_ratio();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (30.0 * std::f64::consts::LN_10 / -rho.ln()).ceil() as usize;
    let alpha = g.sample_word(&mut rng, k);
    let center = sys.domain().center();
    let x = sys.eval_word(alpha.symbols(), &center);
    let mut frames = Vec::new();
    let mut stop_level = None;
    for level in 1..=steps as u32 {
        let bx = dyadic_box(&x, b, level)?;
        let side = bx.side();
        if side < ABSOLUTE_MIN_SIDE {
            stop_level = Some(level);
            break;
        }
        let (lo, hi) = (bx.lo(), bx.hi());
        let res = side * (b as f64).powi(-(RESOLUTION_LEVELS as i32));
        let mut leaves = Vec::new();
        let mut stack: Vec<Vec<Symbol>> = (0..sys.symbolic().alphabet_size()).map(|i| vec![i]).collect();
        while let Some(w) = stack.pop() {
            let region = sys.image_region(&w);
            if !region.meets_box(&lo, &hi) {
                continue;
            }
            let r = region.diameter();
            if r > res {
                for s in sys.symbolic().successors(*w.last().unwrap()) {
                    let mut c = w.clone();
                    c.push(s);
                    stack.push(c);
                }
            } else {
                let log_mass = g.log_cylinder_mass(&w);
                leaves.push(Leaf { word: w, log_mass, map: None });
            }
            if leaves.len() + stack.len() > MAX_LEAVES {
                return Err(Error::cap("frame cylinders", (leaves.len() + stack.len()) as u128, MAX_LEAVES as u128));
            }
        }
        let mut order: Vec<usize> = (0..leaves.len()).collect();
        order.sort_by(|&i, &j| leaves[i].word.cmp(&leaves[j].word));
        let extra = ((1e-6f64).ln() / rho.ln()).ceil() as usize;
        let leaves: Vec<Leaf> = order
            .into_iter()
            .map(|i| Leaf { word: leaves[i].word.clone(), log_mass: leaves[i].log_mass, map: None })
            .collect();
        let (cloud, log_mass) = sample_leaves(&leaves, points, &mut rng, |leaf, rng| {
            let w = g.extend_word(rng, &leaf.word, leaf.word.len() + extra);
            let y = sys.eval_word(w.symbols(), &center);
            if bx.contains(&y) {
                bx.renormalize(&y)
            } else {
                vec![-1.0; d]
            }
        });
        match cloud {
            Some(measure) => frames.push(ZoomFrame {
                base: b,
                level,
                box_index: bx.clone(),
                scale: bx.scale(),
                measure,
                parent_mass: log_mass.exp(),
                log_parent_mass: log_mass,
            }),
            None => {
                stop_level = Some(level);
                break;
            }
        }
    }
    Ok(SceneryWalk { base: b, x, word: alpha, frames, stop_level })
}

/// Outcome of comparing a frame with the prediction of the structure
/// theorem.
#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub level: u32,
    /// Minimal words `w` with `S_w(X)` inside the box, away from its edge.
    pub words: Vec<Word>,
    /// Words inside the box but within `b^{−n}/100` of its boundary.
    pub boundary_skipped: usize,
    /// Range of `[μ(wv)/μ(w)] / [μ(iv)/μ(i)]`, `i` the last symbol of `w`.
    pub deviation_min: f64,
    pub deviation_max: f64,
    /// Range allowed by the enumerated quasi-Bernoulli constants.
    pub bracket: (f64, f64),
    /// Closed-form bracket from the Gibbs constants and the variations.
    pub closed_form_bracket: (f64, f64),
    pub within_bracket: bool,
    /// Largest gap between the frame's empirical mass on `T_B(S_w(X))` and
    /// `μ([w])/μ(B)`.
    pub frame_mass_error: f64,
    /// False for conformal systems: bounding regions are not exact there.
    pub certifying: bool,
    pub note: String,
}

const MAX_STRUCTURE_WORDS: usize = 10_000;

pub fn verify_minimeasure_structure(
    sys: &IfsSystem,
    g: &GibbsModel,
    frame: &ZoomFrame,
    depth: usize,
) -> Result<StructureReport> {
    if g.system() != sys.symbolic() {
        return Err(Error::input("Gibbs model is built on a different subshift"));
    }
    if depth == 0 {
        return Err(Error::input("verification depth must be positive"));
    }
    let certifying = sys.is_similarity();
    if certifying && !check_strong_separation(sys, 2)?.is_pass() {
        return Err(Error::Unsupported("strong separation is not certified".into()));
    }
    let bx = &frame.box_index;
    let side = bx.side();
    if side < ABSOLUTE_MIN_SIDE {
        return Err(Error::Unsupported(format!("frame level {} is too deep to verify", bx.level())));
    }
    let (lo, hi) = (bx.lo(), bx.hi());
    let eps = side / 100.0;
    let inner_lo: Vec<f64> = lo.iter().map(|v| v + eps).collect();
    let inner_hi: Vec<f64> = hi.iter().map(|v| v - eps).collect();
    let rho = sys.max_ratio();
    let max_len = ((side / sys.domain().diameter()).ln() / rho.ln()).ceil() as usize + 8;

    let mut words = Vec::new();
    let mut boundary_skipped = 0;
    let mut stack: Vec<Vec<Symbol>> =
        (0..sys.symbolic().alphabet_size()).rev().map(|i| vec![i]).collect();
    while let Some(w) = stack.pop() {
        let region = sys.image_region(&w);
        if !region.meets_box(&lo, &hi) {
            continue;
        }
        if region.inside_box(&inner_lo, &inner_hi) {
            words.push(Word::new(w));
            if words.len() > MAX_STRUCTURE_WORDS {
                return Err(Error::cap("structure words", words.len() as u128, MAX_STRUCTURE_WORDS as u128));
            }
            continue;
        }
        if w.len() >= max_len {
            boundary_skipped += 1;
        } else {
            let children: Vec<Symbol> = sys.symbolic().successors(*w.last().unwrap()).collect();
            for s in children.into_iter().rev() {
                let mut c = w.clone();
                c.push(s);
                stack.push(c);
            }
        }
    }
    if words.is_empty() {
        return Err(Error::EmptyFrame(bx.label()));
    }

    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for w in &words {
        let i = w.last().unwrap();
        let lw = g.log_cylinder_mass(w.symbols());
        let li = g.log_cylinder_mass(&[i]);
        let mut ext = vec![i];
        let mut visit = |v: &[Symbol]| {
            let mut wv = w.symbols().to_vec();
            wv.extend_from_slice(&v[1..]);
            let lhs = g.log_cylinder_mass(&wv) - lw;
            let rhs = g.log_cylinder_mass(v) - li;
            let r = (lhs - rhs).exp();
            dmin = dmin.min(r);
            dmax = dmax.max(r);
        };
        extensions(sys, &mut ext, depth, &mut visit);
    }

    let qb_depth = depth.max(g.state_len());
    let (qlo, qhi) = quasi_bernoulli_ratio(g, qb_depth)?;
    let bracket = (qlo / qhi, qhi / qlo);
    let (clo, chi) = quasi_bernoulli_bracket(g, qb_depth)?;
    let closed_form_bracket = (clo / chi, chi / clo);
    let slack = 1e-12;
    let within_bracket = dmin >= bracket.0 * (1.0 - slack) && dmax <= bracket.1 * (1.0 + slack);

    let mut frame_mass_error: f64 = 0.0;
    let total = frame.measure.total_weight();
    for w in &words {
        let region = sys.image_region(w.symbols());
        let inside: f64 = frame
            .measure
            .points()
            .filter(|(p, _)| {
                let x: Vec<f64> = p.iter().zip(&lo).map(|(y, l)| l + y * side).collect();
                region.separation(&Region::ball(x, 0.0)) <= 0.0
            })
            .map(|(_, m)| m)
            .sum();
        let predicted = g.cylinder_mass(w.symbols()) / frame.parent_mass;
        frame_mass_error = frame_mass_error.max((inside / total - predicted).abs());
    }

    Ok(StructureReport {
        level: bx.level(),
        words,
        boundary_skipped,
        deviation_min: dmin,
        deviation_max: dmax,
        bracket,
        closed_form_bracket,
        within_bracket,
        frame_mass_error,
        certifying,
        note: format!(
            "verified to depth {depth}{}",
            if certifying { "" } else { "; tolerance mode, conformal bounding balls" }
        ),
    })
}

/// Calls `f` on every admissible `i·v` with `1 ≤ |v| ≤ depth`, where `buf`
/// starts as `[i]`.
fn extensions(sys: &IfsSystem, buf: &mut Vec<Symbol>, depth: usize, f: &mut impl FnMut(&[Symbol])) {
    if buf.len() > depth {
        return;
    }
    let last = *buf.last().unwrap();
    let next: Vec<Symbol> = sys.symbolic().successors(last).collect();
    for s in next {
        buf.push(s);
        f(buf);
        extensions(sys, buf, depth, f);
        buf.pop();
    }
}

/// Lebesgue measure on the upper half of the circle of radius 0.45 centered
/// at (0.5, 0.05), discretized by `n` equally spaced angles.
pub fn half_circle_cloud(n: usize) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::input("need at least one point"));
    }
    let mut coords = Vec::with_capacity(2 * n);
    for k in 0..n {
        let t = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
        coords.push(0.5 + 0.45 * t.cos());
        coords.push(0.05 + 0.45 * t.sin());
    }
    PointCloud::uniform(2, coords)
}

/// Frames of a fixed cloud around `x`, stopping at the first empty box.
pub fn cloud_walk(cloud: &PointCloud, x: &[f64], b: u32, steps: u32) -> Result<Vec<ZoomFrame>> {
    let mut frames = Vec::new();
    for n in 1..=steps {
        let bx = dyadic_box(x, b, n)?;
        match minimeasure(cloud, &bx) {
            Ok(f) => frames.push(f),
            Err(Error::EmptyFrame(_)) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(frames)
}

/// Angle in `[0, π)` of the principal axis of a planar cloud.
pub fn principal_direction(cloud: &PointCloud) -> Result<f64> {
    if cloud.dim() != 2 || cloud.is_empty() {
        return Err(Error::input("principal direction needs a nonempty planar cloud"));
    }
    let t = cloud.total_weight();
    let (mut mx, mut my) = (0.0, 0.0);
    for (p, w) in cloud.points() {
        mx += w * p[0];
        my += w * p[1];
    }
    mx /= t;
    my /= t;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (p, w) in cloud.points() {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Ok(theta.rem_euclid(std::f64::consts::PI))
}

/// CSV rows `level,box_index,parent_mass,x,y[,z],weight`, one per point.
pub fn frames_csv(frames: &[ZoomFrame]) -> String {
    let d = frames.first().map_or(1, |f| f.measure.dim());
    let axes = ["x", "y", "z"];
    let mut header = vec!["level".to_string(), "box_index".into(), "parent_mass".into()];
    for j in 0..d {
        header.push(axes.get(j).map_or(format!("x{j}"), |a| a.to_string()));
    }
    header.push("weight".into());
    let mut out = output::row(&header);
    for f in frames {
        let label = f.box_index.label();
        let pm = output::num(f.parent_mass);
        for (p, w) in f.measure.points() {
            let mut fields = vec![f.level.to_string(), label.clone(), pm.clone()];
            fields.extend(p.iter().map(|&v| output::num(v)));
            fields.push(output::num(w));
            out.push_str(&output::row(&fields));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::preset;

    #[test]
    fn box_examples() {
        assert_eq!(dyadic_box(&[0.0, 0.0], 5, 7).unwrap().coords(), Some(vec![0, 0]));
        let b = dyadic_box(&[0.5], 2, 1).unwrap();
        assert_eq!(b.coords(), Some(vec![1]));
        assert_eq!((b.lo()[0], b.hi()[0]), (0.5, 1.0));
        let t = dyadic_box(&[1.0 / 3.0], 3, 2).unwrap();
        // floor oracle: (1/3)·9 rounds to exactly 3 in f64
        assert_eq!(t.coords(), Some(vec![((1.0f64 / 3.0) * 9.0).floor() as u64]));
        assert_eq!(t.coords(), Some(vec![3]));
        assert!(matches!(dyadic_box(&[1.0], 2, 3), Err(Error::Input(_))));
        assert!(matches!(dyadic_box(&[0.2, -0.1], 2, 3), Err(Error::Input(_))));
    }

    #[test]
    fn deep_box_labels_are_exact() {
        let x = [0.3];
        let b = dyadic_box(&x, 2, 80).unwrap();
        assert_eq!(b.coords(), None);
        let direct = dyadic_box(&x, 2, 50).unwrap();
        let n: u128 = b.label().parse().unwrap();
        assert_eq!((n >> 30) as u64, direct.coords().unwrap()[0]);
    }

    #[test]
    fn point_mass_zoom() {
        let cloud = PointCloud::uniform(1, vec![0.3]).unwrap();
        let f = minimeasure(&cloud, &dyadic_box(&[0.3], 2, 1).unwrap()).unwrap();
        assert!((f.measure.point(0)[0] - 0.6).abs() < 1e-15);
        assert_eq!(f.parent_mass, 1.0);
        let empty = dyadic_box(&[0.7], 2, 1).unwrap();
        assert!(matches!(minimeasure(&cloud, &empty), Err(Error::EmptyFrame(_))));
    }

    #[test]
    fn uniform_cloud_is_self_similar() {
        let n = 1 << 12;
        let coords: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let cloud = PointCloud::uniform(1, coords).unwrap();
        let f = minimeasure(&cloud, &dyadic_box(&[0.1], 2, 1).unwrap()).unwrap();
        assert_eq!(f.measure.len(), n / 2);
        for (k, (p, w)) in f.measure.points().enumerate() {
            assert!((p[0] - (2 * k + 1) as f64 / n as f64).abs() < 1e-15);
            assert!((w - 2.0 / n as f64).abs() < 1e-18);
        }
    }

    #[test]
    fn zoom_composes() {
        let p = preset("fourcorner4").unwrap();
        let cloud = crate::ifs::sample_measure(&p.system, &p.gibbs, 4000, 12, 5).unwrap();
        let x = cloud.point(17).to_vec();
        let outer = minimeasure(&cloud, &dyadic_box(&x, 2, 2).unwrap()).unwrap();
        let inner_box = dyadic_box(&outer.box_index.renormalize(&x), 2, 3).unwrap();
        let twice = outer.zoom(&inner_box).unwrap();
        let once = minimeasure(&cloud, &dyadic_box(&x, 2, 5).unwrap()).unwrap();
        assert_eq!(twice.box_index, once.box_index);
        assert_eq!(twice.scale, 32.0);
        assert_eq!(twice.measure.len(), once.measure.len());
        for i in 0..once.measure.len() {
            for j in 0..2 {
                assert!((twice.measure.point(i)[j] - once.measure.point(i)[j]).abs() < 1e-12);
            }
        }
        assert!((twice.parent_mass - once.parent_mass).abs() < 1e-12);
    }

    #[test]
    fn walk_reaches_requested_length() {
        let p = preset("cantor3").unwrap();
        let walk = scenery_walk(&p.system, &p.gibbs, 1, 2, 60, 200).unwrap();
        assert_eq!(walk.frames.len(), 60);
        assert_eq!(walk.stop_level, None);
        for (n, f) in walk.frames.iter().enumerate() {
            assert_eq!(f.level as usize, n + 1);
            assert!(f.parent_mass > 0.0);
            assert!(f.measure.points().all(|(q, _)| (0.0..1.0).contains(&q[0])));
            assert!((f.measure.total_weight() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_circle_frames_turn() {
        let cloud = half_circle_cloud(200_000).unwrap();
        let mut angles = Vec::new();
        for t in [0.3f64, 1.2, 2.4] {
            let x = [0.5 + 0.45 * t.cos(), 0.05 + 0.45 * t.sin()];
            let frames = cloud_walk(&cloud, &x, 2, 8).unwrap();
            let last = frames.last().unwrap();
            angles.push(principal_direction(&last.measure).unwrap());
            // tangent of the circle at angle t
            let tangent = (t + std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI);
            let diff = (angles.last().unwrap() - tangent).abs();
            assert!(diff.min(std::f64::consts::PI - diff) < 0.05, "{t}: {angles:?}");
        }
        assert!((angles[0] - angles[2]).abs() > 0.5);
    }
}
