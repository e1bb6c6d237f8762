//! Strongly separated full-shift subsystems extracted from an SFT-driven
//! system, with the Moran exponent of the extracted alphabet as a lower
//! bound for the attractor's dimension.
//!
//! Pipeline: admissible words of length `k` starting with 0, bounding balls,
//! greedy Vitali selection, extension of every kept word by a connector to a
//! fixed symbol `τ` with `τ0` admissible, and a final disjointness check of
//! the extended images.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{code_point, lip_bounds, IfsMap, IfsSystem, SeparationCertificate, SimilarityMap};
use crate::output;
use crate::symbolic::{SymbolicSystem, Symbol, Word, DEFAULT_WORD_CAP};

/// A closed ball containing `S_word(X)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundingBall {
    pub word: Word,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BoundingBall {
    pub fn new(word: Word, center: Vec<f64>, radius: f64) -> Self {
        BoundingBall { word, center, radius }
    }

    /// Center `S_w(c)` for the domain center `c` and radius
    /// `lip⁺(S_w)·diam(X)` for similarities; conformal words use the code
    /// ball, whose radius also carries the path diameter of the domain.
    pub fn of_word(sys: &IfsSystem, w: &Word) -> Result<Self> {
        if sys.is_similarity() {
            let lip = lip_bounds(sys, w)?;
            let center = sys.eval_word(w.symbols(), &sys.domain().center());
            Ok(BoundingBall::new(w.clone(), center, lip.lip_plus * sys.domain().diameter()))
        } else {
            let cp = code_point(sys, w)?;
            Ok(BoundingBall::new(w.clone(), cp.center, cp.radius))
        }
    }

    pub fn distance_to(&self, other: &BoundingBall) -> f64 {
        self.center.iter().zip(&other.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    /// Strictly disjoint with a relative margin; touching balls intersect.
    pub fn disjoint(&self, other: &BoundingBall) -> bool {
        self.distance_to(other) > (self.radius + other.radius) * (1.0 + 1e-12)
    }

    /// Whether `self` lies inside `other` scaled about its center by `factor`.
    pub fn inside_scaled(&self, other: &BoundingBall, factor: f64) -> bool {
        self.distance_to(other) + self.radius <= factor * other.radius * (1.0 + 1e-12)
    }
}

/// Outcome of the greedy selection. Indices refer to the input slice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VitaliSelection {
    /// Accepted balls in acceptance order.
    pub selected: Vec<usize>,
    /// For each input ball, the first accepted ball it meets (itself when
    /// accepted). That ball is at least as large.
    pub blocker: Vec<usize>,
}

impl VitaliSelection {
    /// Largest `(|c_i − c_b| + r_i)/r_b` over all inputs: the factor by which
    /// accepted balls must be inflated to cover every input ball. At most 3.
    pub fn inflation(&self, balls: &[BoundingBall]) -> f64 {
        (0..balls.len())
            .map(|i| {
                let b = &balls[self.blocker[i]];
                (balls[i].distance_to(b) + balls[i].radius) / b.radius
            })
            .fold(1.0, f64::max)
    }
}

/// Spatial hash with cells of a fixed side, keyed by integer coordinates.
struct Grid {
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl Grid {
    fn new(cell: f64) -> Self {
        Grid { cell: if cell > 0.0 { cell } else { 1.0 }, cells: HashMap::new() }
    }

    fn key(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, x: &[f64], id: usize) {
        let k = self.key(x);
        self.cells.entry(k).or_default().push(id);
    }

    /// Ids stored in the 3^d cells around `x`.
    fn near(&self, x: &[f64]) -> Vec<usize> {
        let base = self.key(x);
        let d = base.len();
        let mut out = Vec::new();
        for code in 0..3usize.pow(d as u32) {
            let mut k = base.clone();
            let mut c = code;
            for v in k.iter_mut() {
                *v += (c % 3) as i64 - 1;
                c /= 3;
            }
            if let Some(ids) = self.cells.get(&k) {
                out.extend_from_slice(ids);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Greedy Vitali selection: visit balls by nonincreasing radius, ties by
/// word order, and accept a ball iff it is disjoint from every accepted one.
pub fn vitali_select(balls: &[BoundingBall]) -> Result<VitaliSelection> {
    if balls.is_empty() {
        return Err(Error::input("Vitali selection needs at least one ball"));
    }
    if balls.iter().any(|b| !(b.radius.is_finite() && b.radius >= 0.0)) {
        return Err(Error::input("ball radii must be finite and nonnegative"));
    }
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| {
        balls[b]
            .radius
            .total_cmp(&balls[a].radius)
            .then_with(|| balls[a].word.cmp(&balls[b].word))
    });
    // An accepted ball meeting ball i has center within r_i + r_max ≤ 2 r_max.
    let r_max = balls[order[0]].radius;
    let mut grid = Grid::new(2.0 * r_max);
    let mut selected = Vec::new();
    let mut blocker = vec![usize::MAX; balls.len()];
    for &i in &order {
        let hit = grid
            .near(&balls[i].center)
            .into_iter()
            .find(|&slot| !balls[i].disjoint(&balls[selected[slot]]))
            .map(|slot| selected[slot]);
        match hit {
            Some(j) => blocker[i] = j,
            None => {
                grid.insert(&balls[i].center, selected.len());
                selected.push(i);
                blocker[i] = i;
            }
        }
    }
    Ok(VitaliSelection { selected, blocker })
}

/// Append to each word the shortest connector from its last symbol to `tau`.
/// Returns the extended words and `K`, the longest connector used.
pub fn extend_to_tau(s: &SymbolicSystem, words: &[Word], tau: Symbol) -> Result<(Vec<Word>, usize)> {
    if tau >= s.alphabet_size() {
        return Err(Error::input(format!("tau {tau} outside alphabet")));
    }
    let mut k_max = 0;
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        let last = w.last().ok_or_else(|| Error::input("empty word"))?;
        let j = s.shortest_connector(last, tau)?;
        k_max = k_max.max(j.len());
        out.push(w.concat(&j));
    }
    Ok((out, k_max))
}

/// The unique `t ≥ 0` with `Σ lip_i^t = 1`, by bisection to 1e-10.
///
/// The bracket is `[0, ln n / ln(1/max lip)]`: at the upper end every term
/// is at most `1/n`.
pub fn moran_exponent(lips: &[f64]) -> Result<f64> {
    if lips.is_empty() {
        return Err(Error::input("Moran equation needs at least one ratio"));
    }
    for (index, &factor) in lips.iter().enumerate() {
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::InvalidContraction { index, factor });
        }
    }
    let logs: Vec<f64> = lips.iter().map(|l| l.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum = |t: f64| logs.iter().map(|l| (t * l).exp()).sum::<f64>();
    let (mut lo, mut hi) = (0.0, (lips.len() as f64).ln() / -top);
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsystemWord {
    pub word: Word,
    pub lip_minus: f64,
    pub lip_plus: f64,
    pub ball: BoundingBall,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsystemResult {
    pub k: usize,
    pub tau: Symbol,
    /// The extracted alphabet: each word starts with 0 and ends with `tau`.
    pub words: Vec<SubsystemWord>,
    pub t_k: f64,
    pub separation: SeparationCertificate,
    /// Longest connector appended.
    pub connector_len: usize,
    /// Words of length `k` starting with 0 before selection.
    pub candidates: usize,
    /// Conformal words dropped because their lower Lipschitz bound was not
    /// certified.
    pub uncertified_dropped: usize,
    /// Inflation of accepted balls needed to cover all candidates.
    pub cover_inflation: f64,
    /// Largest `lip⁺(S_w)/lip⁻(S_{wj})` over kept words `w` with connector `j`.
    pub connector_factor: f64,
    /// Empirical `C`: inflation times connector factor.
    pub cover_constant: f64,
}

impl SubsystemResult {
    pub fn lips(&self) -> Vec<f64> {
        self.words.iter().map(|w| w.lip_minus).collect()
    }

    /// `word,lip_minus,lip_plus,x,y,…,radius`, one row per alphabet word.
    pub fn words_csv(&self) -> String {
        let d = self.words.first().map_or(0, |w| w.ball.center.len());
        let mut header = vec!["word".to_string(), "lip_minus".into(), "lip_plus".into()];
        header.extend(coordinate_names(d));
        header.push("radius".into());
        let mut out = output::row(header);
        for w in &self.words {
            let mut fields = vec![w.word.to_string(), output::num(w.lip_minus), output::num(w.lip_plus)];
            fields.extend(w.ball.center.iter().map(|&c| output::num(c)));
            fields.push(output::num(w.ball.radius));
            out.push_str(&output::row(fields));
        }
        out
    }

    /// `k,tau,t_k,n_words,C` header and one row.
    pub fn summary_csv(&self) -> String {
        let mut out = output::row(["k", "tau", "t_k", "n_words", "C"]);
        out.push_str(&output::row([
            self.k.to_string(),
            self.tau.to_string(),
            output::num(self.t_k),
            self.words.len().to_string(),
            output::num(self.cover_constant),
        ]));
        out
    }
}

pub(crate) fn coordinate_names(d: usize) -> Vec<String> {
    (0..d)
        .map(|i| match i {
            0 => "x".to_string(),
            1 => "y".into(),
            2 => "z".into(),
            _ => format!("x{i}"),
        })
        .collect()
}

/// Least `τ` with `τ0` admissible.
pub fn default_tau(s: &SymbolicSystem) -> Result<Symbol> {
    (0..s.alphabet_size())
        .find(|&t| s.allowed(t, 0))
        .ok_or_else(|| Error::input("no symbol tau with tau·0 admissible"))
}

pub fn extract(sys: &IfsSystem, k: usize, tau: Option<Symbol>) -> Result<SubsystemResult> {
    extract_capped(sys, k, tau, DEFAULT_WORD_CAP)
}

pub fn extract_capped(sys: &IfsSystem, k: usize, tau: Option<Symbol>, cap: u128) -> Result<SubsystemResult> {
    let s = sys.symbolic();
    if !s.is_transitive() {
        return Err(Error::NotTransitive);
    }
    let tau = match tau {
        Some(t) if t >= s.alphabet_size() => return Err(Error::input(format!("tau {t} outside alphabet"))),
        Some(t) if !s.allowed(t, 0) => return Err(Error::input(format!("tau {t}: {t}·0 is not admissible"))),
        Some(t) => t,
        None => default_tau(s)?,
    };
    let candidates = s.admissible_words_capped(k, Some(0), cap)?;
    let balls: Vec<BoundingBall> =
        candidates.par_iter().map(|w| BoundingBall::of_word(sys, w)).collect::<Result<_>>()?;
    let selection = vitali_select(&balls)?;
    let mut kept: Vec<usize> = selection.selected.clone();
    kept.sort_unstable();
    let kept_words: Vec<Word> = kept.iter().map(|&i| candidates[i].clone()).collect();
    let (extended, connector_len) = extend_to_tau(s, &kept_words, tau)?;

    let data: Vec<(SubsystemWord, bool, f64)> = kept
        .par_iter()
        .zip(&extended)
        .map(|(&i, w)| {
            let lip = lip_bounds(sys, w)?;
            let parent = lip_bounds(sys, &candidates[i])?;
            let ball = BoundingBall::of_word(sys, w)?;
            let entry = SubsystemWord { word: w.clone(), lip_minus: lip.lip_minus, lip_plus: lip.lip_plus, ball };
            Ok((entry, lip.certified, parent.lip_plus / lip.lip_minus))
        })
        .collect::<Result<_>>()?;
    let uncertified_dropped = data.iter().filter(|d| !d.1).count();
    let connector_factor = data.iter().filter(|d| d.1).map(|d| d.2).fold(1.0, f64::max);
    let words: Vec<SubsystemWord> = data.into_iter().filter(|d| d.1).map(|d| d.0).collect();
    if words.is_empty() {
        return Err(Error::Degenerate("subsystem extraction kept no words".into()));
    }

    let separation = certify_disjoint(sys, &words)?;
    let lips: Vec<f64> = words.iter().map(|w| w.lip_minus).collect();
    let t_k = if lips.len() == 1 { 0.0 } else { moran_exponent(&lips)? };
    let cover_inflation = selection.inflation(&balls);
    Ok(SubsystemResult {
        k,
        tau,
        words,
        t_k,
        separation,
        connector_len,
        candidates: candidates.len(),
        uncertified_dropped,
        cover_inflation,
        connector_factor,
        cover_constant: cover_inflation * connector_factor,
    })
}

/// Pairwise disjointness of the extended word images. Pairs whose bounding
/// balls meet are tested with exact image regions; the others are disjoint
/// already. The gap reported is a lower bound over all pairs.
fn certify_disjoint(sys: &IfsSystem, words: &[SubsystemWord]) -> Result<SeparationCertificate> {
    let r_max = words.iter().map(|w| w.ball.radius).fold(0.0, f64::max);
    // pairs outside neighboring cells of side 4 r_max are 2 r_max apart
    let mut grid = Grid::new(4.0 * r_max);
    for (i, w) in words.iter().enumerate() {
        grid.insert(&w.ball.center, i);
    }
    let gaps: Vec<f64> = (0..words.len())
        .into_par_iter()
        .map(|i| {
            let mut gap = 2.0 * r_max;
            let mut region = None;
            for j in grid.near(&words[i].ball.center) {
                if j <= i {
                    continue;
                }
                let ball_gap = words[i].ball.distance_to(&words[j].ball) - words[i].ball.radius - words[j].ball.radius;
                let g = if ball_gap > 0.0 {
                    ball_gap
                } else {
                    let ri = region.get_or_insert_with(|| sys.image_region(words[i].word.symbols()));
                    ri.separation(&sys.image_region(words[j].word.symbols()))
                };
                gap = gap.min(g);
            }
            gap
        })
        .collect();
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    if words.len() > 1 && min_gap <= 0.0 {
        let i = gaps.iter().position(|&g| g == min_gap).unwrap_or(0);
        return Err(Error::Internal(format!(
            "extended image of {} is not separated from a neighbor (gap {min_gap:e})",
            words[i].word
        )));
    }
    let gap = if words.len() > 1 { min_gap } else { f64::INFINITY };
    Ok(SeparationCertificate { depth: 1, gap, min_gap: gap, lookahead: 0, all_depths: true })
}

/// The full-shift similarity system generated by the extracted words.
pub fn induced_system(sys: &IfsSystem, result: &SubsystemResult) -> Result<IfsSystem> {
    let maps: Vec<IfsMap> = result
        .words
        .iter()
        .map(|w| {
            let mut acc = SimilarityMap::identity(sys.dim());
            for &s in w.word.symbols() {
                let m = sys.similarity(s).ok_or_else(|| Error::Unsupported("induced system needs similarities".into()))?;
                acc = acc.compose(m);
            }
            Ok(IfsMap::Similarity(acc))
        })
        .collect::<Result<_>>()?;
    let shift = SymbolicSystem::full_shift(maps.len())?;
    IfsSystem::new(format!("{}-subsystem-k{}", sys.name(), result.k), shift, maps, sys.domain().clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct KStep {
    pub k: usize,
    /// Raw exponent at this `k`, absent when the run failed.
    pub t_k: Option<f64>,
    /// Best exponent over all `k' ≤ k`.
    pub running_best: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Approximation {
    pub t_best: f64,
    pub k_best: usize,
    pub best: SubsystemResult,
    pub steps: Vec<KStep>,
    pub oracle: Option<f64>,
    /// `t_best ≥ oracle − eps`, when an oracle is known.
    pub confirmed: Option<bool>,
    /// Some `k` hit a cap before the target was met.
    pub capped: bool,
}

/// Run [`extract`] for `k = 2..=k_max` and keep the best exponent.
pub fn approximate_dimension(
    sys: &IfsSystem,
    eps: f64,
    k_max: usize,
    oracle: Option<f64>,
    cap: u128,
) -> Result<Approximation> {
    if !(eps > 0.0) {
        return Err(Error::input("eps must be positive"));
    }
    if k_max < 2 {
        return Err(Error::input("k_max must be at least 2"));
    }
    let runs: Vec<(usize, Result<SubsystemResult>)> =
        (2..=k_max).into_par_iter().map(|k| (k, extract_capped(sys, k, None, cap))).collect();
    let mut steps = Vec::new();
    let mut best: Option<SubsystemResult> = None;
    let mut capped = false;
    for (k, run) in runs {
        let (t_k, error) = match run {
            Ok(r) => {
                let t = r.t_k;
                if best.as_ref().is_none_or(|b| t > b.t_k) {
                    best = Some(r);
                }
                (Some(t), None)
            }
            Err(e @ Error::Cap { .. }) => {
                capped = true;
                (None, Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
        let running_best = best.as_ref().map_or(0.0, |b| b.t_k);
        steps.push(KStep { k, t_k, running_best, error });
    }
    let best = best.ok_or_else(|| Error::Degenerate("no k produced a subsystem".into()))?;
    let confirmed = oracle.map(|o| best.t_k >= o - eps);
    Ok(Approximation {
        t_best: best.t_k,
        k_best: best.k,
        steps,
        oracle,
        confirmed,
        capped: capped && confirmed != Some(true),
        best,
    })
}
