//! Contracting map families on a fixed ambient domain: similarities of
//! `R^d` and holomorphic maps of a planar domain, composed along admissible
//! words of a subshift.

mod domain;
mod maps;
mod presets;
mod separation;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use domain::Domain;
pub use maps::{ConformalMap, Moebius, QuadBranch, SimilarityMap};
pub use presets::{preset, preset_names, Preset};
pub use separation::{check_strong_separation, Separation, SeparationCertificate};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::gibbs::{pressure, GibbsModel, Potential};
use crate::region::Region;
use crate::symbolic::{Symbol, SymbolicSystem, Word};

/// Largest number of points `sample_measure` will draw.
pub const MAX_SAMPLES: usize = 10_000_000;
/// Longest word `sample_measure` will simulate.
pub const MAX_SAMPLE_DEPTH: usize = 64;
/// Width of the neighbourhood of the domain on which conformal maps must be
/// holomorphic for the derivative margin to be certified.
pub const CONFORMAL_MARGIN: f64 = 0.02;

const SAMPLE_CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IfsMap {
    Similarity(SimilarityMap),
    Conformal(ConformalMap),
}

/// Upper and lower Lipschitz constants of a composed map on the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LipData {
    pub lip_minus: f64,
    pub lip_plus: f64,
    /// Exact for similarities and Möbius maps, grid plus a valid margin for
    /// other conformal maps.
    pub certified: bool,
}

/// Center and radius of a ball containing `S_w(X)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CodePoint {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// `S_{w_0} ∘ ⋯ ∘ S_{w_{k−1}}` in evaluable form.
#[derive(Clone, Debug, PartialEq)]
pub enum ComposedMap {
    Similarity(SimilarityMap),
    Moebius(Moebius),
    /// Maps in word order; the last one is applied first.
    Chain(Vec<ConformalMap>),
}

impl ComposedMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ComposedMap::Similarity(s) => s.apply(x),
            ComposedMap::Moebius(m) => to_vec(m.eval(to_c(x))),
            ComposedMap::Chain(maps) => {
                let z = maps.iter().rev().fold(to_c(x), |z, m| m.eval(z));
                to_vec(z)
            }
        }
    }

    /// `|D_x S|`: operator norm of the derivative.
    pub fn derivative_norm(&self, x: &[f64]) -> f64 {
        match self {
            ComposedMap::Similarity(s) => s.ratio(),
            ComposedMap::Moebius(m) => m.derivative(to_c(x)).norm(),
            ComposedMap::Chain(maps) => chain_derivative(maps, to_c(x)),
        }
    }
}

fn to_c(x: &[f64]) -> Complex64 {
    Complex64::new(x[0], x[1])
}

fn to_vec(z: Complex64) -> Vec<f64> {
    vec![z.re, z.im]
}

fn chain_derivative(maps: &[ConformalMap], mut z: Complex64) -> f64 {
    let mut d = 1.0;
    for m in maps.iter().rev() {
        d *= m.derivative(z).norm();
        z = m.eval(z);
    }
    d
}

/// Indexed contractions, one per symbol, on a common domain.
#[derive(Clone, Debug)]
pub struct IfsSystem {
    name: String,
    symbolic: SymbolicSystem,
    maps: Vec<IfsMap>,
    domain: Domain,
    /// Per-map bound on `|S''/S'|` over the enlarged domain (conformal only).
    kappa: Vec<f64>,
    /// Largest single-map upper Lipschitz constant.
    rho: f64,
    grid: Vec<Complex64>,
    grid_radius: f64,
    distortion: f64,
}

impl IfsSystem {
    pub fn new(
        name: impl Into<String>,
        symbolic: SymbolicSystem,
        maps: Vec<IfsMap>,
        domain: Domain,
    ) -> Result<Self> {
        let m = symbolic.alphabet_size();
        if maps.len() != m {
            return Err(Error::input(format!(
                "{} maps for an alphabet of {m} symbols",
                maps.len()
            )));
        }
        let conformal = matches!(maps[0], IfsMap::Conformal(_));
        if maps.iter().any(|f| matches!(f, IfsMap::Conformal(_)) != conformal) {
            return Err(Error::input("cannot mix similarities and conformal maps"));
        }
        let mut sys = IfsSystem {
            name: name.into(),
            symbolic,
            maps,
            domain,
            kappa: Vec::new(),
            rho: 0.0,
            grid: Vec::new(),
            grid_radius: 0.0,
            distortion: 1.0,
        };
        if conformal {
            sys.init_conformal()?;
        } else {
            sys.init_similarity()?;
        }
        Ok(sys)
    }

    fn init_similarity(&mut self) -> Result<()> {
        let d = match self.domain {
            Domain::Cube { dim } if dim > 0 => dim,
            _ => return Err(Error::input("similarity systems live on the unit cube")),
        };
        let corners = self.domain.boundary_samples(1);
        for (i, f) in self.maps.iter().enumerate() {
            let IfsMap::Similarity(s) = f else { unreachable!() };
            if s.dim() != d {
                return Err(Error::input(format!("map {i} has dimension {}, domain {d}", s.dim())));
            }
            if !(s.ratio() < 1.0) {
                return Err(Error::InvalidContraction { index: i, factor: s.ratio() });
            }
            if corners.iter().any(|c| !self.domain.contains(&s.apply(c), 1e-12)) {
                return Err(Error::input(format!("map {i} does not send the unit cube into itself")));
            }
            self.rho = self.rho.max(s.ratio());
        }
        Ok(())
    }

    fn init_conformal(&mut self) -> Result<()> {
        if self.domain.dim() != 2 {
            return Err(Error::input("conformal systems live on a planar domain"));
        }
        let (grid, radius) = self.domain.planar_grid();
        self.grid = grid;
        self.grid_radius = radius;
        let mut kappa = Vec::with_capacity(self.maps.len());
        for (i, f) in self.maps.iter().enumerate() {
            let IfsMap::Conformal(c) = f else { unreachable!() };
            let k = match c.singularity() {
                None => 0.0,
                Some(p) => {
                    let dist = self.domain.distance_to(p);
                    if dist <= 0.0 {
                        return Err(Error::input(format!(
                            "map {i} has a singularity at {p} inside the domain"
                        )));
                    }
                    if dist > CONFORMAL_MARGIN {
                        c.log_derivative_bound(dist - CONFORMAL_MARGIN)
                    } else {
                        f64::INFINITY
                    }
                }
            };
            kappa.push(k);
        }
        self.kappa = kappa;
        let samples = self.domain.boundary_samples(64);
        for i in 0..self.maps.len() {
            let IfsMap::Conformal(c) = &self.maps[i] else { unreachable!() };
            let outside = samples
                .iter()
                .map(|x| to_vec(c.eval(to_c(x))))
                .chain(self.grid.iter().map(|&z| to_vec(c.eval(z))))
                .any(|y| !self.domain.contains(&y, 1e-9));
            if outside {
                return Err(Error::input(format!("map {i} does not send the domain into itself")));
            }
            // rho is still 0 here, so single-symbol margins use kappa alone.
            let lip = self.lip_unchecked(&[i]);
            if !(lip.lip_plus < 1.0) {
                return Err(Error::InvalidContraction { index: i, factor: lip.lip_plus });
            }
            self.rho = self.rho.max(lip.lip_plus);
        }
        let kmax = self.kappa.iter().copied().fold(0.0, f64::max);
        let spread = self.domain.path_diameter() + 2.0 * self.grid_radius;
        self.distortion = (kmax * spread / (1.0 - self.rho)).exp();
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbolic(&self) -> &SymbolicSystem {
        &self.symbolic
    }

    pub fn maps(&self) -> &[IfsMap] {
        &self.maps
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_similarity(&self) -> bool {
        matches!(self.maps[0], IfsMap::Similarity(_))
    }

    /// Bounded distortion constant `L`: `lip⁺(w)/lip⁻(w) ≤ L` for every word.
    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    /// Largest single-map contraction ratio.
    pub fn max_ratio(&self) -> f64 {
        self.rho
    }

    pub fn similarity(&self, i: Symbol) -> Option<&SimilarityMap> {
        match self.maps.get(i) {
            Some(IfsMap::Similarity(s)) => Some(s),
            _ => None,
        }
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        if self.symbolic.is_admissible(w)? {
            Ok(())
        } else {
            Err(Error::input(format!("word {w} is not admissible")))
        }
    }

    /// Image of `x` under `S_w`, without building the composed map.
    pub fn eval_word(&self, w: &[Symbol], x: &[f64]) -> Vec<f64> {
        if self.is_similarity() {
            let mut y = x.to_vec();
            for &s in w.iter().rev() {
                if let IfsMap::Similarity(f) = &self.maps[s] {
                    y = f.apply(&y);
                }
            }
            y
        } else {
            let mut z = to_c(x);
            for &s in w.iter().rev() {
                if let IfsMap::Conformal(f) = &self.maps[s] {
                    z = f.eval(z);
                }
            }
            to_vec(z)
        }
    }

    fn lip_unchecked(&self, w: &[Symbol]) -> LipData {
        match self.compose_unchecked(w) {
            ComposedMap::Similarity(s) => LipData {
                lip_minus: s.ratio(),
                lip_plus: s.ratio(),
                certified: true,
            },
            ComposedMap::Moebius(m) => match m.pole() {
                None => {
                    let r = (m.a / m.d).norm();
                    LipData { lip_minus: r, lip_plus: r, certified: true }
                }
                Some(p) => LipData {
                    lip_minus: m.derivative_at_distance(self.domain.max_distance_to(p)),
                    lip_plus: m.derivative_at_distance(self.domain.distance_to(p)),
                    certified: true,
                },
            },
            ComposedMap::Chain(maps) => {
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for &z in &self.grid {
                    let d = chain_derivative(&maps, z);
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                let k = w.len();
                let kw: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(l, &s)| self.kappa[s] * self.rho.powi((k - 1 - l) as i32))
                    .sum();
                if kw.is_finite() {
                    let margin = (kw * self.grid_radius).exp();
                    LipData { lip_minus: lo / margin, lip_plus: hi * margin, certified: true }
                } else {
                    LipData { lip_minus: lo, lip_plus: hi, certified: false }
                }
            }
        }
    }

    fn compose_unchecked(&self, w: &[Symbol]) -> ComposedMap {
        if self.is_similarity() {
            let id = SimilarityMap::identity(self.dim());
            ComposedMap::Similarity(w.iter().fold(id, |acc, &s| match &self.maps[s] {
                IfsMap::Similarity(f) => acc.compose(f),
                IfsMap::Conformal(_) => unreachable!(),
            }))
        } else {
            let all_moebius = w
                .iter()
                .all(|&s| matches!(self.maps[s], IfsMap::Conformal(ConformalMap::Moebius(_))));
            if all_moebius {
                ComposedMap::Moebius(w.iter().fold(Moebius::identity(), |acc, &s| {
                    match &self.maps[s] {
                        IfsMap::Conformal(ConformalMap::Moebius(m)) => acc.compose(m),
                        _ => unreachable!(),
                    }
                }))
            } else {
                ComposedMap::Chain(
                    w.iter()
                        .map(|&s| match &self.maps[s] {
                            IfsMap::Conformal(c) => *c,
                            IfsMap::Similarity(_) => unreachable!(),
                        })
                        .collect(),
                )
            }
        }
    }

    /// Closed region containing `S_w(X)`: exact convex images for
    /// similarities in dimension ≤ 2, exact disk images for Möbius maps,
    /// the code-point ball otherwise.
    pub fn image_region(&self, w: &[Symbol]) -> Region {
        match self.compose_unchecked(w) {
            ComposedMap::Similarity(s) => cube_image(&s),
            ComposedMap::Moebius(m) if matches!(self.domain, Domain::Cube { .. }) => {
                let c = Complex64::new(0.5, 0.5);
                match m.disk_image(c, std::f64::consts::FRAC_1_SQRT_2) {
                    Some((z, r)) => Region::ball(to_vec(z), r),
                    None => self.code_ball(w),
                }
            }
            _ => self.code_ball(w),
        }
    }

    fn code_ball(&self, w: &[Symbol]) -> Region {
        let cp = self.code_point_unchecked(w);
        Region::ball(cp.center, cp.radius)
    }

    fn code_point_unchecked(&self, w: &[Symbol]) -> CodePoint {
        let lip = self.lip_unchecked(w);
        CodePoint {
            center: self.eval_word(w, &self.domain.center()),
            radius: lip.lip_plus * self.domain.path_diameter(),
        }
    }
}

/// Image of the unit cube under a similarity: an interval, a convex
/// quadrilateral, or (from dimension 3) the circumscribed ball.
pub fn cube_image(s: &SimilarityMap) -> Region {
    match s.dim() {
        1 => {
            let (a, b) = (s.apply(&[0.0])[0], s.apply(&[1.0])[0]);
            Region::Interval { lo: a.min(b), hi: a.max(b) }
        }
        2 => Region::Polygon(
            [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
                .iter()
                .map(|c| {
                    let y = s.apply(c);
                    [y[0], y[1]]
                })
                .collect(),
        ),
        d => Region::ball(s.apply(&vec![0.5; d]), s.ratio() * (d as f64).sqrt() / 2.0),
    }
}

/// `S_{w_0} ∘ ⋯ ∘ S_{w_{k−1}}`.
pub fn compose(sys: &IfsSystem, w: &Word) -> Result<ComposedMap> {
    sys.check_word(w)?;
    Ok(sys.compose_unchecked(w.symbols()))
}

pub fn lip_bounds(sys: &IfsSystem, w: &Word) -> Result<LipData> {
    sys.check_word(w)?;
    Ok(sys.lip_unchecked(w.symbols()))
}

/// Ball containing `S_w(X)`, hence every point of `Π([w])`.
pub fn code_point(sys: &IfsSystem, w: &Word) -> Result<CodePoint> {
    sys.check_word(w)?;
    Ok(sys.code_point_unchecked(w.symbols()))
}

/// Draw `n` words of length `depth` from the Gibbs measure and map each to
/// its code point; every point has weight `1/n`.
///
/// The work is split in fixed chunks, each with its own ChaCha stream, so the
/// output does not depend on the number of worker threads.
pub fn sample_measure(
    sys: &IfsSystem,
    g: &GibbsModel,
    n: usize,
    depth: usize,
    seed: u64,
) -> Result<PointCloud> {
    if g.system() != sys.symbolic() {
        return Err(Error::input("Gibbs model is built on a different subshift"));
    }
    if n == 0 || depth == 0 {
        return Err(Error::input("sample size and depth must be positive"));
    }
    if n > MAX_SAMPLES {
        return Err(Error::cap("sample points", n as u128, MAX_SAMPLES as u128));
    }
    if depth > MAX_SAMPLE_DEPTH {
        return Err(Error::cap("sample depth", depth as u128, MAX_SAMPLE_DEPTH as u128));
    }
    let d = sys.dim();
    let x0 = sys.domain.center();
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(SAMPLE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            let mut out = Vec::with_capacity(count * d);
            for _ in 0..count {
                let w = g.sample_word(&mut rng, depth);
                out.extend(sys.eval_word(w.symbols(), &x0));
            }
            out
        })
        .collect();
    PointCloud::uniform(d, chunks.concat())
}

/// Similarity dimension of a similarity system on its subshift: the zero of
/// `s ↦ P(s·log r_i)`, found by bisection.
pub fn similarity_dimension(sys: &IfsSystem) -> Result<f64> {
    let ratios: Vec<f64> = (0..sys.symbolic.alphabet_size())
        .map(|i| sys.similarity(i).map(|s| s.ratio().ln()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Unsupported("similarity dimension needs similarities".into()))?;
    let p = |s: f64| -> Result<f64> {
        let vals: Vec<f64> = ratios.iter().map(|l| s * l).collect();
        pressure(&sys.symbolic, &Potential::depth1(&sys.symbolic, &vals)?)
    };
    let (mut lo, mut hi) = (0.0, sys.dim() as f64 * 4.0);
    if p(hi)? > 0.0 {
        return Err(Error::Degenerate("pressure does not vanish".into()));
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if p(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
