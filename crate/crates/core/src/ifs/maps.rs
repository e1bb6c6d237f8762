use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x ↦ ratio · O x + t` on `R^d`, with `O` orthogonal (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMap {
    ratio: f64,
    orthogonal: Vec<f64>,
    translation: Vec<f64>,
}

impl SimilarityMap {
    pub fn new(ratio: f64, orthogonal: Vec<f64>, translation: Vec<f64>) -> Result<Self> {
        let d = translation.len();
        if d == 0 || orthogonal.len() != d * d {
            return Err(Error::input(format!(
                "orthogonal part has {} entries, expected {}",
                orthogonal.len(),
                d * d
            )));
        }
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::input(format!("ratio {ratio} must be positive")));
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| orthogonal[k * d + i] * orthogonal[k * d + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return Err(Error::input("linear part is not orthogonal"));
                }
            }
        }
        Ok(SimilarityMap {
            ratio,
            orthogonal,
            translation,
        })
    }

    /// `x ↦ ratio·x + t` or `x ↦ −ratio·x + t` on the line.
    pub fn line(ratio: f64, flip: bool, t: f64) -> Result<Self> {
        Self::new(ratio, vec![if flip { -1.0 } else { 1.0 }], vec![t])
    }

    /// Planar similarity `ratio · R(angle) · F + t` where `F` is the
    /// reflection `(x, y) ↦ (x, −y)` when `reflect` is set.
    pub fn planar(ratio: f64, angle: f64, reflect: bool, t: [f64; 2]) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let f = if reflect { -1.0 } else { 1.0 };
        Self::new(ratio, vec![c, -s * f, s, c * f], t.to_vec())
    }

    /// Homothety `x ↦ ratio·x + t`.
    pub fn homothety(ratio: f64, t: Vec<f64>) -> Result<Self> {
        let d = t.len();
        let mut o = vec![0.0; d * d];
        for i in 0..d {
            o[i * d + i] = 1.0;
        }
        Self::new(ratio, o, t)
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn orthogonal(&self) -> &[f64] {
        &self.orthogonal
    }

    pub fn translation(&self) -> &[f64] {
        &self.translation
    }

    /// For planar maps: rotation angle in `(−π, π]` and reflection bit.
    pub fn angle(&self) -> Option<(f64, bool)> {
        if self.dim() != 2 {
            return None;
        }
        let o = &self.orthogonal;
        let det = o[0] * o[3] - o[1] * o[2];
        Some((o[2].atan2(o[0]), det < 0.0))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                let lin: f64 = (0..d).map(|k| self.orthogonal[i * d + k] * x[k]).sum();
                self.ratio * lin + self.translation[i]
            })
            .collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SimilarityMap) -> SimilarityMap {
        let d = self.dim();
        let mut o = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                o[i * d + j] = (0..d)
                    .map(|k| self.orthogonal[i * d + k] * other.orthogonal[k * d + j])
                    .sum();
            }
        }
        SimilarityMap {
            ratio: self.ratio * other.ratio,
            orthogonal: o,
            translation: self.apply(&other.translation),
        }
    }

    pub fn identity(d: usize) -> SimilarityMap {
        Self::homothety(1.0, vec![0.0; d]).expect("identity is a similarity")
    }
}

/// `z ↦ (az + b)/(cz + d)` with `ad − bc ≠ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moebius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Moebius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let m = Moebius { a, b, c, d };
        if !(m.det().norm() > 0.0) || [a, b, c, d].iter().any(|z| !z.is_finite()) {
            return Err(Error::input("Möbius coefficients must be finite with ad − bc ≠ 0"));
        }
        Ok(m.normalized())
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Moebius { a: one, b: zero, c: zero, d: one }
    }

    /// Generator built from two reflections: across the horizontal line
    /// `Im z = −h`, then inversion in the circle `|z − center| = radius`.
    /// The result `z ↦ center + r² / (z + 2ih − conj(center))` is holomorphic
    /// and maps everything above the line into the disk.
    pub fn circle_pair(center: Complex64, radius: f64, h: f64) -> Result<Self> {
        let d = Complex64::new(0.0, 2.0 * h) - center.conj();
        Self::new(center, center * d + radius * radius, Complex64::new(1.0, 0.0), d)
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    fn normalized(self) -> Self {
        let s = [self.a, self.b, self.c, self.d]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        Moebius {
            a: self.a / s,
            b: self.b / s,
            c: self.c / s,
            d: self.d / s,
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let q = self.c * z + self.d;
        self.det() / (q * q)
    }

    /// `self ∘ other`: the coefficient matrices multiply.
    pub fn compose(&self, o: &Moebius) -> Moebius {
        Moebius {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
        .normalized()
    }

    /// Pole `−d/c`, or `None` for affine maps.
    pub fn pole(&self) -> Option<Complex64> {
        let scale = self.a.norm().max(self.d.norm());
        (self.c.norm() > 1e-14 * scale).then(|| -self.d / self.c)
    }

    /// `|S'(z)|` as a function of the distance `|z − pole|`.
    pub fn derivative_at_distance(&self, dist: f64) -> f64 {
        self.det().norm() / (self.c.norm_sqr() * dist * dist)
    }

    /// Image of the closed disk `|z − z0| ≤ r` (pole outside) as (center, radius).
    pub fn disk_image(&self, z0: Complex64, r: f64) -> Option<(Complex64, f64)> {
        match self.pole() {
            None => Some((self.eval(z0), (self.a / self.d).norm() * r)),
            Some(p) => {
                let q = z0 - p;
                let den = q.norm_sqr() - r * r;
                if den <= 0.0 {
                    return None;
                }
                // S(z) = a/c − (det/c²) · 1/(z − p)
                let k = self.det() / (self.c * self.c);
                let inv_center = q.conj() / den;
                Some((self.a / self.c - k * inv_center, k.norm() * r / den))
            }
        }
    }
}

/// Inverse branch `w ↦ o + sign·√((w − o)·span − c) / span` of `z² + c`,
/// conjugated by the affine rescaling `w = o + z/span`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadBranch {
    pub c: Complex64,
    pub sign: f64,
    pub offset: Complex64,
    pub span: f64,
}

impl QuadBranch {
    pub fn eval(&self, w: Complex64) -> Complex64 {
        let z = (w - self.offset) * self.span;
        self.offset + self.sign * (z - self.c).sqrt() / self.span
    }

    pub fn derivative(&self, w: Complex64) -> Complex64 {
        let z = (w - self.offset) * self.span;
        self.sign * 0.5 / (z - self.c).sqrt()
    }

    /// Branch point in rescaled coordinates.
    pub fn branch_point(&self) -> Complex64 {
        self.offset + self.c / self.span
    }
}

/// Holomorphic contraction on a planar domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConformalMap {
    Moebius(Moebius),
    QuadBranch(QuadBranch),
}

impl ConformalMap {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            ConformalMap::Moebius(m) => m.eval(z),
            ConformalMap::QuadBranch(q) => q.eval(z),
        }
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        match self {
            ConformalMap::Moebius(m) => m.derivative(z),
            ConformalMap::QuadBranch(q) => q.derivative(z),
        }
    }

    /// Point where holomorphy or injectivity of the derivative fails.
    pub fn singularity(&self) -> Option<Complex64> {
        match self {
            ConformalMap::Moebius(m) => m.pole(),
            ConformalMap::QuadBranch(q) => Some(q.branch_point()),
        }
    }

    /// Bound on `|S''/S'|` (the Lipschitz constant of `log|S'|`) at points
    /// whose distance to the singularity is at least `dist`.
    pub fn log_derivative_bound(&self, dist: f64) -> f64 {
        match self {
            ConformalMap::Moebius(m) if m.pole().is_none() => 0.0,
            ConformalMap::Moebius(_) => 2.0 / dist,
            ConformalMap::QuadBranch(_) => 0.5 / dist,
        }
    }
}
