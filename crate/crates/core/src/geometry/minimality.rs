use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::IfsSystem;

use super::pairs::largest_angular_gap;

/// Distinct orthogonal parts kept per symbol and step before giving up.
pub const MAX_ANGLE_STATES: usize = 1_000_000;
/// Angles closer than this are merged.
const ANGLE_QUANTUM: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimalityReport {
    pub depth: usize,
    pub eps: f64,
    /// Distinct line directions `O(S_w)·e₁` modulo π, sorted.
    pub angles: Vec<f64>,
    pub largest_gap: f64,
    pub pass: bool,
}

/// Planar orthogonal map as the image angle of `e₁` plus a reflection bit;
/// angles are kept as multiples of [`ANGLE_QUANTUM`] modulo 2π.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Orth {
    reflect: bool,
    q: i64,
}

const TURN: i64 = (2.0 * PI / ANGLE_QUANTUM) as i64;

impl Orth {
    fn new(angle: f64, reflect: bool) -> Self {
        Orth { reflect, q: ((angle / ANGLE_QUANTUM).round() as i64).rem_euclid(TURN) }
    }

    /// `self ∘ other`. Rotations `R_a`, reflections `F_b` with `F_b e₁` at
    /// angle `b`: `R_a R_c = R_{a+c}`, `R_a F_b = F_{a+b}`, `F_b R_a = F_{b−a}`,
    /// `F_b F_c = R_{b−c}`.
    fn then(self, other: Orth) -> Orth {
        let q = if self.reflect { self.q - other.q } else { self.q + other.q };
        Orth { reflect: self.reflect != other.reflect, q: q.rem_euclid(TURN) }
    }

    fn line_angle(self) -> f64 {
        (self.q as f64 * ANGLE_QUANTUM).rem_euclid(PI)
    }
}

/// Directions of `O(S_w)·e₁` modulo π over admissible words of length up to
/// `depth`; passes iff the largest circular gap is below `eps`.
pub fn minimality_density(sys: &IfsSystem, depth: usize, eps: f64) -> Result<MinimalityReport> {
    if sys.dim() != 2 {
        return Err(Error::Unsupported("minimality check is planar".into()));
    }
    if depth == 0 || !(eps > 0.0) {
        return Err(Error::input("minimality needs depth ≥ 1 and eps > 0"));
    }
    let s = sys.symbolic();
    let m = s.alphabet_size();
    let parts: Vec<Orth> = (0..m)
        .map(|i| {
            let sim = sys.similarity(i).ok_or_else(|| Error::Unsupported("minimality needs similarities".into()))?;
            let (a, r) = sim.angle().expect("planar similarity");
            Ok(Orth::new(a, r))
        })
        .collect::<Result<_>>()?;
    // layer[j]: orthogonal parts of admissible words of the current length
    // starting with symbol j; words grow on the left so transitions are checked
    // against the first symbol.
    let mut layer: Vec<BTreeSet<Orth>> = parts.iter().map(|&o| BTreeSet::from([o])).collect();
    let mut all: BTreeSet<i64> = BTreeSet::new();
    let record = |layer: &[BTreeSet<Orth>], all: &mut BTreeSet<i64>| {
        for set in layer {
            for o in set {
                all.insert((o.line_angle() / ANGLE_QUANTUM).round() as i64);
            }
        }
    };
    record(&layer, &mut all);
    for _ in 1..depth {
        let next: Vec<BTreeSet<Orth>> = (0..m)
            .map(|i| {
                let mut set = BTreeSet::new();
                for j in s.successors(i) {
                    for &o in &layer[j] {
                        set.insert(parts[i].then(o));
                    }
                }
                set
            })
            .collect();
        let size: usize = next.iter().map(BTreeSet::len).sum();
        if size > MAX_ANGLE_STATES {
            return Err(Error::cap("orthogonal parts", size as u128, MAX_ANGLE_STATES as u128));
        }
        layer = next;
        record(&layer, &mut all);
    }
    let angles: Vec<f64> = all.into_iter().map(|q| q as f64 * ANGLE_QUANTUM).collect();
    let largest_gap = largest_angular_gap(&angles, PI);
    Ok(MinimalityReport { depth, eps, angles, largest_gap, pass: largest_gap < eps })
}
