use serde::Serialize;

use super::IfsSystem;
use crate::error::{Error, Result};
use crate::region::Region;
use crate::symbolic::{Symbol, Word, DEFAULT_WORD_CAP};

/// Largest extension length used to shrink cylinder bounds when the plain
/// images `S_u(X)` touch.
pub const MAX_LOOKAHEAD: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationCertificate {
    /// Depth to which every incomparable pair was tested.
    pub depth: usize,
    /// Smallest gap between first-level pieces.
    pub gap: f64,
    /// Smallest gap over all tested sibling pairs.
    pub min_gap: f64,
    /// Cylinders were bounded by the union of `S_{we}(X)` over admissible
    /// extensions `e` of this length (0 means `S_w(X)` itself).
    pub lookahead: usize,
    /// Positive first-level gap: separation holds at every depth.
    pub all_depths: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Separation {
    Pass(SeparationCertificate),
    Fail { u: Word, v: Word, overlap: f64 },
}

impl Separation {
    pub fn is_pass(&self) -> bool {
        matches!(self, Separation::Pass(_))
    }
}

/// Test disjointness of bounding regions for incomparable admissible pairs
/// up to `depth`. Two incomparable words split at their longest common
/// prefix `p` into `p·i…` and `p·j…`, and pieces nest, so only sibling
/// cylinders `p·i`, `p·j` need checking.
pub fn check_strong_separation(sys: &IfsSystem, depth: usize) -> Result<Separation> {
    if depth == 0 {
        return Err(Error::input("separation depth must be at least 1"));
    }
    let words = sys.symbolic.count_words(depth.saturating_sub(1), None);
    if depth > 1 && words > DEFAULT_WORD_CAP {
        return Err(Error::cap("separation prefixes", words, DEFAULT_WORD_CAP));
    }
    let mut first_fail = None;
    for lookahead in 0..=MAX_LOOKAHEAD {
        match check_with_lookahead(sys, depth, lookahead) {
            Ok(cert) => return Ok(Separation::Pass(cert)),
            Err(fail) => {
                first_fail.get_or_insert(fail);
            }
        }
    }
    let (u, v, overlap) = first_fail.expect("at least one attempt");
    Ok(Separation::Fail { u, v, overlap })
}

fn cylinder_region(sys: &IfsSystem, w: &[Symbol], lookahead: usize) -> Region {
    if lookahead == 0 {
        return sys.image_region(w);
    }
    let mut parts = Vec::new();
    let mut buf = w.to_vec();
    extend(sys, &mut buf, lookahead, &mut parts);
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Region::Union(parts)
    }
}

fn extend(sys: &IfsSystem, buf: &mut Vec<Symbol>, left: usize, out: &mut Vec<Region>) {
    if left == 0 {
        out.push(sys.image_region(buf));
        return;
    }
    let last = *buf.last().expect("nonempty");
    for s in sys.symbolic.successors(last).collect::<Vec<_>>() {
        buf.push(s);
        extend(sys, buf, left - 1, out);
        buf.pop();
    }
}

fn check_with_lookahead(
    sys: &IfsSystem,
    depth: usize,
    lookahead: usize,
) -> std::result::Result<SeparationCertificate, (Word, Word, f64)> {
    let m = sys.symbolic.alphabet_size();
    let mut gap = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    let mut failure = None;

    let mut check_children = |prefix: &[Symbol], children: &[Symbol]| -> bool {
        let regions: Vec<Region> = children
            .iter()
            .map(|&c| {
                let mut w = prefix.to_vec();
                w.push(c);
                cylinder_region(sys, &w, lookahead)
            })
            .collect();
        for a in 0..children.len() {
            for b in a + 1..children.len() {
                let g = regions[a].separation(&regions[b]);
                if !(g > 0.0) {
                    let mut u = prefix.to_vec();
                    u.push(children[a]);
                    let mut v = prefix.to_vec();
                    v.push(children[b]);
                    failure = Some((Word::new(u), Word::new(v), -g));
                    return false;
                }
                min_gap = min_gap.min(g);
                if prefix.is_empty() {
                    gap = gap.min(g);
                }
            }
        }
        true
    };

    let all: Vec<Symbol> = (0..m).collect();
    if !check_children(&[], &all) {
        return Err(failure.unwrap());
    }
    let mut ok = true;
    if depth > 1 {
        sys.symbolic.visit_words(depth - 1, |w| {
            if !ok {
                return false;
            }
            let children: Vec<Symbol> = sys.symbolic.successors(*w.last().unwrap()).collect();
            if children.len() > 1 && !check_children(w, &children) {
                ok = false;
                return false;
            }
            true
        });
    }
    if !ok {
        return Err(failure.unwrap());
    }
    if m == 1 {
        gap = 0.0;
        min_gap = 0.0;
    }
    Ok(SeparationCertificate {
        depth,
        gap,
        min_gap,
        lookahead,
        all_depths: gap > 0.0 || m == 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{preset, Domain, IfsMap, SimilarityMap};
    use crate::symbolic::SymbolicSystem;

    fn line_system(ts: &[f64], ratio: f64) -> IfsSystem {
        let maps = ts
            .iter()
            .map(|&t| IfsMap::Similarity(SimilarityMap::line(ratio, false, t).unwrap()))
            .collect();
        IfsSystem::new("t", SymbolicSystem::full_shift(ts.len()).unwrap(), maps, Domain::Cube { dim: 1 })
            .unwrap()
    }

    #[test]
    fn cantor_passes_with_gap_one_third() {
        let sys = line_system(&[0.0, 2.0 / 3.0], 1.0 / 3.0);
        match check_strong_separation(&sys, 6).unwrap() {
            Separation::Pass(c) => {
                assert!((c.gap - 1.0 / 3.0).abs() < 1e-15);
                assert_eq!(c.lookahead, 0);
                assert!(c.all_depths);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overlapping_maps_fail_at_first_level() {
        let sys = line_system(&[0.0, 0.25], 0.5);
        match check_strong_separation(&sys, 4).unwrap() {
            Separation::Fail { u, v, .. } => {
                assert_eq!(u, Word::single(0));
                assert_eq!(v, Word::single(1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schottky_passes() {
        let sys = preset("schottky3").unwrap().system;
        assert!(check_strong_separation(&sys, 5).unwrap().is_pass());
    }

    #[test]
    fn golden_mean_needs_lookahead() {
        let sys = preset("goldenmean2").unwrap().system;
        match check_strong_separation(&sys, 6).unwrap() {
            Separation::Pass(c) => assert!(c.lookahead >= 1),
            other => panic!("{other:?}"),
        }
    }
}
