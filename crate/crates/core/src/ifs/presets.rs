use num_complex::Complex64;

use super::{ConformalMap, Domain, IfsMap, IfsSystem, Moebius, QuadBranch, SimilarityMap};
use crate::error::{Error, Result};
use crate::gibbs::{build_gibbs, GibbsModel, Potential};
use crate::symbolic::SymbolicSystem;

/// A named system with its default measure (measure of maximal entropy,
/// which for equal contraction ratios is the natural self-similar measure).
#[derive(Clone, Debug)]
pub struct Preset {
    pub system: IfsSystem,
    pub gibbs: GibbsModel,
    /// Closed-form Hausdorff dimension of the attractor, when known.
    pub oracle_dimension: Option<f64>,
    pub description: &'static str,
}

pub fn preset_names() -> &'static [&'static str] {
    &[
        "cantor3",
        "fourcorner4",
        "rot5",
        "goldenmean2",
        "schottky3",
        "julia_quad(c)",
        "counterexample3",
    ]
}

/// Largest `|c|` accepted by `julia_quad`.
pub const JULIA_MAX_C: f64 = 0.2;

pub fn preset(name: &str) -> Result<Preset> {
    let name = name.trim();
    let (system, oracle, description) = match name {
        "cantor3" => (
            cantor3()?,
            Some(2f64.ln() / 3f64.ln()),
            "middle-third Cantor set: x/3, x/3 + 2/3",
        ),
        "fourcorner4" => (
            fourcorner4()?,
            Some(1.0),
            "four corner squares of side 1/4 in the unit square",
        ),
        "rot5" => (
            rot5()?,
            Some(5f64.ln() / 3f64.ln()),
            "five rotating similarities of ratio 1/3 with angles 1, 4, 9, 16, 25 rad",
        ),
        "goldenmean2" => {
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            (
                goldenmean2()?,
                Some(phi.ln() / 2f64.ln()),
                "x/2, x/2 + 1/2 restricted to the golden mean shift",
            )
        }
        "schottky3" => (schottky3()?, None, "three-disk Schottky group generators"),
        "counterexample3" => {
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            (
                counterexample3()?,
                Some(phi.ln() / 3f64.ln()),
                "three rotating similarities on a non-full shift with angles in {−1, 0, 1}",
            )
        }
        _ => match parse_julia(name)? {
            Some(c) => (
                julia_quad(c)?,
                (c.norm() == 0.0).then_some(1.0),
                "inverse branches of z² + c on an annulus",
            ),
            None => {
                return Err(Error::input(format!(
                    "unknown preset '{name}' (known: {})",
                    preset_names().join(", ")
                )))
            }
        },
    };
    let pot = Potential::constant(system.symbolic(), 0.0)?;
    let gibbs = build_gibbs(system.symbolic(), &pot)?;
    Ok(Preset { system, gibbs, oracle_dimension: oracle, description })
}

/// Accepts `julia_quad(re)`, `julia_quad(re,im)`.
fn parse_julia(name: &str) -> Result<Option<Complex64>> {
    let Some(args) = name.strip_prefix("julia_quad(").and_then(|r| r.strip_suffix(')')) else {
        return Ok(None);
    };
    let parts: Vec<f64> = args
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::input(format!("julia_quad parameter: {e}")))?;
    match parts.as_slice() {
        [re] => Ok(Some(Complex64::new(*re, 0.0))),
        [re, im] => Ok(Some(Complex64::new(*re, *im))),
        _ => Err(Error::input("julia_quad takes one or two real parameters")),
    }
}

fn sim(ratio: f64, angle: f64, t: [f64; 2]) -> Result<IfsMap> {
    Ok(IfsMap::Similarity(SimilarityMap::planar(ratio, angle, false, t)?))
}

/// Rotated square of side `ratio` centered at `c`.
fn centered(ratio: f64, angle: f64, c: [f64; 2]) -> Result<IfsMap> {
    let (s, co) = angle.sin_cos();
    let h = 0.5 * ratio;
    let t = [c[0] - h * (co - s), c[1] - h * (s + co)];
    sim(ratio, angle, t)
}

pub fn cantor3() -> Result<IfsSystem> {
    let maps = vec![
        IfsMap::Similarity(SimilarityMap::line(1.0 / 3.0, false, 0.0)?),
        IfsMap::Similarity(SimilarityMap::line(1.0 / 3.0, false, 2.0 / 3.0)?),
    ];
    IfsSystem::new("cantor3", SymbolicSystem::full_shift(2)?, maps, Domain::Cube { dim: 1 })
}

pub fn fourcorner4() -> Result<IfsSystem> {
    let maps = [[0.0, 0.0], [0.75, 0.0], [0.0, 0.75], [0.75, 0.75]]
        .iter()
        .map(|&t| sim(0.25, 0.0, t))
        .collect::<Result<_>>()?;
    IfsSystem::new("fourcorner4", SymbolicSystem::full_shift(4)?, maps, Domain::Cube { dim: 2 })
}

pub fn rot5() -> Result<IfsSystem> {
    const CENTERS: [[f64; 2]; 5] =
        [[0.765, 0.745], [0.5, 0.51], [0.24, 0.775], [0.23, 0.22], [0.755, 0.205]];
    let maps = CENTERS
        .iter()
        .enumerate()
        .map(|(i, &c)| centered(1.0 / 3.0, ((i + 1) * (i + 1)) as f64, c))
        .collect::<Result<_>>()?;
    IfsSystem::new("rot5", SymbolicSystem::full_shift(5)?, maps, Domain::Cube { dim: 2 })
}

pub fn goldenmean2() -> Result<IfsSystem> {
    let maps = vec![
        IfsMap::Similarity(SimilarityMap::line(0.5, false, 0.0)?),
        IfsMap::Similarity(SimilarityMap::line(0.5, false, 0.5)?),
    ];
    let sys = SymbolicSystem::new(vec![vec![1, 1], vec![1, 0]])?;
    IfsSystem::new("goldenmean2", sys, maps, Domain::Cube { dim: 1 })
}

pub fn counterexample3() -> Result<IfsSystem> {
    let maps = vec![
        centered(1.0 / 3.0, 1.0, [0.25, 0.25])?,
        centered(1.0 / 3.0, -1.0, [0.75, 0.25])?,
        centered(1.0 / 3.0, 0.0, [0.5, 0.75])?,
    ];
    let sys = SymbolicSystem::new(vec![vec![0, 1, 0], vec![1, 0, 1], vec![1, 0, 1]])?;
    IfsSystem::new("counterexample3", sys, maps, Domain::Cube { dim: 2 })
}

pub fn schottky3() -> Result<IfsSystem> {
    const CENTERS: [[f64; 2]; 3] = [[0.25, 0.3], [0.75, 0.3], [0.5, 0.72]];
    let maps = CENTERS
        .iter()
        .map(|c| {
            Moebius::circle_pair(Complex64::new(c[0], c[1]), 0.22, 0.05)
                .map(|m| IfsMap::Conformal(ConformalMap::Moebius(m)))
        })
        .collect::<Result<_>>()?;
    let sys = SymbolicSystem::new(vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]])?;
    IfsSystem::new("schottky3", sys, maps, Domain::Cube { dim: 2 })
}

/// Physical annulus `0.5 ≤ |z| ≤ 1.6`, rescaled by `w = 1/2 + i/2 + z/3.2`.
pub fn julia_quad(c: Complex64) -> Result<IfsSystem> {
    if !(c.norm() <= JULIA_MAX_C) {
        return Err(Error::input(format!(
            "julia_quad requires |c| ≤ {JULIA_MAX_C}, got |c| = {}",
            c.norm()
        )));
    }
    let span = 3.2;
    let offset = Complex64::new(0.5, 0.5);
    let maps = [1.0, -1.0]
        .iter()
        .map(|&sign| IfsMap::Conformal(ConformalMap::QuadBranch(QuadBranch { c, sign, offset, span })))
        .collect();
    let domain = Domain::Annulus { center: [0.5, 0.5], r_in: 0.5 / span, r_out: 1.6 / span };
    IfsSystem::new(format!("julia_quad({},{})", c.re, c.im), SymbolicSystem::full_shift(2)?, maps, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{check_strong_separation, code_point, lip_bounds};

    #[test]
    fn every_preset_builds() {
        for name in ["cantor3", "fourcorner4", "rot5", "goldenmean2", "schottky3", "counterexample3"] {
            let p = preset(name).unwrap();
            assert_eq!(p.system.name(), name);
        }
        assert!(preset("julia_quad(0.1, -0.05)").is_ok());
        assert!(matches!(preset("julia_quad(0.3)"), Err(Error::Input(_))));
        assert!(matches!(preset("sierpinski"), Err(Error::Input(_))));
    }

    #[test]
    fn schottky_matrix_is_off_diagonal() {
        let p = preset("schottky3").unwrap();
        assert_eq!(p.system.symbolic().rows(), vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
    }

    #[test]
    fn separated_presets() {
        for name in ["cantor3", "fourcorner4", "rot5", "counterexample3", "schottky3"] {
            let p = preset(name).unwrap();
            assert!(check_strong_separation(&p.system, 4).unwrap().is_pass(), "{name}");
        }
        let j = preset("julia_quad(0)").unwrap();
        assert!(!check_strong_separation(&j.system, 3).unwrap().is_pass());
    }

    #[test]
    fn julia_zero_attractor_is_unit_circle() {
        let p = preset("julia_quad(0)").unwrap();
        let sys = &p.system;
        for w in sys.symbolic().admissible_words(12, None).unwrap().iter().step_by(97) {
            let cp = code_point(sys, w).unwrap();
            let z = Complex64::new(cp.center[0] - 0.5, cp.center[1] - 0.5) * 3.2;
            // start point sits on |z| = 1.05; twelve square roots pull it to ~1
            assert!((z.norm() - 1.0).abs() < 1e-4, "{}", z.norm());
        }
    }

    #[test]
    fn conformal_distortion_is_bounded() {
        for name in ["schottky3", "julia_quad(0.1,0.1)"] {
            let p = preset(name).unwrap();
            let sys = &p.system;
            let l = sys.distortion();
            for k in 1..=8 {
                for w in sys.symbolic().admissible_words(k, None).unwrap() {
                    let lip = lip_bounds(sys, &w).unwrap();
                    assert!(lip.certified);
                    assert!(0.0 < lip.lip_minus && lip.lip_minus <= lip.lip_plus);
                    assert!(lip.lip_plus / lip.lip_minus <= l, "{name} {w}");
                }
            }
        }
    }

    #[test]
    fn lip_is_submultiplicative() {
        for name in ["schottky3", "julia_quad(0.15)", "rot5"] {
            let p = preset(name).unwrap();
            let sys = &p.system;
            let words = sys.symbolic().admissible_words(3, None).unwrap();
            for u in &words {
                for v in &words {
                    let uv = u.concat(v);
                    if !sys.symbolic().is_admissible(&uv).unwrap() {
                        continue;
                    }
                    let a = lip_bounds(sys, &uv).unwrap().lip_plus;
                    let b = lip_bounds(sys, u).unwrap().lip_plus * lip_bounds(sys, v).unwrap().lip_plus;
                    assert!(a <= b * (1.0 + 1e-12), "{name} {u} {v}");
                }
            }
        }
    }
}
