use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::{ExperimentConfig, SystemSpec, DEFAULT_POINT_CAP};
use crate::error::{Error, Result};
use crate::geometry::{
    box_dimension_auto, distance_set, exact_measure_dimension, local_dimension, minimality_density,
    projection_sweep, restricted_distance_set, sampling_resolution, values_cloud, Arc, DimensionEstimate,
    DEFAULT_PAIR_CAP,
};
use crate::gibbs::{gibbs_ratio_bounds, quasi_bernoulli_bracket, quasi_bernoulli_ratio, GibbsModel};
use crate::ifs::{check_strong_separation, preset, sample_measure, similarity_dimension, IfsSystem, Separation};
use crate::output;
use crate::scenery::{frames_csv, scenery_walk, verify_minimeasure_structure};
use crate::subsystem::{approximate_dimension, extract_capped, SubsystemResult};
use crate::symbolic::{SymbolicSystem, DEFAULT_WORD_CAP};
use crate::PointCloud;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Bumped whenever a file layout changes.
pub const OUTPUT_FORMAT: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";

/// Sample depth at which points sit within this of the attractor, relative
/// to the domain diameter.
const SAMPLE_PRECISION: f64 = 1e-9;
/// Budget for automatically chosen cylinder enumeration depths.
const AUTO_CYLINDERS: u128 = 2_000_000;
const QB_PAIRS: u128 = 50_000_000;

/// Every file an experiment produces, buffered so that it is written once.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
    pub summary: Value,
}

impl Artifacts {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.get(name).and_then(|b| std::str::from_utf8(b).ok())
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
    sys: IfsSystem,
    g: GibbsModel,
    files: BTreeMap<String, Vec<u8>>,
}

impl Run<'_> {
    fn csv(&mut self, name: &str, mut body: String) {
        body.push_str(&format!("# config_hash={}\n", self.hash));
        self.files.insert(format!("{name}.csv"), body.into_bytes());
    }

    fn points(&self, default: u64) -> Result<usize> {
        let n = self.cfg.int("points", default);
        let cap = self.cfg.int("cap_points", DEFAULT_POINT_CAP);
        if n > cap {
            return Err(Error::cap("sample points", n as u128, cap as u128));
        }
        Ok(n as usize)
    }

    fn word_cap(&self) -> u128 {
        self.cfg.int("cap_words", DEFAULT_WORD_CAP as u64) as u128
    }

    fn pair_cap(&self) -> u64 {
        self.cfg.int("cap_pairs", DEFAULT_PAIR_CAP)
    }

    fn sample_depth(&self) -> usize {
        let auto = (SAMPLE_PRECISION.ln() / self.sys.max_ratio().ln()).ceil().clamp(1.0, 64.0) as u64;
        self.cfg.int("depth", auto) as usize
    }

    fn sample(&self, default_points: u64) -> Result<(PointCloud, usize)> {
        let depth = self.sample_depth();
        Ok((sample_measure(&self.sys, &self.g, self.points(default_points)?, depth, self.cfg.seed)?, depth))
    }

    fn oracle(&self) -> Option<f64> {
        match &self.cfg.system {
            SystemSpec::Preset(name) => preset(name).ok().and_then(|p| p.oracle_dimension),
            SystemSpec::Inline(_) => None,
        }
    }
}

/// Largest depth `≤ max` whose cylinder count up to that depth fits `budget`.
fn auto_depth(s: &SymbolicSystem, max: usize, fits: impl Fn(u128) -> bool) -> usize {
    let total = |d: usize| (1..=d).map(|k| s.count_words(k, None)).sum::<u128>();
    (1..=max).rev().find(|&d| fits(total(d))).unwrap_or(1)
}

fn estimate_json(e: &DimensionEstimate) -> Value {
    json!({
        "method": e.method.name(),
        "value": e.value,
        "stderr": e.slope_stderr,
        "n_scales": e.scales.len(),
        "warnings": e.warnings,
    })
}

fn estimate_row(label: &str, e: &DimensionEstimate) -> String {
    output::row([
        label.to_string(),
        output::num(e.value),
        output::num(e.slope_stderr),
        e.scales.len().to_string(),
    ])
}

fn flag(b: bool) -> String {
    b.to_string()
}

/// Error category used in CSV status columns.
fn status(e: &Error) -> &'static str {
    match e {
        Error::Input(_) => "input",
        Error::Cap { .. } => "cap",
        Error::NoPath { .. } => "no_path",
        Error::NotTransitive => "not_transitive",
        Error::NotMixing { .. } => "not_mixing",
        Error::EmptyFrame(_) => "empty_frame",
        Error::Degenerate(_) => "degenerate",
        Error::InvalidContraction { .. } => "invalid_contraction",
        Error::Unsupported(_) => "unsupported",
        Error::Internal(_) => "internal",
    }
}

/// Execute the configured experiment and buffer its outputs.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (sys, g) = cfg.build()?;
    let mut run = Run { cfg, hash: cfg.hash(), sys, g, files: BTreeMap::new() };
    let results = match cfg.experiment.name() {
        "check" => check(&mut run)?,
        "dim" => dim(&mut run)?,
        "subsystem" => subsystem(&mut run)?,
        "scenery" => scenery(&mut run)?,
        "distances" => distances(&mut run)?,
        "project" => project(&mut run)?,
        "gibbs-verify" => gibbs_verify(&mut run)?,
        other => return Err(Error::Internal(format!("no runner for experiment {other}"))),
    };
    let config: Value = serde_json::from_str(&cfg.canonical_json()).map_err(|e| Error::Internal(e.to_string()))?;
    let mut files: Vec<String> = run.files.keys().cloned().collect();
    files.push(SUMMARY_FILE.to_string());
    files.sort();
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "system": run.sys.name(),
        "config": config,
        "config_hash": run.hash,
        "seed": cfg.seed,
        "versions": { "scenery-lab": VERSION, "output_format": OUTPUT_FORMAT },
        "files": files,
        "results": results,
    });
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    run.files.insert(SUMMARY_FILE.to_string(), text.into_bytes());
    Ok(Artifacts { files: run.files, summary })
}

/// Run and write into `out`, falling back to the config's output directory
/// and then to `out/<experiment>`.
pub fn run_to_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(PathBuf, Artifacts)> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()));
    let artifacts = run(cfg)?;
    artifacts
        .write_to(&dir)
        .map_err(|e| Error::Internal(format!("cannot write {}: {e}", dir.display())))?;
    Ok((dir, artifacts))
}

fn check(run: &mut Run) -> Result<Value> {
    let s = run.sys.symbolic().clone();
    let sep_depth = run.cfg.int("sep_depth", 4) as usize;
    let gibbs_depth = match run.cfg.params.get("gibbs_depth") {
        Some(&d) => d as usize,
        None => auto_depth(&s, 8, |n| n <= AUTO_CYLINDERS),
    };
    let sep = check_strong_separation(&run.sys, sep_depth)?;
    let bounds = gibbs_ratio_bounds(&run.g, gibbs_depth)?;
    let sim_dim = if run.sys.is_similarity() { Some(similarity_dimension(&run.sys)?) } else { None };
    let minimality = if run.sys.is_similarity() && run.sys.dim() == 2 {
        let depth = run.cfg.int("minimality_depth", 12) as usize;
        Some(minimality_density(&run.sys, depth, run.cfg.real("eps", 0.1))?)
    } else {
        None
    };

    let mut rows: Vec<(&str, String)> = vec![
        ("alphabet", s.alphabet_size().to_string()),
        ("dimension", run.sys.dim().to_string()),
        ("similarity", flag(run.sys.is_similarity())),
        ("full_shift", flag(s.is_full_shift())),
        ("transitive", flag(s.is_transitive())),
        ("mixing", flag(s.is_mixing())),
        ("period", s.period().to_string()),
        ("max_ratio", output::num(run.sys.max_ratio())),
        ("distortion", output::num(run.sys.distortion())),
        ("ssp", flag(sep.is_pass())),
        ("pressure", output::num(run.g.pressure())),
        ("entropy_rate", output::num(run.g.entropy_rate())),
        ("gibbs_depth", gibbs_depth.to_string()),
        ("gibbs_c1", output::num(bounds.c1)),
        ("gibbs_c2", output::num(bounds.c2)),
    ];
    if let Separation::Pass(c) = &sep {
        rows.push(("ssp_min_gap", output::num(c.min_gap)));
    }
    if let Some(d) = sim_dim {
        rows.push(("similarity_dimension", output::num(d)));
    }
    if let Some(d) = run.oracle() {
        rows.push(("oracle_dimension", output::num(d)));
    }
    if let Some(m) = &minimality {
        rows.push(("minimality_largest_gap", output::num(m.largest_gap)));
        rows.push(("minimality_pass", flag(m.pass)));
    }
    let mut body = output::row(["property", "value"]);
    for (k, v) in &rows {
        body.push_str(&output::row([*k, v.as_str()]));
    }
    run.csv("check", body);
    Ok(json!({
        "transitive": s.is_transitive(),
        "mixing": s.is_mixing(),
        "period": s.period(),
        "distortion": run.sys.distortion(),
        "separation": sep,
        "pressure": run.g.pressure(),
        "gibbs": { "depth": gibbs_depth, "c1": bounds.c1, "c2": bounds.c2 },
        "similarity_dimension": sim_dim,
        "oracle_dimension": run.oracle(),
        "minimality": minimality.map(|m| json!({
            "depth": m.depth, "eps": m.eps, "n_angles": m.angles.len(),
            "largest_gap": m.largest_gap, "pass": m.pass,
        })),
    }))
}

fn dim(run: &mut Run) -> Result<Value> {
    let (cloud, depth) = run.sample(100_000)?;
    let boxed = box_dimension_auto(&cloud, Some(sampling_resolution(&run.sys, depth)))?;
    let local = local_dimension(&cloud, run.cfg.int("centers", 200) as usize, None, run.cfg.seed)?;
    let exact = match exact_measure_dimension(&run.sys, &run.g) {
        Ok(e) => Some(e),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let mut body = output::row(["method", "value", "stderr", "n_scales"]);
    for e in [Some(&boxed), Some(&local), exact.as_ref()].into_iter().flatten() {
        body.push_str(&estimate_row(e.method.name(), e));
    }
    run.csv("dim", body);
    run.csv("dim_box_count", boxed.to_csv());
    run.csv("dim_local_dim", local.to_csv());
    Ok(json!({
        "points": cloud.len(),
        "depth": depth,
        "box_count": estimate_json(&boxed),
        "local_dim": estimate_json(&local),
        "exact_formula": exact.as_ref().map(estimate_json),
        "oracle_dimension": run.oracle(),
    }))
}

fn subsystem_json(r: &SubsystemResult) -> Value {
    json!({
        "k": r.k, "tau": r.tau, "t_k": r.t_k, "n_words": r.words.len(),
        "candidates": r.candidates, "connector_len": r.connector_len,
        "uncertified_dropped": r.uncertified_dropped, "cover_constant": r.cover_constant,
        "separation_gap": r.separation.min_gap,
    })
}

fn subsystem(run: &mut Run) -> Result<Value> {
    let cap = run.word_cap();
    if let Some(&k_max) = run.cfg.params.get("k_max") {
        let eps = run.cfg.real("eps", 0.05);
        let a = approximate_dimension(&run.sys, eps, k_max as usize, run.oracle(), cap)?;
        let mut steps = output::row(["k", "t_k", "running_best", "status"]);
        for s in &a.steps {
            steps.push_str(&output::row([
                s.k.to_string(),
                s.t_k.map_or("nan".into(), output::num),
                output::num(s.running_best),
                if s.error.is_some() { "failed".into() } else { "ok".to_string() },
            ]));
        }
        run.csv("subsystem_steps", steps);
        run.csv("subsystem_words", a.best.words_csv());
        run.csv("subsystem_summary", a.best.summary_csv());
        return Ok(json!({
            "t_best": a.t_best, "k_best": a.k_best, "oracle_dimension": a.oracle,
            "confirmed": a.confirmed, "capped": a.capped, "best": subsystem_json(&a.best),
        }));
    }
    let tau = run.cfg.params.get("tau").map(|&t| t as usize);
    let r = extract_capped(&run.sys, run.cfg.int("k", 6) as usize, tau, cap)?;
    run.csv("subsystem_words", r.words_csv());
    run.csv("subsystem_summary", r.summary_csv());
    Ok(json!({ "result": subsystem_json(&r), "oracle_dimension": run.oracle() }))
}

fn scenery(run: &mut Run) -> Result<Value> {
    let base = run.cfg.int("base", 2) as u32;
    let steps = run.cfg.int("steps", 12) as usize;
    let frame_points = run.cfg.int("frame_points", 1000) as usize;
    let verify_depth = run.cfg.int("verify_depth", 2) as usize;
    let walk = scenery_walk(&run.sys, &run.g, run.cfg.seed, base, steps, frame_points)?;
    run.csv("scenery_frames", frames_csv(&walk.frames));

    let mut body = output::row([
        "level",
        "box_index",
        "entropy",
        "n_words",
        "deviation_min",
        "deviation_max",
        "bracket_lo",
        "bracket_hi",
        "within_bracket",
        "certifying",
        "status",
    ]);
    let (mut verified, mut within) = (0usize, 0usize);
    for f in &walk.frames {
        let mut fields = vec![f.level.to_string(), f.box_index.label(), output::num(f.entropy())];
        let report = if verify_depth > 0 {
            Some(verify_minimeasure_structure(&run.sys, &run.g, f, verify_depth))
        } else {
            None
        };
        match report {
            Some(Ok(r)) => {
                verified += 1;
                within += r.within_bracket as usize;
                fields.extend([
                    r.words.len().to_string(),
                    output::num(r.deviation_min),
                    output::num(r.deviation_max),
                    output::num(r.bracket.0),
                    output::num(r.bracket.1),
                    flag(r.within_bracket),
                    flag(r.certifying),
                    "ok".into(),
                ]);
            }
            other => {
                fields.extend(std::iter::repeat("".to_string()).take(7));
                fields.push(match other {
                    Some(Err(e)) => status(&e).to_string(),
                    _ => "skipped".into(),
                });
            }
        }
        body.push_str(&output::row(fields));
    }
    run.csv("scenery_structure", body);
    Ok(json!({
        "base": base,
        "frames": walk.frames.len(),
        "stop_level": walk.stop_level,
        "point": walk.x,
        "verified_frames": verified,
        "within_bracket": within,
    }))
}

fn distances(run: &mut Run) -> Result<Value> {
    let (cloud, depth) = run.sample(2000)?;
    let cap = run.pair_cap();
    let n = cloud.len() as u64;
    let pairs = n * (n - 1) / 2;
    let full = box_dimension_auto(&values_cloud(distance_set(&cloud, cap, run.cfg.seed)?)?, None)?;
    let mut body = output::row(["set", "value", "stderr", "n_scales"]);
    body.push_str(&estimate_row("distance", &full));
    run.csv("distances_full", full.to_csv());

    let mut restricted = Value::Null;
    if cloud.dim() == 2 {
        let arc = Arc::new(run.cfg.real("arc_center", 0.0), run.cfg.real("arc_width", 0.3))?;
        let r = restricted_distance_set(&cloud, &[arc], cap, run.cfg.seed)?;
        restricted = match &r.warning {
            Some(w) => json!({ "arc": arc, "pairs": 0, "warning": w }),
            None => {
                let est = box_dimension_auto(&values_cloud(r.distances.clone())?, None)?;
                body.push_str(&estimate_row("restricted", &est));
                run.csv("distances_restricted", est.to_csv());
                json!({ "arc": arc, "pairs": r.distances.len(), "estimate": estimate_json(&est) })
            }
        };
    }
    run.csv("distances", body);
    Ok(json!({
        "points": cloud.len(),
        "depth": depth,
        "pairs": pairs,
        "pairs_sampled": pairs > cap,
        "distance": estimate_json(&full),
        "restricted": restricted,
        "oracle_dimension": run.oracle(),
    }))
}

fn project(run: &mut Run) -> Result<Value> {
    if run.sys.dim() != 2 {
        return Err(Error::Unsupported("projection sweeps need a planar system".into()));
    }
    let depth = run.sample_depth();
    let points = run.points(100_000)?;
    let angles = run.cfg.int("angles", 36) as usize;
    let sweep = projection_sweep(&run.sys, &run.g, angles, depth, points, run.cfg.seed)?;
    run.csv("projection_sweep", sweep.to_csv());
    let minimality = if run.sys.is_similarity() {
        let m = minimality_density(&run.sys, run.cfg.int("minimality_depth", 12) as usize, run.cfg.real("eps", 0.1))?;
        let mut body = output::row(["depth", "eps", "n_angles", "largest_gap", "pass"]);
        body.push_str(&output::row([
            m.depth.to_string(),
            output::num(m.eps),
            m.angles.len().to_string(),
            output::num(m.largest_gap),
            flag(m.pass),
        ]));
        run.csv("minimality", body);
        json!({ "depth": m.depth, "eps": m.eps, "n_angles": m.angles.len(), "largest_gap": m.largest_gap, "pass": m.pass })
    } else {
        Value::Null
    };
    Ok(json!({
        "angles": angles,
        "points": points,
        "depth": depth,
        "min_value": sweep.min_value,
        "full": estimate_json(&sweep.full),
        "predicted": sweep.predicted,
        "minimality": minimality,
    }))
}

fn gibbs_verify(run: &mut Run) -> Result<Value> {
    let s = run.sys.symbolic().clone();
    let depth = match run.cfg.params.get("depth") {
        Some(&d) => d as usize,
        None => auto_depth(&s, 12, |n| n <= AUTO_CYLINDERS),
    };
    let qb_depth = match run.cfg.params.get("qb_depth") {
        Some(&d) => d as usize,
        None => {
            let total = |d: usize| (1..=d).map(|k| s.count_words(k, None)).sum::<u128>();
            (1..=4).rev().find(|&d| total(d).pow(2) <= QB_PAIRS && total(2 * d) <= AUTO_CYLINDERS).unwrap_or(1)
        }
    };
    let b = gibbs_ratio_bounds(&run.g, depth)?;
    let (qmin, qmax) = quasi_bernoulli_ratio(&run.g, qb_depth)?;
    let (lo, hi) = quasi_bernoulli_bracket(&run.g, qb_depth)?;
    let gibbs_ok = 0.0 < b.c1 && b.c1 <= b.c2 && b.c2.is_finite();
    // a relative slack for rounding in the enumerated constants
    let within = qmin >= lo * (1.0 - 1e-9) && qmax <= hi * (1.0 + 1e-9);
    let mut body = output::row(["quantity", "value"]);
    for (k, v) in [
        ("pressure", output::num(run.g.pressure())),
        ("depth", depth.to_string()),
        ("c1", output::num(b.c1)),
        ("c2", output::num(b.c2)),
        ("gibbs_ok", flag(gibbs_ok)),
        ("qb_depth", qb_depth.to_string()),
        ("qb_min", output::num(qmin)),
        ("qb_max", output::num(qmax)),
        ("bracket_lo", output::num(lo)),
        ("bracket_hi", output::num(hi)),
        ("within_bracket", flag(within)),
        ("variation_sum", output::num(run.g.potential().variation_sum())),
    ] {
        body.push_str(&output::row([k, v.as_str()]));
    }
    run.csv("gibbs", body);
    Ok(json!({
        "pressure": run.g.pressure(),
        "depth": depth, "c1": b.c1, "c2": b.c2, "gibbs_ok": gibbs_ok,
        "qb_depth": qb_depth, "qb_ratio": [qmin, qmax], "bracket": [lo, hi], "within_bracket": within,
    }))
}
