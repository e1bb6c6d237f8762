use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::gibbs::{build_gibbs, GibbsModel, Potential};
use crate::ifs::{preset, similarity_dimension, ConformalMap, Domain, IfsMap, IfsSystem, Moebius, SimilarityMap};
use crate::symbolic::{SymbolicSystem, Word};

/// Default cap on sampled points.
pub const DEFAULT_POINT_CAP: u64 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Check,
    Dim,
    Subsystem,
    Scenery,
    Distances,
    Project,
    GibbsVerify,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Check,
        Experiment::Dim,
        Experiment::Subsystem,
        Experiment::Scenery,
        Experiment::Distances,
        Experiment::Project,
        Experiment::GibbsVerify,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Check => "check",
            Experiment::Dim => "dim",
            Experiment::Subsystem => "subsystem",
            Experiment::Scenery => "scenery",
            Experiment::Distances => "distances",
            Experiment::Project => "project",
            Experiment::GibbsVerify => "gibbs-verify",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Accepted parameter names, their kind and their valid range.
    fn params(&self) -> &'static [ParamSpec] {
        use ParamKind::*;
        match self {
            Experiment::Check => &[
                param!("sep_depth", Int, 1.0, 12.0),
                param!("gibbs_depth", Int, 1.0, 16.0),
                param!("minimality_depth", Int, 1.0, 40.0),
                param!("eps", Real, 0.0, 3.2),
            ],
            Experiment::Dim => &[
                param!("points", Int, 1.0, 1e9),
                param!("depth", Int, 1.0, 64.0),
                param!("centers", Int, 1.0, 1e6),
            ],
            Experiment::Subsystem => &[
                param!("k", Int, 1.0, 40.0),
                param!("k_max", Int, 2.0, 40.0),
                param!("eps", Real, 0.0, 10.0),
                param!("tau", Int, 0.0, 1e6),
            ],
            Experiment::Scenery => &[
                param!("base", Int, 2.0, 16.0),
                param!("steps", Int, 1.0, 1000.0),
                param!("frame_points", Int, 1.0, 1e6),
                param!("verify_depth", Int, 0.0, 12.0),
            ],
            Experiment::Distances => &[
                param!("points", Int, 2.0, 1e9),
                param!("depth", Int, 1.0, 64.0),
                param!("arc_center", Real, -1e3, 1e3),
                param!("arc_width", Real, 0.0, 7.0),
            ],
            Experiment::Project => &[
                param!("angles", Int, 1.0, 3600.0),
                param!("points", Int, 1.0, 1e9),
                param!("depth", Int, 1.0, 64.0),
                param!("minimality_depth", Int, 1.0, 40.0),
                param!("eps", Real, 0.0, 3.2),
            ],
            Experiment::GibbsVerify => &[
                param!("depth", Int, 1.0, 16.0),
                param!("qb_depth", Int, 1.0, 8.0),
            ],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum ParamKind {
    Int,
    Real,
}

struct ParamSpec {
    name: &'static str,
    kind: ParamKind,
    min: f64,
    max: f64,
}

// a struct literal keeps the tables promotable to statics
macro_rules! param {
    ($name:literal, $kind:ident, $min:expr, $max:expr) => {
        ParamSpec { name: $name, kind: $kind, min: $min, max: $max }
    };
}
use param;

/// Caps shared by all experiments, as `(parameter, override key)`.
pub const CAP_PARAMS: [(&str, &str); 3] = [("cap_words", "words"), ("cap_points", "points"), ("cap_pairs", "pairs")];

/// Where the system comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Preset(String),
    Inline(InlineSystem),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InlineSystem {
    pub name: String,
    pub maps: Vec<MapSpec>,
    /// Transition matrix rows; the full shift when absent.
    pub transition: Option<Vec<Vec<u8>>>,
    pub domain: Option<Domain>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    /// `x ↦ ratio·O·x + translation`, with `O` a rotation by `angle` (planar,
    /// optionally after reflecting the second axis), a flip on the line, or an
    /// explicit row-major orthogonal matrix.
    Similarity {
        ratio: f64,
        translation: Vec<f64>,
        angle: Option<f64>,
        reflect: Option<bool>,
        orthogonal: Option<Vec<f64>>,
    },
    /// `z ↦ (az + b)/(cz + d)`, coefficients as `[re, im]`.
    Moebius { a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2] },
    CirclePair { center: [f64; 2], radius: f64, h: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `φ = 0`: the measure of maximal entropy.
    MaximalEntropy,
    /// `φ(α) = s·log r_{α₀}` at the similarity dimension `s`.
    Natural,
    Bernoulli(Vec<f64>),
    Table { depth: usize, table: BTreeMap<String, f64> },
}

/// A validated experiment description. Serializing it gives the canonical
/// form that is hashed into every output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub potential: PotentialSpec,
    pub experiment: Experiment,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config:\n{}", list(.0))]
    Invalid(Vec<FieldError>),
}

impl ConfigError {
    /// Paths of all schema violations.
    pub fn paths(&self) -> Vec<&str> {
        match self {
            ConfigError::Invalid(v) => v.iter().map(|e| e.path.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

fn list(errors: &[FieldError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

impl From<ConfigError> for crate::Error {
    fn from(e: ConfigError) -> Self {
        crate::Error::Input(e.to_string())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(&value)
}

#[derive(Default)]
struct Issues(Vec<FieldError>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(FieldError { path: path.into(), message: message.into() });
    }
}

const TOP_KEYS: [&str; 6] = ["system", "potential", "experiment", "params", "seed", "output"];

/// Check every field, collecting all violations.
pub fn validate(value: &Value) -> Result<ExperimentConfig, ConfigError> {
    let mut issues = Issues::default();
    let Some(obj) = value.as_object() else {
        return Err(ConfigError::Invalid(vec![FieldError {
            path: "$".into(),
            message: "config must be a JSON object".into(),
        }]));
    };
    for key in obj.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            issues.push(key.clone(), "unknown key");
        }
    }

    let system = match obj.get("system") {
        None => {
            issues.push("system", "missing");
            None
        }
        Some(v) => parse_system(v, &mut issues),
    };
    let built = system.as_ref().and_then(|s| match build_system(s) {
        Ok(sys) => Some(sys),
        Err(e) => {
            let path = match (&e, s) {
                (crate::Error::InvalidContraction { index, .. }, SystemSpec::Inline(_)) => format!("system.maps[{index}]"),
                _ => "system".to_string(),
            };
            issues.push(path, e.to_string());
            None
        }
    });

    let potential = match obj.get("potential") {
        None => Some(PotentialSpec::MaximalEntropy),
        Some(v) => parse_potential(v, &mut issues),
    };
    if let (Some(sys), Some(p)) = (&built, &potential) {
        if let Err(e) = build_model(sys, p) {
            issues.push("potential", e.to_string());
        }
    }

    let experiment = match obj.get("experiment") {
        None => {
            issues.push("experiment", "missing");
            None
        }
        Some(Value::String(s)) => Experiment::from_name(s).or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            issues.push("experiment", format!("unknown experiment '{s}' (known: {})", names.join(", ")));
            None
        }),
        Some(_) => {
            issues.push("experiment", "must be a string");
            None
        }
    };

    let params = parse_params(obj.get("params"), experiment, &mut issues);

    let seed = match obj.get("seed") {
        None => {
            issues.push("seed", "missing");
            None
        }
        Some(v) => v.as_u64().or_else(|| {
            issues.push("seed", "must be a non-negative integer below 2^64");
            None
        }),
    };

    let output = match obj.get("output") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
        Some(_) => {
            issues.push("output", "must be a non-empty string");
            None
        }
    };

    if !issues.0.is_empty() {
        return Err(ConfigError::Invalid(issues.0));
    }
    Ok(ExperimentConfig {
        system: system.expect("checked"),
        potential: potential.expect("checked"),
        experiment: experiment.expect("checked"),
        params,
        seed: seed.expect("checked"),
        output,
    })
}

fn parse_system(v: &Value, issues: &mut Issues) -> Option<SystemSpec> {
    match v {
        Value::String(name) => Some(SystemSpec::Preset(name.clone())),
        Value::Object(o) => parse_inline(o, issues).map(SystemSpec::Inline),
        _ => {
            issues.push("system", "must be a preset name or an inline system object");
            None
        }
    }
}

fn parse_inline(o: &Map<String, Value>, issues: &mut Issues) -> Option<InlineSystem> {
    let before = issues.0.len();
    for key in o.keys() {
        if !["name", "maps", "transition", "domain"].contains(&key.as_str()) {
            issues.push(format!("system.{key}"), "unknown key");
        }
    }
    let name = match o.get("name") {
        None => "inline".to_string(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            issues.push("system.name", "must be a string");
            String::new()
        }
    };
    let mut maps = Vec::new();
    match o.get("maps").and_then(Value::as_array) {
        Some(arr) if !arr.is_empty() => {
            for (i, m) in arr.iter().enumerate() {
                if let Some(spec) = parse_map(m, &format!("system.maps[{i}]"), issues) {
                    maps.push(spec);
                }
            }
        }
        _ => issues.push("system.maps", "must be a non-empty array of maps"),
    }
    let transition = match o.get("transition") {
        None | Some(Value::Null) => None,
        Some(Value::Array(rows)) => {
            let mut out = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                let parsed: Option<Vec<u8>> = row.as_array().and_then(|r| {
                    r.iter().map(|x| x.as_u64().filter(|&b| b <= 1).map(|b| b as u8)).collect()
                });
                match parsed {
                    Some(r) => out.push(r),
                    None => issues.push(format!("system.transition[{i}]"), "must be an array of 0/1 entries"),
                }
            }
            if rows.len() != maps.len() && issues.0.len() == before {
                issues.push("system.transition", format!("{} rows for {} maps", rows.len(), maps.len()));
            }
            Some(out)
        }
        Some(_) => {
            issues.push("system.transition", "must be an array of rows");
            None
        }
    };
    let domain = match o.get("domain") {
        None | Some(Value::Null) => None,
        Some(d) => match serde_json::from_value::<Domain>(d.clone()) {
            Ok(d) => Some(d),
            Err(e) => {
                issues.push("system.domain", format!("{e}"));
                None
            }
        },
    };
    (issues.0.len() == before).then_some(InlineSystem { name, maps, transition, domain })
}

fn number(o: &Map<String, Value>, key: &str, path: &str, issues: &mut Issues) -> Option<f64> {
    match o.get(key).map(Value::as_f64) {
        Some(Some(x)) => Some(x),
        Some(None) => {
            issues.push(format!("{path}.{key}"), "must be a number");
            None
        }
        None => {
            issues.push(format!("{path}.{key}"), "missing");
            None
        }
    }
}

fn numbers(v: Option<&Value>, path: &str, issues: &mut Issues) -> Option<Vec<f64>> {
    let parsed = v.and_then(Value::as_array).and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>());
    if parsed.is_none() {
        issues.push(path, if v.is_none() { "missing" } else { "must be an array of numbers" });
    }
    parsed
}

fn pair(o: &Map<String, Value>, key: &str, path: &str, issues: &mut Issues) -> Option<[f64; 2]> {
    let p = format!("{path}.{key}");
    let v = numbers(o.get(key), &p, issues)?;
    match v.as_slice() {
        [a, b] => Some([*a, *b]),
        _ => {
            issues.push(p, "must have two entries [re, im]");
            None
        }
    }
}

fn parse_map(v: &Value, path: &str, issues: &mut Issues) -> Option<MapSpec> {
    let Some(o) = v.as_object() else {
        issues.push(path, "must be an object");
        return None;
    };
    let before = issues.0.len();
    let kind = o.get("kind").and_then(Value::as_str).unwrap_or("");
    let allowed: &[&str] = match kind {
        "similarity" => &["kind", "ratio", "translation", "angle", "reflect", "orthogonal"],
        "moebius" => &["kind", "a", "b", "c", "d"],
        "circle_pair" => &["kind", "center", "radius", "h"],
        _ => {
            issues.push(format!("{path}.kind"), "must be one of similarity, moebius, circle_pair");
            return None;
        }
    };
    for key in o.keys() {
        if !allowed.contains(&key.as_str()) {
            issues.push(format!("{path}.{key}"), "unknown key");
        }
    }
    let spec = match kind {
        "similarity" => {
            let ratio = number(o, "ratio", path, issues);
            let translation = numbers(o.get("translation"), &format!("{path}.translation"), issues);
            let angle = o.contains_key("angle").then(|| number(o, "angle", path, issues)).flatten();
            let reflect = match o.get("reflect") {
                None => None,
                Some(Value::Bool(b)) => Some(*b),
                Some(_) => {
                    issues.push(format!("{path}.reflect"), "must be a boolean");
                    None
                }
            };
            let orthogonal = o
                .contains_key("orthogonal")
                .then(|| numbers(o.get("orthogonal"), &format!("{path}.orthogonal"), issues))
                .flatten();
            if angle.is_some() && orthogonal.is_some() {
                issues.push(path, "give either angle or orthogonal, not both");
            }
            MapSpec::Similarity { ratio: ratio?, translation: translation?, angle, reflect, orthogonal }
        }
        "moebius" => MapSpec::Moebius {
            a: pair(o, "a", path, issues)?,
            b: pair(o, "b", path, issues)?,
            c: pair(o, "c", path, issues)?,
            d: pair(o, "d", path, issues)?,
        },
        _ => MapSpec::CirclePair {
            center: pair(o, "center", path, issues)?,
            radius: number(o, "radius", path, issues)?,
            h: number(o, "h", path, issues)?,
        },
    };
    if issues.0.len() != before {
        return None;
    }
    // constructor checks, reported against this map
    match build_map(&spec) {
        Ok(_) => Some(spec),
        Err(e) => {
            issues.push(path, e.to_string());
            None
        }
    }
}

fn parse_potential(v: &Value, issues: &mut Issues) -> Option<PotentialSpec> {
    match v {
        Value::String(s) => match s.as_str() {
            "maximal_entropy" => Some(PotentialSpec::MaximalEntropy),
            "natural" => Some(PotentialSpec::Natural),
            _ => {
                issues.push("potential", format!("unknown named potential '{s}' (known: maximal_entropy, natural)"));
                None
            }
        },
        Value::Object(o) if o.contains_key("bernoulli") => {
            if o.len() != 1 {
                issues.push("potential", "bernoulli takes no other keys");
            }
            numbers(o.get("bernoulli"), "potential.bernoulli", issues).map(PotentialSpec::Bernoulli)
        }
        Value::Object(o) => {
            for key in o.keys() {
                if key != "depth" && key != "table" {
                    issues.push(format!("potential.{key}"), "unknown key");
                }
            }
            let depth = match o.get("depth").and_then(Value::as_u64) {
                Some(d) if d >= 1 => Some(d as usize),
                _ => {
                    issues.push("potential.depth", "must be a positive integer");
                    None
                }
            };
            let mut table = BTreeMap::new();
            match o.get("table").and_then(Value::as_object) {
                None => issues.push("potential.table", "must map words like \"0.1\" to numbers"),
                Some(t) => {
                    for (k, val) in t {
                        match val.as_f64() {
                            Some(x) => {
                                table.insert(k.clone(), x);
                            }
                            None => issues.push(format!("potential.table.{k}"), "must be a number"),
                        }
                    }
                }
            }
            Some(PotentialSpec::Table { depth: depth?, table })
        }
        _ => {
            issues.push("potential", "must be a named potential or an object");
            None
        }
    }
}

fn parse_params(v: Option<&Value>, experiment: Option<Experiment>, issues: &mut Issues) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let obj = match v {
        None | Some(Value::Null) => return out,
        Some(Value::Object(o)) => o,
        Some(_) => {
            issues.push("params", "must be an object of numbers");
            return out;
        }
    };
    for (key, val) in obj {
        let path = format!("params.{key}");
        let spec = if CAP_PARAMS.iter().any(|c| c.0 == key) {
            Some(&ParamSpec { name: "", kind: ParamKind::Int, min: 1.0, max: 1e15 })
        } else {
            match experiment {
                Some(e) => e.params().iter().find(|p| p.name == key),
                // unknown experiment is reported separately
                None => continue,
            }
        };
        let Some(spec) = spec else {
            let names: Vec<&str> = experiment.map(|e| e.params().iter().map(|p| p.name).collect()).unwrap_or_default();
            issues.push(path, format!("unknown parameter (known: {})", names.join(", ")));
            continue;
        };
        match val.as_f64() {
            None => issues.push(path, "must be a number"),
            Some(x) if spec.kind == ParamKind::Int && x.fract() != 0.0 => issues.push(path, "must be an integer"),
            Some(x) if !(x >= spec.min && x <= spec.max) => {
                issues.push(path, format!("must lie in [{}, {}]", spec.min, spec.max))
            }
            Some(x) => {
                out.insert(key.clone(), x);
            }
        }
    }
    out
}

fn complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn build_map(spec: &MapSpec) -> crate::Result<IfsMap> {
    Ok(match spec {
        MapSpec::Similarity { ratio, translation, angle, reflect, orthogonal } => {
            let reflect = reflect.unwrap_or(false);
            let s = match (translation.len(), angle, orthogonal) {
                (_, Some(_), Some(_)) => return Err(crate::Error::input("give either angle or orthogonal")),
                (_, None, Some(o)) => SimilarityMap::new(*ratio, o.clone(), translation.clone())?,
                (1, None, None) => SimilarityMap::line(*ratio, reflect, translation[0])?,
                (2, a, None) => SimilarityMap::planar(*ratio, a.unwrap_or(0.0), reflect, [translation[0], translation[1]])?,
                (_, Some(_), None) => return Err(crate::Error::input("angle needs a planar translation")),
                (_, None, None) => {
                    if reflect {
                        return Err(crate::Error::input("reflect needs dimension 1 or 2; use orthogonal"));
                    }
                    SimilarityMap::homothety(*ratio, translation.clone())?
                }
            };
            IfsMap::Similarity(s)
        }
        MapSpec::Moebius { a, b, c, d } => {
            IfsMap::Conformal(ConformalMap::Moebius(Moebius::new(complex(*a), complex(*b), complex(*c), complex(*d))?))
        }
        MapSpec::CirclePair { center, radius, h } => {
            IfsMap::Conformal(ConformalMap::Moebius(Moebius::circle_pair(complex(*center), *radius, *h)?))
        }
    })
}

/// Construct the system a spec describes.
pub fn build_system(spec: &SystemSpec) -> crate::Result<IfsSystem> {
    match spec {
        SystemSpec::Preset(name) => Ok(preset(name)?.system),
        SystemSpec::Inline(s) => {
            let maps: Vec<IfsMap> = s.maps.iter().map(build_map).collect::<crate::Result<_>>()?;
            let symbolic = match &s.transition {
                Some(rows) => SymbolicSystem::new(rows.clone())?,
                None => SymbolicSystem::full_shift(maps.len())?,
            };
            let domain = match &s.domain {
                Some(d) => d.clone(),
                None => {
                    let dim = match &maps[0] {
                        IfsMap::Similarity(m) => m.dim(),
                        IfsMap::Conformal(_) => 2,
                    };
                    Domain::Cube { dim }
                }
            };
            IfsSystem::new(s.name.clone(), symbolic, maps, domain)
        }
    }
}

/// Construct the Gibbs model for a potential on a built system.
pub fn build_model(sys: &IfsSystem, spec: &PotentialSpec) -> crate::Result<GibbsModel> {
    let s = sys.symbolic();
    let pot = match spec {
        PotentialSpec::MaximalEntropy => Potential::constant(s, 0.0)?,
        PotentialSpec::Natural => {
            let dim = similarity_dimension(sys)?;
            let vals: Vec<f64> = (0..s.alphabet_size())
                .map(|i| dim * sys.similarity(i).expect("similarity system").ratio().ln())
                .collect();
            Potential::depth1(s, &vals)?
        }
        PotentialSpec::Bernoulli(p) => Potential::bernoulli(s, p)?,
        PotentialSpec::Table { depth, table } => {
            let mut words = BTreeMap::new();
            for (k, v) in table {
                let symbols: Vec<usize> = k
                    .split('.')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| crate::Error::input(format!("potential word '{k}' is not dot-separated symbols")))?;
                if symbols.len() != *depth {
                    return Err(crate::Error::input(format!("potential word '{k}' does not have length {depth}")));
                }
                words.insert(Word::new(symbols), *v);
            }
            Potential::from_table(s, *depth, words)?
        }
    };
    build_gibbs(s, &pot)
}

impl ExperimentConfig {
    pub fn build(&self) -> crate::Result<(IfsSystem, GibbsModel)> {
        let sys = build_system(&self.system)?;
        let g = build_model(&sys, &self.potential)?;
        Ok((sys, g))
    }

    /// Integer parameter with a default.
    pub fn int(&self, key: &str, default: u64) -> u64 {
        self.params.get(key).map_or(default, |&v| v as u64)
    }

    pub fn real(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    /// Apply a `--cap-override K=V` where `K` is `words`, `points` or `pairs`.
    pub fn override_cap(&mut self, spec: &str) -> Result<(), ConfigError> {
        let bad = |m: String| ConfigError::Invalid(vec![FieldError { path: "--cap-override".into(), message: m }]);
        let (k, v) = spec.split_once('=').ok_or_else(|| bad(format!("expected K=V, got '{spec}'")))?;
        let param = CAP_PARAMS
            .iter()
            .find(|c| c.1 == k.trim())
            .ok_or_else(|| bad(format!("unknown cap '{k}' (known: words, points, pairs)")))?
            .0;
        let v: u64 = v.trim().parse().ok().filter(|&v| v > 0).ok_or_else(|| bad(format!("cap value '{v}' is not a positive integer")))?;
        self.params.insert(param.to_string(), v as f64);
        Ok(())
    }

    /// Canonical JSON: sorted keys, absent optionals omitted.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        strip_nulls(&mut v);
        serde_json::to_string(&v).expect("value serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        Sha256::digest(self.canonical_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn strip_nulls(v: &mut Value) {
    match v {
        Value::Object(o) => {
            o.retain(|_, x| !x.is_null());
            o.values_mut().for_each(strip_nulls);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_nulls),
        _ => {}
    }
}
