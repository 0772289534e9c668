//! Run and sweep configuration.
//!
//! A config is a flat JSON object. A written manifest uses the same schema with
//! every default spelled out, so it can be fed back to `run` unchanged.
//!
//! | key | default |
//! |---|---|
//! | `theta` | required for runs; number or `"p/q"` string |
//! | `theta_values` | required for sweeps; list of the same |
//! | `workers` | sweeps only; available parallelism |
//! | `t_end`, `n`, `L` | required |
//! | `origin` | `-L/2` |
//! | `cfl`, `dt_min`, `dt_max` | 0.5, 1e-10, 0.01 |
//! | `slope_blowup_threshold` | 1e6 |
//! | `output_every` | 10 |
//! | `scenario` | `{"kind": "from_momentum", "amplitude": 1, "width": 1}` |
//! | `x_star` | the scenario's symmetry point |
//! | `seeds` | `[]` (characteristics to track) |
//! | `outputs` | `{"dir": "theta-wave-run"}` plus the file names below |
//! | `seed_independent` | `true` |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{SimConfig, ThetaParam};
use crate::error::{Error, Result};
use crate::scenarios::ScenarioSpec;
use crate::spectral::Grid;

/// Environment variable that relocates relative output directories.
pub const OUT_ENV: &str = "THETA_WAVE_OUT";

/// A theta given as a number or as a `"p/q"` / decimal string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaInput {
    Number(f64),
    Text(String),
}

impl ThetaInput {
    pub fn resolve(&self) -> std::result::Result<f64, String> {
        match self {
            ThetaInput::Number(v) => Ok(*v),
            ThetaInput::Text(s) => parse_theta(s),
        }
    }
}

/// `"p/q"` with integer `p`, `q` (correctly rounded quotient) or a plain decimal.
pub fn parse_theta(text: &str) -> std::result::Result<f64, String> {
    let s = text.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| format!("`{s}`: numerator is not an integer"))?;
        let q: i64 = q.trim().parse().map_err(|_| format!("`{s}`: denominator is not an integer"))?;
        if q == 0 {
            return Err(format!("`{s}`: zero denominator"));
        }
        const EXACT: i64 = 1 << 53;
        if p.abs() > EXACT || q.abs() > EXACT {
            return Err(format!("`{s}`: integers beyond 2^53 are not exact"));
        }
        Ok(p as f64 / q as f64)
    } else {
        s.parse().map_err(|_| format!("`{s}` is neither a number nor p/q"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    #[serde(default = "names::manifest")]
    pub manifest: String,
    #[serde(default = "names::report")]
    pub report: String,
    #[serde(default = "names::diagnostics")]
    pub diagnostics: String,
    #[serde(default = "names::snapshots")]
    pub snapshots: String,
    #[serde(default = "names::riccati")]
    pub riccati: String,
    #[serde(default = "names::paths")]
    pub paths: String,
    #[serde(default = "names::sweep")]
    pub sweep: String,
    #[serde(default = "names::convergence")]
    pub convergence: String,
}

mod names {
    pub fn manifest() -> String {
        "manifest.json".into()
    }
    pub fn report() -> String {
        "report.json".into()
    }
    pub fn diagnostics() -> String {
        "diagnostics.csv".into()
    }
    pub fn snapshots() -> String {
        "snapshots".into()
    }
    pub fn riccati() -> String {
        "riccati.csv".into()
    }
    pub fn paths() -> String {
        "paths.csv".into()
    }
    pub fn sweep() -> String {
        "sweep.csv".into()
    }
    pub fn convergence() -> String {
        "convergence.csv".into()
    }
}

impl OutputSpec {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        OutputSpec {
            dir: dir.into(),
            manifest: names::manifest(),
            report: names::report(),
            diagnostics: names::diagnostics(),
            snapshots: names::snapshots(),
            riccati: names::riccati(),
            paths: names::paths(),
            sweep: names::sweep(),
            convergence: names::convergence(),
        }
    }

    /// Output directory, placed under `$THETA_WAVE_OUT` when that is set and `dir` is relative.
    pub fn root(&self) -> PathBuf {
        resolve_root(&self.dir, std::env::var_os(OUT_ENV).map(PathBuf::from).as_deref())
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root().join(name)
    }
}

pub(crate) fn resolve_root(dir: &Path, env_root: Option<&Path>) -> PathBuf {
    match env_root {
        Some(root) if dir.is_relative() => root.join(dir),
        _ => dir.to_path_buf(),
    }
}

/// A validated single run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: SimConfig,
    pub scenario: ScenarioSpec,
    pub grid: Grid,
    pub outputs: OutputSpec,
    pub x_star: Option<f64>,
    pub seeds: Vec<f64>,
    /// Always true: nothing in a run draws random numbers.
    pub seed_independent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub theta_values: Vec<ThetaParam>,
    /// Template run; its theta is replaced per row.
    pub base: RunManifest,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<ThetaInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_values: Option<Vec<ThetaInput>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    t_end: f64,
    n: usize,
    #[serde(rename = "L")]
    length: f64,
    #[serde(default)]
    origin: Option<f64>,
    #[serde(default)]
    cfl: Option<f64>,
    #[serde(default)]
    dt_min: Option<f64>,
    #[serde(default)]
    dt_max: Option<f64>,
    #[serde(default)]
    slope_blowup_threshold: Option<f64>,
    #[serde(default)]
    output_every: Option<usize>,
    #[serde(default)]
    scenario: Option<ScenarioSpec>,
    #[serde(default)]
    x_star: Option<f64>,
    #[serde(default)]
    seeds: Option<Vec<f64>>,
    #[serde(default)]
    outputs: Option<OutputSpec>,
    #[serde(default)]
    seed_independent: Option<bool>,
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Lift a validation error to a config error naming the offending key.
fn keyed(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => config_error(name, reason),
        Error::InvalidGrid(m) => {
            let key = if m.starts_with("length") {
                "L"
            } else if m.starts_with("origin") {
                "origin"
            } else {
                "n"
            };
            config_error(key, m)
        }
        other => other,
    }
}

fn read_document(text: &str) -> Result<Document> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(&path, e.into_inner().to_string())
    })
}

fn theta_of(input: &ThetaInput, key: &str) -> Result<ThetaParam> {
    let v = input.resolve().map_err(|m| config_error(key, m))?;
    ThetaParam::new(v).map_err(|e| config_error(key, e.to_string()))
}

fn default_scenario() -> ScenarioSpec {
    ScenarioSpec::FromMomentum {
        amplitude: 1.0,
        width: 1.0,
        center: 0.0,
    }
}

fn build(doc: &Document, theta: ThetaParam) -> Result<RunManifest> {
    let origin = doc.origin.unwrap_or(-0.5 * doc.length);
    let grid = Grid::new(doc.n, doc.length, origin).map_err(keyed)?;
    let mut config = SimConfig::new(theta, doc.t_end);
    config.cfl = doc.cfl.unwrap_or(config.cfl);
    config.dt_min = doc.dt_min.unwrap_or(config.dt_min);
    config.dt_max = doc.dt_max.unwrap_or(config.dt_max);
    config.slope_blowup_threshold = doc.slope_blowup_threshold.unwrap_or(config.slope_blowup_threshold);
    config.output_every = doc.output_every.unwrap_or(config.output_every);
    config.validate().map_err(keyed)?;
    let scenario = doc.scenario.clone().unwrap_or_else(default_scenario);
    scenario
        .validate()
        .map_err(|e| match keyed(e) {
            Error::Config { path, message } => config_error(&format!("scenario.{path}"), message),
            other => other,
        })?;
    let x_star = match (doc.x_star, &scenario) {
        (Some(x), _) => Some(x),
        (None, ScenarioSpec::OddBlowup { center, .. }) => Some(*center),
        (None, _) => None,
    };
    if let Some(x) = x_star {
        if !x.is_finite() {
            return Err(config_error("x_star", "must be finite"));
        }
    }
    let seeds = doc.seeds.clone().unwrap_or_default();
    let (lo, hi) = (grid.origin(), grid.origin() + grid.length());
    if let Some(i) = seeds.iter().position(|s| !(s.is_finite() && *s >= lo && *s <= hi)) {
        return Err(config_error(&format!("seeds[{i}]"), format!("must lie in [{lo}, {hi}]")));
    }
    if doc.seed_independent == Some(false) {
        return Err(config_error("seed_independent", "runs draw no random numbers; only true is accepted"));
    }
    Ok(RunManifest {
        config,
        scenario,
        grid,
        outputs: doc.outputs.clone().unwrap_or_else(|| OutputSpec::in_dir("theta-wave-run")),
        x_star,
        seeds,
        seed_independent: true,
    })
}

/// Parse and validate a single-run config (or a written manifest).
pub fn parse_config(text: &str) -> Result<RunManifest> {
    let doc = read_document(text)?;
    if doc.theta_values.is_some() || doc.workers.is_some() {
        return Err(config_error(
            if doc.theta_values.is_some() { "theta_values" } else { "workers" },
            "only valid in a sweep config",
        ));
    }
    let theta = doc.theta.as_ref().ok_or_else(|| config_error("theta", "missing"))?;
    let theta = theta_of(theta, "theta")?;
    build(&doc, theta)
}

/// Parse and validate a sweep config.
pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    let doc = read_document(text)?;
    if doc.theta.is_some() {
        return Err(config_error("theta", "a sweep takes `theta_values`"));
    }
    let raw = doc.theta_values.as_ref().ok_or_else(|| config_error("theta_values", "missing"))?;
    if raw.is_empty() {
        return Err(config_error("theta_values", "must not be empty"));
    }
    let theta_values = raw
        .iter()
        .enumerate()
        .map(|(i, t)| theta_of(t, &format!("theta_values[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let workers = doc
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(config_error("workers", "must be at least 1"));
    }
    let base = build(&doc, theta_values[0])?;
    Ok(SweepSpec {
        theta_values,
        base,
        workers,
    })
}

impl RunManifest {
    fn document(&self) -> Document {
        let c = &self.config;
        Document {
            theta: Some(ThetaInput::Number(c.theta.value())),
            theta_values: None,
            workers: None,
            t_end: c.t_end,
            n: self.grid.n(),
            length: self.grid.length(),
            origin: Some(self.grid.origin()),
            cfl: Some(c.cfl),
            dt_min: Some(c.dt_min),
            dt_max: Some(c.dt_max),
            slope_blowup_threshold: Some(c.slope_blowup_threshold),
            output_every: Some(c.output_every),
            scenario: Some(self.scenario.clone()),
            x_star: self.x_star,
            seeds: Some(self.seeds.clone()),
            outputs: Some(self.outputs.clone()),
            seed_independent: Some(self.seed_independent),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.document())?)
    }

    /// Same run with another theta.
    pub fn with_theta(&self, theta: ThetaParam) -> RunManifest {
        let mut m = self.clone();
        m.config.theta = theta;
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{"theta": "1/3", "t_end": 1, "n": 256, "L": 80}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let m = parse_config(MINIMAL).unwrap();
        assert_eq!(m.config.theta.value(), 1.0 / 3.0);
        assert_eq!(m.config.cfl, SimConfig::DEFAULT_CFL);
        assert_eq!(m.config.dt_min, SimConfig::DEFAULT_DT_MIN);
        assert_eq!(m.config.slope_blowup_threshold, 1e6);
        assert_eq!(m.config.output_every, 10);
        assert_eq!(m.grid, Grid::new(256, 80.0, -40.0).unwrap());
        assert_eq!(m.scenario, default_scenario());
        assert_eq!(m.outputs, OutputSpec::in_dir("theta-wave-run"));
        assert!(m.seed_independent);
        assert!(m.seeds.is_empty());
    }

    #[test]
    fn cfl_out_of_range_names_the_key() {
        let e = parse_config(r#"{"theta": 0.5, "t_end": 1, "n": 64, "L": 10, "cfl": 1.5}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "cfl"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let e = parse_config(r#"{"theta": 0.5, "t_end": 1, "n": 64, "L": 10, "dt": 0.1}"#).unwrap_err();
        assert!(e.to_string().contains("dt"), "{e}");
        let e = parse_config(
            r#"{"theta": 0.5, "t_end": 1, "n": 64, "L": 10, "scenario": {"kind": "peakon", "c": 1, "speed": 2}}"#,
        )
        .unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path.starts_with("scenario")), "{e}");
        let e = parse_config(r#"{"theta": 0.5, "t_end": "soon", "n": 64, "L": 10}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "t_end"), "{e}");
    }

    #[test]
    fn invalid_values() {
        for (text, key) in [
            (r#"{"theta": "1/0", "t_end": 1, "n": 64, "L": 10}"#, "theta"),
            (r#"{"theta": "x", "t_end": 1, "n": 64, "L": 10}"#, "theta"),
            (r#"{"theta": 0.5, "t_end": -1, "n": 64, "L": 10}"#, "t_end"),
            (r#"{"theta": 0.5, "t_end": 1, "n": 60, "L": 10}"#, "n"),
            (r#"{"theta": 0.5, "t_end": 1, "n": 64, "L": 10, "seeds": [99]}"#, "seeds[0]"),
            (r#"{"theta": 0.5, "t_end": 1, "n": 64, "L": 10, "seed_independent": false}"#, "seed_independent"),
            (r#"{"t_end": 1, "n": 64, "L": 10}"#, "theta"),
            (r#"{"theta": 0.5, "theta_values": [1], "t_end": 1, "n": 64, "L": 10}"#, "theta_values"),
            (
                r#"{"theta": 0.5, "t_end": 1, "n": 64, "L": 10, "scenario": {"kind": "from_momentum", "amplitude": 1, "width": -1}}"#,
                "scenario.width",
            ),
        ] {
            let e = parse_config(text).unwrap_err();
            assert!(matches!(&e, Error::Config { path, .. } if path == key), "{text}: {e}");
        }
    }

    #[test]
    fn rational_theta_is_correctly_rounded() {
        assert_eq!(parse_theta("1/3").unwrap(), 1.0 / 3.0);
        assert_eq!(parse_theta(" 2 / 3 ").unwrap(), 2.0 / 3.0);
        assert_eq!(parse_theta("-4/7").unwrap(), -4.0 / 7.0);
        assert_eq!(parse_theta("0.25").unwrap(), 0.25);
        assert!(parse_theta("1/3/4").is_err());
        assert!(parse_theta("9007199254740993/3").is_err());
    }

    #[test]
    fn odd_scenario_supplies_symmetry_point() {
        let m = parse_config(
            r#"{"theta": 0.3, "t_end": 1, "n": 64, "L": 10, "scenario": {"kind": "odd_blowup", "width": 1, "center": 0.0}}"#,
        )
        .unwrap();
        assert_eq!(m.x_star, Some(0.0));
    }

    #[test]
    fn sweep_parsing() {
        let s = parse_sweep(r#"{"theta_values": ["1/4", 0.5], "workers": 3, "t_end": 1, "n": 64, "L": 10}"#).unwrap();
        assert_eq!(s.theta_values, vec![ThetaParam::new(0.25).unwrap(), ThetaParam::new(0.5).unwrap()]);
        assert_eq!(s.workers, 3);
        let e = parse_sweep(r#"{"theta_values": [], "t_end": 1, "n": 64, "L": 10}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "theta_values"));
        let e = parse_sweep(r#"{"theta_values": [0.5, "nan"], "t_end": 1, "n": 64, "L": 10}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "theta_values[1]"), "{e}");
        assert!(parse_sweep(MINIMAL).is_err());
    }

    #[test]
    fn env_root_applies_to_relative_dirs_only() {
        let env = Path::new("/tmp/out");
        assert_eq!(resolve_root(Path::new("a/b"), Some(env)), PathBuf::from("/tmp/out/a/b"));
        assert_eq!(resolve_root(Path::new("/abs"), Some(env)), PathBuf::from("/abs"));
        assert_eq!(resolve_root(Path::new("a"), None), PathBuf::from("a"));
    }

    fn scenario_strategy() -> impl Strategy<Value = ScenarioSpec> {
        prop_oneof![
            Just(ScenarioSpec::Zero {}),
            (-3.0..3.0f64, 0.1..2.0f64, -5.0..5.0f64)
                .prop_map(|(c, eps, center)| ScenarioSpec::SmoothedPeakon { c, eps, center }),
            (-3.0..3.0f64, 0.1..4.0f64, -5.0..5.0f64)
                .prop_map(|(amplitude, width, center)| ScenarioSpec::FromMomentum { amplitude, width, center }),
            (0.1..3.0f64, 0.1..4.0f64, proptest::option::of(-3.0..-0.1f64)).prop_map(|(amplitude, width, target_slope)| {
                ScenarioSpec::OddBlowup {
                    amplitude,
                    width,
                    center: 0.0,
                    target_slope,
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn manifest_round_trips(
            theta in -5.0..5.0f64,
            t_end in 1e-3..100.0f64,
            log_n in 3u32..12,
            length in 1.0..200.0f64,
            origin in -100.0..100.0f64,
            cfl in 0.01..1.0f64,
            every in 1usize..50,
            scenario in scenario_strategy(),
            x_star in proptest::option::of(-5.0..5.0f64),
            seeds in proptest::collection::vec(0.0..1.0f64, 0..4),
        ) {
            let grid = Grid::new(1 << log_n, length, origin).unwrap();
            // Parsed odd scenarios always carry their symmetry point.
            let x_star = match scenario {
                ScenarioSpec::OddBlowup { center, .. } => x_star.or(Some(center)),
                _ => x_star,
            };
            let mut config = SimConfig::new(ThetaParam::new(theta).unwrap(), t_end);
            config.cfl = cfl;
            config.output_every = every;
            let m = RunManifest {
                config,
                scenario,
                grid,
                outputs: OutputSpec::in_dir("some/dir"),
                x_star,
                seeds: seeds.iter().map(|s| origin + s * length).collect(),
                seed_independent: true,
            };
            let back = parse_config(&m.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
