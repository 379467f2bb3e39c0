//! Experiment configuration: TOML file, `CARLAB_` environment overrides,
//! validation that reports every problem at once.

use std::fmt;
use std::path::{Path, PathBuf};

use carlab_core::weights::MRule;
use carlab_core::{MetricPreset, PotentialPreset};
use serde::Serialize;
use toml::{Table, Value};

use crate::error::LabError;

/// Prefix of environment overrides: `CARLAB_<BLOCK>_<KEY>=<toml value>`.
pub const ENV_PREFIX: &str = "CARLAB_";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryConfig {
    pub nr: usize,
    pub na: usize,
    pub nt: usize,
    pub r_in: f64,
    pub r_out: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicsConfig {
    /// `flat`, `polar`, `perturbed_polar` or `sheared`.
    pub metric: String,
    pub metric_eps: f64,
    /// `zero` or `swirl`.
    pub potential: String,
    /// Only `radial_quadratic` is available.
    pub psi: String,
    /// `auto` or a number.
    pub m_rule: String,
    /// Boundary source of `forward`: `constant`, `separable`, `traveling` or `trig`.
    pub source: String,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightsConfig {
    pub gamma_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub samples: usize,
    pub seed: u64,
    pub eps_grid: Vec<f64>,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    pub noise: f64,
    pub noise_reps: usize,
    pub harmonics: usize,
    pub splines: usize,
    pub max_iter: usize,
    pub interpolation_r: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub physics: PhysicsConfig,
    pub weights: WeightsConfig,
    pub run: RunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig { nr: 33, na: 32, nt: 128, r_in: 0.5, r_out: 1.0, horizon: 4.0 },
            physics: PhysicsConfig {
                metric: "polar".into(),
                metric_eps: 0.1,
                potential: "zero".into(),
                psi: "radial_quadratic".into(),
                m_rule: "auto".into(),
                source: "separable".into(),
                alpha: 1.0,
                beta: 5.0,
            },
            weights: WeightsConfig { gamma_grid: vec![2.0], s_grid: vec![8.0, 16.0, 32.0, 64.0] },
            run: RunConfig {
                samples: 20,
                seed: 1,
                eps_grid: vec![1.0, 0.5, 0.25, 0.125],
                lambda: 1e-8,
                lambda_grid: vec![1e-5, 1e-4, 1e-3, 1e-2],
                noise: 0.0,
                noise_reps: 8,
                harmonics: 1,
                splines: 4,
                max_iter: 200,
                interpolation_r: 0.25,
                out: PathBuf::from("runs"),
            },
        }
    }
}

/// One validation problem, tied to the key paths involved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub keys: Vec<String>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.keys.join(", "), self.message)
    }
}

struct Reader<'a> {
    root: &'a Table,
    issues: Vec<ConfigIssue>,
    seen: Vec<String>,
}

impl<'a> Reader<'a> {
    fn issue(&mut self, keys: &[&str], message: impl Into<String>) {
        self.issues.push(ConfigIssue { keys: keys.iter().map(|k| k.to_string()).collect(), message: message.into() });
    }

    fn get(&mut self, path: &str) -> Option<&'a Value> {
        self.seen.push(path.to_string());
        let (block, key) = path.split_once('.')?;
        self.root.get(block)?.as_table()?.get(key)
    }

    fn float(&mut self, path: &str, default: f64) -> f64 {
        match self.get(path) {
            None => default,
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(v) => {
                self.issue(&[path], format!("expected a number, found {}", v.type_str()));
                default
            }
        }
    }

    fn uint(&mut self, path: &str, default: Option<u64>) -> u64 {
        match self.get(path) {
            None => {
                if default.is_none() {
                    self.issue(&[path], "missing required key");
                }
                default.unwrap_or(0)
            }
            Some(Value::Integer(v)) if *v >= 0 => *v as u64,
            Some(v) => {
                self.issue(&[path], format!("expected a nonnegative integer, found {}", v.type_str()));
                default.unwrap_or(0)
            }
        }
    }

    fn string(&mut self, path: &str, default: &str) -> String {
        match self.get(path) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(Value::Float(v)) => v.to_string(),
            Some(Value::Integer(v)) => v.to_string(),
            Some(v) => {
                self.issue(&[path], format!("expected a string, found {}", v.type_str()));
                default.to_string()
            }
        }
    }

    fn floats(&mut self, path: &str, default: &[f64]) -> Vec<f64> {
        match self.get(path) {
            None => default.to_vec(),
            Some(Value::Array(a)) => {
                let mut out = Vec::with_capacity(a.len());
                for (i, v) in a.iter().enumerate() {
                    match v {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(x) => out.push(*x as f64),
                        other => self.issue(&[&format!("{path}[{i}]")], format!("expected a number, found {}", other.type_str())),
                    }
                }
                out
            }
            Some(v) => {
                self.issue(&[path], format!("expected an array of numbers, found {}", v.type_str()));
                default.to_vec()
            }
        }
    }

    fn unknown_keys(&mut self) {
        let mut unknown = Vec::new();
        for (block, v) in self.root {
            match v.as_table() {
                Some(t) => {
                    for key in t.keys() {
                        let path = format!("{block}.{key}");
                        if !self.seen.contains(&path) {
                            unknown.push(path);
                        }
                    }
                }
                None => unknown.push(block.clone()),
            }
        }
        for path in unknown {
            self.issue(&[&path], "unknown key");
        }
    }
}

impl ExperimentConfig {
    /// Validated config from parsed TOML; a missing file section falls back
    /// to the defaults except for the required grid sizes.
    pub fn from_table(root: &Table, require_sizes: bool) -> Result<Self, Vec<ConfigIssue>> {
        let d = Self::default();
        let mut r = Reader { root, issues: Vec::new(), seen: Vec::new() };
        let size = |dv: usize| if require_sizes { None } else { Some(dv as u64) };
        let geometry = GeometryConfig {
            nr: r.uint("geometry.nr", size(d.geometry.nr)) as usize,
            na: r.uint("geometry.na", size(d.geometry.na)) as usize,
            nt: r.uint("geometry.nt", size(d.geometry.nt)) as usize,
            r_in: r.float("geometry.r_in", d.geometry.r_in),
            r_out: r.float("geometry.r_out", d.geometry.r_out),
            horizon: r.float("geometry.T", d.geometry.horizon),
        };
        let physics = PhysicsConfig {
            metric: r.string("physics.metric", &d.physics.metric),
            metric_eps: r.float("physics.metric_eps", d.physics.metric_eps),
            potential: r.string("physics.potential", &d.physics.potential),
            psi: r.string("physics.psi", &d.physics.psi),
            m_rule: r.string("physics.m_rule", &d.physics.m_rule),
            source: r.string("physics.source", &d.physics.source),
            alpha: r.float("physics.alpha", d.physics.alpha),
            beta: r.float("physics.beta", d.physics.beta),
        };
        let weights = WeightsConfig {
            gamma_grid: r.floats("weights.gamma_grid", &d.weights.gamma_grid),
            s_grid: r.floats("weights.s_grid", &d.weights.s_grid),
        };
        let run = RunConfig {
            samples: r.uint("run.samples", Some(d.run.samples as u64)) as usize,
            seed: r.uint("run.seed", Some(d.run.seed)),
            eps_grid: r.floats("run.eps_grid", &d.run.eps_grid),
            lambda: r.float("run.lambda", d.run.lambda),
            lambda_grid: r.floats("run.lambda_grid", &d.run.lambda_grid),
            noise: r.float("run.noise", d.run.noise),
            noise_reps: r.uint("run.noise_reps", Some(d.run.noise_reps as u64)) as usize,
            harmonics: r.uint("run.harmonics", Some(d.run.harmonics as u64)) as usize,
            splines: r.uint("run.splines", Some(d.run.splines as u64)) as usize,
            max_iter: r.uint("run.max_iter", Some(d.run.max_iter as u64)) as usize,
            interpolation_r: r.float("run.interpolation_r", d.run.interpolation_r),
            out: PathBuf::from(r.string("run.out", &d.run.out.to_string_lossy())),
        };
        r.unknown_keys();
        let cfg = Self { geometry, physics, weights, run };
        let mut issues = r.issues;
        issues.extend(cfg.constraint_issues());
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(issues)
        }
    }

    fn constraint_issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut bad = |keys: &[&str], msg: &str| out.push(ConfigIssue { keys: keys.iter().map(|k| k.to_string()).collect(), message: msg.into() });
        let g = &self.geometry;
        if g.nr < 5 {
            bad(&["geometry.nr"], "must be at least 5");
        }
        if g.na < 4 {
            bad(&["geometry.na"], "must be at least 4");
        }
        if g.nt < 2 {
            bad(&["geometry.nt"], "must be at least 2");
        }
        if !(g.r_in > 0.0) {
            bad(&["geometry.r_in"], "must be positive");
        }
        if !(g.r_in < g.r_out) {
            bad(&["geometry.r_in", "geometry.r_out"], "r_in must be smaller than r_out");
        }
        if !(g.horizon > 0.0) {
            bad(&["geometry.T"], "must be positive");
        }
        if self.metric().is_none() {
            bad(&["physics.metric"], "expected flat, polar, perturbed_polar or sheared");
        }
        if self.potential().is_none() {
            bad(&["physics.potential"], "expected zero or swirl");
        }
        if self.physics.psi != "radial_quadratic" {
            bad(&["physics.psi"], "expected radial_quadratic");
        }
        if self.m_rule().is_none() {
            bad(&["physics.m_rule"], "expected auto or a positive number");
        }
        if !["constant", "separable", "traveling", "trig"].contains(&self.physics.source.as_str()) {
            bad(&["physics.source"], "expected constant, separable, traveling or trig");
        }
        if !(self.physics.alpha > 0.0) {
            bad(&["physics.alpha"], "must be positive");
        }
        if !(self.physics.beta > 0.0) {
            bad(&["physics.beta"], "must be positive");
        }
        for (key, grid) in [
            ("weights.gamma_grid", &self.weights.gamma_grid),
            ("weights.s_grid", &self.weights.s_grid),
            ("run.eps_grid", &self.run.eps_grid),
            ("run.lambda_grid", &self.run.lambda_grid),
        ] {
            if grid.is_empty() {
                bad(&[key], "grid must not be empty");
            } else if grid.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                bad(&[key], "grid values must be positive and finite");
            }
        }
        if self.run.eps_grid.iter().any(|e| *e >= 0.5 * g.horizon) {
            bad(&["run.eps_grid", "geometry.T"], "eps must be below T/2");
        }
        if self.run.samples == 0 {
            bad(&["run.samples"], "must be at least 1");
        }
        if self.run.noise_reps == 0 {
            bad(&["run.noise_reps"], "must be at least 1");
        }
        if !(self.run.lambda >= 0.0) {
            bad(&["run.lambda"], "must be nonnegative");
        }
        if !(self.run.noise >= 0.0) {
            bad(&["run.noise"], "must be nonnegative");
        }
        if self.run.splines < 4 {
            bad(&["run.splines"], "must be at least 4");
        }
        if !(self.run.interpolation_r > 0.0 && self.run.interpolation_r < 0.5) {
            bad(&["run.interpolation_r"], "must lie in (0, 1/2)");
        }
        out
    }

    pub fn metric(&self) -> Option<MetricPreset> {
        let eps = self.physics.metric_eps;
        match self.physics.metric.as_str() {
            "flat" => Some(MetricPreset::Flat),
            "polar" => Some(MetricPreset::Polar),
            "perturbed_polar" => Some(MetricPreset::PerturbedPolar { eps }),
            "sheared" => Some(MetricPreset::Sheared { eps }),
            _ => None,
        }
    }

    pub fn potential(&self) -> Option<PotentialPreset> {
        match self.physics.potential.as_str() {
            "zero" => Some(PotentialPreset::Zero),
            "swirl" => Some(PotentialPreset::Swirl),
            _ => None,
        }
    }

    pub fn m_rule(&self) -> Option<MRule> {
        match self.physics.m_rule.as_str() {
            "auto" => Some(MRule::Auto),
            s => s.parse::<f64>().ok().filter(|m| *m > 0.0).map(MRule::Explicit),
        }
    }

    /// TOML text of every resolved value.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Applies `CARLAB_<BLOCK>_<KEY>` overrides; values are parsed as TOML and
/// fall back to plain strings.
pub fn apply_env_overrides<I>(root: &mut Table, vars: I) -> Result<(), Vec<ConfigIssue>>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut issues = Vec::new();
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (name, raw) in vars {
        let rest = name[ENV_PREFIX.len()..].to_ascii_lowercase();
        let Some((block, key)) = rest.split_once('_') else {
            issues.push(ConfigIssue { keys: vec![name.clone()], message: "expected CARLAB_<BLOCK>_<KEY>".into() });
            continue;
        };
        if !["geometry", "physics", "weights", "run"].contains(&block) {
            issues.push(ConfigIssue { keys: vec![name.clone()], message: format!("unknown block {block}") });
            continue;
        }
        let key = if block == "geometry" && key == "t" { "T".to_string() } else { key.to_string() };
        let value = parse_value(&raw);
        let entry = root.entry(block.to_string()).or_insert_with(|| Value::Table(Table::new()));
        match entry.as_table_mut() {
            Some(t) => {
                t.insert(key, value);
            }
            None => issues.push(ConfigIssue { keys: vec![block.to_string()], message: "expected a table".into() }),
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

fn parse_value(raw: &str) -> Value {
    let probe = format!("v = {raw}");
    match probe.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Reads, overrides and validates a config. Without a file the defaults are
/// used and the grid sizes are not required.
pub fn parse_config<I>(path: Option<&Path>, vars: I) -> Result<ExperimentConfig, LabError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| LabError::io(p, e))?;
            text.parse::<Table>().map_err(|e| LabError::Config(vec![ConfigIssue { keys: vec![p.display().to_string()], message: e.message().to_string() }]))?
        }
        None => Table::new(),
    };
    apply_env_overrides(&mut root, vars).map_err(LabError::Config)?;
    ExperimentConfig::from_table(&root, path.is_some()).map_err(LabError::Config)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, LabError> {
    let root = text
        .parse::<Table>()
        .map_err(|e| LabError::Config(vec![ConfigIssue { keys: vec!["<input>".into()], message: e.message().to_string() }]))?;
    ExperimentConfig::from_table(&root, true).map_err(LabError::Config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[geometry]\nnr = 17\nna = 16\nnt = 40\n";

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_config_str(text) {
            Err(LabError::Config(v)) => v,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.geometry.nr, 17);
        assert_eq!(cfg.weights, ExperimentConfig::default().weights);
        let dump = cfg.resolved_toml();
        assert!(dump.contains("gamma_grid"));
        assert_eq!(parse_config_str(&dump).unwrap(), cfg);
    }

    #[test]
    fn inverted_radii_name_both_keys() {
        let v = issues(&format!("{MINIMAL}r_in = 1.0\nr_out = 0.5\n"));
        assert!(v.iter().any(|i| i.keys == ["geometry.r_in", "geometry.r_out"]), "{v:?}");
    }

    #[test]
    fn empty_gamma_grid_is_rejected() {
        let v = issues(&format!("{MINIMAL}[weights]\ngamma_grid = []\n"));
        assert!(v.iter().any(|i| i.keys == ["weights.gamma_grid"]), "{v:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let v = issues("[geometry]\nnr = \"x\"\nr_in = 2.0\n[physics]\nmetric = \"hyperbolic\"\nbogus = 1\n");
        let keys: Vec<String> = v.iter().map(|i| i.keys.join(",")).collect();
        for k in ["geometry.nr", "geometry.na", "geometry.nt", "geometry.r_in,geometry.r_out", "physics.metric", "physics.bogus"] {
            assert!(keys.iter().any(|x| x == k), "{k} missing from {keys:?}");
        }
    }

    #[test]
    fn env_overrides_apply_with_types() {
        let vars = vec![
            ("CARLAB_RUN_SEED".to_string(), "42".to_string()),
            ("CARLAB_WEIGHTS_S_GRID".to_string(), "[4, 8]".to_string()),
            ("CARLAB_PHYSICS_METRIC".to_string(), "sheared".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let cfg = parse_config(None, vars).unwrap();
        assert_eq!(cfg.run.seed, 42);
        assert_eq!(cfg.weights.s_grid, vec![4.0, 8.0]);
        assert_eq!(cfg.physics.metric, "sheared");
    }
}
