//! Flat typed `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment. `include = <name>` splices in a
//! built-in preset or a file relative to the including file; keys after the
//! include override it. Every key has a fixed type and unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    AhmQuench,
    DScaling,
    BaryonPrep,
    HadronicTensor,
    Resources,
}

impl Experiment {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ahm-quench" => Experiment::AhmQuench,
            "d-scaling" => Experiment::DScaling,
            "baryon-prep" => Experiment::BaryonPrep,
            "hadronic-tensor" => Experiment::HadronicTensor,
            "resources" => Experiment::Resources,
            _ => return Err(Error::Parse(format!("unknown experiment {s:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Trotter,
    Exact,
    Both,
}

impl Backend {
    pub fn trotter(self) -> bool {
        self != Backend::Exact
    }

    pub fn exact(self) -> bool {
        self != Backend::Trotter
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// `zd` or `q8`
    pub group: String,
    pub d: usize,
    pub d_values: Vec<usize>,
    pub lattice: String,
    pub lambda_e: f64,
    pub lambda_b: f64,
    pub lambda_m: f64,
    pub lambda_j: f64,
    pub mu: f64,
    pub x: f64,
    pub dt: f64,
    pub steps: usize,
    pub order: u8,
    pub backend: Backend,
    pub out: PathBuf,
    pub seed: u64,
    pub n_sites: usize,
    pub blocks: usize,
    pub restarts: usize,
    pub max_iters: u64,
    pub ramp_dt: f64,
    pub threshold: f64,
    pub t_max: f64,
    pub t_step: f64,
    pub current_mu: usize,
    pub current_nu: usize,
    pub omega_max: f64,
    pub omega_count: usize,
    pub window: String,
    pub model: String,
    pub gate_fidelity: f64,
    pub fidelity_floor: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::AhmQuench,
            group: "zd".into(),
            d: 3,
            d_values: vec![3, 4, 5, 6],
            lattice: "2x2".into(),
            lambda_e: 4.0 * std::f64::consts::PI / 9.0,
            lambda_b: 0.5,
            lambda_m: 0.5,
            lambda_j: 2.0 * std::f64::consts::PI / 9.0,
            mu: 1.0,
            x: 0.5,
            dt: 4.0 / 55.0,
            steps: 55,
            order: 2,
            backend: Backend::Both,
            out: PathBuf::from("out"),
            seed: 7,
            n_sites: 4,
            blocks: 5,
            restarts: 8,
            max_iters: 4000,
            ramp_dt: 0.2,
            threshold: 0.99,
            t_max: 10.0,
            t_step: 0.1,
            current_mu: 0,
            current_nu: 0,
            omega_max: 8.0,
            omega_count: 161,
            window: "rectangular".into(),
            model: "ahm".into(),
            gate_fidelity: 0.996,
            fidelity_floor: 0.9,
        }
    }
}

/// Built-in preset texts.
pub fn preset(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig4" => FIG4,
        "fig5" => FIG5,
        "resources-ahm" => RESOURCES_AHM,
        "baryon-prep" => BARYON_PREP,
        "hadronic" => HADRONIC,
        _ => return None,
    })
}

pub const PRESETS: [&str; 5] = ["fig4", "fig5", "resources-ahm", "baryon-prep", "hadronic"];

const FIG4: &str = "\
experiment = ahm-quench
group = zd
d = 3
lattice = 2x2
lambda_e = 1.3962634015954636
lambda_b = 0.5
lambda_m = 0.5
lambda_j = 0.6981317007977318
dt = 0.07272727272727272
steps = 55
order = 2
backend = both
";

const FIG5: &str = "\
include = fig4
experiment = d-scaling
lambda_b = 2
d_values = 3, 4, 5, 6
backend = exact
";

const RESOURCES_AHM: &str = "\
include = fig4
experiment = resources
model = ahm
gate_fidelity = 0.996
fidelity_floor = 0.9
n_sites = 8
";

const BARYON_PREP: &str = "\
experiment = baryon-prep
group = q8
n_sites = 4
mu = 1
x = 0.5
blocks = 5
restarts = 8
max_iters = 4000
ramp_dt = 0.2
threshold = 0.99
seed = 7
";

const HADRONIC: &str = "\
include = baryon-prep
experiment = hadronic-tensor
dt = 0.05
order = 2
t_max = 10
t_step = 0.1
current_mu = 0
current_nu = 0
omega_max = 8
omega_count = 161
window = hann
backend = both
";

const MAX_INCLUDE_DEPTH: usize = 8;

/// Raw key-value pairs after include resolution, in override order.
pub fn parse_pairs(text: &str, base: Option<&Path>) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    collect(text, base, 0, &mut out)?;
    Ok(out)
}

fn collect(text: &str, base: Option<&Path>, depth: usize, out: &mut BTreeMap<String, String>) -> Result<()> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(Error::Parse("include nesting too deep".into()));
    }
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", no + 1)))?;
        if k.is_empty() || v.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key or value", no + 1)));
        }
        if k == "include" {
            if let Some(p) = preset(v) {
                collect(p, None, depth + 1, out)?;
            } else {
                let path = base.map_or_else(|| PathBuf::from(v), |b| b.join(v));
                let inner = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Parse(format!("include {}: {e}", path.display())))?;
                collect(&inner, path.parent(), depth + 1, out)?;
            }
        } else {
            out.insert(k.to_string(), v.to_string());
        }
    }
    Ok(())
}

fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Parse(format!("{k}: {v:?} is not a valid value ({e})")))
}

impl ExperimentConfig {
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let pairs = parse_pairs(text, base)?;
        let mut c = ExperimentConfig::default();
        for (k, v) in &pairs {
            let v = v.as_str();
            match k.as_str() {
                "experiment" => c.experiment = Experiment::parse(v)?,
                "group" => c.group = v.to_string(),
                "d" => c.d = num(k, v)?,
                "d_values" => c.d_values = v.split(',').map(|s| num(k, s.trim())).collect::<Result<_>>()?,
                "lattice" => c.lattice = v.to_string(),
                "lambda_e" => c.lambda_e = num(k, v)?,
                "lambda_b" => c.lambda_b = num(k, v)?,
                "lambda_m" => c.lambda_m = num(k, v)?,
                "lambda_j" => c.lambda_j = num(k, v)?,
                "mu" => c.mu = num(k, v)?,
                "x" => c.x = num(k, v)?,
                "dt" => c.dt = num(k, v)?,
                "steps" => c.steps = num(k, v)?,
                "order" => c.order = num(k, v)?,
                "backend" => {
                    c.backend = match v {
                        "trotter" => Backend::Trotter,
                        "exact" => Backend::Exact,
                        "both" => Backend::Both,
                        _ => return Err(Error::Parse(format!("backend: unknown value {v:?}"))),
                    }
                }
                "out" => c.out = PathBuf::from(v),
                "seed" => c.seed = num(k, v)?,
                "n_sites" => c.n_sites = num(k, v)?,
                "blocks" => c.blocks = num(k, v)?,
                "restarts" => c.restarts = num(k, v)?,
                "max_iters" => c.max_iters = num(k, v)?,
                "ramp_dt" => c.ramp_dt = num(k, v)?,
                "threshold" => c.threshold = num(k, v)?,
                "t_max" => c.t_max = num(k, v)?,
                "t_step" => c.t_step = num(k, v)?,
                "current_mu" => c.current_mu = num(k, v)?,
                "current_nu" => c.current_nu = num(k, v)?,
                "omega_max" => c.omega_max = num(k, v)?,
                "omega_count" => c.omega_count = num(k, v)?,
                "window" => c.window = v.to_string(),
                "model" => c.model = v.to_string(),
                "gate_fidelity" => c.gate_fidelity = num(k, v)?,
                "fidelity_floor" => c.fidelity_floor = num(k, v)?,
                _ => return Err(Error::Parse(format!("unknown key {k:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        match preset(name) {
            Some(t) => Self::parse(t, None),
            None => Err(Error::Parse(format!("unknown preset {name:?}; known: {}", PRESETS.join(", ")))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !matches!(self.group.as_str(), "zd" | "q8") {
            return bad(format!("group must be zd or q8, got {:?}", self.group));
        }
        if self.lattice != "2x2" {
            return bad(format!("only the periodic 2x2 lattice is supported, got {:?}", self.lattice));
        }
        if self.d < 2 || self.d_values.iter().any(|&d| d < 2) {
            return bad("qudit dimension must be at least 2".into());
        }
        let finite = [self.lambda_e, self.lambda_b, self.lambda_m, self.lambda_j, self.mu, self.x, self.omega_max];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("couplings must be finite".into());
        }
        for (name, v) in [("dt", self.dt), ("ramp_dt", self.ramp_dt), ("t_step", self.t_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be non-negative".into());
        }
        if self.order != 1 && self.order != 2 {
            return bad("order must be 1 or 2".into());
        }
        if self.n_sites < 2 || self.n_sites % 2 == 1 {
            return bad("n_sites must be even and at least 2".into());
        }
        if self.blocks == 0 {
            return bad("blocks must be positive".into());
        }
        for (name, v) in [("threshold", self.threshold), ("gate_fidelity", self.gate_fidelity), ("fidelity_floor", self.fidelity_floor)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1]"));
            }
        }
        if self.current_mu > 1 || self.current_nu > 1 {
            return bad("current components must be 0 or 1".into());
        }
        if !matches!(self.window.as_str(), "rectangular" | "hann" | "half-hann") {
            return bad(format!("unknown window {:?}", self.window));
        }
        if !matches!(self.model.as_str(), "ahm" | "chain") {
            return bad(format!("resource model must be ahm or chain, got {:?}", self.model));
        }
        if self.omega_count == 0 {
            return bad("omega_count must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_override() {
        for p in PRESETS {
            ExperimentConfig::from_preset(p).unwrap();
        }
        let c = ExperimentConfig::from_preset("fig5").unwrap();
        assert_eq!(c.experiment, Experiment::DScaling);
        assert_eq!(c.lambda_b, 2.0);
        assert_eq!(c.d_values, vec![3, 4, 5, 6]);
        assert_eq!(c.lambda_m, 0.5);
    }

    #[test]
    fn fig4_couplings_match_closed_forms() {
        let c = ExperimentConfig::from_preset("fig4").unwrap();
        assert_eq!(c.lambda_e, 4.0 * std::f64::consts::PI / 9.0);
        assert_eq!(c.lambda_j, 2.0 * std::f64::consts::PI / 9.0);
        assert_eq!(c.dt, 4.0 / 55.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("nonsense = 1", None).is_err());
        assert!(ExperimentConfig::parse("d = three", None).is_err());
        assert!(ExperimentConfig::parse("d", None).is_err());
        assert!(ExperimentConfig::parse("include = nowhere-to-be-found", None).is_err());
        assert!(ExperimentConfig::parse("include = fig4\norder = 3", None).is_err());
    }
}
