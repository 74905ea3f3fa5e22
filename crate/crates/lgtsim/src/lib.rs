//! Experiment runner behind the `lgtsim` binary.
//!
//! Every experiment writes its files into one output directory, always under
//! the same names and in the same row order, so a rerun of a config is
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use qudit_lgt::circuits::{ahm_trotter_step, chain_trotter_step, CouplingSet};
use qudit_lgt::config::{Experiment, ExperimentConfig};
use qudit_lgt::experiments::{ahm_quench_exact, ahm_quench_trotter, baryon_prep, baryon_target, EnergyTrace};
use qudit_lgt::formats::{fmt_f64, write_circuit, CsvTable};
use qudit_lgt::lattice::build_lattice;
use qudit_lgt::observables::{hadronic_correlator, hadronic_ft, CorrelatorBackend, CorrelatorRequest, CorrelatorTable, Window};
use qudit_lgt::oracle::ChainParams;
use qudit_lgt::resources::{project_steps, pulse_estimate, ClassFidelities};
use qudit_lgt::stateprep::{Propagation, VariationalPlan};
use qudit_lgt::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

/// Environment variable holding the worker thread count for parameter sweeps.
pub const THREADS_ENV: &str = "LGTSIM_THREADS";

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::InvalidParameter(_) | Error::UnsupportedFeature(_) => 2,
        Error::NumericFailure(_) => 3,
        Error::Io(_) => 1,
    }
}

/// Runs `cfg`, writing into `out`; returns the written paths in write order.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    check_model(cfg)?;
    let mut w = Writer { dir: out.to_path_buf(), written: Vec::new() };
    fs::create_dir_all(out)?;
    w.json("config.json", cfg)?;
    match cfg.experiment {
        Experiment::AhmQuench => ahm_quench(cfg, &mut w)?,
        Experiment::DScaling => d_scaling(cfg, &mut w)?,
        Experiment::BaryonPrep => baryon(cfg, &mut w)?,
        Experiment::HadronicTensor => hadronic(cfg, &mut w)?,
        Experiment::Resources => resources(cfg, &mut w)?,
    }
    Ok(w.written)
}

fn check_model(cfg: &ExperimentConfig) -> Result<()> {
    let want = match cfg.experiment {
        Experiment::AhmQuench | Experiment::DScaling => "zd",
        Experiment::BaryonPrep | Experiment::HadronicTensor => "q8",
        Experiment::Resources => if cfg.model == "ahm" { "zd" } else { "q8" },
    };
    if cfg.group != want {
        return Err(Error::InvalidParameter(format!("{:?} runs on group {want}, config has {}", cfg.experiment, cfg.group)));
    }
    Ok(())
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, body)?;
        self.written.push(p);
        Ok(())
    }

    fn csv(&mut self, name: &str, t: &CsvTable) -> Result<()> {
        self.text(name, &t.to_text())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }
}

fn finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NumericFailure(format!("{what} produced non-finite values")))
    }
}

fn couplings(cfg: &ExperimentConfig) -> CouplingSet {
    CouplingSet {
        lambda_e: cfg.lambda_e,
        lambda_b: cfg.lambda_b,
        lambda_m: cfg.lambda_m,
        lambda_j: cfg.lambda_j,
        mu: cfg.mu,
        x: cfg.x,
        dt: cfg.dt,
        order: cfg.order,
    }
}

fn check_trace(t: &EnergyTrace) -> Result<()> {
    finite(&format!("{} trace at d={}", t.backend, t.d), t.samples.iter().map(|s| s.total()))
}

fn traces(cfg: &ExperimentConfig, d: usize) -> Result<Vec<EnergyTrace>> {
    let c = couplings(cfg);
    let mut v = Vec::new();
    if cfg.backend.trotter() {
        v.push(ahm_quench_trotter(d, &c, cfg.steps)?);
    }
    if cfg.backend.exact() {
        v.push(ahm_quench_exact(d, &c, cfg.steps)?);
    }
    v.iter().try_for_each(check_trace)?;
    Ok(v)
}

fn trace_summary(ts: &[EnergyTrace]) -> Result<serde_json::Value> {
    let mut s = serde_json::Map::new();
    s.insert("d".into(), json!(ts[0].d));
    s.insert("initial_energy".into(), json!(ts[0].samples[0].total()));
    for t in ts {
        s.insert(format!("max_drift_{}", t.backend), json!(t.max_drift()));
    }
    if ts.len() == 2 {
        s.insert("max_gauge_matter_deviation".into(), json!(ts[0].max_deviation(&ts[1])?));
    }
    Ok(serde_json::Value::Object(s))
}

fn ahm_quench(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let ts = traces(cfg, cfg.d)?;
    for t in &ts {
        w.csv(&format!("energy_{}.csv", t.backend), &t.to_csv())?;
    }
    w.json("summary.json", &trace_summary(&ts)?)
}

fn d_scaling(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let per_d: Vec<Vec<EnergyTrace>> = cfg.d_values.par_iter().map(|&d| traces(cfg, d)).collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for ts in &per_d {
        for t in ts {
            w.csv(&format!("energy_d{}_{}.csv", t.d, t.backend), &t.to_csv())?;
        }
        summary.push(trace_summary(ts)?);
    }
    w.json("summary.json", &summary)
}

fn baryon(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let plan = VariationalPlan { blocks: cfg.blocks, max_iters: cfg.max_iters, restarts: cfg.restarts, seed: cfg.seed, ..VariationalPlan::default() };
    let r = baryon_prep(cfg.n_sites, cfg.mu, cfg.x, &plan, cfg.ramp_dt, cfg.threshold)?;
    finite("baryon preparation", [r.energy, r.variational.fidelity, r.ramp_fidelity_circuit])?;
    let mut ramp = CsvTable::new("adiabatic-ramp", &["step", "t", "fidelity"]);
    for (j, f) in r.ramp_fidelity.iter().enumerate() {
        ramp.push(vec![(j + 1).to_string(), fmt_f64((j + 1) as f64 * r.ramp_dt), fmt_f64(*f)]);
    }
    w.csv("ramp.csv", &ramp)?;
    let mut nested = CsvTable::new("variational-nested", &["blocks", "fidelity"]);
    for (b, f) in r.variational.nested.iter().enumerate() {
        nested.push(vec![(b + 1).to_string(), fmt_f64(*f)]);
    }
    w.csv("variational.csv", &nested)?;
    w.json("baryon_prep.json", &r)
}

fn sample_times(t_max: f64, t_step: f64) -> Vec<f64> {
    let n = (t_max / t_step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * t_step).collect()
}

fn omega_grid(max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    (0..count).map(|j| -max + 2.0 * max * j as f64 / (count - 1) as f64).collect()
}

fn window(name: &str) -> Window {
    match name {
        "hann" => Window::Hann,
        "half-hann" => Window::HalfHann,
        _ => Window::Rectangular,
    }
}

fn hadronic(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let n = cfg.n_sites;
    let chain = ChainParams { n_sites: n, mu: cfg.mu, x: cfg.x };
    let target = baryon_target(n, cfg.mu, cfg.x)?;
    let req = CorrelatorRequest { mu: cfg.current_mu, nu: cfg.current_nu, p: 0, xs: (0..n / 2).collect(), times: sample_times(cfg.t_max, cfg.t_step) };
    let mut backends = Vec::new();
    if cfg.backend.exact() {
        backends.push(("exact", CorrelatorBackend::Exact));
    }
    if cfg.backend.trotter() {
        backends.push(("trotter", CorrelatorBackend::Trotter { dt: cfg.dt, order: cfg.order, propagation: Propagation::Subspace }));
    }
    let tables: Vec<CorrelatorTable> = backends.par_iter().map(|(_, b)| hadronic_correlator(&target.ground, chain, *b, &req)).collect::<Result<_>>()?;
    let ks: Vec<i64> = (0..(n / 2) as i64).collect();
    let omegas = omega_grid(cfg.omega_max, cfg.omega_count);
    let mut summary = serde_json::Map::new();
    summary.insert("baryon_energy".into(), json!(target.energy));
    for ((name, _), t) in backends.iter().zip(&tables) {
        finite(&format!("{name} correlator"), t.w.iter().flatten().copied())?;
        w.csv(&format!("correlator_{name}.csv"), &t.to_csv())?;
        let spec = hadronic_ft(t, &ks, &omegas, window(&cfg.window))?;
        w.csv(&format!("spectrum_{name}.csv"), &spec.to_csv())?;
        let sums = t.x_sum();
        let drift = sums.iter().map(|s| (s - sums[0]).abs()).fold(0.0, f64::max);
        summary.insert(format!("sum_rule_drift_{name}"), json!(drift));
    }
    if tables.len() == 2 {
        let dev = tables[0].w.iter().flatten().zip(tables[1].w.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        summary.insert("max_trotter_deviation".into(), json!(dev));
    }
    w.json("summary.json", &serde_json::Value::Object(summary))
}

fn resources(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let step = if cfg.model == "ahm" {
        let lat = build_lattice(2, &[2, 2], true)?;
        ahm_trotter_step(&lat, cfg.d, &couplings(cfg))?
    } else {
        chain_trotter_step(cfg.n_sites, cfg.mu, cfg.x, cfg.dt, cfg.order)?
    };
    let proj = project_steps(&step, ClassFidelities::uniform(cfg.gate_fidelity), cfg.fidelity_floor)?;
    w.text("step.circuit", &write_circuit(&step)?)?;
    let mut counts = CsvTable::new("gate-counts", &["class", "gates", "depth", "layers"]);
    for (class, n) in &proj.step.totals {
        counts.push(vec![class.clone(), n.to_string(), proj.step.depth[class].to_string(), proj.step.layered[class].to_string()]);
    }
    w.csv("gate_counts.csv", &counts)?;
    w.json("resources.json", &json!({ "projection": proj, "pulse_estimate": pulse_estimate(cfg.d) }))
}
