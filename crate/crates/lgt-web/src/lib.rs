//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string; the page does
//! the plotting. The `*_json` functions hold the logic and are what the
//! native tests exercise.

use qudit_lgt::circuits::{ahm_trotter_step, chain_trotter_step};
use qudit_lgt::experiments::{ahm_quench_exact, ahm_quench_trotter, baryon_target, fig4_couplings, EnergyTrace, CHAIN_MU, CHAIN_X};
use qudit_lgt::lattice::build_lattice;
use qudit_lgt::observables::fidelity;
use qudit_lgt::resources::{count_gates, pulse_estimate, ResourceReport};
use qudit_lgt::stateprep::{adiabatic_prepare, Propagation, RampSchedule};
use qudit_lgt::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_D: usize = 4;
const MAX_STEPS: usize = 400;

fn series(t: &EnergyTrace) -> Value {
    json!({
        "gauge": t.samples.iter().map(|s| s.gauge()).collect::<Vec<_>>(),
        "matter": t.samples.iter().map(|s| s.matter()).collect::<Vec<_>>(),
        "total": t.samples.iter().map(|s| s.total()).collect::<Vec<_>>(),
    })
}

/// Flux-string quench on the 2×2 torus with the standard couplings and magnetic coupling `lambda_b`.
pub fn quench_json(d: usize, lambda_b: f64, steps: usize) -> Result<Value> {
    if !(2..=MAX_D).contains(&d) || steps == 0 || steps > MAX_STEPS || !lambda_b.is_finite() {
        return Err(Error::InvalidParameter(format!("need 2 <= d <= {MAX_D}, 1 <= steps <= {MAX_STEPS}, finite lambda_b")));
    }
    let c = qudit_lgt::circuits::CouplingSet { lambda_b, ..fig4_couplings() };
    let trotter = ahm_quench_trotter(d, &c, steps)?;
    let exact = ahm_quench_exact(d, &c, steps)?;
    Ok(json!({
        "t": trotter.samples.iter().map(|s| s.t).collect::<Vec<_>>(),
        "trotter": series(&trotter),
        "exact": series(&exact),
        "max_deviation": trotter.max_deviation(&exact)?,
    }))
}

fn counts(r: &ResourceReport) -> Value {
    json!({ "totals": r.totals, "depth": r.depth, "layers": r.total_layers })
}

/// Gate census of one second-order plaquette step at `d` and one first-order step of an `n`-site chain.
pub fn resources_json(d: usize, n: usize) -> Result<Value> {
    if !(2..=8).contains(&d) {
        return Err(Error::InvalidParameter("need 2 <= d <= 8".into()));
    }
    let lat = build_lattice(2, &[2, 2], true)?;
    let ahm = ahm_trotter_step(&lat, d, &fig4_couplings())?;
    let chain = chain_trotter_step(n, CHAIN_MU, CHAIN_X, 0.1, 1)?;
    Ok(json!({
        "ahm": counts(&count_gates(&ahm)),
        "chain": counts(&count_gates(&chain)),
        "pulse_estimate": pulse_estimate(d),
    }))
}

/// Linear ramp of `x` from 0 into the baryon ground state of an `n`-site chain.
pub fn ramp_json(n: usize, steps: usize, dt: f64) -> Result<Value> {
    if !(n == 2 || n == 4) || steps == 0 || steps > MAX_STEPS || !(dt > 0.0 && dt <= 1.0) {
        return Err(Error::InvalidParameter(format!("need n in {{2, 4}}, 1 <= steps <= {MAX_STEPS}, 0 < dt <= 1")));
    }
    let target = baryon_target(n, CHAIN_MU, CHAIN_X)?;
    let ramp = RampSchedule::linear(CHAIN_MU, 0.0, CHAIN_X, steps, dt);
    let run = adiabatic_prepare(&target.reference, n, &ramp, Some(&target.ground), Propagation::Subspace)?;
    Ok(json!({
        "t": (1..=steps).map(|j| j as f64 * dt).collect::<Vec<_>>(),
        "fidelity": run.fidelity,
        "reference_fidelity": fidelity(&target.reference, &target.ground)?,
        "energy": target.energy,
    }))
}

fn export(v: Result<Value>) -> std::result::Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn quench(d: usize, lambda_b: f64, steps: usize) -> std::result::Result<String, JsValue> {
    export(quench_json(d, lambda_b, steps))
}

#[wasm_bindgen]
pub fn resources(d: usize, n: usize) -> std::result::Result<String, JsValue> {
    export(resources_json(d, n))
}

#[wasm_bindgen]
pub fn ramp(n: usize, steps: usize, dt: f64) -> std::result::Result<String, JsValue> {
    export(ramp_json(n, steps, dt))
}
