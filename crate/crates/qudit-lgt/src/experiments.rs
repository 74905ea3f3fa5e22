//! End-to-end drivers shared by the command line, the browser demo and the acceptance suite.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuits::{ahm_trotter_step, chain_trotter_step, evolve, CouplingSet};
use crate::error::{invalid, Result};
use crate::formats::{fmt_f64, CsvTable};
use crate::lattice::{build_lattice, LatticeSpec};
use crate::observables::local_energies;
use crate::oracle::{build_ahm, build_chain, chain_from_sector, chain_to_sector, evolve_samples, ground_state, ChainParams, KrylovOptions};
use crate::register::StateVector;
use crate::stateprep::{adiabatic_search, baryon_reference_state, flux_string_state, variational_prepare, RampSchedule, VariationalPlan, VariationalResult};

/// Couplings of the flux-string quench on the periodic plaquette.
pub fn fig4_couplings() -> CouplingSet {
    CouplingSet {
        lambda_e: 4.0 * PI / 9.0,
        lambda_b: 0.5,
        lambda_m: 0.5,
        lambda_j: 2.0 * PI / 9.0,
        mu: 0.0,
        x: 0.0,
        dt: 4.0 / 55.0,
        order: 2,
    }
}

/// Same quench with the stronger magnetic coupling used for the `d` scan.
pub fn fig5_couplings() -> CouplingSet {
    CouplingSet { lambda_b: 2.0, ..fig4_couplings() }
}

/// Chain couplings used for baryon preparation and the hadronic tensor.
pub const CHAIN_MU: f64 = 1.0;
pub const CHAIN_X: f64 = 0.5;

/// One sample of a quench energy trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub electric: f64,
    pub magnetic: f64,
    pub mass: f64,
    pub hopping: f64,
}

impl EnergySample {
    /// Electric plus magnetic.
    pub fn gauge(&self) -> f64 {
        self.electric + self.magnetic
    }

    /// Dual matter terms.
    pub fn matter(&self) -> f64 {
        self.mass + self.hopping
    }

    pub fn total(&self) -> f64 {
        self.gauge() + self.matter()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub backend: String,
    pub d: usize,
    pub samples: Vec<EnergySample>,
}

impl EnergyTrace {
    pub fn max_drift(&self) -> f64 {
        let e0 = self.samples[0].total();
        self.samples.iter().map(|s| (s.total() - e0).abs()).fold(0.0, f64::max)
    }

    /// Largest gauge or matter deviation at the common sample times.
    pub fn max_deviation(&self, other: &EnergyTrace) -> Result<f64> {
        if self.samples.len() != other.samples.len() {
            return invalid("traces have different sample counts");
        }
        let mut m: f64 = 0.0;
        for (a, b) in self.samples.iter().zip(&other.samples) {
            if (a.t - b.t).abs() > 1e-9 {
                return invalid("traces are sampled at different times");
            }
            m = m.max((a.gauge() - b.gauge()).abs()).max((a.matter() - b.matter()).abs());
        }
        Ok(m)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new("energy-trace", &["backend", "d", "t", "electric", "magnetic", "mass", "hopping", "gauge", "matter", "total"]);
        for s in &self.samples {
            t.push(vec![
                self.backend.clone(),
                self.d.to_string(),
                fmt_f64(s.t),
                fmt_f64(s.electric),
                fmt_f64(s.magnetic),
                fmt_f64(s.mass),
                fmt_f64(s.hopping),
                fmt_f64(s.gauge()),
                fmt_f64(s.matter()),
                fmt_f64(s.total()),
            ]);
        }
        t
    }
}

/// The 2×2 torus and the two-link winding flux string along the first axis.
pub fn quench_setup(d: usize) -> Result<(LatticeSpec, StateVector)> {
    let lat = build_lattice(2, &[2, 2], true)?;
    let links: Vec<usize> = (0..lat.num_links())
        .filter(|&l| lat.links[l].dir == 0 && lat.site_coords(lat.links[l].site)[1] == 0)
        .collect();
    let psi = flux_string_state(&lat, d, &links)?;
    Ok((lat, psi))
}

fn sample(t: f64, psi: &[num_complex::Complex64], h: &crate::oracle::Hamiltonian) -> Result<EnergySample> {
    let e = local_energies(psi, h)?;
    Ok(EnergySample { t, electric: e.by_prefix("E["), magnetic: e.by_prefix("B["), mass: e.by_prefix("M["), hopping: e.by_prefix("J[") })
}

/// Trotterized quench from the flux string, sampled after every step.
pub fn ahm_quench_trotter(d: usize, c: &CouplingSet, steps: usize) -> Result<EnergyTrace> {
    let (lat, psi) = quench_setup(d)?;
    let h = build_ahm(&lat, d, c.ahm())?;
    let step = ahm_trotter_step(&lat, d, c)?;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut err = None;
    let mut state = psi;
    evolve(&mut state, &step, steps, |k, s| match sample(k as f64 * c.dt, &s.amps, &h) {
        Ok(x) => samples.push(x),
        Err(e) => err = Some(e),
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(EnergyTrace { backend: "trotter".into(), d, samples })
}

/// Exact quench sampled at `k·dt`, `k = 0..=steps`.
pub fn ahm_quench_exact(d: usize, c: &CouplingSet, steps: usize) -> Result<EnergyTrace> {
    let (lat, psi) = quench_setup(d)?;
    let h = build_ahm(&lat, d, c.ahm())?;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * c.dt).collect();
    let mut samples = Vec::with_capacity(steps + 1);
    let mut err = None;
    evolve_samples(&h, &psi.amps, &times, KrylovOptions::default(), |t, v| match sample(t, v, &h) {
        Ok(x) => samples.push(x),
        Err(e) => err = Some(e),
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(EnergyTrace { backend: "exact".into(), d, samples })
}

/// Chain baryon problem: reference state, exact ground state and its energy.
pub struct BaryonTarget {
    pub n: usize,
    pub mu: f64,
    pub x: f64,
    pub reference: StateVector,
    pub ground: StateVector,
    pub energy: f64,
}

pub fn baryon_target(n: usize, mu: f64, x: f64) -> Result<BaryonTarget> {
    let reference = baryon_reference_state(n, 0)?;
    let (h, sector) = build_chain(ChainParams { n_sites: n, mu, x })?;
    let start = chain_to_sector(&reference, &sector)?;
    let (energy, g) = ground_state(&h, &start, 1e-10)?;
    let ground = chain_from_sector(&g, &sector)?;
    Ok(BaryonTarget { n, mu, x, reference, ground, energy })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaryonPrep {
    pub n: usize,
    pub mu: f64,
    pub x: f64,
    pub energy: f64,
    pub reference_fidelity: f64,
    pub variational: VariationalResult,
    pub ramp_steps: usize,
    pub ramp_dt: f64,
    /// Fidelity after each ramp step.
    pub ramp_fidelity: Vec<f64>,
    /// Final ramp state re-run with gate circuits.
    pub ramp_fidelity_circuit: f64,
}

/// Variational and adiabatic preparation of the zero-momentum baryon.
pub fn baryon_prep(n: usize, mu: f64, x: f64, plan: &VariationalPlan, ramp_dt: f64, threshold: f64) -> Result<BaryonPrep> {
    let t = baryon_target(n, mu, x)?;
    let reference_fidelity = crate::observables::fidelity(&t.reference, &t.ground)?;
    let variational = variational_prepare(&t.reference, n, mu, x, plan, &t.ground)?;
    let ramp = RampSchedule::linear(mu, 0.0, x, 4, ramp_dt);
    let (run, steps) = adiabatic_search(&t.reference, n, &ramp, &t.ground, threshold, 12)?;
    let ramp = ramp.with_steps(steps);
    let mut s = t.reference.clone();
    for j in 0..steps {
        let (m, xx) = ramp.step_couplings(j);
        crate::circuits::run_circuit(&mut s, &chain_trotter_step(n, m, xx, ramp_dt, 2)?)?;
    }
    let ramp_fidelity_circuit = crate::observables::fidelity(&s, &t.ground)?;
    Ok(BaryonPrep {
        n,
        mu,
        x,
        energy: t.energy,
        reference_fidelity,
        variational,
        ramp_steps: steps,
        ramp_dt,
        ramp_fidelity: run.fidelity,
        ramp_fidelity_circuit,
    })
}
