//! Gate counts, parallel depth and multiplicative fidelity projections.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::circuits::Circuit;
use crate::error::{invalid, Result};
use crate::gates::GateClass;

/// Per-class gate statistics of one circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub model: String,
    /// Gates per class.
    pub totals: BTreeMap<String, usize>,
    /// Per class: the largest number of that class's gates acting on any single subsystem.
    pub depth: BTreeMap<String, usize>,
    /// Per class: number of greedy parallel layers containing a gate of that class.
    pub layered: BTreeMap<String, usize>,
    /// Greedy parallel layers over all classes.
    pub total_layers: usize,
    /// Largest local dimension among the targeted subsystems, when known.
    pub qudit_dim: Option<usize>,
    /// `3d(d−1)/2` per general single-qudit gate.
    pub pulse_pairs: Option<u64>,
}

impl ResourceReport {
    pub fn total(&self, class: GateClass) -> usize {
        self.totals.get(class.name()).copied().unwrap_or(0)
    }

    pub fn depth_of(&self, class: GateClass) -> usize {
        self.depth.get(class.name()).copied().unwrap_or(0)
    }

    pub fn gate_count(&self) -> usize {
        self.totals.values().sum()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| crate::Error::Parse(e.to_string()))
    }
}

/// Counts gates, per-class depths and greedy layers.
pub fn count_gates(circuit: &Circuit) -> ResourceReport {
    let mut totals: BTreeMap<String, usize> = GateClass::ALL.iter().map(|c| (c.name().to_string(), 0)).collect();
    let mut per_sub: BTreeMap<(GateClass, usize), usize> = BTreeMap::new();
    for g in &circuit.gates {
        *totals.get_mut(g.class.name()).unwrap() += 1;
        for &t in &g.targets {
            *per_sub.entry((g.class, t)).or_default() += 1;
        }
    }
    let depth = GateClass::ALL
        .iter()
        .map(|c| {
            let d = per_sub.iter().filter(|((k, _), _)| k == c).map(|(_, &v)| v).max().unwrap_or(0);
            (c.name().to_string(), d)
        })
        .collect();
    let layers = circuit.layers();
    let layered = GateClass::ALL
        .iter()
        .map(|c| {
            let n = layers.iter().filter(|l| l.iter().any(|&i| circuit.gates[i].class == *c)).count();
            (c.name().to_string(), n)
        })
        .collect();
    let qudit_dim = circuit.meta.params.get("d").map(|&d| d as usize);
    let general = totals[GateClass::GeneralSingle.name()] as u64;
    ResourceReport {
        model: circuit.meta.model.clone(),
        totals,
        depth,
        layered,
        total_layers: layers.len(),
        qudit_dim,
        pulse_pairs: qudit_dim.map(|d| general * pulse_estimate(d)),
    }
}

/// Upper bound `3d(d−1)/2` on pulse pairs for one general single-qudit unitary.
pub fn pulse_estimate(d: usize) -> u64 {
    let d = d as u64;
    3 * d * d.saturating_sub(1) / 2
}

/// Per-class gate fidelities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassFidelities(pub BTreeMap<String, f64>);

impl ClassFidelities {
    pub fn uniform(f: f64) -> Self {
        ClassFidelities(GateClass::ALL.iter().map(|c| (c.name().to_string(), f)).collect())
    }

    fn get(&self, class: &str) -> Result<f64> {
        match self.0.get(class) {
            Some(&f) if f > 0.0 && f <= 1.0 => Ok(f),
            Some(f) => invalid(format!("fidelity for {class} must lie in (0, 1], got {f}")),
            None => invalid(format!("no fidelity given for gate class {class}")),
        }
    }
}

/// Product of class fidelities over every counted gate.
pub fn fidelity_estimate(report: &ResourceReport, fid: &ClassFidelities) -> Result<f64> {
    project(&report.totals, fid)
}

/// Product of class fidelities over per-class depth (one error event per layer).
pub fn depth_fidelity_estimate(report: &ResourceReport, fid: &ClassFidelities) -> Result<f64> {
    project(&report.depth, fid)
}

fn project(counts: &BTreeMap<String, usize>, fid: &ClassFidelities) -> Result<f64> {
    let mut f = 1.0;
    for (class, &n) in counts {
        if n > 0 {
            f *= fid.get(class)?.powi(n as i32);
        }
    }
    Ok(f)
}

/// Largest number of repetitions `k` with `per_step^k ≥ threshold` (capped at `cap`).
pub fn max_repetitions(per_step: f64, threshold: f64, cap: usize) -> usize {
    if per_step >= 1.0 {
        return cap;
    }
    if per_step <= 0.0 || per_step < threshold {
        return 0;
    }
    ((threshold.ln() / per_step.ln()).floor() as usize).min(cap)
}

/// Count-based and depth-based projections for repeated Trotter steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepProjection {
    pub step: ResourceReport,
    pub fidelities: ClassFidelities,
    pub per_step_count: f64,
    pub per_step_depth: f64,
    pub threshold: f64,
    pub max_steps_count: usize,
    pub max_steps_depth: usize,
}

pub fn project_steps(step: &Circuit, fidelities: ClassFidelities, threshold: f64) -> Result<StepProjection> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return invalid("fidelity threshold must lie in (0, 1]");
    }
    let report = count_gates(step);
    let per_step_count = fidelity_estimate(&report, &fidelities)?;
    let per_step_depth = depth_fidelity_estimate(&report, &fidelities)?;
    Ok(StepProjection {
        max_steps_count: max_repetitions(per_step_count, threshold, 1_000_000),
        max_steps_depth: max_repetitions(per_step_depth, threshold, 1_000_000),
        step: report,
        fidelities,
        per_step_count,
        per_step_depth,
        threshold,
    })
}

/// Subsystems touched by a circuit.
pub fn support(circuit: &Circuit) -> BTreeSet<usize> {
    circuit.gates.iter().flat_map(|g| g.targets.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_formula() {
        assert_eq!(pulse_estimate(1), 0);
        assert_eq!(pulse_estimate(2), 3);
        assert_eq!(pulse_estimate(8), 84);
    }

    #[test]
    fn empty_circuit_is_perfect() {
        let r = count_gates(&Circuit::new("none"));
        assert_eq!(r.gate_count(), 0);
        assert_eq!(fidelity_estimate(&r, &ClassFidelities::uniform(0.9)).unwrap(), 1.0);
    }

    #[test]
    fn repetitions() {
        assert_eq!(max_repetitions(0.99, 0.9, 1000), 10);
        assert_eq!(max_repetitions(1.0, 0.9, 7), 7);
        assert_eq!(max_repetitions(0.5, 0.9, 7), 0);
    }
}
