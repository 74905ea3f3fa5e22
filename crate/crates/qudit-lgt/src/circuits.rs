//! Trotter circuits for pure-gauge, Higgs, dual Abelian-Higgs and fermion chain models.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gates::{
    fourier_gate, mass_phase_gate, theta_gate, tunneling_gate, v_gate, GateOp, ThetaVariant,
};
use crate::groups::{
    casimir_unitary, electric_unitary, group_fourier, magnetic_phase, quaternion_group, ElectricMode, GroupKind, GroupTable,
};
use crate::lattice::LatticeSpec;
use crate::linalg::{axpy, CMat};
use crate::oracle::{chain_bond_sign, zd_prefactor, AhmCouplings, LinearOperator};
use crate::register::{apply_kernel, Kernel, RegisterLayout, StateVector};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitMeta {
    pub model: String,
    pub dt: f64,
    pub order: u8,
    pub params: BTreeMap<String, f64>,
}

/// Ordered gate list; the first gate is applied first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub meta: CircuitMeta,
    pub gates: Vec<GateOp>,
}

impl Circuit {
    pub fn new(model: &str) -> Self {
        Circuit { meta: CircuitMeta { model: model.into(), ..Default::default() }, gates: Vec::new() }
    }

    pub fn push(&mut self, g: GateOp) {
        self.gates.push(g);
    }

    pub fn append(&mut self, other: &Circuit) {
        self.gates.extend(other.gates.iter().cloned());
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn relabel(mut self, label: &str) -> Self {
        for g in &mut self.gates {
            g.label = label.to_string();
        }
        self
    }

    /// Reversed circuit of gate adjoints.
    pub fn adjoint(&self) -> Circuit {
        Circuit { meta: self.meta.clone(), gates: self.gates.iter().rev().map(GateOp::adjoint).collect() }
    }

    /// Maximal runs of consecutive gates sharing a label.
    pub fn segments(&self) -> Vec<(String, Circuit)> {
        let mut out: Vec<(String, Circuit)> = Vec::new();
        for g in &self.gates {
            match out.last_mut() {
                Some((l, c)) if *l == g.label => c.push(g.clone()),
                _ => {
                    let mut c = Circuit::new(&self.meta.model);
                    c.push(g.clone());
                    out.push((g.label.clone(), c));
                }
            }
        }
        out
    }

    /// Greedy left-to-right packing: each gate goes one layer after the
    /// latest layer touching any of its subsystems.
    pub fn layers(&self) -> Vec<Vec<usize>> {
        let mut frontier: BTreeMap<usize, usize> = BTreeMap::new();
        let mut layers: Vec<Vec<usize>> = Vec::new();
        for (i, g) in self.gates.iter().enumerate() {
            let l = g.targets.iter().map(|t| frontier.get(t).map_or(0, |&x| x + 1)).max().unwrap_or(0);
            if layers.len() <= l {
                layers.resize(l + 1, Vec::new());
            }
            layers[l].push(i);
            for &t in &g.targets {
                frontier.insert(t, l);
            }
        }
        layers
    }

    pub fn compile(&self, layout: Arc<RegisterLayout>) -> Result<CompiledCircuit> {
        let kernels = self.gates.iter().map(|g| g.kernel(&layout)).collect::<Result<Vec<_>>>()?;
        Ok(CompiledCircuit { layout, kernels })
    }
}

/// Circuit lowered to kernels for one layout.
#[derive(Clone, Debug)]
pub struct CompiledCircuit {
    layout: Arc<RegisterLayout>,
    kernels: Vec<Kernel>,
}

impl CompiledCircuit {
    pub fn layout(&self) -> Arc<RegisterLayout> {
        self.layout.clone()
    }

    pub fn run(&self, state: &mut StateVector) -> Result<()> {
        if state.layout() != &*self.layout {
            return invalid("circuit was compiled for a different register");
        }
        for k in &self.kernels {
            apply_kernel(state, k)?;
        }
        Ok(())
    }
}

pub fn run_circuit(state: &mut StateVector, circuit: &Circuit) -> Result<()> {
    circuit.compile(state.layout_arc())?.run(state)
}

/// Applies `step` `n_steps` times, calling `observe(k, ψ)` after step k (k = 0 is the input).
pub fn evolve(
    state: &mut StateVector,
    step: &Circuit,
    n_steps: usize,
    mut observe: impl FnMut(usize, &StateVector),
) -> Result<()> {
    let c = step.compile(state.layout_arc())?;
    observe(0, state);
    for k in 1..=n_steps {
        c.run(state)?;
        observe(k, state);
    }
    Ok(())
}

/// A circuit viewed as a linear map, with its formal adjoint.
pub struct CircuitOperator {
    forward: CompiledCircuit,
    backward: CompiledCircuit,
}

impl CircuitOperator {
    pub fn new(circuit: &Circuit, layout: Arc<RegisterLayout>) -> Result<Self> {
        Ok(CircuitOperator { forward: circuit.compile(layout.clone())?, backward: circuit.adjoint().compile(layout)? })
    }

    fn run(c: &CompiledCircuit, x: &[C64], y: &mut [C64]) {
        let mut s = StateVector::from_amplitudes(c.layout(), x.to_vec()).expect("dimension matches layout");
        c.run(&mut s).expect("kernels validated at compile time");
        axpy(C64::new(1.0, 0.0), &s.amps, y);
    }
}

impl LinearOperator for CircuitOperator {
    fn dim(&self) -> usize {
        self.forward.layout.dim()
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        Self::run(&self.forward, x, y)
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        Self::run(&self.backward, x, y)
    }
}

/// Physical couplings and step data for circuit builders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub lambda_e: f64,
    pub lambda_b: f64,
    pub lambda_m: f64,
    pub lambda_j: f64,
    pub mu: f64,
    pub x: f64,
    pub dt: f64,
    pub order: u8,
}

impl CouplingSet {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid("dt must be positive");
        }
        if self.order != 1 && self.order != 2 {
            return invalid("Trotter order must be 1 or 2");
        }
        Ok(())
    }

    pub fn ahm(&self) -> AhmCouplings {
        AhmCouplings { lambda_e: self.lambda_e, lambda_b: self.lambda_b, lambda_m: self.lambda_m, lambda_j: self.lambda_j }
    }
}

/// Four-qudit diagonal gate via group multiplication into one target qudit.
///
/// `links`/`dagger` describe the ordered product `∏ g_i^{±1}`; `target` is an
/// index into `links`. The target holds a cyclic rotation of the product (or
/// of its inverse), so `phases` must be a function of the real character.
pub fn four_body_circuit(
    group: GroupKind,
    links: &[usize],
    dagger: &[bool],
    target: usize,
    phases: &[C64],
    label: &str,
) -> Result<Circuit> {
    let n = links.len();
    if dagger.len() != n || target >= n {
        return invalid("four-body circuit: inconsistent link data");
    }
    let mut sorted = links.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != n {
        return invalid("four-body circuit: repeated link");
    }
    let mut cyc: Vec<(usize, bool)> = links.iter().copied().zip(dagger.iter().copied()).collect();
    let mut t = target;
    if cyc[t].1 {
        cyc.reverse();
        cyc.iter_mut().for_each(|c| c.1 = !c.1);
        t = n - 1 - t;
    }
    cyc.rotate_left(t);
    let tq = cyc[0].0;
    let mut c = Circuit::new("four-body");
    let variant = |dag: bool| if dag { ThetaVariant::RInv } else { ThetaVariant::R };
    for &(l, dag) in &cyc[1..] {
        c.push(theta_gate(group, l, tq, variant(dag))?);
    }
    c.push(GateOp::single_diagonal(tq, phases));
    for &(l, dag) in cyc[1..].iter().rev() {
        c.push(theta_gate(group, l, tq, variant(dag).inverse())?);
    }
    Ok(c.relabel(label))
}

/// Magnetic plaquette gate `exp(−iδt λ_B (χ(g1 g2 g3⁻¹ g4⁻¹) + c.c.))` on `links` (bottom, right, top, left).
pub fn plaquette_circuit(group: GroupKind, links: [usize; 4], lambda_b: f64, dt: f64) -> Result<Circuit> {
    plaquette_circuit_at(group, links, 0, lambda_b, dt, "B")
}

pub fn plaquette_circuit_at(group: GroupKind, links: [usize; 4], target: usize, lambda_b: f64, dt: f64, label: &str) -> Result<Circuit> {
    let g = GroupTable::new(group)?;
    let phases: Vec<C64> = (0..g.order()).map(|el| magnetic_phase(&g, el, lambda_b, dt)).collect();
    four_body_circuit(group, &links, &[false, false, true, true], target, &phases, label)
}

/// Star gate `exp(−iδt λ_J d²/(2π²)(2 − S − S†))` acting on Fourier-basis labels.
pub fn star_circuit(d: usize, links: &[usize], outgoing: &[bool], target: usize, lambda_j: f64, dt: f64, label: &str) -> Result<Circuit> {
    let c = lambda_j * zd_prefactor(d);
    let phases: Vec<C64> = (0..d)
        .map(|n| C64::from_polar(1.0, -dt * c * (2.0 - 2.0 * (2.0 * std::f64::consts::PI * n as f64 / d as f64).cos())))
        .collect();
    let dagger: Vec<bool> = outgoing.iter().map(|o| !o).collect();
    four_body_circuit(GroupKind::Cyclic(d), links, &dagger, target, &phases, label)
}

/// Matter-gauge coupling `exp(−iδt λ_J (χ(g_x⁻¹ g_ℓ g_x') + c.c.))` with four `Θ` and one phase gate.
pub fn higgs_coupling_circuit(group: GroupKind, x: usize, link: usize, xp: usize, lambda_j: f64, dt: f64) -> Result<Circuit> {
    if x == link || x == xp || link == xp {
        return invalid("Higgs coupling needs three distinct qudits");
    }
    let g = GroupTable::new(group)?;
    // x ends up holding (g_x⁻¹ g_ℓ g_x')⁻¹, whose real character is the same
    let phases: Vec<C64> = (0..g.order()).map(|el| magnetic_phase(&g, el, lambda_j, dt)).collect();
    let mut c = Circuit::new("higgs");
    c.push(theta_gate(group, xp, link, ThetaVariant::R)?);
    c.push(theta_gate(group, link, x, ThetaVariant::LInv)?);
    c.push(GateOp::single_diagonal(x, &phases));
    c.push(theta_gate(group, link, x, ThetaVariant::L)?);
    c.push(theta_gate(group, xp, link, ThetaVariant::RInv)?);
    Ok(c.relabel("J"))
}

/// `exp(−iδt λ_E d²/(2π²)(2 − P − P†))` in the group basis of `Z_d`.
pub fn zd_electric_matrix(d: usize, lambda: f64, dt: f64) -> Result<CMat> {
    let f = group_fourier(&GroupTable::new(GroupKind::Cyclic(d))?)?.fourier;
    let c = lambda * zd_prefactor(d);
    let ph: Vec<C64> = (0..d)
        .map(|n| C64::from_polar(1.0, -dt * c * (2.0 - 2.0 * (2.0 * std::f64::consts::PI * n as f64 / d as f64).cos())))
        .collect();
    Ok(f.adjoint().matmul(&CMat::diag(&ph)).matmul(&f))
}

/// `exp(−iδt λ (Q + Q†))` written in the Fourier (n) basis.
pub fn zd_mass_matrix_fourier(d: usize, lambda: f64, dt: f64) -> Result<CMat> {
    let g = GroupTable::new(GroupKind::Cyclic(d))?;
    let f = group_fourier(&g)?.fourier;
    let ph: Vec<C64> = (0..d).map(|k| magnetic_phase(&g, k, lambda, dt)).collect();
    Ok(f.matmul(&CMat::diag(&ph)).matmul(&f.adjoint()))
}

fn require_torus(lattice: &LatticeSpec) -> Result<()> {
    if lattice.dim != 2 || !lattice.periodic {
        return invalid("model needs a periodic 2D lattice");
    }
    Ok(())
}

/// Target link position for each plaquette (bottom) and star (vertical out-link).
///
/// On a torus every link is then the target of exactly one four-body gate.
const PLAQUETTE_TARGET: usize = 0;
const STAR_TARGET: usize = 1;

/// One Trotter step of the dual Abelian-Higgs model on the group-basis link register.
///
/// Order 2: `E/2 · B · FT · M/2 · J · M/2 · FT† · E/2`; order 1: `E · B · FT · M · J · FT†`.
/// `B` commutes with `M` and `J`, so the order-2 product is time symmetric.
pub fn ahm_trotter_step(lattice: &LatticeSpec, d: usize, c: &CouplingSet) -> Result<Circuit> {
    require_torus(lattice)?;
    c.validate()?;
    if d < 2 {
        return invalid("AHM needs d >= 2");
    }
    let nl = lattice.num_links();
    let half = if c.order == 2 { 0.5 } else { 1.0 };
    let group = GroupKind::Cyclic(d);
    let mut circ = Circuit::new("ahm");
    let e = zd_electric_matrix(d, c.lambda_e, c.dt * half)?;
    let m = zd_mass_matrix_fourier(d, c.lambda_m, c.dt * half)?;
    let electric = |circ: &mut Circuit| {
        for l in 0..nl {
            circ.push(GateOp::single_general(l, &e).with_label(format!("E[l{l}]")));
        }
    };
    let mass = |circ: &mut Circuit| {
        for l in 0..nl {
            circ.push(GateOp::single_general(l, &m).with_label(format!("M[l{l}]")));
        }
    };
    electric(&mut circ);
    for (p, plaq) in lattice.plaquettes.iter().enumerate() {
        circ.append(&plaquette_circuit_at(group, plaq.links, PLAQUETTE_TARGET, c.lambda_b, c.dt, &format!("B[p{p}]"))?);
    }
    for l in 0..nl {
        circ.push(fourier_gate(group, l, false)?.with_label("FT"));
    }
    mass(&mut circ);
    for (s, star) in lattice.stars.iter().enumerate() {
        circ.append(&star_circuit(d, &star.links, &star.outgoing, STAR_TARGET, c.lambda_j, c.dt, &format!("J[s{s}]"))?);
    }
    if c.order == 2 {
        mass(&mut circ);
    }
    for l in 0..nl {
        circ.push(fourier_gate(group, l, true)?.with_label("FTdag"));
    }
    if c.order == 2 {
        electric(&mut circ);
    }
    circ.meta = CircuitMeta {
        model: "ahm".into(),
        dt: c.dt,
        order: c.order,
        params: [("d", d as f64), ("lambda_e", c.lambda_e), ("lambda_b", c.lambda_b), ("lambda_m", c.lambda_m), ("lambda_j", c.lambda_j)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    };
    Ok(circ)
}

/// First-order step of the pure gauge theory: electric gates then plaquettes.
pub fn gauge_trotter_step(lattice: &LatticeSpec, group: GroupKind, lambda_e: f64, lambda_b: f64, dt: f64, mode: ElectricMode) -> Result<Circuit> {
    let g = GroupTable::new(group)?;
    let basis = group_fourier(&g)?;
    let u = electric_unitary(&g, &basis, lambda_e, dt, mode)?;
    let mut circ = Circuit::new("gauge");
    for l in 0..lattice.num_links() {
        circ.push(GateOp::single_general(l, &u).with_label(format!("E[l{l}]")));
    }
    for (p, plaq) in lattice.plaquettes.iter().enumerate() {
        circ.append(&plaquette_circuit_at(group, plaq.links, 0, lambda_b, dt, &format!("B[p{p}]"))?);
    }
    Ok(circ)
}

/// First-order step of gauge fields coupled to site qudits (links first, then sites).
pub fn higgs_trotter_step(lattice: &LatticeSpec, group: GroupKind, c: &CouplingSet) -> Result<Circuit> {
    let g = GroupTable::new(group)?;
    let basis = group_fourier(&g)?;
    let nl = lattice.num_links();
    let mut circ = gauge_trotter_step(lattice, group, c.lambda_e, c.lambda_b, c.dt, ElectricMode::TransferMatrix)?;
    let um = electric_unitary(&g, &basis, c.lambda_m, c.dt, ElectricMode::TransferMatrix)?;
    for s in 0..lattice.num_sites() {
        circ.push(GateOp::single_general(nl + s, &um).with_label(format!("M[x{s}]")));
    }
    for (l, link) in lattice.links.iter().enumerate() {
        let h = higgs_coupling_circuit(group, nl + link.site, l, nl + link.head, c.lambda_j, c.dt)?;
        circ.append(&h.relabel(&format!("J[l{l}]")));
    }
    circ.meta.model = "higgs".into();
    Ok(circ)
}

/// Mode subsystem of chain site `n`, component `alpha` in the full chain register.
pub fn chain_mode(n_sites: usize, site: usize, alpha: usize) -> usize {
    n_sites + 2 * site + alpha
}

fn check_chain(n: usize) -> Result<()> {
    if n < 2 || n % 2 == 1 {
        return invalid(format!("chain needs an even number of sites >= 2, got {n}"));
    }
    Ok(())
}

/// `exp(−iθ H₀)`: Casimir electric gates on links and staggered mass phases.
pub fn chain_h0_layer(n: usize, mu: f64, theta: f64) -> Result<Circuit> {
    check_chain(n)?;
    let basis = group_fourier(&quaternion_group())?;
    let e = casimir_unitary(&basis, 1.0, theta);
    let mut c = Circuit::new("chain");
    for l in 0..n {
        c.push(GateOp::single_general(l, &e).with_label(format!("E2[l{l}]")));
    }
    for site in 0..n {
        let parity = if site % 2 == 0 { 1.0 } else { -1.0 };
        let modes = [chain_mode(n, site, 0), chain_mode(n, site, 1)];
        c.push(mass_phase_gate(&modes, mu, theta, parity)?.with_label(format!("mass[n{site}]")));
    }
    Ok(c)
}

/// Interaction factor of bond `b`: `V_{b|ℓ_b} U^(t) V†_{b|ℓ_b}` (V† applied first).
pub fn chain_bond(n: usize, bond: usize, x: f64, theta: f64) -> Result<Circuit> {
    check_chain(n)?;
    let next = (bond + 1) % n;
    let here = [chain_mode(n, bond, 0), chain_mode(n, bond, 1)];
    let there = [chain_mode(n, next, 0), chain_mode(n, next, 1)];
    let label = format!("hop[b{bond}]");
    let mut c = Circuit::new("chain");
    c.push(v_gate(GroupKind::Quaternion, bond, &here, true)?.with_label(&label));
    c.push(tunneling_gate(&here, &there, theta, chain_bond_sign(n, bond), x, true)?.with_label(&label));
    c.push(v_gate(GroupKind::Quaternion, bond, &here, false)?.with_label(&label));
    Ok(c)
}

/// All bonds of one parity (0 = even, 1 = odd), each for time `theta`.
pub fn chain_hx_layer(n: usize, x: f64, theta: f64, parity: usize) -> Result<Circuit> {
    let mut c = Circuit::new("chain");
    for b in (parity..n).step_by(2) {
        c.append(&chain_bond(n, b, x, theta)?);
    }
    Ok(c)
}

/// `e^{−iθ₀H₀/2} e^{−iθₓHₓ} e^{−iθ₀H₀/2}` with `Hₓ` split symmetrically into even and odd bonds.
pub fn chain_block(n: usize, mu: f64, x: f64, theta0: f64, thetax: f64) -> Result<Circuit> {
    let mut c = chain_h0_layer(n, mu, theta0 / 2.0)?;
    c.append(&chain_hx_layer(n, x, thetax / 2.0, 0)?);
    c.append(&chain_hx_layer(n, x, thetax, 1)?);
    c.append(&chain_hx_layer(n, x, thetax / 2.0, 0)?);
    c.append(&chain_h0_layer(n, mu, theta0 / 2.0)?);
    Ok(c)
}

/// One Trotter step of the `Q8` chain on the full register (`N` links, then `2N` modes).
pub fn chain_trotter_step(n: usize, mu: f64, x: f64, dt: f64, order: u8) -> Result<Circuit> {
    check_chain(n)?;
    if !(dt > 0.0) {
        return invalid("dt must be positive");
    }
    let mut c = match order {
        1 => {
            let mut c = chain_h0_layer(n, mu, dt)?;
            c.append(&chain_hx_layer(n, x, dt, 0)?);
            c.append(&chain_hx_layer(n, x, dt, 1)?);
            c
        }
        2 => chain_block(n, mu, x, dt, dt)?,
        _ => return invalid("Trotter order must be 1 or 2"),
    };
    c.meta = CircuitMeta {
        model: "chain".into(),
        dt,
        order,
        params: [("n", n as f64), ("mu", mu), ("x", x)].into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    };
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn plaquette_census() {
        let c = plaquette_circuit(GroupKind::Cyclic(3), [0, 1, 2, 3], 0.5, 0.1).unwrap();
        let two = c.gates.iter().filter(|g| g.targets.len() == 2).count();
        assert_eq!((c.len(), two), (7, 6));
        assert!(plaquette_circuit(GroupKind::Cyclic(3), [0, 1, 1, 3], 0.5, 0.1).is_err());
    }

    #[test]
    fn higgs_census() {
        let c = higgs_coupling_circuit(GroupKind::Cyclic(3), 0, 1, 2, 0.3, 0.1).unwrap();
        assert_eq!(c.len(), 5);
        assert!(higgs_coupling_circuit(GroupKind::Cyclic(3), 0, 0, 2, 0.3, 0.1).is_err());
    }

    #[test]
    fn layers_are_disjoint() {
        let lat = build_lattice(2, &[2, 2], true).unwrap();
        let cs = CouplingSet { lambda_e: 1.0, lambda_b: 0.5, lambda_m: 0.5, lambda_j: 0.7, mu: 0.0, x: 0.0, dt: 0.1, order: 2 };
        let c = ahm_trotter_step(&lat, 3, &cs).unwrap();
        for layer in c.layers() {
            let mut seen = std::collections::HashSet::new();
            for &i in &layer {
                for &t in &c.gates[i].targets {
                    assert!(seen.insert(t));
                }
            }
        }
    }

    #[test]
    fn odd_chain_rejected() {
        assert!(chain_trotter_step(3, 1.0, 0.5, 0.1, 1).is_err());
    }
}
