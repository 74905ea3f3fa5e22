//! Initial states and preparation protocols: flux strings, baryon references,
//! adiabatic coupling ramps and variational Trotter-angle optimization.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{chain_block, chain_mode, chain_trotter_step};
use crate::error::{invalid, Error, Result};
use crate::groups::{cyclic_group, group_fourier, quaternion_group};
use crate::lattice::LatticeSpec;
use crate::linalg::{hermitian_eig, norm, vdot, CMat};
use crate::oracle::{chain_bond_sign, chain_full_layout, SparseOperator, LinearOperator, CHAIN_LINK_STATES, hop_action};
use crate::register::{apply_creation, apply_kernel, basis_state, Kernel, RegisterLayout, StateVector};

/// Closed flux loop: the given links hold the `n = 1` electric eigenstate, all others `n = 0`.
///
/// The links must all point along one axis, share their transverse
/// coordinate and cover the full extent of that axis.
pub fn flux_string_state(lattice: &LatticeSpec, d: usize, links: &[usize]) -> Result<StateVector> {
    if lattice.dim != 2 || !lattice.periodic {
        return invalid("flux strings are defined on periodic 2D lattices");
    }
    if links.iter().any(|&l| l >= lattice.num_links()) || links.is_empty() {
        return invalid("flux string links out of range");
    }
    let dir = lattice.links[links[0]].dir;
    let across = |l: usize| lattice.site_coords(lattice.links[l].site)[1 - dir];
    let mut along: Vec<usize> = links.iter().map(|&l| lattice.site_coords(lattice.links[l].site)[dir]).collect();
    along.sort_unstable();
    along.dedup();
    let winding = links.iter().all(|&l| lattice.links[l].dir == dir && across(l) == across(links[0]))
        && along.len() == links.len()
        && links.len() == lattice.extents[dir];
    if !winding {
        return invalid("flux string links do not form a winding loop");
    }
    let g = cyclic_group(d)?;
    let fd = group_fourier(&g)?.fourier.adjoint();
    let layout = Arc::new(RegisterLayout::gauge(lattice.num_links(), d)?);
    let mut state = basis_state(layout, &vec![0; lattice.num_links()])?;
    let excite = CMat::from_fn(d, d, |i, j| fd[(i, (j + 1) % d)]);
    for l in 0..lattice.num_links() {
        let u = if links.contains(&l) { excite.clone() } else { fd.clone() };
        apply_kernel(&mut state, &Kernel::Single { target: l, matrix: u })?;
    }
    Ok(state)
}

fn trivial_links(n: usize, layout: Arc<RegisterLayout>, filled: impl Fn(usize) -> bool) -> Result<StateVector> {
    let mut s = basis_state(layout, &vec![0; 3 * n])?;
    for site in (0..n).rev() {
        if filled(site) {
            apply_creation(&mut s, chain_mode(n, site, 1))?;
            apply_creation(&mut s, chain_mode(n, site, 0))?;
        }
    }
    // all links in the trivial irrep: uniform over the group
    let f = group_fourier(&quaternion_group())?.fourier.adjoint();
    for l in 0..n {
        apply_kernel(&mut s, &Kernel::Single { target: l, matrix: f.clone() })?;
    }
    Ok(s)
}

fn check_even(n: usize) -> Result<()> {
    if n < 2 || n % 2 == 1 {
        return invalid(format!("chain needs an even number of sites >= 2, got {n}"));
    }
    Ok(())
}

/// Half-filled staggered vacuum `|O⟩` (odd sites doubly occupied) with trivial links, group basis.
pub fn chain_vacuum_state(n: usize) -> Result<StateVector> {
    check_even(n)?;
    trivial_links(n, chain_full_layout(n)?, |s| s % 2 == 1)
}

/// `Σ_{n even} e^{2πipn/N} ψ†_{n,1} ψ†_{n,2} |O⟩` with trivial links, normalized, group basis.
pub fn baryon_reference_state(n: usize, p: usize) -> Result<StateVector> {
    check_even(n)?;
    if p >= n / 2 {
        return invalid(format!("baryon momentum must be below N/2 = {}", n / 2));
    }
    let layout = chain_full_layout(n)?;
    let mut acc = StateVector::zeros(layout.clone());
    for site in (0..n).step_by(2) {
        let s = trivial_links(n, layout.clone(), |k| k % 2 == 1 || k == site)?;
        let ph = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (p * site) as f64 / n as f64);
        crate::linalg::axpy(ph, &s.amps, &mut acc.amps);
    }
    acc.normalize();
    Ok(acc)
}

/// Piecewise-linear coupling ramp for the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub start_mu: f64,
    pub start_x: f64,
    pub knots: Vec<RampKnot>,
    pub steps: usize,
    pub dt: f64,
}

/// One ramp segment: reach `(mu, x)` after `fraction` of the total steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampKnot {
    pub fraction: f64,
    pub mu: f64,
    pub x: f64,
}

impl RampSchedule {
    /// Linear ramp of `x` at fixed `mu`.
    pub fn linear(mu: f64, x0: f64, x1: f64, steps: usize, dt: f64) -> Self {
        RampSchedule { start_mu: mu, start_x: x0, knots: vec![RampKnot { fraction: 1.0, mu, x: x1 }], steps, dt }
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.knots.iter().map(|k| k.fraction).sum();
        if self.knots.is_empty() || (total - 1.0).abs() > 1e-9 || self.knots.iter().any(|k| k.fraction < 0.0) {
            return invalid("ramp fractions must be non-negative and sum to 1");
        }
        let finite = self.knots.iter().all(|k| k.mu.is_finite() && k.x.is_finite());
        if !finite || !self.start_mu.is_finite() || !self.start_x.is_finite() {
            return invalid("ramp couplings must be finite");
        }
        if !(self.dt > 0.0) {
            return invalid("ramp dt must be positive");
        }
        Ok(())
    }

    /// Couplings at ramp position `s ∈ [0, 1]`.
    pub fn couplings(&self, s: f64) -> (f64, f64) {
        let (mut mu0, mut x0, mut f0) = (self.start_mu, self.start_x, 0.0);
        for k in &self.knots {
            if s <= f0 + k.fraction || std::ptr::eq(k, self.knots.last().unwrap()) {
                let w = if k.fraction > 0.0 { ((s - f0) / k.fraction).clamp(0.0, 1.0) } else { 1.0 };
                return (mu0 + w * (k.mu - mu0), x0 + w * (k.x - x0));
            }
            f0 += k.fraction;
            mu0 = k.mu;
            x0 = k.x;
        }
        (mu0, x0)
    }

    /// Couplings used for step `j`, sampled at the step midpoint.
    pub fn step_couplings(&self, j: usize) -> (f64, f64) {
        self.couplings((j as f64 + 0.5) / self.steps.max(1) as f64)
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        RampSchedule { steps, ..self.clone() }
    }
}

/// How chain Trotter blocks are applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    /// Gate circuits on the full register.
    Circuit,
    /// The same blocks restricted to the smallest invariant subspace containing the initial state.
    #[default]
    Subspace,
}

/// Chain Trotter blocks restricted to a small invariant subspace.
///
/// Every block factor conserves fermion number, so the subspace is built
/// inside one number sector of the irrep-basis register. It is closed under
/// the electric, mass and truncation-projection diagonals and under the even
/// and odd bond generators; a block then reduces to phases and two small
/// unitary exponentials. Each basis vector lies in one joint eigenspace of
/// the diagonals, which therefore act as numbers.
pub struct ChainSubspace {
    n: usize,
    layout: Arc<RegisterLayout>,
    /// number-sector flat indices (irrep basis)
    index: Vec<usize>,
    basis: Vec<Vec<C64>>,
    e2: Vec<f64>,
    mass: Vec<f64>,
    keep: Vec<bool>,
    even: (Vec<f64>, CMat),
    odd: (Vec<f64>, CMat),
}

/// Link operator `U_{αβ}` on all eight irrep rows.
pub(crate) fn irrep_link_operator(alpha: usize, beta: usize) -> Result<CMat> {
    let g = quaternion_group();
    let f = group_fourier(&g)?.fourier;
    let diag: Vec<C64> = (0..g.order()).map(|el| g.rep(el)[(alpha, beta)]).collect();
    Ok(f.matmul(&CMat::diag(&diag)).matmul(&f.adjoint()))
}

fn to_irrep(state: &StateVector, n: usize, inverse: bool) -> Result<StateVector> {
    let mut f = group_fourier(&quaternion_group())?.fourier;
    if inverse {
        f = f.adjoint();
    }
    let mut s = state.clone();
    for l in 0..n {
        apply_kernel(&mut s, &Kernel::Single { target: l, matrix: f.clone() })?;
    }
    Ok(s)
}

impl ChainSubspace {
    /// Smallest block-invariant subspace containing `start` (group-basis chain state).
    pub fn build(n: usize, start: &StateVector) -> Result<Self> {
        check_even(n)?;
        let layout = chain_full_layout(n)?;
        if start.layout() != &*layout {
            return invalid("start state is not on the chain register");
        }
        let irrep = to_irrep(start, n, false)?;
        let occ = |f: usize| (n..3 * n).map(|k| layout.digit(f, k)).sum::<usize>();
        let pivot = (0..layout.dim())
            .max_by(|&a, &b| irrep.amps[a].norm().total_cmp(&irrep.amps[b].norm()))
            .unwrap_or(0);
        let nf = occ(pivot);
        let index: Vec<usize> = (0..layout.dim()).filter(|&f| occ(f) == nf).collect();
        let mut pos = vec![u32::MAX; layout.dim()];
        for (i, &f) in index.iter().enumerate() {
            pos[f] = i as u32;
        }
        let v: Vec<C64> = index.iter().map(|&f| irrep.amps[f]).collect();
        let captured = norm(&v);
        if (captured - irrep.norm()).abs() > 1e-10 * irrep.norm().max(1.0) || captured == 0.0 {
            return invalid("start state has no definite fermion number");
        }
        let e2 = |f: usize| (0..n).filter(|&l| (1..CHAIN_LINK_STATES).contains(&layout.digit(f, l))).count() as f64 * 0.75;
        let mass = |f: usize| {
            (0..n).map(|s| if s % 2 == 0 { 1.0 } else { -1.0 } * (layout.digit(f, chain_mode(n, s, 0)) + layout.digit(f, chain_mode(n, s, 1))) as f64).sum::<f64>()
        };
        let keep = |f: usize| (0..n).all(|l| layout.digit(f, l) < CHAIN_LINK_STATES);
        // label = joint eigenvalue of (E², mass, keep)
        let label_of = |f: usize| -> (i64, i64, bool) { ((e2(f) * 4.0).round() as i64, mass(f).round() as i64, keep(f)) };
        let mut labels: Vec<(i64, i64, bool)> = index.iter().map(|&f| label_of(f)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        labels.sort();
        let label_id: Vec<usize> = index.iter().map(|&f| labels.binary_search(&label_of(f)).unwrap()).collect();

        let link_ops: Vec<Vec<CMat>> =
            (0..2).map(|a| (0..2).map(|b| irrep_link_operator(a, b)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
        let bond_op = |parity: usize| -> Result<SparseOperator> {
            let mut trip = Vec::new();
            for bond in (parity..n).step_by(2) {
                let next = (bond + 1) % n;
                let coeff = C64::new(0.0, -chain_bond_sign(n, bond));
                let st = layout.stride(bond);
                for (col, &flat) in index.iter().enumerate() {
                    let r = layout.digit(flat, bond);
                    for (alpha, row_ops) in link_ops.iter().enumerate() {
                        for (beta, u) in row_ops.iter().enumerate() {
                            if let Some((f, s)) = hop_action(&layout, flat, chain_mode(n, bond, alpha), chain_mode(n, next, beta)) {
                                for rp in 0..8 {
                                    let val = u[(rp, r)];
                                    if val.norm() < 1e-14 {
                                        continue;
                                    }
                                    let row = pos[f - r * st + rp * st] as usize;
                                    let w = coeff * val * s;
                                    trip.push((row, col, w));
                                    trip.push((col, row, w.conj()));
                                }
                            }
                        }
                    }
                }
            }
            SparseOperator::from_triplets(index.len(), trip)
        };
        let ops = [bond_op(0)?, bond_op(1)?];

        // closure by label-resolved Gram-Schmidt; matrix elements collected on the fly
        let split = |w: &[C64]| -> Vec<(usize, Vec<C64>)> {
            let mut parts: std::collections::BTreeMap<usize, Vec<C64>> = std::collections::BTreeMap::new();
            for (i, &a) in w.iter().enumerate() {
                if a.norm() > 0.0 {
                    parts.entry(label_id[i]).or_insert_with(|| vec![C64::new(0.0, 0.0); w.len()])[i] = a;
                }
            }
            parts.into_iter().collect()
        };
        let mut basis: Vec<Vec<C64>> = Vec::new();
        let mut blabel: Vec<usize> = Vec::new();
        let mut cols: [Vec<Vec<(usize, C64)>>; 2] = [Vec::new(), Vec::new()];
        let tol = 1e-10;
        let absorb = |w: Vec<C64>, basis: &mut Vec<Vec<C64>>, blabel: &mut Vec<usize>| -> Vec<(usize, C64)> {
            let mut coeffs: Vec<(usize, C64)> = Vec::new();
            let scale = norm(&w);
            for (lab, mut part) in split(&w) {
                let same: Vec<usize> = (0..basis.len()).filter(|&k| blabel[k] == lab).collect();
                let mut c = vec![C64::new(0.0, 0.0); same.len()];
                for _pass in 0..2 {
                    for (ci, &k) in c.iter_mut().zip(&same) {
                        let d = vdot(&basis[k], &part);
                        *ci += d;
                        crate::linalg::axpy(-d, &basis[k], &mut part);
                    }
                }
                coeffs.extend(same.iter().copied().zip(c));
                let r = norm(&part);
                if r > tol * scale.max(1.0) {
                    part.iter_mut().for_each(|a| *a /= r);
                    coeffs.push((basis.len(), C64::new(r, 0.0)));
                    basis.push(part);
                    blabel.push(lab);
                }
            }
            coeffs
        };
        absorb(v.iter().map(|a| a / captured).collect(), &mut basis, &mut blabel);
        let mut j = 0;
        while j < basis.len() {
            for (g, op) in ops.iter().enumerate() {
                let w = op.apply(&basis[j]);
                let c = absorb(w, &mut basis, &mut blabel);
                cols[g].push(c);
            }
            j += 1;
            if basis.len() > 20_000 {
                return Err(Error::NumericFailure("invariant subspace exceeds 20000 vectors".into()));
            }
        }
        let m = basis.len();
        let dense = |c: &Vec<Vec<(usize, C64)>>| -> CMat {
            let mut a = CMat::zeros(m, m);
            for (jj, col) in c.iter().enumerate() {
                for &(i, v) in col {
                    a[(i, jj)] += v;
                }
            }
            // symmetrize away round-off
            a.add(&a.adjoint()).scale(C64::new(0.5, 0.0))
        };
        let (we, ve) = hermitian_eig(&dense(&cols[0]))?;
        let (wo, vo) = hermitian_eig(&dense(&cols[1]))?;
        let rep = |k: usize| basis[k].iter().position(|a| a.norm() > 0.0).map(|i| index[i]).unwrap();
        let e2v: Vec<f64> = (0..m).map(|k| e2(rep(k))).collect();
        let massv: Vec<f64> = (0..m).map(|k| mass(rep(k))).collect();
        let keepv: Vec<bool> = (0..m).map(|k| keep(rep(k))).collect();
        Ok(ChainSubspace { n, layout, index, basis, e2: e2v, mass: massv, keep: keepv, even: (we, ve), odd: (wo, vo) })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of a group-basis state and the captured squared norm.
    pub fn coordinates(&self, state: &StateVector) -> Result<(Vec<C64>, f64)> {
        let irrep = to_irrep(state, self.n, false)?;
        let v: Vec<C64> = self.index.iter().map(|&f| irrep.amps[f]).collect();
        let c: Vec<C64> = self.basis.iter().map(|b| vdot(b, &v)).collect();
        let cap = norm(&c).powi(2) / irrep.norm().powi(2).max(f64::MIN_POSITIVE);
        Ok((c, cap))
    }

    /// Group-basis state with the given coordinates.
    pub fn state(&self, c: &[C64]) -> Result<StateVector> {
        let mut v = vec![C64::new(0.0, 0.0); self.index.len()];
        for (ck, b) in c.iter().zip(&self.basis) {
            crate::linalg::axpy(*ck, b, &mut v);
        }
        let mut amps = vec![C64::new(0.0, 0.0); self.layout.dim()];
        for (&f, a) in self.index.iter().zip(v) {
            amps[f] = a;
        }
        to_irrep(&StateVector::from_amplitudes(self.layout.clone(), amps)?, self.n, true)
    }

    /// Basis vector `k` on the full irrep-basis register.
    pub fn irrep_vector(&self, k: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.layout.dim()];
        for (&f, &a) in self.index.iter().zip(&self.basis[k]) {
            v[f] = a;
        }
        v
    }

    /// Coordinates of a full irrep-basis vector.
    pub fn irrep_coordinates(&self, v: &[C64]) -> Vec<C64> {
        let r: Vec<C64> = self.index.iter().map(|&f| v[f]).collect();
        self.basis.iter().map(|b| vdot(b, &r)).collect()
    }

    fn h0(&self, c: &mut [C64], mu: f64, theta: f64) {
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = if self.keep[k] { *ck * C64::from_polar(1.0, -theta * (self.e2[k] + mu * self.mass[k])) } else { C64::new(0.0, 0.0) };
        }
    }

    fn hop(c: &mut [C64], spec: &(Vec<f64>, CMat), angle: f64) {
        let (w, v) = spec;
        let mut y = v.adjoint().matvec(c);
        for (yk, wk) in y.iter_mut().zip(w) {
            *yk *= C64::from_polar(1.0, -angle * wk);
        }
        c.copy_from_slice(&v.matvec(&y));
    }

    /// Same map as [`chain_block`].
    pub fn block(&self, c: &mut [C64], mu: f64, x: f64, theta0: f64, thetax: f64) {
        self.h0(c, mu, theta0 / 2.0);
        Self::hop(c, &self.even, x * thetax / 2.0);
        Self::hop(c, &self.odd, x * thetax);
        Self::hop(c, &self.even, x * thetax / 2.0);
        self.h0(c, mu, theta0 / 2.0);
    }

    /// Same map as [`chain_trotter_step`].
    pub fn step(&self, c: &mut [C64], mu: f64, x: f64, dt: f64, order: u8) -> Result<()> {
        match order {
            1 => {
                self.h0(c, mu, dt);
                Self::hop(c, &self.even, x * dt);
                Self::hop(c, &self.odd, x * dt);
            }
            2 => self.block(c, mu, x, dt, dt),
            _ => return invalid("Trotter order must be 1 or 2"),
        }
        Ok(())
    }
}

fn overlap2(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(crate::register::inner_product(a, b)?.norm_sqr())
}

/// Result of an adiabatic ramp.
#[derive(Clone, Debug)]
pub struct AdiabaticRun {
    pub state: StateVector,
    /// Fidelity with the target after each step (empty without a target).
    pub fidelity: Vec<f64>,
}

/// Second-order chain Trotter steps with couplings following `ramp`.
pub fn adiabatic_prepare(
    initial: &StateVector,
    n: usize,
    ramp: &RampSchedule,
    target: Option<&StateVector>,
    mode: Propagation,
) -> Result<AdiabaticRun> {
    ramp.validate()?;
    let mut fid = Vec::with_capacity(ramp.steps);
    match mode {
        Propagation::Circuit => {
            let mut s = initial.clone();
            for j in 0..ramp.steps {
                let (mu, x) = ramp.step_couplings(j);
                crate::circuits::run_circuit(&mut s, &chain_trotter_step(n, mu, x, ramp.dt, 2)?)?;
                if let Some(t) = target {
                    fid.push(overlap2(t, &s)?);
                }
            }
            Ok(AdiabaticRun { state: s, fidelity: fid })
        }
        Propagation::Subspace => {
            let sub = ChainSubspace::build(n, initial)?;
            let (mut c, _) = sub.coordinates(initial)?;
            let tc = target.map(|t| sub.coordinates(t)).transpose()?;
            for j in 0..ramp.steps {
                let (mu, x) = ramp.step_couplings(j);
                sub.step(&mut c, mu, x, ramp.dt, 2)?;
                if let Some((t, _)) = &tc {
                    fid.push(vdot(t, &c).norm_sqr());
                }
            }
            Ok(AdiabaticRun { state: sub.state(&c)?, fidelity: fid })
        }
    }
}

/// Doubles the ramp length from `ramp.steps` until the final fidelity reaches `threshold`.
///
/// Returns the last run and its step count; the run is below threshold when
/// `max_doublings` is exhausted.
pub fn adiabatic_search(
    initial: &StateVector,
    n: usize,
    ramp: &RampSchedule,
    target: &StateVector,
    threshold: f64,
    max_doublings: usize,
) -> Result<(AdiabaticRun, usize)> {
    let sub = ChainSubspace::build(n, initial)?;
    let (c0, _) = sub.coordinates(initial)?;
    let (tc, _) = sub.coordinates(target)?;
    let mut steps = ramp.steps.max(1);
    for k in 0..=max_doublings {
        let r = ramp.with_steps(steps);
        r.validate()?;
        let mut c = c0.clone();
        let mut fid = Vec::with_capacity(steps);
        for j in 0..steps {
            let (mu, x) = r.step_couplings(j);
            sub.step(&mut c, mu, x, r.dt, 2)?;
            fid.push(vdot(&tc, &c).norm_sqr());
        }
        if *fid.last().unwrap() >= threshold || k == max_doublings {
            return Ok((AdiabaticRun { state: sub.state(&c)?, fidelity: fid }, steps));
        }
        steps *= 2;
    }
    unreachable!()
}

/// Variational Trotter plan: `blocks` blocks with angles `(θ₀, θₓ)` each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalPlan {
    pub blocks: usize,
    /// `[θ₀⁽¹⁾, θₓ⁽¹⁾, ..., θ₀⁽ⁿ⁾, θₓ⁽ⁿ⁾]`; empty means start from the nested warm start.
    pub angles: Vec<f64>,
    /// Iteration cap per Nelder-Mead run.
    pub max_iters: u64,
    pub tol: f64,
    pub seed: u64,
    /// Initial simplex edge length.
    pub step: f64,
    /// Extra Nelder-Mead runs per nesting level from randomly perturbed starts.
    pub restarts: usize,
    pub propagation: Propagation,
}

impl Default for VariationalPlan {
    fn default() -> Self {
        VariationalPlan { blocks: 5, angles: Vec::new(), max_iters: 4000, tol: 1e-10, seed: 7, step: 0.3, restarts: 8, propagation: Propagation::Subspace }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalResult {
    pub angles: Vec<f64>,
    /// Fidelity of the circuit ansatz with the target at `angles`.
    pub fidelity: f64,
    pub evaluations: u64,
    /// False when the evaluation budget ran out before the simplex converged.
    pub converged: bool,
    /// Best fidelity after each nesting level (1, 2, ..., blocks).
    pub nested: Vec<f64>,
}

/// Ansatz state `∏_b block(θ₀⁽ᵇ⁾, θₓ⁽ᵇ⁾) |initial⟩` as gate circuits.
pub fn ansatz_state(initial: &StateVector, n: usize, mu: f64, x: f64, angles: &[f64]) -> Result<StateVector> {
    if angles.len() % 2 == 1 || angles.iter().any(|a| !a.is_finite()) {
        return invalid("angles must be finite (θ₀, θₓ) pairs");
    }
    let mut s = initial.clone();
    for pair in angles.chunks(2) {
        crate::circuits::run_circuit(&mut s, &chain_block(n, mu, x, pair[0], pair[1])?)?;
    }
    Ok(s)
}

struct Infidelity<'a> {
    eval: &'a (dyn Fn(&[f64]) -> Result<f64> + Sync),
    count: &'a AtomicU64,
}

impl CostFunction for Infidelity<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        self.count.fetch_add(1, Ordering::Relaxed);
        (self.eval)(p).map(|f| 1.0 - f).map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

fn simplex(x0: &[f64], step: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut s = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step * (1.0 + 0.1 * rng.gen::<f64>());
        s.push(v);
    }
    s
}

fn nelder_mead(
    eval: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    x0: &[f64],
    plan: &VariationalPlan,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64, u64, bool)> {
    let count = AtomicU64::new(0);
    let budget = plan.max_iters;
    let cost = Infidelity { eval, count: &count };
    let solver = NelderMead::new(simplex(x0, plan.step, rng))
        .with_sd_tolerance(plan.tol)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let res = Executor::new(cost, solver)
        .configure(|st| st.param(x0.to_vec()).max_iters(budget))
        .run()
        .map_err(|e| Error::NumericFailure(e.to_string()))?;
    let st = res.state();
    let best = st.get_best_param().cloned().unwrap_or_else(|| x0.to_vec());
    let evals = count.load(Ordering::Relaxed);
    let converged = st.get_iter() < budget;
    let f = eval(&best)?;
    Ok((best, f, evals, converged))
}

/// Maximizes `|⟨target|ansatz(θ)⟩|²` with nested warm starts over 1..=blocks.
///
/// Level `k` starts from the level `k−1` optimum extended by a zero-angle
/// block, which leaves truncated states unchanged, so the nested fidelities
/// never decrease. The reported fidelity is always re-evaluated with gate
/// circuits on the full register.
pub fn variational_prepare(
    initial: &StateVector,
    n: usize,
    mu: f64,
    x: f64,
    plan: &VariationalPlan,
    target: &StateVector,
) -> Result<VariationalResult> {
    if plan.blocks == 0 {
        return invalid("variational plan needs at least one block");
    }
    if !plan.angles.is_empty() && plan.angles.len() != 2 * plan.blocks {
        return invalid("angle vector must hold two angles per block");
    }
    if (target.norm() - 1.0).abs() > 1e-8 {
        return invalid("target state must be normalized");
    }
    let circuit_eval = |a: &[f64]| -> Result<f64> { overlap2(target, &ansatz_state(initial, n, mu, x, a)?) };
    let sub = match plan.propagation {
        Propagation::Subspace => Some(ChainSubspace::build(n, initial)?),
        Propagation::Circuit => None,
    };
    let coords = match &sub {
        Some(s) => Some((s.coordinates(initial)?.0, s.coordinates(target)?.0)),
        None => None,
    };
    let sub_eval = |a: &[f64]| -> Result<f64> {
        let s = sub.as_ref().unwrap();
        let (c0, t) = coords.as_ref().unwrap();
        let mut c = c0.clone();
        for pair in a.chunks(2) {
            s.block(&mut c, mu, x, pair[0], pair[1]);
        }
        Ok(vdot(t, &c).norm_sqr())
    };
    let eval: &(dyn Fn(&[f64]) -> Result<f64> + Sync) = if sub.is_some() { &sub_eval } else { &circuit_eval };
    let levels: Vec<usize> = if plan.angles.is_empty() { (1..=plan.blocks).collect() } else { vec![plan.blocks] };
    let mut angles: Vec<f64> = plan.angles.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut evals = 0;
    let mut converged = true;
    let mut nested = Vec::new();
    for &k in &levels {
        if plan.angles.is_empty() {
            if k == 1 {
                angles = vec![0.5, 0.5];
            } else {
                angles.extend_from_slice(&[0.0, 0.0]);
            }
        }
        let mut best_f = eval(&angles)?;
        let mut best = angles.clone();
        for r in 0..=plan.restarts {
            let start: Vec<f64> = if r == 0 {
                angles.clone()
            } else {
                best.iter().map(|a| a + rng.gen_range(-1.0..1.0)).collect()
            };
            let (p, f, e, c) = nelder_mead(eval, &start, plan, &mut rng)?;
            evals += e;
            converged &= c;
            if f > best_f {
                best_f = f;
                best = p;
            }
        }
        angles = best;
        nested.push(best_f);
    }
    let fidelity = circuit_eval(&angles)?;
    Ok(VariationalResult { angles, fidelity, evaluations: evals, converged, nested })
}
