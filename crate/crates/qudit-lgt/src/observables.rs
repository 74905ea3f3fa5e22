//! Energies, baryon number, fidelities and the hadronic tensor of the chain.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuits::{chain_trotter_step, run_circuit};
use crate::error::{invalid, Result};
use crate::formats::{fmt_f64, CsvTable};
use crate::groups::quaternion_group;
use crate::linalg::{norm, vdot, CMat};
use crate::oracle::{
    build_chain, chain_to_sector, exact_evolve, hop_action, truncated_link_operator, ChainParams, Hamiltonian,
    InvariantSubspace, KrylovOptions, LinearOperator, CHAIN_LINK_STATES,
};
use crate::register::{occupation, RegisterLayout, StateVector};
use crate::stateprep::{irrep_link_operator, ChainSubspace, Propagation};

/// Expectation of every labelled Hamiltonian term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEnergies {
    pub terms: Vec<(String, f64)>,
}

impl LocalEnergies {
    pub fn total(&self) -> f64 {
        self.terms.iter().map(|t| t.1).sum()
    }

    /// Sum over terms whose label starts with `prefix` (e.g. `"E["`).
    pub fn by_prefix(&self, prefix: &str) -> f64 {
        self.terms.iter().filter(|t| t.0.starts_with(prefix)).map(|t| t.1).sum()
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == label).map(|t| t.1)
    }
}

pub fn local_energies(psi: &[C64], h: &Hamiltonian) -> Result<LocalEnergies> {
    if psi.len() != h.dim() {
        return invalid("state and Hamiltonian dimensions differ");
    }
    Ok(LocalEnergies { terms: h.term_energies(psi) })
}

/// `½(⟨Σ n⟩ − N)` for a register with `N` fermion sites.
pub fn baryon_number(state: &StateVector) -> Result<f64> {
    let layout = state.layout();
    let n = layout.modes.len();
    if n == 0 {
        return invalid("baryon number needs a register with fermion modes");
    }
    let norm2 = state.norm().powi(2);
    if norm2 == 0.0 {
        return invalid("baryon number of the zero vector");
    }
    let occ: f64 = state.amps.iter().enumerate().map(|(i, a)| a.norm_sqr() * occupation(layout, i) as f64).sum();
    Ok(0.5 * (occ / norm2 - n as f64))
}

/// `|⟨a|b⟩|²`
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(crate::register::inner_product(a, b)?.norm_sqr())
}

/// Representation of the chain link operator `U_{αβ}` on the link register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkBasis {
    /// Eight group elements, `U` diagonal.
    Group,
    /// Eight irrep rows, untruncated.
    Irrep,
    /// Five retained irrep rows.
    Truncated,
}

/// Chain current on super-site `x`: `j⁰` counts fermions on sites `2x, 2x+1`,
/// `j¹ = Σ_{αβ} ψ†_{2x,α} U_{αβ} ψ_{2x+1,β} + h.c.` with `U` on link `2x`.
pub struct ChainCurrent {
    layout: Arc<RegisterLayout>,
    component: usize,
    super_site: usize,
    /// `[α][β]` link matrix and its adjoint
    link_ops: Vec<Vec<(CMat, CMat)>>,
}

impl ChainCurrent {
    pub fn new(layout: Arc<RegisterLayout>, component: usize, super_site: usize, basis: LinkBasis) -> Result<Self> {
        let n = layout.modes.len();
        if n < 2 || n % 2 == 1 || layout.links.len() != n || layout.modes.iter().any(|m| m.len() != 2) {
            return invalid("currents need a chain register with an even number of two-component sites");
        }
        if component > 1 {
            return invalid(format!("current component must be 0 or 1, got {component}"));
        }
        if super_site >= n / 2 {
            return invalid(format!("super-site {super_site} out of range for {n} sites"));
        }
        let radix = match basis {
            LinkBasis::Truncated => CHAIN_LINK_STATES,
            _ => 8,
        };
        if layout.links.iter().any(|&l| layout.radix(l) != radix) {
            return invalid(format!("{basis:?} link basis needs radix-{radix} links"));
        }
        let g = quaternion_group();
        let op = |a: usize, b: usize| -> Result<CMat> {
            match basis {
                LinkBasis::Group => Ok(CMat::diag(&(0..g.order()).map(|el| g.rep(el)[(a, b)]).collect::<Vec<_>>())),
                LinkBasis::Irrep => irrep_link_operator(a, b),
                LinkBasis::Truncated => truncated_link_operator(&g, a, b),
            }
        };
        let link_ops = (0..2)
            .map(|a| (0..2).map(|b| op(a, b).map(|u| (u.clone(), u.adjoint()))).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(ChainCurrent { layout, component, super_site, link_ops })
    }
}

impl LinearOperator for ChainCurrent {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        let l = &self.layout;
        let (s0, s1) = (2 * self.super_site, 2 * self.super_site + 1);
        if self.component == 0 {
            let modes = [l.modes[s0][0], l.modes[s0][1], l.modes[s1][0], l.modes[s1][1]];
            for (i, (yi, &xi)) in y.iter_mut().zip(x).enumerate() {
                if xi != C64::new(0.0, 0.0) {
                    let n: usize = modes.iter().map(|&m| l.digit(i, m)).sum();
                    *yi += xi * n as f64;
                }
            }
            return;
        }
        let link = l.links[s0];
        let st = l.stride(link);
        let radix = l.radix(link);
        for (col, &xc) in x.iter().enumerate() {
            if xc == C64::new(0.0, 0.0) {
                continue;
            }
            let r = l.digit(col, link);
            for (alpha, row) in self.link_ops.iter().enumerate() {
                for (beta, (u, ud)) in row.iter().enumerate() {
                    let (a, b) = (l.modes[s0][alpha], l.modes[s1][beta]);
                    for (m, from, to) in [(u, b, a), (ud, a, b)] {
                        if let Some((f, s)) = hop_action(l, col, to, from) {
                            let base = f - r * st;
                            for rp in 0..radix {
                                let v = m[(rp, r)];
                                if v != C64::new(0.0, 0.0) {
                                    y[base + rp * st] += v * s * xc;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        self.apply_add(x, y)
    }
}

/// Largest Krylov-invariant subspace used before falling back to stepwise evolution.
const INVARIANT_MAX_DIM: usize = 96;

/// Time evolution used for the correlator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CorrelatorBackend {
    /// Krylov evolution with the truncated chain Hamiltonian.
    Exact,
    /// Chain Trotter steps on the full register with `U` diagonal in the group basis.
    Trotter { dt: f64, order: u8, propagation: Propagation },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorRequest {
    pub mu: usize,
    pub nu: usize,
    /// Momentum label of the baryon state (bookkeeping only).
    pub p: usize,
    pub xs: Vec<usize>,
    /// Non-decreasing, non-negative.
    pub times: Vec<f64>,
}

/// `W^{μν}(x, t)` on a grid of super-sites and times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorTable {
    pub mu: usize,
    pub nu: usize,
    pub p: usize,
    /// `N/2`
    pub super_sites: usize,
    pub xs: Vec<usize>,
    pub times: Vec<f64>,
    /// `w[i][j] = W(xs[i], times[j])`
    pub w: Vec<Vec<f64>>,
}

impl CorrelatorTable {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new("hadronic-correlator", &["mu", "nu", "x", "t", "W"]);
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &time) in self.times.iter().enumerate() {
                t.push(vec![self.mu.to_string(), self.nu.to_string(), x.to_string(), fmt_f64(time), fmt_f64(self.w[i][j])]);
            }
        }
        t
    }

    /// `Σ_x W(x, t)` per time.
    pub fn x_sum(&self) -> Vec<f64> {
        (0..self.times.len()).map(|j| self.w.iter().map(|row| row[j]).sum()).collect()
    }
}

fn check_request(n: usize, req: &CorrelatorRequest) -> Result<()> {
    if req.mu > 1 || req.nu > 1 {
        return invalid("current components must be 0 or 1");
    }
    if req.xs.is_empty() || req.xs.iter().any(|&x| x >= n / 2) {
        return invalid(format!("super-sites must lie in 0..{}", n / 2));
    }
    if req.times.is_empty() || req.times[0] < 0.0 || req.times.windows(2).any(|w| w[1] < w[0]) {
        return invalid("times must be non-negative and non-decreasing");
    }
    if req.times.iter().any(|t| !t.is_finite()) {
        return invalid("times must be finite");
    }
    Ok(())
}

/// `Re⟨φ(t)| j^μ_x |χ(t)⟩` with `φ = e^{−iHt} B` and `χ = e^{−iHt} j^ν_0 B`.
pub fn hadronic_correlator(
    baryon: &StateVector,
    chain: ChainParams,
    backend: CorrelatorBackend,
    req: &CorrelatorRequest,
) -> Result<CorrelatorTable> {
    let n = chain.n_sites;
    check_request(n, req)?;
    if (baryon.norm() - 1.0).abs() > 1e-10 {
        return invalid("baryon state must be normalized");
    }
    if baryon.layout().links.len() != n || baryon.layout().modes.len() != n {
        return invalid("baryon state does not match the chain size");
    }
    let mut w = vec![vec![0.0; req.times.len()]; req.xs.len()];
    match backend {
        CorrelatorBackend::Exact => {
            let (h, sector) = build_chain(chain)?;
            let layout = crate::oracle::chain_sector_layout(n)?;
            let phi0 = chain_to_sector(baryon, &sector)?;
            let chi0 = ChainCurrent::new(layout.clone(), req.nu, 0, LinkBasis::Truncated)?.apply(&phi0);
            if norm(&chi0) == 0.0 {
                return Ok(table(req, n, w));
            }
            let jmu = req
                .xs
                .iter()
                .map(|&x| ChainCurrent::new(layout.clone(), req.mu, x, LinkBasis::Truncated))
                .collect::<Result<Vec<_>>>()?;
            let sp = InvariantSubspace::find(&h, &phi0, INVARIANT_MAX_DIM)?;
            let sc = match sp {
                Some(_) => InvariantSubspace::find(&h, &chi0, INVARIANT_MAX_DIM)?,
                None => None,
            };
            if let (Some(sp), Some(sc)) = (sp, sc) {
                let mats: Vec<CMat> = jmu
                    .iter()
                    .map(|op| {
                        let cols: Vec<Vec<C64>> = sc.basis().iter().map(|b| op.apply(b)).collect();
                        CMat::from_fn(sp.dim(), sc.dim(), |r, c| vdot(&sp.basis()[r], &cols[c]))
                    })
                    .collect();
                for (j, &t) in req.times.iter().enumerate() {
                    let (cp, cc) = (sp.coefficients(t), sc.coefficients(t));
                    for (i, m) in mats.iter().enumerate() {
                        w[i][j] = vdot(&cp, &m.matvec(&cc)).re;
                    }
                }
            } else {
                let (mut phi, mut chi) = (phi0, chi0);
                let mut now = 0.0;
                for (j, &t) in req.times.iter().enumerate() {
                    if t > now {
                        phi = exact_evolve(&h, &phi, t - now, KrylovOptions::default())?;
                        chi = exact_evolve(&h, &chi, t - now, KrylovOptions::default())?;
                        now = t;
                    }
                    for (i, op) in jmu.iter().enumerate() {
                        w[i][j] = vdot(&phi, &op.apply(&chi)).re;
                    }
                }
            }
        }
        CorrelatorBackend::Trotter { dt, order, propagation } => {
            if !(dt > 0.0) {
                return invalid("Trotter step must be positive");
            }
            let steps: Vec<usize> = req
                .times
                .iter()
                .map(|&t| {
                    let k = (t / dt).round();
                    if (k * dt - t).abs() > 1e-9 * dt.max(t) {
                        invalid(format!("time {t} is not a multiple of the Trotter step {dt}"))
                    } else {
                        Ok(k as usize)
                    }
                })
                .collect::<Result<_>>()?;
            let layout = baryon.layout_arc();
            let chi0 = StateVector::from_amplitudes(
                layout.clone(),
                ChainCurrent::new(layout.clone(), req.nu, 0, LinkBasis::Group)?.apply(&baryon.amps),
            )?;
            if chi0.norm() == 0.0 {
                return Ok(table(req, n, w));
            }
            match propagation {
                Propagation::Circuit => {
                    let step = chain_trotter_step(n, chain.mu, chain.x, dt, order)?;
                    let jmu = req.xs.iter().map(|&x| ChainCurrent::new(layout.clone(), req.mu, x, LinkBasis::Group)).collect::<Result<Vec<_>>>()?;
                    let (mut phi, mut chi) = (baryon.clone(), chi0);
                    let mut done = 0;
                    for (j, &k) in steps.iter().enumerate() {
                        for _ in done..k {
                            run_circuit(&mut phi, &step)?;
                            run_circuit(&mut chi, &step)?;
                        }
                        done = k;
                        for (i, op) in jmu.iter().enumerate() {
                            w[i][j] = vdot(&phi.amps, &op.apply(&chi.amps)).re;
                        }
                    }
                }
                Propagation::Subspace => {
                    let sp = ChainSubspace::build(n, baryon)?;
                    let sc = ChainSubspace::build(n, &chi0)?;
                    // ⟨φ-basis| j^μ_x |χ-basis⟩ in the irrep basis
                    let mats = req
                        .xs
                        .iter()
                        .map(|&x| -> Result<CMat> {
                            let op = ChainCurrent::new(layout.clone(), req.mu, x, LinkBasis::Irrep)?;
                            let mut m = CMat::zeros(sp.dim(), sc.dim());
                            for k in 0..sc.dim() {
                                let col = sp.irrep_coordinates(&op.apply(&sc.irrep_vector(k)));
                                for (r, v) in col.into_iter().enumerate() {
                                    m[(r, k)] = v;
                                }
                            }
                            Ok(m)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let mut cp = sp.coordinates(baryon)?.0;
                    let mut cc = sc.coordinates(&chi0)?.0;
                    let mut done = 0;
                    for (j, &k) in steps.iter().enumerate() {
                        for _ in done..k {
                            sp.step(&mut cp, chain.mu, chain.x, dt, order)?;
                            sc.step(&mut cc, chain.mu, chain.x, dt, order)?;
                        }
                        done = k;
                        for (i, m) in mats.iter().enumerate() {
                            w[i][j] = vdot(&cp, &m.matvec(&cc)).re;
                        }
                    }
                }
            }
        }
    }
    Ok(table(req, n, w))
}

fn table(req: &CorrelatorRequest, n: usize, w: Vec<Vec<f64>>) -> CorrelatorTable {
    CorrelatorTable { mu: req.mu, nu: req.nu, p: req.p, super_sites: n / 2, xs: req.xs.clone(), times: req.times.clone(), w }
}

/// Taper applied over the finite time range `[t₀, T]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Rectangular,
    /// `½(1 − cos 2πs)`, `s = (t − t₀)/(T − t₀)`
    Hann,
    /// `cos²(πs/2)`: unity at `t₀`, zero at `T`
    HalfHann,
}

impl Window {
    pub fn weight(&self, s: f64) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 0.5 * (1.0 - (2.0 * std::f64::consts::PI * s).cos()),
            Window::HalfHann => (0.5 * std::f64::consts::PI * s).cos().powi(2),
        }
    }
}

/// `W(k, ω)` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTable {
    pub mu: usize,
    pub nu: usize,
    pub p: usize,
    pub ks: Vec<i64>,
    pub omegas: Vec<f64>,
    pub window: Window,
    /// `values[i][j] = W(ks[i], omegas[j])`
    pub values: Vec<Vec<C64>>,
}

impl SpectrumTable {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new("hadronic-spectrum", &["mu", "nu", "k", "omega", "reW", "imW"]);
        for (i, &k) in self.ks.iter().enumerate() {
            for (j, &om) in self.omegas.iter().enumerate() {
                let v = self.values[i][j];
                t.push(vec![self.mu.to_string(), self.nu.to_string(), k.to_string(), fmt_f64(om), fmt_f64(v.re), fmt_f64(v.im)]);
            }
        }
        t
    }
}

/// `Σ_x Σ_t Δt w(t) e^{−i(ωt + 2πkx/(N/2))} W(x, t)` over the table's grid.
pub fn hadronic_ft(table: &CorrelatorTable, ks: &[i64], omegas: &[f64], window: Window) -> Result<SpectrumTable> {
    let t = &table.times;
    if t.len() < 2 {
        return invalid("transform needs at least two time samples");
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) || t.windows(2).any(|p| ((p[1] - p[0]) - dt).abs() > 1e-9 * dt) {
        return invalid("transform needs a uniform time grid");
    }
    let span = t[t.len() - 1] - t[0];
    let m = table.super_sites as f64;
    let wts: Vec<f64> = t.iter().map(|&ti| window.weight((ti - t[0]) / span)).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let values = ks
        .iter()
        .map(|&k| {
            omegas
                .iter()
                .map(|&om| {
                    let mut acc = C64::new(0.0, 0.0);
                    for (row, &x) in table.w.iter().zip(&table.xs) {
                        for ((&wv, &ti), &wt) in row.iter().zip(t).zip(&wts) {
                            acc += C64::from_polar(dt * wt * wv, -(om * ti + two_pi * k as f64 * x as f64 / m));
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Ok(SpectrumTable { mu: table.mu, nu: table.nu, p: table.p, ks: ks.to_vec(), omegas: omegas.to_vec(), window, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_table(n_t: usize, dt: f64, om0: f64) -> CorrelatorTable {
        let times: Vec<f64> = (0..n_t).map(|j| j as f64 * dt).collect();
        let w = vec![times.iter().map(|t| (om0 * t).cos()).collect(), vec![0.0; n_t]];
        CorrelatorTable { mu: 0, nu: 0, p: 0, super_sites: 2, xs: vec![0, 1], times, w }
    }

    #[test]
    fn cosine_peaks_at_its_frequency() {
        let tab = cos_table(2000, 0.05, 1.3);
        let om: Vec<f64> = (0..601).map(|j| -3.0 + 0.01 * j as f64).collect();
        let s = hadronic_ft(&tab, &[0], &om, Window::Hann).unwrap();
        let mags: Vec<f64> = s.values[0].iter().map(|v| v.norm()).collect();
        let (ipos, _) = mags.iter().enumerate().filter(|(i, _)| om[*i] > 0.0).max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let (ineg, _) = mags.iter().enumerate().filter(|(i, _)| om[*i] < 0.0).max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((om[ipos] - 1.3).abs() < 0.011 && (om[ineg] + 1.3).abs() < 0.011);
    }

    #[test]
    fn zero_table_transforms_to_zero() {
        let mut tab = cos_table(10, 0.1, 1.0);
        tab.w.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
        let s = hadronic_ft(&tab, &[0, 1], &[0.0, 2.0], Window::Rectangular).unwrap();
        assert!(s.values.iter().flatten().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn non_uniform_grid_is_rejected() {
        let mut tab = cos_table(10, 0.1, 1.0);
        tab.times[5] += 0.01;
        assert!(hadronic_ft(&tab, &[0], &[0.0], Window::Rectangular).is_err());
    }
}
