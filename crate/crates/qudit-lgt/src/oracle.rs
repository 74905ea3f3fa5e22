//! Exact reference dynamics: Hamiltonians, sectors, Gauss law, Krylov
//! propagation and Lanczos ground states.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::groups::{group_fourier, quaternion_group, GroupKind, GroupTable};
use crate::lattice::LatticeSpec;
use crate::linalg::{axpy, norm, tridiag_eig, vdot, CMat};
use crate::register::{apply_kernel, Kernel, RegisterLayout, StateVector};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// A linear map on `C^dim` applied without materializing a matrix.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    /// `y += A x`
    fn apply_add(&self, x: &[C64], y: &mut [C64]);
    /// `y += A† x`
    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]);

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        self.apply_add(x, &mut y);
        y
    }
}

/// Dense matrix of any operator, by columns. Intended for small dimensions.
pub fn to_dense(op: &dyn LinearOperator) -> CMat {
    let n = op.dim();
    let mut m = CMat::zeros(n, n);
    let mut e = vec![ZERO; n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        let col = op.apply(&e);
        e[j] = ZERO;
        for (i, v) in col.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, Default)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, C64)>) -> Result<Self> {
        if entries.iter().any(|&(r, c, _)| r >= dim || c >= dim) {
            return invalid("sparse entry out of range");
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != ZERO {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseOperator { dim, row_ptr, cols: keep_cols, vals: keep_vals })
    }

    pub fn from_dense(m: &CMat) -> Result<Self> {
        let mut t = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != ZERO {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.rows(), t)
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let t = values.iter().enumerate().filter(|(_, v)| **v != ZERO).map(|(i, v)| (i, i, *v)).collect();
        Self::from_triplets(values.len(), t).expect("diagonal entries are in range")
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.push((r, self.cols[k], self.vals[k]));
            }
        }
        out
    }

    pub fn adjoint(&self) -> SparseOperator {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, t).expect("same dimension")
    }

    /// `‖A − A†‖_max`
    pub fn hermiticity_error(&self) -> f64 {
        max_entry_difference(self, &self.adjoint())
    }

    pub fn sum(dim: usize, parts: &[&SparseOperator]) -> Result<Self> {
        let mut t = Vec::new();
        for p in parts {
            if p.dim != dim {
                return invalid("dimension mismatch in operator sum");
            }
            t.extend(p.triplets());
        }
        Self::from_triplets(dim, t)
    }
}

fn max_entry_difference(a: &SparseOperator, b: &SparseOperator) -> f64 {
    let mut diff: std::collections::HashMap<(usize, usize), C64> = std::collections::HashMap::new();
    for (r, c, v) in a.triplets() {
        *diff.entry((r, c)).or_insert(ZERO) += v;
    }
    for (r, c, v) in b.triplets() {
        *diff.entry((r, c)).or_insert(ZERO) -= v;
    }
    diff.values().map(|v| v.norm()).fold(0.0, f64::max)
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr += acc;
        }
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        for r in 0..self.dim {
            let xr = x[r];
            if xr == ZERO {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.cols[k]] += self.vals[k].conj() * xr;
            }
        }
    }
}

/// `c (2 − S − S†)` with `S` a product of cyclic digit shifts on a register.
///
/// `(S x)[k] = x[k − δ]`, i.e. `S|k⟩ = |k + δ⟩` on every listed subsystem.
#[derive(Clone, Debug)]
pub struct ShiftTerm {
    layout: Arc<RegisterLayout>,
    coeff: f64,
    /// `i -> index shifted by −δ` and `+δ`
    back: Arc<Vec<u32>>,
    fwd: Arc<Vec<u32>>,
}

impl ShiftTerm {
    pub fn new(layout: Arc<RegisterLayout>, shifts: Vec<(usize, isize)>, coeff: f64) -> Self {
        assert!(layout.dim() <= u32::MAX as usize, "register too large for shift tables");
        let table = |sign: isize| -> Arc<Vec<u32>> {
            Arc::new((0..layout.dim()).map(|i| shifted(&layout, &shifts, i, sign) as u32).collect())
        };
        let (back, fwd) = (table(-1), table(1));
        ShiftTerm { layout, coeff, back, fwd }
    }
}

fn shifted(layout: &RegisterLayout, shifts: &[(usize, isize)], i: usize, sign: isize) -> usize {
    let mut j = i;
    for &(s, delta) in shifts {
        let r = layout.radix(s) as isize;
        let k = layout.digit(i, s) as isize;
        let nk = (k + sign * delta).rem_euclid(r);
        j = (j as isize + (nk - k) * layout.stride(s) as isize) as usize;
    }
    j
}

impl LinearOperator for ShiftTerm {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        let c = self.coeff;
        for (i, (yi, (&b, &f))) in y.iter_mut().zip(self.back.iter().zip(self.fwd.iter())).enumerate() {
            *yi += (x[i] * 2.0 - x[b as usize] - x[f as usize]) * c;
        }
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        self.apply_add(x, y)
    }
}

/// Real diagonal operator given by a table over the joint index of `subs`.
#[derive(Clone, Debug)]
pub struct DiagonalTerm {
    layout: Arc<RegisterLayout>,
    subs: Vec<usize>,
    table: Vec<f64>,
}

impl DiagonalTerm {
    pub fn new(layout: Arc<RegisterLayout>, subs: Vec<usize>, table: Vec<f64>) -> Self {
        DiagonalTerm { layout, subs, table }
    }

    #[inline]
    fn value(&self, i: usize) -> f64 {
        let mut j = 0;
        for &s in &self.subs {
            j = j * self.layout.radix(s) + self.layout.digit(i, s);
        }
        self.table[j]
    }

    pub fn add_to(&self, diag: &mut [f64]) {
        for (i, d) in diag.iter_mut().enumerate() {
            *d += self.value(i);
        }
    }
}

impl LinearOperator for DiagonalTerm {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..self.dim() {
            y[i] += x[i] * self.value(i);
        }
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        self.apply_add(x, y)
    }
}

/// Precomputed diagonal plus a list of shift terms; the fused AHM operator.
struct FusedOperator {
    diag: Vec<f64>,
    shifts: Vec<ShiftTerm>,
}

impl LinearOperator for FusedOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..self.diag.len() {
            y[i] += x[i] * self.diag[i];
        }
        for s in &self.shifts {
            s.apply_add(x, y);
        }
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        self.apply_add(x, y)
    }
}

pub struct Term {
    pub label: String,
    pub op: Box<dyn LinearOperator>,
}

/// Hermitian operator as a labelled sum of terms.
pub struct Hamiltonian {
    dim: usize,
    pub terms: Vec<Term>,
    fused: Option<Box<dyn LinearOperator>>,
}

impl Hamiltonian {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self> {
        if terms.iter().any(|t| t.op.dim() != dim) {
            return invalid("term dimension mismatch");
        }
        Ok(Hamiltonian { dim, terms, fused: None })
    }

    /// Replaces the term-by-term sum with an equivalent faster operator.
    pub fn with_fused(mut self, op: Box<dyn LinearOperator>) -> Result<Self> {
        if op.dim() != self.dim {
            return invalid("fused operator dimension mismatch");
        }
        self.fused = Some(op);
        Ok(self)
    }

    pub fn term(&self, label: &str) -> Option<&dyn LinearOperator> {
        self.terms.iter().find(|t| t.label == label).map(|t| t.op.as_ref())
    }

    pub fn labels(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.label.as_str()).collect()
    }

    /// `⟨ψ|T|ψ⟩` for every term, in term order (real parts).
    pub fn term_energies(&self, psi: &[C64]) -> Vec<(String, f64)> {
        self.terms
            .iter()
            .map(|t| {
                let y = t.op.apply(psi);
                (t.label.clone(), vdot(psi, &y).re)
            })
            .collect()
    }

    pub fn energy(&self, psi: &[C64]) -> f64 {
        vdot(psi, &self.apply(psi)).re
    }

    /// `⟨H²⟩ − ⟨H⟩²` for normalized input.
    pub fn variance(&self, psi: &[C64]) -> f64 {
        let h = self.apply(psi);
        let e = vdot(psi, &h).re;
        vdot(&h, &h).re - e * e
    }

    /// Sum of the terms whose label starts with `prefix`.
    pub fn partial_energy(&self, psi: &[C64], prefix: &str) -> f64 {
        self.term_energies(psi).into_iter().filter(|(l, _)| l.starts_with(prefix)).map(|(_, e)| e).sum()
    }
}

impl LinearOperator for Hamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        match &self.fused {
            Some(f) => f.apply_add(x, y),
            None => self.terms.iter().for_each(|t| t.op.apply_add(x, y)),
        }
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        self.apply_add(x, y)
    }
}

/// Couplings of the dual Abelian-Higgs model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AhmCouplings {
    pub lambda_e: f64,
    pub lambda_b: f64,
    pub lambda_m: f64,
    pub lambda_j: f64,
}

/// `d²/(2π²)`, the prefactor of the digitized electric and star terms.
pub fn zd_prefactor(d: usize) -> f64 {
    (d * d) as f64 / (2.0 * PI * PI)
}

/// Dual Abelian-Higgs Hamiltonian on a periodic 2D lattice in the group basis.
///
/// Terms, with zero-point constants removed so that the all-zero electric
/// configuration has zero electric and star energy:
/// `E[l]  = λ_E d²/(2π²) (2 − P − P†)`,
/// `B[p]  = λ_B (Q1 Q2 Q3† Q4† + h.c.)`,
/// `M[l]  = λ_M (Q + Q†)`,
/// `J[s]  = λ_J d²/(2π²) (2 − S − S†)`, `S = P_out P_out P_in† P_in†`.
pub fn build_ahm(lattice: &LatticeSpec, d: usize, c: AhmCouplings) -> Result<Hamiltonian> {
    if d < 2 {
        return invalid("AHM needs d >= 2");
    }
    if lattice.dim != 2 || !lattice.periodic {
        return invalid("AHM is defined on periodic 2D lattices");
    }
    let layout = Arc::new(RegisterLayout::gauge(lattice.num_links(), d)?);
    let pref = zd_prefactor(d);
    let cosk = |k: isize| (2.0 * PI * k as f64 / d as f64).cos();
    let mut terms = Vec::new();
    let mut shifts = Vec::new();
    let mut diag = vec![0.0; layout.dim()];
    for l in 0..lattice.num_links() {
        let t = ShiftTerm::new(layout.clone(), vec![(l, 1)], c.lambda_e * pref);
        shifts.push(t.clone());
        terms.push(Term { label: format!("E[l{l}]"), op: Box::new(t) });
    }
    for (p, plaq) in lattice.plaquettes.iter().enumerate() {
        let mut table = Vec::with_capacity(d.pow(4));
        for j in 0..d.pow(4) {
            let k = [j / d.pow(3), (j / d.pow(2)) % d, (j / d) % d, j % d];
            let arg: isize = (0..4).map(|i| if plaq.dagger[i] { -(k[i] as isize) } else { k[i] as isize }).sum();
            table.push(2.0 * c.lambda_b * cosk(arg));
        }
        let t = DiagonalTerm::new(layout.clone(), plaq.links.to_vec(), table);
        t.add_to(&mut diag);
        terms.push(Term { label: format!("B[p{p}]"), op: Box::new(t) });
    }
    for l in 0..lattice.num_links() {
        let table = (0..d).map(|k| 2.0 * c.lambda_m * cosk(k as isize)).collect();
        let t = DiagonalTerm::new(layout.clone(), vec![l], table);
        t.add_to(&mut diag);
        terms.push(Term { label: format!("M[l{l}]"), op: Box::new(t) });
    }
    for (s, star) in lattice.stars.iter().enumerate() {
        let sh = star.links.iter().zip(&star.outgoing).map(|(&l, &o)| (l, if o { 1 } else { -1 })).collect();
        let t = ShiftTerm::new(layout.clone(), sh, c.lambda_j * pref);
        shifts.push(t.clone());
        terms.push(Term { label: format!("J[s{s}]"), op: Box::new(t) });
    }
    let dim = layout.dim();
    Hamiltonian::new(dim, terms)?.with_fused(Box::new(FusedOperator { diag, shifts }))
}

/// Ordered subset of a parent register's flat indices.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    pub parent: Arc<RegisterLayout>,
    pub indices: Vec<usize>,
}

impl SectorBasis {
    pub fn new(parent: Arc<RegisterLayout>, indices: Vec<usize>) -> Result<Self> {
        if indices.iter().any(|&i| i >= parent.dim()) {
            return invalid("sector index out of range");
        }
        Ok(SectorBasis { parent, indices })
    }

    /// All parent indices whose digits satisfy `keep`.
    pub fn filter(parent: Arc<RegisterLayout>, keep: impl Fn(&[usize]) -> bool) -> Self {
        let indices = (0..parent.dim()).filter(|&i| keep(&parent.digits(i))).collect();
        SectorBasis { parent, indices }
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn restrict(&self, full: &[C64]) -> Vec<C64> {
        self.indices.iter().map(|&i| full[i]).collect()
    }

    pub fn embed(&self, sector: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.parent.dim()];
        for (&i, &v) in self.indices.iter().zip(sector) {
            out[i] = v;
        }
        out
    }
}

/// Parameters of the `Q8` staggered-fermion chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainParams {
    pub n_sites: usize,
    pub mu: f64,
    pub x: f64,
}

/// Number of retained irrep rows per `Q8` link (`j = 0` and the four `j = 1/2` states).
pub const CHAIN_LINK_STATES: usize = 5;

/// Bond sign `s_n`: −1 on the wrap-around bond `(N−1, 0)`, +1 otherwise.
pub fn chain_bond_sign(n_sites: usize, bond: usize) -> f64 {
    if bond + 1 == n_sites {
        -1.0
    } else {
        1.0
    }
}

/// Link operator `U_{αβ}` in the truncated irrep basis (5×5).
pub fn truncated_link_operator(g: &GroupTable, alpha: usize, beta: usize) -> Result<CMat> {
    let basis = group_fourier(g)?;
    let diag: Vec<C64> = (0..g.order()).map(|el| g.rep(el)[(alpha, beta)]).collect();
    let full = basis.fourier.matmul(&CMat::diag(&diag)).matmul(&basis.fourier.adjoint());
    let keep: Vec<usize> = (0..CHAIN_LINK_STATES).collect();
    Ok(full.select(&keep, &keep))
}

/// Truncated chain layout: `N` radix-5 links, then `2N` modes.
pub fn chain_sector_layout(n_sites: usize) -> Result<Arc<RegisterLayout>> {
    Ok(Arc::new(RegisterLayout::gauge_fermion(n_sites, CHAIN_LINK_STATES, n_sites, 2)?))
}

/// Full chain register in either basis: `N` radix-8 links, then `2N` modes.
pub fn chain_full_layout(n_sites: usize) -> Result<Arc<RegisterLayout>> {
    Ok(Arc::new(RegisterLayout::gauge_fermion(n_sites, 8, n_sites, 2)?))
}

/// `ψ†_a ψ_b |flat⟩` on a register: `(new flat, JW sign)` or `None` if it vanishes.
pub fn hop_action(layout: &RegisterLayout, flat: usize, a: usize, b: usize) -> Option<(usize, f64)> {
    let sign_before = |f: usize, k: usize| -> f64 {
        let n: usize = (0..k).filter(|&j| layout.is_mode(j)).map(|j| layout.digit(f, j)).sum();
        if n % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    };
    if layout.digit(flat, b) == 0 {
        return None;
    }
    let s1 = sign_before(flat, b);
    let f1 = flat - layout.stride(b);
    if layout.digit(f1, a) == 1 {
        return None;
    }
    let s2 = sign_before(f1, a);
    Some((f1 + layout.stride(a), s1 * s2))
}

/// Hamiltonian of the `Q8` chain on the truncated sector.
///
/// Terms: `E2[l n]` (`E²` on link n), `mass[n k]` (`μ(−1)^n ψ†_n ψ_n`),
/// `hop[b n]` (`−i x s_n Σ_{αβ} (ψ†_{n,α} U_{αβ} ψ_{n+1,β} − h.c.)`).
/// The sector is the set of full irrep-basis indices with every link row < 5.
pub fn build_chain(p: ChainParams) -> Result<(Hamiltonian, SectorBasis)> {
    let n = p.n_sites;
    if n < 2 || n % 2 == 1 {
        return invalid(format!("chain needs an even number of sites >= 2, got {n}"));
    }
    let layout = chain_sector_layout(n)?;
    let dim = layout.dim();
    let g = quaternion_group();
    let mut terms = Vec::new();
    let mut all: Vec<SparseOperator> = Vec::new();
    for l in 0..n {
        let vals: Vec<C64> =
            (0..dim).map(|i| C64::new(if layout.digit(i, l) == 0 { 0.0 } else { 0.75 }, 0.0)).collect();
        let op = SparseOperator::diagonal(&vals);
        all.push(op.clone());
        terms.push((format!("E2[l{l}]"), op));
    }
    for site in 0..n {
        let sgn = if site % 2 == 0 { 1.0 } else { -1.0 };
        let modes = layout.modes[site].clone();
        let vals: Vec<C64> = (0..dim)
            .map(|i| C64::new(p.mu * sgn * modes.iter().map(|&m| layout.digit(i, m)).sum::<usize>() as f64, 0.0))
            .collect();
        let op = SparseOperator::diagonal(&vals);
        all.push(op.clone());
        terms.push((format!("mass[n{site}]"), op));
    }
    let link_ops: Vec<Vec<CMat>> =
        (0..2).map(|a| (0..2).map(|b| truncated_link_operator(&g, a, b)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    for bond in 0..n {
        let next = (bond + 1) % n;
        let coeff = C64::new(0.0, -p.x * chain_bond_sign(n, bond));
        let lstride = layout.stride(bond);
        let mut trip = Vec::new();
        for col in 0..dim {
            let r = layout.digit(col, bond);
            for (alpha, ops_a) in link_ops.iter().enumerate() {
                for (beta, u) in ops_a.iter().enumerate() {
                    let a = layout.modes[bond][alpha];
                    let b = layout.modes[next][beta];
                    if let Some((f, s)) = hop_action(&layout, col, a, b) {
                        let base = f - r * lstride;
                        for rp in 0..CHAIN_LINK_STATES {
                            let v = u[(rp, r)];
                            if v.norm() < 1e-15 {
                                continue;
                            }
                            let w = coeff * v * s;
                            let row = base + rp * lstride;
                            trip.push((row, col, w));
                            trip.push((col, row, w.conj()));
                        }
                    }
                }
            }
        }
        let op = SparseOperator::from_triplets(dim, trip)?;
        all.push(op.clone());
        terms.push((format!("hop[b{bond}]"), op));
    }
    let refs: Vec<&SparseOperator> = all.iter().collect();
    let total = SparseOperator::sum(dim, &refs)?;
    let terms = terms.into_iter().map(|(label, op)| Term { label, op: Box::new(op) as Box<dyn LinearOperator> }).collect();
    let h = Hamiltonian::new(dim, terms)?.with_fused(Box::new(total))?;
    let parent = chain_full_layout(n)?;
    let sector = SectorBasis::filter(parent, |d| d[..n].iter().all(|&r| r < CHAIN_LINK_STATES));
    Ok((h, sector))
}

/// Group-basis chain state -> truncated sector vector (Fourier on every link, then restrict).
pub fn chain_to_sector(state: &StateVector, sector: &SectorBasis) -> Result<Vec<C64>> {
    let n = state.layout().links.len();
    let g = quaternion_group();
    let f = group_fourier(&g)?.fourier;
    let mut s = state.clone();
    for l in 0..n {
        apply_kernel(&mut s, &Kernel::Single { target: l, matrix: f.clone() })?;
    }
    Ok(sector.restrict(&s.amps))
}

/// Truncated sector vector -> group-basis chain state.
pub fn chain_from_sector(vec: &[C64], sector: &SectorBasis) -> Result<StateVector> {
    let n = sector.parent.links.len();
    let g = quaternion_group();
    let fd = group_fourier(&g)?.fourier.adjoint();
    let mut s = StateVector::from_amplitudes(sector.parent.clone(), sector.embed(vec))?;
    for l in 0..n {
        apply_kernel(&mut s, &Kernel::Single { target: l, matrix: fd.clone() })?;
    }
    Ok(s)
}

/// Local gauge transformation data for one site.
#[derive(Clone, Debug, Default)]
pub struct GaugeSite {
    /// Subsystems transformed as `g -> h g` (out-links, site qudit).
    pub left: Vec<usize>,
    /// Subsystems transformed as `g -> g h⁻¹` (in-links).
    pub right: Vec<usize>,
    /// Fermion modes rotated by `D(h)`.
    pub modes: Vec<usize>,
}

/// Gauss-law generators `V_{x,h}` of a model on a fixed register.
#[derive(Clone, Debug)]
pub struct GaussLaw {
    pub group: GroupTable,
    pub layout: Arc<RegisterLayout>,
    pub sites: Vec<GaugeSite>,
}

impl GaussLaw {
    /// Links only, or links plus site qudits when the layout has them.
    pub fn for_lattice(lattice: &LatticeSpec, layout: Arc<RegisterLayout>, group: GroupTable) -> Result<Self> {
        if layout.links.len() != lattice.num_links() {
            return invalid("layout does not match lattice link count");
        }
        let sites = lattice
            .stars
            .iter()
            .map(|st| {
                let mut left: Vec<usize> = st.out_links().map(|l| layout.links[l]).collect();
                if let Some(&q) = layout.site_qudits.get(st.site) {
                    left.push(q);
                }
                let right = st.in_links().map(|l| layout.links[l]).collect();
                let modes = layout.modes.get(st.site).cloned().unwrap_or_default();
                GaugeSite { left, right, modes }
            })
            .collect();
        Ok(GaussLaw { group, layout, sites })
    }

    /// Kernels realizing `V_{x,h}`.
    pub fn kernels(&self, site: usize, h: usize) -> Result<Vec<Kernel>> {
        let gs = self.sites.get(site).ok_or_else(|| Error::InvalidParameter(format!("no site {site}")))?;
        let g = &self.group;
        let hinv = g.invert(h)?;
        let mut out = Vec::new();
        for &q in &gs.left {
            out.push(Kernel::Permutation { target: q, control: None, perms: vec![g.left_perm(h)] });
        }
        for &q in &gs.right {
            out.push(Kernel::Permutation { target: q, control: None, perms: vec![g.right_perm(hinv)] });
        }
        if !gs.modes.is_empty() {
            if gs.modes.len() != g.rep_dim() {
                return invalid("mode count does not match representation dimension");
            }
            let w = crate::linalg::expm_antihermitian(&crate::linalg::log_unitary(g.rep(h))?)?;
            out.push(Kernel::Fermion { modes: gs.modes.clone(), control: None, ws: vec![w] });
        }
        Ok(out)
    }

    pub fn apply_v(&self, state: &mut StateVector, site: usize, h: usize) -> Result<()> {
        for k in self.kernels(site, h)? {
            apply_kernel(state, &k)?;
        }
        Ok(())
    }

    /// `P = ∏_x (1/|G|) Σ_h V_{x,h}` applied to a state.
    pub fn project(&self, state: &StateVector) -> Result<StateVector> {
        let mut cur = state.clone();
        let inv = 1.0 / self.group.order() as f64;
        for site in 0..self.sites.len() {
            let mut acc = StateVector::zeros(cur.layout_arc());
            for h in 0..self.group.order() {
                let mut t = cur.clone();
                self.apply_v(&mut t, site, h)?;
                axpy(C64::new(inv, 0.0), &t.amps, &mut acc.amps);
            }
            cur = acc;
        }
        Ok(cur)
    }

    /// One `V_{x,h}` as a linear operator.
    pub fn operator(&self, site: usize, h: usize) -> Result<GaugeOperator<'_>> {
        if site >= self.sites.len() || h >= self.group.order() {
            return invalid("gauge operator index out of range");
        }
        Ok(GaugeOperator { law: self, site, h })
    }

    pub fn projector(&self) -> GaussProjector<'_> {
        GaussProjector { law: self }
    }
}

pub struct GaugeOperator<'a> {
    law: &'a GaussLaw,
    site: usize,
    h: usize,
}

impl LinearOperator for GaugeOperator<'_> {
    fn dim(&self) -> usize {
        self.law.layout.dim()
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        let mut s = StateVector::from_amplitudes(self.law.layout.clone(), x.to_vec()).expect("dimension checked");
        self.law.apply_v(&mut s, self.site, self.h).expect("kernels validated at construction");
        axpy(C64::new(1.0, 0.0), &s.amps, y);
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        let hinv = self.law.group.inv_unchecked(self.h);
        GaugeOperator { law: self.law, site: self.site, h: hinv }.apply_add(x, y)
    }
}

pub struct GaussProjector<'a> {
    law: &'a GaussLaw,
}

impl LinearOperator for GaussProjector<'_> {
    fn dim(&self) -> usize {
        self.law.layout.dim()
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        let s = StateVector::from_amplitudes(self.law.layout.clone(), x.to_vec()).expect("dimension checked");
        let p = self.law.project(&s).expect("kernels validated at construction");
        axpy(C64::new(1.0, 0.0), &p.amps, y);
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        self.apply_add(x, y)
    }
}

/// Gauss law of the `Q8` chain on the full group-basis register.
pub fn chain_gauss_law(n_sites: usize) -> Result<GaussLaw> {
    let lattice = crate::lattice::build_lattice(1, &[n_sites], true)?;
    GaussLaw::for_lattice(&lattice, chain_full_layout(n_sites)?, quaternion_group())
}

/// Gauss projector transported to the truncated chain sector.
pub struct ChainSectorProjector {
    law: GaussLaw,
    sector: SectorBasis,
}

impl ChainSectorProjector {
    pub fn new(n_sites: usize, sector: SectorBasis) -> Result<Self> {
        Ok(ChainSectorProjector { law: chain_gauss_law(n_sites)?, sector })
    }
}

impl LinearOperator for ChainSectorProjector {
    fn dim(&self) -> usize {
        self.sector.dim()
    }

    fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        let s = chain_from_sector(x, &self.sector).expect("sector layout");
        let p = self.law.project(&s).expect("kernels validated");
        let r = chain_to_sector(&p, &self.sector).expect("sector layout");
        axpy(C64::new(1.0, 0.0), &r, y);
    }

    fn apply_adjoint_add(&self, x: &[C64], y: &mut [C64]) {
        self.apply_add(x, y)
    }
}

/// Model families with a Gauss law.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeModel {
    /// Links only on the given lattice.
    PureGauge(GroupKind),
    /// Links plus one matter qudit per site.
    Higgs(GroupKind),
    /// `Q8` links plus two fermion modes per site on a periodic chain.
    Chain,
}

/// Gauss law for a model instance; the register is built to match.
pub fn gauss_law(model: GaugeModel, lattice: &LatticeSpec) -> Result<GaussLaw> {
    match model {
        GaugeModel::PureGauge(kind) => {
            let g = GroupTable::new(kind)?;
            let layout = Arc::new(RegisterLayout::gauge(lattice.num_links(), g.order())?);
            GaussLaw::for_lattice(lattice, layout, g)
        }
        GaugeModel::Higgs(kind) => {
            let g = GroupTable::new(kind)?;
            let layout = Arc::new(RegisterLayout::gauge_higgs(lattice.num_links(), lattice.num_sites(), g.order())?);
            GaussLaw::for_lattice(lattice, layout, g)
        }
        GaugeModel::Chain => {
            if lattice.dim != 1 || !lattice.periodic {
                return invalid("chain Gauss law needs a periodic 1D lattice");
            }
            chain_gauss_law(lattice.num_sites())
        }
    }
}

/// Krylov settings for [`exact_evolve`].
#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    pub max_dim: usize,
    pub tol: f64,
    pub max_substeps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { max_dim: 30, tol: 1e-10, max_substeps: 100_000 }
    }
}

struct LanczosBasis {
    q: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// norm of the residual after the last vector; 0 on invariant subspaces
    tail: f64,
}

fn lanczos(h: &dyn LinearOperator, v0: &[C64], m: usize) -> LanczosBasis {
    let b0 = norm(v0);
    let mut q = vec![v0.iter().map(|x| x / b0).collect::<Vec<C64>>()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut tail = 0.0;
    for j in 0..m {
        let mut w = h.apply(&q[j]);
        let a = vdot(&q[j], &w).re;
        alpha.push(a);
        axpy(C64::new(-a, 0.0), &q[j], &mut w);
        if j > 0 {
            axpy(C64::new(-beta[j - 1], 0.0), &q[j - 1], &mut w);
        }
        for qi in &q {
            let c = vdot(qi, &w);
            axpy(-c, qi, &mut w);
        }
        let b = norm(&w);
        if j + 1 == m {
            tail = b;
            break;
        }
        if b < 1e-12 * (1.0 + a.abs()) {
            tail = 0.0;
            break;
        }
        beta.push(b);
        q.push(w.into_iter().map(|x| x / b).collect());
    }
    LanczosBasis { q, alpha, beta, tail }
}

/// `e^{−iHt} ψ` by restarted Lanczos with adaptive substeps.
///
/// The accumulated a-posteriori error bound is kept below `opts.tol`.
pub fn exact_evolve(h: &dyn LinearOperator, psi: &[C64], t: f64, opts: KrylovOptions) -> Result<Vec<C64>> {
    if !t.is_finite() {
        return invalid("evolution time must be finite");
    }
    if psi.len() != h.dim() {
        return invalid("state and operator dimensions differ");
    }
    let mut cur = psi.to_vec();
    if t == 0.0 {
        return Ok(cur);
    }
    let total = t.abs();
    let dir = t.signum();
    let mut done = 0.0;
    let mut tau = total;
    let mut steps = 0;
    while done < total * (1.0 - 1e-15) {
        steps += 1;
        if steps > opts.max_substeps {
            return Err(Error::NumericFailure("Krylov propagation exceeded substep cap".into()));
        }
        let nrm = norm(&cur);
        if nrm == 0.0 {
            return Ok(cur);
        }
        let m = opts.max_dim.min(h.dim()).max(1);
        let basis = lanczos(h, &cur, m);
        let k = basis.alpha.len();
        let (w, vecs) = tridiag_eig(&basis.alpha, &basis.beta)?;
        let coeffs = |tau: f64| -> Vec<C64> {
            (0..k)
                .map(|i| {
                    (0..k)
                        .map(|e| C64::from_polar(vecs[e][0] * vecs[e][i], -dir * w[e] * tau))
                        .sum::<C64>()
                })
                .collect()
        };
        tau = tau.min(total - done);
        let budget = |tau: f64| opts.tol * tau / total;
        let mut c = coeffs(tau);
        let mut tries = 0;
        while basis.tail * c[k - 1].norm() * nrm > budget(tau) {
            tau *= 0.5;
            c = coeffs(tau);
            tries += 1;
            if tries > 60 {
                return Err(Error::NumericFailure("Krylov step size underflow".into()));
            }
        }
        let mut next = vec![ZERO; cur.len()];
        for (ci, qi) in c.iter().zip(&basis.q) {
            axpy(ci * nrm, qi, &mut next);
        }
        cur = next;
        done += tau;
        if tries == 0 {
            tau *= 1.5;
        }
    }
    Ok(cur)
}

/// `H` restricted to the smallest invariant subspace containing a start vector.
///
/// Evolution inside it is exact up to the Lanczos breakdown tolerance.
pub struct InvariantSubspace {
    q: Vec<Vec<C64>>,
    energies: Vec<f64>,
    /// eigenvectors in Lanczos coordinates, `vecs[e][i]`
    vecs: Vec<Vec<f64>>,
    norm0: f64,
}

impl InvariantSubspace {
    /// `None` if the subspace is larger than `max_dim`.
    pub fn find(h: &dyn LinearOperator, v: &[C64], max_dim: usize) -> Result<Option<Self>> {
        if v.len() != h.dim() {
            return invalid("state and operator dimensions differ");
        }
        let norm0 = norm(v);
        if norm0 == 0.0 {
            return invalid("invariant subspace of the zero vector");
        }
        let m = (max_dim + 1).min(h.dim());
        let basis = lanczos(h, v, m);
        if basis.tail != 0.0 || basis.alpha.len() > max_dim {
            return Ok(None);
        }
        let (energies, vecs) = tridiag_eig(&basis.alpha, &basis.beta)?;
        Ok(Some(InvariantSubspace { q: basis.q, energies, vecs, norm0 }))
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn basis(&self) -> &[Vec<C64>] {
        &self.q
    }

    /// Lanczos coordinates of `e^{−iHt} v`; exactly `‖v‖ e₀` at `t = 0`.
    pub fn coefficients(&self, t: f64) -> Vec<C64> {
        let k = self.dim();
        if t == 0.0 {
            let mut c = vec![ZERO; k];
            c[0] = C64::new(self.norm0, 0.0);
            return c;
        }
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|e| C64::from_polar(self.norm0 * self.vecs[e][0] * self.vecs[e][i], -self.energies[e] * t))
                    .sum::<C64>()
            })
            .collect()
    }

    pub fn evolve(&self, t: f64) -> Vec<C64> {
        let mut out = vec![ZERO; self.q[0].len()];
        for (c, qi) in self.coefficients(t).iter().zip(&self.q) {
            axpy(*c, qi, &mut out);
        }
        out
    }
}

/// Evolves through increasing `times`, calling `observe(t, ψ(t))` at each.
///
/// One Lanczos basis serves every sample it reaches within the error budget,
/// which is shared out in proportion to elapsed time as in [`exact_evolve`].
pub fn evolve_samples(
    h: &dyn LinearOperator,
    psi: &[C64],
    times: &[f64],
    opts: KrylovOptions,
    mut observe: impl FnMut(f64, &[C64]),
) -> Result<Vec<C64>> {
    if psi.len() != h.dim() {
        return invalid("state and operator dimensions differ");
    }
    if times.iter().any(|t| !t.is_finite()) || times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return invalid("sample times must be non-decreasing and start at >= 0");
    }
    let total = times.last().copied().unwrap_or(0.0);
    let mut cur = psi.to_vec();
    let mut now = 0.0;
    let mut idx = 0;
    let mut builds = 0;
    while idx < times.len() {
        if times[idx] - now <= total * 1e-15 {
            observe(times[idx], &cur);
            idx += 1;
            continue;
        }
        builds += 1;
        if builds > opts.max_substeps {
            return Err(Error::NumericFailure("Krylov propagation exceeded substep cap".into()));
        }
        let nrm = norm(&cur);
        if nrm == 0.0 {
            observe(times[idx], &cur);
            idx += 1;
            continue;
        }
        let m = opts.max_dim.min(h.dim()).max(1);
        let basis = lanczos(h, &cur, m);
        let k = basis.alpha.len();
        let (w, vecs) = tridiag_eig(&basis.alpha, &basis.beta)?;
        let coeffs = |tau: f64| -> Vec<C64> {
            (0..k).map(|i| (0..k).map(|e| C64::from_polar(vecs[e][0] * vecs[e][i], -w[e] * tau)).sum::<C64>()).collect()
        };
        let ok = |c: &[C64], tau: f64| basis.tail * c[k - 1].norm() * nrm <= opts.tol * tau / total;
        let combine = |c: &[C64]| {
            let mut v = vec![ZERO; cur.len()];
            for (ci, qi) in c.iter().zip(&basis.q) {
                axpy(ci * nrm, qi, &mut v);
            }
            v
        };
        let mut last: Option<(f64, Vec<C64>)> = None;
        while idx < times.len() {
            let tau = times[idx] - now;
            let c = coeffs(tau);
            if !ok(&c, tau) {
                break;
            }
            let v = combine(&c);
            observe(times[idx], &v);
            last = Some((tau, v));
            idx += 1;
        }
        match last {
            Some((tau, v)) => {
                now += tau;
                cur = v;
            }
            None => {
                let mut tau = times[idx] - now;
                let mut c = coeffs(tau);
                let mut tries = 0;
                while !ok(&c, tau) {
                    tau *= 0.5;
                    c = coeffs(tau);
                    tries += 1;
                    if tries > 60 {
                        return Err(Error::NumericFailure("Krylov step size underflow".into()));
                    }
                }
                cur = combine(&c);
                now += tau;
            }
        }
    }
    Ok(cur)
}

/// Lowest eigenpair reachable from `start` (thus within its symmetry sector).
///
/// Restarted Lanczos; the returned vector is normalized with its largest
/// amplitude (first such index) made real and positive.
pub fn ground_state(h: &dyn LinearOperator, start: &[C64], tol: f64) -> Result<(f64, Vec<C64>)> {
    if start.len() != h.dim() || norm(start) == 0.0 {
        return invalid("ground_state needs a nonzero start vector of matching dimension");
    }
    let mut v: Vec<C64> = start.to_vec();
    let m = 80.min(h.dim());
    let mut energy = f64::NAN;
    for _restart in 0..200 {
        let basis = lanczos(h, &v, m);
        let (w, vecs) = tridiag_eig(&basis.alpha, &basis.beta)?;
        let y = &vecs[0];
        let mut ritz = vec![ZERO; h.dim()];
        for (yi, qi) in y.iter().zip(&basis.q) {
            axpy(C64::new(*yi, 0.0), qi, &mut ritz);
        }
        let n = norm(&ritz);
        ritz.iter_mut().for_each(|a| *a /= n);
        energy = w[0];
        let hv = h.apply(&ritz);
        let mut r = hv.clone();
        axpy(C64::new(-energy, 0.0), &ritz, &mut r);
        v = ritz;
        if norm(&r) < tol {
            fix_phase(&mut v);
            return Ok((energy, v));
        }
    }
    Err(Error::NumericFailure(format!("Lanczos ground state did not converge (last energy {energy})")))
}

/// Makes the first largest-magnitude amplitude real and positive.
pub fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = *v.iter().find(|a| a.norm() >= max * (1.0 - 1e-9)).unwrap();
    let ph = pivot.conj() / pivot.norm();
    v.iter_mut().for_each(|a| *a *= ph);
}

/// Estimate of `‖A B − B A‖₂` by power iteration on `C†C`.
pub fn commutator_norm(a: &dyn LinearOperator, b: &dyn LinearOperator, iters: usize, seed: u64) -> Result<f64> {
    if a.dim() != b.dim() {
        return invalid("commutator of operators with different dimensions");
    }
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let apply_c = |x: &[C64]| -> Vec<C64> {
        let mut ab = a.apply(&b.apply(x));
        let ba = b.apply(&a.apply(x));
        axpy(C64::new(-1.0, 0.0), &ba, &mut ab);
        ab
    };
    let apply_ct = |x: &[C64]| -> Vec<C64> {
        let mut y1 = vec![ZERO; n];
        let mut t = vec![ZERO; n];
        a.apply_adjoint_add(x, &mut t);
        b.apply_adjoint_add(&t, &mut y1);
        let mut y2 = vec![ZERO; n];
        let mut t2 = vec![ZERO; n];
        b.apply_adjoint_add(x, &mut t2);
        a.apply_adjoint_add(&t2, &mut y2);
        axpy(C64::new(-1.0, 0.0), &y1, &mut y2);
        y2
    };
    let mut est: f64 = 0.0;
    for _ in 0..iters {
        let cv = apply_c(&v);
        let s = norm(&cv);
        est = est.max(s);
        if s == 0.0 {
            break;
        }
        let w = apply_ct(&cv);
        let nw = norm(&w);
        if nw == 0.0 {
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Ok(est)
}

/// Dense `e^{−iHt}` of a small operator, for cross-checks.
pub fn dense_propagator(h: &dyn LinearOperator, t: f64) -> Result<CMat> {
    crate::linalg::expm_hermitian(&to_dense(h), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn sparse_roundtrip_and_adjoint() {
        let t = vec![(0, 1, C64::new(1.0, 2.0)), (1, 0, C64::new(1.0, -2.0)), (0, 1, C64::new(0.5, 0.0))];
        let s = SparseOperator::from_triplets(2, t).unwrap();
        assert_eq!(s.nnz(), 2);
        assert!(s.hermiticity_error() > 0.4);
        let y = s.apply(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        assert!((y[0] - C64::new(1.5, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn ahm_dimension_and_flux_eigenstate() {
        let lat = build_lattice(2, &[2, 2], true).unwrap();
        let c = AhmCouplings { lambda_e: 4.0 * PI / 9.0, lambda_b: 0.0, lambda_m: 0.0, lambda_j: 0.0 };
        let h = build_ahm(&lat, 3, c).unwrap();
        assert_eq!(h.dim(), 6561);
        // electric ground state: uniform superposition on every link
        let psi: Vec<C64> = vec![C64::new(1.0 / 81.0, 0.0); 6561];
        assert!(h.energy(&psi).abs() < 1e-12);
        assert!(h.variance(&psi).abs() < 1e-12);
    }

    #[test]
    fn krylov_matches_dense_on_small_ahm() {
        let lat = build_lattice(2, &[2, 2], true).unwrap();
        let c = AhmCouplings { lambda_e: 0.7, lambda_b: 0.4, lambda_m: 0.3, lambda_j: 0.2 };
        let h = build_ahm(&lat, 2, c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut psi: Vec<C64> = (0..h.dim()).map(|_| C64::new(rng.gen(), rng.gen())).collect();
        let n = norm(&psi);
        psi.iter_mut().for_each(|x| *x /= n);
        let u = dense_propagator(&h, 0.9).unwrap();
        let want = u.matvec(&psi);
        let got = exact_evolve(&h, &psi, 0.9, KrylovOptions { tol: 1e-11, ..Default::default() }).unwrap();
        let err = want.iter().zip(&got).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
    }
}
