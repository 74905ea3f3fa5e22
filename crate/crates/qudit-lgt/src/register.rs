//! Hybrid qudit/fermion register and in-place gate kernels.
//!
//! Flat indices are row-major: subsystem 0 is the most significant digit.
//! Fermionic modes are Jordan-Wigner ordered by subsystem index, so
//! `ψ†_k = (∏_{j<k} (-1)^{n_j}) σ⁺_k` with the product over mode subsystems only.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{expm_antihermitian, CMat};
use crate::oracle::LinearOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    Qudit(usize),
    Mode,
}

impl Subsystem {
    pub fn radix(&self) -> usize {
        match *self {
            Subsystem::Qudit(d) => d,
            Subsystem::Mode => 2,
        }
    }
}

/// Ordered subsystems plus the lattice role map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    subsystems: Vec<Subsystem>,
    strides: Vec<usize>,
    dim: usize,
    /// link -> subsystem
    pub links: Vec<usize>,
    /// site -> subsystem of the site qudit
    pub site_qudits: Vec<usize>,
    /// site -> component -> subsystem
    pub modes: Vec<Vec<usize>>,
}

impl RegisterLayout {
    pub fn new(subsystems: Vec<Subsystem>) -> Result<Self> {
        if subsystems.is_empty() {
            return invalid("register needs at least one subsystem");
        }
        if subsystems.iter().any(|s| s.radix() < 2) {
            return invalid("qudit radix must be >= 2");
        }
        let mut strides = vec![1usize; subsystems.len()];
        let mut dim: usize = 1;
        for i in (0..subsystems.len()).rev() {
            strides[i] = dim;
            dim = dim
                .checked_mul(subsystems[i].radix())
                .ok_or_else(|| crate::Error::InvalidParameter("register dimension overflows".into()))?;
        }
        Ok(RegisterLayout { subsystems, strides, dim, links: Vec::new(), site_qudits: Vec::new(), modes: Vec::new() })
    }

    /// `n_links` gauge qudits of radix `d`.
    pub fn gauge(n_links: usize, d: usize) -> Result<Self> {
        let mut l = Self::new(vec![Subsystem::Qudit(d); n_links])?;
        l.links = (0..n_links).collect();
        Ok(l)
    }

    /// Link qudits followed by one matter qudit per site.
    pub fn gauge_higgs(n_links: usize, n_sites: usize, d: usize) -> Result<Self> {
        let mut l = Self::new(vec![Subsystem::Qudit(d); n_links + n_sites])?;
        l.links = (0..n_links).collect();
        l.site_qudits = (n_links..n_links + n_sites).collect();
        Ok(l)
    }

    /// Link qudits followed by `components` fermion modes per site, site-major.
    pub fn gauge_fermion(n_links: usize, d: usize, n_sites: usize, components: usize) -> Result<Self> {
        let mut subs = vec![Subsystem::Qudit(d); n_links];
        subs.extend(std::iter::repeat(Subsystem::Mode).take(n_sites * components));
        let mut l = Self::new(subs)?;
        l.links = (0..n_links).collect();
        l.modes = (0..n_sites).map(|s| (0..components).map(|a| n_links + s * components + a).collect()).collect();
        Ok(l)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn subsystem(&self, i: usize) -> Subsystem {
        self.subsystems[i]
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn radix(&self, i: usize) -> usize {
        self.subsystems[i].radix()
    }

    pub fn stride(&self, i: usize) -> usize {
        self.strides[i]
    }

    #[inline]
    pub fn digit(&self, flat: usize, i: usize) -> usize {
        (flat / self.strides[i]) % self.subsystems[i].radix()
    }

    pub fn digits(&self, flat: usize) -> Vec<usize> {
        (0..self.len()).map(|i| self.digit(flat, i)).collect()
    }

    pub fn flat_index(&self, assignment: &[usize]) -> Result<usize> {
        if assignment.len() != self.len() {
            return invalid(format!("assignment has {} entries, register has {}", assignment.len(), self.len()));
        }
        let mut idx = 0;
        for (i, &a) in assignment.iter().enumerate() {
            if a >= self.radix(i) {
                return invalid(format!("index {a} out of range for subsystem {i}"));
            }
            idx += a * self.strides[i];
        }
        Ok(idx)
    }

    pub fn is_mode(&self, i: usize) -> bool {
        self.subsystems[i] == Subsystem::Mode
    }

    pub fn mode_subsystems(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_mode(i)).collect()
    }

    fn check_sub(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            invalid(format!("subsystem {i} out of range"))
        }
    }

    /// Flat offsets of every joint configuration of `subs` (row-major in `subs` order).
    pub fn joint_offsets(&self, subs: &[usize]) -> Vec<usize> {
        let mut offs = vec![0usize];
        for &s in subs {
            let r = self.radix(s);
            let st = self.strides[s];
            offs = offs.iter().flat_map(|&o| (0..r).map(move |a| o + a * st)).collect();
        }
        offs
    }

    /// Flat indices with all `zero` digits 0 and every `(sub, value)` in `fixed` set.
    pub fn bases(&self, zero: &[usize], fixed: &[(usize, usize)]) -> Vec<usize> {
        let mut pinned = vec![false; self.len()];
        let mut start = 0usize;
        for &z in zero {
            pinned[z] = true;
        }
        for &(s, v) in fixed {
            pinned[s] = true;
            start += v * self.strides[s];
        }
        let free: Vec<usize> = (0..self.len()).filter(|&i| !pinned[i]).collect();
        self.joint_offsets(&free).into_iter().map(|o| o + start).collect()
    }
}

/// Dense amplitude vector over a layout.
#[derive(Clone, Debug)]
pub struct StateVector {
    layout: Arc<RegisterLayout>,
    pub amps: Vec<C64>,
}

impl StateVector {
    pub fn zeros(layout: Arc<RegisterLayout>) -> Self {
        let n = layout.dim();
        StateVector { layout, amps: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn from_amplitudes(layout: Arc<RegisterLayout>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return invalid(format!("expected {} amplitudes, got {}", layout.dim(), amps.len()));
        }
        Ok(StateVector { layout, amps })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn layout_arc(&self) -> Arc<RegisterLayout> {
        self.layout.clone()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.amps)
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amps.iter_mut().for_each(|a| *a *= inv);
        }
        n
    }

    fn same_layout(&self, other: &StateVector) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout {
            Ok(())
        } else {
            invalid("state layouts differ")
        }
    }
}

pub fn basis_state(layout: Arc<RegisterLayout>, assignment: &[usize]) -> Result<StateVector> {
    let idx = layout.flat_index(assignment)?;
    let mut s = StateVector::zeros(layout);
    s.amps[idx] = C64::new(1.0, 0.0);
    Ok(s)
}

pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    a.same_layout(b)?;
    Ok(crate::linalg::vdot(&a.amps, &b.amps))
}

pub fn expectation(state: &StateVector, op: &dyn LinearOperator) -> Result<C64> {
    if op.dim() != state.dim() {
        return invalid(format!("operator dimension {} != state dimension {}", op.dim(), state.dim()));
    }
    let mut y = vec![C64::new(0.0, 0.0); state.dim()];
    op.apply_add(&state.amps, &mut y);
    Ok(crate::linalg::vdot(&state.amps, &y))
}

/// Executable form of a gate on a fixed layout.
#[derive(Clone, Debug)]
pub enum Kernel {
    /// Dense matrix on one subsystem.
    Single { target: usize, matrix: CMat },
    /// Phase table over the joint index of `targets` (row-major in `targets` order).
    Diagonal { targets: Vec<usize>, table: Vec<C64> },
    /// Basis permutation `|a⟩ -> |perms[c][a]⟩` with `c` the control digit (or 0).
    Permutation { target: usize, control: Option<usize>, perms: Vec<Vec<usize>> },
    /// Number-conserving fermion unitary `exp(Σ M_ab ψ†_a ψ_b)` given by `ws[c] = e^M`.
    Fermion { modes: Vec<usize>, control: Option<usize>, ws: Vec<CMat> },
    /// Inner kernel on the subspace where `control` holds `value`.
    Controlled { control: usize, value: usize, inner: Box<Kernel> },
}

impl Kernel {
    /// Subsystems acted on, controls included.
    pub fn support(&self) -> Vec<usize> {
        match self {
            Kernel::Single { target, .. } => vec![*target],
            Kernel::Diagonal { targets, .. } => targets.clone(),
            Kernel::Permutation { target, control, .. } => {
                let mut v = vec![*target];
                v.extend(control.iter().copied());
                v
            }
            Kernel::Fermion { modes, control, .. } => {
                let mut v = modes.clone();
                v.extend(control.iter().copied());
                v
            }
            Kernel::Controlled { control, inner, .. } => {
                let mut v = inner.support();
                v.push(*control);
                v
            }
        }
    }
}

pub fn apply_kernel(state: &mut StateVector, kernel: &Kernel) -> Result<()> {
    apply_with_controls(state, kernel, &mut Vec::new())
}

fn apply_with_controls(state: &mut StateVector, kernel: &Kernel, controls: &mut Vec<(usize, usize)>) -> Result<()> {
    let layout = state.layout.clone();
    for s in kernel.support() {
        layout.check_sub(s)?;
    }
    match kernel {
        Kernel::Single { target, matrix } => single(state, &layout, *target, matrix, controls),
        Kernel::Diagonal { targets, table } => diagonal(state, &layout, targets, table, controls),
        Kernel::Permutation { target, control, perms } => permutation(state, &layout, *target, *control, perms, controls),
        Kernel::Fermion { modes, control, ws } => fermion(state, &layout, modes, *control, ws, controls),
        Kernel::Controlled { control, value, inner } => {
            if inner.support().contains(control) {
                return invalid("control overlaps the controlled operation");
            }
            if *value >= layout.radix(*control) {
                return invalid("control value out of range");
            }
            controls.push((*control, *value));
            let r = apply_with_controls(state, inner, controls);
            controls.pop();
            r
        }
    }
}

fn single(state: &mut StateVector, layout: &RegisterLayout, t: usize, u: &CMat, controls: &[(usize, usize)]) -> Result<()> {
    let r = layout.radix(t);
    if u.rows() != r || u.cols() != r {
        return invalid(format!("{}x{} matrix on radix-{r} subsystem", u.rows(), u.cols()));
    }
    if controls.iter().any(|&(c, _)| c == t) {
        return invalid("control overlaps target");
    }
    let st = layout.stride(t);
    let mut buf = vec![C64::new(0.0, 0.0); r];
    let data = u.data();
    for base in layout.bases(&[t], controls) {
        for (a, b) in buf.iter_mut().enumerate() {
            *b = state.amps[base + a * st];
        }
        for i in 0..r {
            let row = &data[i * r..(i + 1) * r];
            let mut acc = C64::new(0.0, 0.0);
            for (x, y) in row.iter().zip(&buf) {
                acc += x * y;
            }
            state.amps[base + i * st] = acc;
        }
    }
    Ok(())
}

fn diagonal(state: &mut StateVector, layout: &RegisterLayout, targets: &[usize], table: &[C64], controls: &[(usize, usize)]) -> Result<()> {
    let offs = layout.joint_offsets(targets);
    if offs.len() != table.len() {
        return invalid(format!("phase table has {} entries, expected {}", table.len(), offs.len()));
    }
    for base in layout.bases(targets, controls) {
        for (o, p) in offs.iter().zip(table) {
            state.amps[base + o] *= p;
        }
    }
    Ok(())
}

fn permutation(
    state: &mut StateVector,
    layout: &RegisterLayout,
    t: usize,
    control: Option<usize>,
    perms: &[Vec<usize>],
    controls: &[(usize, usize)],
) -> Result<()> {
    let r = layout.radix(t);
    let nc = control.map_or(1, |c| layout.radix(c));
    if perms.len() != nc || perms.iter().any(|p| p.len() != r) {
        return invalid("permutation table shape mismatch");
    }
    if control == Some(t) {
        return invalid("control and target coincide");
    }
    let st = layout.stride(t);
    let mut buf = vec![C64::new(0.0, 0.0); r];
    for (cv, perm) in perms.iter().enumerate() {
        if perm.iter().enumerate().all(|(a, &b)| a == b) {
            continue;
        }
        let mut fixed = controls.to_vec();
        if let Some(c) = control {
            fixed.push((c, cv));
        }
        for base in layout.bases(&[t], &fixed) {
            for (a, b) in buf.iter_mut().enumerate() {
                *b = state.amps[base + a * st];
            }
            for (a, &pa) in perm.iter().enumerate() {
                state.amps[base + pa * st] = buf[a];
            }
        }
    }
    Ok(())
}

/// `⊕_k Λ^k(W)` on the `2^m` occupation patterns of `m` JW-ordered modes.
///
/// Pattern bit `i` is mode `i`; the basis vector of pattern `c` is
/// `ψ†_{s1}...ψ†_{sk}|0⟩` with `s1 < ... < sk` the set bits.
pub fn fock_matrix(w: &CMat) -> CMat {
    let m = w.rows();
    let n = 1usize << m;
    let bits = |c: usize| -> Vec<usize> { (0..m).filter(|&i| c >> i & 1 == 1).collect() };
    CMat::from_fn(n, n, |t, s| {
        if t.count_ones() != s.count_ones() {
            return C64::new(0.0, 0.0);
        }
        if s == 0 {
            return C64::new(1.0, 0.0);
        }
        w.select(&bits(t), &bits(s)).det()
    })
}

fn fermion(
    state: &mut StateVector,
    layout: &RegisterLayout,
    modes: &[usize],
    control: Option<usize>,
    ws: &[CMat],
    controls: &[(usize, usize)],
) -> Result<()> {
    let m = modes.len();
    if m == 0 {
        return Ok(());
    }
    if modes.iter().any(|&k| !layout.is_mode(k)) {
        return invalid("fermion rotation on a non-mode subsystem");
    }
    let mut sorted = modes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != m {
        return invalid("repeated mode in fermion rotation");
    }
    let nc = control.map_or(1, |c| layout.radix(c));
    if ws.len() != nc || ws.iter().any(|w| w.rows() != m || w.cols() != m) {
        return invalid("fermion unitary shape mismatch");
    }
    // pos[i]: position of sorted[i] in the caller's list
    let pos: Vec<usize> = sorted.iter().map(|k| modes.iter().position(|x| x == k).unwrap()).collect();
    // unlisted modes strictly between consecutive listed modes
    let gaps: Vec<Vec<usize>> = (1..m)
        .map(|i| ((sorted[i - 1] + 1)..sorted[i]).filter(|&k| layout.is_mode(k)).collect())
        .collect();
    let pattern_offset: Vec<usize> = (0..1usize << m)
        .map(|c| (0..m).filter(|&i| c >> i & 1 == 1).map(|i| layout.stride(sorted[i])).sum())
        .collect();
    let mut cache: HashMap<(usize, usize), CMat> = HashMap::new();
    let mut buf = vec![C64::new(0.0, 0.0); 1 << m];
    for cv in 0..nc {
        let mut fixed = controls.to_vec();
        if let Some(c) = control {
            fixed.push((c, cv));
        }
        let w = &ws[cv];
        for base in layout.bases(&sorted, &fixed) {
            // sign bit i: parity of unlisted modes between sorted[0] and sorted[i]
            let mut key = 0usize;
            let mut par = 0usize;
            for (i, gap) in gaps.iter().enumerate() {
                for &k in gap {
                    par ^= layout.digit(base, k);
                }
                key |= par << (i + 1);
            }
            let a = cache.entry((cv, key)).or_insert_with(|| {
                let sgn = |i: usize| if key >> i & 1 == 1 { -1.0 } else { 1.0 };
                let wp = CMat::from_fn(m, m, |i, j| w[(pos[i], pos[j])] * (sgn(i) * sgn(j)));
                fock_matrix(&wp)
            });
            for (c, b) in buf.iter_mut().enumerate() {
                *b = state.amps[base + pattern_offset[c]];
            }
            let n = buf.len();
            let data = a.data();
            for t in 0..n {
                let row = &data[t * n..(t + 1) * n];
                let mut acc = C64::new(0.0, 0.0);
                for (x, y) in row.iter().zip(&buf) {
                    acc += x * y;
                }
                state.amps[base + pattern_offset[t]] = acc;
            }
        }
    }
    Ok(())
}

pub fn apply_single(state: &mut StateVector, target: usize, u: &CMat) -> Result<()> {
    if cfg!(debug_assertions) && !u.is_unitary(1e-10) {
        return invalid("apply_single requires a unitary matrix");
    }
    apply_kernel(state, &Kernel::Single { target, matrix: u.clone() })
}

/// Like [`apply_single`] but accepts non-unitary maps such as projectors.
pub fn apply_single_map(state: &mut StateVector, target: usize, u: &CMat) -> Result<()> {
    apply_kernel(state, &Kernel::Single { target, matrix: u.clone() })
}

pub fn apply_diagonal(state: &mut StateVector, targets: &[usize], phase_fn: impl Fn(&[usize]) -> C64) -> Result<()> {
    let layout = state.layout.clone();
    for &t in targets {
        layout.check_sub(t)?;
    }
    let radices: Vec<usize> = targets.iter().map(|&t| layout.radix(t)).collect();
    let total: usize = radices.iter().product();
    let mut digits = vec![0usize; targets.len()];
    let mut table = Vec::with_capacity(total);
    for j in 0..total {
        let mut rest = j;
        for i in (0..targets.len()).rev() {
            digits[i] = rest % radices[i];
            rest /= radices[i];
        }
        table.push(phase_fn(&digits));
    }
    apply_kernel(state, &Kernel::Diagonal { targets: targets.to_vec(), table })
}

pub fn apply_controlled(state: &mut StateVector, control: usize, value: usize, inner: &Kernel) -> Result<()> {
    apply_kernel(state, &Kernel::Controlled { control, value, inner: Box::new(inner.clone()) })
}

/// Applies `exp(Σ M_ab ψ†_{modes[a]} ψ_{modes[b]})` for anti-Hermitian `M`.
pub fn apply_fermion_rotation(state: &mut StateVector, modes: &[usize], m: &CMat) -> Result<()> {
    if m.rows() != modes.len() || !m.is_square() {
        return invalid("generator shape does not match mode list");
    }
    if m.add(&m.adjoint()).data().iter().any(|z| z.norm() > 1e-10) {
        return invalid("fermion rotation generator must be anti-Hermitian");
    }
    let w = expm_antihermitian(m)?;
    apply_kernel(state, &Kernel::Fermion { modes: modes.to_vec(), control: None, ws: vec![w] })
}

/// Applies the creation operator `ψ†_mode` with its Jordan-Wigner string.
pub fn apply_creation(state: &mut StateVector, mode: usize) -> Result<()> {
    ladder(state, mode, true)
}

pub fn apply_annihilation(state: &mut StateVector, mode: usize) -> Result<()> {
    ladder(state, mode, false)
}

fn ladder(state: &mut StateVector, mode: usize, raise: bool) -> Result<()> {
    let layout = state.layout.clone();
    layout.check_sub(mode)?;
    if !layout.is_mode(mode) {
        return invalid("ladder operator on a non-mode subsystem");
    }
    let before: Vec<usize> = (0..mode).filter(|&k| layout.is_mode(k)).collect();
    let st = layout.stride(mode);
    for base in layout.bases(&[mode], &[]) {
        let sign = if before.iter().map(|&k| layout.digit(base, k)).sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
        let (from, to) = if raise { (base, base + st) } else { (base + st, base) };
        state.amps[to] = state.amps[from] * sign;
        state.amps[from] = C64::new(0.0, 0.0);
    }
    Ok(())
}

/// Total fermion occupation of a flat index.
pub fn occupation(layout: &RegisterLayout, flat: usize) -> usize {
    layout.mode_subsystems().iter().map(|&k| layout.digit(flat, k)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn basis_state_stride() {
        let l = Arc::new(RegisterLayout::gauge(2, 3).unwrap());
        let s = basis_state(l.clone(), &[1, 2]).unwrap();
        assert_eq!(s.amps[5], c(1.0, 0.0));
        assert!(basis_state(l, &[3, 0]).is_err());
    }

    #[test]
    fn hop_quarter_turn() {
        let l = Arc::new(RegisterLayout::new(vec![Subsystem::Mode, Subsystem::Mode]).unwrap());
        let mut s = basis_state(l.clone(), &[1, 0]).unwrap();
        let th = std::f64::consts::FRAC_PI_2;
        let m = CMat::from_rows(&[vec![c(0.0, 0.0), c(0.0, -th)], vec![c(0.0, -th), c(0.0, 0.0)]]);
        apply_fermion_rotation(&mut s, &[0, 1], &m).unwrap();
        let idx = l.flat_index(&[0, 1]).unwrap();
        assert!((s.amps[idx] - c(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn minus_identity_rotation() {
        let l = Arc::new(RegisterLayout::new(vec![Subsystem::Mode, Subsystem::Mode]).unwrap());
        let m = CMat::diag(&[c(0.0, std::f64::consts::PI), c(0.0, std::f64::consts::PI)]);
        let mut one = basis_state(l.clone(), &[1, 0]).unwrap();
        apply_fermion_rotation(&mut one, &[0, 1], &m).unwrap();
        assert!((one.amps[2] + c(1.0, 0.0)).norm() < 1e-12);
        let mut two = basis_state(l, &[1, 1]).unwrap();
        apply_fermion_rotation(&mut two, &[0, 1], &m).unwrap();
        assert!((two.amps[3] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn creation_order_sign() {
        let l = Arc::new(RegisterLayout::new(vec![Subsystem::Mode; 3]).unwrap());
        let mut a = basis_state(l.clone(), &[0, 0, 0]).unwrap();
        apply_creation(&mut a, 0).unwrap();
        apply_creation(&mut a, 2).unwrap();
        let mut b = basis_state(l.clone(), &[0, 0, 0]).unwrap();
        apply_creation(&mut b, 2).unwrap();
        apply_creation(&mut b, 0).unwrap();
        let idx = l.flat_index(&[1, 0, 1]).unwrap();
        assert!((a.amps[idx] + b.amps[idx]).norm() < 1e-15);
        assert!((a.amps[idx].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn controlled_branch_only() {
        let l = Arc::new(RegisterLayout::gauge(2, 2).unwrap());
        let x = CMat::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        let inner = Kernel::Single { target: 1, matrix: x };
        let mut s = StateVector::zeros(l.clone());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        s.amps[0] = c(h, 0.0);
        s.amps[2] = c(h, 0.0);
        apply_controlled(&mut s, 0, 1, &inner).unwrap();
        assert!((s.amps[0] - c(h, 0.0)).norm() < 1e-15);
        assert!((s.amps[3] - c(h, 0.0)).norm() < 1e-15);
        assert!(apply_controlled(&mut s, 1, 0, &inner).is_err());
    }
}
