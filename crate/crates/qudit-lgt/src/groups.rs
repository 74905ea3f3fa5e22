//! Finite gauge groups: multiplication tables, fundamental representations,
//! characters, and the group Fourier transform onto irreducible blocks.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{expm_antihermitian, log_hpd, CMat};

/// Supported gauge groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    /// Cyclic group of order d, digitizing U(1).
    Cyclic(usize),
    /// Quaternion group, the minimal non-abelian digitization of SU(2).
    Quaternion,
}

impl GroupKind {
    /// Parses config names `Z2`..`Z8` and `Q8`.
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        if name.eq_ignore_ascii_case("Q8") {
            return Ok(GroupKind::Quaternion);
        }
        if let Some(rest) = name.strip_prefix('Z').or_else(|| name.strip_prefix('z')) {
            let d: usize = rest
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad group name '{name}'")))?;
            if (2..=8).contains(&d) {
                return Ok(GroupKind::Cyclic(d));
            }
        }
        invalid(format!("unknown group '{name}' (expected Z2..Z8 or Q8)"))
    }

    pub fn order(&self) -> usize {
        match *self {
            GroupKind::Cyclic(d) => d,
            GroupKind::Quaternion => 8,
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::Cyclic(d) => write!(f, "Z{d}"),
            GroupKind::Quaternion => write!(f, "Q8"),
        }
    }
}

/// A finite group with its fundamental representation.
///
/// Invariants: `mul` is associative with identity `identity`,
/// `mul[g][inv[g]] == identity`, and `rep[g] * rep[h] == rep[mul[g][h]]`.
#[derive(Clone, Debug)]
pub struct GroupTable {
    kind: GroupKind,
    labels: Vec<String>,
    mul: Vec<usize>,
    inv: Vec<usize>,
    identity: usize,
    rep: Vec<CMat>,
    chars: Vec<C64>,
}

impl GroupTable {
    pub fn new(kind: GroupKind) -> Result<Self> {
        match kind {
            GroupKind::Cyclic(d) => cyclic_group(d),
            GroupKind::Quaternion => Ok(quaternion_group()),
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.inv.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn label(&self, g: usize) -> &str {
        &self.labels[g]
    }

    /// Dimension N of the fundamental representation.
    pub fn rep_dim(&self) -> usize {
        self.rep[0].rows()
    }

    pub fn rep(&self, g: usize) -> &CMat {
        &self.rep[g]
    }

    pub fn character(&self, g: usize) -> C64 {
        self.chars[g]
    }

    pub fn compose(&self, g: usize, h: usize) -> Result<usize> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul_unchecked(g, h))
    }

    pub fn invert(&self, g: usize) -> Result<usize> {
        self.check(g)?;
        Ok(self.inv[g])
    }

    #[inline]
    pub fn mul_unchecked(&self, g: usize, h: usize) -> usize {
        self.mul[g * self.order() + h]
    }

    #[inline]
    pub fn inv_unchecked(&self, g: usize) -> usize {
        self.inv[g]
    }

    fn check(&self, g: usize) -> Result<()> {
        if g < self.order() {
            Ok(())
        } else {
            invalid(format!("element {g} out of range for {}", self.kind))
        }
    }

    /// Permutation `a -> a*g` of the group basis (right regular action).
    pub fn right_perm(&self, g: usize) -> Vec<usize> {
        (0..self.order()).map(|a| self.mul_unchecked(a, g)).collect()
    }

    /// Permutation `a -> g*a` of the group basis (left regular action).
    pub fn left_perm(&self, g: usize) -> Vec<usize> {
        (0..self.order()).map(|a| self.mul_unchecked(g, a)).collect()
    }
}

/// `Z_d` with element k ↦ phase φ_k = 2πk/d, `D(k) = [e^{iφ_k}]`.
pub fn cyclic_group(d: usize) -> Result<GroupTable> {
    if d < 2 {
        return invalid(format!("cyclic group needs d >= 2, got {d}"));
    }
    let mul = (0..d * d).map(|ab| (ab / d + ab % d) % d).collect();
    let inv = (0..d).map(|k| (d - k) % d).collect();
    let rep: Vec<CMat> = (0..d)
        .map(|k| CMat::diag(&[C64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64)]))
        .collect();
    let chars = rep.iter().map(|m| m.trace()).collect();
    Ok(GroupTable {
        kind: GroupKind::Cyclic(d),
        labels: (0..d).map(|k| format!("phi{k}")).collect(),
        mul,
        inv,
        identity: 0,
        rep,
        chars,
    })
}

/// Q8 with elements ordered 1, -1, iσx, -iσx, iσy, -iσy, iσz, -iσz.
pub fn quaternion_group() -> GroupTable {
    let o = C64::new(0.0, 0.0);
    let r = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let one = CMat::identity(2);
    let isx = CMat::from_rows(&[vec![o, i], vec![i, o]]);
    let isy = CMat::from_rows(&[vec![o, r], vec![-r, o]]);
    let isz = CMat::from_rows(&[vec![i, o], vec![o, -i]]);
    let neg = |m: &CMat| m.scale(-r);
    let rep = vec![one.clone(), neg(&one), isx.clone(), neg(&isx), isy.clone(), neg(&isy), isz.clone(), neg(&isz)];
    let labels = ["1", "-1", "i.sx", "-i.sx", "i.sy", "-i.sy", "i.sz", "-i.sz"].map(String::from).to_vec();
    let find = |m: &CMat| -> usize {
        rep.iter()
            .position(|x| x.max_abs_diff(m) < 1e-12)
            .expect("Q8 is closed under multiplication")
    };
    let mut mul = Vec::with_capacity(64);
    for a in &rep {
        for b in &rep {
            mul.push(find(&a.matmul(b)));
        }
    }
    let inv = rep.iter().map(|m| find(&m.adjoint())).collect();
    let chars = rep.iter().map(|m| m.trace()).collect();
    GroupTable { kind: GroupKind::Quaternion, labels, mul, inv, identity: 0, rep, chars }
}

/// Irreducible representation label and data.
#[derive(Clone, Debug)]
pub struct Irrep {
    pub label: String,
    pub dim: usize,
    /// Electric energy `E²_j`; `None` encodes an infinite value (state deleted).
    pub casimir: Option<f64>,
}

/// Unitary change of basis from group elements to irrep triples `(j, m, n)`.
///
/// Row `(j,m,n)`, column `g` holds `sqrt(dim_j/|G|) * conj(D^j(g)_{mn})`.
#[derive(Clone, Debug)]
pub struct IrrepBasis {
    pub fourier: CMat,
    pub irreps: Vec<Irrep>,
    /// Irrep index of each row of `fourier`.
    pub row_irrep: Vec<usize>,
}

impl IrrepBasis {
    /// Rows whose irrep has finite electric energy, in row order.
    pub fn retained_rows(&self) -> Vec<usize> {
        (0..self.row_irrep.len()).filter(|&r| self.irreps[self.row_irrep[r]].casimir.is_some()).collect()
    }

    pub fn row_casimir(&self, row: usize) -> Option<f64> {
        self.irreps[self.row_irrep[row]].casimir
    }
}

/// Builds the group Fourier transform from hard-coded irreps.
pub fn group_fourier(g: &GroupTable) -> Result<IrrepBasis> {
    match g.kind() {
        GroupKind::Cyclic(d) => {
            // irrep n: k ↦ e^{-iφ_k n}, so F_{n,k} = e^{+iφ_k n}/√d
            let f = CMat::from_fn(d, d, |n, k| {
                C64::from_polar(1.0 / (d as f64).sqrt(), 2.0 * PI * (n * k) as f64 / d as f64)
            });
            let irreps = (0..d)
                .map(|n| Irrep {
                    label: format!("n{n}"),
                    dim: 1,
                    casimir: Some(zd_casimir(d, n)),
                })
                .collect();
            Ok(IrrepBasis { fourier: f, irreps, row_irrep: (0..d).collect() })
        }
        GroupKind::Quaternion => {
            // 1-dim sign irreps: I keeps ±iσx, J keeps ±iσy, K keeps ±iσz
            let sign = |keep: usize, el: usize| -> f64 {
                let class = el / 2;
                if class == 0 || class == keep {
                    1.0
                } else {
                    -1.0
                }
            };
            let w1 = (1.0f64 / 8.0).sqrt();
            let w2 = (2.0f64 / 8.0).sqrt();
            let mut rows: Vec<Vec<C64>> = Vec::with_capacity(8);
            let mut row_irrep = Vec::with_capacity(8);
            rows.push((0..8).map(|_| C64::new(w1, 0.0)).collect());
            row_irrep.push(0);
            for m in 0..2 {
                for n in 0..2 {
                    rows.push((0..8).map(|el| g.rep(el)[(m, n)].conj() * w2).collect());
                    row_irrep.push(1);
                }
            }
            for (idx, keep) in [1usize, 2, 3].iter().enumerate() {
                rows.push((0..8).map(|el| C64::new(w1 * sign(*keep, el), 0.0)).collect());
                row_irrep.push(2 + idx);
            }
            let irreps = vec![
                Irrep { label: "0".into(), dim: 1, casimir: Some(0.0) },
                Irrep { label: "1/2".into(), dim: 2, casimir: Some(0.75) },
                Irrep { label: "I".into(), dim: 1, casimir: None },
                Irrep { label: "J".into(), dim: 1, casimir: None },
                Irrep { label: "K".into(), dim: 1, casimir: None },
            ];
            Ok(IrrepBasis { fourier: CMat::from_rows(&rows), irreps, row_irrep })
        }
    }
}

/// Digitized `E²/2` for `Z_d`: `d²/(2π)² (1 − cos(2πn/d))`, tending to `n²/2`.
pub fn zd_casimir(d: usize, n: usize) -> f64 {
    let dd = d as f64;
    dd * dd / (4.0 * PI * PI) * (1.0 - (2.0 * PI * n as f64 / dd).cos())
}

/// Magnetic phase `exp(-2i λ_B Re χ(g) δt)`.
pub fn magnetic_phase(g: &GroupTable, el: usize, lambda_b: f64, dt: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * lambda_b * g.character(el).re * dt)
}

/// Construction of the single-link electric unitary for non-abelian groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElectricMode {
    /// `exp(iδt log T_E)` from the Euclidean transfer matrix.
    TransferMatrix,
    /// Diagonal in the irrep basis with phases `exp(-iλ E²_j δt)`;
    /// infinite `E²_j` rows are projected out, so the result is a partial isometry.
    CasimirTruncation,
}

/// `Z_d` electric phase `f_E(n) = exp(2i λ_E d²/(2π²) cos(2πn/d) δt)`.
pub fn zd_electric_phase(d: usize, n: usize, lambda_e: f64, dt: f64) -> C64 {
    let dd = d as f64;
    let c = lambda_e * dd * dd / (2.0 * PI * PI);
    C64::from_polar(1.0, 2.0 * c * (2.0 * PI * n as f64 / dd).cos() * dt)
}

/// Euclidean transfer matrix `[T_E]_{g',g} = exp((2/λ_E) Re χ(g' g⁻¹))`.
pub fn transfer_matrix(g: &GroupTable, lambda_e: f64) -> Result<CMat> {
    if lambda_e <= 0.0 || !lambda_e.is_finite() {
        return invalid("transfer matrix needs lambda_E > 0");
    }
    let d = g.order();
    Ok(CMat::from_fn(d, d, |a, b| {
        let x = g.mul_unchecked(a, g.inv_unchecked(b));
        C64::new((2.0 / lambda_e * g.character(x).re).exp(), 0.0)
    }))
}

/// Single-link electric unitary in the group basis.
///
/// `Z_d` always uses the closed-form Fourier-diagonal phases and ignores
/// `mode`; `Q8` follows `mode`.
pub fn electric_unitary(g: &GroupTable, basis: &IrrepBasis, lambda_e: f64, dt: f64, mode: ElectricMode) -> Result<CMat> {
    match g.kind() {
        GroupKind::Cyclic(d) => {
            let phases: Vec<C64> = (0..d).map(|n| zd_electric_phase(d, n, lambda_e, dt)).collect();
            let f = &basis.fourier;
            Ok(f.adjoint().matmul(&CMat::diag(&phases)).matmul(f))
        }
        GroupKind::Quaternion => match mode {
            ElectricMode::TransferMatrix => {
                let t = transfer_matrix(g, lambda_e)?;
                let l = log_hpd(&t)?;
                expm_antihermitian(&l.scale(C64::new(0.0, dt)))
            }
            ElectricMode::CasimirTruncation => Ok(casimir_unitary(basis, lambda_e, dt)),
        },
    }
}

/// `F† diag(e^{-iλ E²_j δt} or 0) F` for any irrep basis.
pub fn casimir_unitary(basis: &IrrepBasis, lambda: f64, dt: f64) -> CMat {
    let phases: Vec<C64> = (0..basis.row_irrep.len())
        .map(|r| match basis.row_casimir(r) {
            Some(e2) => C64::from_polar(1.0, -lambda * e2 * dt),
            None => C64::new(0.0, 0.0),
        })
        .collect();
    let f = &basis.fourier;
    f.adjoint().matmul(&CMat::diag(&phases)).matmul(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_examples() {
        let z3 = cyclic_group(3).unwrap();
        assert_eq!(z3.compose(1, 2).unwrap(), 0);
        let z2 = cyclic_group(2).unwrap();
        assert_eq!(z2.invert(1).unwrap(), 1);
        let z4 = cyclic_group(4).unwrap();
        assert!((z4.character(1) - C64::new(0.0, 1.0)).norm() < 1e-15);
        let z5 = cyclic_group(5).unwrap();
        assert_eq!(z5.compose(3, 4).unwrap(), 2);
        assert!(cyclic_group(1).is_err());
    }

    #[test]
    fn quaternion_examples() {
        let q = quaternion_group();
        assert!((q.character(0).re - 2.0).abs() < 1e-15);
        assert!((q.character(1).re + 2.0).abs() < 1e-15);
        assert!(q.character(6).norm() < 1e-15);
        // iσx · iσy = -iσz
        assert_eq!(q.compose(2, 4).unwrap(), 7);
        assert_eq!(q.invert(2).unwrap(), 3);
        assert!(q.compose(8, 0).is_err());
    }

    #[test]
    fn magnetic_phase_cases() {
        let q = quaternion_group();
        assert!((magnetic_phase(&q, 2, 0.7, 0.3) - C64::new(1.0, 0.0)).norm() < 1e-15);
        let z = cyclic_group(5).unwrap();
        let p = magnetic_phase(&z, 0, 0.5, 0.1);
        assert!((p - C64::from_polar(1.0, -0.1)).norm() < 1e-15);
        assert!((magnetic_phase(&z, 3, 0.5, 0.0) - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn group_names_parse() {
        assert_eq!(GroupKind::parse("Z3").unwrap(), GroupKind::Cyclic(3));
        assert_eq!(GroupKind::parse("Q8").unwrap(), GroupKind::Quaternion);
        assert!(GroupKind::parse("Z9").is_err());
        assert!(GroupKind::parse("SU2").is_err());
    }
}
