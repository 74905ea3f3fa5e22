//! Named gates of the fermion-qudit gate set as serializable records.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::groups::{group_fourier, GroupKind, GroupTable};
use crate::linalg::{expm_antihermitian, log_unitary, CMat};
use crate::register::{Kernel, RegisterLayout};

/// Resource class of a gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateClass {
    GeneralSingle,
    DiagonalSingle,
    GroupMultiplication,
    Fermionic,
}

impl GateClass {
    pub const ALL: [GateClass; 4] =
        [GateClass::GeneralSingle, GateClass::DiagonalSingle, GateClass::GroupMultiplication, GateClass::Fermionic];

    pub fn name(&self) -> &'static str {
        match self {
            GateClass::GeneralSingle => "general-single",
            GateClass::DiagonalSingle => "diagonal-single",
            GateClass::GroupMultiplication => "group-multiplication",
            GateClass::Fermionic => "fermionic",
        }
    }
}

/// Group-multiplication variants acting on `(target a, control b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThetaVariant {
    /// `a -> a b`
    R,
    /// `a -> a b⁻¹`
    RInv,
    /// `a -> b a`
    L,
    /// `a -> b⁻¹ a`
    LInv,
}

impl ThetaVariant {
    pub fn inverse(self) -> Self {
        match self {
            ThetaVariant::R => ThetaVariant::RInv,
            ThetaVariant::RInv => ThetaVariant::R,
            ThetaVariant::L => ThetaVariant::LInv,
            ThetaVariant::LInv => ThetaVariant::L,
        }
    }

    pub fn image(self, g: &GroupTable, a: usize, b: usize) -> usize {
        match self {
            ThetaVariant::R => g.mul_unchecked(a, b),
            ThetaVariant::RInv => g.mul_unchecked(a, g.inv_unchecked(b)),
            ThetaVariant::L => g.mul_unchecked(b, a),
            ThetaVariant::LInv => g.mul_unchecked(g.inv_unchecked(b), a),
        }
    }

    /// Target permutation for control value `b`.
    pub fn perm(self, g: &GroupTable, b: usize) -> Vec<usize> {
        (0..g.order()).map(|a| self.image(g, a, b)).collect()
    }
}

/// Complex number stored as `[re, im]` so records stay plain JSON.
pub type Pair = [f64; 2];

fn to_pairs(v: &[C64]) -> Vec<Pair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(v: &[Pair]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GateKind {
    /// Dense single-qudit matrix, row-major. `unitary = false` marks projections.
    SingleGeneral { radix: usize, matrix: Vec<Pair>, unitary: bool },
    /// Phase table over the target's basis.
    SingleDiagonal { phases: Vec<Pair> },
    Fourier { group: GroupKind, inverse: bool },
    /// Targets `[target, control]`.
    Theta { group: GroupKind, variant: ThetaVariant },
    /// Targets `[target, control]`; permutes the target when the control holds `value`.
    Controlled { group: GroupKind, value: usize, perm: Vec<usize> },
    /// Targets `[a_0..a_{p-1}, b_0..b_{p-1}]`, hopping `a_i <-> b_i`.
    Tunneling { dt: f64, sign: f64, coupling: f64, antisymmetric: bool },
    /// Targets `[link, modes...]`.
    VGate { group: GroupKind, inverse: bool },
    /// Targets: modes of one site; phase `exp(−i δt m parity)` per occupied mode.
    MassPhase { mass: f64, dt: f64, parity: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    #[serde(flatten)]
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub class: GateClass,
    /// Trotter factor this gate belongs to, e.g. `B[p2]`.
    pub label: String,
}

fn distinct(v: &[usize]) -> bool {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.windows(2).all(|w| w[0] != w[1])
}

impl GateOp {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn single_general(target: usize, u: &CMat) -> Self {
        let unitary = u.is_unitary(1e-10);
        GateOp {
            kind: GateKind::SingleGeneral { radix: u.rows(), matrix: to_pairs(u.data()), unitary },
            targets: vec![target],
            class: GateClass::GeneralSingle,
            label: String::new(),
        }
    }

    pub fn single_diagonal(target: usize, phases: &[C64]) -> Self {
        GateOp {
            kind: GateKind::SingleDiagonal { phases: to_pairs(phases) },
            targets: vec![target],
            class: GateClass::DiagonalSingle,
            label: String::new(),
        }
    }

    pub fn matrix(&self) -> Option<CMat> {
        match &self.kind {
            GateKind::SingleGeneral { radix, matrix, .. } => {
                let d = from_pairs(matrix);
                Some(CMat::from_fn(*radix, *radix, |i, j| d[i * radix + j]))
            }
            _ => None,
        }
    }

    /// Formal adjoint; reversing a circuit of adjoints inverts it.
    pub fn adjoint(&self) -> GateOp {
        let kind = match &self.kind {
            GateKind::SingleGeneral { radix, unitary, .. } => {
                let m = self.matrix().expect("single-general carries a matrix").adjoint();
                GateKind::SingleGeneral { radix: *radix, matrix: to_pairs(m.data()), unitary: *unitary }
            }
            GateKind::SingleDiagonal { phases } => {
                GateKind::SingleDiagonal { phases: phases.iter().map(|p| [p[0], -p[1]]).collect() }
            }
            GateKind::Fourier { group, inverse } => GateKind::Fourier { group: *group, inverse: !inverse },
            GateKind::Theta { group, variant } => GateKind::Theta { group: *group, variant: variant.inverse() },
            GateKind::Controlled { group, value, perm } => {
                let mut inv = vec![0; perm.len()];
                for (a, &b) in perm.iter().enumerate() {
                    inv[b] = a;
                }
                GateKind::Controlled { group: *group, value: *value, perm: inv }
            }
            GateKind::Tunneling { dt, sign, coupling, antisymmetric } => {
                GateKind::Tunneling { dt: -dt, sign: *sign, coupling: *coupling, antisymmetric: *antisymmetric }
            }
            GateKind::VGate { group, inverse } => GateKind::VGate { group: *group, inverse: !inverse },
            GateKind::MassPhase { mass, dt, parity } => GateKind::MassPhase { mass: *mass, dt: -dt, parity: *parity },
        };
        GateOp { kind, targets: self.targets.clone(), class: self.class, label: self.label.clone() }
    }

    /// Executable kernel on `layout`.
    pub fn kernel(&self, layout: &RegisterLayout) -> Result<Kernel> {
        if self.targets.iter().any(|&t| t >= layout.len()) {
            return invalid(format!("gate target out of range for a {}-subsystem register", layout.len()));
        }
        if !distinct(&self.targets) {
            return invalid("gate targets must be distinct");
        }
        let t0 = self.targets[0];
        match &self.kind {
            GateKind::SingleGeneral { .. } => {
                Ok(Kernel::Single { target: t0, matrix: self.matrix().expect("matrix present") })
            }
            GateKind::SingleDiagonal { phases } => Ok(Kernel::Diagonal { targets: vec![t0], table: from_pairs(phases) }),
            GateKind::Fourier { group, inverse } => {
                let f = group_fourier(&GroupTable::new(*group)?)?.fourier;
                Ok(Kernel::Single { target: t0, matrix: if *inverse { f.adjoint() } else { f } })
            }
            GateKind::Theta { group, variant } => {
                let g = GroupTable::new(*group)?;
                let perms = (0..g.order()).map(|b| variant.perm(&g, b)).collect();
                Ok(Kernel::Permutation { target: t0, control: Some(self.targets[1]), perms })
            }
            GateKind::Controlled { value, perm, .. } => Ok(Kernel::Controlled {
                control: self.targets[1],
                value: *value,
                inner: Box::new(Kernel::Permutation { target: t0, control: None, perms: vec![perm.clone()] }),
            }),
            GateKind::Tunneling { dt, sign, coupling, antisymmetric } => {
                let m = tunneling_generator(self.targets.len() / 2, *dt, *sign, *coupling, *antisymmetric)?;
                Ok(Kernel::Fermion { modes: self.targets.clone(), control: None, ws: vec![expm_antihermitian(&m)?] })
            }
            GateKind::VGate { group, inverse } => {
                let g = GroupTable::new(*group)?;
                let ws = (0..g.order())
                    .map(|el| {
                        let l = log_unitary(g.rep(el))?;
                        let l = if *inverse { l.scale(C64::new(-1.0, 0.0)) } else { l };
                        expm_antihermitian(&l)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Kernel::Fermion { modes: self.targets[1..].to_vec(), control: Some(t0), ws })
            }
            GateKind::MassPhase { mass, dt, parity } => {
                let p = C64::from_polar(1.0, -dt * mass * parity);
                let k = self.targets.len();
                let table = (0..1usize << k).map(|j| p.powu(j.count_ones())).collect();
                Ok(Kernel::Diagonal { targets: self.targets.clone(), table })
            }
        }
    }
}

/// Fourier transform of one qudit onto the irrep basis.
pub fn fourier_gate(group: GroupKind, target: usize, inverse: bool) -> Result<GateOp> {
    group_fourier(&GroupTable::new(group)?)?;
    Ok(GateOp {
        kind: GateKind::Fourier { group, inverse },
        targets: vec![target],
        class: GateClass::GeneralSingle,
        label: String::new(),
    })
}

pub fn theta_gate(group: GroupKind, control: usize, target: usize, variant: ThetaVariant) -> Result<GateOp> {
    if control == target {
        return invalid("theta gate needs distinct control and target");
    }
    Ok(GateOp {
        kind: GateKind::Theta { group, variant },
        targets: vec![target, control],
        class: GateClass::GroupMultiplication,
        label: String::new(),
    })
}

/// `Θ` as the product of `|G| − 1` controlled permutations (identity control skipped).
pub fn theta_decomposition(group: GroupKind, control: usize, target: usize, variant: ThetaVariant) -> Result<Vec<GateOp>> {
    if control == target {
        return invalid("theta gate needs distinct control and target");
    }
    let g = GroupTable::new(group)?;
    Ok((0..g.order())
        .filter(|&b| b != g.identity())
        .map(|b| GateOp {
            kind: GateKind::Controlled { group, value: b, perm: variant.perm(&g, b) },
            targets: vec![target, control],
            class: GateClass::GroupMultiplication,
            label: String::new(),
        })
        .collect())
}

/// One-particle generator `M` for hopping between `a_i = i` and `b_i = p + i`.
///
/// Symmetric form: `exp(−i δt s c (ψ†_a ψ_b + h.c.))`.
/// Antisymmetric form: `exp(−i δt (−i s c)(ψ†_a ψ_b − h.c.))`.
pub fn tunneling_generator(pairs: usize, dt: f64, sign: f64, coupling: f64, antisymmetric: bool) -> Result<CMat> {
    if pairs == 0 {
        return invalid("tunneling needs at least one mode pair");
    }
    let mut m = CMat::zeros(2 * pairs, 2 * pairs);
    for i in 0..pairs {
        let (ab, ba) = if antisymmetric {
            (C64::new(-dt * sign * coupling, 0.0), C64::new(dt * sign * coupling, 0.0))
        } else {
            let v = C64::new(0.0, -dt * sign * coupling);
            (v, v)
        };
        m[(i, pairs + i)] = ab;
        m[(pairs + i, i)] = ba;
    }
    Ok(m)
}

/// Hopping gate between paired modes `a[i] <-> b[i]`.
pub fn tunneling_gate(a: &[usize], b: &[usize], dt: f64, sign: f64, coupling: f64, antisymmetric: bool) -> Result<GateOp> {
    if a.len() != b.len() || a.is_empty() {
        return invalid("tunneling needs equally many modes on both sides");
    }
    let mut targets = a.to_vec();
    targets.extend_from_slice(b);
    if !distinct(&targets) {
        return invalid("tunneling modes overlap");
    }
    if sign.abs() != 1.0 {
        return invalid("tunneling sign must be +1 or -1");
    }
    Ok(GateOp {
        kind: GateKind::Tunneling { dt, sign, coupling, antisymmetric },
        targets,
        class: GateClass::Fermionic,
        label: String::new(),
    })
}

/// `V_{x|ℓ}` (or its inverse): site modes rotated by `D(g_ℓ)` controlled on the link.
///
/// Counted in the group-multiplication class together with the other controlled gates.
pub fn v_gate(group: GroupKind, link: usize, modes: &[usize], inverse: bool) -> Result<GateOp> {
    let g = GroupTable::new(group)?;
    if modes.len() != g.rep_dim() {
        return invalid(format!("V gate needs {} modes for {group}, got {}", g.rep_dim(), modes.len()));
    }
    let mut targets = vec![link];
    targets.extend_from_slice(modes);
    if !distinct(&targets) {
        return Err(Error::InvalidParameter("V gate control overlaps a mode".into()));
    }
    Ok(GateOp { kind: GateKind::VGate { group, inverse }, targets, class: GateClass::GroupMultiplication, label: String::new() })
}

/// Staggered mass phase on the modes of one site.
pub fn mass_phase_gate(modes: &[usize], mass: f64, dt: f64, parity: f64) -> Result<GateOp> {
    if modes.is_empty() || !distinct(modes) {
        return invalid("mass gate needs distinct modes");
    }
    Ok(GateOp {
        kind: GateKind::MassPhase { mass, dt, parity },
        targets: modes.to_vec(),
        class: GateClass::DiagonalSingle,
        label: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_perm_examples() {
        let z3 = GroupTable::new(GroupKind::Cyclic(3)).unwrap();
        assert_eq!(ThetaVariant::R.image(&z3, 1, 2), 0);
        let q = GroupTable::new(GroupKind::Quaternion).unwrap();
        for v in [ThetaVariant::R, ThetaVariant::L, ThetaVariant::RInv, ThetaVariant::LInv] {
            assert_eq!(v.perm(&q, 0), (0..8).collect::<Vec<_>>());
        }
        assert!(theta_gate(GroupKind::Quaternion, 1, 1, ThetaVariant::R).is_err());
    }

    #[test]
    fn decomposition_has_d_minus_one_factors() {
        let ops = theta_decomposition(GroupKind::Quaternion, 0, 1, ThetaVariant::R).unwrap();
        assert_eq!(ops.len(), 7);
    }

    #[test]
    fn json_roundtrip() {
        let g = tunneling_gate(&[0], &[1], 0.1, -1.0, 0.8, true).unwrap().with_label("hop[b0]");
        let s = serde_json::to_string(&g).unwrap();
        let back: GateOp = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
