mod common;

use std::f64::consts::PI;

use common::{c, q8_matrices, to_na, zd_phase, Mat, MaxAbs};
use proptest::prelude::*;
use qudit_lgt::groups::{
    electric_unitary, group_fourier, magnetic_phase, transfer_matrix, zd_casimir, ElectricMode, GroupKind, GroupTable,
};
use qudit_lgt::lattice::build_lattice;
use qudit_lgt::C64;

fn all_groups() -> Vec<GroupTable> {
    let mut v: Vec<GroupTable> = (2..=8).map(|d| GroupTable::new(GroupKind::Cyclic(d)).unwrap()).collect();
    v.push(GroupTable::new(GroupKind::Quaternion).unwrap());
    v
}

fn right_mult(g: &GroupTable, h: usize) -> Mat {
    let n = g.order();
    let mut m = Mat::zeros(n, n);
    for a in 0..n {
        m[(g.compose(a, h).unwrap(), a)] = c(1.0, 0.0);
    }
    m
}

#[test]
fn quaternion_table_matches_pauli_products() {
    let q = GroupTable::new(GroupKind::Quaternion).unwrap();
    let mats = q8_matrices();
    for a in 0..8 {
        for b in 0..8 {
            let prod = &mats[a] * &mats[b];
            let k = q.compose(a, b).unwrap();
            assert!((prod - &mats[k]).mx() < 1e-15, "{a}*{b}");
            assert!((to_na(q.rep(a)) - &mats[a]).mx() < 1e-15);
        }
    }
    assert_eq!(q.compose(2, 4).unwrap(), 7);
    assert_eq!(q.invert(2).unwrap(), 3);
    let chi: Vec<f64> = (0..8).map(|g| q.character(g).re).collect();
    assert_eq!(chi, vec![2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn cyclic_examples() {
    let z5 = GroupTable::new(GroupKind::Cyclic(5)).unwrap();
    assert_eq!(z5.compose(3, 4).unwrap(), 2);
    let z3 = GroupTable::new(GroupKind::Cyclic(3)).unwrap();
    assert_eq!(z3.compose(1, 2).unwrap(), 0);
    let z2 = GroupTable::new(GroupKind::Cyclic(2)).unwrap();
    assert_eq!(z2.invert(1).unwrap(), 1);
    let z4 = GroupTable::new(GroupKind::Cyclic(4)).unwrap();
    assert!((z4.character(1) - c(0.0, 1.0)).norm() < 1e-15);
    for d in 2..=8 {
        let g = GroupTable::new(GroupKind::Cyclic(d)).unwrap();
        for k in 0..d {
            assert!((g.character(k) - zd_phase(d, k)).norm() < 1e-14);
        }
    }
    assert!(z5.compose(5, 0).is_err());
    assert!(GroupTable::new(GroupKind::Cyclic(1)).is_err());
}

#[test]
fn group_axioms_and_characters() {
    for g in all_groups() {
        let n = g.order();
        let e = g.identity();
        for a in 0..n {
            assert_eq!(g.compose(a, e).unwrap(), a);
            assert_eq!(g.compose(a, g.invert(a).unwrap()).unwrap(), e);
            for b in 0..n {
                let ab = g.compose(a, b).unwrap();
                let rep = to_na(g.rep(a)) * to_na(g.rep(b));
                assert!((rep - to_na(g.rep(ab))).mx() < 1e-12);
                for k in 0..n {
                    assert_eq!(g.compose(ab, k).unwrap(), g.compose(a, g.compose(b, k).unwrap()).unwrap());
                }
            }
        }
        let norm2: f64 = (0..n).map(|a| g.character(a).norm_sqr()).sum();
        assert!((norm2 - n as f64).abs() < 1e-12, "{:?}", g.kind());
    }
}

#[test]
fn fourier_is_unitary_and_block_diagonalizes_right_multiplication() {
    for g in all_groups() {
        let basis = group_fourier(&g).unwrap();
        let f = to_na(&basis.fourier);
        let n = g.order();
        assert!((&f * f.adjoint() - Mat::identity(n, n)).mx() < 1e-12);
        for h in 0..n {
            let block = &f * right_mult(&g, h) * f.adjoint();
            for i in 0..n {
                for j in 0..n {
                    if basis.row_irrep[i] != basis.row_irrep[j] {
                        assert!(block[(i, j)].norm() < 1e-12, "{:?} h={h} ({i},{j})", g.kind());
                    }
                }
            }
        }
    }
    let q = group_fourier(&GroupTable::new(GroupKind::Quaternion).unwrap()).unwrap();
    let mut sizes = vec![0; q.irreps.len()];
    for &r in &q.row_irrep {
        sizes[r] += 1;
    }
    assert_eq!(sizes, vec![1, 4, 1, 1, 1]);
    assert_eq!(q.retained_rows().len(), 5);
    let d2 = to_na(&group_fourier(&GroupTable::new(GroupKind::Cyclic(2)).unwrap()).unwrap().fourier);
    let s = 1.0 / 2f64.sqrt();
    assert!((d2 - Mat::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)])).mx() < 1e-15);
}

#[test]
fn transfer_matrix_diagonal_and_symmetry() {
    let q = GroupTable::new(GroupKind::Quaternion).unwrap();
    let lambda = 1.7;
    let t = transfer_matrix(&q, lambda).unwrap();
    for g in 0..8 {
        assert!((t[(g, g)].re - (4.0 / lambda).exp()).abs() < 1e-12);
    }
    let basis = group_fourier(&q).unwrap();
    let u = to_na(&electric_unitary(&q, &basis, lambda, 0.3, ElectricMode::TransferMatrix).unwrap());
    assert!((&u * u.adjoint() - Mat::identity(8, 8)).mx() < 1e-12);
    for h in 0..8 {
        let r = right_mult(&q, h);
        assert!((&u * &r - &r * &u).mx() < 1e-10);
    }
    assert!(transfer_matrix(&q, 0.0).is_err());
}

#[test]
fn casimir_tends_to_continuum() {
    assert!((zd_casimir(64, 1) - 0.5).abs() / 0.5 < 1e-3);
    assert_eq!(zd_casimir(7, 0), 0.0);
}

#[test]
fn zd_electric_matches_double_sum() {
    let (lambda, dt) = (0.8, 0.21);
    for d in 2..=8 {
        let g = GroupTable::new(GroupKind::Cyclic(d)).unwrap();
        let basis = group_fourier(&g).unwrap();
        let u = to_na(&electric_unitary(&g, &basis, lambda, dt, ElectricMode::TransferMatrix).unwrap());
        let dd = d as f64;
        let f_e = |n: usize| {
            C64::from_polar(1.0, 2.0 * lambda * dd * dd / (2.0 * PI * PI) * (2.0 * PI * n as f64 / dd).cos() * dt)
        };
        for kp in 0..d {
            for k in 0..d {
                let mut s = c(0.0, 0.0);
                for n in 0..d {
                    let ph = 2.0 * PI * (n * k) as f64 / dd - 2.0 * PI * (n * kp) as f64 / dd;
                    s += C64::from_polar(1.0, ph) * f_e(n);
                }
                assert!((u[(kp, k)] - s / dd).norm() < 1e-12);
            }
        }
        let zero = to_na(&electric_unitary(&g, &basis, lambda, 0.0, ElectricMode::TransferMatrix).unwrap());
        assert!((zero - Mat::identity(d, d)).mx() < 1e-12);
    }
}

#[test]
fn magnetic_phase_examples() {
    let z3 = GroupTable::new(GroupKind::Cyclic(3)).unwrap();
    assert!((magnetic_phase(&z3, 0, 0.5, 0.1) - C64::from_polar(1.0, -0.1)).norm() < 1e-15);
    let q = GroupTable::new(GroupKind::Quaternion).unwrap();
    assert!((magnetic_phase(&q, 2, 3.0, 0.7) - c(1.0, 0.0)).norm() < 1e-15);
    assert!((magnetic_phase(&q, 1, 3.0, 0.0) - c(1.0, 0.0)).norm() < 1e-15);
}

proptest! {
    #[test]
    fn magnetic_phase_is_unimodular(d in 2usize..=8, el in 0usize..8, lb in -3.0f64..3.0, dt in 0.0f64..1.0) {
        let g = GroupTable::new(GroupKind::Cyclic(d)).unwrap();
        prop_assert!((magnetic_phase(&g, el % d, lb, dt).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn casimir_truncation_is_partial_isometry(lambda in 0.1f64..3.0, dt in 0.0f64..1.0) {
        let q = GroupTable::new(GroupKind::Quaternion).unwrap();
        let basis = group_fourier(&q).unwrap();
        let u = to_na(&electric_unitary(&q, &basis, lambda, dt, ElectricMode::CasimirTruncation).unwrap());
        let p = u.adjoint() * &u;
        prop_assert!((&p * &p - &p).mx() < 1e-12);
        prop_assert!((p.trace().re - 5.0).abs() < 1e-12);
    }

    #[test]
    fn torus_geometry(lx in 2usize..5, ly in 2usize..5) {
        let l = build_lattice(2, &[lx, ly], true).unwrap();
        prop_assert_eq!(l.num_links(), 2 * lx * ly);
        prop_assert_eq!(l.plaquettes.len(), lx * ly);
        for p in &l.plaquettes {
            // counter-clockwise walk returns to the corner
            let mut at = p.corner;
            for (k, &li) in p.links.iter().enumerate() {
                let link = l.links[li];
                if p.dagger[k] {
                    prop_assert_eq!(link.head, at);
                    at = link.site;
                } else {
                    prop_assert_eq!(link.site, at);
                    at = link.head;
                }
            }
            prop_assert_eq!(at, p.corner);
        }
        let mut out = vec![0; l.num_links()];
        let mut inc = vec![0; l.num_links()];
        for s in &l.stars {
            for li in s.out_links() {
                prop_assert_eq!(l.links[li].site, s.site);
                out[li] += 1;
            }
            for li in s.in_links() {
                prop_assert_eq!(l.links[li].head, s.site);
                inc[li] += 1;
            }
        }
        prop_assert!(out.iter().chain(&inc).all(|&k| k == 1));
        prop_assert_eq!(build_lattice(2, &[lx, ly], true).unwrap(), l);
    }

    #[test]
    fn periodic_chain_links(n in 2usize..12) {
        let l = build_lattice(1, &[n], true).unwrap();
        prop_assert_eq!(l.num_links(), n);
        for (i, link) in l.links.iter().enumerate() {
            prop_assert_eq!((link.site, link.head), (i, (i + 1) % n));
        }
    }
}

#[test]
fn lattice_rejections() {
    assert!(build_lattice(2, &[2, 2], false).is_err());
    assert!(build_lattice(3, &[2, 2, 2], true).is_err());
    assert!(build_lattice(1, &[1], true).is_err());
    assert!(GroupKind::parse("Z9").is_err());
    assert_eq!(GroupKind::parse("q8").unwrap(), GroupKind::Quaternion);
}
