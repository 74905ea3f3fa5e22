//! Independent reference constructions shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use qudit_lgt::circuits::Circuit;
use qudit_lgt::lattice::{LatticeSpec, Link, Plaquette, Star};
use qudit_lgt::register::{RegisterLayout, StateVector};
use qudit_lgt::C64;

pub type Mat = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Q8 elements in the fixed order `1, −1, iσx, −iσx, iσy, −iσy, iσz, −iσz`.
pub fn q8_matrices() -> Vec<Mat> {
    let one = Mat::identity(2, 2);
    let sx = Mat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
    let sy = Mat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]);
    let sz = Mat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]);
    let i = c(0., 1.);
    let mut out = Vec::new();
    for m in [one, sx * i, sy * i, sz * i] {
        out.push(m.clone());
        out.push(-m);
    }
    out
}

/// `Z_d` element `k` as the phase `e^{2πik/d}`.
pub fn zd_phase(d: usize, k: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / d as f64)
}

/// Decodes a row-major flat index (subsystem 0 most significant).
pub fn digits(radices: &[usize], mut flat: usize) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for (d, &r) in out.iter_mut().zip(radices).rev() {
        *d = flat % r;
        flat /= r;
    }
    out
}

/// Runs `f` on the image of every basis vector under the circuit.
pub fn for_each_column(circuit: &Circuit, layout: Arc<RegisterLayout>, mut f: impl FnMut(usize, &[C64])) {
    let compiled = circuit.compile(layout.clone()).unwrap();
    for j in 0..layout.dim() {
        let mut s = StateVector::zeros(layout.clone());
        s.amps[j] = c(1.0, 0.0);
        compiled.run(&mut s).unwrap();
        f(j, &s.amps);
    }
}

pub fn circuit_matrix(circuit: &Circuit, layout: Arc<RegisterLayout>) -> Mat {
    let n = layout.dim();
    let mut m = Mat::zeros(n, n);
    for_each_column(circuit, layout, |j, col| {
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = *v;
        }
    });
    m
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Annihilation operator of the `k`-th fermion mode, Jordan-Wigner ordered by subsystem index.
pub fn annihilator(radices: &[usize], mode_subs: &[usize], k: usize) -> Mat {
    let dim: usize = radices.iter().product();
    let stride: usize = radices[mode_subs[k] + 1..].iter().product();
    let mut m = Mat::zeros(dim, dim);
    for flat in 0..dim {
        let dg = digits(radices, flat);
        if dg[mode_subs[k]] == 1 {
            let parity: usize = mode_subs[..k].iter().map(|&s| dg[s]).sum();
            m[(flat - stride, flat)] = c(if parity % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
        }
    }
    m
}

/// Projector onto qudit `sub` holding value `v`.
pub fn value_projector(radices: &[usize], sub: usize, v: usize) -> Mat {
    let dim: usize = radices.iter().product();
    Mat::from_fn(dim, dim, |i, j| if i == j && digits(radices, i)[sub] == v { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

/// One open plaquette: sites (0,0),(1,0),(0,1),(1,1) and four links.
pub fn single_plaquette() -> LatticeSpec {
    LatticeSpec {
        dim: 2,
        extents: vec![2, 2],
        periodic: false,
        links: vec![
            Link { site: 0, dir: 0, head: 1 },
            Link { site: 1, dir: 1, head: 3 },
            Link { site: 2, dir: 0, head: 3 },
            Link { site: 0, dir: 1, head: 2 },
        ],
        plaquettes: vec![Plaquette { corner: 0, links: [0, 1, 2, 3], dagger: [false, false, true, true] }],
        stars: vec![
            Star { site: 0, links: vec![0, 3], outgoing: vec![true, true] },
            Star { site: 1, links: vec![1, 0], outgoing: vec![true, false] },
            Star { site: 2, links: vec![2, 3], outgoing: vec![true, false] },
            Star { site: 3, links: vec![1, 2], outgoing: vec![false, false] },
        ],
    }
}

pub fn to_na(m: &qudit_lgt::linalg::CMat) -> Mat {
    Mat::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Hermitian matrix with entries drawn from a seeded stream.
pub fn random_hermitian(n: usize, seed: u64) -> Mat {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let a = Mat::from_fn(n, n, |_, _| c(next(), next()));
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// `exp(-i t H)` for Hermitian `H` through nalgebra's matrix exponential.
pub fn expm_h(h: &Mat, t: f64) -> Mat {
    (h * c(0.0, -t)).exp()
}

pub fn random_state(layout: Arc<RegisterLayout>, seed: u64) -> StateVector {
    let mut x = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut next = move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let amps: Vec<C64> = (0..layout.dim()).map(|_| c(next(), next())).collect();
    let mut s = StateVector::from_amplitudes(layout, amps).unwrap();
    s.normalize();
    s
}

pub fn as_col(s: &StateVector) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_vec(s.amps.clone())
}

/// Largest entry modulus.
pub trait MaxAbs {
    fn mx(&self) -> f64;
}

impl MaxAbs for Mat {
    fn mx(&self) -> f64 {
        max_abs(self)
    }
}
