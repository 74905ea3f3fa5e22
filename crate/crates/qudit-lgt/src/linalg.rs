//! Small dense complex linear algebra.
//!
//! Matrices here are at most a few hundred rows (local gates, Krylov
//! projections, sector blocks), so a cyclic Jacobi eigensolver is adequate.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:+.4}{:+.4}i", self[(i, j)].re, self[(i, j)].im))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].conj())
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        self.add(&other.scale(-ONE))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.matmul(&self.adjoint()).max_abs_diff(&CMat::identity(self.rows)) < tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) < tol
    }

    /// Kronecker product `self ⊗ other` (first factor most significant).
    pub fn kron(&self, other: &CMat) -> CMat {
        CMat::from_fn(self.rows * other.rows, self.cols * other.cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    /// Submatrix selecting the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CMat {
        CMat::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// Determinant by partial-pivot LU. Intended for small minors.
    pub fn det(&self) -> C64 {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return ONE;
        }
        if n == 1 {
            return self.data[0];
        }
        if n == 2 {
            return self.data[0] * self.data[3] - self.data[1] * self.data[2];
        }
        let mut a = self.data.clone();
        let mut det = ONE;
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if a[i * n + k].norm() > a[p * n + k].norm() {
                    p = i;
                }
            }
            if a[p * n + k] == ZERO {
                return ZERO;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let piv = a[k * n + k];
            det *= piv;
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                if f == ZERO {
                    continue;
                }
                for j in k..n {
                    let v = a[k * n + j];
                    a[i * n + j] -= f * v;
                }
            }
        }
        det
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
///
/// Returns eigenvalues in ascending order and the unitary whose columns are
/// the corresponding eigenvectors.
pub fn hermitian_eig(h: &CMat) -> Result<(Vec<f64>, CMat)> {
    if !h.is_square() {
        return Err(Error::InvalidParameter("eigensolver needs a square matrix".into()));
    }
    let n = h.rows;
    let mut a = h.clone();
    // enforce exact hermiticity so rounding in the input does not accumulate
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in i + 1..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = CMat::identity(n);
    let scale = a.frobenius_norm().max(1e-300);
    let mut converged = n < 2;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = 0.5 * (2.0 * mag).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                // J = diag(1, conj(phase)) * [[c, s], [-s, c]] acting on columns p, q
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                // A <- A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                // A <- J^† A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NumericFailure("Jacobi eigensolver did not converge".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    let evals = order.iter().map(|&k| a[(k, k)].re).collect();
    let evecs = CMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((evals, evecs))
}

/// Applies a scalar function to a Hermitian matrix through its eigenbasis.
pub fn hermitian_fn(h: &CMat, f: impl Fn(f64) -> C64) -> Result<CMat> {
    let (w, v) = hermitian_eig(h)?;
    let fw: Vec<C64> = w.iter().map(|&x| f(x)).collect();
    Ok(v.matmul(&CMat::diag(&fw)).matmul(&v.adjoint()))
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    hermitian_fn(h, |x| C64::from_polar(1.0, -x * t))
}

/// `exp(M)` for anti-Hermitian `M`.
pub fn expm_antihermitian(m: &CMat) -> Result<CMat> {
    // M = i K with K Hermitian
    let k = m.scale(C64::new(0.0, -1.0));
    if !k.is_hermitian(1e-10 * (1.0 + k.frobenius_norm())) {
        return Err(Error::InvalidParameter("generator is not anti-Hermitian".into()));
    }
    hermitian_fn(&k, |x| C64::from_polar(1.0, x))
}

/// Principal logarithm of a unitary matrix.
///
/// Eigenphases are taken in (-π, π]; an eigenvalue of exactly -1 maps to +iπ,
/// so `log(-I) = iπ I`.
pub fn log_unitary(u: &CMat) -> Result<CMat> {
    if !u.is_unitary(1e-10) {
        return Err(Error::InvalidParameter("log_unitary needs a unitary matrix".into()));
    }
    let n = u.rows;
    // A generic real combination of the commuting Hermitian parts separates
    // distinct eigenphases, so its eigenvectors diagonalize U.
    let herm = u.add(&u.adjoint()).scale(C64::new(0.5, 0.0));
    let anti = u.sub(&u.adjoint()).scale(C64::new(0.0, -0.5));
    let mix = herm.add(&anti.scale(C64::new(0.618_033_988_749_894_8, 0.0)));
    let (_, v) = hermitian_eig(&mix)?;
    let d = v.adjoint().matmul(u).matmul(&v);
    let mut logs = Vec::with_capacity(n);
    for i in 0..n {
        let z = d[(i, i)];
        let mut phi = z.arg();
        if phi <= -PI + 1e-12 {
            phi = PI;
        }
        logs.push(C64::new(z.norm().ln(), phi));
    }
    let out = v.matmul(&CMat::diag(&logs)).matmul(&v.adjoint());
    let back = expm_antihermitian(&anti_part(&out))?;
    if back.max_abs_diff(u) > 1e-9 {
        return Err(Error::NumericFailure("log_unitary failed to reproduce its input".into()));
    }
    Ok(out)
}

fn anti_part(m: &CMat) -> CMat {
    m.sub(&m.adjoint()).scale(C64::new(0.5, 0.0))
}

/// Principal logarithm of a Hermitian positive-definite matrix.
pub fn log_hpd(t: &CMat) -> Result<CMat> {
    let (w, v) = hermitian_eig(t)?;
    if let Some(bad) = w.iter().find(|&&x| x <= 0.0) {
        return Err(Error::NumericFailure(format!("matrix is not positive definite (eigenvalue {bad})")));
    }
    let lw: Vec<C64> = w.iter().map(|&x| C64::new(x.ln(), 0.0)).collect();
    Ok(v.matmul(&CMat::diag(&lw)).matmul(&v.adjoint()))
}

/// Neumaier-compensated sum; error stays O(ε) for the million-term sums of chain registers.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    let re = compensated_sum(a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im));
    let im = compensated_sum(a.iter().zip(b).map(|(x, y)| x.re * y.im - x.im * y.re));
    C64::new(re, im)
}

pub fn norm(a: &[C64]) -> f64 {
    compensated_sum(a.iter().map(|x| x.norm_sqr())).sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale_in_place(alpha: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Symmetric tridiagonal eigenproblem (Lanczos projections), real arithmetic.
///
/// `diag` has length m, `off` length m-1. Returns ascending eigenvalues and
/// the column-major eigenvector matrix as `vecs[k][i]` = component i of vector k.
pub fn tridiag_eig(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = diag.len();
    let h = CMat::from_fn(m, m, |i, j| {
        if i == j {
            C64::new(diag[i], 0.0)
        } else if i + 1 == j {
            C64::new(off[i], 0.0)
        } else if j + 1 == i {
            C64::new(off[j], 0.0)
        } else {
            ZERO
        }
    });
    let (w, v) = hermitian_eig(&h)?;
    let vecs = (0..m)
        .map(|k| {
            // eigenvectors of a real symmetric matrix are real up to a phase
            let col = v.column(k);
            let pivot = col.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ONE);
            let ph = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { ONE };
            col.iter().map(|x| (x * ph).re).collect()
        })
        .collect();
    Ok((w, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn jacobi_diagonalizes_small_hermitian() {
        let h = CMat::from_rows(&[
            vec![c(2.0, 0.0), c(1.0, -1.0), c(0.0, 0.5)],
            vec![c(1.0, 1.0), c(-1.0, 0.0), c(0.3, 0.0)],
            vec![c(0.0, -0.5), c(0.3, 0.0), c(0.5, 0.0)],
        ]);
        let (w, v) = hermitian_eig(&h).unwrap();
        assert!(v.is_unitary(1e-12));
        let back = v.matmul(&CMat::diag(&w.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())).matmul(&v.adjoint());
        assert!(back.max_abs_diff(&h) < 1e-12);
        assert!(w.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn log_of_minus_identity_is_i_pi() {
        let m = CMat::identity(2).scale(c(-1.0, 0.0));
        let l = log_unitary(&m).unwrap();
        assert!(l.max_abs_diff(&CMat::identity(2).scale(c(0.0, PI))) < 1e-12);
    }

    #[test]
    fn det_matches_closed_form() {
        let m = CMat::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, 0.0), c(1.0, 1.0), c(3.0, 0.0)],
            vec![c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        ]);
        // cofactor expansion along the first row
        let d = c(1.0, 0.0) * (c(1.0, 1.0) * c(1.0, 0.0) - c(3.0, 0.0) * c(0.0, 0.0))
            - c(2.0, 0.0) * (c(0.0, 0.0) * c(1.0, 0.0) - c(3.0, 0.0) * c(2.0, 0.0))
            + c(0.0, 1.0) * (c(0.0, 0.0) * c(0.0, 0.0) - c(1.0, 1.0) * c(2.0, 0.0));
        assert!((m.det() - d).norm() < 1e-12);
    }
}
