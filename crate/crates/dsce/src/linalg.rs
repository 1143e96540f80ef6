//! Small dense complex linear algebra used throughout the crate.
//!
//! Row-major `Complex64` matrices with the handful of operations the
//! estimators need: products, unitary DFT transforms, a cyclic Jacobi
//! eigendecomposition for Hermitian matrices, and a Moore-Penrose
//! pseudo-inverse built on top of it. Problem sizes here are tens of
//! rows/columns, so dense O(n^3) routines are the right tool.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;

pub type C64 = Complex64;

pub const ZERO: C64 = Complex64::new(0.0, 0.0);
pub const ONE: C64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        debug_assert!(rows.iter().all(|row| row.len() == c));
        CMat { rows: r, cols: c, data: rows.concat() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [C64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[C64]) {
        debug_assert_eq!(v.len(), self.rows);
        for r in 0..self.rows {
            self[(r, c)] = v[r];
        }
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let lrow = self.row(r);
            let orow = out.row_mut(r);
            for (k, &l) in lrow.iter().enumerate() {
                if l == ZERO {
                    continue;
                }
                let rrow = rhs.row(k);
                for (o, &x) in orow.iter_mut().zip(rrow.iter()) {
                    *o += l * x;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn col_norm(&self, c: usize) -> f64 {
        (0..self.rows).map(|r| self[(r, c)].norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Column subset, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> CMat {
        CMat::from_fn(self.rows, idx.len(), |r, c| self[(r, idx[c])])
    }

    /// Row subset, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> CMat {
        CMat::from_fn(idx.len(), self.cols, |r, c| self[(idx[r], c)])
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// exp(j phi)
#[inline]
pub fn cis(phi: f64) -> C64 {
    C64::new(phi.cos(), phi.sin())
}

/// Unitary DFT matrix, W[m, n] = n^{-1/2} exp(-j 2 pi m n / n).
pub fn dft_matrix(n: usize) -> CMat {
    let s = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |m, k| cis(-2.0 * PI * (m * k) as f64 / n as f64) * s)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward DFT: X[k] = sum_n x[n] exp(-j 2 pi k n / N).
pub fn fft_forward(x: &mut [C64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(x.len()).process(x));
}

/// In-place unnormalized inverse DFT: x[n] = sum_k X[k] exp(+j 2 pi k n / N).
pub fn fft_inverse(x: &mut [C64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(x.len()).process(x));
}

/// Apply the unitary DFT to a vector: W x.
pub fn unitary_dft(x: &[C64]) -> Vec<C64> {
    let mut v = x.to_vec();
    fft_forward(&mut v);
    let s = 1.0 / (x.len() as f64).sqrt();
    for c in v.iter_mut() {
        *c *= s;
    }
    v
}

/// Apply the inverse unitary DFT to a vector: W^H x.
pub fn unitary_idft(x: &[C64]) -> Vec<C64> {
    let mut v = x.to_vec();
    fft_inverse(&mut v);
    let s = 1.0 / (x.len() as f64).sqrt();
    for c in v.iter_mut() {
        *c *= s;
    }
    v
}

/// Unnormalized DFT of `x` zero-padded to length `n`:
/// X[m] = sum_l x[l] exp(-j 2 pi m l / n).
///
/// These are the Fourier columns the tap-domain identities use; the unitary
/// scaling stays with the outer symbol transforms.
pub fn dft_padded(x: &[C64], n: usize) -> Vec<C64> {
    debug_assert!(x.len() <= n);
    let mut v = vec![ZERO; n];
    v[..x.len()].copy_from_slice(x);
    fft_forward(&mut v);
    v
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with matching eigenvector columns,
/// so that `a * v_k = lambda_k * v_k`.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    assert_eq!(a.rows, a.cols, "hermitian_eigen needs a square matrix");
    let n = a.rows;
    let mut m = a.clone();
    let mut v = CMat::identity(n);
    if n <= 1 {
        let vals = if n == 1 { vec![m[(0, 0)].re] } else { vec![] };
        return (vals, v);
    }

    let scale = m.fro_norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let abs = apq.norm();
                if abs <= 1e-300 {
                    continue;
                }
                let phase = apq / abs; // e^{j alpha}
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * abs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J[p,p] = c, J[p,q] = s, J[q,p] = -s conj(phase), J[q,q] = c conj(phase)
                let e = phase.conj();
                // column update: M <- M J, V <- V J
                for r in 0..n {
                    let mp = m[(r, p)];
                    let mq = m[(r, q)];
                    m[(r, p)] = mp * c - mq * (s * e);
                    m[(r, q)] = mp * s + mq * (c * e);
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = vp * c - vq * (s * e);
                    v[(r, q)] = vp * s + vq * (c * e);
                }
                // row update: M <- J^H M
                let ec = phase;
                for k in 0..n {
                    let mp = m[(p, k)];
                    let mq = m[(q, k)];
                    m[(p, k)] = mp * c - mq * (s * ec);
                    m[(q, k)] = mp * s + mq * (c * ec);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = CMat::from_fn(n, n, |r, c| v[(r, order[c])]);
    (sorted_vals, sorted_vecs)
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
///
/// Rank is decided against `rel_tol * sigma_max` on the eigenvalues of the
/// Gram matrix of the smaller side. Going through the Gram matrix squares the
/// conditioning, so eigenvalues below the Jacobi noise floor
/// (`n * eps * lambda_max`) are always treated as zero regardless of
/// `rel_tol`.
pub fn pinv(a: &CMat, rel_tol: f64) -> CMat {
    let tall = a.rows >= a.cols;
    let gram = if tall {
        a.adjoint().mul(a)
    } else {
        a.mul(&a.adjoint())
    };
    let (vals, vecs) = hermitian_eigen(&gram);
    let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let k = gram.rows();
    let noise_floor = 8.0 * k as f64 * f64::EPSILON;
    let cut = lmax * (rel_tol * rel_tol).max(noise_floor);
    // vecs * diag(lambda_plus) * vecs^H, with lambda = sigma^2
    let mut mid = CMat::zeros(k, k);
    for i in 0..k {
        if vals[i] > cut {
            let inv = C64::new(1.0 / vals[i], 0.0);
            for r in 0..k {
                for c in 0..k {
                    mid[(r, c)] += vecs[(r, i)] * inv * vecs[(c, i)].conj();
                }
            }
        }
    }
    if tall {
        mid.mul(&a.adjoint())
    } else {
        a.adjoint().mul(&mid)
    }
}

/// Minimum-norm least-squares solve of `a x = y` for a matrix right-hand side.
pub fn lstsq(a: &CMat, y: &CMat) -> CMat {
    pinv(a, 1e-10).mul(y)
}
