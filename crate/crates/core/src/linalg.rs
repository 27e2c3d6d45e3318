//! Small dense complex matrices for per-Fourier-slice work: products,
//! Hermitian Cholesky solves and a one-sided Jacobi SVD.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_slice(rows: usize, cols: usize, data: &[Complex64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn select_rows(&self, rows: &[usize]) -> CMat {
        let mut out = CMat::zeros(rows.len(), self.cols);
        for j in 0..self.cols {
            for (ii, &i) in rows.iter().enumerate() {
                out.data[j * rows.len() + ii] = self.at(i, j);
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.data[i * self.cols + j] = self.at(i, j).conj();
            }
        }
        out
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        mul_into(self, rhs, &mut out);
        out
    }

    /// `self^H * rhs`.
    pub fn adj_mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.rows, rhs.rows, "adjoint matmul shape mismatch");
        let mut out = CMat::zeros(self.cols, rhs.cols);
        for j in 0..rhs.cols {
            let b = rhs.col(j);
            for i in 0..self.cols {
                out.data[j * self.cols + i] = cdot(self.col(i), b);
            }
        }
        out
    }

    /// `self * rhs^H`.
    pub fn mul_adj(&self, rhs: &CMat) -> CMat {
        self.mul(&rhs.adjoint())
    }

    #[cfg(test)]
    pub fn fro_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|c| c.norm_sqr()).sum::<f64>())
    }
}

/// `out = a * b` (overwrites `out`).
pub fn mul_into(a: &CMat, b: &CMat, out: &mut CMat) {
    debug_assert_eq!((out.rows, out.cols), (a.rows, b.cols));
    for v in out.data.iter_mut() {
        *v = ZERO;
    }
    let m = a.rows;
    for j in 0..b.cols {
        let oc = &mut out.data[j * m..(j + 1) * m];
        for k in 0..a.cols {
            let bkj = b.data[j * b.rows + k];
            if bkj == ZERO {
                continue;
            }
            let ac = &a.data[k * m..(k + 1) * m];
            for (o, &x) in oc.iter_mut().zip(ac) {
                *o += x * bkj;
            }
        }
    }
}

/// `x^H y`.
#[inline]
pub fn cdot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in x.iter().zip(y) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    Complex64::new(re, im)
}

#[inline]
pub fn norm_sq(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum()
}

/// Lower Cholesky factor of a Hermitian positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMat,
}

impl Cholesky {
    /// Factors `a`; `slice` only labels the error.
    pub fn new(a: &CMat, slice: usize) -> Result<Self> {
        assert_eq!(a.rows, a.cols);
        let n = a.rows;
        let mut l = CMat::zeros(n, n);
        for j in 0..n {
            let mut d = a.at(j, j).re;
            for k in 0..j {
                d -= l.at(j, k).norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularSystem { slice });
            }
            let djj = libm::sqrt(d);
            l.set(j, j, Complex64::new(djj, 0.0));
            for i in j + 1..n {
                let mut s = a.at(i, j);
                for k in 0..j {
                    s -= l.at(i, k) * l.at(j, k).conj();
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { l })
    }

    /// Solves `A X = B` in place for every column of `b`.
    pub fn solve_in_place(&self, b: &mut CMat) {
        let n = self.l.rows;
        assert_eq!(b.rows, n);
        let l = &self.l;
        for j in 0..b.cols {
            let x = b.col_mut(j);
            // L y = b, column by column
            for k in 0..n {
                let col = &l.data[k * n..(k + 1) * n];
                let xk = x[k] / col[k].re;
                x[k] = xk;
                for i in k + 1..n {
                    x[i] -= col[i] * xk;
                }
            }
            // L^H x = y
            for i in (0..n).rev() {
                let mut s = x[i];
                for k in i + 1..n {
                    s -= l.data[i * n + k].conj() * x[k];
                }
                x[i] = s / l.data[i * n + i].re;
            }
        }
    }
}

/// Full SVD `A = U diag(s) V^H` with square unitary `U`, `V`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi on the columns of `w`, accumulating the
/// rotations in `v`. Requires `w.rows >= w.cols`.
fn one_sided_jacobi(w: &mut CMat, v: &mut CMat) -> Result<()> {
    let n = w.cols;
    let eps = f64::EPSILON;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norm_sq(w.col(p));
                let beta = norm_sq(w.col(q));
                let gamma = cdot(w.col(p), w.col(q));
                let g = gamma.norm();
                if g == 0.0 || g <= eps * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let e = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + libm::sqrt(1.0 + zeta * zeta))
                } else {
                    -1.0 / (-zeta + libm::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                let ec = e.conj();
                rotate_cols(w, p, q, c, s, ec);
                rotate_cols(v, p, q, c, s, ec);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::DecompositionError(format!(
        "Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

#[inline]
fn rotate_cols(m: &mut CMat, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let rows = m.rows;
    for i in 0..rows {
        let xp = m.data[p * rows + i];
        let xq = m.data[q * rows + i] * phase;
        m.data[p * rows + i] = xp * c - xq * s;
        m.data[q * rows + i] = xp * s + xq * c;
    }
}

/// Extends the orthonormal columns `basis[..have]` of a square matrix to a
/// full unitary matrix. Each new column is the standard basis vector with the
/// largest component outside the current span, orthogonalised.
fn complete_basis(basis: &mut CMat, filled: &mut [bool]) {
    let n = basis.rows;
    let project_out = |basis: &CMat, filled: &[bool], x: &mut [Complex64]| {
        // Two rounds of Gram-Schmidt against every filled column.
        for _ in 0..2 {
            for jj in 0..basis.cols {
                if !filled[jj] {
                    continue;
                }
                let proj = cdot(basis.col(jj), x);
                for (xi, &bi) in x.iter_mut().zip(basis.col(jj)) {
                    *xi -= bi * proj;
                }
            }
        }
    };
    for j in 0..basis.cols {
        if filled[j] {
            continue;
        }
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        for candidate in 0..n {
            let mut x = vec![ZERO; n];
            x[candidate] = ONE;
            project_out(basis, filled, &mut x);
            let nrm = libm::sqrt(norm_sq(&x));
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, x));
            }
        }
        let (nrm, x) = best.expect("basis has at least one row");
        for (dst, xi) in basis.col_mut(j).iter_mut().zip(&x) {
            *dst = xi / nrm;
        }
        filled[j] = true;
    }
}

/// Unit-modulus factor that makes the largest-magnitude entry of `col` real
/// and positive.
pub fn canonical_phase(col: &[Complex64]) -> Complex64 {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, c) in col.iter().enumerate() {
        let mag = c.norm_sqr();
        // Ties resolve to the first index; tolerate roundoff-level ties.
        if mag > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = mag;
        }
    }
    let pivot = col[best];
    let mag = pivot.norm();
    if mag == 0.0 {
        ONE
    } else {
        pivot.conj() / mag
    }
}

impl CMat {
    /// Full SVD with descending singular values and canonical phases: every
    /// left singular vector has its largest-magnitude entry real and positive,
    /// with the paired right vector rotated by the same factor.
    pub fn svd(&self) -> Result<Svd> {
        let (m, n) = (self.rows, self.cols);
        if self.data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::DecompositionError("non-finite matrix entry".into()));
        }
        let transposed = m < n;
        let mut w = if transposed { self.adjoint() } else { self.clone() };
        let (big, small) = (w.rows, w.cols);
        let mut rot = CMat::identity(small);
        one_sided_jacobi(&mut w, &mut rot)?;

        let mut sigma: Vec<f64> = (0..small).map(|j| libm::sqrt(norm_sq(w.col(j)))).collect();
        let mut order: Vec<usize> = (0..small).collect();
        order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap().then(a.cmp(&b)));
        let smax = order.first().map(|&j| sigma[j]).unwrap_or(0.0);
        let cutoff = smax * (big as f64) * f64::EPSILON;

        let mut left = CMat::zeros(big, big);
        let mut right = CMat::zeros(small, small);
        let mut filled = vec![false; big];
        let mut sorted = vec![0.0; small];
        for (dst, &src) in order.iter().enumerate() {
            sorted[dst] = sigma[src];
            right.col_mut(dst).copy_from_slice(rot.col(src));
            if sigma[src] > cutoff && sigma[src] > 0.0 {
                let inv = 1.0 / sigma[src];
                for (o, x) in left.col_mut(dst).iter_mut().zip(w.col(src)) {
                    *o = x * inv;
                }
                filled[dst] = true;
            }
        }
        complete_basis(&mut left, &mut filled);
        sigma = sorted;

        let (mut u, mut v) = if transposed { (right, left) } else { (left, right) };
        let paired = m.min(n);
        for j in 0..u.cols {
            let ph = canonical_phase(u.col(j));
            for x in u.col_mut(j) {
                *x *= ph;
            }
            if j < paired {
                for x in v.col_mut(j) {
                    *x *= ph;
                }
            }
        }
        for j in paired..v.cols {
            let ph = canonical_phase(v.col(j));
            for x in v.col_mut(j) {
                *x *= ph;
            }
        }
        Ok(Svd { u, s: sigma, v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(m: usize, n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = CMat::zeros(m, n);
        for v in a.data.iter_mut() {
            *v = Complex64::new(next(), next());
        }
        a
    }

    fn check_svd(a: &CMat) {
        let svd = a.svd().unwrap();
        let (m, n) = (a.rows, a.cols);
        let mut sig = CMat::zeros(m, n);
        for i in 0..m.min(n) {
            sig.set(i, i, Complex64::new(svd.s[i], 0.0));
        }
        let rec = svd.u.mul(&sig).mul_adj(&svd.v);
        let err = rec
            .data
            .iter()
            .zip(&a.data)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>();
        assert!(libm::sqrt(err) < 1e-12 * (1.0 + a.fro_norm()), "reconstruction {m}x{n}");
        let uu = svd.u.adj_mul(&svd.u);
        let vv = svd.v.adj_mul(&svd.v);
        let id_m = CMat::identity(m);
        let id_n = CMat::identity(n);
        let du = uu
            .data
            .iter()
            .zip(&id_m.data)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        let dv = vv
            .data
            .iter()
            .zip(&id_n.data)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(du < 1e-12 && dv < 1e-12, "orthogonality {m}x{n}: {du} {dv}");
        for w in svd.s.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn svd_random_shapes() {
        for (m, n) in [(1, 1), (3, 3), (5, 2), (2, 5), (8, 7), (1, 4), (4, 1)] {
            check_svd(&test_matrix(m, n, (m * 31 + n) as u64));
        }
    }

    #[test]
    fn svd_rank_deficient_and_zero() {
        let z = CMat::zeros(4, 3);
        check_svd(&z);
        let a = test_matrix(5, 1, 9);
        let b = test_matrix(1, 4, 10);
        check_svd(&a.mul(&b));
    }

    #[test]
    fn svd_of_real_matrix_stays_real() {
        let mut a = test_matrix(4, 3, 3);
        for v in a.data.iter_mut() {
            v.im = 0.0;
        }
        let svd = a.svd().unwrap();
        assert!(svd.u.data.iter().chain(&svd.v.data).all(|c| c.im == 0.0));
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        let b = test_matrix(6, 4, 5);
        let mut a = b.adj_mul(&b);
        for i in 0..4 {
            let d = a.at(i, i) + Complex64::new(0.5, 0.0);
            a.set(i, i, d);
        }
        let rhs = test_matrix(4, 3, 6);
        let mut x = rhs.clone();
        Cholesky::new(&a, 0).unwrap().solve_in_place(&mut x);
        let back = a.mul(&x);
        for (p, q) in back.data.iter().zip(&rhs.data) {
            assert!((p - q).norm() < 1e-12);
        }
        assert!(Cholesky::new(&CMat::zeros(2, 2), 3).is_err());
    }
}
