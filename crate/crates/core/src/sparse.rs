//! Tubal-sparse coding.
//!
//! Solves `min_X ||Y - D * X||_F^2 + lambda ||X||_{1,1,2}` by ADMM on the split
//! `X = Z`:
//!
//! * X-update: per Fourier slice, `(2 D^H D + rho I) X = 2 D^H Y - Q + rho Z`;
//! * Z-update: tube shrinkage of `X + Q / rho` with threshold `lambda / rho`;
//! * Q-update: `Q += rho (X - Z)`.
//!
//! The masked variant restricts the data term to observed rows. Observability
//! is constant along mode 3, so the restriction commutes with the mode-3 FFT
//! and each slice simply drops the unobserved rows of `D` and `Y`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::linalg::{mul_into, CMat, Cholesky};
use crate::tcore::{fft_mode3, ifft_mode3, l112_norm, FTensor3, Tensor3};
use crate::{Error, Result};

pub const DEFAULT_RHO: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 200;

/// Empirical default sparsity weight for data of unit-order magnitude.
pub fn default_lambda(n3: usize) -> f64 {
    0.05 * libm::sqrt(n3 as f64)
}

/// Proximal operator of `kappa * ||.||_{1,1,2}`: every tube is scaled by
/// `(1 - kappa / ||tube||)_+`.
pub fn tube_shrink(c: &Tensor3, kappa: f64) -> Tensor3 {
    let (n1, n2, _) = c.dims();
    let mut out = c.clone();
    for j in 0..n2 {
        for i in 0..n1 {
            let nrm = c.tube_norm(i, j);
            let scale = if nrm > kappa { 1.0 - kappa / nrm } else { 0.0 };
            for k in 0..c.n3() {
                out[(i, j, k)] *= scale;
            }
        }
    }
    out
}

/// Which rows (pixels of a vectorised patch) of the data are observed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowMask(Vec<bool>);

impl RowMask {
    pub fn new(observed: Vec<bool>) -> Self {
        RowMask(observed)
    }

    pub fn full(len: usize) -> Self {
        RowMask(vec![true; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_observed(&self, row: usize) -> bool {
        self.0[row]
    }

    pub fn observed_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn observed_rows(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

/// One tubal-sparse coding problem.
#[derive(Debug, Clone, Copy)]
pub struct SparseCodeProblem<'a> {
    /// `d x n x n3` data, one tensor column per signal.
    pub y: &'a Tensor3,
    /// `d x K x n3` dictionary.
    pub dict: &'a Tensor3,
    pub lambda: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub mask: Option<&'a RowMask>,
}

impl<'a> SparseCodeProblem<'a> {
    pub fn new(y: &'a Tensor3, dict: &'a Tensor3, lambda: f64) -> Self {
        Self {
            y,
            dict,
            lambda,
            rho: DEFAULT_RHO,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            mask: None,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_mask(mut self, mask: &'a RowMask) -> Self {
        self.mask = Some(mask);
        self
    }

    fn validate(&self) -> Result<()> {
        let (d, _, n3) = self.dict.dims();
        let (yd, _, yn3) = self.y.dims();
        if yd != d || yn3 != n3 {
            return Err(Error::DimensionMismatch(format!(
                "data is {yd}x?x{yn3}, dictionary is {d}x?x{n3}"
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if let Some(m) = self.mask {
            if m.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "mask has {} rows, data has {d}",
                    m.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SparseCodeResult {
    /// `K x n x n3` tubal-sparse code (the post-shrink iterate).
    pub x: Tensor3,
    /// Objective at the shrunk iterate after every iteration.
    pub objective_trace: Vec<f64>,
    /// `||X - Z||_F` per iteration.
    pub primal_residuals: Vec<f64>,
    /// `rho ||Z - Z_prev||_F` per iteration.
    pub dual_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-slice factorisations of the X-update normal equations for a fixed
/// dictionary, penalty and row mask.
#[derive(Debug, Clone)]
pub struct SliceSolver {
    dims: (usize, usize, usize),
    rho: f64,
    rows: Option<Vec<usize>>,
    /// Observed rows of every independent Fourier slice of `D`.
    dhat: Vec<CMat>,
    chol: Vec<Cholesky>,
}

fn slice_weight(s: usize, n3: usize) -> f64 {
    if s == 0 || 2 * s == n3 {
        1.0
    } else {
        2.0
    }
}

impl SliceSolver {
    pub fn new(dict: &Tensor3, rho: f64, mask: Option<&RowMask>) -> Result<Self> {
        let (d, k, n3) = dict.dims();
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
        }
        let rows = match mask {
            Some(m) => {
                if m.len() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "mask has {} rows, dictionary has {d}",
                        m.len()
                    )));
                }
                if m.observed_count() == 0 {
                    return Err(Error::EmptyMask);
                }
                if m.observed_count() == d {
                    None
                } else {
                    Some(m.observed_rows())
                }
            }
            None => None,
        };
        let fd = fft_mode3(dict);
        let half = fd.independent_slices();
        let mut dhat = Vec::with_capacity(half);
        let mut chol = Vec::with_capacity(half);
        for s in 0..half {
            let full = fd.slice_mat(s);
            let ds = match &rows {
                Some(r) => full.select_rows(r),
                None => full,
            };
            let mut g = ds.adj_mul(&ds);
            for v in g.data.iter_mut() {
                *v *= 2.0;
            }
            for i in 0..k {
                let di = g.at(i, i) + Complex64::new(rho, 0.0);
                g.set(i, i, di);
            }
            chol.push(Cholesky::new(&g, s)?);
            dhat.push(ds);
        }
        Ok(Self {
            dims: (d, k, n3),
            rho,
            rows,
            dhat,
            chol,
        })
    }

    fn observed_slice(&self, f: &FTensor3, s: usize) -> CMat {
        let m = f.slice_mat(s);
        match &self.rows {
            Some(r) => m.select_rows(r),
            None => m,
        }
    }

    /// `2 D^H Y` restricted to observed rows, one matrix per independent slice.
    fn data_term(&self, yhat: &FTensor3) -> Vec<CMat> {
        (0..self.dhat.len())
            .map(|s| {
                let mut m = self.dhat[s].adj_mul(&self.observed_slice(yhat, s));
                for v in m.data.iter_mut() {
                    *v *= 2.0;
                }
                m
            })
            .collect()
    }

    /// Solves the normal equations with right-hand side `dty + fft(w)`.
    fn solve(&self, dty: &[CMat], w: &Tensor3) -> Result<Tensor3> {
        let (_, k, n3) = self.dims;
        let n = w.n2();
        let fw = fft_mode3(w);
        let mut fx = FTensor3::zeros(k, n, n3);
        for (s, dt) in dty.iter().enumerate() {
            let mut rhs = fw.slice_mat(s);
            for (r, &b) in rhs.data.iter_mut().zip(&dt.data) {
                *r += b;
            }
            self.solve_slice(s, &mut rhs)?;
            fx.set_slice_mat(s, &rhs);
        }
        fx.fill_mirrors();
        ifft_mode3(&fx)
    }

    fn solve_slice(&self, s: usize, rhs: &mut CMat) -> Result<()> {
        self.chol[s].solve_in_place(rhs);
        if rhs.data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::SingularSystem { slice: s });
        }
        Ok(())
    }

    /// One X-update from spatial-domain iterates: the minimiser of
    /// `||P(Y - D * X)||^2 + <Q, X> + rho/2 ||X - Z||^2`.
    pub fn x_update(&self, y: &Tensor3, z: &Tensor3, q: &Tensor3) -> Result<Tensor3> {
        let dty = self.data_term(&fft_mode3(y));
        let mut w = z.scaled(self.rho);
        w.axpy(-1.0, q);
        self.solve(&dty, &w)
    }

    /// `||P(Y - D * X)||_F^2` from half-spectrum slices of `Y` (observed rows)
    /// and `X`, via Parseval.
    fn data_misfit(&self, yobs: &[CMat], xs: &[CMat]) -> f64 {
        let n3 = self.dims.2;
        let mut total = 0.0;
        let mut r = CMat::zeros(0, 0);
        for s in 0..self.dhat.len() {
            r.rows = self.dhat[s].rows;
            r.cols = xs[s].cols;
            r.data.resize(r.rows * r.cols, Complex64::new(0.0, 0.0));
            mul_into(&self.dhat[s], &xs[s], &mut r);
            let e: f64 = r.data.iter().zip(&yobs[s].data).map(|(a, b)| (b - a).norm_sqr()).sum();
            total += slice_weight(s, n3) * e;
        }
        total / n3 as f64
    }
}

/// Objective `||P(Y - D * X)||_F^2 + lambda ||X||_{1,1,2}` of a problem at `x`.
pub fn objective(p: &SparseCodeProblem<'_>, x: &Tensor3) -> Result<f64> {
    p.validate()?;
    let misfit = match p.mask {
        None => {
            let r = crate::tcore::tprod(p.dict, x)?;
            let e = p.y.distance(&r);
            e * e
        }
        Some(m) => {
            let r = crate::tcore::tprod(p.dict, x)?;
            let mut e = 0.0;
            for k in 0..p.y.n3() {
                for j in 0..p.y.n2() {
                    for i in 0..p.y.n1() {
                        if m.is_observed(i) {
                            let d = p.y[(i, j, k)] - r[(i, j, k)];
                            e += d * d;
                        }
                    }
                }
            }
            e
        }
    };
    Ok(misfit + p.lambda * l112_norm(x))
}

// All iterates live on the independent half of the mode-3 spectrum. Tube
// norms, and therefore the shrinkage step, are available there through
// Parseval, so no transforms are needed inside the loop.
fn admm(p: &SparseCodeProblem<'_>) -> Result<SparseCodeResult> {
    let (_, k, n3) = p.dict.dims();
    let n = p.y.n2();
    let solver = SliceSolver::new(p.dict, p.rho, p.mask)?;
    let yhat = fft_mode3(p.y);
    let dty = solver.data_term(&yhat);
    let half = dty.len();
    let yobs: Vec<CMat> = (0..half).map(|s| solver.observed_slice(&yhat, s)).collect();
    let weights: Vec<f64> = (0..half).map(|s| slice_weight(s, n3) / n3 as f64).collect();
    let threshold = p.tol * libm::sqrt((k * n * n3) as f64);
    let kappa = p.lambda / p.rho;
    let inv_rho = 1.0 / p.rho;
    let tubes = k * n;

    let mut z = vec![CMat::zeros(k, n); half];
    let mut q = vec![CMat::zeros(k, n); half];
    let mut x = vec![CMat::zeros(k, n); half];
    let mut scale = vec![0.0; tubes];
    let mut objective_trace = Vec::new();
    let mut primal_residuals = Vec::new();
    let mut dual_residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..p.max_iters {
        iterations += 1;
        for s in 0..half {
            let xs = &mut x[s];
            for (((o, &d), &zv), &qv) in xs.data.iter_mut().zip(&dty[s].data).zip(&z[s].data).zip(&q[s].data) {
                *o = d + zv * p.rho - qv;
            }
            solver.solve_slice(s, xs)?;
        }

        // Shrinkage of C = X + Q / rho, tube by tube.
        let mut l112 = 0.0;
        for (e, sc) in scale.iter_mut().enumerate() {
            let mut sq = 0.0;
            for s in 0..half {
                sq += weights[s] * (x[s].data[e] + q[s].data[e] * inv_rho).norm_sqr();
            }
            let nrm = libm::sqrt(sq);
            *sc = if nrm > kappa { 1.0 - kappa / nrm } else { 0.0 };
            l112 += *sc * nrm;
        }

        let mut primal_sq = 0.0;
        let mut dual_sq = 0.0;
        for s in 0..half {
            let w = weights[s];
            let (xs, zs, qs) = (&x[s].data, &mut z[s].data, &mut q[s].data);
            for e in 0..tubes {
                let znew = (xs[e] + qs[e] * inv_rho) * scale[e];
                let diff = xs[e] - znew;
                primal_sq += w * diff.norm_sqr();
                dual_sq += w * (znew - zs[e]).norm_sqr();
                qs[e] += diff * p.rho;
                zs[e] = znew;
            }
        }
        let primal = libm::sqrt(primal_sq);
        let dual = p.rho * libm::sqrt(dual_sq);
        primal_residuals.push(primal);
        dual_residuals.push(dual);
        objective_trace.push(solver.data_misfit(&yobs, &z) + p.lambda * l112);

        if primal <= threshold && dual <= threshold {
            converged = true;
            break;
        }
    }

    let mut fz = FTensor3::zeros(k, n, n3);
    for (s, zs) in z.iter().enumerate() {
        fz.set_slice_mat(s, zs);
    }
    fz.fill_mirrors();
    let mut x = ifft_mode3(&fz)?;
    // Shrunk tubes are exactly zero in the spectrum; keep them exactly zero.
    for j in 0..n {
        for i in 0..k {
            if scale[j * k + i] == 0.0 {
                for t in 0..n3 {
                    x[(i, j, t)] = 0.0;
                }
            }
        }
    }

    Ok(SparseCodeResult {
        x,
        objective_trace,
        primal_residuals,
        dual_residuals,
        iterations,
        converged,
    })
}

/// Unmasked tubal-sparse coding of every column of `p.y`.
pub fn sparse_code(p: &SparseCodeProblem<'_>) -> Result<SparseCodeResult> {
    p.validate()?;
    if p.mask.is_some() {
        return Err(Error::InvalidParameter("mask given; use masked_sparse_code".into()));
    }
    admm(p)
}

/// Tubal-sparse coding against the observed rows only.
pub fn masked_sparse_code(p: &SparseCodeProblem<'_>) -> Result<SparseCodeResult> {
    p.validate()?;
    match p.mask {
        None => Err(Error::InvalidParameter("masked_sparse_code needs a mask".into())),
        Some(m) if m.observed_count() == 0 => Err(Error::EmptyMask),
        Some(_) => admm(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcore::identity_tensor;
    use alloc::vec;

    #[test]
    fn shrink_examples() {
        let c = Tensor3::new(1, 1, 2, vec![3.0, 4.0]).unwrap();
        let z = tube_shrink(&c, 1.0);
        assert!((z[(0, 0, 0)] - 2.4).abs() < 1e-15);
        assert!((z[(0, 0, 1)] - 3.2).abs() < 1e-15);
        assert_eq!(tube_shrink(&c, 5.0), Tensor3::zeros(1, 1, 2));
        assert_eq!(tube_shrink(&c, 7.0), Tensor3::zeros(1, 1, 2));
        let s = Tensor3::new(3, 1, 1, vec![-2.0, 0.5, 1.25]).unwrap();
        let t = tube_shrink(&s, 1.0);
        for (a, b) in t.as_slice().iter().zip([-1.0, 0.0, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_data_converges_immediately() {
        let y = Tensor3::zeros(4, 3, 2);
        let d = identity_tensor(4, 2);
        let r = sparse_code(&SparseCodeProblem::new(&y, &d, 0.1)).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert_eq!(r.x, Tensor3::zeros(4, 3, 2));
    }

    #[test]
    fn parameter_validation() {
        let y = Tensor3::zeros(4, 3, 2);
        let d = identity_tensor(4, 2);
        assert!(sparse_code(&SparseCodeProblem::new(&y, &d, 0.0)).is_err());
        assert!(sparse_code(&SparseCodeProblem::new(&y, &d, 0.1).with_rho(-1.0)).is_err());
        assert!(sparse_code(&SparseCodeProblem::new(&y, &Tensor3::zeros(3, 4, 2), 0.1)).is_err());
        let m = RowMask::full(4);
        assert!(sparse_code(&SparseCodeProblem::new(&y, &d, 0.1).with_mask(&m)).is_err());
        assert!(masked_sparse_code(&SparseCodeProblem::new(&y, &d, 0.1)).is_err());
        let empty = RowMask::new(vec![false; 4]);
        assert_eq!(
            masked_sparse_code(&SparseCodeProblem::new(&y, &d, 0.1).with_mask(&empty)).unwrap_err(),
            Error::EmptyMask
        );
        let short = RowMask::full(3);
        assert!(masked_sparse_code(&SparseCodeProblem::new(&y, &d, 0.1).with_mask(&short)).is_err());
    }

    #[test]
    fn single_observed_row_with_large_lambda_gives_zero() {
        let y = Tensor3::from_fn(4, 2, 3, |i, j, k| (i + j + k) as f64 * 0.1);
        let d = identity_tensor(4, 3);
        let mask = RowMask::new(vec![false, true, false, false]);
        let r = masked_sparse_code(&SparseCodeProblem::new(&y, &d, 100.0).with_mask(&mask)).unwrap();
        assert_eq!(r.x, Tensor3::zeros(4, 2, 3));
    }
}
