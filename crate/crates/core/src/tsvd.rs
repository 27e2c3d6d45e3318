//! Tensor SVD, tubal rank and tubal-rank truncation.
//!
//! `M = U * S * V^T` is assembled from one matrix SVD per Fourier slice. Only
//! the first `n3 / 2 + 1` slices are decomposed; the rest are the conjugates
//! of their mirrors, which keeps `U`, `S` and `V` real after the inverse FFT.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng as _;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use crate::linalg::{canonical_phase, cdot, norm_sq, CMat};
use crate::rng::Rng;
use crate::tcore::{fft_mode3, ifft_mode3, tprod, ttranspose, FTensor3, Tensor3, Tube};
use crate::{Error, Result};

/// Factors of a t-SVD.
#[derive(Debug, Clone)]
pub struct TSvdFactors {
    /// `n1 x n1 x n3`, t-orthogonal.
    pub u: Tensor3,
    /// `n1 x n2 x n3`, f-diagonal.
    pub s: Tensor3,
    /// `n2 x n2 x n3`, t-orthogonal.
    pub v: Tensor3,
    /// Singular values of every Fourier slice, descending.
    pub spectrum: Vec<Vec<f64>>,
}

impl TSvdFactors {
    /// `U * S * V^T`.
    pub fn reconstruct(&self) -> Result<Tensor3> {
        tprod(&tprod(&self.u, &self.s)?, &ttranspose(&self.v))
    }

    /// Frobenius norms of the diagonal tubes `S(i,i,:)`.
    pub fn diagonal_tube_norms(&self) -> Vec<f64> {
        let r = self.s.n1().min(self.s.n2());
        (0..r).map(|i| self.s.tube_norm(i, i)).collect()
    }
}

pub fn tsvd(m: &Tensor3) -> Result<TSvdFactors> {
    let (n1, n2, n3) = m.dims();
    let fm = fft_mode3(m);
    let mut fu = FTensor3::zeros(n1, n1, n3);
    let mut fs = FTensor3::zeros(n1, n2, n3);
    let mut fv = FTensor3::zeros(n2, n2, n3);
    let mut spectrum = vec![Vec::new(); n3];
    let half = fm.independent_slices();
    for s in 0..half {
        let svd = fm.slice_mat(s).svd()?;
        fu.set_slice_mat(s, &svd.u);
        fv.set_slice_mat(s, &svd.v);
        for (i, &sv) in svd.s.iter().enumerate() {
            fs.set(i, i, s, Complex64::new(sv, 0.0));
        }
        spectrum[s] = svd.s;
    }
    for s in half..n3 {
        spectrum[s] = spectrum[fm.mirror(s)].clone();
    }
    fu.fill_mirrors();
    fs.fill_mirrors();
    fv.fill_mirrors();
    Ok(TSvdFactors {
        u: ifft_mode3(&fu)?,
        s: ifft_mode3(&fs)?,
        v: ifft_mode3(&fv)?,
        spectrum,
    })
}

/// Optimal tubal-rank-`k` approximation `sum_{i<k} U(:,i,:) * S(i,i,:) * V(:,i,:)^T`.
pub fn truncate(f: &TSvdFactors, k: usize) -> Result<Tensor3> {
    let (n1, n2, _) = f.s.dims();
    let max = n1.min(n2);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    let cols: Vec<usize> = (0..k).collect();
    let uk = f.u.select_columns(&cols);
    let sk = f.s.leading_block(k, k);
    let vk = f.v.select_columns(&cols);
    tprod(&tprod(&uk, &sk)?, &ttranspose(&vk))
}

/// Number of diagonal tubes of `S` whose norm exceeds `tol` times the norm of
/// the leading tube.
pub fn tubal_rank(m: &Tensor3, tol: f64) -> Result<usize> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter("tubal rank tolerance must be >= 0".into()));
    }
    let norms = tsvd(m)?.diagonal_tube_norms();
    let lead = norms.first().copied().unwrap_or(0.0);
    Ok(norms.iter().filter(|&&x| x > tol * lead).count())
}

/// Settings for the power-iteration rank-1 approximation.
#[derive(Debug, Clone, Copy)]
pub struct Rank1Options {
    pub max_iters: usize,
    /// Converged once successive unit iterates differ by at most this much.
    pub tol: f64,
    pub seed: u64,
}

impl Default for Rank1Options {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Diagnostics {
    /// Power iterations spent on each independent Fourier slice.
    pub iterations: Vec<usize>,
    pub converged: bool,
}

/// Leading tubal triplet: `M ~ u * s * v^T`.
#[derive(Debug, Clone)]
pub struct Rank1Approx {
    /// `n1 x 1 x n3`, unit Frobenius norm.
    pub u: Tensor3,
    pub s: Tube,
    /// `n2 x 1 x n3`.
    pub v: Tensor3,
    pub diagnostics: Rank1Diagnostics,
}

impl Rank1Approx {
    pub fn reconstruct(&self) -> Result<Tensor3> {
        tprod(&tprod(&self.u, &self.s.to_tensor())?, &ttranspose(&self.v))
    }
}

/// Fourier-domain leading triplet of every slice of a real-origin spectrum.
pub(crate) struct SpectralRank1 {
    pub u: FTensor3,
    pub sigma: Vec<f64>,
    pub v: FTensor3,
    pub diagnostics: Rank1Diagnostics,
}

pub(crate) fn rank1_fourier(fm: &FTensor3, opts: &Rank1Options) -> SpectralRank1 {
    let (n1, n2, n3) = fm.dims();
    let mut fu = FTensor3::zeros(n1, 1, n3);
    let mut fv = FTensor3::zeros(n2, 1, n3);
    let mut sigma = vec![0.0; n3];
    let half = fm.independent_slices();
    let mut rng = Rng::seed_from_u64(opts.seed);
    let mut iterations = Vec::with_capacity(half);
    let mut converged = true;
    for s in 0..half {
        let a = fm.slice_mat(s);
        let (u, sv, v, its, ok) = dominant_triplet(&a, opts, &mut rng);
        fu.slice_mut(s).copy_from_slice(&u);
        fv.slice_mut(s).copy_from_slice(&v);
        sigma[s] = sv;
        iterations.push(its);
        converged &= ok;
    }
    for s in half..n3 {
        sigma[s] = sigma[fm.mirror(s)];
    }
    fu.fill_mirrors();
    fv.fill_mirrors();
    SpectralRank1 {
        u: fu,
        sigma,
        v: fv,
        diagnostics: Rank1Diagnostics { iterations, converged },
    }
}

/// Power iteration on the smaller Gram matrix of `a`. Returns
/// `(u, sigma, v, iterations, converged)` with `u` phase-canonical and
/// `a^H u = sigma v`.
fn dominant_triplet(
    a: &CMat,
    opts: &Rank1Options,
    rng: &mut Rng,
) -> (Vec<Complex64>, f64, Vec<Complex64>, usize, bool) {
    let (m, n) = (a.rows, a.cols);
    let left_side = m <= n;
    let gram = if left_side { a.mul_adj(a) } else { a.adj_mul(a) };
    let dim = gram.rows;

    let mut x: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    normalize(&mut x);
    let mut iters = 0;
    let mut converged = false;
    let mut y = vec![Complex64::new(0.0, 0.0); dim];
    let mut degenerate = false;
    while iters < opts.max_iters.max(1) {
        iters += 1;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                acc += gram.data[j * dim + i] * xj;
            }
            *yi = acc;
        }
        let ny = libm::sqrt(norm_sq(&y));
        if !(ny > 0.0) || !ny.is_finite() {
            degenerate = true;
            converged = true;
            break;
        }
        let mut delta = 0.0;
        for (xi, yi) in x.iter_mut().zip(&y) {
            let next = yi / ny;
            delta += (next - *xi).norm_sqr();
            *xi = next;
        }
        if libm::sqrt(delta) <= opts.tol {
            converged = true;
            break;
        }
    }

    let mut u = if degenerate {
        vec![Complex64::new(0.0, 0.0); m]
    } else if left_side {
        x
    } else {
        let mut u = vec![Complex64::new(0.0, 0.0); m];
        for (j, xj) in x.iter().enumerate() {
            for (ui, aij) in u.iter_mut().zip(a.col(j)) {
                *ui += aij * xj;
            }
        }
        u
    };
    if !normalize(&mut u) {
        u = vec![Complex64::new(0.0, 0.0); m];
        u[0] = Complex64::new(1.0, 0.0);
    }
    let ph = canonical_phase(&u);
    for ui in u.iter_mut() {
        *ui *= ph;
    }
    let mut v: Vec<Complex64> = (0..n).map(|j| cdot(a.col(j), &u)).collect();
    let sigma = libm::sqrt(norm_sq(&v));
    if sigma > 0.0 {
        for vi in v.iter_mut() {
            *vi /= sigma;
        }
    } else {
        v[0] = Complex64::new(1.0, 0.0);
    }
    (u, sigma, v, iters, converged)
}

fn normalize(x: &mut [Complex64]) -> bool {
    let nrm = libm::sqrt(norm_sq(x));
    if !(nrm > 0.0) || !nrm.is_finite() {
        return false;
    }
    for xi in x.iter_mut() {
        *xi /= nrm;
    }
    true
}

/// Approximate leading tubal triplet by per-Fourier-slice power iteration.
pub fn tubal_rank1_approx(m: &Tensor3, opts: &Rank1Options) -> Result<Rank1Approx> {
    if opts.max_iters == 0 {
        return Err(Error::InvalidParameter("power iteration needs max_iters >= 1".into()));
    }
    let sr = rank1_fourier(&fft_mode3(m), opts);
    let n3 = m.n3();
    let mut fs = FTensor3::zeros(1, 1, n3);
    for (s, &sv) in sr.sigma.iter().enumerate() {
        fs.set(0, 0, s, Complex64::new(sv, 0.0));
    }
    fs.set_real_origin(true);
    let s = ifft_mode3(&fs)?;
    Ok(Rank1Approx {
        u: ifft_mode3(&sr.u)?,
        s: Tube(s.into_vec()),
        v: ifft_mode3(&sr.v)?,
        diagnostics: sr.diagnostics,
    })
}
