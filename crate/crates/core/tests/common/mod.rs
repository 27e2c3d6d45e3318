//! Independent reference implementations used as test oracles.
//!
//! Nothing here goes through the Fourier domain: t-products are evaluated as
//! explicit circular convolutions or block-circulant matrix products, and the
//! matrix K-SVD works on plain `nalgebra` matrices.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdict_core::Tensor3;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1)`.
pub fn random_tensor(n1: usize, n2: usize, n3: usize, rng: &mut ChaCha8Rng) -> Tensor3 {
    Tensor3::from_fn(n1, n2, n3, |_, _, _| rng.random_range(-1.0..1.0))
}

/// `C(i,j,k) = sum_l sum_t A(i,l,t) B(l,j,(k - t) mod n3)`.
pub fn tprod_direct(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = a.dims();
    let m = b.n2();
    assert_eq!(b.n1(), n2);
    assert_eq!(b.n3(), n3);
    Tensor3::from_fn(n1, m, n3, |i, j, k| {
        let mut acc = 0.0;
        for t in 0..n3 {
            let kb = (k + n3 - t) % n3;
            for l in 0..n2 {
                acc += a[(i, l, t)] * b[(l, j, kb)];
            }
        }
        acc
    })
}

/// Block-circulant matrix of `a`: block `(r, c)` is frontal slice `(r - c) mod n3`.
pub fn bcirc(a: &Tensor3) -> DMatrix<f64> {
    let (n1, n2, n3) = a.dims();
    DMatrix::from_fn(n1 * n3, n2 * n3, |row, col| {
        let (br, i) = (row / n1, row % n1);
        let (bc, j) = (col / n2, col % n2);
        a[(i, j, (br + n3 - bc) % n3)]
    })
}

/// Stacks the frontal slices of lateral slice `j` into one vector.
pub fn unfold_column(a: &Tensor3, j: usize) -> DVector<f64> {
    let (n1, _, n3) = a.dims();
    DVector::from_fn(n1 * n3, |r, _| a[(r % n1, j, r / n1)])
}

/// Inverse of [`unfold_column`] for a whole tensor, one vector per column.
pub fn fold_columns(cols: &[DVector<f64>], n1: usize, n3: usize) -> Tensor3 {
    Tensor3::from_fn(n1, cols.len(), n3, |i, j, k| cols[j][k * n1 + i])
}

pub fn to_matrix(a: &Tensor3) -> DMatrix<f64> {
    assert_eq!(a.n3(), 1);
    DMatrix::from_column_slice(a.n1(), a.n2(), a.as_slice())
}

pub fn from_matrix(m: &DMatrix<f64>) -> Tensor3 {
    Tensor3::new(m.nrows(), m.ncols(), 1, m.as_slice().to_vec()).unwrap()
}

/// Largest absolute entry difference.
pub fn max_abs_diff(a: &Tensor3, b: &Tensor3) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct MatrixLasso {
    pub z: DMatrix<f64>,
    pub iterations: usize,
}

/// ADMM for `min ||Y - D X||_F^2 + lambda ||X||_1` on real matrices with the
/// same splitting, penalty and stopping rule as the tensor solver.
pub fn matrix_admm_lasso(
    y: &DMatrix<f64>,
    d: &DMatrix<f64>,
    lambda: f64,
    rho: f64,
    tol: f64,
    max_iters: usize,
) -> MatrixLasso {
    let k = d.ncols();
    let n = y.ncols();
    let g = d.transpose() * d * 2.0 + DMatrix::identity(k, k) * rho;
    let chol = g.cholesky().expect("normal matrix is positive definite");
    let dty = d.transpose() * y * 2.0;
    let threshold = tol * ((k * n) as f64).sqrt();
    let mut z = DMatrix::zeros(k, n);
    let mut q = DMatrix::zeros(k, n);
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let x = chol.solve(&(&dty - &q + &z * rho));
        let znew = (&x + &q / rho).map(|c| soft(c, lambda / rho));
        let diff = &x - &znew;
        q += &diff * rho;
        let primal = diff.norm();
        let dual = rho * (&znew - &z).norm();
        z = znew;
        if primal <= threshold && dual <= threshold {
            break;
        }
    }
    MatrixLasso { z, iterations }
}

/// Plain ISTA for `min ||y - D x||^2 + lambda ||x||_1`.
pub fn ista(y: &DVector<f64>, d: &DMatrix<f64>, lambda: f64, iters: usize) -> DVector<f64> {
    let lip = 2.0 * (d.transpose() * d).symmetric_eigenvalues().max();
    let step = 1.0 / lip;
    let mut x = DVector::zeros(d.ncols());
    for _ in 0..iters {
        let grad = d.transpose() * (d * &x - y) * 2.0;
        x = (&x - grad * step).map(|v| soft(v, lambda * step));
    }
    x
}

/// Sign convention shared with the library: the largest-magnitude entry of a
/// left singular vector is positive (first one wins ties).
fn canonical_sign(u: &DVector<f64>) -> f64 {
    let mut best = 0;
    for i in 1..u.len() {
        if u[i].abs() > u[best].abs() {
            best = i;
        }
    }
    if u[best] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct MatrixKsvdTrace {
    pub after_coding: Vec<f64>,
    pub after_atoms: Vec<f64>,
    pub dictionary: Option<DMatrix<f64>>,
}

pub struct MatrixKsvdConfig {
    pub lambda: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub sweeps: usize,
}

/// Matrix K-SVD with l1 coding, starting from `d0`.
pub fn matrix_ksvd(y: &DMatrix<f64>, d0: &DMatrix<f64>, cfg: &MatrixKsvdConfig) -> MatrixKsvdTrace {
    let mut d = d0.clone();
    let k = d.ncols();
    let n = y.ncols();
    let mut trace = MatrixKsvdTrace::default();
    for _ in 0..cfg.sweeps {
        let mut x = matrix_admm_lasso(y, &d, cfg.lambda, cfg.rho, cfg.tol, cfg.max_iters).z;
        trace.after_coding.push((y - &d * &x).norm());
        let mut taken: Vec<usize> = Vec::new();
        for a in 0..k {
            let support: Vec<usize> = (0..n).filter(|&i| x[(a, i)] != 0.0).collect();
            if support.is_empty() {
                let r = y - &d * &x;
                let mut best: Option<(usize, f64)> = None;
                for j in 0..n {
                    let nrm = r.column(j).norm();
                    if taken.contains(&j) || nrm <= 0.0 {
                        continue;
                    }
                    if best.is_none_or(|(_, b)| nrm > b) {
                        best = Some((j, nrm));
                    }
                }
                if let Some((j, nrm)) = best {
                    d.set_column(a, &(r.column(j) / nrm));
                    taken.push(j);
                }
                continue;
            }
            let mut e = DMatrix::zeros(y.nrows(), support.len());
            for (c, &i) in support.iter().enumerate() {
                let mut col = y.column(i) - &d * x.column(i);
                col += d.column(a) * x[(a, i)];
                e.set_column(c, &col);
            }
            let svd = e.svd(true, true);
            let (mut best, mut smax) = (0, f64::NEG_INFINITY);
            for (idx, &s) in svd.singular_values.iter().enumerate() {
                if s > smax {
                    smax = s;
                    best = idx;
                }
            }
            let u: DVector<f64> = svd.u.as_ref().unwrap().column(best).into_owned();
            let vt = svd.v_t.as_ref().unwrap();
            let sign = canonical_sign(&u);
            d.set_column(a, &(&u * sign));
            for (c, &i) in support.iter().enumerate() {
                x[(a, i)] = sign * smax * vt[(best, c)];
            }
        }
        trace.after_atoms.push((y - &d * &x).norm());
    }
    trace.dictionary = Some(d);
    trace
}
