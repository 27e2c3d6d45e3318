//! K-TSVD dictionary learning.
//!
//! Alternates tubal-sparse coding of all training columns with a sequential
//! pass over the atoms. Atom `k` is refitted from the residual that excludes
//! its own contribution, restricted to the columns that currently use it, by
//! taking the leading tubal-rank-1 triplet of that residual.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::seq::index;

use crate::rng::{self, derive_index, derive_seed, stream};
use crate::sparse::{self, SparseCodeProblem};
use crate::tcore::{fft_mode3, ifft_mode3, tprod, FTensor3, Tensor3};
use crate::tsvd::{rank1_fourier, tsvd, Rank1Options};
use crate::{Error, Result};

/// Atom norms must stay within this distance of 1.
pub const ATOM_NORM_TOL: f64 = 1e-8;

/// A `d x K x n3` tensor dictionary with unit-norm lateral slices (atoms).
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Tensor3,
    pub seed: u64,
    pub sweeps: usize,
    pub lambda: f64,
}

impl Dictionary {
    /// Wraps `atoms`, checking that every atom has unit Frobenius norm.
    pub fn new(atoms: Tensor3, seed: u64, sweeps: usize, lambda: f64) -> Result<Self> {
        for k in 0..atoms.n2() {
            let nrm = atoms.lateral(k).fro_norm();
            if (nrm - 1.0).abs() > ATOM_NORM_TOL {
                return Err(Error::InvalidTensor(format!("atom {k} has norm {nrm}, expected 1")));
            }
        }
        Ok(Self {
            atoms,
            seed,
            sweeps,
            lambda,
        })
    }

    /// Normalises every atom of `atoms`; zero atoms are rejected.
    pub fn from_unnormalized(atoms: Tensor3) -> Result<Self> {
        let mut atoms = atoms;
        for k in 0..atoms.n2() {
            let col = atoms.lateral(k);
            let nrm = col.fro_norm();
            if nrm == 0.0 {
                return Err(Error::InvalidTensor(format!("atom {k} is zero")));
            }
            atoms.set_lateral(k, &col.scaled(1.0 / nrm));
        }
        Self::new(atoms, 0, 0, 0.0)
    }

    pub fn atoms(&self) -> &Tensor3 {
        &self.atoms
    }

    pub fn into_atoms(self) -> Tensor3 {
        self.atoms
    }

    pub fn k(&self) -> usize {
        self.atoms.n2()
    }

    pub fn d(&self) -> usize {
        self.atoms.n1()
    }

    pub fn n3(&self) -> usize {
        self.atoms.n3()
    }
}

/// Samples `k` distinct non-zero training columns and normalises them.
pub fn init_dictionary(y: &Tensor3, k: usize, seed: u64) -> Result<Dictionary> {
    if k == 0 {
        return Err(Error::InvalidParameter("dictionary needs at least one atom".into()));
    }
    let usable: Vec<usize> = (0..y.n2()).filter(|&j| y.lateral(j).fro_norm() > 0.0).collect();
    if usable.len() < k {
        return Err(Error::InsufficientData(format!(
            "{k} atoms requested but only {} non-zero training columns",
            usable.len()
        )));
    }
    let mut rng = rng::rng_from(seed, stream::INIT);
    let picks = index::sample(&mut rng, usable.len(), k);
    let mut atoms = Tensor3::zeros(y.n1(), k, y.n3());
    for (slot, p) in picks.iter().enumerate() {
        let col = y.lateral(usable[p]);
        let nrm = col.fro_norm();
        atoms.set_lateral(slot, &col.scaled(1.0 / nrm));
    }
    Dictionary::new(atoms, seed, 0, 0.0)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AtomUpdateOptions {
    pub rank1: Rank1Options,
    /// Use the full t-SVD instead of power iteration.
    pub full_tsvd: bool,
}

/// What happened to one atom during the dictionary pass.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomUpdate {
    /// Refitted on `support` columns; restricted residual norms before/after.
    Refit {
        support: usize,
        restricted_before: f64,
        restricted_after: f64,
        converged: bool,
    },
    /// Unused atom replaced by the normalised residual of training `column`.
    Replaced { column: usize },
    /// Unused atom with no usable replacement (zero residual everywhere).
    Kept,
}

fn is_self_mirror(s: usize, n3: usize) -> bool {
    s == 0 || 2 * s == n3
}

/// `||A||_F^2` of a real tensor from its half spectrum.
fn half_spectrum_sq_norm(mats: &[Vec<Complex64>], n3: usize) -> f64 {
    mats.iter()
        .enumerate()
        .map(|(s, m)| {
            let w = if is_self_mirror(s, n3) { 1.0 } else { 2.0 };
            w * m.iter().map(|c| c.norm_sqr()).sum::<f64>()
        })
        .sum::<f64>()
        / n3 as f64
}

/// Updates atom `k` of `dict` and row `k` of `codes` in place.
///
/// Columns listed in `exclude` are not eligible as replacements for an unused
/// atom (they were already consumed earlier in the same pass).
pub fn atom_update(
    dict: &mut Tensor3,
    codes: &mut Tensor3,
    y: &Tensor3,
    k: usize,
    opts: &AtomUpdateOptions,
    exclude: &[usize],
) -> Result<AtomUpdate> {
    let (d, kk, n3) = dict.dims();
    let n = y.n2();
    if codes.dims() != (kk, n, n3) || y.n1() != d || y.n3() != n3 {
        return Err(Error::DimensionMismatch(format!(
            "dictionary {d}x{kk}x{n3}, codes {:?}, data {:?}",
            codes.dims(),
            y.dims()
        )));
    }
    if k >= kk {
        return Err(Error::InvalidParameter(format!("atom index {k} out of range 0..{kk}")));
    }

    let support: Vec<usize> = (0..n).filter(|&i| !codes.is_zero_tube(k, i)).collect();
    if support.is_empty() {
        return replace_unused(dict, codes, y, k, exclude);
    }

    let fd = fft_mode3(dict);
    let fx = fft_mode3(&codes.select_columns(&support));
    let fy = fft_mode3(&y.select_columns(&support));
    let w = support.len();
    let half = fd.independent_slices();

    // Restricted residual with atom k removed, and the current atom's part.
    let mut fr = FTensor3::zeros(d, w, n3);
    let mut before = Vec::with_capacity(half);
    for s in 0..half {
        let ds = fd.slice_mat(s);
        let xs = fx.slice_mat(s);
        let full = ds.mul(&xs);
        let mut r = fy.slice_mat(s);
        let mut resid = Vec::with_capacity(d * w);
        for j in 0..w {
            for i in 0..d {
                let own = ds.at(i, k) * xs.at(k, j);
                let e = r.at(i, j) - full.at(i, j);
                resid.push(e);
                r.set(i, j, e + own);
            }
        }
        before.push(resid);
        fr.set_slice_mat(s, &r);
    }
    fr.fill_mirrors();
    let restricted_before = libm::sqrt(half_spectrum_sq_norm(&before, n3));

    let (fu, frow, converged) = if opts.full_tsvd {
        let f = tsvd(&ifft_mode3(&fr)?)?;
        let u = f.u.select_columns(&[0]);
        let row = tprod(
            &f.s.leading_block(1, 1),
            &crate::tcore::ttranspose(&f.v.select_columns(&[0])),
        )?;
        (fft_mode3(&u), fft_mode3(&row), true)
    } else {
        let sr = rank1_fourier(&fr, &opts.rank1);
        // Coefficient row in the Fourier domain: sigma v^H = u^H R.
        let mut frow = FTensor3::zeros(1, w, n3);
        for s in 0..half {
            let sigma = sr.sigma[s];
            for j in 0..w {
                frow.set(0, j, s, sr.v.get(j, 0, s).conj() * sigma);
            }
        }
        frow.fill_mirrors();
        (sr.u, frow, sr.diagnostics.converged)
    };

    let mut after = Vec::with_capacity(half);
    for s in 0..half {
        let mut resid = Vec::with_capacity(d * w);
        for j in 0..w {
            let c = frow.get(0, j, s);
            for i in 0..d {
                resid.push(fr.get(i, j, s) - fu.get(i, 0, s) * c);
            }
        }
        after.push(resid);
    }
    let restricted_after = libm::sqrt(half_spectrum_sq_norm(&after, n3));

    let atom = ifft_mode3(&fu)?;
    let row = ifft_mode3(&frow)?;
    dict.set_lateral(k, &atom);
    for (jj, &col) in support.iter().enumerate() {
        for t in 0..n3 {
            codes[(k, col, t)] = row[(0, jj, t)];
        }
    }
    Ok(AtomUpdate::Refit {
        support: w,
        restricted_before,
        restricted_after,
        converged,
    })
}

fn replace_unused(dict: &mut Tensor3, codes: &Tensor3, y: &Tensor3, k: usize, exclude: &[usize]) -> Result<AtomUpdate> {
    let residual = y.sub(&tprod(dict, codes)?);
    let mut best: Option<(usize, f64)> = None;
    for j in 0..y.n2() {
        if exclude.contains(&j) {
            continue;
        }
        let nrm = residual.lateral(j).fro_norm();
        if nrm > 0.0 && best.is_none_or(|(_, b)| nrm > b) {
            best = Some((j, nrm));
        }
    }
    match best {
        Some((j, nrm)) => {
            dict.set_lateral(k, &residual.lateral(j).scaled(1.0 / nrm));
            Ok(AtomUpdate::Replaced { column: j })
        }
        None => Ok(AtomUpdate::Kept),
    }
}

/// Training settings.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub k: usize,
    pub lambda: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub sweeps: usize,
    pub seed: u64,
    /// Stop once the representation error improves by less than this
    /// fraction between consecutive sweeps. Zero disables early exit.
    pub early_exit_tol: f64,
    pub rank1_max_iters: usize,
    pub rank1_tol: f64,
    pub full_tsvd: bool,
}

impl TrainConfig {
    pub fn new(k: usize, lambda: f64, sweeps: usize, seed: u64) -> Self {
        Self {
            k,
            lambda,
            rho: sparse::DEFAULT_RHO,
            tol: sparse::DEFAULT_TOL,
            max_iters: sparse::DEFAULT_MAX_ITERS,
            sweeps,
            seed,
            early_exit_tol: 1e-4,
            rank1_max_iters: 100,
            rank1_tol: Rank1Options::default().tol,
            full_tsvd: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    /// `||Y - D * X||_F` right after sparse coding.
    pub error_after_coding: f64,
    /// `||Y - D * X||_F` after the atom pass.
    pub representation_error: f64,
    pub atoms_replaced: usize,
    pub admm_iterations: usize,
    pub admm_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replacement {
    pub sweep: usize,
    pub atom: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub sweeps: Vec<SweepRecord>,
    pub replacements: Vec<Replacement>,
    pub lambda: f64,
    pub rho: f64,
    pub seed: u64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub dictionary: Dictionary,
    /// `K x n x n3` codes after the final atom pass.
    pub codes: Tensor3,
    pub report: TrainReport,
}

/// Initialises a dictionary from the data and trains it.
pub fn train(y: &Tensor3, cfg: &TrainConfig) -> Result<TrainOutput> {
    let init = init_dictionary(y, cfg.k, cfg.seed)?;
    train_from(init, y, cfg)
}

/// Trains starting from the given dictionary.
pub fn train_from(init: Dictionary, y: &Tensor3, cfg: &TrainConfig) -> Result<TrainOutput> {
    if cfg.sweeps == 0 {
        return Err(Error::InvalidParameter("sweeps must be >= 1".into()));
    }
    if init.d() != y.n1() || init.n3() != y.n3() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary {}x{}x{} vs data {:?}",
            init.d(),
            init.k(),
            init.n3(),
            y.dims()
        )));
    }
    let mut atoms = init.into_atoms();
    let kk = atoms.n2();
    let power_seed = derive_seed(cfg.seed, stream::POWER);
    let mut codes = Tensor3::zeros(kk, y.n2(), y.n3());
    let mut report = TrainReport {
        sweeps: Vec::new(),
        replacements: Vec::new(),
        lambda: cfg.lambda,
        rho: cfg.rho,
        seed: cfg.seed,
        stopped_early: false,
    };

    for sweep in 1..=cfg.sweeps {
        let coding = sparse::sparse_code(
            &SparseCodeProblem::new(y, &atoms, cfg.lambda)
                .with_rho(cfg.rho)
                .with_tol(cfg.tol)
                .with_max_iters(cfg.max_iters),
        )?;
        codes = coding.x;
        let error_after_coding = y.distance(&tprod(&atoms, &codes)?);

        let mut taken = Vec::new();
        for k in 0..kk {
            let opts = AtomUpdateOptions {
                rank1: Rank1Options {
                    max_iters: cfg.rank1_max_iters,
                    tol: cfg.rank1_tol,
                    seed: derive_index(power_seed, ((sweep - 1) * kk + k) as u64),
                },
                full_tsvd: cfg.full_tsvd,
            };
            if let AtomUpdate::Replaced { column } = atom_update(&mut atoms, &mut codes, y, k, &opts, &taken)? {
                taken.push(column);
                report.replacements.push(Replacement { sweep, atom: k, column });
            }
        }
        let representation_error = y.distance(&tprod(&atoms, &codes)?);
        let prev = report.sweeps.last().map(|r| r.representation_error);
        report.sweeps.push(SweepRecord {
            sweep,
            error_after_coding,
            representation_error,
            atoms_replaced: taken.len(),
            admm_iterations: coding.iterations,
            admm_converged: coding.converged,
        });
        if let Some(prev) = prev {
            if cfg.early_exit_tol > 0.0
                && sweep < cfg.sweeps
                && (prev <= 0.0 || (prev - representation_error) / prev < cfg.early_exit_tol)
            {
                report.stopped_early = true;
                break;
            }
        }
    }

    let done = report.sweeps.len();
    let dictionary = Dictionary::new(atoms, cfg.seed, done, cfg.lambda)?;
    Ok(TrainOutput {
        dictionary,
        codes,
        report,
    })
}

/// Representation error `||Y - D * X||_F`.
pub fn representation_error(dict: &Dictionary, codes: &Tensor3, y: &Tensor3) -> Result<f64> {
    Ok(y.distance(&tprod(dict.atoms(), codes)?))
}
