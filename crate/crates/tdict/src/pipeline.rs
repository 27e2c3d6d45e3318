//! Patch-level pipelines built on the core crate: chunked parallel coding,
//! completion of masked volumes and denoising.
//!
//! Volumes are stored as intensities in `[0, 255]`. Patch columns handed to
//! the coder and the learner are divided by [`PIXEL_MAX`], so dictionaries and
//! sparsity weights refer to unit-range data.
//!
//! Work is split into fixed chunks of [`CODING_CHUNK`] columns before it is
//! handed to rayon. Chunks never depend on the thread count, which keeps every
//! output bit-identical across `--threads` settings.

use std::collections::BTreeMap;

use rayon::prelude::*;
use tdict_core::patches::{self, extract_patches, PatchMode, PatchSet, PatchShape, PixelMask, VolumeStack, PIXEL_MAX};
use tdict_core::sparse::{self, RowMask, SparseCodeProblem};
use tdict_core::tcore::tprod;
use tdict_core::{Error, Tensor3};

pub const CODING_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodingParams {
    pub lambda: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl CodingParams {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            rho: sparse::DEFAULT_RHO,
            tol: sparse::DEFAULT_TOL,
            max_iters: sparse::DEFAULT_MAX_ITERS,
        }
    }

    fn problem<'a>(&self, y: &'a Tensor3, dict: &'a Tensor3) -> SparseCodeProblem<'a> {
        SparseCodeProblem::new(y, dict, self.lambda)
            .with_rho(self.rho)
            .with_tol(self.tol)
            .with_max_iters(self.max_iters)
    }
}

fn chunks(cols: &[usize]) -> impl Iterator<Item = &[usize]> {
    cols.chunks(CODING_CHUNK)
}

fn scatter(into: &mut Tensor3, cols: &[usize], block: &Tensor3) {
    for (c, &j) in cols.iter().enumerate() {
        into.set_lateral(j, &block.lateral(c));
    }
}

/// Codes every column of `y` against `dict`.
pub fn code_columns(y: &Tensor3, dict: &Tensor3, params: &CodingParams) -> Result<Tensor3, Error> {
    let all: Vec<usize> = (0..y.n2()).collect();
    let jobs: Vec<&[usize]> = chunks(&all).collect();
    let blocks = jobs
        .par_iter()
        .map(|cols| {
            let sub = y.select_columns(cols);
            sparse::sparse_code(&params.problem(&sub, dict)).map(|r| r.x)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut x = Tensor3::zeros(dict.n2(), y.n2(), y.n3());
    for (cols, block) in jobs.iter().zip(&blocks) {
        scatter(&mut x, cols, block);
    }
    Ok(x)
}

/// Result of coding columns with per-column row masks.
#[derive(Debug, Clone)]
pub struct MaskedCoding {
    pub x: Tensor3,
    /// Columns whose mask observes nothing; their codes are zero.
    pub empty: Vec<usize>,
}

/// Codes column `j` of `y` against the rows observed in `masks[j]`. Columns
/// sharing a mask are solved together so the factorisation is reused.
pub fn code_masked_columns(
    y: &Tensor3,
    dict: &Tensor3,
    masks: &[RowMask],
    params: &CodingParams,
) -> Result<MaskedCoding, Error> {
    if masks.len() != y.n2() {
        return Err(Error::ShapeMismatch(format!(
            "{} masks for {} columns",
            masks.len(),
            y.n2()
        )));
    }
    let mut groups: BTreeMap<&[bool], Vec<usize>> = BTreeMap::new();
    for (j, m) in masks.iter().enumerate() {
        groups.entry(m.as_slice()).or_default().push(j);
    }
    let mut empty = Vec::new();
    let mut jobs: Vec<(&RowMask, &[usize])> = Vec::new();
    for cols in groups.values() {
        let mask = &masks[cols[0]];
        if mask.observed_count() == 0 {
            empty.extend_from_slice(cols);
            continue;
        }
        jobs.extend(chunks(cols).map(|c| (mask, c)));
    }
    empty.sort_unstable();
    let blocks = jobs
        .par_iter()
        .map(|(mask, cols)| {
            let sub = y.select_columns(cols);
            sparse::masked_sparse_code(&params.problem(&sub, dict).with_mask(mask)).map(|r| r.x)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut x = Tensor3::zeros(dict.n2(), y.n2(), y.n3());
    for ((_, cols), block) in jobs.iter().zip(&blocks) {
        scatter(&mut x, cols, block);
    }
    Ok(MaskedCoding { x, empty })
}

fn to_unit(t: &Tensor3) -> Tensor3 {
    t.scaled(1.0 / PIXEL_MAX)
}

fn check_dict(dict: &Tensor3, p: usize, q: usize) -> Result<(), Error> {
    if dict.n1() != p * q {
        return Err(Error::DimensionMismatch(format!(
            "dictionary atoms have {} rows, {p}x{q} patches need {}",
            dict.n1(),
            p * q
        )));
    }
    Ok(())
}

/// Samples `count` random patches of `v` as unit-range training columns. With
/// a mask, only patches whose pixels are all observed are kept.
pub fn training_patches(
    v: &VolumeStack,
    shape: PatchShape,
    count: usize,
    seed: u64,
    mask: Option<&PixelMask>,
) -> Result<Tensor3, Error> {
    let set = extract_patches(v, shape, PatchMode::Random { count, seed })?;
    let y = to_unit(&set.y);
    let Some(mask) = mask else { return Ok(y) };
    let keep: Vec<usize> = (0..set.len())
        .filter(|&j| {
            let m = set.row_mask(mask, j);
            m.observed_count() == m.len()
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::InsufficientData("no sampled patch is fully observed".into()));
    }
    Ok(y.select_columns(&keep))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionConfig {
    pub p: usize,
    pub q: usize,
    pub stride: usize,
    pub coding: CodingParams,
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub volume: VolumeStack,
    pub patches: usize,
    /// Patches with no observed pixel, filled with per-band means.
    pub empty_patches: usize,
}

/// Fills the unobserved pixels of `v`. Observed pixels are kept as they are.
pub fn complete(
    dict: &Tensor3,
    v: &VolumeStack,
    mask: &PixelMask,
    cfg: &CompletionConfig,
) -> Result<Completion, Error> {
    check_dict(dict, cfg.p, cfg.q)?;
    let (h, w, b) = v.dims();
    if (mask.height(), mask.width()) != (h, w) {
        return Err(Error::ShapeMismatch(format!(
            "mask {}x{} vs volume {h}x{w}",
            mask.height(),
            mask.width()
        )));
    }
    if dict.n3() != b {
        return Err(Error::DimensionMismatch(format!(
            "dictionary has {} bands, volume {b}",
            dict.n3()
        )));
    }
    let set = extract_patches(v, PatchShape::new(cfg.p, cfg.q), PatchMode::Grid { stride: cfg.stride })?;
    let masks: Vec<RowMask> = (0..set.len()).map(|j| set.row_mask(mask, j)).collect();
    let coded = code_masked_columns(&to_unit(&set.y), dict, &masks, &cfg.coding)?;
    let mut est = tprod(dict, &coded.x)?.scaled(PIXEL_MAX);
    if !coded.empty.is_empty() {
        let means = band_means(v, mask);
        for &j in &coded.empty {
            for (k, &m) in means.iter().enumerate() {
                for r in 0..est.n1() {
                    est[(r, j, k)] = m;
                }
            }
        }
    }
    let averaged = patches::reconstruct(&set, &est, v, 0.0)?;
    let mut out = averaged.into_tensor();
    for k in 0..b {
        for j in 0..w {
            for i in 0..h {
                if mask.get(i, j) {
                    out[(i, j, k)] = v.get(i, j, k);
                }
            }
        }
    }
    Ok(Completion {
        volume: VolumeStack::new(out),
        patches: set.len(),
        empty_patches: coded.empty.len(),
    })
}

/// Mean observed intensity of each band; mid-grey when nothing is observed.
fn band_means(v: &VolumeStack, mask: &PixelMask) -> Vec<f64> {
    let (h, w, b) = v.dims();
    (0..b)
        .map(|k| {
            let (mut sum, mut n) = (0.0, 0usize);
            for j in 0..w {
                for i in 0..h {
                    if mask.get(i, j) {
                        sum += v.get(i, j, k);
                        n += 1;
                    }
                }
            }
            if n == 0 {
                PIXEL_MAX / 2.0
            } else {
                sum / n as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    pub p: usize,
    pub q: usize,
    pub stride: usize,
    pub beta: f64,
    pub coding: CodingParams,
}

/// Fidelity weight used when none is given: `30 / sigma`, or 0.5 when the
/// noise level is unknown. A zero sigma gives an infinite weight, which
/// returns the input unchanged.
pub fn default_beta(sigma: Option<f64>) -> f64 {
    match sigma {
        Some(s) => 30.0 / s,
        None => 0.5,
    }
}

pub fn denoise(dict: &Tensor3, v: &VolumeStack, cfg: &DenoiseConfig) -> Result<VolumeStack, Error> {
    check_dict(dict, cfg.p, cfg.q)?;
    if dict.n3() != v.bands() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary has {} bands, volume {}",
            dict.n3(),
            v.bands()
        )));
    }
    if cfg.beta.is_infinite() && cfg.beta > 0.0 {
        return Ok(v.clamped());
    }
    let set = extract_patches(v, PatchShape::new(cfg.p, cfg.q), PatchMode::Grid { stride: cfg.stride })?;
    let est = denoised_patches(dict, &set, &cfg.coding)?;
    patches::reconstruct(&set, &est, v, cfg.beta)
}

fn denoised_patches(dict: &Tensor3, set: &PatchSet, coding: &CodingParams) -> Result<Tensor3, Error> {
    let x = code_columns(&to_unit(&set.y), dict, coding)?;
    Ok(tprod(dict, &x)?.scaled(PIXEL_MAX))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub missing_fraction: f64,
    pub re: f64,
    pub re_zero_fill: f64,
}

/// Completion error against `truth` for each missing fraction. Masks are
/// nested: pixels missing at a lower fraction stay missing at higher ones.
pub fn completion_sweep(
    dict: &Tensor3,
    truth: &VolumeStack,
    fractions: &[f64],
    seed: u64,
    cfg: &CompletionConfig,
) -> Result<Vec<SweepRow>, Error> {
    fractions
        .iter()
        .map(|&f| {
            let (corrupted, mask) = patches::apply_dead_pixels(truth, f, seed)?;
            let done = complete(dict, &corrupted, &mask, cfg)?;
            Ok(SweepRow {
                missing_fraction: f,
                re: patches::reconstruction_error(truth, &done.volume)?,
                re_zero_fill: patches::reconstruction_error(truth, &corrupted)?,
            })
        })
        .collect()
}
