//! Planted-dictionary generators for tests and demos.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::patches::{VolumeStack, PIXEL_MAX};
use crate::rng::{rng_from, stream, Rng};
use crate::tcore::{tprod, Tensor3};
use crate::{Error, Result};

/// `Y = D * X` with unit-norm random atoms and `t` non-zero tubes per column.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedModel {
    /// `d x K x n3`.
    pub dict: Tensor3,
    /// `K x n x n3`.
    pub codes: Tensor3,
    /// `d x n x n3`.
    pub y: Tensor3,
}

impl PlantedModel {
    /// Atom indices used by column `j`.
    pub fn support(&self, j: usize) -> Vec<usize> {
        (0..self.codes.n1())
            .filter(|&k| !self.codes.is_zero_tube(k, j))
            .collect()
    }
}

fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random tensor with unit-norm lateral slices.
pub fn random_unit_atoms(d: usize, k: usize, n3: usize, rng: &mut Rng) -> Tensor3 {
    let mut atoms = Tensor3::from_fn(d, k, n3, |_, _, _| gaussian(rng));
    for j in 0..k {
        let col = atoms.lateral(j);
        let nrm = col.fro_norm();
        atoms.set_lateral(j, &col.scaled(1.0 / nrm));
    }
    atoms
}

/// Writes a random tube with norm uniform in `[1, 2]` at `(i, j)`.
fn plant_tube(codes: &mut Tensor3, i: usize, j: usize, scale: f64, rng: &mut Rng) {
    let n3 = codes.n3();
    let mut v: Vec<f64> = (0..n3).map(|_| gaussian(rng)).collect();
    let nrm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let target = scale * rng.random_range(1.0..=2.0);
    for x in &mut v {
        *x *= target / nrm;
    }
    codes.set_tube(i, j, &v);
}

pub fn planted_model(d: usize, k: usize, n3: usize, n: usize, t: usize, seed: u64) -> Result<PlantedModel> {
    if d == 0 || k == 0 || n3 == 0 || n == 0 {
        return Err(Error::InvalidParameter(
            "planted model dimensions must be positive".into(),
        ));
    }
    if t > k {
        return Err(Error::InvalidParameter(format!(
            "{t} tubes per column exceeds {k} atoms"
        )));
    }
    let mut rng = rng_from(seed, stream::SYNTH);
    let dict = random_unit_atoms(d, k, n3, &mut rng);
    let mut codes = Tensor3::zeros(k, n, n3);
    for j in 0..n {
        for i in index::sample(&mut rng, k, t).iter() {
            plant_tube(&mut codes, i, j, 1.0, &mut rng);
        }
    }
    let y = tprod(&dict, &codes)?;
    Ok(PlantedModel { dict, codes, y })
}

/// A volume whose disjoint `p x p` blocks are sparse in a planted dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedVolume {
    /// Intensities in `[0, 255]`.
    pub volume: VolumeStack,
    /// `(p * p) x K x B` dictionary. Atom 0 is constant.
    pub dict: Tensor3,
    pub p: usize,
}

/// Builds an `h x w x b` volume where every disjoint `p x p x b` block is a
/// constant level plus `t` random atoms out of `k - 1`, then maps the whole
/// volume affinely onto `[0, 255]`.
pub fn planted_volume(h: usize, w: usize, b: usize, p: usize, k: usize, t: usize, seed: u64) -> Result<PlantedVolume> {
    if p == 0 || !h.is_multiple_of(p) || !w.is_multiple_of(p) || b == 0 {
        return Err(Error::InvalidParameter(format!(
            "{h}x{w} is not tiled by {p}x{p} blocks"
        )));
    }
    if k < 2 || t >= k {
        return Err(Error::InvalidParameter(format!(
            "need k >= 2 and t < k, got k={k} t={t}"
        )));
    }
    let d = p * p;
    let mut rng = rng_from(seed, stream::SYNTH);
    let mut dict = random_unit_atoms(d, k, b, &mut rng);
    let dc = Tensor3::from_fn(d, 1, b, |_, _, _| 1.0 / libm::sqrt((d * b) as f64));
    dict.set_lateral(0, &dc);

    let (bh, bw) = (h / p, w / p);
    let mut codes = Tensor3::zeros(k, bh * bw, b);
    let dc_scale = libm::sqrt((d * b) as f64);
    for j in 0..bh * bw {
        let level = rng.random_range(0.3..=0.7);
        codes[(0, j, 0)] = level * dc_scale;
        for i in index::sample(&mut rng, k - 1, t).iter() {
            plant_tube(&mut codes, i + 1, j, 0.5, &mut rng);
        }
    }
    let blocks = tprod(&dict, &codes)?;
    let mut vol = Tensor3::zeros(h, w, b);
    for bj in 0..bw {
        for bi in 0..bh {
            let col = bi + bj * bh;
            for kk in 0..b {
                for r in 0..d {
                    vol[(bi * p + r % p, bj * p + r / p, kk)] = blocks[(r, col, kk)];
                }
            }
        }
    }
    let lo = vol.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vol.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let volume = VolumeStack::new(vol.map(|v| (v - lo) / span * PIXEL_MAX));
    Ok(PlantedVolume { volume, dict, p })
}
