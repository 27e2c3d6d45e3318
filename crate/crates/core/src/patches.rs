//! Image stacks, patch extraction and reassembly, corruption models and
//! quality metrics.
//!
//! A volume is an `H x W x B` tensor of intensities in `[0, 255]`. A patch of
//! size `p x q x depth` anchored at `(row, col, band)` becomes one tensor
//! column of length `p * q`, vectorised column-major: in-patch pixel `(r, c)`
//! lands on row `c * p + r`, and the band offset is the third mode.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::rng::{rng_from, stream};
use crate::sparse::RowMask;
use crate::tcore::Tensor3;
use crate::{Error, Result};

pub const PIXEL_MAX: f64 = 255.0;

/// An `H x W x B` stack of frames or spectral bands.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeStack(Tensor3);

impl VolumeStack {
    pub fn new(t: Tensor3) -> Self {
        Self(t)
    }

    pub fn zeros(h: usize, w: usize, b: usize) -> Self {
        Self(Tensor3::zeros(h, w, b))
    }

    pub fn height(&self) -> usize {
        self.0.n1()
    }

    pub fn width(&self) -> usize {
        self.0.n2()
    }

    pub fn bands(&self) -> usize {
        self.0.n3()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.0.dims()
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.0
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor3 {
        &mut self.0
    }

    pub fn into_tensor(self) -> Tensor3 {
        self.0
    }

    pub fn get(&self, i: usize, j: usize, b: usize) -> f64 {
        self.0[(i, j, b)]
    }

    pub fn clamped(&self) -> Self {
        Self(self.0.map(|v| v.clamp(0.0, PIXEL_MAX)))
    }
}

impl From<Tensor3> for VolumeStack {
    fn from(t: Tensor3) -> Self {
        Self(t)
    }
}

/// Per-pixel observation mask, shared by all bands. `true` means observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    h: usize,
    w: usize,
    data: Vec<bool>,
}

impl PixelMask {
    /// `data` is column-major: pixel `(i, j)` at `i + j * h`.
    pub fn new(h: usize, w: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::ShapeMismatch(format!(
                "mask of {} entries for a {h}x{w} image",
                data.len()
            )));
        }
        Ok(Self { h, w, data })
    }

    pub fn full(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            data: vec![true; h * w],
        }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i + j * self.h]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i + j * self.h] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn inverted(&self) -> Self {
        Self {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// Zeroes every unobserved tube of `v`.
    pub fn project(&self, v: &VolumeStack) -> Result<VolumeStack> {
        self.check(v)?;
        let mut out = v.clone();
        for j in 0..self.w {
            for i in 0..self.h {
                if !self.get(i, j) {
                    for b in 0..v.bands() {
                        out.0[(i, j, b)] = 0.0;
                    }
                }
            }
        }
        Ok(out)
    }

    fn check(&self, v: &VolumeStack) -> Result<()> {
        if (self.h, self.w) != (v.height(), v.width()) {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{} vs volume {:?}",
                self.h,
                self.w,
                v.dims()
            )));
        }
        Ok(())
    }
}

/// How patch anchors are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchMode {
    /// `count` anchors drawn uniformly (with replacement).
    Random { count: usize, seed: u64 },
    /// Regular tiling with the given stride, plus a final anchor flush with
    /// each border so every voxel is covered.
    Grid { stride: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchShape {
    pub p: usize,
    pub q: usize,
    /// Number of bands per patch; `None` means all of them.
    pub depth: Option<usize>,
}

impl PatchShape {
    pub fn new(p: usize, q: usize) -> Self {
        Self { p, q, depth: None }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = Some(depth);
        self
    }
}

/// Anchor of one patch: top-left pixel and first band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Anchor {
    pub row: usize,
    pub col: usize,
    pub band: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub p: usize,
    pub q: usize,
    pub depth: usize,
    /// Grid stride; zero for randomly sampled sets.
    pub stride: usize,
    pub positions: Vec<Anchor>,
    /// `(p * q) x n_patches x depth` tensor columns.
    pub y: Tensor3,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Observed rows of the patch at `index` under `mask`.
    pub fn row_mask(&self, mask: &PixelMask, index: usize) -> RowMask {
        let a = self.positions[index];
        let mut rows = Vec::with_capacity(self.p * self.q);
        for c in 0..self.q {
            for r in 0..self.p {
                rows.push(mask.get(a.row + r, a.col + c));
            }
        }
        RowMask::new(rows)
    }
}

fn grid_starts(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let last = extent - size;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

/// Cuts `v` into tensor columns.
pub fn extract_patches(v: &VolumeStack, shape: PatchShape, mode: PatchMode) -> Result<PatchSet> {
    let (h, w, b) = v.dims();
    let depth = shape.depth.unwrap_or(b);
    if shape.p == 0 || shape.q == 0 || depth == 0 || shape.p > h || shape.q > w || depth > b {
        return Err(Error::PatchTooLarge {
            p: shape.p,
            q: shape.q,
            depth,
            h,
            w,
            b,
        });
    }
    let (positions, stride) = match mode {
        PatchMode::Grid { stride } => {
            if stride == 0 {
                return Err(Error::InvalidParameter("grid stride must be >= 1".into()));
            }
            let mut pos = Vec::new();
            for band in grid_starts(b, depth, depth) {
                for col in grid_starts(w, shape.q, stride) {
                    for row in grid_starts(h, shape.p, stride) {
                        pos.push(Anchor { row, col, band });
                    }
                }
            }
            (pos, stride)
        }
        PatchMode::Random { count, seed } => {
            let mut rng = rng_from(seed, stream::PATCHES);
            let pos = (0..count)
                .map(|_| Anchor {
                    row: rng.random_range(0..=h - shape.p),
                    col: rng.random_range(0..=w - shape.q),
                    band: rng.random_range(0..=b - depth),
                })
                .collect();
            (pos, 0)
        }
    };
    if positions.is_empty() {
        return Err(Error::InvalidParameter("no patches requested".into()));
    }
    let (p, q) = (shape.p, shape.q);
    let t = v.tensor();
    let y = Tensor3::from_fn(p * q, positions.len(), depth, |r, n, k| {
        let a = positions[n];
        t[(a.row + r % p, a.col + r / p, a.band + k)]
    });
    Ok(PatchSet {
        p,
        q,
        depth,
        stride,
        positions,
        y,
    })
}

/// Overlap-averages `denoised` patches back into a volume.
///
/// Each voxel becomes `(beta * reference + sum of patch values) / (beta +
/// count)`; uncovered voxels keep the reference. The result is clamped to
/// `[0, 255]`.
pub fn reconstruct(patches: &PatchSet, denoised: &Tensor3, reference: &VolumeStack, beta: f64) -> Result<VolumeStack> {
    if denoised.dims() != patches.y.dims() {
        return Err(Error::ShapeMismatch(format!(
            "denoised patches {:?} vs extracted {:?}",
            denoised.dims(),
            patches.y.dims()
        )));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta must be a finite non-negative number, got {beta}"
        )));
    }
    let (h, w, b) = reference.dims();
    let mut sum = Tensor3::zeros(h, w, b);
    let mut count = Tensor3::zeros(h, w, b);
    let p = patches.p;
    for (n, a) in patches.positions.iter().enumerate() {
        if a.row + p > h || a.col + patches.q > w || a.band + patches.depth > b {
            return Err(Error::ShapeMismatch(format!(
                "patch anchor {a:?} outside reference {h}x{w}x{b}"
            )));
        }
        for k in 0..patches.depth {
            for r in 0..p * patches.q {
                let idx = (a.row + r % p, a.col + r / p, a.band + k);
                sum[idx] += denoised[(r, n, k)];
                count[idx] += 1.0;
            }
        }
    }
    let rt = reference.tensor();
    let out = Tensor3::from_fn(h, w, b, |i, j, k| {
        let c = count[(i, j, k)];
        let v = if c == 0.0 {
            rt[(i, j, k)]
        } else {
            (beta * rt[(i, j, k)] + sum[(i, j, k)]) / (beta + c)
        };
        v.clamp(0.0, PIXEL_MAX)
    });
    Ok(VolumeStack(out))
}

fn shuffled_sites(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from(seed, stream::NOISE);
    let mut sites: Vec<usize> = (0..n).collect();
    sites.shuffle(&mut rng);
    sites
}

fn site_count(fraction: f64, n: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("fraction {fraction} outside [0, 1]")));
    }
    Ok(((fraction * n as f64).floor() as usize).min(n))
}

/// Adds Gaussian noise of standard deviation `sigma` to every band of
/// `floor(sparsity * H * W)` randomly chosen pixels. Returns the noisy volume
/// (unclamped) and the mask of corrupted pixels.
pub fn add_fixed_location_noise(
    v: &VolumeStack,
    sparsity: f64,
    sigma: f64,
    seed: u64,
) -> Result<(VolumeStack, PixelMask)> {
    let (h, w, b) = v.dims();
    let m = site_count(sparsity, h * w)?;
    let normal = Normal::new(0.0, sigma)
        .map_err(|_| Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")))?;
    let sites = shuffled_sites(h * w, seed);
    // Noise values come from their own stream so the corrupted sites do not
    // depend on sigma.
    let mut rng = rng_from(seed ^ 0x6E6F_6973_6576_616C, stream::NOISE);
    let mut out = v.clone();
    let mut mask = PixelMask::new(h, w, vec![false; h * w])?;
    for &s in &sites[..m] {
        let (i, j) = (s % h, s / h);
        mask.set(i, j, true);
        for k in 0..b {
            out.0[(i, j, k)] += normal.sample(&mut rng);
        }
    }
    Ok((out, mask))
}

/// Zeroes the tubes of `floor(fraction * H * W)` random pixels. The returned
/// mask marks the surviving pixels. For a fixed seed the dead sets are nested
/// as the fraction grows.
pub fn apply_dead_pixels(v: &VolumeStack, fraction: f64, seed: u64) -> Result<(VolumeStack, PixelMask)> {
    let (h, w, _) = v.dims();
    let m = site_count(fraction, h * w)?;
    let mut mask = PixelMask::full(h, w);
    for &s in &shuffled_sites(h * w, seed)[..m] {
        mask.set(s % h, s / h, false);
    }
    let out = mask.project(v)?;
    Ok((out, mask))
}

fn check_same(x: &VolumeStack, y: &VolumeStack) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", x.dims(), y.dims())));
    }
    Ok(())
}

/// `sqrt(||X - Xrec||_F^2 / N)` with `N = H * W * B`.
pub fn reconstruction_error(x: &VolumeStack, xrec: &VolumeStack) -> Result<f64> {
    mean_squared_error(x, xrec).map(libm::sqrt)
}

fn mean_squared_error(x: &VolumeStack, xrec: &VolumeStack) -> Result<f64> {
    check_same(x, xrec)?;
    let a = x.tensor().as_slice();
    let b = xrec.tensor().as_slice();
    let sum: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    Ok(sum / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB for 8-bit data; `+inf` when identical.
pub fn psnr(x: &VolumeStack, xrec: &VolumeStack) -> Result<f64> {
    let mse = mean_squared_error(x, xrec)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(PIXEL_MAX * PIXEL_MAX / mse))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, b: usize) -> VolumeStack {
        VolumeStack::new(Tensor3::from_fn(h, w, b, |i, j, k| (i + 3 * j + 7 * k) as f64))
    }

    #[test]
    fn whole_volume_patch() {
        let v = ramp(8, 8, 2);
        let ps = extract_patches(&v, PatchShape::new(8, 8), PatchMode::Grid { stride: 8 }).unwrap();
        assert_eq!(ps.y.dims(), (64, 1, 2));
        assert_eq!(ps.y.as_slice(), v.tensor().as_slice());
    }

    #[test]
    fn disjoint_grid_count_and_roundtrip() {
        let v = VolumeStack::new(Tensor3::from_fn(144, 256, 2, |i, j, k| {
            ((i * 31 + j * 17 + k) % 256) as f64
        }));
        let ps = extract_patches(&v, PatchShape::new(8, 8), PatchMode::Grid { stride: 8 }).unwrap();
        assert_eq!(ps.len(), 576);
        let back = reconstruct(&ps, &ps.y, &VolumeStack::zeros(144, 256, 2), 0.0).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn grid_covers_ragged_edges() {
        let v = ramp(10, 9, 1);
        let ps = extract_patches(&v, PatchShape::new(4, 4), PatchMode::Grid { stride: 4 }).unwrap();
        let back = reconstruct(&ps, &ps.y, &VolumeStack::zeros(10, 9, 1), 0.0).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn two_patch_overlap_is_mean() {
        let reference = VolumeStack::zeros(1, 3, 1);
        let ps = PatchSet {
            p: 1,
            q: 2,
            depth: 1,
            stride: 1,
            positions: vec![
                Anchor {
                    row: 0,
                    col: 0,
                    band: 0,
                },
                Anchor {
                    row: 0,
                    col: 1,
                    band: 0,
                },
            ],
            y: Tensor3::zeros(2, 2, 1),
        };
        let patches = Tensor3::new(2, 2, 1, vec![10.0, 20.0, 40.0, 60.0]).unwrap();
        let out = reconstruct(&ps, &patches, &reference, 0.0).unwrap();
        assert_eq!(out.tensor().as_slice(), &[10.0, 30.0, 60.0]);
        let relaxed = reconstruct(&ps, &patches, &reference, 2.0).unwrap();
        assert!((relaxed.get(0, 1, 0) - 60.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn patch_too_large() {
        let v = ramp(4, 4, 2);
        assert!(matches!(
            extract_patches(&v, PatchShape::new(5, 2), PatchMode::Grid { stride: 1 }),
            Err(Error::PatchTooLarge { .. })
        ));
    }

    #[test]
    fn dead_pixel_counts() {
        let v = VolumeStack::new(Tensor3::from_fn(144, 256, 2, |_, _, _| 1.0));
        let (out, mask) = apply_dead_pixels(&v, 0.5, 3).unwrap();
        assert_eq!(144 * 256 - mask.count(), 144 * 128);
        let zeros = (0..256)
            .flat_map(|j| (0..144).map(move |i| (i, j)))
            .filter(|&(i, j)| out.get(i, j, 0) == 0.0 && out.get(i, j, 1) == 0.0)
            .count();
        assert_eq!(zeros, 144 * 128);
    }

    #[test]
    fn metric_examples() {
        let x = ramp(3, 3, 2);
        let shifted = VolumeStack::new(x.tensor().map(|v| v + 255.0));
        assert!((reconstruction_error(&x, &shifted).unwrap() - 255.0).abs() < 1e-9);
        assert!(psnr(&x, &shifted).unwrap().abs() < 1e-9);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
    }
}
