use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{FftPlan, FftWork, Tensor3};
use crate::linalg::CMat;
use crate::{Error, Result};

/// Relative limit on the imaginary residue tolerated by [`ifft_mode3`].
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Complex `n1 x n2 x n3` tensor holding the mode-3 DFT of a real tensor.
///
/// Same layout as [`Tensor3`]. When `real_origin` is set, slice `s` and slice
/// `(n3 - s) mod n3` are elementwise conjugates, so only the first
/// `n3 / 2 + 1` slices carry independent information.
#[derive(Debug, Clone, PartialEq)]
pub struct FTensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<Complex64>,
    real_origin: bool,
}

impl FTensor3 {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        assert!(n1 > 0 && n2 > 0 && n3 > 0, "tensor dimensions must be positive");
        Self {
            n1,
            n2,
            n3,
            data: vec![Complex64::new(0.0, 0.0); n1 * n2 * n3],
            real_origin: false,
        }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    pub fn real_origin(&self) -> bool {
        self.real_origin
    }

    pub fn set_real_origin(&mut self, flag: bool) {
        self.real_origin = flag;
    }

    /// Index of the slice conjugate to slice `s`.
    #[inline]
    pub fn mirror(&self, s: usize) -> usize {
        (self.n3 - s) % self.n3
    }

    /// Number of slices that determine a conjugate-symmetric spectrum.
    #[inline]
    pub fn independent_slices(&self) -> usize {
        self.n3 / 2 + 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, s: usize) -> Complex64 {
        self.data[(s * self.n2 + j) * self.n1 + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, s: usize, v: Complex64) {
        self.data[(s * self.n2 + j) * self.n1 + i] = v;
    }

    /// Fourier slice `s` as a column-major `n1 x n2` matrix.
    pub fn slice(&self, s: usize) -> &[Complex64] {
        let sz = self.n1 * self.n2;
        &self.data[s * sz..(s + 1) * sz]
    }

    pub fn slice_mut(&mut self, s: usize) -> &mut [Complex64] {
        let sz = self.n1 * self.n2;
        &mut self.data[s * sz..(s + 1) * sz]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn slice_mat(&self, s: usize) -> CMat {
        CMat::from_slice(self.n1, self.n2, self.slice(s))
    }

    pub(crate) fn set_slice_mat(&mut self, s: usize, m: &CMat) {
        assert_eq!((m.rows, m.cols), (self.n1, self.n2), "slice shape mismatch");
        self.slice_mut(s).copy_from_slice(&m.data);
    }

    /// Overwrites slices past the half spectrum with the conjugates of their
    /// mirrors and marks the tensor as real-origin.
    pub fn fill_mirrors(&mut self) {
        let sz = self.n1 * self.n2;
        for s in self.independent_slices()..self.n3 {
            let m = self.mirror(s);
            for e in 0..sz {
                self.data[s * sz + e] = self.data[m * sz + e].conj();
            }
        }
        self.real_origin = true;
    }

    /// Frobenius norm over all complex entries.
    pub fn fro_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|c| c.norm_sqr()).sum::<f64>())
    }

    /// Largest deviation from conjugate symmetry over all slice pairs.
    pub fn symmetry_defect(&self) -> f64 {
        let sz = self.n1 * self.n2;
        let mut worst: f64 = 0.0;
        for s in 0..self.n3 {
            let m = self.mirror(s);
            for e in 0..sz {
                worst = worst.max((self.data[s * sz + e] - self.data[m * sz + e].conj()).norm());
            }
        }
        worst
    }
}

/// DFT of every mode-3 tube (unnormalised forward transform).
pub fn fft_mode3(a: &Tensor3) -> FTensor3 {
    let (n1, n2, n3) = a.dims();
    let mut out = FTensor3::zeros(n1, n2, n3);
    out.real_origin = true;
    let plan = FftPlan::new(n3);
    let plane = n1 * n2;
    let src = a.as_slice();
    let mut buf = vec![Complex64::new(0.0, 0.0); n3];
    let mut work = FftWork::default();
    for e in 0..plane {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(src[k * plane + e], 0.0);
        }
        plan.forward_with(&mut buf, &mut work);
        for (k, b) in buf.iter().enumerate() {
            out.data[k * plane + e] = *b;
        }
    }
    // Make the symmetry exact: self-mirrored slices are real and the upper
    // half is the conjugate of the lower half.
    for k in [0, n3 / 2] {
        if out.mirror(k) == k {
            for v in &mut out.data[k * plane..(k + 1) * plane] {
                v.im = 0.0;
            }
        }
    }
    out.fill_mirrors();
    out
}

/// Inverse DFT of every tube, keeping the real part.
///
/// Fails with [`Error::SymmetryViolation`] when the discarded imaginary part
/// has Frobenius norm above `IMAG_RESIDUE_TOL * (1 + ||output||_F)`.
pub fn ifft_mode3(f: &FTensor3) -> Result<Tensor3> {
    let (n1, n2, n3) = f.dims();
    let plan = FftPlan::new(n3);
    let plane = n1 * n2;
    let mut real = vec![0.0; plane * n3];
    let mut imag_sq = 0.0;
    let mut buf = vec![Complex64::new(0.0, 0.0); n3];
    let mut work = FftWork::default();
    for e in 0..plane {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = f.data[k * plane + e];
        }
        plan.inverse_with(&mut buf, &mut work);
        for (k, b) in buf.iter().enumerate() {
            real[k * plane + e] = b.re;
            imag_sq += b.im * b.im;
        }
    }
    let out = Tensor3::new(n1, n2, n3, real)?;
    let residue = libm::sqrt(imag_sq);
    let limit = IMAG_RESIDUE_TOL * (1.0 + out.fro_norm());
    if residue > limit {
        return Err(Error::SymmetryViolation { residue, limit });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn four_point_tube() {
        // Hand-computed: X[s] = sum_t x[t] e^{-i pi s t / 2} for x = (1, 2, 3, 4).
        let a = Tensor3::new(1, 1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let f = fft_mode3(&a);
        let want = [c(10.0, 0.0), c(-2.0, 2.0), c(-2.0, 0.0), c(-2.0, -2.0)];
        for (s, w) in want.iter().enumerate() {
            assert!((f.get(0, 0, s) - w).norm() < 1e-14);
        }
        let mut g = FTensor3::zeros(1, 1, 4);
        for (s, w) in want.iter().enumerate() {
            g.set(0, 0, s, *w);
        }
        let back = ifft_mode3(&g).unwrap();
        for (x, y) in back.as_slice().iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_tube_goes_to_dc() {
        let a = Tensor3::new(1, 1, 5, vec![2.5; 5]).unwrap();
        let f = fft_mode3(&a);
        assert!((f.get(0, 0, 0) - c(12.5, 0.0)).norm() < 1e-14);
        for s in 1..5 {
            assert!(f.get(0, 0, s).norm() < 1e-14);
        }
    }

    #[test]
    fn length_one_is_identity() {
        let a = Tensor3::from_fn(3, 2, 1, |i, j, _| (i * 2 + j) as f64 - 1.5);
        let f = fft_mode3(&a);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(f.get(i, j, 0), c(a[(i, j, 0)], 0.0));
            }
        }
        assert_eq!(ifft_mode3(&f).unwrap(), a);
    }

    #[test]
    fn broken_symmetry_is_reported() {
        let mut g = FTensor3::zeros(1, 1, 4);
        g.set(0, 0, 1, c(0.0, 1.0));
        assert!(matches!(ifft_mode3(&g), Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn fill_mirrors_restores_symmetry() {
        let a = Tensor3::from_fn(2, 3, 6, |i, j, k| libm::sin((i + 3 * j + 7 * k) as f64));
        let f = fft_mode3(&a);
        assert!(f.symmetry_defect() < 1e-12);
        let mut g = f.clone();
        for s in g.independent_slices()..6 {
            for e in g.slice_mut(s) {
                *e = c(99.0, 99.0);
            }
        }
        g.fill_mirrors();
        assert!(g.symmetry_defect() < 1e-12);
        assert!(ifft_mode3(&g).unwrap().distance(&a) < 1e-12);
    }
}
