use alloc::format;

use super::{fft_mode3, ifft_mode3, FTensor3, Tensor3};
use crate::{Error, Result};

/// t-product `A * B` of an `n1 x n2 x n3` and an `n2 x n4 x n3` tensor.
///
/// Tube `(i, j)` of the result is `sum_k A(i,k,:) (*) B(k,j,:)` with `(*)`
/// circular convolution; computed as one matrix product per Fourier slice.
pub fn tprod(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    let (n1, n2, n3) = a.dims();
    let (m2, n4, m3) = b.dims();
    if n2 != m2 || n3 != m3 {
        return Err(Error::DimensionMismatch(format!(
            "t-product of {n1}x{n2}x{n3} and {m2}x{n4}x{m3}"
        )));
    }
    let fa = fft_mode3(a);
    let fb = fft_mode3(b);
    let fc = tprod_fourier(&fa, &fb);
    ifft_mode3(&fc)
}

/// Slice-wise product of two real-origin spectra, computed on the half
/// spectrum and completed by conjugate symmetry.
pub(crate) fn tprod_fourier(fa: &FTensor3, fb: &FTensor3) -> FTensor3 {
    let (n1, _, n3) = fa.dims();
    let n4 = fb.dims().1;
    let mut fc = FTensor3::zeros(n1, n4, n3);
    for s in 0..fc.independent_slices() {
        let c = fa.slice_mat(s).mul(&fb.slice_mat(s));
        fc.set_slice_mat(s, &c);
    }
    fc.fill_mirrors();
    fc
}

/// Tensor transpose: transpose every frontal slice, then reverse the order of
/// slices 2 through n3.
pub fn ttranspose(a: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = a.dims();
    Tensor3::from_fn(n2, n1, n3, |i, j, k| a[(j, i, (n3 - k) % n3)])
}

/// Identity under the t-product: identity matrix in frontal slice 1, zeros
/// elsewhere.
pub fn identity_tensor(n: usize, n3: usize) -> Tensor3 {
    Tensor3::from_fn(n, n, n3, |i, j, k| if i == j && k == 0 { 1.0 } else { 0.0 })
}

/// Sum of the Euclidean norms of all mode-3 tubes.
pub fn l112_norm(a: &Tensor3) -> f64 {
    let (n1, n2, _) = a.dims();
    let mut total = 0.0;
    for j in 0..n2 {
        for i in 0..n1 {
            total += a.tube_norm(i, j);
        }
    }
    total
}

pub fn fro_norm(a: &Tensor3) -> f64 {
    a.fro_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_point_convolution() {
        let a = Tensor3::new(1, 1, 2, vec![1.0, 2.0]).unwrap();
        let b = Tensor3::new(1, 1, 2, vec![3.0, 4.0]).unwrap();
        let c = tprod(&a, &b).unwrap();
        assert!((c[(0, 0, 0)] - 11.0).abs() < 1e-14);
        assert!((c[(0, 0, 1)] - 10.0).abs() < 1e-14);
    }

    #[test]
    fn length_one_is_matrix_product() {
        let a = Tensor3::from_fn(2, 3, 1, |i, j, _| (i + 2 * j) as f64);
        let b = Tensor3::from_fn(3, 2, 1, |i, j, _| (3 * i) as f64 - j as f64);
        let c = tprod(&a, &b).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want: f64 = (0..3).map(|k| a[(i, k, 0)] * b[(k, j, 0)]).sum();
                assert!((c[(i, j, 0)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = Tensor3::zeros(2, 3, 4);
        assert!(matches!(
            tprod(&a, &Tensor3::zeros(2, 2, 4)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            tprod(&a, &Tensor3::zeros(3, 2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn transpose_reverses_slices() {
        let a = Tensor3::from_fn(2, 3, 4, |i, j, k| (i + 10 * j + 100 * k) as f64);
        let t = ttranspose(&a);
        assert_eq!(t.dims(), (3, 2, 4));
        assert_eq!(t[(2, 1, 0)], a[(1, 2, 0)]);
        assert_eq!(t[(2, 1, 1)], a[(1, 2, 3)]);
        assert_eq!(t[(0, 0, 3)], a[(0, 0, 1)]);
        assert_eq!(ttranspose(&t), a);
    }

    #[test]
    fn norms() {
        assert_eq!(l112_norm(&Tensor3::zeros(2, 2, 3)), 0.0);
        let mut a = Tensor3::zeros(2, 2, 2);
        a.set_tube(1, 0, &[3.0, 4.0]);
        assert_eq!(l112_norm(&a), 5.0);
        assert!((fro_norm(&identity_tensor(5, 3)) - libm::sqrt(5.0)).abs() < 1e-15);
    }

    #[test]
    fn identity_spectrum_is_flat() {
        let f = fft_mode3(&identity_tensor(3, 5));
        for s in 0..5 {
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((f.get(i, j, s).re - want).abs() < 1e-15);
                    assert!(f.get(i, j, s).im.abs() < 1e-15);
                }
            }
        }
    }
}
