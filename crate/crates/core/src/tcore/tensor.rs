use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Real dense `n1 x n2 x n3` tensor.
///
/// Storage is frontal-slice-major and column-major inside each frontal slice,
/// so a frontal slice is a contiguous column-major `n1 x n2` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    /// Builds a tensor from raw data in the canonical layout.
    pub fn new(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(Error::InvalidTensor(format!(
                "dimensions must be positive, got {n1}x{n2}x{n3}"
            )));
        }
        if data.len() != n1 * n2 * n3 {
            return Err(Error::InvalidTensor(format!(
                "{n1}x{n2}x{n3} tensor needs {} entries, got {}",
                n1 * n2 * n3,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor(format!("non-finite entry at index {pos}")));
        }
        Ok(Self { n1, n2, n3, data })
    }

    /// All-zero tensor. Panics on a zero dimension.
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        assert!(n1 > 0 && n2 > 0 && n3 > 0, "tensor dimensions must be positive");
        Self {
            n1,
            n2,
            n3,
            data: vec![0.0; n1 * n2 * n3],
        }
    }

    pub fn from_fn(n1: usize, n2: usize, n3: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n1, n2, n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    t[(i, j, k)] = f(i, j, k);
                }
            }
        }
        t
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    #[inline]
    pub fn n1(&self) -> usize {
        self.n1
    }

    #[inline]
    pub fn n2(&self) -> usize {
        self.n2
    }

    #[inline]
    pub fn n3(&self) -> usize {
        self.n3
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.n1 && j < self.n2 && k < self.n3);
        (k * self.n2 + j) * self.n1 + i
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Frontal slice `k` as a column-major `n1 x n2` matrix.
    pub fn frontal(&self, k: usize) -> &[f64] {
        let sz = self.n1 * self.n2;
        &self.data[k * sz..(k + 1) * sz]
    }

    pub fn frontal_mut(&mut self, k: usize) -> &mut [f64] {
        let sz = self.n1 * self.n2;
        &mut self.data[k * sz..(k + 1) * sz]
    }

    pub fn tube(&self, i: usize, j: usize) -> Tube {
        Tube((0..self.n3).map(|k| self[(i, j, k)]).collect())
    }

    pub fn set_tube(&mut self, i: usize, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.n3, "tube length mismatch");
        for (k, &v) in values.iter().enumerate() {
            self[(i, j, k)] = v;
        }
    }

    pub fn tube_norm(&self, i: usize, j: usize) -> f64 {
        let mut s = 0.0;
        for k in 0..self.n3 {
            let v = self[(i, j, k)];
            s += v * v;
        }
        libm::sqrt(s)
    }

    pub fn is_zero_tube(&self, i: usize, j: usize) -> bool {
        (0..self.n3).all(|k| self[(i, j, k)] == 0.0)
    }

    /// Lateral slice (tensor column) `j` as an `n1 x 1 x n3` tensor.
    pub fn lateral(&self, j: usize) -> Tensor3 {
        self.select_columns(&[j])
    }

    pub fn set_lateral(&mut self, j: usize, col: &Tensor3) {
        assert_eq!(
            (col.n1, col.n2, col.n3),
            (self.n1, 1, self.n3),
            "lateral slice shape mismatch"
        );
        for k in 0..self.n3 {
            let dst = self.offset(0, j, k);
            self.data[dst..dst + self.n1].copy_from_slice(col.frontal(k));
        }
    }

    /// Tensor made of the lateral slices `cols`, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Tensor3 {
        let mut out = Tensor3::zeros(self.n1, cols.len().max(1), self.n3);
        if cols.is_empty() {
            return out;
        }
        for k in 0..self.n3 {
            for (jj, &j) in cols.iter().enumerate() {
                let src = self.offset(0, j, k);
                let dst = out.offset(0, jj, k);
                out.data[dst..dst + self.n1].copy_from_slice(&self.data[src..src + self.n1]);
            }
        }
        out
    }

    /// Tensor made of the horizontal slices `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Tensor3 {
        assert!(!rows.is_empty());
        Tensor3::from_fn(rows.len(), self.n2, self.n3, |i, j, k| self[(rows[i], j, k)])
    }

    /// Leading `r x c` corner of every frontal slice.
    pub fn leading_block(&self, r: usize, c: usize) -> Tensor3 {
        assert!(r <= self.n1 && c <= self.n2);
        Tensor3::from_fn(r, c, self.n3, |i, j, k| self[(i, j, k)])
    }

    pub fn scaled(&self, s: f64) -> Tensor3 {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Tensor3 {
        assert_eq!(self.dims(), other.dims(), "elementwise shape mismatch");
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self + other`; panics on shape mismatch.
    pub fn add(&self, other: &Tensor3) -> Tensor3 {
        self.zip_with(other, |a, b| a + b)
    }

    /// `self - other`; panics on shape mismatch.
    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor3) {
        assert_eq!(self.dims(), other.dims(), "elementwise shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn fro_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum::<f64>())
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims(), other.dims(), "elementwise shape mismatch");
        libm::sqrt(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
        )
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims(), other.dims(), "elementwise shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, k)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}

/// A mode-3 fiber of length `n3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube(pub(crate) Vec<f64>);

impl Tube {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidTensor("tube must have length >= 1".into()));
        }
        Ok(Tube(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum::<f64>())
    }

    /// The tube as a `1 x 1 x n3` tensor.
    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3 {
            n1: 1,
            n2: 1,
            n3: self.0.len(),
            data: self.0.clone(),
        }
    }
}
