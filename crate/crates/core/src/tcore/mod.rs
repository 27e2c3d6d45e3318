//! Dense third-order tensors and the t-product algebra.
//!
//! The t-product replaces scalar multiplication in the matrix product by
//! circular convolution of mode-3 tubes. A DFT along mode 3 block-diagonalises
//! it, so every operation here is computed slice by slice in the Fourier
//! domain and transformed back.

mod fft;
mod fourier;
mod ops;
mod tensor;

pub use fft::{FftPlan, FftWork};
pub use fourier::{fft_mode3, ifft_mode3, FTensor3, IMAG_RESIDUE_TOL};
pub use ops::{fro_norm, identity_tensor, l112_norm, tprod, ttranspose};
pub use tensor::{Tensor3, Tube};
