//! Mixed-radix Cooley-Tukey FFT for the short tube lengths met along mode 3.
//!
//! The length is factored into primes; each stage recurses over the
//! decimated sub-sequences and then combines them with a radix-`p` DFT. Prime
//! lengths fall back to a single direct DFT stage. Forward transforms are
//! unnormalised, inverse transforms are scaled by `1/n`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Reusable scratch buffers for repeated transforms of one length.
#[derive(Debug, Clone, Default)]
pub struct FftWork {
    input: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    factors: Vec<usize>,
    /// `exp(-2 pi i j / n)` for `j in 0..n`.
    twiddles: Vec<Complex64>,
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let twiddles = (0..n)
            .map(|j| {
                let theta = -2.0 * PI * (j as f64) / (n as f64);
                Complex64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        Self {
            n,
            factors: prime_factors(n),
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place unnormalised forward DFT: `X[s] = sum_t x[t] exp(-2 pi i s t / n)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward_with(buf, &mut FftWork::default());
    }

    /// In-place inverse DFT including the `1/n` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse_with(buf, &mut FftWork::default());
    }

    /// [`forward`](Self::forward) reusing caller-owned scratch space.
    pub fn forward_with(&self, buf: &mut [Complex64], work: &mut FftWork) {
        self.run(buf, work, false);
    }

    /// [`inverse`](Self::inverse) reusing caller-owned scratch space.
    pub fn inverse_with(&self, buf: &mut [Complex64], work: &mut FftWork) {
        self.run(buf, work, true);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn run(&self, buf: &mut [Complex64], work: &mut FftWork, inverse: bool) {
        assert_eq!(buf.len(), self.n, "FFT buffer length mismatch");
        if self.n == 1 {
            return;
        }
        let radix = self.factors.iter().copied().max().unwrap_or(1);
        work.input.clear();
        work.input.extend_from_slice(buf);
        work.scratch.resize(radix, Complex64::new(0.0, 0.0));
        self.recurse(&work.input, 0, 1, self.n, 0, buf, &mut work.scratch, inverse);
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &self,
        input: &[Complex64],
        offset: usize,
        stride: usize,
        n: usize,
        level: usize,
        out: &mut [Complex64],
        scratch: &mut [Complex64],
        inverse: bool,
    ) {
        if n == 1 {
            out[0] = input[offset];
            return;
        }
        let p = self.factors[level];
        let m = n / p;
        for r in 0..p {
            self.recurse(
                input,
                offset + r * stride,
                stride * p,
                m,
                level + 1,
                &mut out[r * m..(r + 1) * m],
                scratch,
                inverse,
            );
        }
        let step = self.n / n;
        for k in 0..m {
            for r in 0..p {
                scratch[r] = out[r * m + k];
            }
            for q in 0..p {
                let kk = k + q * m;
                let mut acc = Complex64::new(0.0, 0.0);
                for (r, &x) in scratch[..p].iter().enumerate() {
                    let w = self.twiddles[((r * kk) % n) * step];
                    acc += x * if inverse { w.conj() } else { w };
                }
                out[kk] = acc;
            }
        }
    }
}
