//! Fourier-spectral convolution: FFT along time, a learned complex matrix
//! per retained bin, inverse FFT.
//!
//! Real signals are handled with explicit Hermitian symmetry: the assembled
//! output spectrum mirrors retained bins into their conjugate twins, and the
//! DC (and Nyquist, when retained) bin keeps only its real part. The
//! backward pass is the exact adjoint, derived bin by bin, so reverse-mode
//! gradients match finite differences to roundoff.

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Cached FFT plans for one grid length.
pub struct SpectralOps {
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralOps {
    pub fn new(n: usize) -> SpectralOps {
        let mut planner = FftPlanner::new();
        SpectralOps {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn scratch(&self) -> SpectralScratch {
        let len = self
            .fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len());
        SpectralScratch {
            time: vec![Complex::new(0.0, 0.0); self.n],
            fft: vec![Complex::new(0.0, 0.0); len],
        }
    }

}

/// Reusable complex buffers for one worker.
pub struct SpectralScratch {
    time: Vec<Complex<f64>>,
    fft: Vec<Complex<f64>>,
}

/// Retained spectrum of the block input, saved for the weight gradient:
/// `coeffs[k * w + c]` is bin `k` of channel `c`.
pub type SavedCoeffs = Vec<Complex<f64>>;

/// Forward spectral convolution for one sample.
///
/// `x` and `y` are `n_t x w` time-major; `r_re`/`r_im` hold the complex
/// weights indexed `[k][out][in]`. Returns the retained input coefficients
/// for use in the backward pass.
#[allow(clippy::too_many_arguments)]
pub fn spectral_forward(
    ops: &SpectralOps,
    scratch: &mut SpectralScratch,
    r_re: &[f64],
    r_im: &[f64],
    k_modes: usize,
    width: usize,
    x: &[f64],
    y: &mut [f64],
) -> SavedCoeffs {
    let n = ops.n;
    debug_assert_eq!(x.len(), n * width);
    debug_assert_eq!(y.len(), n * width);
    let mut coeffs = vec![Complex::new(0.0, 0.0); k_modes * width];

    // FFT per channel, keep the retained bins.
    for c in 0..width {
        for t in 0..n {
            scratch.time[t] = Complex::new(x[t * width + c], 0.0);
        }
        ops.fwd.process_with_scratch(&mut scratch.time, &mut scratch.fft);
        for k in 0..k_modes {
            coeffs[k * width + c] = scratch.time[k];
        }
    }

    // Per-bin complex matmul Y_k = R_k X_k.
    let mut y_bins = vec![Complex::new(0.0, 0.0); k_modes * width];
    for k in 0..k_modes {
        let x_bin = &coeffs[k * width..(k + 1) * width];
        let base = k * width * width;
        for out in 0..width {
            let row = base + out * width;
            let mut acc = Complex::new(0.0, 0.0);
            for (i, xv) in x_bin.iter().enumerate() {
                let r = Complex::new(r_re[row + i], r_im[row + i]);
                acc += r * xv;
            }
            y_bins[k * width + out] = acc;
        }
    }

    // Assemble a Hermitian spectrum and transform back.
    let nyquist = if n % 2 == 0 { n / 2 } else { usize::MAX };
    for c in 0..width {
        scratch.time.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0));
        for k in 0..k_modes {
            let v = y_bins[k * width + c];
            if k == 0 || k == nyquist {
                scratch.time[k] = Complex::new(v.re, 0.0);
            } else {
                scratch.time[k] = v;
                scratch.time[n - k] = v.conj();
            }
        }
        ops.inv.process_with_scratch(&mut scratch.time, &mut scratch.fft);
        let inv_n = 1.0 / n as f64;
        for t in 0..n {
            y[t * width + c] = scratch.time[t].re * inv_n;
        }
    }
    coeffs
}

/// Backward pass: accumulates weight gradients into `g_r_re`/`g_r_im` and
/// writes the input gradient into `g_x`.
#[allow(clippy::too_many_arguments)]
pub fn spectral_backward(
    ops: &SpectralOps,
    scratch: &mut SpectralScratch,
    r_re: &[f64],
    r_im: &[f64],
    k_modes: usize,
    width: usize,
    coeffs: &SavedCoeffs,
    g_y: &[f64],
    g_r_re: &mut [f64],
    g_r_im: &mut [f64],
    g_x: &mut [f64],
) {
    let n = ops.n;
    let nyquist = if n % 2 == 0 { n / 2 } else { usize::MAX };
    let inv_n = 1.0 / n as f64;

    // Gradient of the retained output bins: forward FFT of the output
    // gradient, scaled 2/n on interior bins and 1/n (real part) on DC and
    // Nyquist where only the real part reached the output.
    let mut g_y_bins = vec![Complex::new(0.0, 0.0); k_modes * width];
    for c in 0..width {
        for t in 0..n {
            scratch.time[t] = Complex::new(g_y[t * width + c], 0.0);
        }
        ops.fwd.process_with_scratch(&mut scratch.time, &mut scratch.fft);
        for k in 0..k_modes {
            g_y_bins[k * width + c] = if k == 0 || k == nyquist {
                Complex::new(scratch.time[k].re * inv_n, 0.0)
            } else {
                scratch.time[k] * (2.0 * inv_n)
            };
        }
    }

    // Weight and input-coefficient gradients per bin.
    let mut g_x_bins = vec![Complex::new(0.0, 0.0); k_modes * width];
    for k in 0..k_modes {
        let base = k * width * width;
        let x_bin = &coeffs[k * width..(k + 1) * width];
        for out in 0..width {
            let g = g_y_bins[k * width + out];
            let row = base + out * width;
            for (i, xv) in x_bin.iter().enumerate() {
                let gx = g * xv.conj();
                g_r_re[row + i] += gx.re;
                g_r_im[row + i] += gx.im;
                let r = Complex::new(r_re[row + i], r_im[row + i]);
                g_x_bins[k * width + i] += r.conj() * g;
            }
        }
    }

    // Back to the time domain: unnormalized inverse transform of the sparse
    // coefficient gradient, real part.
    for c in 0..width {
        scratch.time.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0));
        for k in 0..k_modes {
            scratch.time[k] = g_x_bins[k * width + c];
        }
        ops.inv.process_with_scratch(&mut scratch.time, &mut scratch.fft);
        for t in 0..n {
            g_x[t * width + c] = scratch.time[t].re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn identity_weights(k_modes: usize, width: usize) -> (Vec<f64>, Vec<f64>) {
        let mut re = vec![0.0; k_modes * width * width];
        let im = vec![0.0; k_modes * width * width];
        for k in 0..k_modes {
            for i in 0..width {
                re[k * width * width + i * width + i] = 1.0;
            }
        }
        (re, im)
    }

    #[test]
    fn identity_full_spectrum_roundtrips() {
        for n in [16usize, 17, 129] {
            let width = 3;
            let k_modes = n / 2 + 1;
            let ops = SpectralOps::new(n);
            let mut scratch = ops.scratch();
            let (re, im) = identity_weights(k_modes, width);
            let mut rng = Rng::new(n as u64);
            let x: Vec<f64> = (0..n * width).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let mut y = vec![0.0; n * width];
            spectral_forward(&ops, &mut scratch, &re, &im, k_modes, width, &x, &mut y);
            for (a, b) in x.iter().zip(y.iter()) {
                assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_weights_zero_output() {
        let (n, width, k_modes) = (32, 4, 9);
        let ops = SpectralOps::new(n);
        let mut scratch = ops.scratch();
        let re = vec![0.0; k_modes * width * width];
        let im = vec![0.0; k_modes * width * width];
        let x: Vec<f64> = (0..n * width).map(|i| (i as f64).sin()).collect();
        let mut y = vec![1.0; n * width];
        spectral_forward(&ops, &mut scratch, &re, &im, k_modes, width, &x, &mut y);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn second_harmonic_is_filtered_by_single_bin() {
        // Keeping only bins {0, 1} with identity weights annihilates a pure
        // second-harmonic input.
        let (n, width) = (64, 2);
        let k_modes = 2;
        let ops = SpectralOps::new(n);
        let mut scratch = ops.scratch();
        let (re, im) = identity_weights(k_modes, width);
        let mut x = vec![0.0; n * width];
        for t in 0..n {
            let phase = 2.0 * std::f64::consts::PI * 2.0 * t as f64 / n as f64;
            x[t * width] = phase.cos();
            x[t * width + 1] = phase.sin();
        }
        let mut y = vec![0.0; n * width];
        spectral_forward(&ops, &mut scratch, &re, &im, k_modes, width, &x, &mut y);
        let max = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max < 1e-12, "leaked {max}");
        // A first-harmonic input passes through unchanged.
        for t in 0..n {
            let phase = 2.0 * std::f64::consts::PI * t as f64 / n as f64;
            x[t * width] = phase.cos();
            x[t * width + 1] = 0.25 * phase.sin();
        }
        spectral_forward(&ops, &mut scratch, &re, &im, k_modes, width, &x, &mut y);
        for (a, b) in x.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_is_linear_in_input() {
        let (n, width, k_modes) = (24, 3, 5);
        let ops = SpectralOps::new(n);
        let mut scratch = ops.scratch();
        let mut rng = Rng::new(8);
        let len = k_modes * width * width;
        let re: Vec<f64> = (0..len).map(|_| rng.uniform_in(-0.5, 0.5)).collect();
        let im: Vec<f64> = (0..len).map(|_| rng.uniform_in(-0.5, 0.5)).collect();
        let x1: Vec<f64> = (0..n * width).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let x2: Vec<f64> = (0..n * width).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let (a, b) = (1.7, -0.3);
        let comb: Vec<f64> = x1.iter().zip(x2.iter()).map(|(p, q)| a * p + b * q).collect();
        let mut y1 = vec![0.0; n * width];
        let mut y2 = vec![0.0; n * width];
        let mut yc = vec![0.0; n * width];
        spectral_forward(&ops, &mut scratch, &re, &im, k_modes, width, &x1, &mut y1);
        spectral_forward(&ops, &mut scratch, &re, &im, k_modes, width, &x2, &mut y2);
        spectral_forward(&ops, &mut scratch, &re, &im, k_modes, width, &comb, &mut yc);
        for i in 0..n * width {
            assert!((a * y1[i] + b * y2[i] - yc[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        // <L(x), g> == <x, L^T(g)> including the weight gradient pairing
        // <dR, G_R>; checked with random tensors for odd and even n.
        for n in [20usize, 21] {
            let (width, k_modes) = (3, 6);
            let ops = SpectralOps::new(n);
            let mut scratch = ops.scratch();
            let mut rng = Rng::new(n as u64 + 100);
            let len = k_modes * width * width;
            let re: Vec<f64> = (0..len).map(|_| rng.uniform_in(-0.4, 0.4)).collect();
            let im: Vec<f64> = (0..len).map(|_| rng.uniform_in(-0.4, 0.4)).collect();
            let x: Vec<f64> = (0..n * width).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let g_y: Vec<f64> = (0..n * width).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let mut y = vec![0.0; n * width];
            let coeffs =
                spectral_forward(&ops, &mut scratch, &re, &im, k_modes, width, &x, &mut y);
            let lhs: f64 = y.iter().zip(g_y.iter()).map(|(a, b)| a * b).sum();
            let mut g_re = vec![0.0; len];
            let mut g_im = vec![0.0; len];
            let mut g_x = vec![0.0; n * width];
            spectral_backward(
                &ops, &mut scratch, &re, &im, k_modes, width, &coeffs, &g_y, &mut g_re,
                &mut g_im, &mut g_x,
            );
            let rhs: f64 = x.iter().zip(g_x.iter()).map(|(a, b)| a * b).sum();
            assert!(
                (lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()),
                "n={n}: {lhs} vs {rhs}"
            );
        }
    }
}
