//! Stochastic excitation synthesis by spectral representation.
//!
//! A target one-sided PSD `G(f)` (units^2/Hz) is discretized on bins
//! `f_k = k / T` (so the series is exactly periodic on the record) and the
//! signal synthesized as a cosine sum with one uniform random phase per bin:
//!
//! `x(t) = sum_k sqrt(2 G(f_k) df) cos(2 pi f_k t + phi_k)`.
//!
//! The DC bin is omitted, which forces the synthesized mean to zero and
//! avoids drift when the signal is used as a force. Each channel draws an
//! independent phase stream from a seed derived from the sample seed.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::parameters::TimeGrid;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

/// Spectrum model shared by all channels of a spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExcitationKind {
    /// Flat one-sided PSD `psd` inside the band.
    BandNoise { psd: f64 },
    /// Kanai-Tajimi ground-motion spectrum: filter frequency `omega_g`
    /// (rad/s), damping `zeta_g`, intensity `s0` (units^2/Hz at f = 0).
    KanaiTajimi { omega_g: f64, zeta_g: f64, s0: f64 },
    /// Deterministic sinusoid; ignores the seed and the band.
    Sine { amplitude: f64, freq_hz: f64, phase: f64 },
    /// No excitation.
    Zero,
}

/// Excitation model: kind, band limits and channel count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSpec {
    pub kind: ExcitationKind,
    /// Synthesis band [f_lo, f_hi] in Hz; bins outside are zero.
    pub band: [f64; 2],
    pub channels: usize,
}

impl ExcitationSpec {
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::invalid("excitation needs at least one channel"));
        }
        let [f_lo, f_hi] = self.band;
        if !(0.0 <= f_lo && f_lo <= f_hi) {
            return Err(Error::invalid(format!(
                "excitation band must satisfy 0 <= f_lo <= f_hi, got [{f_lo}, {f_hi}]"
            )));
        }
        let stochastic = matches!(
            self.kind,
            ExcitationKind::BandNoise { .. } | ExcitationKind::KanaiTajimi { .. }
        );
        if stochastic && f_hi >= grid.nyquist() {
            return Err(Error::NyquistExceeded {
                f_hi,
                nyquist: grid.nyquist(),
            });
        }
        match self.kind {
            ExcitationKind::BandNoise { psd } if psd < 0.0 => {
                Err(Error::invalid("band noise PSD must be nonnegative"))
            }
            ExcitationKind::KanaiTajimi { s0, zeta_g, omega_g } => {
                if s0 < 0.0 || zeta_g <= 0.0 || omega_g <= 0.0 {
                    Err(Error::invalid(
                        "kanai-tajimi requires s0 >= 0, zeta_g > 0, omega_g > 0",
                    ))
                } else {
                    Ok(())
                }
            }
            ExcitationKind::Sine { freq_hz, .. } if freq_hz > grid.nyquist() => {
                Err(Error::NyquistExceeded {
                    f_hi: freq_hz,
                    nyquist: grid.nyquist(),
                })
            }
            _ => Ok(()),
        }
    }

    /// One-sided PSD at frequency `f` Hz, zero outside the band.
    pub fn psd(&self, f: f64) -> f64 {
        let [f_lo, f_hi] = self.band;
        if f < f_lo || f > f_hi {
            return 0.0;
        }
        match self.kind {
            ExcitationKind::BandNoise { psd } => psd,
            ExcitationKind::KanaiTajimi { omega_g, zeta_g, s0 } => {
                kanai_tajimi_psd(2.0 * std::f64::consts::PI * f, omega_g, zeta_g, s0)
            }
            ExcitationKind::Sine { .. } | ExcitationKind::Zero => 0.0,
        }
    }
}

/// Kanai-Tajimi one-sided PSD as a function of circular frequency `omega`.
pub fn kanai_tajimi_psd(omega: f64, omega_g: f64, zeta_g: f64, s0: f64) -> f64 {
    let r = omega / omega_g;
    let r2 = r * r;
    let four_z2 = 4.0 * zeta_g * zeta_g;
    s0 * (1.0 + four_z2 * r2) / ((1.0 - r2).powi(2) + four_z2 * r2)
}

/// Export an excitation record as CSV with `time, channel_*` columns.
pub fn excitation_to_csv(f: &Array2<f64>, grid: &TimeGrid, path: &std::path::Path) -> Result<()> {
    let mut header = vec!["time".to_string()];
    for c in 0..f.ncols() {
        header.push(format!("channel_{c}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = grid
        .times()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![crate::io::fmt_g(*t)];
            for c in 0..f.ncols() {
                row.push(crate::io::fmt_g(f[[i, c]]));
            }
            row
        })
        .collect();
    crate::io::write_csv(path, &header_refs, &rows)
}

/// Synthesize all channels of `spec` on `grid`, deterministically in `seed`.
pub fn generate_excitation(
    spec: &ExcitationSpec,
    grid: &TimeGrid,
    seed: u64,
) -> Result<Array2<f64>> {
    spec.validate(grid)?;
    let n_t = grid.n_t();
    let mut out = Array2::<f64>::zeros((n_t, spec.channels));
    match spec.kind {
        ExcitationKind::Zero => {}
        ExcitationKind::Sine {
            amplitude,
            freq_hz,
            phase,
        } => {
            let w = 2.0 * std::f64::consts::PI * freq_hz;
            for ch in 0..spec.channels {
                for (i, t) in grid.times().iter().enumerate() {
                    out[[i, ch]] = amplitude * (w * t + phase).sin();
                }
            }
        }
        _ => {
            let t_total = grid.t_total;
            let df = 1.0 / t_total;
            let k_max = (spec.band[1] / df).floor() as usize;
            for ch in 0..spec.channels {
                let mut rng = Rng::new(derive_seed(seed, 2, ch as u64));
                // Draw a phase for every bin up to the band edge so channel
                // streams stay aligned if the band changes.
                let mut amps = Vec::with_capacity(k_max);
                for k in 1..=k_max {
                    let f_k = k as f64 * df;
                    let phi = rng.uniform_in(0.0, 2.0 * std::f64::consts::PI);
                    let a = (2.0 * spec.psd(f_k) * df).sqrt();
                    amps.push((2.0 * std::f64::consts::PI * f_k, a, phi));
                }
                for (i, t) in grid.times().iter().enumerate() {
                    let mut acc = 0.0;
                    for &(w, a, phi) in &amps {
                        acc += a * (w * t + phi).cos();
                    }
                    out[[i, ch]] = acc;
                }
            }
        }
    }
    Ok(out)
}
