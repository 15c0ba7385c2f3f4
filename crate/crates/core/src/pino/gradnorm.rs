//! Gradient-norm balancing of the loss weights.
//!
//! Each active term carries a weight `omega_i`. The update drives the
//! shared-layer gradient norm of each weighted term toward
//! `mean_norm * r_i^alpha`, where `r_i` is the term's relative inverse
//! training rate (loss ratio against its initial value, normalized by the
//! mean ratio). Weights are clamped positive and renormalized so their sum
//! equals the number of active terms.

use serde::{Deserialize, Serialize};

use super::loss::LossFlags;
use crate::error::{Error, Result};

pub const OMEGA_MIN: f64 = 1e-3;

/// Balancing weights for (data, eq, dde, veq).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub omega: [f64; 4],
    pub active: [bool; 4],
    /// Restoring-rate exponent.
    pub alpha: f64,
}

impl LossWeights {
    pub fn new(flags: &LossFlags, alpha: f64) -> Self {
        let active = flags.active();
        let omega = [
            if active[0] { 1.0 } else { 0.0 },
            if active[1] { 1.0 } else { 0.0 },
            if active[2] { 1.0 } else { 0.0 },
            if active[3] { 1.0 } else { 0.0 },
        ];
        LossWeights {
            omega,
            active,
            alpha,
        }
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Rescale active weights so they sum to the active-term count.
    pub fn renormalize(&mut self) {
        let n = self.n_active() as f64;
        let sum: f64 = (0..4)
            .filter(|&i| self.active[i])
            .map(|i| self.omega[i])
            .sum();
        if sum > 0.0 {
            for i in 0..4 {
                if self.active[i] {
                    self.omega[i] *= n / sum;
                }
            }
        }
    }
}

/// One balancing step from measured per-term *raw* gradient norms (without
/// the omega factor) and loss ratios against the initial values.
pub fn gradnorm_update(
    weights: &mut LossWeights,
    raw_norms: &[f64; 4],
    current_losses: &[f64; 4],
    initial_losses: &[f64; 4],
    lr: f64,
) -> Result<()> {
    let idx: Vec<usize> = (0..4).filter(|&i| weights.active[i]).collect();
    if idx.len() < 2 {
        return Err(Error::invalid(
            "gradient balancing needs at least two active terms",
        ));
    }
    if idx.iter().all(|&i| raw_norms[i] == 0.0) {
        return Err(Error::invalid("all per-term gradient norms are zero"));
    }
    // Weighted norms and mean.
    let g: Vec<f64> = idx.iter().map(|&i| weights.omega[i] * raw_norms[i]).collect();
    let g_mean = g.iter().sum::<f64>() / g.len() as f64;
    // Relative inverse training rates.
    let ratios: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let init = initial_losses[i].abs().max(1e-300);
            (current_losses[i] / init).max(1e-12)
        })
        .collect();
    let ratio_mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    for (pos, &i) in idx.iter().enumerate() {
        let r = ratios[pos] / ratio_mean;
        let target = g_mean * r.powf(weights.alpha);
        // d|G_i - target|/d omega_i with targets treated as constants.
        let step = (g[pos] - target).signum() * raw_norms[i];
        weights.omega[i] = (weights.omega[i] - lr * step).max(OMEGA_MIN);
    }
    weights.renormalize();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags_all() -> LossFlags {
        LossFlags {
            data: true,
            eq: true,
            dde: false,
            veq: false,
            dde_window: None,
        }
    }

    #[test]
    fn equal_norms_and_rates_are_a_fixed_point() {
        let mut w = LossWeights::new(&flags_all(), 1.5);
        let before = w.omega;
        gradnorm_update(&mut w, &[2.0, 2.0, 0.0, 0.0], &[0.5, 0.5, 0.0, 0.0], &[1.0, 1.0, 1.0, 1.0], 0.05)
            .unwrap();
        for i in 0..4 {
            assert!((w.omega[i] - before[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn larger_norm_gets_smaller_weight() {
        // alpha = 0: targets equalize the weighted norms, so the term with
        // 10x the raw norm must lose weight.
        let mut w = LossWeights::new(&flags_all(), 0.0);
        gradnorm_update(&mut w, &[10.0, 1.0, 0.0, 0.0], &[1.0, 1.0, 0.0, 0.0], &[1.0, 1.0, 1.0, 1.0], 0.05)
            .unwrap();
        assert!(w.omega[0] < w.omega[1], "omega = {:?}", w.omega);
        // Direction continues toward the 1:10 inverse weighting.
        for _ in 0..200 {
            gradnorm_update(
                &mut w,
                &[10.0, 1.0, 0.0, 0.0],
                &[1.0, 1.0, 0.0, 0.0],
                &[1.0, 1.0, 1.0, 1.0],
                0.05,
            )
            .unwrap();
        }
        let ratio = w.omega[0] / w.omega[1];
        assert!(ratio < 0.2, "converged ratio {ratio}");
    }

    #[test]
    fn weights_stay_normalized_and_positive() {
        let mut w = LossWeights::new(
            &LossFlags {
                data: true,
                eq: true,
                dde: true,
                veq: true,
                dde_window: None,
            },
            1.5,
        );
        for step in 0..50 {
            gradnorm_update(
                &mut w,
                &[5.0, 0.01, 1.0, 0.3],
                &[1.0, 0.2, 0.5, 0.9],
                &[1.0, 1.0, 1.0, 1.0],
                0.1,
            )
            .unwrap();
            let sum: f64 = w.omega.iter().sum();
            assert!((sum - 4.0).abs() < 1e-12, "step {step}: sum {sum}");
            assert!(w.omega.iter().all(|o| *o > 0.0));
        }
    }

    #[test]
    fn needs_two_active_terms() {
        let mut w = LossWeights::new(&LossFlags::data_only(), 1.5);
        assert!(gradnorm_update(&mut w, &[1.0; 4], &[1.0; 4], &[1.0; 4], 0.1).is_err());
    }
}
