//! Training loop: Adam with step decay, seeded batch order, gradient-norm
//! balancing once per epoch, per-epoch test evaluation.

use serde::{Deserialize, Serialize};

use super::arch::ArchConfig;
use super::gradnorm::{gradnorm_update, LossWeights};
use super::loss::{eval_batch, evaluate_rlse, LossFlags, RlseReport, TermValues};
use super::model::{init_model, OperatorModel};
use super::prepare::{io_dims, prepare};
use super::spectral::SpectralOps;
use crate::en::ENWeights;
use crate::error::{Error, Result};
use crate::oracle::Dataset;
use crate::rng::{derive_seed, Rng};

/// Spectral/head sizes chosen by the user; input/output dims come from the
/// dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchHyper {
    pub width: usize,
    pub depth: usize,
    pub k_modes: usize,
    pub fc_width: usize,
    pub fc_depth: usize,
}

impl Default for ArchHyper {
    fn default() -> Self {
        ArchHyper {
            width: 36,
            depth: 3,
            k_modes: 16,
            fc_width: 64,
            fc_depth: 2,
        }
    }
}

impl ArchHyper {
    pub fn for_dataset(&self, dataset: &Dataset) -> ArchConfig {
        let (c_in, n_out) = io_dims(dataset);
        ArchConfig {
            width: self.width,
            depth: self.depth,
            k_modes: self.k_modes,
            fc_width: self.fc_width,
            fc_depth: self.fc_depth,
            in_channels: c_in,
            out_channels: n_out,
            n_t: dataset.n_t(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradNormConfig {
    pub alpha: f64,
    pub lr: f64,
    /// Update period in epochs; 0 disables balancing.
    pub every: usize,
}

impl Default for GradNormConfig {
    fn default() -> Self {
        GradNormConfig {
            alpha: 1.5,
            lr: 0.025,
            every: 1,
        }
    }
}

/// Everything the training loop needs besides the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub arch: ArchHyper,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate multiplies by `decay_ratio` every `decay_step` epochs.
    pub decay_step: usize,
    pub decay_ratio: f64,
    pub seed: u64,
    pub loss: LossFlags,
    #[serde(default)]
    pub gradnorm: GradNormConfig,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    1
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr <= 0.0 {
            return Err(Error::invalid("epochs, batch_size and lr must be positive"));
        }
        if self.decay_step == 0 || !(0.0 < self.decay_ratio && self.decay_ratio <= 1.0) {
            return Err(Error::invalid(
                "decay_step must be positive and decay_ratio in (0, 1]",
            ));
        }
        if self.loss.n_active() == 0 {
            return Err(Error::invalid("at least one loss term must be active"));
        }
        Ok(())
    }
}

/// One epoch of the training record.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub lr: f64,
    pub loss_data: f64,
    pub loss_eq: f64,
    pub loss_dde: f64,
    pub loss_veq: f64,
    pub objective: f64,
    pub omega: [f64; 4],
    pub test_rlse_solutions: f64,
    pub test_rlse_deriv1: f64,
    pub test_rlse_deriv2: f64,
}

/// Loss components, weight trajectories and test errors per epoch.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
}

impl TrainReport {
    pub fn final_rlse(&self) -> Option<(f64, f64, f64)> {
        self.rows.last().map(|r| {
            (
                r.test_rlse_solutions,
                r.test_rlse_deriv1,
                r.test_rlse_deriv2,
            )
        })
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

fn shared_layer_norm(model: &OperatorModel, grad: &[f64]) -> f64 {
    let range = model.layout.shared_layer();
    grad[range].iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Train an operator on a normalized dataset.
///
/// Deterministic for a given config: batch order comes from the seed, and
/// gradient reduction uses a fixed bracketing regardless of `jobs`.
pub fn train(
    dataset: &Dataset,
    en: Option<&ENWeights>,
    config: &TrainConfig,
) -> Result<(OperatorModel, TrainReport)> {
    config.validate()?;
    let arch = config.arch.for_dataset(dataset);
    arch.validate()?;
    if (config.loss.data || config.loss.eq || config.loss.dde) && dataset.train.is_empty() {
        return Err(Error::MissingData("training split is empty".into()));
    }
    if config.loss.veq && dataset.virtuals.is_empty() {
        return Err(Error::MissingData(
            "virtual equation loss requires virtual pairs".into(),
        ));
    }
    if let Some(w) = config.loss.dde_window {
        if w > dataset.grid.t_total / 2.0 {
            return Err(Error::invalid("derivative-loss window exceeds T/2"));
        }
    }
    let prepared = prepare(dataset, en, &arch, config.loss.dde_window)?;
    let ops = SpectralOps::new(arch.n_t);
    let mut model = init_model(&arch, config.seed)?;
    let mut adam = Adam::new(model.n_params());
    let mut weights = LossWeights::new(&config.loss, config.gradnorm.alpha);
    let mut report = TrainReport::default();
    let mut initial_losses: Option<[f64; 4]> = None;
    let mut prev_epoch_losses = [0.0; 4];

    let n_train = prepared.train.len();
    let n_virtual = prepared.virtuals.len();
    let mut train_order: Vec<usize> = (0..n_train).collect();
    let mut virtual_order: Vec<usize> = (0..n_virtual).collect();

    for epoch in 0..config.epochs {
        let lr = config.lr * config.decay_ratio.powi((epoch / config.decay_step) as i32);
        let mut rng = Rng::new(derive_seed(config.seed, 40, epoch as u64));
        rng.shuffle(&mut train_order);
        rng.shuffle(&mut virtual_order);

        // Balance weights once per period using the first batch.
        let do_gradnorm = config.gradnorm.every > 0
            && weights.n_active() >= 2
            && epoch > 0
            && epoch % config.gradnorm.every == 0;
        if do_gradnorm {
            let (lb, vb) = first_batches(&train_order, &virtual_order, config.batch_size);
            let mut raw_norms = [0.0; 4];
            for (i, active) in config.loss.active().iter().enumerate() {
                if !active {
                    continue;
                }
                let mut solo = [0.0; 4];
                solo[i] = 1.0;
                let r = eval_batch(
                    &model, &ops, &prepared, lb, vb, &config.loss, &solo, config.jobs, true,
                )?;
                raw_norms[i] = shared_layer_norm(&model, r.grad.as_ref().unwrap());
            }
            if let Some(init) = initial_losses {
                gradnorm_update(
                    &mut weights,
                    &raw_norms,
                    &prev_epoch_losses,
                    &init,
                    config.gradnorm.lr,
                )?;
            }
        }

        // Mini-batch sweep.
        let n_batches = n_train.div_ceil(config.batch_size).max(1);
        let mut epoch_terms = TermValues::default();
        for b in 0..n_batches {
            let lo = b * config.batch_size;
            let hi = (lo + config.batch_size).min(n_train);
            let labeled = &train_order[lo..hi];
            let virtual_batch = virtual_slice(&virtual_order, b, config.batch_size);
            let result = eval_batch(
                &model,
                &ops,
                &prepared,
                labeled,
                virtual_batch,
                &config.loss,
                &weights.omega,
                config.jobs,
                true,
            )?;
            if !result.terms.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss diverged at epoch {epoch}, batch {b}: {:?}",
                    result.terms.as_array()
                )));
            }
            if initial_losses.is_none() {
                initial_losses = Some(result.terms.as_array());
            }
            adam.step(&mut model.params, result.grad.as_ref().unwrap(), lr);
            let t = result.terms;
            epoch_terms.data += t.data / n_batches as f64;
            epoch_terms.eq += t.eq / n_batches as f64;
            epoch_terms.dde += t.dde / n_batches as f64;
            epoch_terms.veq += t.veq / n_batches as f64;
        }
        prev_epoch_losses = epoch_terms.as_array();

        let rlse = if prepared.test.is_empty() {
            RlseReport::default()
        } else {
            evaluate_rlse(&model, &ops, &prepared, &prepared.test, config.jobs)?
        };
        report.rows.push(EpochRow {
            epoch,
            lr,
            loss_data: epoch_terms.data,
            loss_eq: epoch_terms.eq,
            loss_dde: epoch_terms.dde,
            loss_veq: epoch_terms.veq,
            objective: epoch_terms.weighted_sum(&weights.omega, &config.loss),
            omega: weights.omega,
            test_rlse_solutions: rlse.pooled.solutions,
            test_rlse_deriv1: rlse.pooled.deriv1,
            test_rlse_deriv2: rlse.pooled.deriv2,
        });
    }
    Ok((model, report))
}

fn first_batches<'a>(
    train_order: &'a [usize],
    virtual_order: &'a [usize],
    batch: usize,
) -> (&'a [usize], &'a [usize]) {
    let lb = &train_order[..batch.min(train_order.len())];
    let vb = &virtual_order[..batch.min(virtual_order.len())];
    (lb, vb)
}

fn virtual_slice(order: &[usize], batch_index: usize, batch: usize) -> &[usize] {
    if order.is_empty() {
        return &[];
    }
    let n = order.len();
    let lo = (batch_index * batch) % n;
    let hi = (lo + batch).min(n);
    &order[lo..hi]
}

/// Forward a prepared pair through a trained model (inference helper).
pub fn predict(
    model: &OperatorModel,
    ops: &SpectralOps,
    input: &[f64],
) -> Result<Vec<f64>> {
    let mut scratch = ops.scratch();
    Ok(model.forward(ops, &mut scratch, input)?.output)
}

/// Export a training report as CSV.
pub fn report_to_csv(report: &TrainReport, path: &std::path::Path) -> Result<()> {
    let header = [
        "epoch",
        "lr",
        "loss_data",
        "loss_eq",
        "loss_dde",
        "loss_veq",
        "objective",
        "omega_data",
        "omega_eq",
        "omega_dde",
        "omega_veq",
        "rlse_solutions",
        "rlse_deriv1",
        "rlse_deriv2",
    ];
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                crate::io::fmt_g(r.lr),
                crate::io::fmt_g(r.loss_data),
                crate::io::fmt_g(r.loss_eq),
                crate::io::fmt_g(r.loss_dde),
                crate::io::fmt_g(r.loss_veq),
                crate::io::fmt_g(r.objective),
                crate::io::fmt_g(r.omega[0]),
                crate::io::fmt_g(r.omega[1]),
                crate::io::fmt_g(r.omega[2]),
                crate::io::fmt_g(r.omega[3]),
                crate::io::fmt_g(r.test_rlse_solutions),
                crate::io::fmt_g(r.test_rlse_deriv1),
                crate::io::fmt_g(r.test_rlse_deriv2),
            ]
        })
        .collect();
    crate::io::write_csv(path, &header, &rows)
}
