//! Per-pair data prepared for training: encoded inputs, normalized truths,
//! instantiated systems and equation weights.
//!
//! Input encoding: physical parameters broadcast along the time axis,
//! excitation channels, and a time coordinate scaled to [0, 1], everything
//! standardized with the dataset statistics.

use ndarray::Array2;

use super::arch::ArchConfig;
use crate::en::ENWeights;
use crate::error::{Error, Result};
use crate::oracle::{Dataset, NormStats, Pair};
use crate::system::{build_system, SecondOrderSystem};

/// One pair ready for the loss pipeline.
pub struct PreparedPair {
    /// `n_t x in_channels`, normalized, time channel appended.
    pub input: Vec<f64>,
    /// Normalized solution truth (labeled pairs).
    pub truth_u_n: Option<Vec<f64>>,
    /// Normalized derivative truths (labeled pairs).
    pub truth_du_n: Option<Vec<f64>>,
    pub truth_ddu_n: Option<Vec<f64>>,
    /// System assembled from this pair's physical parameters.
    pub system: SecondOrderSystem,
    /// Physical excitation series for the residual.
    pub f_phys: Array2<f64>,
    /// Equation weights: EN row, median fallback, or ones.
    pub lambda: Vec<f64>,
}

/// Dataset views prepared for training and evaluation.
pub struct Prepared {
    pub train: Vec<PreparedPair>,
    pub test: Vec<PreparedPair>,
    pub virtuals: Vec<PreparedPair>,
    pub stats: NormStats,
    pub dt: f64,
    pub n_t: usize,
    pub n_dof: usize,
    /// Time indices inside the derivative-loss window.
    pub dde_indices: Vec<usize>,
}

/// Architecture dimensions implied by a dataset.
pub fn io_dims(dataset: &Dataset) -> (usize, usize) {
    (
        dataset.n_params() + dataset.n_channels() + 1,
        dataset.n_dof(),
    )
}

fn encode_input(dataset: &Dataset, stats: &NormStats, pair: &Pair) -> Vec<f64> {
    let n_t = dataset.n_t();
    let n_p = dataset.n_params();
    let n_ch = dataset.n_channels();
    let c_in = n_p + n_ch + 1;
    let mut input = vec![0.0; n_t * c_in];
    for t in 0..n_t {
        let row = &mut input[t * c_in..(t + 1) * c_in];
        for i in 0..n_p {
            row[i] = (pair.sample.p[i] - stats.p.mean[i]) / stats.p.std[i];
        }
        for c in 0..n_ch {
            row[n_p + c] = (pair.sample.f[[t, c]] - stats.f.mean[c]) / stats.f.std[c];
        }
        row[n_p + n_ch] = t as f64 / (n_t - 1) as f64;
    }
    input
}

fn normalize_flat(arr: &Array2<f64>, mean: &[f64], std: &[f64]) -> Vec<f64> {
    let (n_t, n_d) = (arr.nrows(), arr.ncols());
    let mut out = vec![0.0; n_t * n_d];
    for t in 0..n_t {
        for j in 0..n_d {
            out[t * n_d + j] = (arr[[t, j]] - mean[j]) / std[j];
        }
    }
    out
}

fn prepare_pair(
    dataset: &Dataset,
    stats: &NormStats,
    pair: &Pair,
    lambda: Vec<f64>,
) -> Result<PreparedPair> {
    let params = pair.sample.param_map(&dataset.space);
    let system = build_system(&dataset.config, &params)?;
    let (truth_u_n, truth_du_n, truth_ddu_n) = match &pair.trajectory {
        Some(t) => (
            Some(normalize_flat(&t.u, &stats.u.mean, &stats.u.std)),
            Some(normalize_flat(&t.du, &stats.du.mean, &stats.du.std)),
            Some(normalize_flat(&t.ddu, &stats.ddu.mean, &stats.ddu.std)),
        ),
        None => (None, None, None),
    };
    Ok(PreparedPair {
        input: encode_input(dataset, stats, pair),
        truth_u_n,
        truth_du_n,
        truth_ddu_n,
        system,
        f_phys: pair.sample.f.clone(),
        lambda,
    })
}

/// Prepare every split. `en` supplies per-pair weights for the training
/// split and the per-ODE median for virtual pairs; without it all weights
/// are one.
pub fn prepare(
    dataset: &Dataset,
    en: Option<&ENWeights>,
    arch: &ArchConfig,
    dde_window: Option<f64>,
) -> Result<Prepared> {
    let stats = dataset.norm()?.clone();
    let (c_in, n_out) = io_dims(dataset);
    if arch.in_channels != c_in || arch.out_channels != n_out || arch.n_t != dataset.n_t() {
        return Err(Error::invalid(format!(
            "architecture dims ({}, {}, {}) do not match dataset ({}, {}, {})",
            arch.in_channels,
            arch.out_channels,
            arch.n_t,
            c_in,
            n_out,
            dataset.n_t()
        )));
    }
    if let Some(w) = en {
        if w.lambda.nrows() != dataset.train.len() || w.lambda.ncols() != dataset.n_dof() {
            return Err(Error::invalid(
                "equation weights shape does not match the training split",
            ));
        }
        if w.dataset_hash != dataset.content_hash() {
            return Err(Error::invalid(
                "equation weights were computed from a different dataset",
            ));
        }
    }
    let n_dof = dataset.n_dof();
    let ones = vec![1.0; n_dof];
    let median = en.map(|w| w.median_lambda());

    let mut train = Vec::with_capacity(dataset.train.len());
    for (i, pair) in dataset.train.iter().enumerate() {
        let lambda = match en {
            Some(w) => w.lambda.row(i).to_vec(),
            None => ones.clone(),
        };
        train.push(prepare_pair(dataset, &stats, pair, lambda)?);
    }
    let mut test = Vec::with_capacity(dataset.test.len());
    for pair in &dataset.test {
        test.push(prepare_pair(dataset, &stats, pair, ones.clone())?);
    }
    let mut virtuals = Vec::with_capacity(dataset.virtuals.len());
    for pair in &dataset.virtuals {
        let lambda = median.clone().unwrap_or_else(|| ones.clone());
        virtuals.push(prepare_pair(dataset, &stats, pair, lambda)?);
    }

    let dde_indices = window_indices(dataset.n_t(), dataset.grid.dt, dataset.grid.t_total, dde_window)?;

    Ok(Prepared {
        train,
        test,
        virtuals,
        stats,
        dt: dataset.grid.dt,
        n_t: dataset.n_t(),
        n_dof,
        dde_indices,
    })
}

/// Indices inside `[0, window] U [T - window, T]`, or the full grid when
/// `window` is `None`.
pub fn window_indices(
    n_t: usize,
    dt: f64,
    t_total: f64,
    window: Option<f64>,
) -> Result<Vec<usize>> {
    match window {
        None => Ok((0..n_t).collect()),
        Some(w) => {
            if w <= 0.0 || w > t_total / 2.0 {
                return Err(Error::invalid(format!(
                    "derivative-loss window {w} must lie in (0, T/2]"
                )));
            }
            let idx: Vec<usize> = (0..n_t)
                .filter(|&i| {
                    let t = i as f64 * dt;
                    t <= w + 1e-12 || t >= t_total - w - 1e-12
                })
                .collect();
            if idx.is_empty() {
                return Err(Error::invalid("derivative-loss window contains no samples"));
            }
            Ok(idx)
        }
    }
}
