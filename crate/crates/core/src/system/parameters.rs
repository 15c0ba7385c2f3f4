//! Parameter spaces and per-sample draws.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::excitation::{generate_excitation, ExcitationSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

/// Marginal distribution of one physical parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Fixed { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        if let Distribution::Uniform { lo, hi } = self {
            if !(lo < hi) {
                return Err(Error::invalid(format!(
                    "uniform distribution requires lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Distribution::Fixed { value } => *value,
            Distribution::Uniform { lo, hi } => rng.uniform_in(*lo, *hi),
        }
    }

    /// Inverse CDF at probability `u` in [0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Distribution::Fixed { value } => *value,
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Distribution::Fixed { .. })
    }
}

/// Uniform time grid: `n_t = round(T/dt) + 1` samples including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    /// Step, seconds.
    pub dt: f64,
    /// Total duration, seconds.
    pub t_total: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, t_total: f64) -> Result<Self> {
        if dt <= 0.0 || t_total <= 0.0 {
            return Err(Error::invalid("time grid requires dt > 0 and t_total > 0"));
        }
        Ok(TimeGrid { dt, t_total })
    }

    pub fn n_t(&self) -> usize {
        (self.t_total / self.dt).round() as usize + 1
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t()).map(|i| i as f64 * self.dt).collect()
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.dt
    }
}

/// Named physical parameter distributions plus the excitation model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpace {
    /// (name, distribution) in declaration order; the order fixes the layout
    /// of every sampled `p` vector.
    pub params: Vec<(String, Distribution)>,
    pub excitation: ExcitationSpec,
}

impl ParameterSpace {
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        for (name, dist) in &self.params {
            dist.validate()
                .map_err(|e| Error::invalid(format!("parameter '{name}': {e}")))?;
        }
        self.excitation.validate(grid)?;
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Names of parameters with non-degenerate distributions, the random
    /// dimensions seen by representative-point selection.
    pub fn free_params(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|(_, d)| !d.is_fixed())
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Resolved parameter values by name.
pub type ParamMap = std::collections::HashMap<String, f64>;

/// One draw from a parameter space: physical parameters plus excitation
/// series on the time grid.
#[derive(Debug, Clone)]
pub struct ParameterSample {
    /// Physical parameter vector in the space's declaration order.
    pub p: Array1<f64>,
    /// `n_t x n_channels` excitation time series.
    pub f: Array2<f64>,
}

impl ParameterSample {
    pub fn param_map(&self, space: &ParameterSpace) -> ParamMap {
        space
            .params
            .iter()
            .zip(self.p.iter())
            .map(|((name, _), v)| (name.clone(), *v))
            .collect()
    }
}

/// Draw a sample deterministically from `seed`.
///
/// Physical parameters use one stream; the excitation gets a derived seed so
/// that adding parameters does not perturb the excitation stream.
pub fn sample_parameters(
    space: &ParameterSpace,
    grid: &TimeGrid,
    seed: u64,
) -> Result<ParameterSample> {
    space.validate(grid)?;
    let mut rng = Rng::new(derive_seed(seed, 0, 0));
    let p: Array1<f64> = space.params.iter().map(|(_, d)| d.sample(&mut rng)).collect();
    let f = generate_excitation(&space.excitation, grid, derive_seed(seed, 1, 0))?;
    Ok(ParameterSample { p, f })
}
