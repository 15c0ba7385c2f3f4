//! Monte Carlo propagation through the oracle integrator or a trained
//! surrogate, histogram/KDE density estimation, and damage probabilities.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::pdem::{PdfGrid, XGrid};
use crate::error::{Error, Result};
use crate::oracle::{finite_difference, integrate_newmark};
use crate::parallel;
use crate::pino::{Checkpoint, SpectralOps};
use crate::rng::derive_seed;
use crate::system::{
    build_system, sample_parameters, ParamMap, ParameterSample, ParameterSpace, SystemConfig,
    TimeGrid,
};

/// Which scalar response is monitored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuantitySelector {
    /// A raw DOF by index.
    Dof { index: usize },
    /// The recovered field of a flexible body at coordinate `x` (analytic
    /// beam bodies only).
    FlexPoint { body: String, x: f64 },
}

/// Weight vector `w` such that the monitored quantity is `w . u(t)`.
pub fn selector_weights(
    config: &SystemConfig,
    params: &ParamMap,
    selector: &QuantitySelector,
) -> Result<Vec<f64>> {
    let n_dof = config.n_dof();
    let mut w = vec![0.0; n_dof];
    match selector {
        QuantitySelector::Dof { index } => {
            if *index >= n_dof {
                return Err(Error::invalid(format!("DOF index {index} out of range")));
            }
            w[*index] = 1.0;
        }
        QuantitySelector::FlexPoint { body, x } => {
            let b = config
                .flexible
                .iter()
                .position(|f| f.label() == body)
                .ok_or_else(|| Error::invalid(format!("unknown flexible body '{body}'")))?;
            let offset =
                config.rigid_dofs() + config.flexible[..b].iter().map(|f| f.n_modes()).sum::<usize>();
            match &config.flexible[b] {
                crate::system::FlexBodyConfig::EulerBeam {
                    mass_per_length,
                    length,
                    n_modes,
                    ..
                } => {
                    let m_r = mass_per_length.resolve(params)?;
                    let table = crate::modal::euler_beam_modes(m_r, *length, *n_modes, &[*x])?;
                    for k in 0..*n_modes {
                        w[offset + k] = table.values[[0, k]];
                    }
                }
                crate::system::FlexBodyConfig::Modal { .. } => {
                    return Err(Error::invalid(
                        "field recovery at arbitrary points needs an analytic body; \
                         use a mode-shape table for discrete bodies",
                    ));
                }
            }
        }
    }
    Ok(w)
}

/// Value and velocity records of the monitored quantity for one case.
#[derive(Debug, Clone)]
pub struct QuantityTraj {
    pub value: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// Run one case through the Newmark integrator.
pub fn oracle_case(
    config: &SystemConfig,
    space: &ParameterSpace,
    grid: &TimeGrid,
    sample: &ParameterSample,
    selector: &QuantitySelector,
) -> Result<QuantityTraj> {
    let params = sample.param_map(space);
    let system = build_system(config, &params)?;
    let traj = integrate_newmark(&system, &sample.f, grid, None, None)?;
    let w = selector_weights(config, &params, selector)?;
    let n_t = traj.n_t();
    let mut value = vec![0.0; n_t];
    let mut velocity = vec![0.0; n_t];
    for t in 0..n_t {
        for (j, wj) in w.iter().enumerate() {
            if *wj != 0.0 {
                value[t] += wj * traj.u[[t, j]];
                velocity[t] += wj * traj.du[[t, j]];
            }
        }
    }
    Ok(QuantityTraj { value, velocity })
}

/// Run one case through a trained surrogate: encode, forward, denormalize,
/// difference.
pub fn surrogate_case(
    ckpt: &Checkpoint,
    ops: &SpectralOps,
    scratch: &mut crate::pino::SpectralScratch,
    config: &SystemConfig,
    space: &ParameterSpace,
    grid: &TimeGrid,
    sample: &ParameterSample,
    selector: &QuantitySelector,
) -> Result<QuantityTraj> {
    let arch = &ckpt.model.arch;
    let n_t = grid.n_t();
    let n_p = space.n_params();
    let n_ch = space.excitation.channels;
    let c_in = n_p + n_ch + 1;
    if arch.in_channels != c_in || arch.n_t != n_t {
        return Err(Error::invalid(
            "checkpoint architecture does not match the sampling grid",
        ));
    }
    let stats = &ckpt.stats;
    let mut input = vec![0.0; n_t * c_in];
    for t in 0..n_t {
        let row = &mut input[t * c_in..(t + 1) * c_in];
        for i in 0..n_p {
            row[i] = (sample.p[i] - stats.p.mean[i]) / stats.p.std[i];
        }
        for c in 0..n_ch {
            row[n_p + c] = (sample.f[[t, c]] - stats.f.mean[c]) / stats.f.std[c];
        }
        row[n_p + n_ch] = t as f64 / (n_t - 1) as f64;
    }
    let cache = ckpt.model.forward(ops, scratch, &input)?;
    let d = arch.out_channels;
    let mut u_phys = Array2::<f64>::zeros((n_t, d));
    for t in 0..n_t {
        for j in 0..d {
            u_phys[[t, j]] = cache.output[t * d + j] * stats.u.std[j] + stats.u.mean[j];
        }
    }
    let (du, _) = finite_difference(&u_phys, grid.dt)?;
    let params = sample.param_map(space);
    let w = selector_weights(config, &params, selector)?;
    let mut value = vec![0.0; n_t];
    let mut velocity = vec![0.0; n_t];
    for t in 0..n_t {
        for (j, wj) in w.iter().enumerate() {
            if *wj != 0.0 {
                value[t] += wj * u_phys[[t, j]];
                velocity[t] += wj * du[[t, j]];
            }
        }
    }
    Ok(QuantityTraj { value, velocity })
}

/// How cases are produced for Monte Carlo propagation.
pub enum Propagator<'a> {
    /// Deterministic time integration (ground truth).
    Oracle,
    /// Batched forward passes through a trained model.
    Surrogate(&'a Checkpoint),
}

/// Response ensemble: one monitored-quantity record per sample.
#[derive(Debug, Clone)]
pub struct Ensemble {
    /// `n_samples x n_t` quantity values.
    pub values: Array2<f64>,
    pub dt: f64,
}

/// Propagate `n` independent samples; deterministic in `seed`.
#[allow(clippy::too_many_arguments)]
pub fn mc_propagate(
    config: &SystemConfig,
    space: &ParameterSpace,
    grid: &TimeGrid,
    selector: &QuantitySelector,
    n: usize,
    seed: u64,
    propagator: &Propagator,
    jobs: usize,
) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::invalid("ensemble size must be positive"));
    }
    let ops = match propagator {
        Propagator::Surrogate(ckpt) => Some(SpectralOps::new(ckpt.model.arch.n_t)),
        Propagator::Oracle => None,
    };
    let rows = parallel::par_map_indexed(jobs, n, |i| -> Result<Vec<f64>> {
        let sample = sample_parameters(space, grid, derive_seed(seed, 30, i as u64))?;
        let traj = match propagator {
            Propagator::Oracle => oracle_case(config, space, grid, &sample, selector)?,
            Propagator::Surrogate(ckpt) => {
                let ops = ops.as_ref().unwrap();
                let mut scratch = ops.scratch();
                surrogate_case(ckpt, ops, &mut scratch, config, space, grid, &sample, selector)?
            }
        };
        Ok(traj.value)
    });
    let n_t = grid.n_t();
    let mut values = Array2::<f64>::zeros((n, n_t));
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (t, v) in row.into_iter().enumerate() {
            values[[i, t]] = v;
        }
    }
    Ok(Ensemble { values, dt: grid.dt })
}

/// Histogram density per time slice, optionally Gaussian-kernel smoothed
/// with the Silverman bandwidth.
pub fn pdf_estimate(ensemble: &Ensemble, grid: &XGrid, smooth: bool) -> Result<PdfGrid> {
    grid.validate()?;
    let (n, n_t) = (ensemble.values.nrows(), ensemble.values.ncols());
    if n == 0 {
        return Err(Error::invalid("empty ensemble"));
    }
    let dx = grid.dx();
    let mut p = Array2::<f64>::zeros((n_t, grid.n_x));
    for t in 0..n_t {
        let col = ensemble.values.column(t);
        if smooth {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let mut sorted: Vec<f64> = col.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let iqr = sorted[(0.75 * (n - 1) as f64) as usize]
                - sorted[(0.25 * (n - 1) as f64) as usize];
            let sigma = var.sqrt().min(if iqr > 0.0 { iqr / 1.34 } else { f64::MAX });
            let h = (0.9 * sigma * (n as f64).powf(-0.2)).max(1e-3 * dx);
            for i in 0..grid.n_x {
                let x = grid.center(i);
                let mut acc = 0.0;
                for v in col.iter() {
                    let z = (x - v) / h;
                    acc += (-0.5 * z * z).exp();
                }
                p[[t, i]] = acc / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
            }
            // Renormalize the truncated kernel mass on the grid.
            let mass: f64 = p.row(t).sum() * dx;
            if mass > 0.0 {
                for i in 0..grid.n_x {
                    p[[t, i]] /= mass;
                }
            }
        } else {
            for v in col.iter() {
                let idx = ((v - grid.x_min) / dx).floor();
                if idx >= 0.0 && (idx as usize) < grid.n_x {
                    p[[t, idx as usize]] += 1.0;
                }
            }
            for i in 0..grid.n_x {
                p[[t, i]] /= n as f64 * dx;
            }
        }
    }
    Ok(PdfGrid {
        grid: *grid,
        t_grid: (0..n_t).map(|t| t as f64 * ensemble.dt).collect(),
        p,
        renormalized_slices: 0,
    })
}

/// Damage probability for one monitored channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DamageField {
    pub threshold: f64,
    /// Probability that the quantity exceeds the threshold anywhere in the
    /// record.
    pub dp: f64,
    /// Time-sliced exceedance probabilities `dp*(t)`.
    pub dp_star: Vec<f64>,
}

/// Fraction of trajectories whose maximum (absolute value if `use_abs`)
/// exceeds the threshold, plus the per-time-slice variant.
pub fn damage_probability(ensemble: &Ensemble, threshold: f64, use_abs: bool) -> Result<DamageField> {
    let (n, n_t) = (ensemble.values.nrows(), ensemble.values.ncols());
    if n == 0 {
        return Err(Error::invalid("empty ensemble"));
    }
    if !threshold.is_finite() {
        return Err(Error::invalid("threshold must be finite"));
    }
    let val = |x: f64| if use_abs { x.abs() } else { x };
    let mut exceed = 0usize;
    let mut dp_star = vec![0.0; n_t];
    for i in 0..n {
        let row = ensemble.values.row(i);
        let mut any = false;
        for (t, v) in row.iter().enumerate() {
            if val(*v) > threshold {
                dp_star[t] += 1.0;
                any = true;
            }
        }
        if any {
            exceed += 1;
        }
    }
    for v in dp_star.iter_mut() {
        *v /= n as f64;
    }
    Ok(DamageField {
        threshold,
        dp: exceed as f64 / n as f64,
        dp_star,
    })
}

/// Comparison metrics between two density grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdfComparison {
    pub per_slice_l1: Vec<f64>,
    pub max_l1: f64,
    /// (time, dp*_a, dp*_b) at the requested times.
    pub dp_star: Vec<(f64, f64, f64)>,
}

/// Per-slice L1 distances and exceedance probabilities at chosen times.
pub fn compare_pdf(
    a: &PdfGrid,
    b: &PdfGrid,
    threshold: f64,
    times: &[f64],
) -> Result<PdfComparison> {
    if a.grid != b.grid || a.t_grid.len() != b.t_grid.len() {
        return Err(Error::invalid("PDF grids differ in shape"));
    }
    let mut per_slice = Vec::with_capacity(a.t_grid.len());
    let mut max_l1 = 0.0f64;
    for s in 0..a.t_grid.len() {
        let l1 = a.l1_slice(b, s)?;
        max_l1 = max_l1.max(l1);
        per_slice.push(l1);
    }
    let mut dp_star = Vec::with_capacity(times.len());
    for &t in times {
        let s = a
            .t_grid
            .iter()
            .position(|tt| (tt - t).abs() < 1e-9)
            .ok_or_else(|| Error::invalid(format!("time {t} not on the PDF grid")))?;
        dp_star.push((t, a.exceedance(s, threshold), b.exceedance(s, threshold)));
    }
    Ok(PdfComparison {
        per_slice_l1: per_slice,
        max_l1,
        dp_star,
    })
}
