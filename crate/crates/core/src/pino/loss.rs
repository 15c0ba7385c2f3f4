//! The four-term physics-informed objective and its gradients.
//!
//! * `data`: mean squared error of normalized solutions.
//! * `eq`: equation residual of the denormalized, finite-differenced output,
//!   weighted per ODE by the equation-normalization row.
//! * `dde`: mean squared error of the combined first+second derivatives on a
//!   (possibly windowed) part of the grid, compared on normalized scale.
//! * `veq`: the `eq` formula on virtual pairs that carry no ground truth.
//!
//! Gradients flow through the finite-difference operator and the
//! denormalization exactly; every path below is covered by finite-difference
//! checks in the tests.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::OperatorModel;
use super::prepare::{Prepared, PreparedPair};
use super::spectral::{SpectralOps, SpectralScratch};
use crate::error::{Error, Result};
use crate::linalg;
use crate::oracle::{finite_difference, finite_difference_adjoint};
use crate::parallel;

/// Which loss terms are active, plus the derivative-loss window in seconds
/// (`None` = full domain).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossFlags {
    pub data: bool,
    pub eq: bool,
    pub dde: bool,
    pub veq: bool,
    #[serde(default)]
    pub dde_window: Option<f64>,
}

impl LossFlags {
    pub fn active(&self) -> [bool; 4] {
        [self.data, self.eq, self.dde, self.veq]
    }

    pub fn n_active(&self) -> usize {
        self.active().iter().filter(|a| **a).count()
    }

    /// Physics-informed data-only baseline (black box).
    pub fn data_only() -> Self {
        LossFlags {
            data: true,
            eq: false,
            dde: false,
            veq: false,
            dde_window: None,
        }
    }
}

/// Values of the four terms, averaged over their batches.
#[derive(Debug, Clone, Copy, Default)]
pub struct TermValues {
    pub data: f64,
    pub eq: f64,
    pub dde: f64,
    pub veq: f64,
}

impl TermValues {
    pub fn as_array(&self) -> [f64; 4] {
        [self.data, self.eq, self.dde, self.veq]
    }

    /// Composed objective for weights `omega`.
    pub fn weighted_sum(&self, omega: &[f64; 4], flags: &LossFlags) -> f64 {
        let t = self.as_array();
        let a = flags.active();
        (0..4).map(|i| if a[i] { omega[i] * t[i] } else { 0.0 }).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Result of a batch evaluation.
pub struct BatchResult {
    pub terms: TermValues,
    pub grad: Option<Vec<f64>>,
}

/// Per-sample term values.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleTerms {
    pub data: f64,
    pub eq: f64,
    pub dde: f64,
    pub veq: f64,
}

/// Loss terms for one prediction, plus (optionally) the gradient with
/// respect to the prediction, each term scaled by `scales`.
///
/// `pred` is the normalized model output, `n_t x n_dof`. This is the whole
/// differentiable pipeline downstream of the network: denormalization,
/// finite differencing, the equation residual and the normalized derivative
/// comparison.
#[allow(clippy::too_many_arguments)]
pub fn prediction_losses(
    pred: &[f64],
    pair: &PreparedPair,
    p: &Prepared,
    flags: &LossFlags,
    scales: &[f64; 4],
    is_virtual: bool,
    want_grad: bool,
) -> Result<(SampleTerms, Option<Vec<f64>>)> {
    let n = p.n_t;
    let d = p.n_dof;
    if pred.len() != n * d {
        return Err(Error::Dimension {
            context: "prediction_losses",
            expected: n * d,
            got: pred.len(),
        });
    }
    let mut g_pred = if want_grad { vec![0.0; n * d] } else { Vec::new() };
    let mut out = SampleTerms::default();

    // Data term on normalized scale.
    if flags.data && !is_virtual {
        let truth = pair
            .truth_u_n
            .as_ref()
            .ok_or_else(|| Error::MissingData("data loss needs ground truth".into()))?;
        let inv = 1.0 / (n * d) as f64;
        let mut acc = 0.0;
        for i in 0..n * d {
            let diff = pred[i] - truth[i];
            acc += diff * diff;
            if want_grad {
                g_pred[i] += scales[0] * 2.0 * diff * inv;
            }
        }
        out.data = acc * inv;
    }

    let needs_physics = (flags.eq && !is_virtual) || (flags.veq && is_virtual) || (flags.dde && !is_virtual);
    if needs_physics {
        // Denormalize and differentiate.
        let stats = &p.stats;
        let mut u_phys = Array2::<f64>::zeros((n, d));
        for t in 0..n {
            for j in 0..d {
                u_phys[[t, j]] = pred[t * d + j] * stats.u.std[j] + stats.u.mean[j];
            }
        }
        let (du_p, ddu_p) = finite_difference(&u_phys, p.dt)?;

        // Direct (non-derivative) gradient path and the derivative-path
        // accumulators fed to one adjoint call at the end.
        let mut g_u_direct = if want_grad {
            Array2::<f64>::zeros((n, d))
        } else {
            Array2::zeros((0, 0))
        };
        let mut g_du = g_u_direct.clone();
        let mut g_ddu = g_u_direct.clone();

        let eq_active = (flags.eq && !is_virtual) || (flags.veq && is_virtual);
        if eq_active {
            let sys = &pair.system;
            let res =
                crate::system::residual_with_forces(sys, &pair.f_phys, &u_phys, &du_p, &ddu_p)?;
            let lambda = &pair.lambda;
            let mut acc = 0.0;
            for t in 0..n {
                for j in 0..d {
                    let v = lambda[j] * res.values[[t, j]];
                    acc += v * v;
                }
            }
            let value = acc / n as f64;
            let scale = if is_virtual { scales[3] } else { scales[1] };
            if is_virtual {
                out.veq = value;
            } else {
                out.eq = value;
            }
            if want_grad && scale != 0.0 {
                let mut g_res = vec![0.0; d];
                let mut tmp = vec![0.0; d];
                for t in 0..n {
                    for (j, g) in g_res.iter_mut().enumerate() {
                        *g = scale * 2.0 * lambda[j] * lambda[j] * res.values[[t, j]]
                            / n as f64;
                    }
                    // Symmetric matrices: adjoint of K u is K g, etc.
                    linalg::matvec(&sys.k, &g_res, &mut tmp);
                    for j in 0..d {
                        g_u_direct[[t, j]] += tmp[j];
                    }
                    linalg::matvec(&sys.c, &g_res, &mut tmp);
                    for j in 0..d {
                        g_du[[t, j]] += tmp[j];
                    }
                    linalg::matvec(&sys.m, &g_res, &mut tmp);
                    for j in 0..d {
                        g_ddu[[t, j]] += tmp[j];
                    }
                }
            }
        }

        if flags.dde && !is_virtual {
            let (t_du, t_ddu) = (
                pair.truth_du_n
                    .as_ref()
                    .ok_or_else(|| Error::MissingData("derivative loss needs ground truth".into()))?,
                pair.truth_ddu_n.as_ref().unwrap(),
            );
            let idx = &p.dde_indices;
            let inv = 1.0 / (idx.len() * d) as f64;
            let mut acc = 0.0;
            for &t in idx {
                for j in 0..d {
                    let du_n = (du_p[[t, j]] - p.stats.du.mean[j]) / p.stats.du.std[j];
                    let ddu_n = (ddu_p[[t, j]] - p.stats.ddu.mean[j]) / p.stats.ddu.std[j];
                    let e = (du_n - t_du[t * d + j]) + (ddu_n - t_ddu[t * d + j]);
                    acc += e * e;
                    if want_grad && scales[2] != 0.0 {
                        let g_e = scales[2] * 2.0 * e * inv;
                        g_du[[t, j]] += g_e / p.stats.du.std[j];
                        g_ddu[[t, j]] += g_e / p.stats.ddu.std[j];
                    }
                }
            }
            out.dde = acc * inv;
        }

        if want_grad {
            let g_from_derivs = finite_difference_adjoint(&g_du, &g_ddu, p.dt)?;
            for t in 0..n {
                for j in 0..d {
                    g_pred[t * d + j] +=
                        (g_u_direct[[t, j]] + g_from_derivs[[t, j]]) * p.stats.u.std[j];
                }
            }
        }
    }

    Ok((out, if want_grad { Some(g_pred) } else { None }))
}

/// Forward one sample, compute its losses, and (optionally) backpropagate
/// into the flat parameter gradient.
#[allow(clippy::too_many_arguments)]
fn eval_sample(
    model: &OperatorModel,
    ops: &SpectralOps,
    scratch: &mut SpectralScratch,
    pair: &PreparedPair,
    p: &Prepared,
    flags: &LossFlags,
    scales: &[f64; 4],
    is_virtual: bool,
    grad: Option<&mut [f64]>,
) -> Result<SampleTerms> {
    let cache = model.forward(ops, scratch, &pair.input)?;
    let (terms, g_pred) =
        prediction_losses(&cache.output, pair, p, flags, scales, is_virtual, grad.is_some())?;
    if let Some(grad) = grad {
        model.backward(ops, scratch, &cache, &g_pred.unwrap(), grad);
    }
    Ok(terms)
}

enum WorkItem {
    Labeled(usize),
    Virtual(usize),
}

/// Evaluate the composed objective over a labeled batch and a virtual batch.
///
/// Term values are averaged over their own batch; gradients are scaled by
/// `omega_i / batch_size_i`. Work is chunked deterministically, and partial
/// results fold in chunk order, so the result is bit-stable for any worker
/// count.
#[allow(clippy::too_many_arguments)]
pub fn eval_batch(
    model: &OperatorModel,
    ops: &SpectralOps,
    prepared: &Prepared,
    labeled_idx: &[usize],
    virtual_idx: &[usize],
    flags: &LossFlags,
    omega: &[f64; 4],
    jobs: usize,
    want_grad: bool,
) -> Result<BatchResult> {
    let n_labeled = labeled_idx.len();
    let n_virtual = if flags.veq { virtual_idx.len() } else { 0 };
    if flags.veq && virtual_idx.is_empty() {
        return Err(Error::MissingData(
            "virtual equation loss requires a virtual split".into(),
        ));
    }
    let mut work = Vec::with_capacity(n_labeled + n_virtual);
    work.extend(labeled_idx.iter().map(|&i| WorkItem::Labeled(i)));
    if flags.veq {
        work.extend(virtual_idx.iter().map(|&i| WorkItem::Virtual(i)));
    }
    let scales = [
        if flags.data && n_labeled > 0 {
            omega[0] / n_labeled as f64
        } else {
            0.0
        },
        if flags.eq && n_labeled > 0 {
            omega[1] / n_labeled as f64
        } else {
            0.0
        },
        if flags.dde && n_labeled > 0 {
            omega[2] / n_labeled as f64
        } else {
            0.0
        },
        if flags.veq && n_virtual > 0 {
            omega[3] / n_virtual as f64
        } else {
            0.0
        },
    ];

    type Partial = (TermValues, Option<Vec<f64>>, Option<Error>);
    let init: Partial = (TermValues::default(), None, None);
    let (terms, grad, err) = parallel::par_chunk_fold(
        jobs,
        work.len(),
        |range| -> Partial {
            let mut scratch = ops.scratch();
            let mut terms = TermValues::default();
            let mut grad = if want_grad {
                Some(vec![0.0; model.n_params()])
            } else {
                None
            };
            for k in range {
                let (pair, is_virtual) = match work[k] {
                    WorkItem::Labeled(i) => (&prepared.train[i], false),
                    WorkItem::Virtual(i) => (&prepared.virtuals[i], true),
                };
                let r = eval_sample(
                    model,
                    ops,
                    &mut scratch,
                    pair,
                    prepared,
                    flags,
                    &scales,
                    is_virtual,
                    grad.as_deref_mut(),
                );
                match r {
                    Ok(s) => {
                        terms.data += s.data;
                        terms.eq += s.eq;
                        terms.dde += s.dde;
                        terms.veq += s.veq;
                    }
                    Err(e) => return (terms, grad, Some(e)),
                }
            }
            (terms, grad, None)
        },
        |mut acc: Partial, part: Partial| {
            acc.0.data += part.0.data;
            acc.0.eq += part.0.eq;
            acc.0.dde += part.0.dde;
            acc.0.veq += part.0.veq;
            match (&mut acc.1, part.1) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter_mut().zip(b.iter()) {
                        *x += y;
                    }
                }
                (None, Some(b)) => acc.1 = Some(b),
                _ => {}
            }
            if acc.2.is_none() {
                acc.2 = part.2;
            }
            acc
        },
        init,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let mut terms = terms;
    if n_labeled > 0 {
        terms.data /= n_labeled as f64;
        terms.eq /= n_labeled as f64;
        terms.dde /= n_labeled as f64;
    }
    if n_virtual > 0 {
        terms.veq /= n_virtual as f64;
    }
    Ok(BatchResult { terms, grad })
}

/// Relative L2 error in percent: `100 ||pred - truth|| / ||truth||`.
pub fn rlse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension {
            context: "rlse",
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, t) in pred.iter().zip(truth.iter()) {
        num += (p - t) * (p - t);
        den += t * t;
    }
    if den == 0.0 {
        return Err(Error::invalid("rlse: zero-norm truth"));
    }
    Ok(100.0 * (num / den).sqrt())
}

/// Relative L2 errors for solutions and both derivatives.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RlseValues {
    pub solutions: f64,
    pub deriv1: f64,
    pub deriv2: f64,
}

impl RlseValues {
    pub fn average(&self) -> f64 {
        (self.solutions + self.deriv1 + self.deriv2) / 3.0
    }
}

/// Pooled-norm and per-DOF-averaged relative errors over a split.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RlseReport {
    pub pooled: RlseValues,
    pub per_dof_mean: RlseValues,
}

/// Evaluate test error: solutions compared on normalized scale, derivatives
/// obtained by differencing the denormalized output and then standardized.
pub fn evaluate_rlse(
    model: &OperatorModel,
    ops: &SpectralOps,
    prepared: &Prepared,
    split: &[PreparedPair],
    jobs: usize,
) -> Result<RlseReport> {
    if split.is_empty() {
        return Err(Error::MissingData("rlse needs a non-empty split".into()));
    }
    let d = prepared.n_dof;
    let n = prepared.n_t;
    type Acc = (Vec<f64>, Option<Error>); // 6*d sums: num/den for 3 quantities
    let (sums, err) = parallel::par_chunk_fold(
        jobs,
        split.len(),
        |range| -> Acc {
            let mut scratch = ops.scratch();
            let mut sums = vec![0.0; 6 * d];
            for i in range {
                let pair = &split[i];
                let cache = match model.forward(ops, &mut scratch, &pair.input) {
                    Ok(c) => c,
                    Err(e) => return (sums, Some(e)),
                };
                let pred = &cache.output;
                let truth_u = pair.truth_u_n.as_ref().expect("labeled split");
                let truth_du = pair.truth_du_n.as_ref().unwrap();
                let truth_ddu = pair.truth_ddu_n.as_ref().unwrap();
                let mut u_phys = Array2::<f64>::zeros((n, d));
                for t in 0..n {
                    for j in 0..d {
                        u_phys[[t, j]] =
                            pred[t * d + j] * prepared.stats.u.std[j] + prepared.stats.u.mean[j];
                    }
                }
                let (du_p, ddu_p) = match finite_difference(&u_phys, prepared.dt) {
                    Ok(v) => v,
                    Err(e) => return (sums, Some(e)),
                };
                for t in 0..n {
                    for j in 0..d {
                        let diff_u = pred[t * d + j] - truth_u[t * d + j];
                        sums[j] += diff_u * diff_u;
                        sums[d + j] += truth_u[t * d + j] * truth_u[t * d + j];
                        let du_n = (du_p[[t, j]] - prepared.stats.du.mean[j])
                            / prepared.stats.du.std[j];
                        let diff_d1 = du_n - truth_du[t * d + j];
                        sums[2 * d + j] += diff_d1 * diff_d1;
                        sums[3 * d + j] += truth_du[t * d + j] * truth_du[t * d + j];
                        let ddu_n = (ddu_p[[t, j]] - prepared.stats.ddu.mean[j])
                            / prepared.stats.ddu.std[j];
                        let diff_d2 = ddu_n - truth_ddu[t * d + j];
                        sums[4 * d + j] += diff_d2 * diff_d2;
                        sums[5 * d + j] += truth_ddu[t * d + j] * truth_ddu[t * d + j];
                    }
                }
            }
            (sums, None)
        },
        |mut acc: Acc, part: Acc| {
            for (a, b) in acc.0.iter_mut().zip(part.0.iter()) {
                *a += b;
            }
            if acc.1.is_none() {
                acc.1 = part.1;
            }
            acc
        },
        (vec![0.0; 6 * d], None),
    );
    if let Some(e) = err {
        return Err(e);
    }
    let quantity = |num_off: usize, den_off: usize| -> Result<(f64, f64)> {
        let num: f64 = sums[num_off..num_off + d].iter().sum();
        let den: f64 = sums[den_off..den_off + d].iter().sum();
        if den == 0.0 {
            return Err(Error::invalid("rlse: zero-norm truth"));
        }
        let pooled = 100.0 * (num / den).sqrt();
        let mut per_dof = 0.0;
        for j in 0..d {
            let dj = sums[den_off + j];
            if dj > 0.0 {
                per_dof += 100.0 * (sums[num_off + j] / dj).sqrt();
            }
        }
        Ok((pooled, per_dof / d as f64))
    };
    let (sol_p, sol_m) = quantity(0, d)?;
    let (d1_p, d1_m) = quantity(2 * d, 3 * d)?;
    let (d2_p, d2_m) = quantity(4 * d, 5 * d)?;
    Ok(RlseReport {
        pooled: RlseValues {
            solutions: sol_p,
            deriv1: d1_p,
            deriv2: d2_p,
        },
        per_dof_mean: RlseValues {
            solutions: sol_m,
            deriv1: d1_m,
            deriv2: d2_m,
        },
    })
}
