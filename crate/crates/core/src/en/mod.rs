//! Equation normalization: per-pair, per-ODE loss weights from a
//! perturbation simulation.
//!
//! Equations in a coupled group have wildly different sensitivities — a
//! stiff modal ODE turns a small solution error into a huge residual while a
//! soft one barely reacts. To normalize, each ground-truth pair is perturbed
//! by a fraction `r` of its own per-DOF scale, the residual of the perturbed
//! state is evaluated, and each ODE gets the weight `lambda = r / L` where
//! `L` is that ODE's peak residual magnitude over time. Scaled this way, a
//! solution error of size `r` produces an equation loss of size `r` in every
//! ODE.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::oracle::Dataset;
use crate::parallel;
use crate::rng::{derive_seed, Rng};
use crate::system::{build_system, residual, ResidualField};

/// Per-pair, per-ODE equation weights.
#[derive(Debug, Clone)]
pub struct ENWeights {
    /// `n_pairs x n_dof` positive weights for the training split.
    pub lambda: Array2<f64>,
    /// Acceptable error level the residuals are normalized to.
    pub r: f64,
    /// Upper clip for degenerate residuals.
    pub cap: f64,
    pub seed: u64,
    /// Content hash of the dataset the weights were computed from.
    pub dataset_hash: u64,
}

/// Weight for one ODE given its perturbed-residual level.
pub fn lambda_for_level(l: f64, r: f64, cap: f64) -> f64 {
    if l < r / cap {
        cap
    } else {
        r / l
    }
}

/// Perturb pair `pair_index` of the training split by `r` times its per-DOF
/// scale and return each ODE's peak absolute residual over time.
///
/// The perturbation streams are consumed in DOF order (displacement,
/// velocity, acceleration per DOF), so a caller holding the same `Rng` state
/// reproduces the draw bit for bit.
pub fn perturbed_residual_max(
    dataset: &Dataset,
    pair_index: usize,
    r: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let pair = dataset
        .train
        .get(pair_index)
        .ok_or_else(|| Error::MissingData(format!("train pair {pair_index}")))?;
    let traj = pair
        .trajectory
        .as_ref()
        .ok_or_else(|| Error::MissingData("pair has no stored derivatives".into()))?;
    let n_t = traj.n_t();
    let n_dof = traj.n_dof();

    let std_of = |col: ndarray::ArrayView1<f64>| -> f64 {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
    };

    let mut s0 = traj.u.clone();
    let mut s1 = traj.du.clone();
    let mut s2 = traj.ddu.clone();
    for j in 0..n_dof {
        for (state, source) in [(&mut s0, &traj.u), (&mut s1, &traj.du), (&mut s2, &traj.ddu)] {
            let sigma = std_of(source.column(j));
            let a = r * sigma;
            for t in 0..n_t {
                state[[t, j]] += rng.uniform_in(-a, a);
            }
        }
    }

    let params = pair.sample.param_map(&dataset.space);
    let system = build_system(&dataset.config, &params)?;
    let res = residual(&system, &pair.sample, &s0, &s1, &s2)?;
    let mut l = vec![0.0f64; n_dof];
    for t in 0..n_t {
        for (j, lj) in l.iter_mut().enumerate() {
            *lj = f64::max(*lj, res.values[[t, j]].abs());
        }
    }
    Ok(l)
}

/// Compute equation weights for every training pair.
///
/// One perturbation draw per pair by default; `draws > 1` averages the
/// residual levels over that many draws before inverting.
pub fn compute_en_weights(
    dataset: &Dataset,
    r: f64,
    cap: f64,
    seed: u64,
    draws: usize,
    jobs: usize,
) -> Result<ENWeights> {
    if r <= 0.0 {
        return Err(Error::invalid("EN error level r must be positive"));
    }
    if draws == 0 {
        return Err(Error::invalid("EN needs at least one draw"));
    }
    let n_pairs = dataset.train.len();
    if n_pairs == 0 {
        return Err(Error::MissingData("EN requires labeled training pairs".into()));
    }
    let n_dof = dataset.n_dof();
    let rows = parallel::par_map_indexed(jobs, n_pairs, |i| -> Result<Vec<f64>> {
        let mut levels = vec![0.0; n_dof];
        for d in 0..draws {
            let mut rng = Rng::new(derive_seed(seed, 20 + d as u64, i as u64));
            let l = perturbed_residual_max(dataset, i, r, &mut rng)?;
            for (acc, v) in levels.iter_mut().zip(l.iter()) {
                *acc += v / draws as f64;
            }
        }
        Ok(levels.iter().map(|&l| lambda_for_level(l, r, cap)).collect())
    });
    let mut lambda = Array2::<f64>::zeros((n_pairs, n_dof));
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (j, v) in row.into_iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::NonFinite(format!("EN weight for pair {i}, ODE {j}")));
            }
            lambda[[i, j]] = v;
        }
    }
    Ok(ENWeights {
        lambda,
        r,
        cap,
        seed,
        dataset_hash: dataset.content_hash(),
    })
}

/// Mean over time of the weighted squared residual `sum_j (lambda_j res_tj)^2`.
///
/// This replaces the raw squared norm inside the equation loss.
pub fn weighted_residual_norm(res: &ResidualField, lambda_row: &[f64]) -> Result<f64> {
    let n_t = res.values.nrows();
    let n_dof = res.values.ncols();
    if lambda_row.len() != n_dof {
        return Err(Error::Dimension {
            context: "weighted_residual_norm",
            expected: n_dof,
            got: lambda_row.len(),
        });
    }
    let mut acc = 0.0;
    for t in 0..n_t {
        for (j, lam) in lambda_row.iter().enumerate() {
            let v = lam * res.values[[t, j]];
            acc += v * v;
        }
    }
    Ok(acc / n_t as f64)
}

impl ENWeights {
    /// Per-ODE median weight across pairs, the fallback for virtual pairs
    /// that have no ground truth to perturb.
    pub fn median_lambda(&self) -> Vec<f64> {
        let n_dof = self.lambda.ncols();
        let mut out = Vec::with_capacity(n_dof);
        for j in 0..n_dof {
            let mut col: Vec<f64> = self.lambda.column(j).to_vec();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = col.len() / 2;
            let median = if col.len() % 2 == 1 {
                col[mid]
            } else {
                0.5 * (col[mid - 1] + col[mid])
            };
            out.push(median);
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ENManifest {
    version: u32,
    r: f64,
    cap: f64,
    seed: u64,
    n_pairs: usize,
    n_dof: usize,
    dataset_hash: String,
    lambda_fnv64: String,
}

/// Persist weights as `en_weights.json` plus `lambda.f64le` under `dir`.
pub fn save_en_weights(weights: &ENWeights, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let flat: Vec<f64> = weights.lambda.iter().copied().collect();
    io::write_f64_blob(&dir.join("lambda.f64le"), &flat)?;
    let manifest = ENManifest {
        version: 1,
        r: weights.r,
        cap: weights.cap,
        seed: weights.seed,
        n_pairs: weights.lambda.nrows(),
        n_dof: weights.lambda.ncols(),
        dataset_hash: format!("{:016x}", weights.dataset_hash),
        lambda_fnv64: format!("{:016x}", io::hash_f64(&flat)),
    };
    std::fs::write(
        dir.join("en_weights.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Load weights saved by [`save_en_weights`].
pub fn load_en_weights(dir: &Path) -> Result<ENWeights> {
    let manifest: ENManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("en_weights.json"))?)?;
    let flat = io::read_f64_blob(
        &dir.join("lambda.f64le"),
        manifest.n_pairs * manifest.n_dof,
    )?;
    if format!("{:016x}", io::hash_f64(&flat)) != manifest.lambda_fnv64 {
        return Err(Error::invalid("lambda blob hash mismatch"));
    }
    let lambda = Array2::from_shape_vec((manifest.n_pairs, manifest.n_dof), flat)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let dataset_hash = u64::from_str_radix(&manifest.dataset_hash, 16)
        .map_err(|_| Error::invalid("bad dataset hash"))?;
    Ok(ENWeights {
        lambda,
        r: manifest.r,
        cap: manifest.cap,
        seed: manifest.seed,
        dataset_hash,
    })
}
