//! Model checkpoints: a JSON manifest plus a raw little-endian parameter
//! blob.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{ArchConfig, Layout};
use super::model::OperatorModel;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::oracle::NormStats;

/// A trained model with everything needed to run it standalone.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: OperatorModel,
    pub stats: NormStats,
    pub dataset_hash: u64,
    pub train_config: TrainConfig,
    pub epochs_trained: usize,
    pub dof_labels: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointManifest {
    version: u32,
    arch: ArchConfig,
    stats: NormStats,
    dataset_hash: String,
    train_config: TrainConfig,
    epochs_trained: usize,
    dof_labels: Vec<String>,
    n_params: usize,
    params_fnv64: String,
}

pub fn save_checkpoint(ckpt: &Checkpoint, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::write_f64_blob(&dir.join("params.f64le"), &ckpt.model.params)?;
    let manifest = CheckpointManifest {
        version: 1,
        arch: ckpt.model.arch.clone(),
        stats: ckpt.stats.clone(),
        dataset_hash: format!("{:016x}", ckpt.dataset_hash),
        train_config: ckpt.train_config.clone(),
        epochs_trained: ckpt.epochs_trained,
        dof_labels: ckpt.dof_labels.clone(),
        n_params: ckpt.model.params.len(),
        params_fnv64: format!("{:016x}", io::hash_f64(&ckpt.model.params)),
    };
    std::fs::write(
        dir.join("model.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest: CheckpointManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("model.json"))?)?;
    let params = io::read_f64_blob(&dir.join("params.f64le"), manifest.n_params)?;
    if format!("{:016x}", io::hash_f64(&params)) != manifest.params_fnv64 {
        return Err(Error::invalid("parameter blob hash mismatch"));
    }
    let layout = Layout::new(&manifest.arch);
    if layout.n_params != params.len() {
        return Err(Error::invalid("parameter count does not match architecture"));
    }
    let dataset_hash = u64::from_str_radix(&manifest.dataset_hash, 16)
        .map_err(|_| Error::invalid("bad dataset hash"))?;
    Ok(Checkpoint {
        model: OperatorModel {
            arch: manifest.arch,
            layout,
            params,
        },
        stats: manifest.stats,
        dataset_hash,
        train_config: manifest.train_config,
        epochs_trained: manifest.epochs_trained,
        dof_labels: manifest.dof_labels,
    })
}
