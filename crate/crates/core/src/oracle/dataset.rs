//! Dataset construction, normalization and on-disk format.
//!
//! Layout on disk: a `manifest.json` describing dims, seeds, the system
//! template, the parameter space and normalization stats, plus one raw
//! little-endian f64 blob per array. Trajectory blobs are `[pair][time][dof]`
//! row-major; excitation blobs `[pair][time][channel]`; parameter blobs
//! `[pair][dim]`.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{integrate_newmark, Trajectory};
use crate::error::{Error, Result};
use crate::io;
use crate::parallel;
use crate::rng::derive_seed;
use crate::system::{
    build_system, sample_parameters, ParameterSample, ParameterSpace, SystemConfig, TimeGrid,
};

/// One parameter draw, with ground truth for labeled splits and none for
/// virtual pairs.
#[derive(Debug, Clone)]
pub struct Pair {
    pub sample: ParameterSample,
    pub trajectory: Option<Trajectory>,
}

/// Split sizes requested from [`build_dataset`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetCounts {
    pub train: usize,
    pub test: usize,
    #[serde(rename = "virtual", default)]
    pub virtual_: usize,
}

/// Per-channel standardization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    /// Standardize columns in place: `(x - mean) / std`.
    pub fn normalize(&self, arr: &mut Array2<f64>) {
        for (j, mut col) in arr.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            for v in col.iter_mut() {
                *v = (*v - m) / s;
            }
        }
    }

    /// Invert [`Self::normalize`] in place.
    pub fn denormalize(&self, arr: &mut Array2<f64>) {
        for (j, mut col) in arr.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            for v in col.iter_mut() {
                *v = *v * s + m;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Standardization statistics for inputs (p, f) and outputs (u, du, ddu),
/// computed on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub p: ChannelStats,
    pub f: ChannelStats,
    pub u: ChannelStats,
    pub du: ChannelStats,
    pub ddu: ChannelStats,
}

/// Samples, trajectories and metadata for one experiment.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: SystemConfig,
    pub space: ParameterSpace,
    pub grid: TimeGrid,
    pub master_seed: u64,
    pub train: Vec<Pair>,
    pub test: Vec<Pair>,
    pub virtuals: Vec<Pair>,
    pub norm: Option<NormStats>,
    /// DOF labels of the assembled template.
    pub labels: Vec<String>,
}

impl Dataset {
    pub fn n_dof(&self) -> usize {
        self.labels.len()
    }

    pub fn n_t(&self) -> usize {
        self.grid.n_t()
    }

    pub fn n_params(&self) -> usize {
        self.space.n_params()
    }

    pub fn n_channels(&self) -> usize {
        self.space.excitation.channels
    }

    pub fn norm(&self) -> Result<&NormStats> {
        self.norm
            .as_ref()
            .ok_or_else(|| Error::MissingData("dataset is not normalized".into()))
    }

    /// FNV-1a hash over every array in the dataset, in a fixed order; keys
    /// derived artifacts (equation weights, checkpoints) to their source.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |data: &[f64]| {
            for v in data {
                for b in v.to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x1000_0000_01b3);
                }
            }
        };
        for split in [&self.train, &self.test, &self.virtuals] {
            for pair in split {
                mix(pair.sample.p.as_slice().unwrap());
                mix(pair.sample.f.as_slice().unwrap());
                if let Some(t) = &pair.trajectory {
                    mix(t.u.as_slice().unwrap());
                    mix(t.du.as_slice().unwrap());
                    mix(t.ddu.as_slice().unwrap());
                }
            }
        }
        h
    }
}

/// Build a dataset deterministically from a master seed.
///
/// Labeled pairs are integrated per sample (in parallel, ordered by index);
/// virtual pairs carry samples only. Stored derivatives come from the
/// integrator state, not from re-differencing.
pub fn build_dataset(
    config: &SystemConfig,
    space: &ParameterSpace,
    grid: &TimeGrid,
    counts: &DatasetCounts,
    master_seed: u64,
    jobs: usize,
) -> Result<Dataset> {
    space.validate(grid)?;
    // Template instantiated at distribution medians for labels and shape
    // checks.
    let median_params: crate::system::ParamMap = space
        .params
        .iter()
        .map(|(n, d)| (n.clone(), d.quantile(0.5)))
        .collect();
    let template = build_system(config, &median_params)?;
    if template.n_channels() != space.excitation.channels {
        return Err(Error::invalid(format!(
            "system expects {} load channels, excitation provides {}",
            template.n_channels(),
            space.excitation.channels
        )));
    }

    let labeled = |split_tag: u64, count: usize| -> Result<Vec<Pair>> {
        let results = parallel::par_map_indexed(jobs, count, |i| -> Result<Pair> {
            let seed = derive_seed(master_seed, 10 + split_tag, i as u64);
            let sample = sample_parameters(space, grid, seed)?;
            let params = sample.param_map(space);
            let system = build_system(config, &params)?;
            let trajectory = integrate_newmark(&system, &sample.f, grid, None, None)?;
            Ok(Pair {
                sample,
                trajectory: Some(trajectory),
            })
        });
        results.into_iter().collect()
    };

    let train = labeled(0, counts.train)?;
    let test = labeled(1, counts.test)?;
    let mut virtuals = Vec::with_capacity(counts.virtual_);
    for i in 0..counts.virtual_ {
        let seed = derive_seed(master_seed, 12, i as u64);
        let sample = sample_parameters(space, grid, seed)?;
        virtuals.push(Pair {
            sample,
            trajectory: None,
        });
    }

    Ok(Dataset {
        config: config.clone(),
        space: space.clone(),
        grid: *grid,
        master_seed,
        train,
        test,
        virtuals,
        norm: None,
        labels: template.labels,
    })
}

fn stats_over<I: Iterator<Item = f64>>(values: I) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for v in values {
        n += 1;
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum2 / n as f64 - mean * mean).max(0.0);
    let mut std = var.sqrt();
    if std < 1e-12 {
        std = 1.0; // degenerate-channel guard
    }
    (mean, std)
}

/// Compute standardization statistics over the training split and attach
/// them to the dataset.
pub fn normalize(dataset: &mut Dataset) -> Result<&NormStats> {
    if dataset.train.is_empty() {
        return Err(Error::MissingData(
            "normalization requires a non-empty training split".into(),
        ));
    }
    let n_p = dataset.n_params();
    let n_ch = dataset.n_channels();
    let n_dof = dataset.n_dof();
    let train = &dataset.train;

    let mut p = ChannelStats {
        mean: vec![0.0; n_p],
        std: vec![1.0; n_p],
    };
    for d in 0..n_p {
        let (m, s) = stats_over(train.iter().map(|pr| pr.sample.p[d]));
        p.mean[d] = m;
        p.std[d] = s;
    }
    let mut f = ChannelStats {
        mean: vec![0.0; n_ch],
        std: vec![1.0; n_ch],
    };
    for c in 0..n_ch {
        let (m, s) = stats_over(
            train
                .iter()
                .flat_map(|pr| pr.sample.f.column(c).to_owned().into_iter()),
        );
        f.mean[c] = m;
        f.std[c] = s;
    }
    let out_stats = |select: fn(&Trajectory) -> &Array2<f64>| -> Result<ChannelStats> {
        let mut st = ChannelStats {
            mean: vec![0.0; n_dof],
            std: vec![1.0; n_dof],
        };
        for d in 0..n_dof {
            let (m, s) = stats_over(train.iter().flat_map(|pr| {
                let t = pr.trajectory.as_ref().expect("labeled split");
                select(t).column(d).to_owned().into_iter()
            }));
            st.mean[d] = m;
            st.std[d] = s;
        }
        Ok(st)
    };
    let u = out_stats(|t| &t.u)?;
    let du = out_stats(|t| &t.du)?;
    let ddu = out_stats(|t| &t.ddu)?;

    dataset.norm = Some(NormStats { p, f, u, du, ddu });
    Ok(dataset.norm.as_ref().unwrap())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlobEntry {
    name: String,
    shape: Vec<usize>,
    fnv64: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetManifest {
    version: u32,
    grid: TimeGrid,
    master_seed: u64,
    counts: DatasetCounts,
    n_dof: usize,
    n_params: usize,
    n_channels: usize,
    dof_labels: Vec<String>,
    config: SystemConfig,
    space: ParameterSpace,
    norm: Option<NormStats>,
    content_hash: String,
    blobs: Vec<BlobEntry>,
}

fn flatten_split(pairs: &[Pair], labeled: bool) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    let n = pairs.len();
    if n == 0 {
        return Vec::new();
    }
    let n_p = pairs[0].sample.p.len();
    let (n_t, n_ch) = (pairs[0].sample.f.nrows(), pairs[0].sample.f.ncols());
    let mut out = Vec::new();
    let mut p_flat = Vec::with_capacity(n * n_p);
    let mut f_flat = Vec::with_capacity(n * n_t * n_ch);
    for pair in pairs {
        p_flat.extend(pair.sample.p.iter());
        f_flat.extend(pair.sample.f.iter());
    }
    out.push(("p".to_string(), vec![n, n_p], p_flat));
    out.push(("f".to_string(), vec![n, n_t, n_ch], f_flat));
    if labeled {
        let n_dof = pairs[0].trajectory.as_ref().unwrap().n_dof();
        for (name, select) in [
            ("u", (|t: &Trajectory| &t.u) as fn(&Trajectory) -> &Array2<f64>),
            ("du", |t: &Trajectory| &t.du),
            ("ddu", |t: &Trajectory| &t.ddu),
        ] {
            let mut flat = Vec::with_capacity(n * n_t * n_dof);
            for pair in pairs {
                flat.extend(select(pair.trajectory.as_ref().unwrap()).iter());
            }
            out.push((name.to_string(), vec![n, n_t, n_dof], flat));
        }
    }
    out
}

/// Persist a dataset as `manifest.json` plus f64 blobs under `dir`.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut blobs = Vec::new();
    for (split, pairs, labeled) in [
        ("train", &dataset.train, true),
        ("test", &dataset.test, true),
        ("virtual", &dataset.virtuals, false),
    ] {
        for (name, shape, flat) in flatten_split(pairs, labeled) {
            let file = format!("{split}_{name}.f64le");
            io::write_f64_blob(&dir.join(&file), &flat)?;
            blobs.push(BlobEntry {
                name: file,
                shape,
                fnv64: format!("{:016x}", io::hash_f64(&flat)),
            });
        }
    }
    let manifest = DatasetManifest {
        version: 1,
        grid: dataset.grid,
        master_seed: dataset.master_seed,
        counts: DatasetCounts {
            train: dataset.train.len(),
            test: dataset.test.len(),
            virtual_: dataset.virtuals.len(),
        },
        n_dof: dataset.n_dof(),
        n_params: dataset.n_params(),
        n_channels: dataset.n_channels(),
        dof_labels: dataset.labels.clone(),
        config: dataset.config.clone(),
        space: dataset.space.clone(),
        norm: dataset.norm.clone(),
        content_hash: format!("{:016x}", dataset.content_hash()),
        blobs,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Load a dataset saved by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: DatasetManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let find = |name: &str| -> Option<&BlobEntry> {
        manifest.blobs.iter().find(|b| b.name == name)
    };
    let read = |name: &str| -> Result<(Vec<usize>, Vec<f64>)> {
        let entry = find(name)
            .ok_or_else(|| Error::MissingData(format!("blob {name} missing from manifest")))?;
        let len: usize = entry.shape.iter().product();
        let data = io::read_f64_blob(&dir.join(name), len)?;
        let hash = format!("{:016x}", io::hash_f64(&data));
        if hash != entry.fnv64 {
            return Err(Error::invalid(format!("blob {name} hash mismatch")));
        }
        Ok((entry.shape.clone(), data))
    };
    let load_split = |split: &str, count: usize, labeled: bool| -> Result<Vec<Pair>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let (p_shape, p_data) = read(&format!("{split}_p.f64le"))?;
        let (f_shape, f_data) = read(&format!("{split}_f.f64le"))?;
        let n_p = p_shape[1];
        let (n_t, n_ch) = (f_shape[1], f_shape[2]);
        let mut arrays = Vec::new();
        if labeled {
            for name in ["u", "du", "ddu"] {
                let (shape, data) = read(&format!("{split}_{name}.f64le"))?;
                arrays.push((shape[2], data));
            }
        }
        let mut pairs = Vec::with_capacity(count);
        for i in 0..count {
            let p = Array1::from(p_data[i * n_p..(i + 1) * n_p].to_vec());
            let f = Array2::from_shape_vec(
                (n_t, n_ch),
                f_data[i * n_t * n_ch..(i + 1) * n_t * n_ch].to_vec(),
            )
            .map_err(|e| Error::invalid(e.to_string()))?;
            let trajectory = if labeled {
                let mut parts = Vec::new();
                for (n_dof, data) in &arrays {
                    let arr = Array2::from_shape_vec(
                        (n_t, *n_dof),
                        data[i * n_t * n_dof..(i + 1) * n_t * n_dof].to_vec(),
                    )
                    .map_err(|e| Error::invalid(e.to_string()))?;
                    parts.push(arr);
                }
                let ddu = parts.pop().unwrap();
                let du = parts.pop().unwrap();
                let u = parts.pop().unwrap();
                Some(Trajectory {
                    dt: manifest.grid.dt,
                    u,
                    du,
                    ddu,
                })
            } else {
                None
            };
            pairs.push(Pair {
                sample: ParameterSample { p, f },
                trajectory,
            });
        }
        Ok(pairs)
    };
    let train = load_split("train", manifest.counts.train, true)?;
    let test = load_split("test", manifest.counts.test, true)?;
    let virtuals = load_split("virtual", manifest.counts.virtual_, false)?;
    let dataset = Dataset {
        config: manifest.config,
        space: manifest.space,
        grid: manifest.grid,
        master_seed: manifest.master_seed,
        train,
        test,
        virtuals,
        norm: manifest.norm,
        labels: manifest.dof_labels,
    };
    let hash = format!("{:016x}", dataset.content_hash());
    if hash != manifest.content_hash {
        return Err(Error::invalid("dataset content hash mismatch"));
    }
    Ok(dataset)
}
