//! Subcommand implementations. Every command works inside a run directory
//! with a fixed layout (`config.snapshot.json`, `dataset/`, `weights/`,
//! `model/`, `reports/`, `plots/`) and never mutates its inputs.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use odyn_core::en::{compute_en_weights, load_en_weights, save_en_weights, ENWeights};
use odyn_core::io::{fmt_g, write_csv};
use odyn_core::modal::{recover_field, ModeShapeTable};
use odyn_core::oracle::{build_dataset, load_dataset, normalize, save_dataset, Dataset};
use odyn_core::pino::{
    evaluate_rlse, load_checkpoint, predict, prepare, report_to_csv, save_checkpoint, train,
    Checkpoint, LossFlags, RlseReport, SpectralOps, TrainConfig,
};
use odyn_core::system::generate_excitation;
use odyn_core::uq::{
    compare_pdf, damage_probability, load_pdf_grid, mc_propagate, oracle_case, pdf_estimate,
    pdf_to_csv, run_pdem, save_pdf_grid, select_representative_points, surrogate_case, Propagator,
};
use odyn_core::{Error, Result};

use crate::config::RunConfig;

/// Fixed run-directory layout.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: PathBuf) -> RunDir {
        RunDir { root }
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn weights(&self) -> PathBuf {
        self.root.join("weights")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn plots(&self) -> PathBuf {
        self.root.join("plots")
    }

    /// Create the root and drop a canonical snapshot of the configuration.
    pub fn prepare(&self, config: &RunConfig) -> Result<()> {
        std::fs::create_dir_all(&self.root)?;
        let snapshot = serde_json::to_string_pretty(config)?;
        std::fs::write(self.root.join("config.snapshot.json"), snapshot)?;
        Ok(())
    }

    fn load_dataset(&self) -> Result<Dataset> {
        load_dataset(&self.dataset()).map_err(|e| {
            Error::MissingData(format!(
                "no dataset under {} (run gen-data first): {e}",
                self.dataset().display()
            ))
        })
    }

    fn load_weights(&self, dataset: &Dataset) -> Result<ENWeights> {
        let w = load_en_weights(&self.weights()).map_err(|e| {
            Error::MissingData(format!(
                "no equation weights under {} (run en-weights first): {e}",
                self.weights().display()
            ))
        })?;
        if w.dataset_hash != dataset.content_hash() {
            return Err(Error::invalid(
                "equation weights belong to a different dataset",
            ));
        }
        Ok(w)
    }

    fn load_model(&self) -> Result<Checkpoint> {
        load_checkpoint(&self.model()).map_err(|e| {
            Error::MissingData(format!(
                "no model under {} (run train first): {e}",
                self.model().display()
            ))
        })
    }
}

pub fn gen_data(config: &RunConfig, run: &RunDir, jobs: usize) -> Result<()> {
    let section = config.dataset_section()?;
    let mut dataset = build_dataset(
        &config.system,
        &config.space,
        &config.grid,
        &section.counts,
        section.master_seed,
        jobs,
    )?;
    normalize(&mut dataset)?;
    save_dataset(&dataset, &run.dataset())?;
    // A sample excitation record for inspection.
    std::fs::create_dir_all(run.reports())?;
    if let Some(pair) = dataset.train.first() {
        odyn_core::system::excitation_to_csv(
            &pair.sample.f,
            &config.grid,
            &run.reports().join("excitation_pair_0.csv"),
        )?;
    }
    println!(
        "dataset: {} train / {} test / {} virtual pairs, {} DOFs, n_t = {}",
        dataset.train.len(),
        dataset.test.len(),
        dataset.virtuals.len(),
        dataset.n_dof(),
        dataset.n_t()
    );
    println!("dataset hash: {:016x}", dataset.content_hash());
    Ok(())
}

pub fn en_weights(config: &RunConfig, run: &RunDir, jobs: usize) -> Result<()> {
    let section = config.en_section()?;
    let dataset = run.load_dataset()?;
    let weights = compute_en_weights(
        &dataset,
        section.r,
        section.cap,
        section.seed,
        section.draws,
        jobs,
    )?;
    save_en_weights(&weights, &run.weights())?;
    let med = weights.median_lambda();
    let spread = med.iter().cloned().fold(f64::MIN, f64::max)
        / med.iter().cloned().fold(f64::MAX, f64::min);
    println!(
        "weights for {} pairs x {} ODEs (r = {}, median-weight spread {:.1}x)",
        weights.lambda.nrows(),
        weights.lambda.ncols(),
        weights.r,
        spread
    );
    println!("lambda hash: {:016x}", odyn_core::io::hash_f64(
        &weights.lambda.iter().copied().collect::<Vec<f64>>(),
    ));
    Ok(())
}

fn train_once(
    dataset: &Dataset,
    en: Option<&ENWeights>,
    tc: &TrainConfig,
) -> Result<(Checkpoint, odyn_core::pino::TrainReport)> {
    let (model, report) = train(dataset, en, tc)?;
    let ckpt = Checkpoint {
        model,
        stats: dataset.norm()?.clone(),
        dataset_hash: dataset.content_hash(),
        train_config: tc.clone(),
        epochs_trained: tc.epochs,
        dof_labels: dataset.labels.clone(),
    };
    Ok((ckpt, report))
}

pub fn train_cmd(
    config: &RunConfig,
    run: &RunDir,
    jobs: usize,
    epochs_override: Option<usize>,
) -> Result<()> {
    let mut tc = config.train_section()?.clone();
    tc.jobs = jobs;
    if let Some(e) = epochs_override {
        tc.epochs = e;
    }
    let dataset = run.load_dataset()?;
    let uses_en = tc.loss.eq || tc.loss.veq;
    let en = if uses_en && run.weights().join("en_weights.json").exists() {
        Some(run.load_weights(&dataset)?)
    } else {
        None
    };
    let (ckpt, report) = train_once(&dataset, en.as_ref(), &tc)?;
    save_checkpoint(&ckpt, &run.model())?;
    std::fs::create_dir_all(run.reports())?;
    report_to_csv(&report, &run.reports().join("train_report.csv"))?;
    if let Some((sol, d1, d2)) = report.final_rlse() {
        println!("final test rLSE: solutions {sol:.2}%, 1st {d1:.2}%, 2nd {d2:.2}%");
    }
    println!(
        "model: {} parameters, EN {}",
        ckpt.model.n_params(),
        if en.is_some() { "on" } else { "off" }
    );
    Ok(())
}

fn rlse_for_checkpoint(ckpt: &Checkpoint, dataset: &Dataset) -> Result<RlseReport> {
    let arch = ckpt.model.arch.clone();
    let prepared = prepare(dataset, None, &arch, None)?;
    let ops = SpectralOps::new(arch.n_t);
    evaluate_rlse(&ckpt.model, &ops, &prepared, &prepared.test, 1)
}

pub fn eval_cmd(_config: &RunConfig, run: &RunDir) -> Result<()> {
    let dataset = run.load_dataset()?;
    let ckpt = run.load_model()?;
    if ckpt.dataset_hash != dataset.content_hash() {
        eprintln!("note: model was trained on a different dataset");
    }
    let rlse = rlse_for_checkpoint(&ckpt, &dataset)?;
    std::fs::create_dir_all(run.reports())?;
    let rows = vec![
        vec![
            "pooled".to_string(),
            fmt_g(rlse.pooled.solutions),
            fmt_g(rlse.pooled.deriv1),
            fmt_g(rlse.pooled.deriv2),
            fmt_g(rlse.pooled.average()),
        ],
        vec![
            "per_dof_mean".to_string(),
            fmt_g(rlse.per_dof_mean.solutions),
            fmt_g(rlse.per_dof_mean.deriv1),
            fmt_g(rlse.per_dof_mean.deriv2),
            fmt_g(rlse.per_dof_mean.average()),
        ],
    ];
    write_csv(
        &run.reports().join("eval.csv"),
        &["metric", "solutions", "deriv1", "deriv2", "average"],
        &rows,
    )?;
    println!(
        "rLSE (%): solutions {:.2} | 1st {:.2} | 2nd {:.2} | average {:.2}",
        rlse.pooled.solutions,
        rlse.pooled.deriv1,
        rlse.pooled.deriv2,
        rlse.pooled.average()
    );
    Ok(())
}

fn forward_pair(
    ckpt: &Checkpoint,
    dataset: &Dataset,
    split: &str,
    index: usize,
) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
    let arch = ckpt.model.arch.clone();
    let prepared = prepare(dataset, None, &arch, None)?;
    let (pairs, raw) = match split {
        "train" => (&prepared.train, &dataset.train),
        "test" => (&prepared.test, &dataset.test),
        "virtual" => (&prepared.virtuals, &dataset.virtuals),
        other => return Err(Error::invalid(format!("unknown split '{other}'"))),
    };
    let pair = pairs
        .get(index)
        .ok_or_else(|| Error::invalid(format!("split '{split}' has no pair {index}")))?;
    let ops = SpectralOps::new(arch.n_t);
    let pred_n = predict(&ckpt.model, &ops, &pair.input)?;
    // Denormalize.
    let d = arch.out_channels;
    let n = arch.n_t;
    let mut pred = vec![0.0; n * d];
    for t in 0..n {
        for j in 0..d {
            pred[t * d + j] = pred_n[t * d + j] * ckpt.stats.u.std[j] + ckpt.stats.u.mean[j];
        }
    }
    let truth = raw[index].trajectory.as_ref().map(|t| t.u.clone());
    Ok((pred, truth))
}

pub fn predict_cmd(
    config: &RunConfig,
    run: &RunDir,
    split: &str,
    pairs: &[usize],
) -> Result<()> {
    let dataset = run.load_dataset()?;
    let ckpt = run.load_model()?;
    std::fs::create_dir_all(run.reports())?;
    for &index in pairs {
        let (pred, _) = forward_pair(&ckpt, &dataset, split, index)?;
        let d = ckpt.model.arch.out_channels;
        let mut header = vec!["t".to_string()];
        for label in &ckpt.dof_labels {
            header.push(format!("pred_{label}"));
        }
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<String>> = config
            .grid
            .times()
            .iter()
            .enumerate()
            .map(|(t, time)| {
                let mut row = vec![fmt_g(*time)];
                for j in 0..d {
                    row.push(fmt_g(pred[t * d + j]));
                }
                row
            })
            .collect();
        let path = run.reports().join(format!("predict_{split}_{index}.csv"));
        write_csv(&path, &header_refs, &rows)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn recover_cmd(run: &RunDir, shapes: &Path, traj: &Path) -> Result<()> {
    let table = ModeShapeTable::from_csv(shapes)?;
    // Modal trajectory CSV: first column time, then one column per mode.
    let text = std::fs::read_to_string(traj)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty trajectory file"))?;
    let n_cols = header.split(',').count();
    if n_cols != table.n_modes() + 1 {
        return Err(Error::invalid(format!(
            "trajectory has {} mode columns, shapes expect {}",
            n_cols - 1,
            table.n_modes()
        )));
    }
    let mut times = Vec::new();
    let mut q_rows = Vec::new();
    for line in lines {
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("bad trajectory value: {e}")))?;
        times.push(fields[0]);
        q_rows.push(fields[1..].to_vec());
    }
    let mut q = Array2::<f64>::zeros((q_rows.len(), table.n_modes()));
    for (i, row) in q_rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            q[[i, j]] = *v;
        }
    }
    let field = recover_field(&table, &q)?;
    std::fs::create_dir_all(run.plots())?;
    let mut header = vec!["t".to_string()];
    for p in &table.points {
        header.push(format!("x_{}", fmt_g(*p)));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![fmt_g(*t)];
            for p in 0..table.n_points() {
                row.push(fmt_g(field[[i, p]]));
            }
            row
        })
        .collect();
    let path = run.plots().join("recovered_field.csv");
    write_csv(&path, &header_refs, &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn pdem_cmd(config: &RunConfig, run: &RunDir, jobs: usize, source: &str) -> Result<()> {
    let section = config
        .pdem
        .as_ref()
        .ok_or_else(|| Error::invalid("config has no [pdem] section"))?;
    let points = select_representative_points(&config.space, section.n_sel, section.generator)?;
    let grid = config.grid;
    let excitation =
        generate_excitation(&config.space.excitation, &grid, section.excitation_seed)?;
    let ckpt = if source == "surrogate" {
        Some(run.load_model()?)
    } else {
        None
    };
    let ops = ckpt
        .as_ref()
        .map(|c| SpectralOps::new(c.model.arch.n_t));
    let case = |q: usize| -> Result<(f64, Vec<f64>)> {
        let sample = odyn_core::system::ParameterSample {
            p: points.points.row(q).to_owned(),
            f: excitation.clone(),
        };
        let traj = match (&ckpt, &ops) {
            (Some(c), Some(ops)) => {
                let mut scratch = ops.scratch();
                surrogate_case(
                    c,
                    ops,
                    &mut scratch,
                    &config.system,
                    &config.space,
                    &grid,
                    &sample,
                    &section.quantity,
                )?
            }
            _ => oracle_case(&config.system, &config.space, &grid, &sample, &section.quantity)?,
        };
        Ok((traj.value[0], traj.velocity))
    };
    let pdf = run_pdem(&points, case, grid.dt, &section.x_grid, section.dt_pde, jobs)?;
    let dir = run.reports().join("pdem");
    save_pdf_grid(&pdf, &dir)?;
    pdf_to_csv(&pdf, &dir.join("pdf.csv"))?;
    println!(
        "density evolved for {} representative points (generator {}), {} slices, {} renormalized",
        section.n_sel,
        points.generator,
        pdf.t_grid.len(),
        pdf.renormalized_slices
    );
    if let Some(threshold) = section.threshold {
        for t in &section.times {
            if let Some(s) = pdf.t_grid.iter().position(|tt| (tt - t).abs() < 1e-9) {
                println!("dp*({t} s) = {:.4}", pdf.exceedance(s, threshold));
            }
        }
    }
    Ok(())
}

pub fn mc_cmd(config: &RunConfig, run: &RunDir, jobs: usize, source: &str) -> Result<()> {
    let section = config
        .mc
        .as_ref()
        .ok_or_else(|| Error::invalid("config has no [mc] section"))?;
    let ckpt;
    let propagator = match source {
        "oracle" => Propagator::Oracle,
        "surrogate" => {
            ckpt = run.load_model()?;
            Propagator::Surrogate(&ckpt)
        }
        other => return Err(Error::invalid(format!("unknown source '{other}'"))),
    };
    let ensemble = mc_propagate(
        &config.system,
        &config.space,
        &config.grid,
        &section.quantity,
        section.n,
        section.seed,
        &propagator,
        jobs,
    )?;
    let dir = run.reports().join("mc");
    std::fs::create_dir_all(&dir)?;
    if let Some(threshold) = section.threshold {
        let damage = damage_probability(&ensemble, threshold, section.use_abs)?;
        let rows = vec![vec![
            "quantity".to_string(),
            fmt_g(threshold),
            fmt_g(damage.dp),
        ]];
        write_csv(&dir.join("dp.csv"), &["channel", "threshold", "dp"], &rows)?;
        let star_rows: Vec<Vec<String>> = damage
            .dp_star
            .iter()
            .enumerate()
            .map(|(t, v)| vec![fmt_g(t as f64 * ensemble.dt), fmt_g(*v)])
            .collect();
        write_csv(&dir.join("dp_star.csv"), &["t", "dp_star"], &star_rows)?;
        println!("dp = {:.4} at threshold {threshold}", damage.dp);
    }
    if let Some(x_grid) = &section.x_grid {
        let pdf = pdf_estimate(&ensemble, x_grid, section.smooth)?;
        save_pdf_grid(&pdf, &dir.join("pdf"))?;
        pdf_to_csv(&pdf, &dir.join("pdf").join("pdf.csv"))?;
    }
    println!(
        "{} samples propagated through the {}",
        section.n,
        if matches!(propagator, Propagator::Oracle) {
            "oracle integrator"
        } else {
            "surrogate"
        }
    );
    Ok(())
}

pub fn compare_cmd(
    run: &RunDir,
    a: &Path,
    b: &Path,
    threshold: f64,
    times: &[f64],
) -> Result<()> {
    let pa = load_pdf_grid(a)?;
    let pb = load_pdf_grid(b)?;
    let cmp = compare_pdf(&pa, &pb, threshold, times)?;
    std::fs::create_dir_all(run.reports())?;
    let mut rows: Vec<Vec<String>> = cmp
        .per_slice_l1
        .iter()
        .enumerate()
        .map(|(s, l1)| {
            vec![
                "l1".to_string(),
                fmt_g(pa.t_grid[s]),
                fmt_g(*l1),
                String::new(),
            ]
        })
        .collect();
    for (t, da, db) in &cmp.dp_star {
        rows.push(vec![
            "dp_star".to_string(),
            fmt_g(*t),
            fmt_g(*da),
            fmt_g(*db),
        ]);
    }
    write_csv(
        &run.reports().join("compare.csv"),
        &["metric", "t", "a", "b"],
        &rows,
    )?;
    println!("max per-slice L1 = {:.4}", cmp.max_l1);
    for (t, da, db) in &cmp.dp_star {
        println!("dp*({t} s): a = {da:.4}, b = {db:.4}");
    }
    Ok(())
}

pub fn sweep_cmd(
    config: &RunConfig,
    run: &RunDir,
    jobs: usize,
    epochs_override: Option<usize>,
) -> Result<()> {
    let section = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::invalid("config has no [sweep] section"))?;
    let base = config.train_section()?.clone();
    let dataset = run.load_dataset()?;
    let uses_en = base.loss.eq || base.loss.veq;
    let en = if uses_en && run.weights().join("en_weights.json").exists() {
        Some(run.load_weights(&dataset)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for variant in &section.variants {
        let mut tc = base.clone();
        tc.arch = variant.arch;
        tc.jobs = jobs;
        if let Some(lr) = variant.lr {
            tc.lr = lr;
        }
        if let Some(e) = variant.epochs {
            tc.epochs = e;
        }
        if let Some(e) = epochs_override {
            tc.epochs = e;
        }
        let (ckpt, _) = train_once(&dataset, en.as_ref(), &tc)?;
        let rlse = rlse_for_checkpoint(&ckpt, &dataset)?;
        println!(
            "{}: width {} depth {} modes {} head {}x{} -> rLSE {:.2}/{:.2}/{:.2}",
            variant.name,
            tc.arch.width,
            tc.arch.depth,
            tc.arch.k_modes,
            tc.arch.fc_width,
            tc.arch.fc_depth,
            rlse.pooled.solutions,
            rlse.pooled.deriv1,
            rlse.pooled.deriv2
        );
        rows.push(vec![
            variant.name.clone(),
            tc.arch.width.to_string(),
            tc.arch.depth.to_string(),
            tc.arch.k_modes.to_string(),
            tc.arch.fc_width.to_string(),
            tc.arch.fc_depth.to_string(),
            fmt_g(tc.lr),
            tc.epochs.to_string(),
            fmt_g(rlse.pooled.solutions),
            fmt_g(rlse.pooled.deriv1),
            fmt_g(rlse.pooled.deriv2),
            fmt_g(rlse.pooled.average()),
        ]);
    }
    std::fs::create_dir_all(run.reports())?;
    write_csv(
        &run.reports().join("sweep.csv"),
        &[
            "name", "width", "depth", "k_modes", "fc_width", "fc_depth", "lr", "epochs",
            "rlse_solutions", "rlse_deriv1", "rlse_deriv2", "rlse_average",
        ],
        &rows,
    )?;
    Ok(())
}

/// Named loss-combination rows. The window value comes from the config's
/// training section.
pub fn ablation_row(name: &str, window: Option<f64>) -> Option<(bool, LossFlags)> {
    let w = window;
    let flags = |data, eq, dde, veq, win: Option<f64>| LossFlags {
        data,
        eq,
        dde,
        veq,
        dde_window: win,
    };
    Some(match name {
        "t1" => (true, flags(true, true, false, false, None)),
        "t2" | "v1" => (true, flags(true, true, true, false, None)),
        "t3" => (true, flags(true, true, false, true, None)),
        "t4" => (true, flags(true, true, true, true, None)),
        "t5" => (false, flags(true, true, false, false, None)),
        "t6" => (false, flags(true, true, false, true, None)),
        "t7" | "v4" => (false, flags(true, false, false, false, None)),
        "v2" => (true, flags(true, true, true, false, w)),
        "v3" => (false, flags(true, true, true, false, w)),
        "nodata" => (false, flags(false, true, true, true, w)),
        _ => return None,
    })
}

pub fn ablate_cmd(
    config: &RunConfig,
    run: &RunDir,
    jobs: usize,
    epochs_override: Option<usize>,
) -> Result<()> {
    let section = config
        .ablate
        .as_ref()
        .ok_or_else(|| Error::invalid("config has no [ablate] section"))?;
    let base = config.train_section()?.clone();
    let dataset = run.load_dataset()?;
    let mut rows = Vec::new();
    for name in &section.rows {
        let (use_en, flags) = ablation_row(name, base.loss.dde_window)
            .ok_or_else(|| Error::invalid(format!("unknown ablation row '{name}'")))?;
        let mut tc = base.clone();
        tc.loss = flags;
        tc.jobs = jobs;
        if let Some(e) = section.epochs {
            tc.epochs = e;
        }
        if let Some(e) = epochs_override {
            tc.epochs = e;
        }
        let en = if use_en {
            Some(run.load_weights(&dataset)?)
        } else {
            None
        };
        let (ckpt, _) = train_once(&dataset, en.as_ref(), &tc)?;
        let rlse = rlse_for_checkpoint(&ckpt, &dataset)?;
        println!(
            "{name}: PI {} EN {} -> rLSE {:.2}/{:.2}/{:.2}",
            flags.eq || flags.dde || flags.veq,
            use_en,
            rlse.pooled.solutions,
            rlse.pooled.deriv1,
            rlse.pooled.deriv2
        );
        rows.push(vec![
            name.clone(),
            (flags.eq || flags.dde || flags.veq).to_string(),
            use_en.to_string(),
            flags.eq.to_string(),
            flags.dde.to_string(),
            flags.veq.to_string(),
            flags
                .dde_window
                .map(fmt_g)
                .unwrap_or_else(|| "full".to_string()),
            fmt_g(rlse.pooled.solutions),
            fmt_g(rlse.pooled.deriv1),
            fmt_g(rlse.pooled.deriv2),
            fmt_g(rlse.pooled.average()),
        ]);
    }
    std::fs::create_dir_all(run.reports())?;
    write_csv(
        &run.reports().join("ablate.csv"),
        &[
            "row", "pi", "en", "eq", "dde", "veq", "window", "rlse_solutions", "rlse_deriv1",
            "rlse_deriv2", "rlse_average",
        ],
        &rows,
    )?;
    Ok(())
}

pub fn export_plot(
    config: &RunConfig,
    run: &RunDir,
    kind: &str,
    pair: Option<usize>,
    times: &[f64],
    pdf_dir: Option<&Path>,
) -> Result<()> {
    std::fs::create_dir_all(run.plots())?;
    match kind {
        "overlay" => {
            let index = pair.ok_or_else(|| Error::invalid("overlay needs --pair"))?;
            let dataset = run.load_dataset()?;
            let ckpt = run.load_model()?;
            let (pred, truth) = forward_pair(&ckpt, &dataset, "test", index)?;
            let truth =
                truth.ok_or_else(|| Error::MissingData("pair has no ground truth".into()))?;
            let d = ckpt.model.arch.out_channels;
            let mut header = vec!["t".to_string()];
            for label in &ckpt.dof_labels {
                header.push(format!("truth_{label}"));
                header.push(format!("pred_{label}"));
            }
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<String>> = config
                .grid
                .times()
                .iter()
                .enumerate()
                .map(|(t, time)| {
                    let mut row = vec![fmt_g(*time)];
                    for j in 0..d {
                        row.push(fmt_g(truth[[t, j]]));
                        row.push(fmt_g(pred[t * d + j]));
                    }
                    row
                })
                .collect();
            let path = run.plots().join(format!("overlay_test_{index}.csv"));
            write_csv(&path, &header_refs, &rows)?;
            println!("wrote {}", path.display());
        }
        "losses" => {
            // Loss curves and weight trajectories, straight from the
            // training report.
            let src = run.reports().join("train_report.csv");
            let dst = run.plots().join("losses.csv");
            std::fs::copy(&src, &dst)
                .map_err(|e| Error::MissingData(format!("no training report: {e}")))?;
            println!("wrote {}", dst.display());
        }
        "pdf-slices" => {
            let dir = pdf_dir
                .map(Path::to_path_buf)
                .unwrap_or_else(|| run.reports().join("pdem"));
            let pdf = load_pdf_grid(&dir)?;
            for t in times {
                let s = pdf
                    .t_grid
                    .iter()
                    .position(|tt| (tt - t).abs() < 1e-9)
                    .ok_or_else(|| Error::invalid(format!("time {t} not on the grid")))?;
                let rows: Vec<Vec<String>> = (0..pdf.grid.n_x)
                    .map(|i| vec![fmt_g(pdf.grid.center(i)), fmt_g(pdf.p[[s, i]])])
                    .collect();
                let path = run.plots().join(format!("pdf_slice_t{t}.csv"));
                write_csv(&path, &["x", "p"], &rows)?;
                println!("wrote {}", path.display());
            }
        }
        "dp" => {
            let src = run.reports().join("mc").join("dp.csv");
            let dst = run.plots().join("dp.csv");
            std::fs::copy(&src, &dst)
                .map_err(|e| Error::MissingData(format!("no damage table: {e}")))?;
            println!("wrote {}", dst.display());
        }
        other => return Err(Error::invalid(format!("unknown plot kind '{other}'"))),
    }
    Ok(())
}
