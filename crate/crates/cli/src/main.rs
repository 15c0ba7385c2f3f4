//! Pipeline driver: data generation, equation weights, training,
//! evaluation, prediction, field recovery, density evolution, Monte Carlo
//! and comparison — all driven by one sectioned configuration file.
//!
//! Exit codes: 0 success, 1 validation error (arguments or configuration),
//! 2 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::RunDir;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "odyn",
    version,
    about = "Operator learning and uncertainty propagation for coupled dynamical systems"
)]
struct Cli {
    /// Configuration file (JSON, sectioned per command).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Run directory; defaults to $ODYN_RUN_ROOT/<command>.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(short, long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and normalize the dataset (ground-truth trajectories).
    GenData,
    /// Compute per-pair equation-normalization weights.
    EnWeights,
    /// Train the operator on the generated dataset.
    Train {
        /// Override the configured epoch count.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate test rLSE and emit the summary table.
    Eval,
    /// Export predicted trajectories for selected pairs.
    Predict {
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_delimiter = ',', required = true)]
        pairs: Vec<usize>,
    },
    /// Recover a field from a mode-shape table and modal trajectories.
    Recover {
        /// Mode-shape table CSV (x, mode_1..mode_n).
        #[arg(long)]
        shapes: PathBuf,
        /// Modal trajectory CSV (t, mode_1..mode_n).
        #[arg(long)]
        traj: PathBuf,
    },
    /// Evolve the response density over representative parameter points.
    Pdem {
        /// Trajectory source: oracle | surrogate.
        #[arg(long, default_value = "oracle")]
        source: String,
    },
    /// Monte Carlo propagation of the monitored quantity.
    Mc {
        /// Trajectory source: oracle | surrogate.
        #[arg(long, default_value = "surrogate")]
        source: String,
    },
    /// Compare two stored density grids.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
    },
    /// Train and evaluate every architecture variant in the sweep list.
    Sweep {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run a named set of loss-combination rows.
    Ablate {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Emit CSV series for external plotting.
    ExportPlot {
        /// overlay | losses | pdf-slices | dp
        #[arg(long)]
        kind: String,
        #[arg(long)]
        pair: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
        /// Density-grid directory for pdf-slices (default: reports/pdem).
        #[arg(long)]
        pdf: Option<PathBuf>,
    },
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::GenData => "gen-data",
        Command::EnWeights => "en-weights",
        Command::Train { .. } => "train",
        Command::Eval => "eval",
        Command::Predict { .. } => "predict",
        Command::Recover { .. } => "recover",
        Command::Pdem { .. } => "pdem",
        Command::Mc { .. } => "mc",
        Command::Compare { .. } => "compare",
        Command::Sweep { .. } => "sweep",
        Command::Ablate { .. } => "ablate",
        Command::ExportPlot { .. } => "export-plot",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits; everything
            // else is a validation failure.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let out = match &cli.out {
        Some(path) => path.clone(),
        None => match std::env::var_os("ODYN_RUN_ROOT") {
            Some(root) => PathBuf::from(root).join(command_name(&cli.command)),
            None => {
                eprintln!("error: no --out given and ODYN_RUN_ROOT is not set");
                return ExitCode::from(1);
            }
        },
    };
    let jobs = cli.jobs.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });

    // Commands that work purely from files do not need the configuration.
    let needs_config = !matches!(
        cli.command,
        Command::Recover { .. } | Command::Compare { .. }
    );
    let config = if needs_config {
        let path = match &cli.config {
            Some(p) => p.clone(),
            None => {
                eprintln!("error: --config is required for this command");
                return ExitCode::from(1);
            }
        };
        match RunConfig::load(&path) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
    } else {
        None
    };

    let run = RunDir::new(out);
    if let Some(config) = &config {
        if let Err(e) = run.prepare(config) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    } else if let Err(e) = std::fs::create_dir_all(&run.root) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }

    let result = match &cli.command {
        Command::GenData => commands::gen_data(config.as_ref().unwrap(), &run, jobs),
        Command::EnWeights => commands::en_weights(config.as_ref().unwrap(), &run, jobs),
        Command::Train { epochs } => {
            commands::train_cmd(config.as_ref().unwrap(), &run, jobs, *epochs)
        }
        Command::Eval => commands::eval_cmd(config.as_ref().unwrap(), &run),
        Command::Predict { split, pairs } => {
            commands::predict_cmd(config.as_ref().unwrap(), &run, split, pairs)
        }
        Command::Recover { shapes, traj } => commands::recover_cmd(&run, shapes, traj),
        Command::Pdem { source } => {
            commands::pdem_cmd(config.as_ref().unwrap(), &run, jobs, source)
        }
        Command::Mc { source } => commands::mc_cmd(config.as_ref().unwrap(), &run, jobs, source),
        Command::Compare {
            a,
            b,
            threshold,
            times,
        } => commands::compare_cmd(&run, a, b, *threshold, times),
        Command::Sweep { epochs } => {
            commands::sweep_cmd(config.as_ref().unwrap(), &run, jobs, *epochs)
        }
        Command::Ablate { epochs } => {
            commands::ablate_cmd(config.as_ref().unwrap(), &run, jobs, *epochs)
        }
        Command::ExportPlot {
            kind,
            pair,
            times,
            pdf,
        } => commands::export_plot(
            config.as_ref().unwrap(),
            &run,
            kind,
            *pair,
            times,
            pdf.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
