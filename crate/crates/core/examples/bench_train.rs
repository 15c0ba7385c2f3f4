//! Throughput probe: builds the bundled coupled-system dataset and times a
//! few training epochs.
//!
//! Run with `cargo run --release -p odyn-core --example bench_train [epochs]`.

use odyn_core::en::compute_en_weights;
use odyn_core::oracle::{build_dataset, normalize, DatasetCounts};
use odyn_core::pino::{train, LossFlags, TrainConfig};
use odyn_core::system::{ParameterSpace, SystemConfig, TimeGrid};
use serde::Deserialize;

#[derive(Deserialize)]
struct BenchConfig {
    system: SystemConfig,
    space: ParameterSpace,
    grid: TimeGrid,
    dataset: DatasetSection,
    train: TrainConfig,
}

#[derive(Deserialize)]
struct DatasetSection {
    counts: DatasetCounts,
    master_seed: u64,
}

fn main() {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let text = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.json"),
    )
    .expect("config");
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let cfg: BenchConfig = serde_json::from_value(json).unwrap();

    let t0 = std::time::Instant::now();
    let mut ds = build_dataset(
        &cfg.system,
        &cfg.space,
        &cfg.grid,
        &cfg.dataset.counts,
        cfg.dataset.master_seed,
        2,
    )
    .unwrap();
    normalize(&mut ds).unwrap();
    println!(
        "dataset: {} train / {} test / {} virtual, n_t = {}, n_dof = {} ({:.2} s)",
        ds.train.len(),
        ds.test.len(),
        ds.virtuals.len(),
        ds.n_t(),
        ds.n_dof(),
        t0.elapsed().as_secs_f64()
    );

    let t1 = std::time::Instant::now();
    let en = compute_en_weights(&ds, 0.02, 1e6, 11, 1, 2).unwrap();
    println!("en weights: {:.2} s", t1.elapsed().as_secs_f64());
    let med = en.median_lambda();
    println!("median lambda per ODE: {med:?}");

    let mut tc = cfg.train.clone();
    tc.epochs = epochs;
    tc.loss = LossFlags {
        data: true,
        eq: true,
        dde: true,
        veq: false,
        dde_window: Some(0.125),
    };
    let t2 = std::time::Instant::now();
    let (_, report) = train(&ds, Some(&en), &tc).unwrap();
    let dt = t2.elapsed().as_secs_f64();
    println!(
        "{epochs} epochs in {:.1} s -> {:.2} s/epoch, projected 300 epochs: {:.1} min",
        dt,
        dt / epochs as f64,
        dt / epochs as f64 * 300.0 / 60.0
    );
    for row in &report.rows {
        println!(
            "epoch {:3}: data {:.4} eq {:.4e} dde {:.4} | rLSE {:.2}/{:.2}/{:.2} | omega {:.2?}",
            row.epoch,
            row.loss_data,
            row.loss_eq,
            row.loss_dde,
            row.test_rlse_solutions,
            row.test_rlse_deriv1,
            row.test_rlse_deriv2,
            row.omega
        );
    }
}
