//! Temporary probe for ground-truth-free training behavior.

use odyn_core::oracle::{build_dataset, normalize, DatasetCounts};
use odyn_core::pino::*;
use odyn_core::system::{ParameterSpace, SystemConfig, TimeGrid};
use serde::Deserialize;

#[derive(Deserialize)]
struct T {
    system: SystemConfig,
    space: ParameterSpace,
    grid: TimeGrid,
    train: TrainConfig,
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let n_train: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let alpha: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.5);
    let window: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.125);
    let gn_lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.025);

    let text = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.json"),
    )
    .unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let t: T = serde_json::from_value(json).unwrap();
    let counts = DatasetCounts {
        train: n_train,
        test: 100,
        virtual_: 100,
    };
    let mut ds = build_dataset(&t.system, &t.space, &t.grid, &counts, 1, 2).unwrap();
    normalize(&mut ds).unwrap();
    let mut tc = t.train.clone();
    tc.epochs = epochs;
    tc.jobs = 2;
    tc.gradnorm.alpha = alpha;
    tc.gradnorm.lr = gn_lr;
    tc.loss = LossFlags {
        data: false,
        eq: true,
        dde: true,
        veq: true,
        dde_window: Some(window),
    };
    let en = odyn_core::en::compute_en_weights(&ds, 0.02, 1e6, 11, 1, 2).unwrap();
    let (model, report) = train(&ds, Some(&en), &tc).unwrap();
    for row in report.rows.iter().step_by(10.max(epochs / 20)) {
        println!(
            "ep {:3}: eq {:.3e} dde {:.3e} veq {:.3e} | omega {:.2?} | rLSE {:.1}/{:.1}/{:.1}",
            row.epoch,
            row.loss_eq,
            row.loss_dde,
            row.loss_veq,
            row.omega,
            row.test_rlse_solutions,
            row.test_rlse_deriv1,
            row.test_rlse_deriv2
        );
    }
    let last = report.rows.last().unwrap();
    println!(
        "final: rLSE {:.2}/{:.2}/{:.2}",
        last.test_rlse_solutions, last.test_rlse_deriv1, last.test_rlse_deriv2
    );
    // Per-DOF breakdown.
    let prepared = prepare(&ds, None, &model.arch, None).unwrap();
    let ops = SpectralOps::new(model.arch.n_t);
    let r = evaluate_rlse(&model, &ops, &prepared, &prepared.test, 2).unwrap();
    println!("pooled {:.2}% | per-dof mean {:.2}%", r.pooled.solutions, r.per_dof_mean.solutions);
    // Manual per-DOF numbers.
    let d = model.arch.out_channels;
    let n = model.arch.n_t;
    let mut num = vec![0.0; d];
    let mut den = vec![0.0; d];
    let mut scratch = ops.scratch();
    for pair in &prepared.test {
        let cache = model.forward(&ops, &mut scratch, &pair.input).unwrap();
        let truth = pair.truth_u_n.as_ref().unwrap();
        for ti in 0..n {
            for j in 0..d {
                let diff = cache.output[ti * d + j] - truth[ti * d + j];
                num[j] += diff * diff;
                den[j] += truth[ti * d + j] * truth[ti * d + j];
            }
        }
    }
    for j in 0..d {
        println!(
            "  dof {:18} rLSE {:.1}%",
            ds.labels[j],
            100.0 * (num[j] / den[j]).sqrt()
        );
    }
}
