use super::*;
use ndarray::array;

fn grounded_sdof(k: f64, c: f64) -> SystemConfig {
    SystemConfig {
        masses: vec![MassConfig {
            label: "m".into(),
            mass: ParamValue::Const(1.0),
            dofs: 1,
        }],
        flexible: vec![],
        connections: vec![ConnectionConfig {
            from: Endpoint::Mass { label: "m".into(), dof: 0 },
            to: Endpoint::Ground,
            stiffness: ParamValue::Const(k),
            damping: ParamValue::Const(c),
        }],
        loads: vec![LoadConfig {
            endpoint: Endpoint::Mass { label: "m".into(), dof: 0 },
            scale: 1.0,
            channel: None,
        }],
    }
}

#[test]
fn sdof_assembly() {
    let sys = build_system(&grounded_sdof(4.0, 0.0), &ParamMap::new()).unwrap();
    assert_eq!(sys.n_dof, 1);
    assert_eq!(sys.m[[0, 0]], 1.0);
    assert_eq!(sys.k[[0, 0]], 4.0);
    assert_eq!(sys.c[[0, 0]], 0.0);
    assert_eq!(sys.force_map[[0, 0]], 1.0);
}

#[test]
fn two_mass_chain_is_singular_but_psd() {
    let config = SystemConfig {
        masses: vec![
            MassConfig {
                label: "a".into(),
                mass: ParamValue::Const(1.0),
                dofs: 1,
            },
            MassConfig {
                label: "b".into(),
                mass: ParamValue::Const(1.0),
                dofs: 1,
            },
        ],
        flexible: vec![],
        connections: vec![ConnectionConfig {
            from: Endpoint::Mass { label: "a".into(), dof: 0 },
            to: Endpoint::Mass { label: "b".into(), dof: 0 },
            stiffness: ParamValue::Const(1.0),
            damping: ParamValue::Const(0.0),
        }],
        loads: vec![],
    };
    let sys = build_system(&config, &ParamMap::new()).unwrap();
    let expect = array![[1.0, -1.0], [-1.0, 1.0]];
    for (a, b) in sys.k.iter().zip(expect.iter()) {
        assert_eq!(a, b);
    }
    // Singular (rigid-body translation) but positive semi-definite.
    assert!((sys.k[[0, 0]] * sys.k[[1, 1]] - sys.k[[0, 1]] * sys.k[[1, 0]]).abs() < 1e-15);
}

#[test]
fn toy_scale_dof_count() {
    // Six marbles with three rigid DOFs each plus reduced flexible bodies
    // of 15 and 10 modes: 18 + 25 = 43 DOFs.
    let mut masses = Vec::new();
    for i in 0..6 {
        masses.push(MassConfig {
            label: format!("marble_{i}"),
            mass: ParamValue::Const(1.0),
            dofs: 3,
        });
    }
    let config = SystemConfig {
        masses,
        flexible: vec![
            FlexBodyConfig::EulerBeam {
                label: "upper".into(),
                mass_per_length: ParamValue::Const(10.0),
                length: 4.0,
                ei: ParamValue::Const(1000.0),
                n_modes: 15,
                alpha: ParamValue::Const(0.0),
                beta: ParamValue::Const(0.0),
                attach: vec![1.0, 2.0, 3.0],
            },
            FlexBodyConfig::EulerBeam {
                label: "lower".into(),
                mass_per_length: ParamValue::Const(10.0),
                length: 4.0,
                ei: ParamValue::Const(1000.0),
                n_modes: 10,
                alpha: ParamValue::Const(0.0),
                beta: ParamValue::Const(0.0),
                attach: vec![1.0, 2.0, 3.0],
            },
        ],
        connections: vec![],
        loads: vec![],
    };
    let sys = build_system(&config, &ParamMap::new()).unwrap();
    assert_eq!(sys.n_dof, 43);
    assert_eq!(sys.rigid_count, 18);
    assert_eq!(sys.flex_blocks[0], ("upper".to_string(), 18, 15));
    assert_eq!(sys.flex_blocks[1], ("lower".to_string(), 18 + 15, 10));
    assert_eq!(sys.labels[0], "marble_0.x");
    assert_eq!(sys.labels[18], "upper.mode_1");
}

#[test]
fn assembly_errors() {
    let mut bad_mass = grounded_sdof(1.0, 0.0);
    bad_mass.masses[0].mass = ParamValue::Const(-2.0);
    assert!(build_system(&bad_mass, &ParamMap::new()).is_err());

    let mut bad_ref = grounded_sdof(1.0, 0.0);
    bad_ref.connections[0].from = Endpoint::Mass {
        label: "nope".into(),
        dof: 0,
    };
    assert!(build_system(&bad_ref, &ParamMap::new()).is_err());

    let mut missing_param = grounded_sdof(1.0, 0.0);
    missing_param.masses[0].mass = ParamValue::Param("m0".into());
    assert!(build_system(&missing_param, &ParamMap::new()).is_err());
    let mut params = ParamMap::new();
    params.insert("m0".into(), 2.5);
    let sys = build_system(&missing_param, &params).unwrap();
    assert_eq!(sys.m[[0, 0]], 2.5);
}

#[test]
fn mass_matrix_is_positive_definite() {
    // x^T M x > 0 for 100 random nonzero x on a mixed rigid/flex system.
    use crate::rng::Rng;
    let config = SystemConfig {
        masses: vec![
            MassConfig {
                label: "a".into(),
                mass: ParamValue::Const(2.0),
                dofs: 1,
            },
            MassConfig {
                label: "b".into(),
                mass: ParamValue::Const(0.7),
                dofs: 1,
            },
        ],
        flexible: vec![FlexBodyConfig::EulerBeam {
            label: "beam".into(),
            mass_per_length: ParamValue::Const(5.0),
            length: 2.0,
            ei: ParamValue::Const(100.0),
            n_modes: 4,
            alpha: ParamValue::Const(0.1),
            beta: ParamValue::Const(0.001),
            attach: vec![0.5, 1.0],
        }],
        connections: vec![
            ConnectionConfig {
                from: Endpoint::Mass { label: "a".into(), dof: 0 },
                to: Endpoint::Flex {
                    body: "beam".into(),
                    point: 0,
                },
                stiffness: ParamValue::Const(50.0),
                damping: ParamValue::Const(0.5),
            },
            ConnectionConfig {
                from: Endpoint::Mass { label: "b".into(), dof: 0 },
                to: Endpoint::Flex {
                    body: "beam".into(),
                    point: 1,
                },
                stiffness: ParamValue::Const(30.0),
                damping: ParamValue::Const(0.2),
            },
        ],
        loads: vec![],
    };
    let sys = build_system(&config, &ParamMap::new()).unwrap();
    let mut rng = Rng::new(99);
    for _ in 0..100 {
        let x: Vec<f64> = (0..sys.n_dof).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let mut mx = vec![0.0; sys.n_dof];
        crate::linalg::matvec(&sys.m, &x, &mut mx);
        let q: f64 = x.iter().zip(mx.iter()).map(|(a, b)| a * b).sum();
        assert!(q > 0.0);
    }
    // Symmetry of all three matrices.
    for i in 0..sys.n_dof {
        for j in 0..sys.n_dof {
            assert!((sys.k[[i, j]] - sys.k[[j, i]]).abs() < 1e-12);
            assert!((sys.c[[i, j]] - sys.c[[j, i]]).abs() < 1e-12);
            assert!((sys.m[[i, j]] - sys.m[[j, i]]).abs() < 1e-12);
        }
    }
}

#[test]
fn fixed_space_sampling_is_degenerate() {
    let space = ParameterSpace {
        params: vec![
            ("k".into(), Distribution::Fixed { value: 3.0 }),
            ("m".into(), Distribution::Fixed { value: 1.5 }),
        ],
        excitation: ExcitationSpec {
            kind: ExcitationKind::Zero,
            band: [0.0, 0.0],
            channels: 1,
        },
    };
    let grid = TimeGrid::new(0.01, 1.0).unwrap();
    for seed in [1u64, 7, 123456] {
        let s = sample_parameters(&space, &grid, seed).unwrap();
        assert_eq!(s.p.to_vec(), vec![3.0, 1.5]);
    }
}

#[test]
fn sampling_is_deterministic_and_unbiased() {
    let space = ParameterSpace {
        params: vec![("x".into(), Distribution::Uniform { lo: 1.0, hi: 2.0 })],
        excitation: ExcitationSpec {
            kind: ExcitationKind::Zero,
            band: [0.0, 0.0],
            channels: 1,
        },
    };
    let grid = TimeGrid::new(0.1, 0.5).unwrap();
    let a = sample_parameters(&space, &grid, 42).unwrap();
    let b = sample_parameters(&space, &grid, 42).unwrap();
    assert_eq!(a.p[0].to_bits(), b.p[0].to_bits());

    let n = 10_000;
    let mean: f64 = (0..n)
        .map(|i| sample_parameters(&space, &grid, i as u64).unwrap().p[0])
        .sum::<f64>()
        / n as f64;
    // Law of large numbers at 3 sigma: sigma = 1/sqrt(12)/sqrt(n) ~ 0.0029.
    assert!((1.49..=1.51).contains(&mean), "mean {mean}");
}

#[test]
fn zero_psd_gives_zero_signal() {
    let spec = ExcitationSpec {
        kind: ExcitationKind::BandNoise { psd: 0.0 },
        band: [1.0, 10.0],
        channels: 2,
    };
    let grid = TimeGrid::new(0.01, 2.0).unwrap();
    let f = generate_excitation(&spec, &grid, 5).unwrap();
    assert!(f.iter().all(|v| *v == 0.0));
}

#[test]
fn band_noise_mean_is_near_zero() {
    let spec = ExcitationSpec {
        kind: ExcitationKind::BandNoise { psd: 0.5 },
        band: [1.0, 50.0],
        channels: 1,
    };
    let grid = TimeGrid::new(0.005, 2.0).unwrap();
    let f = generate_excitation(&spec, &grid, 11).unwrap();
    let n_t = grid.n_t() as f64;
    let mean = f.column(0).sum() / n_t;
    let var = f.column(0).iter().map(|v| v * v).sum::<f64>() / n_t;
    let sigma = var.sqrt();
    assert!(mean.abs() < 3.0 * sigma / n_t.sqrt(), "mean {mean}");
}

#[test]
fn excitation_is_pure() {
    let spec = ExcitationSpec {
        kind: ExcitationKind::KanaiTajimi {
            omega_g: 15.0,
            zeta_g: 0.6,
            s0: 1.0,
        },
        band: [0.25, 20.0],
        channels: 3,
    };
    let grid = TimeGrid::new(0.01, 4.0).unwrap();
    let a = generate_excitation(&spec, &grid, 77).unwrap();
    let b = generate_excitation(&spec, &grid, 77).unwrap();
    for (x, y) in a.iter().zip(b.iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    let c = generate_excitation(&spec, &grid, 78).unwrap();
    assert!(a.iter().zip(c.iter()).any(|(x, y)| x != y));
}

#[test]
fn nyquist_violation_rejected() {
    let spec = ExcitationSpec {
        kind: ExcitationKind::BandNoise { psd: 1.0 },
        band: [1.0, 60.0],
        channels: 1,
    };
    let grid = TimeGrid::new(0.01, 1.0).unwrap(); // Nyquist 50 Hz
    assert!(generate_excitation(&spec, &grid, 0).is_err());
}

/// Averaged periodogram over seeds as an independent estimate of the
/// synthesized spectrum; uses a naive DFT on the periodic part of the record.
fn averaged_periodogram(spec: &ExcitationSpec, grid: &TimeGrid, seeds: u64) -> Vec<f64> {
    let n = grid.n_t() - 1; // drop the duplicated endpoint
    let fs = 1.0 / grid.dt;
    let mut avg = vec![0.0; n / 2];
    for seed in 0..seeds {
        let f = generate_excitation(spec, grid, seed).unwrap();
        for (k, a) in avg.iter_mut().enumerate().take(n / 2).skip(1) {
            let mut re = 0.0;
            let mut im = 0.0;
            for j in 0..n {
                let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                re += f[[j, 0]] * ang.cos();
                im += f[[j, 0]] * ang.sin();
            }
            *a += 2.0 * (re * re + im * im) / (fs * n as f64);
        }
    }
    for a in avg.iter_mut() {
        *a /= seeds as f64;
    }
    avg
}

#[test]
fn kanai_tajimi_periodogram_matches_target() {
    let spec = ExcitationSpec {
        kind: ExcitationKind::KanaiTajimi {
            omega_g: 15.0,
            zeta_g: 0.6,
            s0: 1.0,
        },
        band: [1.0, 20.0],
        channels: 1,
    };
    let grid = TimeGrid::new(0.01, 2.0).unwrap();
    let psd = averaged_periodogram(&spec, &grid, 200);
    let df = 1.0 / grid.t_total;
    let mut checked = 0;
    for (k, p) in psd.iter().enumerate().skip(1) {
        let f_k = k as f64 * df;
        if f_k < spec.band[0] + df || f_k > spec.band[1] - df {
            continue;
        }
        let target = spec.psd(f_k);
        assert!(
            (p - target).abs() <= 0.15 * target,
            "bin {k} at {f_k} Hz: periodogram {p}, target {target}"
        );
        checked += 1;
    }
    assert!(checked > 10);
}

#[test]
fn residual_zero_state() {
    let sys = build_system(&grounded_sdof(4.0, 0.5), &ParamMap::new()).unwrap();
    let grid = TimeGrid::new(0.01, 0.5).unwrap();
    let n_t = grid.n_t();
    let z = Array2::<f64>::zeros((n_t, 1));
    let sample = ParameterSample {
        p: ndarray::Array1::zeros(0),
        f: Array2::zeros((n_t, 1)),
    };
    let r = residual(&sys, &sample, &z, &z, &z).unwrap();
    assert!(r.values.iter().all(|v| *v == 0.0));
}

#[test]
fn residual_vanishes_on_analytic_free_vibration() {
    // Undamped SDOF with omega^2 = k/m: u = cos(w t) with exact derivatives
    // satisfies the equation identically.
    let k = 4.0;
    let sys = build_system(&grounded_sdof(k, 0.0), &ParamMap::new()).unwrap();
    let w = k.sqrt();
    let grid = TimeGrid::new(0.01, 2.0).unwrap();
    let n_t = grid.n_t();
    let mut u = Array2::<f64>::zeros((n_t, 1));
    let mut du = Array2::<f64>::zeros((n_t, 1));
    let mut ddu = Array2::<f64>::zeros((n_t, 1));
    for (i, t) in grid.times().iter().enumerate() {
        u[[i, 0]] = (w * t).cos();
        du[[i, 0]] = -w * (w * t).sin();
        ddu[[i, 0]] = -w * w * (w * t).cos();
    }
    let sample = ParameterSample {
        p: ndarray::Array1::zeros(0),
        f: Array2::zeros((n_t, 1)),
    };
    let r = residual(&sys, &sample, &u, &du, &ddu).unwrap();
    let max = r.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(max < 1e-12, "max residual {max}");
}

#[test]
fn residual_is_linear_in_state() {
    // With the force subtracted once, the operator is linear in (u, du, ddu).
    use crate::rng::Rng;
    let sys = build_system(&grounded_sdof(4.0, 0.3), &ParamMap::new()).unwrap();
    let n_t = 20;
    let mut rng = Rng::new(3);
    let mut mk = |scale: f64| {
        let mut arr = Array2::<f64>::zeros((n_t, 1));
        for v in arr.iter_mut() {
            *v = rng.uniform_in(-scale, scale);
        }
        arr
    };
    let (u1, du1, ddu1) = (mk(1.0), mk(2.0), mk(4.0));
    let (u2, du2, ddu2) = (mk(1.0), mk(2.0), mk(4.0));
    let zero_f = ParameterSample {
        p: ndarray::Array1::zeros(0),
        f: Array2::zeros((n_t, 1)),
    };
    let (a, b) = (2.5, -1.25);
    let r1 = residual(&sys, &zero_f, &u1, &du1, &ddu1).unwrap();
    let r2 = residual(&sys, &zero_f, &u2, &du2, &ddu2).unwrap();
    let comb_u = &u1 * a + &u2 * b;
    let comb_du = &du1 * a + &du2 * b;
    let comb_ddu = &ddu1 * a + &ddu2 * b;
    let rc = residual(&sys, &zero_f, &comb_u, &comb_du, &comb_ddu).unwrap();
    for ((x, y), z) in r1.values.iter().zip(r2.values.iter()).zip(rc.values.iter()) {
        assert!((a * x + b * y - z).abs() < 1e-10);
    }
}

#[test]
fn residual_shape_mismatch_rejected() {
    let sys = build_system(&grounded_sdof(1.0, 0.0), &ParamMap::new()).unwrap();
    let sample = ParameterSample {
        p: ndarray::Array1::zeros(0),
        f: Array2::zeros((10, 1)),
    };
    let u = Array2::<f64>::zeros((10, 1));
    let bad = Array2::<f64>::zeros((9, 1));
    assert!(residual(&sys, &sample, &u, &bad, &u).is_err());
}
