//! Browser demo: interactive excitation synthesis, coupled-system response
//! simulation and response-density evolution, compiled to WebAssembly.
//!
//! Exposed operations return flat `Vec<f64>` buffers with layouts documented
//! per function; the page in `www/` drives them with sliders and draws the
//! results on canvases. Everything also compiles and runs natively so the
//! exports are covered by ordinary tests.

use wasm_bindgen::prelude::wasm_bindgen;

use odyn_core::oracle::integrate_newmark;
use odyn_core::system::{
    build_system, generate_excitation, ConnectionConfig, Endpoint, ExcitationKind,
    ExcitationSpec, LoadConfig, MassConfig, ParamMap, ParamValue, SystemConfig, TimeGrid,
};
use odyn_core::uq::{evolve_pdf, XGrid};

fn kt_spec(omega_g: f64, zeta_g: f64, s0: f64, f_lo: f64, f_hi: f64) -> ExcitationSpec {
    ExcitationSpec {
        kind: ExcitationKind::KanaiTajimi { omega_g, zeta_g, s0 },
        band: [f_lo, f_hi],
        channels: 1,
    }
}

fn sdof_config(m: f64, k: f64, c: f64) -> SystemConfig {
    SystemConfig {
        masses: vec![MassConfig {
            label: "m".into(),
            mass: ParamValue::Const(m),
            dofs: 1,
        }],
        flexible: vec![],
        connections: vec![ConnectionConfig {
            from: Endpoint::Mass {
                label: "m".into(),
                dof: 0,
            },
            to: Endpoint::Ground,
            stiffness: ParamValue::Const(k),
            damping: ParamValue::Const(c),
        }],
        loads: vec![LoadConfig {
            endpoint: Endpoint::Mass {
                label: "m".into(),
                dof: 0,
            },
            scale: 1.0,
            channel: None,
        }],
    }
}

/// Kanai-Tajimi ground-motion record.
///
/// Returns `n_t` samples; empty on invalid input (band above Nyquist, bad
/// spectrum parameters).
#[wasm_bindgen]
pub fn excitation_series(
    omega_g: f64,
    zeta_g: f64,
    s0: f64,
    f_lo: f64,
    f_hi: f64,
    dt: f64,
    t_total: f64,
    seed: u32,
) -> Vec<f64> {
    let Ok(grid) = TimeGrid::new(dt, t_total) else {
        return Vec::new();
    };
    let spec = kt_spec(omega_g, zeta_g, s0, f_lo, f_hi);
    match generate_excitation(&spec, &grid, seed as u64) {
        Ok(f) => f.column(0).to_vec(),
        Err(_) => Vec::new(),
    }
}

/// One-sided target spectrum sampled on the synthesis bins, as
/// `[f_0, G_0, f_1, G_1, ...]` pairs for overlay plots.
#[wasm_bindgen]
pub fn excitation_psd(
    omega_g: f64,
    zeta_g: f64,
    s0: f64,
    f_lo: f64,
    f_hi: f64,
    t_total: f64,
) -> Vec<f64> {
    let spec = kt_spec(omega_g, zeta_g, s0, f_lo, f_hi);
    let df = 1.0 / t_total;
    let mut out = Vec::new();
    let mut k = 1;
    loop {
        let f = k as f64 * df;
        if f > f_hi {
            break;
        }
        out.push(f);
        out.push(spec.psd(f));
        k += 1;
    }
    out
}

/// Grounded oscillator response under a Kanai-Tajimi force record.
///
/// Returns `[u | du | ddu]`, three blocks of `n_t` values each; empty on
/// invalid input.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_response(
    m: f64,
    k: f64,
    c: f64,
    force_scale: f64,
    omega_g: f64,
    zeta_g: f64,
    s0: f64,
    dt: f64,
    t_total: f64,
    seed: u32,
) -> Vec<f64> {
    let Ok(grid) = TimeGrid::new(dt, t_total) else {
        return Vec::new();
    };
    let f_hi = (0.45 / dt).min(12.0);
    let spec = kt_spec(omega_g, zeta_g, s0, 0.2, f_hi);
    let Ok(mut f) = generate_excitation(&spec, &grid, seed as u64) else {
        return Vec::new();
    };
    f.mapv_inplace(|v| v * force_scale);
    let Ok(system) = build_system(&sdof_config(m, k, c), &ParamMap::new()) else {
        return Vec::new();
    };
    match integrate_newmark(&system, &f, &grid, None, None) {
        Ok(traj) => {
            let n = traj.n_t();
            let mut out = Vec::with_capacity(3 * n);
            out.extend(traj.u.column(0).iter());
            out.extend(traj.du.column(0).iter());
            out.extend(traj.ddu.column(0).iter());
            out
        }
        Err(_) => Vec::new(),
    }
}

/// Response-density evolution for an oscillator with uncertain stiffness
/// under a fixed sinusoidal load.
///
/// Stiffness takes `n_sel` centered lattice values in `[k_lo, k_hi]`; each
/// case's displacement density rides the convection solver and the cases
/// are superposed. Returns `[x_min, dx, n_slices, n_x, p(0,0), ...]` with
/// the density flattened slice-major; empty on invalid input.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn density_evolution(
    m: f64,
    k_lo: f64,
    k_hi: f64,
    zeta: f64,
    force_amp: f64,
    force_hz: f64,
    n_sel: u32,
    n_x: u32,
    dt: f64,
    t_total: f64,
) -> Vec<f64> {
    let Ok(grid) = TimeGrid::new(dt, t_total) else {
        return Vec::new();
    };
    if !(k_lo > 0.0 && k_hi > k_lo && m > 0.0 && n_sel >= 1 && n_x >= 8) {
        return Vec::new();
    }
    let n_t = grid.n_t();
    let spec = ExcitationSpec {
        kind: ExcitationKind::Sine {
            amplitude: force_amp,
            freq_hz: force_hz,
            phase: 0.0,
        },
        band: [0.0, 0.0],
        channels: 1,
    };
    let Ok(f) = generate_excitation(&spec, &grid, 0) else {
        return Vec::new();
    };

    // Integrate every representative case, tracking the response range.
    let mut cases = Vec::with_capacity(n_sel as usize);
    let mut x_absmax = 0.0f64;
    let mut v_absmax = 0.0f64;
    for q in 0..n_sel {
        let k = k_lo + (k_hi - k_lo) * ((q as f64 + 0.5) / n_sel as f64);
        let c = 2.0 * zeta * (k * m).sqrt();
        let Ok(system) = build_system(&sdof_config(m, k, c), &ParamMap::new()) else {
            return Vec::new();
        };
        let Ok(traj) = integrate_newmark(&system, &f, &grid, None, None) else {
            return Vec::new();
        };
        for t in 0..n_t {
            x_absmax = x_absmax.max(traj.u[[t, 0]].abs());
            v_absmax = v_absmax.max(traj.du[[t, 0]].abs());
        }
        cases.push(traj.du.column(0).to_vec());
    }
    let span = (x_absmax * 1.3).max(1e-9);
    let xg = XGrid {
        x_min: -span,
        x_max: span,
        n_x: n_x as usize,
    };
    // Substep to respect the CFL bound.
    let dx = xg.dx();
    let dt_pde = (0.8 * dx / v_absmax.max(1e-12)).min(dt);

    let mut acc: Option<ndarray::Array2<f64>> = None;
    for velocity in &cases {
        let Ok(one) = evolve_pdf(velocity, dt, 0.0, &xg, dt_pde) else {
            return Vec::new();
        };
        match &mut acc {
            None => acc = Some(one.p),
            Some(a) => *a += &one.p,
        }
    }
    let mut p = acc.unwrap();
    p /= n_sel as f64;

    let mut out = Vec::with_capacity(4 + n_t * xg.n_x);
    out.push(xg.x_min);
    out.push(dx);
    out.push(n_t as f64);
    out.push(xg.n_x as f64);
    out.extend(p.iter());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excitation_is_seeded_and_sized() {
        let a = excitation_series(12.0, 0.4, 1.0, 0.5, 8.0, 0.01, 2.0, 7);
        let b = excitation_series(12.0, 0.4, 1.0, 0.5, 8.0, 0.01, 2.0, 7);
        assert_eq!(a.len(), 201);
        assert_eq!(a, b);
        let c = excitation_series(12.0, 0.4, 1.0, 0.5, 8.0, 0.01, 2.0, 8);
        assert_ne!(a, c);
        // A band above Nyquist is rejected, not panicked on.
        assert!(excitation_series(12.0, 0.4, 1.0, 0.5, 80.0, 0.01, 2.0, 7).is_empty());
    }

    #[test]
    fn psd_pairs_cover_the_band() {
        let psd = excitation_psd(12.0, 0.4, 1.0, 0.5, 8.0, 2.0);
        assert!(psd.len() >= 2);
        assert_eq!(psd.len() % 2, 0);
        for pair in psd.chunks(2) {
            assert!(pair[0] <= 8.0 + 1e-12);
            assert!(pair[1] >= 0.0);
        }
    }

    #[test]
    fn simulation_returns_three_blocks() {
        let out = simulate_response(2.0, 200.0, 3.0, 5.0, 12.0, 0.4, 1.0, 0.01, 2.0, 3);
        assert_eq!(out.len(), 3 * 201);
        assert!(out.iter().all(|v| v.is_finite()));
        // Zero initial state.
        assert_eq!(out[0], 0.0);
        assert_eq!(out[201], 0.0);
        // Response is nontrivial.
        assert!(out.iter().any(|v| v.abs() > 0.0));
    }

    #[test]
    fn density_grid_has_documented_header() {
        let out = density_evolution(1.0, 80.0, 120.0, 0.1, 10.0, 1.2, 8, 64, 0.01, 1.0);
        assert!(!out.is_empty());
        let n_slices = out[2] as usize;
        let n_x = out[3] as usize;
        assert_eq!(out.len(), 4 + n_slices * n_x);
        let dx = out[1];
        // Every slice stays a probability density.
        for s in 0..n_slices {
            let mass: f64 = out[4 + s * n_x..4 + (s + 1) * n_x].iter().sum::<f64>() * dx;
            assert!((mass - 1.0).abs() < 1e-2, "slice {s} mass {mass}");
        }
    }
}
