//! Coupled second-order dynamical systems.
//!
//! A system is `M u'' + C u' + K u = B f(t)` over all DOFs at once: rigid
//! point masses plus the modal coordinates of reduced flexible bodies.
//! Configurations are templates — physical parameters are resolved per sample
//! and the matrices reassembled, so every draw from the parameter space gets
//! its own `SecondOrderSystem`.

mod config;
mod excitation;
mod parameters;

pub use config::{
    build_system, ConnectionConfig, Endpoint, FlexBodyConfig, LoadConfig, MassConfig, ParamValue,
    SystemConfig,
};
pub use excitation::{
    excitation_to_csv, generate_excitation, kanai_tajimi_psd, ExcitationKind, ExcitationSpec,
};
pub use parameters::{
    sample_parameters, Distribution, ParamMap, ParameterSample, ParameterSpace, TimeGrid,
};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;

/// Assembled mass/damping/stiffness system with an excitation map.
#[derive(Debug, Clone)]
pub struct SecondOrderSystem {
    pub n_dof: usize,
    /// Mass matrix, symmetric positive definite.
    pub m: Array2<f64>,
    /// Damping matrix, symmetric.
    pub c: Array2<f64>,
    /// Stiffness matrix, symmetric positive semi-definite.
    pub k: Array2<f64>,
    /// Maps excitation channels to DOF load vectors: column j is the load
    /// pattern of channel j.
    pub force_map: Array2<f64>,
    /// Per-DOF names, rigid DOFs first, then `body.mode_k` entries.
    pub labels: Vec<String>,
    /// Number of leading rigid DOFs.
    pub rigid_count: usize,
    /// (label, dof offset, n_modes) per flexible body, in declaration order.
    pub flex_blocks: Vec<(String, usize, usize)>,
}

/// Equation residuals on a trajectory grid, in equation units.
#[derive(Debug, Clone)]
pub struct ResidualField {
    /// `n_t x n_dof` residual values.
    pub values: Array2<f64>,
}

impl SecondOrderSystem {
    /// Number of excitation channels the force map expects.
    pub fn n_channels(&self) -> usize {
        self.force_map.ncols()
    }

    /// Load vector at one time step: `B f`.
    pub fn load_at(&self, f_row: &[f64], out: &mut [f64]) {
        debug_assert_eq!(f_row.len(), self.n_channels());
        let b = self.force_map.as_slice().expect("standard layout");
        let nc = self.n_channels();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &b[i * nc..(i + 1) * nc];
            let mut acc = 0.0;
            for (bij, fj) in row.iter().zip(f_row.iter()) {
                acc += bij * fj;
            }
            *o = acc;
        }
    }
}

/// Evaluate the equation residual `M u'' + C u' + K u - B f` per time step.
pub fn residual(
    system: &SecondOrderSystem,
    sample: &ParameterSample,
    u: &Array2<f64>,
    du: &Array2<f64>,
    ddu: &Array2<f64>,
) -> Result<ResidualField> {
    let n_dof = system.n_dof;
    let n_t = u.nrows();
    for (name, arr) in [("u", u), ("du", du), ("ddu", ddu)] {
        if arr.nrows() != n_t || arr.ncols() != n_dof {
            return Err(Error::invalid(format!(
                "residual: {name} has shape {:?}, expected ({n_t}, {n_dof})",
                (arr.nrows(), arr.ncols())
            )));
        }
    }
    if sample.f.nrows() != n_t || sample.f.ncols() != system.n_channels() {
        return Err(Error::invalid(format!(
            "residual: excitation has shape {:?}, expected ({n_t}, {})",
            (sample.f.nrows(), sample.f.ncols()),
            system.n_channels()
        )));
    }
    let mut values = Array2::<f64>::zeros((n_t, n_dof));
    let mut acc = vec![0.0; n_dof];
    let mut term = vec![0.0; n_dof];
    for t in 0..n_t {
        let u_row = u.row(t);
        let du_row = du.row(t);
        let ddu_row = ddu.row(t);
        linalg::matvec(&system.m, ddu_row.as_slice().unwrap(), &mut acc);
        linalg::matvec(&system.c, du_row.as_slice().unwrap(), &mut term);
        for (a, b) in acc.iter_mut().zip(term.iter()) {
            *a += b;
        }
        linalg::matvec(&system.k, u_row.as_slice().unwrap(), &mut term);
        for (a, b) in acc.iter_mut().zip(term.iter()) {
            *a += b;
        }
        system.load_at(sample.f.row(t).as_slice().unwrap(), &mut term);
        for (j, (a, b)) in acc.iter().zip(term.iter()).enumerate() {
            values[[t, j]] = a - b;
        }
    }
    Ok(ResidualField { values })
}

/// Residual for externally supplied force rows (no `ParameterSample` wrapper).
pub fn residual_with_forces(
    system: &SecondOrderSystem,
    f: &Array2<f64>,
    u: &Array2<f64>,
    du: &Array2<f64>,
    ddu: &Array2<f64>,
) -> Result<ResidualField> {
    let sample = ParameterSample {
        p: Array1::zeros(0),
        f: f.clone(),
    };
    residual(system, &sample, u, du, ddu)
}

#[cfg(test)]
mod tests;
