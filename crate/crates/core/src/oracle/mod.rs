//! Ground-truth generation: time integration, numerical differentiation,
//! dataset construction and normalization.

mod dataset;
mod diff;

pub use dataset::{
    build_dataset, load_dataset, normalize, save_dataset, ChannelStats, Dataset, DatasetCounts,
    NormStats, Pair,
};
pub use diff::{finite_difference, finite_difference_adjoint};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::LuFactor;
use crate::system::{SecondOrderSystem, TimeGrid};

/// Time-gridded solution with first and second derivatives.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub u: Array2<f64>,
    pub du: Array2<f64>,
    pub ddu: Array2<f64>,
}

impl Trajectory {
    pub fn n_t(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_dof(&self) -> usize {
        self.u.ncols()
    }
}

/// Newmark integration with the average-acceleration rule (beta = 1/4,
/// gamma = 1/2), unconditionally stable for linear systems.
///
/// The initial acceleration is solved from the equation of motion, and the
/// returned derivatives are the scheme's own velocity/acceleration states,
/// so the equilibrium equation holds at every step to solver precision.
pub fn integrate_newmark(
    system: &SecondOrderSystem,
    f: &Array2<f64>,
    grid: &TimeGrid,
    u0: Option<&Array1<f64>>,
    v0: Option<&Array1<f64>>,
) -> Result<Trajectory> {
    let n = system.n_dof;
    let n_t = grid.n_t();
    if f.nrows() != n_t || f.ncols() != system.n_channels() {
        return Err(Error::invalid(format!(
            "excitation shape {:?} does not match grid {n_t} x {} channels",
            (f.nrows(), f.ncols()),
            system.n_channels()
        )));
    }
    let dt = grid.dt;
    let (beta, gamma) = (0.25, 0.5);

    let mut u = Array2::<f64>::zeros((n_t, n));
    let mut v = Array2::<f64>::zeros((n_t, n));
    let mut a = Array2::<f64>::zeros((n_t, n));
    if let Some(u0) = u0 {
        if u0.len() != n {
            return Err(Error::Dimension {
                context: "integrate_newmark u0",
                expected: n,
                got: u0.len(),
            });
        }
        u.row_mut(0).assign(u0);
    }
    if let Some(v0) = v0 {
        if v0.len() != n {
            return Err(Error::Dimension {
                context: "integrate_newmark v0",
                expected: n,
                got: v0.len(),
            });
        }
        v.row_mut(0).assign(v0);
    }

    // a0 from M a0 = B f(0) - C v0 - K u0.
    let m_lu = LuFactor::new(&system.m)?;
    let mut rhs = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    system.load_at(f.row(0).as_slice().unwrap(), &mut rhs);
    crate::linalg::matvec(&system.c, v.row(0).as_slice().unwrap(), &mut tmp);
    for (r, t) in rhs.iter_mut().zip(tmp.iter()) {
        *r -= t;
    }
    crate::linalg::matvec(&system.k, u.row(0).as_slice().unwrap(), &mut tmp);
    for (r, t) in rhs.iter_mut().zip(tmp.iter()) {
        *r -= t;
    }
    let a0 = m_lu.solve(&Array1::from(rhs.clone()));
    a.row_mut(0).assign(&a0);

    // Effective stiffness, factored once.
    let c0 = 1.0 / (beta * dt * dt);
    let c1 = gamma / (beta * dt);
    let c2 = 1.0 / (beta * dt);
    let c3 = 1.0 / (2.0 * beta) - 1.0;
    let c4 = gamma / beta - 1.0;
    let c5 = dt * (gamma / (2.0 * beta) - 1.0);
    let mut k_eff = system.k.clone();
    k_eff.scaled_add(c0, &system.m);
    k_eff.scaled_add(c1, &system.c);
    let k_lu = LuFactor::new(&k_eff)
        .map_err(|_| Error::invalid("singular effective stiffness in Newmark step"))?;

    let mut m_term = vec![0.0; n];
    let mut c_term = vec![0.0; n];
    for step in 1..n_t {
        let (u_n, v_n, a_n) = (
            u.row(step - 1).to_owned(),
            v.row(step - 1).to_owned(),
            a.row(step - 1).to_owned(),
        );
        system.load_at(f.row(step).as_slice().unwrap(), &mut rhs);
        for i in 0..n {
            tmp[i] = c0 * u_n[i] + c2 * v_n[i] + c3 * a_n[i];
        }
        crate::linalg::matvec(&system.m, &tmp, &mut m_term);
        for i in 0..n {
            tmp[i] = c1 * u_n[i] + c4 * v_n[i] + c5 * a_n[i];
        }
        crate::linalg::matvec(&system.c, &tmp, &mut c_term);
        for i in 0..n {
            rhs[i] += m_term[i] + c_term[i];
        }
        let u_next = k_lu.solve(&Array1::from(rhs.clone()));
        for i in 0..n {
            let a_next = c0 * (u_next[i] - u_n[i]) - c2 * v_n[i] - c3 * a_n[i];
            let v_next = v_n[i] + dt * ((1.0 - gamma) * a_n[i] + gamma * a_next);
            u[[step, i]] = u_next[i];
            v[[step, i]] = v_next;
            a[[step, i]] = a_next;
        }
    }
    Ok(Trajectory {
        dt,
        u,
        du: v,
        ddu: a,
    })
}
