//! Second-order finite differences in time, with the matching adjoint.
//!
//! Central stencils on interior points, one-sided second-order stencils at
//! both ends. The adjoint is the exact transpose of the same stencils; the
//! training loop differentiates through this operator, so the two must stay
//! in lockstep.

use ndarray::Array2;

use crate::error::{Error, Result};

/// First and second time derivatives of `u` (`n_t x n_dof`).
pub fn finite_difference(u: &Array2<f64>, dt: f64) -> Result<(Array2<f64>, Array2<f64>)> {
    let n_t = u.nrows();
    let n_dof = u.ncols();
    if n_t < 3 {
        return Err(Error::invalid("finite_difference needs n_t >= 3"));
    }
    let mut du = Array2::<f64>::zeros((n_t, n_dof));
    let mut ddu = Array2::<f64>::zeros((n_t, n_dof));
    let inv2dt = 1.0 / (2.0 * dt);
    let invdt2 = 1.0 / (dt * dt);
    for j in 0..n_dof {
        for t in 1..n_t - 1 {
            du[[t, j]] = (u[[t + 1, j]] - u[[t - 1, j]]) * inv2dt;
            ddu[[t, j]] = (u[[t + 1, j]] - 2.0 * u[[t, j]] + u[[t - 1, j]]) * invdt2;
        }
        du[[0, j]] = (-3.0 * u[[0, j]] + 4.0 * u[[1, j]] - u[[2, j]]) * inv2dt;
        du[[n_t - 1, j]] =
            (3.0 * u[[n_t - 1, j]] - 4.0 * u[[n_t - 2, j]] + u[[n_t - 3, j]]) * inv2dt;
        if n_t >= 4 {
            ddu[[0, j]] =
                (2.0 * u[[0, j]] - 5.0 * u[[1, j]] + 4.0 * u[[2, j]] - u[[3, j]]) * invdt2;
            ddu[[n_t - 1, j]] = (2.0 * u[[n_t - 1, j]] - 5.0 * u[[n_t - 2, j]]
                + 4.0 * u[[n_t - 3, j]]
                - u[[n_t - 4, j]])
                * invdt2;
        } else {
            // Three points: copy the single central value, exact on quadratics.
            ddu[[0, j]] = ddu[[1, j]];
            ddu[[2, j]] = ddu[[1, j]];
        }
    }
    Ok((du, ddu))
}

/// Adjoint of [`finite_difference`]: accumulates `d(loss)/du` given the
/// gradients with respect to `du` and `ddu`.
pub fn finite_difference_adjoint(
    g_du: &Array2<f64>,
    g_ddu: &Array2<f64>,
    dt: f64,
) -> Result<Array2<f64>> {
    let n_t = g_du.nrows();
    let n_dof = g_du.ncols();
    if n_t < 3 {
        return Err(Error::invalid("finite_difference_adjoint needs n_t >= 3"));
    }
    if g_ddu.nrows() != n_t || g_ddu.ncols() != n_dof {
        return Err(Error::Dimension {
            context: "finite_difference_adjoint",
            expected: n_t * n_dof,
            got: g_ddu.len(),
        });
    }
    let mut g_u = Array2::<f64>::zeros((n_t, n_dof));
    let inv2dt = 1.0 / (2.0 * dt);
    let invdt2 = 1.0 / (dt * dt);
    for j in 0..n_dof {
        for t in 1..n_t - 1 {
            let g = g_du[[t, j]] * inv2dt;
            g_u[[t + 1, j]] += g;
            g_u[[t - 1, j]] -= g;
            let h = g_ddu[[t, j]] * invdt2;
            g_u[[t + 1, j]] += h;
            g_u[[t, j]] -= 2.0 * h;
            g_u[[t - 1, j]] += h;
        }
        let g0 = g_du[[0, j]] * inv2dt;
        g_u[[0, j]] += -3.0 * g0;
        g_u[[1, j]] += 4.0 * g0;
        g_u[[2, j]] += -g0;
        let gn = g_du[[n_t - 1, j]] * inv2dt;
        g_u[[n_t - 1, j]] += 3.0 * gn;
        g_u[[n_t - 2, j]] += -4.0 * gn;
        g_u[[n_t - 3, j]] += gn;
        if n_t >= 4 {
            let h0 = g_ddu[[0, j]] * invdt2;
            g_u[[0, j]] += 2.0 * h0;
            g_u[[1, j]] += -5.0 * h0;
            g_u[[2, j]] += 4.0 * h0;
            g_u[[3, j]] += -h0;
            let hn = g_ddu[[n_t - 1, j]] * invdt2;
            g_u[[n_t - 1, j]] += 2.0 * hn;
            g_u[[n_t - 2, j]] += -5.0 * hn;
            g_u[[n_t - 3, j]] += 4.0 * hn;
            g_u[[n_t - 4, j]] += -hn;
        } else {
            // Ends copied the central value at t = 1.
            let h = (g_ddu[[0, j]] + g_ddu[[2, j]]) * invdt2;
            g_u[[2, j]] += h;
            g_u[[1, j]] -= 2.0 * h;
            g_u[[0, j]] += h;
        }
    }
    Ok(g_u)
}
