//! Mode superposition: generalized eigen solve, Rayleigh damping reduction,
//! effective-mass sufficiency and mesh-independent field recovery.

mod beam;
mod recover;

pub use beam::{euler_beam_modes, ModeShapeTable};
pub use recover::recover_field;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;

/// Mass-normalized eigenmodes of `K u = omega^2 M u`.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    /// `n_dof x n` eigenmodes, columns mass-normalized (`U^T M U = I`).
    pub u: Array2<f64>,
    /// Natural frequencies, rad/s, ascending.
    pub omega: Array1<f64>,
    /// Modal masses; all 1 under mass normalization.
    pub mu: Array1<f64>,
    /// Modal stiffnesses `omega^2`.
    pub omega2: Array1<f64>,
    /// Participation factors for the default unit-displacement vector
    /// (all ones).
    pub gamma: Array1<f64>,
    /// Captured fraction of total mass for the default unit-displacement
    /// vector, in [0, 1].
    pub m_eff_fraction: f64,
}

/// Diagonal modal system produced by reduction: damping `alpha mu + beta
/// omega^2` per mode, plus mode-shape rows at the coupling points.
#[derive(Debug, Clone)]
pub struct ReducedFlexibleBody {
    pub n_modes: usize,
    /// Per-mode damping coefficients `alpha mu_i + beta omega2_i`.
    pub damping: Array1<f64>,
    pub omega2: Array1<f64>,
    /// Rows of `U` at the coupling DOFs: `n_attach x n_modes`.
    pub attachment_rows: Array2<f64>,
    pub alpha: f64,
    pub beta: f64,
}

/// Solve for the lowest `n` eigenpairs of `K u = omega^2 M u`.
///
/// `M = L L^T` by Cholesky, then a symmetric Jacobi eigensolve of
/// `L^-1 K L^-T`, then modes back-transformed with `L^-T`, which makes them
/// mass-normalized. Negative eigenvalues within roundoff of zero are clamped.
pub fn solve_eigen(m: &Array2<f64>, k: &Array2<f64>, n: usize) -> Result<ModalBasis> {
    let dim = m.nrows();
    if k.nrows() != dim || k.ncols() != dim || m.ncols() != dim {
        return Err(Error::Dimension {
            context: "solve_eigen",
            expected: dim,
            got: k.nrows(),
        });
    }
    if n == 0 || n > dim {
        return Err(Error::invalid(format!(
            "requested {n} modes from a {dim}-DOF system"
        )));
    }
    let l = linalg::cholesky(m)?;
    // A = L^-1 K L^-T, built by triangular solves on columns.
    let mut a = Array2::<f64>::zeros((dim, dim));
    for j in 0..dim {
        let col = k.column(j).to_owned();
        let y = linalg::solve_lower(&l, &col);
        for i in 0..dim {
            a[[i, j]] = y[i];
        }
    }
    for i in 0..dim {
        let row = a.row(i).to_owned();
        let y = linalg::solve_lower(&l, &row);
        for j in 0..dim {
            a[[i, j]] = y[j];
        }
    }
    // Symmetrize against roundoff before the Jacobi sweep.
    for i in 0..dim {
        for j in 0..i {
            let s = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = s;
            a[[j, i]] = s;
        }
    }
    let (vals, vecs) = linalg::sym_eigen(&a)?;
    let mut u = Array2::<f64>::zeros((dim, n));
    let mut omega = Array1::<f64>::zeros(n);
    let mut omega2 = Array1::<f64>::zeros(n);
    let scale = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for j in 0..n {
        let mut w2 = vals[j];
        if w2 < 0.0 {
            if w2 > -1e-10 * (1.0 + scale) {
                w2 = 0.0;
            } else {
                return Err(Error::invalid(format!(
                    "stiffness matrix is not positive semi-definite (eigenvalue {w2:.3e})"
                )));
            }
        }
        let phi = vecs.column(j).to_owned();
        let col = linalg::solve_lower_transpose(&l, &phi);
        for i in 0..dim {
            u[[i, j]] = col[i];
        }
        omega2[j] = w2;
        omega[j] = w2.sqrt();
    }
    let d = Array1::<f64>::ones(dim);
    let (gamma, m_eff_fraction) = participation(&u, m, &d)?;
    Ok(ModalBasis {
        u,
        omega,
        mu: Array1::ones(n),
        omega2,
        gamma,
        m_eff_fraction,
    })
}

fn participation(u: &Array2<f64>, m: &Array2<f64>, d: &Array1<f64>) -> Result<(Array1<f64>, f64)> {
    let dim = m.nrows();
    let mut md = vec![0.0; dim];
    linalg::matvec(m, d.as_slice().unwrap(), &mut md);
    let dmd: f64 = d.iter().zip(md.iter()).map(|(a, b)| a * b).sum();
    if dmd <= 0.0 {
        return Err(Error::invalid("unit-displacement vector has zero mass"));
    }
    let n = u.ncols();
    let mut gamma = Array1::<f64>::zeros(n);
    for j in 0..n {
        gamma[j] = u.column(j).iter().zip(md.iter()).map(|(a, b)| a * b).sum();
    }
    let fraction = gamma.iter().map(|g| g * g).sum::<f64>() / dmd;
    Ok((gamma, fraction))
}

/// Fraction of total mass captured by the basis for direction `d`:
/// `sum gamma_i^2 / (d^T M d)` with `gamma_i = U(:,i)^T M d`.
pub fn effective_mass(basis: &ModalBasis, m: &Array2<f64>, d: &Array1<f64>) -> Result<f64> {
    if d.len() != m.nrows() || basis.u.nrows() != m.nrows() {
        return Err(Error::Dimension {
            context: "effective_mass",
            expected: m.nrows(),
            got: d.len(),
        });
    }
    if d.iter().all(|v| *v == 0.0) {
        return Err(Error::invalid("unit-displacement vector is zero"));
    }
    participation(&basis.u, m, d).map(|(_, f)| f)
}

/// Reduce `(M, K)` onto `basis` with Rayleigh constants `alpha`, `beta`.
///
/// The reduced system is `mu q'' + (alpha mu + beta Omega) q' + Omega q =
/// U^T f(t)` with `mu = I` for a mass-normalized basis. `attachment_dofs`
/// selects the rows of `U` kept for coupling.
pub fn reduce(
    m: &Array2<f64>,
    k: &Array2<f64>,
    basis: &ModalBasis,
    alpha: f64,
    beta: f64,
    attachment_dofs: &[usize],
) -> Result<ReducedFlexibleBody> {
    let dim = m.nrows();
    if basis.u.nrows() != dim || k.nrows() != dim {
        return Err(Error::Dimension {
            context: "reduce",
            expected: dim,
            got: basis.u.nrows(),
        });
    }
    let n = basis.u.ncols();
    // Verify the basis diagonalizes this (M, K) pair.
    let mut tmp = vec![0.0; dim];
    for j in 0..n {
        let col: Vec<f64> = basis.u.column(j).to_vec();
        linalg::matvec(k, &col, &mut tmp);
        let utku: f64 = col.iter().zip(tmp.iter()).map(|(a, b)| a * b).sum();
        if (utku - basis.omega2[j]).abs() > 1e-6 * (1.0 + basis.omega2[j].abs()) {
            return Err(Error::invalid(
                "basis does not diagonalize the supplied matrices",
            ));
        }
    }
    let damping: Array1<f64> = basis
        .mu
        .iter()
        .zip(basis.omega2.iter())
        .map(|(mu, w2)| alpha * mu + beta * w2)
        .collect();
    let mut attachment_rows = Array2::<f64>::zeros((attachment_dofs.len(), n));
    for (r, &dof) in attachment_dofs.iter().enumerate() {
        if dof >= dim {
            return Err(Error::invalid(format!("attachment DOF {dof} out of range")));
        }
        for j in 0..n {
            attachment_rows[[r, j]] = basis.u[[dof, j]];
        }
    }
    Ok(ReducedFlexibleBody {
        n_modes: n,
        damping,
        omega2: basis.omega2.clone(),
        attachment_rows,
        alpha,
        beta,
    })
}

impl ReducedFlexibleBody {
    /// Express this body as a `Modal` entry for system assembly.
    pub fn to_body_config(&self, label: &str) -> crate::system::FlexBodyConfig {
        crate::system::FlexBodyConfig::Modal {
            label: label.to_string(),
            omega: self.omega2.iter().map(|w2| w2.sqrt()).collect(),
            alpha: crate::system::ParamValue::Const(self.alpha),
            beta: crate::system::ParamValue::Const(self.beta),
            attach_shapes: (0..self.attachment_rows.nrows())
                .map(|i| self.attachment_rows.row(i).to_vec())
                .collect(),
        }
    }
}
