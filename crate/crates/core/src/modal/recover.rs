//! Field recovery from modal trajectories.

use ndarray::Array2;

use super::ModeShapeTable;
use crate::error::{Error, Result};

/// Recover a field from mode shapes and modal amplitudes:
/// `field[t, p] = sum_i shapes[p, i] q[t, i]`.
///
/// The same superposition applies to modal velocities and accelerations,
/// giving the recovered derivative fields.
pub fn recover_field(shapes: &ModeShapeTable, q: &Array2<f64>) -> Result<Array2<f64>> {
    let n_modes = shapes.n_modes();
    if q.ncols() != n_modes {
        return Err(Error::Dimension {
            context: "recover_field",
            expected: n_modes,
            got: q.ncols(),
        });
    }
    let n_t = q.nrows();
    let n_points = shapes.n_points();
    let mut field = Array2::<f64>::zeros((n_t, n_points));
    for t in 0..n_t {
        for p in 0..n_points {
            let mut acc = 0.0;
            for i in 0..n_modes {
                acc += shapes.values[[p, i]] * q[[t, i]];
            }
            field[[t, p]] = acc;
        }
    }
    Ok(field)
}
