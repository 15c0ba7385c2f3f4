//! Small dense linear algebra: Cholesky, LU with partial pivoting and a
//! cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Systems here are desk scale (a few hundred DOFs at most), so plain dense
//! O(n^3) routines are the simplest correct choice.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            context: "cholesky",
            expected: n,
            got: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite(format!(
                        "pivot {i} is {sum:.3e}"
                    )));
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solve L x = b for lower-triangular L.
pub fn solve_lower(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        for k in 0..i {
            let v = x[k];
            x[i] -= l[[i, k]] * v;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// Solve L^T x = b for lower-triangular L.
pub fn solve_lower_transpose(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = x[k];
            x[i] -= l[[k, i]] * v;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// LU factorization with partial pivoting, kept for repeated solves.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: Array2<f64>,
    piv: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension {
                context: "lu",
                expected: n,
                got: a.ncols(),
            });
        }
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut p = col;
            let mut max = lu[[col, col]].abs();
            for r in col + 1..n {
                let v = lu[[r, col]].abs();
                if v > max {
                    max = v;
                    p = r;
                }
            }
            if max == 0.0 {
                return Err(Error::NotPositiveDefinite(format!(
                    "singular matrix at column {col}"
                )));
            }
            if p != col {
                for c in 0..n {
                    let tmp = lu[[col, c]];
                    lu[[col, c]] = lu[[p, c]];
                    lu[[p, c]] = tmp;
                }
                piv.swap(col, p);
            }
            let d = lu[[col, col]];
            for r in col + 1..n {
                let m = lu[[r, col]] / d;
                lu[[r, col]] = m;
                for c in col + 1..n {
                    let v = lu[[col, c]];
                    lu[[r, c]] -= m * v;
                }
            }
        }
        Ok(LuFactor { lu, piv })
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.lu.nrows();
        let mut x = Array1::<f64>::zeros(n);
        for i in 0..n {
            x[i] = b[self.piv[i]];
        }
        // Forward substitution with unit diagonal.
        for i in 0..n {
            for k in 0..i {
                let v = x[k];
                x[i] -= self.lu[[i, k]] * v;
            }
        }
        // Back substitution.
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let v = x[k];
                x[i] -= self.lu[[i, k]] * v;
            }
            x[i] /= self.lu[[i, i]];
        }
        x
    }
}

/// Eigen decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns (eigenvalues ascending, eigenvectors as columns).
pub fn sym_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            context: "sym_eigen",
            expected: n,
            got: a.ncols(),
        });
    }
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let max_sweeps = 64;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frob_norm(&m)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Apply rotation to m from both sides.
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                // Accumulate eigenvectors.
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    // Sort ascending by eigenvalue.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let mut vals = Array1::<f64>::zeros(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        vals[new] = m[[old, old]];
        for k in 0..n {
            vecs[[k, new]] = v[[k, old]];
        }
    }
    Ok((vals, vecs))
}

pub fn frob_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// y = A x for a dense matrix.
pub fn matvec(a: &Array2<f64>, x: &[f64], y: &mut [f64]) {
    let n = a.nrows();
    let m = a.ncols();
    debug_assert_eq!(x.len(), m);
    debug_assert_eq!(y.len(), n);
    let data = a.as_slice().expect("matvec expects standard layout");
    for i in 0..n {
        let row = &data[i * m..(i + 1) * m];
        let mut acc = 0.0;
        for (aij, xj) in row.iter().zip(x.iter()) {
            acc += aij * xj;
        }
        y[i] = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_roundtrip() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let rebuilt = l.dot(&l.t());
        for (x, y) in a.iter().zip(rebuilt.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn lu_solves() {
        let a = array![[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        let b = array![8.0, -11.0, -3.0];
        let f = LuFactor::new(&a).unwrap();
        let x = f.solve(&b);
        let expect = [2.0, 3.0, -1.0];
        for (xi, ei) in x.iter().zip(expect.iter()) {
            assert!((xi - ei).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_eigen_2dof_chain() {
        // K = [[2,-1],[-1,2]] has eigenvalues 1 and 3.
        let k = array![[2.0, -1.0], [-1.0, 2.0]];
        let (vals, vecs) = sym_eigen(&k).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // Residual check K v = lambda v.
        for j in 0..2 {
            for i in 0..2 {
                let kv: f64 = (0..2).map(|c| k[[i, c]] * vecs[[c, j]]).sum();
                assert!((kv - vals[j] * vecs[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_eigen_random_symmetric() {
        use crate::rng::Rng;
        let n = 12;
        let mut rng = Rng::new(3);
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = rng.uniform_in(-1.0, 1.0);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        let (vals, vecs) = sym_eigen(&a).unwrap();
        // Orthonormality and residuals.
        for j in 0..n {
            for i in 0..n {
                let dot: f64 = (0..n).map(|k| vecs[[k, i]] * vecs[[k, j]]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
            let mut resid: f64 = 0.0;
            for i in 0..n {
                let av: f64 = (0..n).map(|c| a[[i, c]] * vecs[[c, j]]).sum();
                resid += (av - vals[j] * vecs[[i, j]]).powi(2);
            }
            assert!(resid.sqrt() < 1e-9);
        }
        // Ascending order.
        for j in 1..n {
            assert!(vals[j] >= vals[j - 1]);
        }
    }
}
