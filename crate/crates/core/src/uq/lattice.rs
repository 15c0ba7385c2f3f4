//! Number-theoretic representative points: a Korobov rank-1 lattice with a
//! centering shift, mapped through the space's inverse CDFs.
//!
//! The generating vector is `z = (1, a, a^2, ...) mod N`; the multiplier `a`
//! comes from a search over coprime candidates minimizing the periodic L2
//! discrepancy (the P_2 figure of merit, computable in O(N d) per
//! candidate).

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::system::ParameterSpace;

/// Equal-weight point set over the free parameters of a space.
#[derive(Debug, Clone)]
pub struct RepresentativePointSet {
    /// `n_sel x n_params` points in parameter units (fixed parameters hold
    /// their fixed value in every row).
    pub points: Array2<f64>,
    /// `n_sel x d` unit-cube coordinates over the free dimensions.
    pub unit: Array2<f64>,
    /// `1 / n_sel` for every point.
    pub weight: f64,
    /// Chosen Korobov multiplier.
    pub generator: usize,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Periodic L2 discrepancy (P_2) of the lattice generated by `a`.
fn p2_merit(n: usize, d: usize, a: usize) -> f64 {
    // z_i = a^i mod n; per point the product over dimensions of
    // 1 + 2 pi^2 B_2(u), with B_2 the second Bernoulli polynomial.
    let two_pi2 = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    let mut sum = 0.0;
    for q in 0..n {
        let mut z = 1usize;
        let mut prod = 1.0;
        for _ in 0..d {
            let u = ((q * z) % n) as f64 / n as f64;
            let b2 = u * u - u + 1.0 / 6.0;
            prod *= 1.0 + two_pi2 * b2;
            z = (z * a) % n;
        }
        sum += prod;
    }
    sum / n as f64 - 1.0
}

/// Pick `n_sel` lattice points in the space; `generator` overrides the
/// multiplier search.
pub fn select_representative_points(
    space: &ParameterSpace,
    n_sel: usize,
    generator: Option<usize>,
) -> Result<RepresentativePointSet> {
    if n_sel == 0 {
        return Err(Error::invalid("need at least one representative point"));
    }
    let free: Vec<usize> = space
        .params
        .iter()
        .enumerate()
        .filter(|(_, (_, d))| !d.is_fixed())
        .map(|(i, _)| i)
        .collect();
    let d = free.len().max(1);

    let a = match generator {
        Some(a) => {
            if n_sel > 1 && gcd(a % n_sel, n_sel) != 1 {
                return Err(Error::invalid(format!(
                    "generator {a} is not coprime with {n_sel}"
                )));
            }
            a
        }
        None => {
            if n_sel == 1 || d == 1 {
                1
            } else {
                let mut best = (f64::INFINITY, 1usize);
                for cand in (1..n_sel).filter(|c| gcd(*c, n_sel) == 1) {
                    let m = p2_merit(n_sel, d, cand);
                    if m < best.0 {
                        best = (m, cand);
                    }
                }
                best.1
            }
        }
    };

    let mut unit = Array2::<f64>::zeros((n_sel, d));
    for q in 0..n_sel {
        let mut z = 1usize;
        for i in 0..d {
            unit[[q, i]] = (((q * z) % n_sel) as f64 + 0.5) / n_sel as f64;
            z = (z * a) % n_sel.max(2);
        }
    }

    let n_p = space.n_params();
    let mut points = Array2::<f64>::zeros((n_sel, n_p));
    for q in 0..n_sel {
        let mut free_i = 0;
        for (i, (_, dist)) in space.params.iter().enumerate() {
            points[[q, i]] = if dist.is_fixed() {
                dist.quantile(0.5)
            } else {
                let u = unit[[q, free_i]];
                free_i += 1;
                dist.quantile(u)
            };
        }
    }

    Ok(RepresentativePointSet {
        points,
        unit,
        weight: 1.0 / n_sel as f64,
        generator: a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::system::{Distribution, ExcitationKind, ExcitationSpec};

    fn space_2d() -> ParameterSpace {
        ParameterSpace {
            params: vec![
                ("a".into(), Distribution::Uniform { lo: 0.0, hi: 1.0 }),
                ("fixed".into(), Distribution::Fixed { value: 7.0 }),
                ("b".into(), Distribution::Uniform { lo: 2.0, hi: 4.0 }),
            ],
            excitation: ExcitationSpec {
                kind: ExcitationKind::Zero,
                band: [0.0, 0.0],
                channels: 1,
            },
        }
    }

    #[test]
    fn single_point_sits_at_the_medians() {
        let set = select_representative_points(&space_2d(), 1, None).unwrap();
        assert_eq!(set.points.nrows(), 1);
        assert!((set.points[[0, 0]] - 0.5).abs() < 1e-12);
        assert_eq!(set.points[[0, 1]], 7.0);
        assert!((set.points[[0, 2]] - 3.0).abs() < 1e-12);
        assert_eq!(set.weight, 1.0);
    }

    #[test]
    fn unit_coordinates_stay_in_the_cube() {
        let set = select_representative_points(&space_2d(), 89, None).unwrap();
        for v in set.unit.iter() {
            assert!((0.0..1.0).contains(v));
        }
        // Weights sum to one.
        assert!((set.weight * 89.0 - 1.0).abs() < 1e-12);
        // Fixed parameter column is constant.
        for q in 0..89 {
            assert_eq!(set.points[[q, 1]], 7.0);
        }
    }

    /// Exact 2D star discrepancy by corner enumeration.
    fn star_discrepancy_2d(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        xs.push(1.0);
        ys.push(1.0);
        let mut worst = 0.0f64;
        for &x in &xs {
            for &y in &ys {
                let mut closed = 0usize;
                let mut open = 0usize;
                for p in pts {
                    if p.0 <= x && p.1 <= y {
                        closed += 1;
                    }
                    if p.0 < x && p.1 < y {
                        open += 1;
                    }
                }
                let vol = x * y;
                worst = worst
                    .max((closed as f64 / n - vol).abs())
                    .max((open as f64 / n - vol).abs());
            }
        }
        worst
    }

    #[test]
    fn lattice_beats_random_sampling_on_star_discrepancy() {
        let space = ParameterSpace {
            params: vec![
                ("x".into(), Distribution::Uniform { lo: 0.0, hi: 1.0 }),
                ("y".into(), Distribution::Uniform { lo: 0.0, hi: 1.0 }),
            ],
            excitation: ExcitationSpec {
                kind: ExcitationKind::Zero,
                band: [0.0, 0.0],
                channels: 1,
            },
        };
        let n = 144;
        let set = select_representative_points(&space, n, None).unwrap();
        let lattice_pts: Vec<(f64, f64)> =
            (0..n).map(|q| (set.unit[[q, 0]], set.unit[[q, 1]])).collect();
        let d_lattice = star_discrepancy_2d(&lattice_pts);

        let mut d_random_sum = 0.0;
        let trials = 100;
        for t in 0..trials {
            let mut rng = Rng::new(1000 + t);
            let pts: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.uniform(), rng.uniform())).collect();
            d_random_sum += star_discrepancy_2d(&pts);
        }
        let d_random_mean = d_random_sum / trials as f64;
        assert!(
            d_lattice < d_random_mean,
            "lattice {d_lattice} vs random mean {d_random_mean}"
        );
    }

    #[test]
    fn generator_override_is_validated() {
        let space = space_2d();
        assert!(select_representative_points(&space, 12, Some(4)).is_err());
        let ok = select_representative_points(&space, 12, Some(5)).unwrap();
        assert_eq!(ok.generator, 5);
    }
}
