//! Regular polygon with extra random edges and a random 3D perturbation.

use std::f64::consts::PI;

use rand::seq::index;
use rand_distr::{Distribution, Normal, Uniform};

use super::{Bar, BarFramework, ConstraintSystem, Endpoint, InitialConfiguration, SystemError};
use crate::linalg::{cholesky, normal_matrix};
use crate::rng::{chain_rng, BUILDER_STREAM};

const MAX_ATTEMPTS: usize = 100;
const Z_STD: f64 = 0.5;
const RADIAL_MIN: f64 = 0.6;

/// `n` vertices on a circle with unit neighbour spacing, joined into a
/// polygon, plus `n` extra edges drawn uniformly without replacement from
/// the pairs that are neither polygon edges nor self-pairs. Heights are
/// `N(0, 0.5²)` and horizontal radii are scaled by `U[0.6, 1]`; bar lengths
/// are then measured from the perturbed configuration, which is therefore
/// exactly feasible.
///
/// A draw whose Jacobian is numerically rank deficient at the starting point
/// is discarded and redrawn, up to 100 attempts. `n_vars = 3n`, `m = 2n`.
pub fn build_ngon(n: usize, seed: u64) -> Result<(BarFramework, InitialConfiguration), SystemError> {
    if n < 4 {
        return Err(SystemError::InvalidSize(format!("ngon needs n >= 4, got {n}")));
    }
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if !adjacent {
                candidates.push((i, j));
            }
        }
    }
    if candidates.len() < n {
        return Err(SystemError::InvalidSize(format!(
            "ngon with n = {n} has only {} non-polygon pairs, need {n}",
            candidates.len()
        )));
    }

    let mut rng = chain_rng(seed, BUILDER_STREAM);
    let radius = 0.5 / (PI / n as f64).sin();
    let heights = Normal::new(0.0, Z_STD).expect("valid normal");
    let radial = Uniform::new_inclusive(RADIAL_MIN, 1.0).expect("valid range");

    for _ in 0..MAX_ATTEMPTS {
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let mut extra: Vec<(usize, usize)> = index::sample(&mut rng, candidates.len(), n)
            .into_iter()
            .map(|k| candidates[k])
            .collect();
        extra.sort_unstable();
        edges.extend(extra);

        let mut x0 = Vec::with_capacity(3 * n);
        for k in 0..n {
            let angle = 2.0 * PI * k as f64 / n as f64;
            let scale: f64 = radial.sample(&mut rng);
            let z: f64 = heights.sample(&mut rng);
            x0.extend_from_slice(&[radius * scale * angle.cos(), radius * scale * angle.sin(), z]);
        }

        let bars = edges
            .iter()
            .map(|&(i, j)| {
                let d2: f64 = (0..3).map(|k| (x0[3 * i + k] - x0[3 * j + k]).powi(2)).sum();
                Bar {
                    first: Endpoint::Particle(i),
                    second: Endpoint::Particle(j),
                    length_sq: d2,
                }
            })
            .collect();
        let framework = BarFramework::new(3, n, bars, None);
        let gram = normal_matrix(&framework.jacobian(&x0));
        if cholesky(&gram, None).is_err() {
            continue;
        }
        let init = InitialConfiguration::checked(&framework as &dyn ConstraintSystem, x0)?;
        return Ok((framework, init));
    }
    Err(SystemError::RebuildLimit(MAX_ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_gon_dimensions() {
        let (sys, _) = build_ngon(12, 3).unwrap();
        assert_eq!((sys.n_vars(), sys.n_constraints()), (36, 24));
    }

    #[test]
    fn same_seed_same_graph() {
        let (a, ia) = build_ngon(10, 42).unwrap();
        let (b, ib) = build_ngon(10, 42).unwrap();
        assert_eq!(a.bars(), b.bars());
        assert_eq!(ia, ib);
        let (c, _) = build_ngon(10, 43).unwrap();
        assert_ne!(a.bars(), c.bars());
    }

    #[test]
    fn extra_edges_avoid_polygon_and_self_pairs() {
        let n = 9;
        let (sys, _) = build_ngon(n, 5).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for bar in sys.bars() {
            let (Endpoint::Particle(i), Endpoint::Particle(j)) = (bar.first, bar.second) else {
                panic!("ngon bars join particles");
            };
            assert_ne!(i, j);
            assert!(seen.insert((i.min(j), i.max(j))), "duplicate edge");
        }
        assert_eq!(seen.len(), 2 * n);
    }

    #[test]
    fn square_has_too_few_pairs() {
        assert!(matches!(build_ngon(4, 0), Err(SystemError::InvalidSize(_))));
    }
}
