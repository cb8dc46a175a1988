//! Square lattice of unit bars in the plane, with an energy on the
//! diagonals of every unit cell to keep it from collapsing.

use serde::{Deserialize, Serialize};

use super::{
    Bar, BarFramework, ConstraintSystem, DiagonalEnergy, Endpoint, InitialConfiguration,
    SystemError,
};

pub const LATTICE_STIFFNESS: f64 = 5.0;

/// Rest length used in the diagonal energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeTarget {
    /// `√2`, the diagonal of an undeformed unit cell.
    #[default]
    Rest,
    /// `√n / √2` with `n = s²` vertices.
    Paper,
}

impl LatticeTarget {
    pub fn value(self, s: usize) -> f64 {
        match self {
            LatticeTarget::Rest => std::f64::consts::SQRT_2,
            LatticeTarget::Paper => s as f64 / std::f64::consts::SQRT_2,
        }
    }
}

pub fn build_lattice(s: usize) -> Result<(BarFramework, InitialConfiguration), SystemError> {
    build_lattice_with_target(s, LatticeTarget::Rest)
}

/// `s × s` vertices at integer points; vertex `(r, c)` has index `r·s + c`.
///
/// Bars are all horizontal edges (row by row) followed by all vertical
/// edges, so `m = 2s(s − 1) = 2n − 2√n`.
pub fn build_lattice_with_target(
    s: usize,
    target: LatticeTarget,
) -> Result<(BarFramework, InitialConfiguration), SystemError> {
    if s < 2 {
        return Err(SystemError::InvalidSize(format!("lattice needs s >= 2, got {s}")));
    }
    let idx = |r: usize, c: usize| r * s + c;
    let unit = |a: usize, b: usize| Bar {
        first: Endpoint::Particle(a),
        second: Endpoint::Particle(b),
        length_sq: 1.0,
    };
    let mut bars = Vec::with_capacity(2 * s * (s - 1));
    for r in 0..s {
        for c in 0..s - 1 {
            bars.push(unit(idx(r, c), idx(r, c + 1)));
        }
    }
    for r in 0..s - 1 {
        for c in 0..s {
            bars.push(unit(idx(r, c), idx(r + 1, c)));
        }
    }
    let mut pairs = Vec::with_capacity(2 * (s - 1) * (s - 1));
    for r in 0..s - 1 {
        for c in 0..s - 1 {
            pairs.push((idx(r, c), idx(r + 1, c + 1)));
            pairs.push((idx(r, c + 1), idx(r + 1, c)));
        }
    }
    let energy = DiagonalEnergy {
        stiffness: LATTICE_STIFFNESS,
        target: target.value(s),
        pairs,
    };
    let framework = BarFramework::new(2, s * s, bars, Some(energy));

    let mut x0 = Vec::with_capacity(2 * s * s);
    for r in 0..s {
        for c in 0..s {
            x0.extend_from_slice(&[c as f64, r as f64]);
        }
    }
    let init = InitialConfiguration::checked(&framework as &dyn ConstraintSystem, x0)?;
    Ok((framework, init))
}
