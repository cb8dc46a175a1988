//! Frameworks of point particles joined by fixed-length bars.
//!
//! Every bar contributes a constraint `|p − p'|² − ℓ² = 0`, where each end is
//! either a free particle or a fixed anchor. The squared form keeps the
//! gradients polynomial; it changes `|Q_x|` only by a constant factor
//! relative to `|p − p'| − ℓ`.

use std::sync::Arc;

use super::ConstraintSystem;
use crate::linalg::SparsityPattern;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Particle(usize),
    /// Fixed point; only the first `dim` coordinates are used.
    Anchor([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub first: Endpoint,
    pub second: Endpoint,
    pub length_sq: f64,
}

/// `log f = −stiffness · Σ (|p_i − p_j| − target)²` over a list of pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEnergy {
    pub stiffness: f64,
    pub target: f64,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct BarFramework {
    dim: usize,
    n_particles: usize,
    bars: Vec<Bar>,
    energy: Option<DiagonalEnergy>,
    pattern: Arc<SparsityPattern>,
    /// Start of each particle's `dim` entries in the value array, per bar.
    slots: Vec<[Option<usize>; 2]>,
}

impl BarFramework {
    pub fn new(dim: usize, n_particles: usize, bars: Vec<Bar>, energy: Option<DiagonalEnergy>) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1, 2 or 3");
        let n_vars = dim * n_particles;
        let mut col_ptr = Vec::with_capacity(bars.len() + 1);
        let mut row_idx = Vec::new();
        let mut slots = Vec::with_capacity(bars.len());
        col_ptr.push(0);
        for bar in &bars {
            let mut ends: Vec<(usize, usize)> = Vec::with_capacity(2);
            for (side, end) in [bar.first, bar.second].into_iter().enumerate() {
                if let Endpoint::Particle(p) = end {
                    assert!(p < n_particles, "bar references particle {p} out of range");
                    ends.push((p, side));
                }
            }
            ends.sort_unstable();
            assert!(
                ends.len() < 2 || ends[0].0 != ends[1].0,
                "bar joins a particle to itself"
            );
            let mut slot = [None, None];
            for (p, side) in ends {
                slot[side] = Some(row_idx.len());
                row_idx.extend(p * dim..(p + 1) * dim);
            }
            slots.push(slot);
            col_ptr.push(row_idx.len());
        }
        let pattern = SparsityPattern::new(n_vars, bars.len(), col_ptr, row_idx)
            .expect("bar pattern is well formed");
        Self {
            dim,
            n_particles,
            bars,
            energy,
            pattern: Arc::new(pattern),
            slots,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn energy(&self) -> Option<&DiagonalEnergy> {
        self.energy.as_ref()
    }

    fn eval_dim<const D: usize>(&self, x: &[f64], out: &mut [f64]) {
        for (o, bar) in out.iter_mut().zip(&self.bars) {
            let d = difference::<D>(x, bar);
            *o = d.iter().map(|v| v * v).sum::<f64>() - bar.length_sq;
        }
    }

    fn fill_dim<const D: usize>(&self, x: &[f64], values: &mut [f64]) {
        for (bar, slot) in self.bars.iter().zip(&self.slots) {
            let d = difference::<D>(x, bar);
            if let Some(s) = slot[0] {
                for k in 0..D {
                    values[s + k] = 2.0 * d[k];
                }
            }
            if let Some(s) = slot[1] {
                for k in 0..D {
                    values[s + k] = -2.0 * d[k];
                }
            }
        }
    }

    /// Squared bar lengths at `x`, in bar order.
    pub fn squared_lengths(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.bars.len()];
        self.eval_constraints(x, &mut out);
        out.iter().zip(&self.bars).map(|(q, bar)| q + bar.length_sq).collect()
    }
}

#[inline]
fn position<'a, const D: usize>(x: &'a [f64], end: &'a Endpoint) -> &'a [f64; D] {
    let s = match end {
        Endpoint::Particle(p) => &x[p * D..(p + 1) * D],
        Endpoint::Anchor(a) => &a[..D],
    };
    s.try_into().expect("D coordinates")
}

#[inline]
fn difference<const D: usize>(x: &[f64], bar: &Bar) -> [f64; D] {
    let a = position::<D>(x, &bar.first);
    let b = position::<D>(x, &bar.second);
    std::array::from_fn(|k| a[k] - b[k])
}

impl ConstraintSystem for BarFramework {
    fn n_vars(&self) -> usize {
        self.dim * self.n_particles
    }

    fn n_constraints(&self) -> usize {
        self.bars.len()
    }

    fn eval_constraints(&self, x: &[f64], out: &mut [f64]) {
        match self.dim {
            1 => self.eval_dim::<1>(x, out),
            2 => self.eval_dim::<2>(x, out),
            _ => self.eval_dim::<3>(x, out),
        }
    }

    fn jacobian_pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    fn fill_jacobian(&self, x: &[f64], values: &mut [f64]) {
        match self.dim {
            1 => self.fill_dim::<1>(x, values),
            2 => self.fill_dim::<2>(x, values),
            _ => self.fill_dim::<3>(x, values),
        }
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let Some(energy) = &self.energy else {
            return 0.0;
        };
        let dim = self.dim;
        let sum: f64 = energy
            .pairs
            .iter()
            .map(|&(i, j)| {
                let d: f64 = (0..dim)
                    .map(|k| (x[i * dim + k] - x[j * dim + k]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                (d - energy.target).powi(2)
            })
            .sum();
        -energy.stiffness * sum
    }
}
