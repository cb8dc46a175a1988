//! Per-chain counters.

use serde::{Deserialize, Serialize};

use super::{NewtonVariant, StepOutcome, StepResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionCounts {
    pub projection: u64,
    pub metropolis: u64,
    pub reverse_projection: u64,
    pub reverse_mismatch: u64,
    pub singular: u64,
}

impl RejectionCounts {
    pub fn total(&self) -> u64 {
        self.projection + self.metropolis + self.reverse_projection + self.reverse_mismatch + self.singular
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub variant: NewtonVariant,
    pub n_steps: u64,
    pub accepted: u64,
    pub rejected: RejectionCounts,
    pub forward_iters_success: u64,
    pub forward_iters_fail: u64,
    pub forward_solves: u64,
    pub reverse_iters: u64,
    pub reverse_runs: u64,
}

impl ChainStats {
    pub fn new(variant: NewtonVariant) -> Self {
        Self {
            variant,
            n_steps: 0,
            accepted: 0,
            rejected: RejectionCounts::default(),
            forward_iters_success: 0,
            forward_iters_fail: 0,
            forward_solves: 0,
            reverse_iters: 0,
            reverse_runs: 0,
        }
    }

    pub fn record(&mut self, outcome: &StepOutcome) {
        self.n_steps += 1;
        let it = outcome.forward_iters as u64;
        self.forward_solves += outcome.forward_solves as u64;
        match outcome.result {
            StepResult::RejectedProjection => self.forward_iters_fail += it,
            _ => self.forward_iters_success += it,
        }
        if outcome.reverse_iters > 0 {
            self.reverse_runs += 1;
            self.reverse_iters += outcome.reverse_iters as u64;
        }
        match outcome.result {
            StepResult::Accepted => self.accepted += 1,
            StepResult::RejectedProjection => self.rejected.projection += 1,
            StepResult::RejectedMetropolis => self.rejected.metropolis += 1,
            StepResult::RejectedReverseProjection => self.rejected.reverse_projection += 1,
            StepResult::RejectedReverseMismatch => self.rejected.reverse_mismatch += 1,
            StepResult::RejectedSingular => self.rejected.singular += 1,
        }
    }

    /// Adds the counts of another chain run with the same variant.
    pub fn merge(&mut self, other: &ChainStats) {
        self.n_steps += other.n_steps;
        self.accepted += other.accepted;
        self.rejected.projection += other.rejected.projection;
        self.rejected.metropolis += other.rejected.metropolis;
        self.rejected.reverse_projection += other.rejected.reverse_projection;
        self.rejected.reverse_mismatch += other.rejected.reverse_mismatch;
        self.rejected.singular += other.rejected.singular;
        self.forward_iters_success += other.forward_iters_success;
        self.forward_iters_fail += other.forward_iters_fail;
        self.forward_solves += other.forward_solves;
        self.reverse_iters += other.reverse_iters;
        self.reverse_runs += other.reverse_runs;
    }

    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        Self::ratio(self.accepted, self.n_steps)
    }

    pub fn forward_successes(&self) -> u64 {
        self.n_steps - self.rejected.projection
    }

    pub fn mean_forward_iters(&self) -> f64 {
        Self::ratio(self.forward_iters_success + self.forward_iters_fail, self.n_steps)
    }

    pub fn mean_forward_iters_success(&self) -> f64 {
        Self::ratio(self.forward_iters_success, self.forward_successes())
    }

    pub fn mean_forward_iters_fail(&self) -> f64 {
        Self::ratio(self.forward_iters_fail, self.rejected.projection)
    }

    /// Mean number of linear solves per forward projection.
    pub fn mean_forward_solves(&self) -> f64 {
        Self::ratio(self.forward_solves, self.n_steps)
    }

    pub fn mean_reverse_iters(&self) -> f64 {
        Self::ratio(self.reverse_iters, self.reverse_runs)
    }

    /// Share of rejections caused by a failed forward projection.
    pub fn forward_rejection_share(&self) -> f64 {
        Self::ratio(self.rejected.projection, self.rejected.total())
    }

    pub fn summary(&self) -> ChainSummary {
        let n = self.n_steps;
        ChainSummary {
            stats: self.clone(),
            acceptance_rate: self.acceptance_rate(),
            rejection_fraction: RejectionFractions {
                projection: Self::ratio(self.rejected.projection, n),
                metropolis: Self::ratio(self.rejected.metropolis, n),
                reverse_projection: Self::ratio(self.rejected.reverse_projection, n),
                reverse_mismatch: Self::ratio(self.rejected.reverse_mismatch, n),
                singular: Self::ratio(self.rejected.singular, n),
            },
            mean_forward_iters: self.mean_forward_iters(),
            mean_forward_iters_success: self.mean_forward_iters_success(),
            mean_forward_iters_fail: self.mean_forward_iters_fail(),
            mean_forward_solves: self.mean_forward_solves(),
            mean_reverse_iters: self.mean_reverse_iters(),
            forward_rejection_share: self.forward_rejection_share(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionFractions {
    pub projection: f64,
    pub metropolis: f64,
    pub reverse_projection: f64,
    pub reverse_mismatch: f64,
    pub singular: f64,
}

/// Raw counts plus derived rates, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    #[serde(flatten)]
    pub stats: ChainStats,
    pub acceptance_rate: f64,
    pub rejection_fraction: RejectionFractions,
    pub mean_forward_iters: f64,
    pub mean_forward_iters_success: f64,
    pub mean_forward_iters_fail: f64,
    pub mean_forward_solves: f64,
    pub mean_reverse_iters: f64,
    pub forward_rejection_share: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(result: StepResult, fwd: usize, rev: usize) -> StepOutcome {
        StepOutcome {
            result,
            forward_iters: fwd,
            forward_solves: fwd.saturating_sub(1),
            reverse_iters: rev,
            acceptance_prob: None,
        }
    }

    #[test]
    fn counts_and_means() {
        let mut s = ChainStats::new(NewtonVariant::Symmetric);
        s.record(&outcome(StepResult::Accepted, 3, 2));
        s.record(&outcome(StepResult::RejectedProjection, 7, 0));
        s.record(&outcome(StepResult::RejectedMetropolis, 4, 0));
        s.record(&outcome(StepResult::RejectedProjection, 5, 0));
        assert_eq!(s.n_steps, 4);
        assert_eq!(s.accepted, 1);
        assert_eq!(s.rejected.total(), 3);
        assert_eq!(s.acceptance_rate(), 0.25);
        assert_eq!(s.mean_forward_iters_success(), 3.5);
        assert_eq!(s.mean_forward_iters_fail(), 6.0);
        assert_eq!(s.mean_reverse_iters(), 2.0);
        assert!((s.forward_rejection_share() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.forward_solves, 2 + 6 + 3 + 4);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = ChainStats::new(NewtonVariant::Traditional);
        a.record(&outcome(StepResult::Accepted, 2, 2));
        let mut b = a.clone();
        b.record(&outcome(StepResult::RejectedSingular, 3, 0));
        a.merge(&b);
        assert_eq!(a.n_steps, 3);
        assert_eq!(a.accepted, 2);
        assert_eq!(a.rejected.singular, 1);
        assert_eq!(a.reverse_runs, 2);
    }

    #[test]
    fn empty_stats_have_zero_rates() {
        let s = ChainStats::new(NewtonVariant::Symmetric);
        assert_eq!(s.acceptance_rate(), 0.0);
        assert_eq!(s.forward_rejection_share(), 0.0);
    }
}
