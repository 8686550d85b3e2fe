use serde::Serialize;

use super::EmbeddedStep;
use crate::scalar::{to_f64, Real};

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    /// |mean − target| ≤ k·stderr.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Running mean and sum of squared deviations (Welford), mergeable.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAccumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> McEstimate {
        let stderr = if self.n == 0 { f64::NAN } else { (self.variance() / self.n as f64).sqrt() };
        McEstimate { mean: self.mean, stderr, n: self.n }
    }
}

/// Counts and moments of a batch of embedded steps.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedStats {
    pub n: u64,
    pub up: u64,
    pub child_counts: Vec<u64>,
    pub sum_tau: f64,
    pub sum_tau2: f64,
    /// Σ Y·τ, with Y = ±1 the level change.
    pub sum_y_tau: f64,
}

impl EmbeddedStats {
    pub fn new(p: u32) -> Self {
        EmbeddedStats { n: 0, up: 0, child_counts: vec![0; p as usize], sum_tau: 0.0, sum_tau2: 0.0, sum_y_tau: 0.0 }
    }

    pub fn push<T: Real>(&mut self, step: &EmbeddedStep<T>) {
        let tau = to_f64(step.duration);
        self.n += 1;
        if step.delta_level > 0 {
            self.up += 1;
            if let Some(k) = step.child_index {
                self.child_counts[k as usize] += 1;
            }
        }
        self.sum_tau += tau;
        self.sum_tau2 += tau * tau;
        self.sum_y_tau += f64::from(step.delta_level) * tau;
    }

    pub fn merge(&mut self, other: &EmbeddedStats) {
        self.n += other.n;
        self.up += other.up;
        for (a, b) in self.child_counts.iter_mut().zip(&other.child_counts) {
            *a += b;
        }
        self.sum_tau += other.sum_tau;
        self.sum_tau2 += other.sum_tau2;
        self.sum_y_tau += other.sum_y_tau;
    }

    pub fn down(&self) -> u64 {
        self.n - self.up
    }

    /// Estimated Pr[Y = +1] with binomial standard error.
    pub fn up_probability(&self) -> McEstimate {
        let n = self.n as f64;
        let p = self.up as f64 / n;
        McEstimate { mean: p, stderr: (p * (1.0 - p) / n).sqrt(), n: self.n as usize }
    }

    /// Estimated Pr[Y = −1], the frequency of moves to the predecessor.
    pub fn down_probability(&self) -> McEstimate {
        let up = self.up_probability();
        McEstimate { mean: 1.0 - up.mean, ..up }
    }

    /// Estimated E[τ].
    pub fn mean_duration(&self) -> McEstimate {
        let n = self.n as f64;
        let m = self.sum_tau / n;
        let var = (self.sum_tau2 / n - m * m) * n / (n - 1.0);
        McEstimate { mean: m, stderr: (var / n).sqrt(), n: self.n as usize }
    }
}

/// Drift rate estimate ℓ̂ = ln q · mean(Y) / mean(τ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub ell: f64,
    pub stderr: f64,
    pub mean_y: f64,
    pub mean_tau: f64,
    pub n: u64,
}

/// Ratio estimator with a delta-method standard error from the joint moments of (Y, τ).
pub fn estimate_drift(stats: &EmbeddedStats, ln_q: f64) -> DriftEstimate {
    let n = stats.n as f64;
    let my = (stats.up as f64 - stats.down() as f64) / n;
    let mt = stats.sum_tau / n;
    let var_y = (1.0 - my * my) * n / (n - 1.0);
    let var_t = (stats.sum_tau2 / n - mt * mt) * n / (n - 1.0);
    let cov = (stats.sum_y_tau / n - my * mt) * n / (n - 1.0);
    let r = my / mt;
    let var_r = (var_y - 2.0 * r * cov + r * r * var_t) / (mt * mt * n);
    DriftEstimate { ell: ln_q * r, stderr: ln_q * var_r.max(0.0).sqrt(), mean_y: my, mean_tau: mt, n: stats.n }
}
