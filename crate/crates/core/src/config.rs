use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do when a variable has zero variance while scaling is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroVariancePolicy {
    /// Reject the stream with [`Error::DegenerateVariable`] (default).
    Error,
    /// Substitute a standard deviation of 1 for the degenerate variable.
    /// This deviates from batch equivalence for that variable.
    SubstituteOne,
}

/// Configuration for one streaming PCA run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaConfig {
    /// Number of variables per sample.
    pub m: usize,
    /// Warm-up block size; the first `n_start` samples seed the covariance.
    pub n_start: usize,
    /// Subtract the running per-variable mean.
    pub centering: bool,
    /// Divide by the running per-variable standard deviation.
    pub scaling: bool,
    /// Apply sign / degeneracy / crossing corrections after each update.
    pub continuity: bool,
    /// Relative eigenvalue gap below which neighbors count as degenerate.
    pub eps_rel: f64,
    /// Zero-variance handling under scaling.
    pub zero_variance: ZeroVariancePolicy,
}

impl PcaConfig {
    /// Default configuration for `m` variables: `n_start = m + 1`, centering,
    /// scaling and continuity all enabled, `eps_rel = 1e-6`.
    ///
    /// `n_start = m + 1` is the smallest warm-up for which the initial
    /// covariance can be full rank.
    pub fn new(m: usize) -> Self {
        PcaConfig {
            m,
            n_start: (m + 1).max(2),
            centering: true,
            scaling: true,
            continuity: true,
            eps_rel: 1e-6,
            zero_variance: ZeroVariancePolicy::Error,
        }
    }

    pub fn with_n_start(mut self, n_start: usize) -> Self {
        self.n_start = n_start;
        self
    }

    pub fn with_centering(mut self, on: bool) -> Self {
        self.centering = on;
        self
    }

    pub fn with_scaling(mut self, on: bool) -> Self {
        self.scaling = on;
        self
    }

    pub fn with_continuity(mut self, on: bool) -> Self {
        self.continuity = on;
        self
    }

    pub fn with_eps_rel(mut self, eps_rel: f64) -> Self {
        self.eps_rel = eps_rel;
        self
    }

    pub fn with_zero_variance(mut self, policy: ZeroVariancePolicy) -> Self {
        self.zero_variance = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("variable count m must be >= 1".into()));
        }
        if self.n_start < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_start must be >= 2, got {}",
                self.n_start
            )));
        }
        // Also rejects NaN, which fails every comparison.
        if self.eps_rel.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidConfig(format!(
                "eps_rel must be positive, got {}",
                self.eps_rel
            )));
        }
        Ok(())
    }
}
