//! Running first and second moments of the stream.
//!
//! The accumulator keeps the per-variable sum and sum of squares in plain
//! f64. Catastrophic cancellation in `b - a^2/n` is possible for extreme
//! means; [`MomentAccumulator::condition_ratio`] exposes how close each
//! variable is to that regime instead of silently switching summation
//! schemes.

use ndarray::Array1;

use crate::config::{PcaConfig, ZeroVariancePolicy};
use crate::error::{Error, Result};

/// Check that a raw sample has the expected width and only finite entries.
pub fn validate_sample(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: x.len(),
        });
    }
    for (index, v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
    }
    Ok(())
}

/// Running count, per-variable sum and per-variable sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    n: usize,
    sum: Array1<f64>,
    sum_sq: Array1<f64>,
}

impl MomentAccumulator {
    pub fn new(m: usize) -> Self {
        MomentAccumulator {
            n: 0,
            sum: Array1::zeros(m),
            sum_sq: Array1::zeros(m),
        }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of accepted samples.
    pub fn count(&self) -> usize {
        self.n
    }

    pub fn sum(&self) -> &Array1<f64> {
        &self.sum
    }

    pub fn sum_of_squares(&self) -> &Array1<f64> {
        &self.sum_sq
    }

    /// Fold one sample into the sums. On error the accumulator is unchanged.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        validate_sample(x, self.sum.len())?;
        self.n += 1;
        for (j, &v) in x.iter().enumerate() {
            self.sum[j] += v;
            self.sum_sq[j] += v * v;
        }
        Ok(())
    }

    /// Centered sums of squares `b_j - a_j^2 / n`, the radicand source for
    /// the sample variance. Tiny negative round-off is clamped to zero;
    /// negativity beyond `1e-10 * max(b_j, 1)` signals corrupted sums.
    fn centered_sum_sq(&self) -> Result<Array1<f64>> {
        let n = self.n as f64;
        let mut out = Array1::zeros(self.sum.len());
        for j in 0..self.sum.len() {
            let s = self.sum_sq[j] - self.sum[j] * self.sum[j] / n;
            let clamp = 1e-10 * self.sum_sq[j].max(1.0);
            if s < -clamp {
                return Err(Error::NegativeVariance { index: j, value: s });
            }
            out[j] = s.max(0.0);
        }
        Ok(out)
    }

    /// Cancellation diagnostic `b_j / (b_j - a_j^2/n)` per variable; large
    /// values mean the variance is the small difference of large sums.
    pub fn condition_ratio(&self) -> Array1<f64> {
        let n = self.n as f64;
        Array1::from_iter((0..self.sum.len()).map(|j| {
            let s = self.sum_sq[j] - self.sum[j] * self.sum[j] / n;
            if s > 0.0 {
                self.sum_sq[j] / s
            } else {
                f64::INFINITY
            }
        }))
    }

    /// Mean and sample standard deviation under the configured toggles.
    ///
    /// Requires `n >= 2`. A zero standard deviation is an error when scaling
    /// is enabled, unless the config selects the substitute-one escape hatch.
    pub fn statistics(&self, config: &PcaConfig) -> Result<Standardization> {
        if self.n < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                actual: self.n,
            });
        }
        let n = self.n as f64;
        let mean = &self.sum / n;
        let centered = self.centered_sum_sq()?;
        let mut stddev = Array1::zeros(self.sum.len());
        for j in 0..self.sum.len() {
            let sd = (centered[j] / (n - 1.0)).sqrt();
            if sd == 0.0 && config.scaling {
                match config.zero_variance {
                    ZeroVariancePolicy::Error => {
                        return Err(Error::DegenerateVariable { index: j });
                    }
                    ZeroVariancePolicy::SubstituteOne => stddev[j] = 1.0,
                }
            } else {
                stddev[j] = sd;
            }
        }
        Ok(Standardization {
            mean,
            stddev,
            centering: config.centering,
            scaling: config.scaling,
        })
    }
}

/// Per-variable mean and standard deviation together with the toggles that
/// decide whether each is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Array1<f64>,
    pub stddev: Array1<f64>,
    pub centering: bool,
    pub scaling: bool,
}

impl Standardization {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Mean as applied: zero when centering is off.
    pub fn applied_mean(&self) -> Array1<f64> {
        if self.centering {
            self.mean.clone()
        } else {
            Array1::zeros(self.mean.len())
        }
    }

    /// Standard deviation as applied: all ones when scaling is off.
    pub fn applied_stddev(&self) -> Array1<f64> {
        if self.scaling {
            self.stddev.clone()
        } else {
            Array1::ones(self.stddev.len())
        }
    }

    /// `z_j = (x_j - mean_j [if centering]) / (stddev_j if scaling else 1)`.
    pub fn standardize(&self, x: &[f64]) -> Result<Array1<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                actual: x.len(),
            });
        }
        let mut z = Array1::zeros(x.len());
        for j in 0..x.len() {
            let centered = if self.centering {
                x[j] - self.mean[j]
            } else {
                x[j]
            };
            z[j] = if self.scaling {
                centered / self.stddev[j]
            } else {
                centered
            };
        }
        Ok(z)
    }

    /// Inverse of [`standardize`](Self::standardize).
    pub fn unstandardize(&self, z: &[f64]) -> Result<Array1<f64>> {
        if z.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                actual: z.len(),
            });
        }
        let mut x = Array1::zeros(z.len());
        for j in 0..z.len() {
            let scaled = if self.scaling {
                z[j] * self.stddev[j]
            } else {
                z[j]
            };
            x[j] = if self.centering {
                scaled + self.mean[j]
            } else {
                scaled
            };
        }
        Ok(x)
    }
}
