//! Reference batch PCA over a fully retained matrix.
//!
//! This is the ground truth the streaming engine is tested against and the
//! batch arm of the benchmarks. It is deliberately simple and recomputes
//! everything from the raw matrix: two-pass statistics, a dense
//! cross-product covariance, then the shared eigensolver. It never calls
//! the incremental covariance update, so equivalence tests compare two
//! genuinely different computations.

use ndarray::{Array1, Array2, ArrayView2};
use std::time::{Duration, Instant};

use crate::config::{PcaConfig, ZeroVariancePolicy};
use crate::error::{Error, Result};
use crate::moments::Standardization;

/// Everything a batch run produces: statistics, covariance, spectrum and
/// the full n-by-m matrix of PC values.
#[derive(Debug, Clone)]
pub struct BatchResult {
    /// Mean as applied (zeros when centering is off).
    pub mean: Array1<f64>,
    /// Standard deviation as applied (ones when scaling is off).
    pub stddev: Array1<f64>,
    pub q: Array2<f64>,
    pub eigenvalues: Array1<f64>,
    pub loadings: Array2<f64>,
    /// Row k holds the PC values of sample k.
    pub pcs: Array2<f64>,
}

impl BatchResult {
    /// The statistics bundle equivalent to what the engine applies.
    pub fn standardization(&self) -> Standardization {
        Standardization {
            mean: self.mean.clone(),
            stddev: self.stddev.clone(),
            centering: true,
            scaling: true,
        }
    }
}

/// Batch PCA of the whole matrix under the configured toggles.
///
/// Statistics are computed in two passes over the retained matrix, the
/// covariance as an explicit `Z^T Z / (n-1)` product. Only the
/// eigendecomposition (and its sign canonicalization) is shared with the
/// streaming path.
pub fn batch_pca(x: ArrayView2<f64>, config: &PcaConfig) -> Result<BatchResult> {
    let n = x.nrows();
    let m = config.m;
    if x.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: x.ncols(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            actual: n,
        });
    }
    for (i, row) in x.rows().into_iter().enumerate() {
        for v in row {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
    }

    let nf = n as f64;
    let mut mean = Array1::zeros(m);
    if config.centering {
        for j in 0..m {
            mean[j] = x.column(j).sum() / nf;
        }
    }
    let mut stddev = Array1::ones(m);
    if config.scaling {
        for j in 0..m {
            // Two-pass variance around the true column mean, independent of
            // whether centering is applied downstream.
            let mu = x.column(j).sum() / nf;
            let ss: f64 = x.column(j).iter().map(|v| (v - mu) * (v - mu)).sum();
            let sd = (ss / (nf - 1.0)).sqrt();
            if sd == 0.0 {
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
    }

    let mut z = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            z[[i, j]] = (x[[i, j]] - mean[j]) / stddev[j];
        }
    }
    let mut q = z.t().dot(&z) / (nf - 1.0);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 0.5 * (q[[i, j]] + q[[j, i]]);
            q[[i, j]] = v;
            q[[j, i]] = v;
        }
    }

    let eigen = crate::eigen::eigh_descending(q.view())?;
    let pcs = z.dot(&eigen.loadings.t());

    Ok(BatchResult {
        mean,
        stddev,
        q,
        eigenvalues: eigen.eigenvalues,
        loadings: eigen.loadings,
        pcs,
    })
}

/// Wall-clock cost of one batch run per prefix, with the running total.
#[derive(Debug, Clone)]
pub struct BatchTiming {
    pub n: usize,
    pub single: Duration,
    pub cumulative: Duration,
}

/// Time a batch run over each listed prefix length of `x`, in order, and
/// accumulate the running total (the cost of re-running batch PCA from
/// scratch at every listed step).
pub fn batch_timing_arm(
    x: ArrayView2<f64>,
    prefix_lengths: &[usize],
    config: &PcaConfig,
) -> Result<Vec<BatchTiming>> {
    let mut out = Vec::with_capacity(prefix_lengths.len());
    let mut total = Duration::ZERO;
    for &n in prefix_lengths {
        if n > x.nrows() {
            return Err(Error::InsufficientData {
                needed: n,
                actual: x.nrows(),
            });
        }
        let prefix = x.slice(ndarray::s![..n, ..]);
        let start = Instant::now();
        let result = batch_pca(prefix, config)?;
        let single = start.elapsed();
        std::hint::black_box(&result);
        total += single;
        out.push(BatchTiming {
            n,
            single,
            cumulative: total,
        });
    }
    Ok(out)
}
