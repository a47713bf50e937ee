//! Covariance of the standardized stream, maintained one sample at a time.
//!
//! All updates touch only m-by-m and length-m objects; no sample history is
//! kept. The recursion reproduces the batch covariance of every prefix up to
//! floating round-off, for any combination of the centering and scaling
//! toggles.

use ndarray::{Array1, Array2, ArrayView2};

use crate::config::PcaConfig;
use crate::error::{Error, Result};
use crate::moments::{validate_sample, MomentAccumulator, Standardization};

/// Covariance matrix of the standardized data, plus the statistics it was
/// standardized with.
///
/// Invariants: `q` is symmetric (re-symmetrized after every update) and
/// positive semi-definite up to round-off; with scaling enabled its diagonal
/// entries are 1 within 1e-10.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    q: Array2<f64>,
    n: usize,
    /// Mean as applied when building `q`: zeros when centering is off.
    mean: Array1<f64>,
    /// Standard deviation as applied when building `q`: ones when scaling
    /// is off.
    stddev: Array1<f64>,
}

impl CovarianceState {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.q
    }

    /// Number of samples the matrix reflects.
    pub fn count(&self) -> usize {
        self.n
    }

    pub fn applied_mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn applied_stddev(&self) -> &Array1<f64> {
        &self.stddev
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }
}

/// Average out the skew that round-off introduces, in place.
pub(crate) fn symmetrize(q: &mut Array2<f64>) {
    let m = q.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 0.5 * (q[[i, j]] + q[[j, i]]);
            q[[i, j]] = v;
            q[[j, i]] = v;
        }
    }
}

/// Covariance of an initial block: `Q = Z^T Z / (rows - 1)` with `Z` built
/// per the configured toggles. Needs at least two rows; under scaling every
/// column must have nonzero spread (or the substitute-one policy).
pub fn init_covariance(x_start: ArrayView2<f64>, config: &PcaConfig) -> Result<CovarianceState> {
    let rows = x_start.nrows();
    if rows < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            actual: rows,
        });
    }
    let mut acc = MomentAccumulator::new(config.m);
    for row in x_start.rows() {
        acc.update(row.as_slice().expect("row-major input"))?;
    }
    let stats = acc.statistics(config)?;

    let mut z = Array2::zeros((rows, config.m));
    for (i, row) in x_start.rows().into_iter().enumerate() {
        let zi = stats.standardize(row.as_slice().expect("row-major input"))?;
        z.row_mut(i).assign(&zi);
    }
    let mut q = z.t().dot(&z) / (rows as f64 - 1.0);
    symmetrize(&mut q);

    Ok(CovarianceState {
        q,
        n: rows,
        mean: stats.applied_mean(),
        stddev: stats.applied_stddev(),
    })
}

/// One-sample covariance update.
///
/// `state` must reflect exactly `n` samples and `new` must reflect the same
/// `n + 1` samples that produced `x_new`. The returned matrix satisfies
/// `n * Q' = D ((n-1) Q) D + n * w^T w + z^T z`, entrywise
///
/// ```text
/// q'_ij = ( d_i d_j (n-1) q_ij + n w_i w_j + z_i z_j ) / n
/// ```
///
/// with `d_j = sigma_n_j / sigma_n1_j`, `w_j = (mean_n_j - mean_n1_j) /
/// sigma_n1_j` and `z` the new sample standardized with the new statistics.
/// All means and deviations are the applied ones, so disabled toggles fall
/// out as `w = 0` and `d = 1` without special cases.
pub fn update_covariance(
    state: &CovarianceState,
    new: &Standardization,
    x_new: &[f64],
    n: usize,
) -> Result<CovarianceState> {
    let m = state.dim();
    if state.n != n {
        return Err(Error::CountMismatch {
            state: state.n,
            claimed: n,
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            actual: n,
        });
    }
    if new.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: new.len(),
        });
    }
    validate_sample(x_new, m)?;

    let new_mean = new.applied_mean();
    let new_std = new.applied_stddev();
    let z = new.standardize(x_new)?;

    let nf = n as f64;
    let mut d = Array1::zeros(m);
    let mut w = Array1::zeros(m);
    for j in 0..m {
        d[j] = state.stddev[j] / new_std[j];
        w[j] = (state.mean[j] - new_mean[j]) / new_std[j];
    }

    let mut q = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            q[[i, j]] =
                (d[i] * d[j] * (nf - 1.0) * state.q[[i, j]] + nf * w[i] * w[j] + z[i] * z[j]) / nf;
        }
    }
    symmetrize(&mut q);

    Ok(CovarianceState {
        q,
        n: n + 1,
        mean: new_mean,
        stddev: new_std,
    })
}

/// Square root of the sum of squared entries.
pub fn frobenius_norm(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Frobenius norm of the entry-wise difference.
pub fn frobenius_distance(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            rows_a: a.nrows(),
            cols_a: a.ncols(),
            rows_b: b.nrows(),
            cols_b: b.ncols(),
        });
    }
    let sum: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum.sqrt())
}
