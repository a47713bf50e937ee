//! Full eigendecomposition of symmetric positive semi-definite matrices by
//! cyclic Jacobi rotations, plus projection onto and reconstruction from the
//! eigenbasis.
//!
//! Sizes here are the variable count m (tens, not thousands), where Jacobi
//! is robust and returns orthonormal eigenvectors directly. All components
//! are always computed; there is no truncated mode.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::moments::Standardization;

/// Sweep cap; exceeding it aborts with an error rather than looping.
const MAX_SWEEPS: usize = 64;

/// Convergence threshold on the off-diagonal Frobenius norm, relative to the
/// Frobenius norm of the input.
const OFF_DIAGONAL_TOL: f64 = 1e-13;

/// Largest tolerated asymmetry `max |q_ij - q_ji|` relative to the matrix
/// scale; inputs are expected to be symmetrized upstream.
const SYMMETRY_TOL: f64 = 1e-8;

/// Eigenvalues in descending order paired with orthonormal eigenvectors.
///
/// Row `i` of `loadings` is the eigenvector for `eigenvalues[i]`. Rows carry
/// a deterministic sign: the largest-magnitude entry of each row is
/// positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenState {
    pub eigenvalues: Array1<f64>,
    pub loadings: Array2<f64>,
}

impl EigenState {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Fraction of total variance per component; zeros if the trace is zero.
    pub fn explained(&self) -> Array1<f64> {
        let total: f64 = self.eigenvalues.sum();
        if total > 0.0 {
            &self.eigenvalues / total
        } else {
            Array1::zeros(self.eigenvalues.len())
        }
    }
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let m = a.nrows();
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                sum += a[[i, j]] * a[[i, j]];
            }
        }
    }
    sum.sqrt()
}

/// Flip each row so its largest-magnitude entry is positive, ties broken by
/// the lowest index. Makes raw eigensolver output reproducible and gives
/// tracking a fixed reference orientation.
pub fn canonicalize_signs(loadings: &mut Array2<f64>) {
    for mut row in loadings.rows_mut() {
        let mut best = 0;
        for j in 1..row.len() {
            if row[j].abs() > row[best].abs() {
                best = j;
            }
        }
        if row[best] < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
}

/// Eigendecomposition with eigenvalues sorted descending; ties keep the
/// order the diagonal had before sorting.
///
/// Row-cyclic Jacobi sweeps run until the off-diagonal Frobenius norm drops
/// below 1e-13 times the input norm, with a hard cap of 64 sweeps. The input
/// must be square and symmetric within `1e-8 * max(1, norm)`.
pub fn eigh_descending(q: ArrayView2<f64>) -> Result<EigenState> {
    let m = q.nrows();
    if q.ncols() != m {
        return Err(Error::ShapeMismatch {
            rows_a: m,
            cols_a: q.ncols(),
            rows_b: m,
            cols_b: m,
        });
    }
    if m == 0 {
        return Err(Error::InvalidConfig("empty matrix".into()));
    }

    let norm = crate::covariance::frobenius_norm(q);
    let mut asymmetry = 0.0_f64;
    for i in 0..m {
        for j in (i + 1)..m {
            asymmetry = asymmetry.max((q[[i, j]] - q[[j, i]]).abs());
        }
    }
    if asymmetry > SYMMETRY_TOL * norm.max(1.0) {
        return Err(Error::NotSymmetric { asymmetry });
    }

    let mut a = q.to_owned();
    let mut v = Array2::eye(m);
    let tol = OFF_DIAGONAL_TOL * norm;

    let mut converged = off_diagonal_norm(&a) <= tol;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..m {
            for r in (p + 1)..m {
                let apq = a[[p, r]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[r, r]] - a[[p, p]]) / (2.0 * apq);
                // Asymptotic form guards theta^2 overflow for huge ratios.
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;

                a[[p, p]] -= t * apq;
                a[[r, r]] += t * apq;
                a[[p, r]] = 0.0;
                a[[r, p]] = 0.0;
                for k in 0..m {
                    if k != p && k != r {
                        let akp = a[[k, p]];
                        let akr = a[[k, r]];
                        a[[k, p]] = c * akp - s * akr;
                        a[[p, k]] = a[[k, p]];
                        a[[k, r]] = c * akr + s * akp;
                        a[[r, k]] = a[[k, r]];
                    }
                }
                for k in 0..m {
                    let vkp = v[[k, p]];
                    let vkr = v[[k, r]];
                    v[[k, p]] = c * vkp - s * vkr;
                    v[[k, r]] = c * vkr + s * vkp;
                }
            }
        }
        converged = off_diagonal_norm(&a) <= tol;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    // Stable sort keeps ascending original index among equal eigenvalues.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).unwrap());

    let eigenvalues = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut loadings = Array2::zeros((m, m));
    for (row, &col) in order.iter().enumerate() {
        for k in 0..m {
            loadings[[row, k]] = v[[k, col]];
        }
    }
    canonicalize_signs(&mut loadings);

    Ok(EigenState {
        eigenvalues,
        loadings,
    })
}

/// Principal component values of one standardized sample: `p_i = z . c_i`
/// with `c_i` the i-th eigenvector row.
pub fn project(z: ArrayView1<f64>, loadings: ArrayView2<f64>) -> Result<Array1<f64>> {
    if z.len() != loadings.ncols() {
        return Err(Error::DimensionMismatch {
            expected: loadings.ncols(),
            actual: z.len(),
        });
    }
    Ok(loadings.dot(&z))
}

/// Inverse of [`project`] followed by un-standardization: `x = (p C)
/// un-standardized`, valid because the loadings are orthogonal.
pub fn reconstruct(
    p: ArrayView1<f64>,
    loadings: ArrayView2<f64>,
    s: &Standardization,
) -> Result<Array1<f64>> {
    if p.len() != loadings.nrows() {
        return Err(Error::DimensionMismatch {
            expected: loadings.nrows(),
            actual: p.len(),
        });
    }
    let z = loadings.t().dot(&p);
    s.unstandardize(z.as_slice().expect("contiguous"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{frobenius_distance, frobenius_norm};
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_invariants(q: &Array2<f64>, state: &EigenState) {
        let m = q.nrows();
        for i in 0..m.saturating_sub(1) {
            assert!(
                state.eigenvalues[i] >= state.eigenvalues[i + 1],
                "eigenvalues not descending at {i}"
            );
        }
        let gram = state.loadings.dot(&state.loadings.t());
        let eye = Array2::eye(m);
        let ortho = frobenius_distance(gram.view(), eye.view()).unwrap();
        assert!(
            ortho <= 1e-10 * m as f64,
            "orthogonality residual {ortho:.3e}"
        );

        let mut lam = Array2::zeros((m, m));
        for i in 0..m {
            lam[[i, i]] = state.eigenvalues[i];
        }
        let residual = state.loadings.dot(q).dot(&state.loadings.t());
        let dist = frobenius_distance(residual.view(), lam.view()).unwrap();
        assert!(
            dist <= 1e-8 * frobenius_norm(q.view()).max(1e-300),
            "diagonalization residual {dist:.3e}"
        );
    }

    /// Eigenvalue count below `x` from the inertia of `A - xI`, using an
    /// LDL^T factorization (diagonal entries are ratios of successive
    /// leading principal minors). Returns None on a zero pivot.
    fn count_below(a: &Array2<f64>, x: f64) -> Option<usize> {
        let m = a.nrows();
        let mut l = Array2::<f64>::eye(m);
        let mut d = vec![0.0_f64; m];
        for j in 0..m {
            let mut dj = a[[j, j]] - x;
            for k in 0..j {
                dj -= l[[j, k]] * l[[j, k]] * d[k];
            }
            if dj == 0.0 {
                return None;
            }
            d[j] = dj;
            for i in (j + 1)..m {
                let mut v = a[[i, j]];
                for k in 0..j {
                    v -= l[[i, k]] * l[[j, k]] * d[k];
                }
                l[[i, j]] = v / dj;
            }
        }
        Some(d.iter().filter(|&&v| v < 0.0).count())
    }

    /// k-th smallest eigenvalue by bisection inside the Gershgorin interval.
    fn bisect_eigenvalue(a: &Array2<f64>, k: usize) -> f64 {
        let m = a.nrows();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let radius: f64 = (0..m).filter(|&j| j != i).map(|j| a[[i, j]].abs()).sum();
            lo = lo.min(a[[i, i]] - radius);
            hi = hi.max(a[[i, i]] + radius);
        }
        for _ in 0..200 {
            let mut mid = 0.5 * (lo + hi);
            let mut count = count_below(a, mid);
            let mut nudge = (hi - lo) * 1e-14 + 1e-300;
            while count.is_none() {
                mid += nudge;
                nudge *= 2.0;
                count = count_below(a, mid);
            }
            if count.unwrap() <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn identity_input() {
        let q: Array2<f64> = Array2::eye(3);
        let state = eigh_descending(q.view()).unwrap();
        for i in 0..3 {
            assert!((state.eigenvalues[i] - 1.0).abs() <= 1e-14);
        }
        assert_invariants(&q, &state);
    }

    #[test]
    fn diagonal_input() {
        let q = array![[2.0, 0.0], [0.0, 1.0]];
        let state = eigh_descending(q.view()).unwrap();
        assert_eq!(state.eigenvalues.as_slice().unwrap(), &[2.0, 1.0]);
        assert_eq!(state.loadings, array![[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn analytic_two_by_two_correlation() {
        let q = array![[1.0, 0.6], [0.6, 1.0]];
        let state = eigh_descending(q.view()).unwrap();
        assert!((state.eigenvalues[0] - 1.6).abs() <= 1e-12);
        assert!((state.eigenvalues[1] - 0.4).abs() <= 1e-12);
        let r = 0.5_f64.sqrt();
        // Canonical signs: first row all positive, second row tie broken so
        // entry 0 is positive.
        assert!((state.loadings[[0, 0]] - r).abs() <= 1e-12);
        assert!((state.loadings[[0, 1]] - r).abs() <= 1e-12);
        assert!((state.loadings[[1, 0]] - r).abs() <= 1e-12);
        assert!((state.loadings[[1, 1]] + r).abs() <= 1e-12);
        assert_invariants(&q, &state);
    }

    #[test]
    fn exact_ties_keep_original_order() {
        let mut q: Array2<f64> = Array2::zeros((3, 3));
        q[[0, 0]] = 2.0;
        q[[1, 1]] = 2.0;
        q[[2, 2]] = 1.0;
        let state = eigh_descending(q.view()).unwrap();
        assert_eq!(state.eigenvalues.as_slice().unwrap(), &[2.0, 2.0, 1.0]);
        assert_eq!(state.loadings, Array2::<f64>::eye(3));
    }

    #[test]
    fn random_symmetric_matches_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let b: Array2<f64> = Array2::from_shape_fn((8, 8), |_| rng.random_range(-1.0..1.0));
            // b^T b is symmetric PSD by construction.
            let q = b.t().dot(&b);
            let state = eigh_descending(q.view()).unwrap();
            assert_invariants(&q, &state);

            for i in 0..8 {
                let reference = bisect_eigenvalue(&q, 7 - i);
                assert!(
                    (state.eigenvalues[i] - reference).abs() <= 1e-8 * reference.abs().max(1.0),
                    "eigenvalue {i}: jacobi {} vs bisection {reference}",
                    state.eigenvalues[i]
                );
            }

            let trace: f64 = (0..8).map(|i| q[[i, i]]).sum();
            let total: f64 = state.eigenvalues.sum();
            assert!((total - trace).abs() <= 1e-10 * trace);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let q = array![[1.0, 0.5], [0.0, 1.0]];
        assert!(matches!(
            eigh_descending(q.view()),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn rejects_non_square_input() {
        let q: Array2<f64> = Array2::zeros((2, 3));
        assert!(matches!(
            eigh_descending(q.view()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn zero_matrix_is_fine() {
        let q: Array2<f64> = Array2::zeros((2, 2));
        let state = eigh_descending(q.view()).unwrap();
        assert_eq!(state.eigenvalues.as_slice().unwrap(), &[0.0, 0.0]);
        assert_eq!(state.explained().as_slice().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn project_basics() {
        let c: Array2<f64> = Array2::eye(3);
        let z = array![1.0, -2.0, 0.5];
        let p = project(z.view(), c.view()).unwrap();
        assert_eq!(p, z);

        let zero = Array1::<f64>::zeros(3);
        let p = project(zero.view(), c.view()).unwrap();
        assert_eq!(p, zero);

        let short = array![1.0];
        assert!(project(short.view(), c.view()).is_err());
    }

    #[test]
    fn projection_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b: Array2<f64> = Array2::from_shape_fn((5, 5), |_| rng.random_range(-1.0..1.0));
        let q = b.t().dot(&b);
        let state = eigh_descending(q.view()).unwrap();
        let s = Standardization {
            mean: array![1.0, -2.0, 0.0, 3.0, 0.5],
            stddev: array![0.5, 2.0, 1.0, 4.0, 1.5],
            centering: true,
            scaling: true,
        };

        let x = array![0.3, -1.1, 2.2, 3.4, -0.7];
        let z = s.standardize(x.as_slice().unwrap()).unwrap();
        let p = project(z.view(), state.loadings.view()).unwrap();
        let back = reconstruct(p.view(), state.loadings.view(), &s).unwrap();
        for j in 0..5 {
            assert!((back[j] - x[j]).abs() <= 1e-10 * x[j].abs().max(1.0));
        }
    }

    #[test]
    fn truncation_error_equals_dropped_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let b: Array2<f64> = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0));
        let q = b.t().dot(&b);
        let state = eigh_descending(q.view()).unwrap();
        let s = Standardization {
            mean: Array1::zeros(4),
            stddev: Array1::ones(4),
            centering: true,
            scaling: true,
        };

        let z = array![0.9, -0.4, 1.3, 0.2];
        let p = project(z.view(), state.loadings.view()).unwrap();
        let mut truncated = p.clone();
        truncated[2] = 0.0;
        truncated[3] = 0.0;
        let back = reconstruct(truncated.view(), state.loadings.view(), &s).unwrap();

        // With an orthonormal basis the reconstruction error norm equals the
        // norm of the dropped coefficients.
        let err: f64 = (0..4).map(|j| (back[j] - z[j]).powi(2)).sum::<f64>().sqrt();
        let dropped = (p[2] * p[2] + p[3] * p[3]).sqrt();
        assert!((err - dropped).abs() <= 1e-12 * dropped.max(1.0));
    }

    #[test]
    fn reconstruct_matches_generic_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b: Array2<f64> = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0));
        let q = b.t().dot(&b);
        let state = eigh_descending(q.view()).unwrap();
        let s = Standardization {
            mean: array![1.0, 2.0, 3.0, 4.0],
            stddev: array![1.0, 0.5, 2.0, 1.5],
            centering: true,
            scaling: true,
        };
        let p = array![0.7, -0.2, 0.05, 1.1];

        // Gauss-Jordan inverse of the loadings, no orthogonality shortcut.
        let m = 4;
        let mut aug = Array2::zeros((m, 2 * m));
        for i in 0..m {
            for j in 0..m {
                aug[[i, j]] = state.loadings[[i, j]];
            }
            aug[[i, m + i]] = 1.0;
        }
        for col in 0..m {
            let mut pivot = col;
            for r in (col + 1)..m {
                if aug[[r, col]].abs() > aug[[pivot, col]].abs() {
                    pivot = r;
                }
            }
            if pivot != col {
                for j in 0..2 * m {
                    let tmp = aug[[col, j]];
                    aug[[col, j]] = aug[[pivot, j]];
                    aug[[pivot, j]] = tmp;
                }
            }
            let d = aug[[col, col]];
            for j in 0..2 * m {
                aug[[col, j]] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = aug[[r, col]];
                    for j in 0..2 * m {
                        aug[[r, j]] -= f * aug[[col, j]];
                    }
                }
            }
        }
        // Projection is p = C z, so the generic inverse path is z = C^{-1} p.
        let mut z = Array1::zeros(m);
        for j in 0..m {
            for i in 0..m {
                z[j] += aug[[j, m + i]] * p[i];
            }
        }
        let expected = s.unstandardize(z.as_slice().unwrap()).unwrap();
        let got = reconstruct(p.view(), state.loadings.view(), &s).unwrap();
        for j in 0..m {
            assert!((got[j] - expected[j]).abs() <= 1e-10 * expected[j].abs().max(1.0));
        }
    }
}
