//! Continuity layer over the per-step eigendecomposition.
//!
//! A raw eigensolver re-run at every step produces series with three kinds
//! of artificial jumps: orientation flips of a single eigenvector, basis
//! churn inside a nearly degenerate eigenvalue group, and rank swaps when
//! two eigenvalue trajectories cross. The tracker removes all three by
//! assigning each raw component a stable tracked identity and aligning the
//! emitted basis to the previous step.
//!
//! Corrections never feed back into the covariance matrix (it is basis
//! independent) and already-emitted history is never rewritten; every
//! correction is recorded as an event instead.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::eigen::EigenState;
use crate::error::{Error, Result};

/// Eigenvalue scale floor so that the degeneracy threshold stays positive
/// for all-zero spectra.
pub const EPS_FLOOR: f64 = 1e-12;

/// Below this `‖R - I‖_F` the Procrustes rotation is round-off; the block
/// is passed through untouched so an unchanged input is a bit-exact fixed
/// point.
const PROCRUSTES_SKIP_TOL: f64 = 1e-13;

/// Above this `‖R - I‖_F` an in-group alignment is logged as a rebase.
const REBASE_LOG_TOL: f64 = 1e-6;

/// What kind of correction the tracker applied at a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionKind {
    /// One well-separated eigenvector arrived orientation-flipped.
    Sign,
    /// A nearly degenerate group arrived in a rotated in-subspace basis.
    DegenerateRebase,
    /// Tracked identities changed rank positions (eigenvalue crossing).
    CrossingSwap,
}

/// One correction, tagged with the sample count it happened at and the
/// tracked component identities involved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionEvent {
    pub step: usize,
    pub kind: CorrectionKind,
    pub indices: Vec<usize>,
}

/// Cumulative number of corrections per kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionCounts {
    pub sign: u64,
    pub degenerate_rebase: u64,
    pub crossing_swap: u64,
}

/// Contiguous groups of nearly equal eigenvalues over a descending list.
///
/// Groups partition the index range; within a group every adjacent gap is
/// below the threshold, across a boundary it is at or above.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegeneracyPartition {
    groups: Vec<Range<usize>>,
}

impl DegeneracyPartition {
    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }
}

/// Split a descending eigenvalue list into nearly degenerate groups.
///
/// Indices `i` and `i + 1` share a group iff `λ_i - λ_{i+1} < eps_rel *
/// max(λ_0, 1e-12)`; membership is transitive, so groups are contiguous
/// ranges.
pub fn detect_degenerate_groups(lambda: ArrayView1<f64>, eps_rel: f64) -> DegeneracyPartition {
    let m = lambda.len();
    let mut groups = Vec::new();
    if m == 0 {
        return DegeneracyPartition { groups };
    }
    let threshold = eps_rel * lambda[0].max(EPS_FLOOR);
    let mut start = 0;
    for i in 1..m {
        if lambda[i - 1] - lambda[i] >= threshold {
            groups.push(start..i);
            start = i;
        }
    }
    groups.push(start..m);
    DegeneracyPartition { groups }
}

/// Orient `new_row` towards `prev_row`: returns `new_row` when their dot
/// product is non-negative (a zero dot keeps the new orientation), else the
/// negated row.
pub fn align_signs(prev_row: ArrayView1<f64>, new_row: ArrayView1<f64>) -> Array1<f64> {
    if prev_row.dot(&new_row) < 0.0 {
        new_row.mapv(|v| -v)
    } else {
        new_row.to_owned()
    }
}

/// Singular value decomposition of a small square matrix by one-sided
/// Jacobi rotations: `m = U diag(sigma) V^T` with `sigma >= 0`.
///
/// Columns whose singular value vanishes get an arbitrary unit vector
/// orthogonal to the rest, so `U` is always orthogonal.
fn svd_small(m: &Array2<f64>) -> (Array2<f64>, Vec<f64>, Array2<f64>) {
    let k = m.nrows();
    let mut b = m.clone();
    let mut v: Array2<f64> = Array2::eye(k);

    for _ in 0..60 {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let mut a = 0.0;
                let mut c = 0.0;
                let mut d = 0.0;
                for r in 0..k {
                    a += b[[r, i]] * b[[r, i]];
                    c += b[[r, j]] * b[[r, j]];
                    d += b[[r, i]] * b[[r, j]];
                }
                if d.abs() <= 1e-15 * (a * c).sqrt() || d == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (c - a) / (2.0 * d);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let cs = 1.0 / t.hypot(1.0);
                let sn = t * cs;
                for r in 0..k {
                    let bi = b[[r, i]];
                    let bj = b[[r, j]];
                    b[[r, i]] = cs * bi - sn * bj;
                    b[[r, j]] = sn * bi + cs * bj;
                    let vi = v[[r, i]];
                    let vj = v[[r, j]];
                    v[[r, i]] = cs * vi - sn * vj;
                    v[[r, j]] = sn * vi + cs * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma = vec![0.0; k];
    let mut u: Array2<f64> = Array2::zeros((k, k));
    let mut pending = Vec::new();
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for j in 0..k {
        let norm: f64 = (0..k).map(|r| b[[r, j]] * b[[r, j]]).sum::<f64>().sqrt();
        if norm > 1e-14 * scale.max(1e-300) {
            sigma[j] = norm;
            for r in 0..k {
                u[[r, j]] = b[[r, j]] / norm;
            }
        } else {
            pending.push(j);
        }
    }
    // Fill rank-deficient directions with standard basis vectors made
    // orthogonal to the columns already present.
    for &j in &pending {
        for cand in 0..k {
            let mut col: Vec<f64> = (0..k).map(|r| if r == cand { 1.0 } else { 0.0 }).collect();
            for other in 0..k {
                if other == j || (sigma[other] == 0.0 && other >= j) {
                    continue;
                }
                let proj: f64 = (0..k).map(|r| col[r] * u[[r, other]]).sum();
                for r in 0..k {
                    col[r] -= proj * u[[r, other]];
                }
            }
            let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.1 {
                for r in 0..k {
                    u[[r, j]] = col[r] / norm;
                }
                break;
            }
        }
    }
    (u, sigma, v)
}

/// Orthogonal k-by-k matrix `R` minimizing `‖R · new_block - prev_block‖_F`
/// (orthogonal Procrustes; reflections are allowed).
fn procrustes_rotation(prev_block: ArrayView2<f64>, new_block: ArrayView2<f64>) -> Array2<f64> {
    let m = prev_block.dot(&new_block.t());
    let (u, _sigma, v) = svd_small(&m);
    u.dot(&v.t())
}

fn identity_deviation(r: &Array2<f64>) -> f64 {
    let k = r.nrows();
    let mut sum = 0.0;
    for i in 0..k {
        for j in 0..k {
            let d = r[[i, j]] - if i == j { 1.0 } else { 0.0 };
            sum += d * d;
        }
    }
    sum.sqrt()
}

/// Rotate `new_block` inside its own row span so it is as close as possible
/// to `prev_block` in Frobenius distance.
///
/// Both blocks must have orthonormal rows spanning (numerically) the same
/// subspace; the result keeps that span. With a single row this reduces
/// exactly to [`align_signs`].
pub fn align_degenerate_block(
    prev_block: ArrayView2<f64>,
    new_block: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    if prev_block.nrows() != new_block.nrows() || prev_block.ncols() != new_block.ncols() {
        return Err(Error::ShapeMismatch {
            rows_a: prev_block.nrows(),
            cols_a: prev_block.ncols(),
            rows_b: new_block.nrows(),
            cols_b: new_block.ncols(),
        });
    }
    let r = procrustes_rotation(prev_block, new_block);
    if identity_deviation(&r) <= PROCRUSTES_SKIP_TOL {
        Ok(new_block.to_owned())
    } else {
        Ok(r.dot(&new_block))
    }
}

/// Principal angles (radians, ascending) between the row spans of two
/// blocks with orthonormal rows.
///
/// Cosines are the singular values of `A B^T`; sines come from the residual
/// of projecting `B` onto the span of `A`. Small angles use the sine form
/// and large ones the cosine form, so both ends stay well conditioned.
pub fn principal_angles(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::ShapeMismatch {
            rows_a: a.nrows(),
            cols_a: a.ncols(),
            rows_b: b.nrows(),
            cols_b: b.ncols(),
        });
    }
    let m = a.dot(&b.t());
    let (_u, sigma, _v) = svd_small(&m);
    let mut cosines = sigma;
    cosines.sort_by(|x, y| y.partial_cmp(x).unwrap());

    // Residual of b after projection onto span(a); its singular values are
    // the sines of the principal angles.
    let residual = &b.to_owned() - &m.t().dot(&a);
    let gram = residual.dot(&residual.t());
    let eig = crate::eigen::eigh_descending(gram.view())?;
    let mut sines: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    sines.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let angles = sines
        .iter()
        .zip(&cosines)
        .map(|(&s, &c)| {
            if s <= std::f64::consts::FRAC_1_SQRT_2 {
                s.min(1.0).asin()
            } else {
                c.clamp(0.0, 1.0).acos()
            }
        })
        .collect();
    Ok(angles)
}

/// Stable assignment of raw eigensolver rank positions to tracked component
/// identities.
///
/// The basis and eigenvalues are stored in tracked-identity order, so after
/// a crossing the eigenvalue vector is no longer descending; the raw
/// decomposition keeps that role.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    prev_loadings: Array2<f64>,
    prev_eigenvalues: Array1<f64>,
    /// `permutation[raw_rank] = tracked identity`; a bijection.
    permutation: Vec<usize>,
    /// Cumulative orientation flips per tracked identity.
    sign_flips: Vec<u64>,
    counts: CorrectionCounts,
    /// Events since the last drain.
    pending: Vec<CorrectionEvent>,
    /// Sample count of the decomposition currently held.
    step: usize,
}

impl TrackerState {
    /// Start tracking from a warm-up decomposition at sample count `step`.
    /// Identities are the initial rank positions.
    pub fn new(initial: &EigenState, step: usize) -> Self {
        let m = initial.dim();
        TrackerState {
            prev_loadings: initial.loadings.clone(),
            prev_eigenvalues: initial.eigenvalues.clone(),
            permutation: (0..m).collect(),
            sign_flips: vec![0; m],
            counts: CorrectionCounts::default(),
            pending: Vec::new(),
            step,
        }
    }

    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    /// Tracked basis at the last step, identity order.
    pub fn loadings(&self) -> &Array2<f64> {
        &self.prev_loadings
    }

    /// Tracked eigenvalues at the last step, identity order (not
    /// necessarily descending after a crossing).
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.prev_eigenvalues
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn sign_flips(&self) -> &[u64] {
        &self.sign_flips
    }

    pub fn counts(&self) -> CorrectionCounts {
        self.counts
    }

    /// Remove and return the events accumulated since the last drain.
    pub fn take_events(&mut self) -> Vec<CorrectionEvent> {
        std::mem::take(&mut self.pending)
    }

    /// Fold a fresh raw decomposition into the tracked sequence.
    ///
    /// Order of corrections: degenerate groups are detected on the new
    /// spectrum, crossings are resolved by re-matching identities inside
    /// those groups, then each group basis is aligned to the previous step
    /// (which covers sign flips for singleton groups). The returned state is
    /// in tracked-identity order; feeding back an unchanged decomposition
    /// returns it bit-identically with no events.
    pub fn track(&mut self, new: &EigenState, eps_rel: f64) -> Result<EigenState> {
        let m = self.dim();
        if new.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: new.dim(),
            });
        }
        self.step += 1;

        let partition = detect_degenerate_groups(new.eigenvalues.view(), eps_rel);
        let perm = match_components(self, new, &partition);
        if perm != self.permutation {
            let mut involved: Vec<usize> = perm
                .iter()
                .zip(&self.permutation)
                .filter(|(a, b)| a != b)
                .map(|(&a, _)| a)
                .collect();
            involved.sort_unstable();
            self.counts.crossing_swap += 1;
            self.pending.push(CorrectionEvent {
                step: self.step,
                kind: CorrectionKind::CrossingSwap,
                indices: involved,
            });
        }

        let mut out_values = Array1::zeros(m);
        let mut out_loadings = Array2::zeros((m, m));
        for group in partition.groups() {
            let ids: Vec<usize> = group.clone().map(|i| perm[i]).collect();
            for i in group.clone() {
                out_values[perm[i]] = new.eigenvalues[i];
            }
            if group.len() == 1 {
                let id = ids[0];
                let new_row = new.loadings.row(group.start);
                if self.prev_loadings.row(id).dot(&new_row) < 0.0 {
                    out_loadings.row_mut(id).assign(&new_row.mapv(|v| -v));
                    self.sign_flips[id] += 1;
                    self.counts.sign += 1;
                    self.pending.push(CorrectionEvent {
                        step: self.step,
                        kind: CorrectionKind::Sign,
                        indices: vec![id],
                    });
                } else {
                    out_loadings.row_mut(id).assign(&new_row);
                }
            } else {
                let k = group.len();
                let mut prev_block = Array2::zeros((k, m));
                let mut new_block = Array2::zeros((k, m));
                for (r, i) in group.clone().enumerate() {
                    prev_block
                        .row_mut(r)
                        .assign(&self.prev_loadings.row(ids[r]));
                    new_block.row_mut(r).assign(&new.loadings.row(i));
                }
                let rot = procrustes_rotation(prev_block.view(), new_block.view());
                let deviation = identity_deviation(&rot);
                let aligned = if deviation <= PROCRUSTES_SKIP_TOL {
                    new_block
                } else {
                    rot.dot(&new_block)
                };
                if deviation > REBASE_LOG_TOL {
                    let mut involved = ids.clone();
                    involved.sort_unstable();
                    self.counts.degenerate_rebase += 1;
                    self.pending.push(CorrectionEvent {
                        step: self.step,
                        kind: CorrectionKind::DegenerateRebase,
                        indices: involved,
                    });
                }
                for (r, &id) in ids.iter().enumerate() {
                    out_loadings.row_mut(id).assign(&aligned.row(r));
                }
            }
        }

        self.prev_loadings = out_loadings.clone();
        self.prev_eigenvalues = out_values.clone();
        self.permutation = perm;
        Ok(EigenState {
            eigenvalues: out_values,
            loadings: out_loadings,
        })
    }
}

/// Assign raw rank positions to tracked identities for one step.
///
/// Positions outside multi-member degenerate groups keep their current
/// identity. Inside a group the identities currently held by the group's
/// positions are re-distributed greedily by descending `|dot(prev tracked
/// row, new raw row)|`, which resolves crossings while two trajectories are
/// within the degeneracy window.
pub fn match_components(
    tracker: &TrackerState,
    new: &EigenState,
    partition: &DegeneracyPartition,
) -> Vec<usize> {
    let mut perm = tracker.permutation.clone();
    for group in partition.groups() {
        let k = group.len();
        if k < 2 {
            continue;
        }
        let positions: Vec<usize> = group.clone().collect();
        let ids: Vec<usize> = positions.iter().map(|&i| tracker.permutation[i]).collect();
        let mut score = vec![vec![0.0; k]; k];
        for (a, &pos) in positions.iter().enumerate() {
            for (b, &id) in ids.iter().enumerate() {
                score[a][b] = tracker
                    .prev_loadings
                    .row(id)
                    .dot(&new.loadings.row(pos))
                    .abs();
            }
        }
        let mut pos_taken = vec![false; k];
        let mut id_taken = vec![false; k];
        for _ in 0..k {
            let mut best = (0, 0, f64::NEG_INFINITY);
            for a in 0..k {
                if pos_taken[a] {
                    continue;
                }
                for b in 0..k {
                    if id_taken[b] {
                        continue;
                    }
                    if score[a][b] > best.2 {
                        best = (a, b, score[a][b]);
                    }
                }
            }
            pos_taken[best.0] = true;
            id_taken[best.1] = true;
            perm[positions[best.0]] = ids[best.1];
        }
    }
    perm
}

/// Split a jump in consecutive PC values into the part caused by the sample
/// changing and the part caused by the loadings changing.
///
/// `sample_term = (z_curr - z_prev) C_curr^T` and `coefficient_term =
/// z_prev (C_curr - C_prev)^T`; their sum telescopes to `p_curr - p_prev`.
pub fn discontinuity_decomposition(
    z_prev: ArrayView1<f64>,
    z_curr: ArrayView1<f64>,
    c_prev: ArrayView2<f64>,
    c_curr: ArrayView2<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let m = z_prev.len();
    if z_curr.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: z_curr.len(),
        });
    }
    if c_prev.nrows() != c_curr.nrows() || c_prev.ncols() != c_curr.ncols() {
        return Err(Error::ShapeMismatch {
            rows_a: c_prev.nrows(),
            cols_a: c_prev.ncols(),
            rows_b: c_curr.nrows(),
            cols_b: c_curr.ncols(),
        });
    }
    if c_curr.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: c_curr.ncols(),
        });
    }
    let dz = &z_curr - &z_prev;
    let sample_term = c_curr.dot(&dz);
    let dc = &c_curr - &c_prev;
    let coefficient_term = dc.dot(&z_prev);
    Ok((sample_term, coefficient_term))
}
