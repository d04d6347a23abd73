//! Pairwise Euclidean distance matrices, optionally raised to an exponent.

use ndarray::{Array2, Axis};
use num_traits::Signed;
use rayon::prelude::*;

use crate::error::{DcovError, Result};
use crate::sample::Sample;
use crate::scalar::{Field, Real};

/// Symmetric, zero-diagonal matrix of `|x_k - x_l|^alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T> {
    entries: Array2<T>,
    exponent: f64,
}

pub(crate) fn check_exponent(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(DcovError::InvalidExponent(alpha))
    }
}

impl<T: Field> DistanceMatrix<T> {
    /// Wraps precomputed entries after checking the matrix invariants.
    pub fn from_entries(entries: Array2<T>, exponent: f64) -> Result<Self> {
        check_exponent(exponent)?;
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(DcovError::Shape(format!(
                "distance matrix must be square, got {}x{}",
                n,
                entries.ncols()
            )));
        }
        let zero = T::zero();
        for k in 0..n {
            if entries[[k, k]] != zero {
                return Err(DcovError::InvalidParameter(format!(
                    "nonzero diagonal at {k}"
                )));
            }
            for l in 0..k {
                let v = entries[[k, l]];
                if v != entries[[l, k]] {
                    return Err(DcovError::InvalidParameter(format!(
                        "asymmetric entry ({k}, {l})"
                    )));
                }
                if !(v >= zero) || !v.is_finite_value() {
                    return Err(DcovError::InvalidParameter(format!(
                        "invalid distance at ({k}, {l})"
                    )));
                }
            }
        }
        Ok(Self { entries, exponent })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<T> {
        &self.entries
    }

    pub fn get(&self, k: usize, l: usize) -> T {
        self.entries[[k, l]]
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// At `alpha = 2` the statistic only sees second moments and no longer
    /// characterizes independence.
    pub fn is_characterizing(&self) -> bool {
        self.exponent < 2.0
    }

    /// The submatrix with row and column `i` removed.
    pub fn without_index(&self, i: usize) -> Self {
        let keep: Vec<usize> = (0..self.n()).filter(|&k| k != i).collect();
        self.select(&keep)
    }

    /// The matrix of the sample reindexed by `idx`, i.e. `D[idx[k], idx[l]]`.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            entries: self.entries.select(Axis(0), idx).select(Axis(1), idx),
            exponent: self.exponent,
        }
    }
}

impl<T: Field + Signed> DistanceMatrix<T> {
    /// `|x_k - x_l|` for scalar observations, computed exactly in `T`.
    ///
    /// Useful for exact rational arithmetic where square roots are unavailable.
    pub fn from_scalar_gaps(values: &[T]) -> Self {
        let n = values.len();
        let entries = Array2::from_shape_fn((n, n), |(k, l)| (values[k] - values[l]).abs());
        Self {
            entries,
            exponent: 1.0,
        }
    }
}

/// Pairwise distances `|row_k - row_l|^alpha` for `alpha` in `(0, 2]`.
///
/// Rows are filled in parallel; every entry is an independent sum over
/// coordinates in index order, so the result does not depend on the thread
/// count.
pub fn distance_matrix<T: Real>(s: &Sample<T>, alpha: f64) -> Result<DistanceMatrix<T>> {
    check_exponent(alpha)?;
    let n = s.n();
    if n < 2 {
        return Err(DcovError::TooFewObservations {
            required: 2,
            actual: n,
        });
    }
    let values = s.values();
    let half = T::from_f64_lossy(alpha / 2.0);
    let mut entries = Array2::<T>::zeros((n, n));
    entries
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(k, mut out)| {
            let rk = values.row(k);
            for l in 0..n {
                if l == k {
                    continue;
                }
                let mut sq = T::zero();
                for (a, b) in rk.iter().zip(values.row(l).iter()) {
                    let d = *a - *b;
                    sq += d * d;
                }
                out[l] = if alpha == 1.0 {
                    sq.sqrt()
                } else if alpha == 2.0 {
                    sq
                } else {
                    sq.powf(half)
                };
            }
        });
    Ok(DistanceMatrix {
        entries,
        exponent: alpha,
    })
}
