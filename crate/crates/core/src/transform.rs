//! Sample transforms behind the affine-invariant and rank statistics.

use nalgebra::{DMatrix, RealField};
use ndarray::Array2;
use rand::Rng;

use crate::dcov::{dcov_summary, DCovSummary, Variant};
use crate::error::{DcovError, Result};
use crate::rng::stream_rng;
use crate::sample::Sample;
use crate::scalar::Real;

/// Smallest admissible eigenvalue of the sample covariance, relative to the largest.
pub const COVARIANCE_EIGEN_FLOOR: f64 = 1e-12;

/// `X S^{-1/2}`, with `S` the sample covariance (divisor `n - 1`) and the
/// symmetric inverse square root taken through an eigendecomposition.
///
/// `block` names the sample in error messages.
pub fn affine_rescale<T>(s: &Sample<T>, block: &str) -> Result<Sample<T>>
where
    T: Real + RealField,
{
    let (n, d) = (s.n(), s.d());
    if n <= d {
        return Err(DcovError::TooFewObservations {
            required: d + 1,
            actual: n,
        });
    }
    let values = s.values();
    let data = DMatrix::<T>::from_fn(n, d, |k, j| values[[k, j]]);
    let nf = <T as Real>::from_f64_lossy(n as f64);
    let means = DMatrix::<T>::from_fn(1, d, |_, j| data.column(j).sum() / nf);
    let centered = DMatrix::<T>::from_fn(n, d, |k, j| data[(k, j)] - means[(0, j)]);
    let divisor = <T as Real>::from_f64_lossy((n - 1) as f64);
    let cov = (centered.transpose() * &centered) / divisor;

    let eig = cov.symmetric_eigen();
    let mut lo = eig.eigenvalues[0];
    let mut hi = eig.eigenvalues[0];
    for &v in eig.eigenvalues.iter() {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    let floor = <T as Real>::from_f64_lossy(COVARIANCE_EIGEN_FLOOR);
    if !(hi > T::zero()) || lo < floor * hi {
        let ratio = if hi > T::zero() {
            (lo / hi).to_f64_lossy()
        } else {
            0.0
        };
        return Err(DcovError::SingularCovariance {
            block: block.to_string(),
            ratio,
        });
    }
    let inv_root = DMatrix::<T>::from_diagonal(
        &eig.eigenvalues.map(|v| T::one() / num_traits::Float::sqrt(v)),
    );
    let whitening = &eig.eigenvectors * inv_root * eig.eigenvectors.transpose();
    let out = data * whitening;
    let block = Array2::from_shape_fn((n, d), |(k, j)| out[(k, j)]);
    s.with_values(block)
}

/// Distance statistics of the whitened pair; invariant under invertible
/// affine maps of either sample.
pub fn affine_dcov_summary<T>(x: &Sample<T>, y: &Sample<T>, alpha: f64) -> Result<DCovSummary<T>>
where
    T: Real + RealField,
{
    let xs = affine_rescale(x, "x")?;
    let ys = affine_rescale(y, "y")?;
    let mut s = dcov_summary(&xs, &ys, alpha)?;
    s.variant = Variant::Affine;
    Ok(s)
}

/// Ranks `1..=n` of a one-dimensional sample; ties are ordered uniformly at
/// random from `seed`.
pub fn rank_transform<T: Real>(s: &Sample<T>, seed: u64) -> Result<Sample<T>> {
    let values = s.as_column()?;
    let ranks = ranks_random_ties(&values, seed);
    let block = Array2::from_shape_fn((values.len(), 1), |(k, _)| {
        <T as Real>::from_f64_lossy(ranks[k] as f64)
    });
    s.with_values(block)
}

/// Ranks starting at 1, ties broken by independent uniform keys.
pub fn ranks_random_ties<T: PartialOrd + Copy>(values: &[T], seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, 0);
    let mut order: Vec<(usize, u64)> = (0..values.len()).map(|i| (i, rng.random())).collect();
    order.sort_by(|a, b| {
        values[a.0]
            .partial_cmp(&values[b.0])
            .expect("finite values")
            .then(a.1.cmp(&b.1))
    });
    let mut ranks = vec![0; values.len()];
    for (r, (i, _)) in order.into_iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Ranks with ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Distance statistics of the rank-transformed pair. `x` and `y` use
/// different tie-breaking streams derived from `seed`.
pub fn rank_dcov_summary<T: Real>(x: &Sample<T>, y: &Sample<T>, seed: u64) -> Result<DCovSummary<T>> {
    let rx = rank_transform(x, crate::rng::derive_seed(seed, 0))?;
    let ry = rank_transform(y, crate::rng::derive_seed(seed, 1))?;
    let mut s = dcov_summary(&rx, &ry, 1.0)?;
    s.variant = Variant::Rank;
    Ok(s)
}
