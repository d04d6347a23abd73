//! Double centering and the distance covariance / correlation statistics.
//!
//! For distance matrices `a`, `b` of the same sample size, the centered
//! entries are `A_kl = a_kl - a_k. - a_.l + a_..` and
//!
//! ```text
//! dCov^2_n(X, Y) = (1/n^2) sum_kl A_kl B_kl
//! dVar^2_n(X)    = (1/n^2) sum_kl A_kl^2
//! dCor^2_n(X, Y) = dCov^2_n / sqrt(dVar^2_n(X) dVar^2_n(Y))   (0 if the denominator is 0)
//! ```
//!
//! Sums run row by row in index order and the row totals are then added in
//! order, so every value here is reproducible bit for bit.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::distance::{distance_matrix, DistanceMatrix};
use crate::error::{DcovError, Result};
use crate::sample::Sample;
use crate::scalar::{Field, Real};

/// Which flavour of statistic a summary describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Affine,
    Rank,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Affine => "affine",
            Variant::Rank => "rank",
        })
    }
}

/// A double-centered distance matrix with the means used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix<T> {
    entries: Array2<T>,
    row_means: Array1<T>,
    col_means: Array1<T>,
    grand_mean: T,
    exponent: f64,
}

impl<T: Field> CenteredMatrix<T> {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<T> {
        &self.entries
    }

    pub fn get(&self, k: usize, l: usize) -> T {
        self.entries[[k, l]]
    }

    pub fn row_means(&self) -> &Array1<T> {
        &self.row_means
    }

    pub fn col_means(&self) -> &Array1<T> {
        &self.col_means
    }

    /// Mean of the raw distances.
    pub fn grand_mean(&self) -> T {
        self.grand_mean
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

pub fn double_center<T: Field>(dm: &DistanceMatrix<T>) -> CenteredMatrix<T> {
    let n = dm.n();
    let nf = T::from_count(n);
    let a = dm.entries();

    let mut row_means = Array1::<T>::zeros(n);
    let mut col_means = Array1::<T>::zeros(n);
    for k in 0..n {
        let mut s = T::zero();
        for l in 0..n {
            s += a[[k, l]];
        }
        row_means[k] = s / nf;
    }
    for l in 0..n {
        let mut s = T::zero();
        for k in 0..n {
            s += a[[k, l]];
        }
        col_means[l] = s / nf;
    }
    let mut total = T::zero();
    for k in 0..n {
        total += row_means[k];
    }
    let grand_mean = total / nf;

    let entries =
        Array2::from_shape_fn((n, n), |(k, l)| a[[k, l]] - row_means[k] - col_means[l] + grand_mean);
    CenteredMatrix {
        entries,
        row_means,
        col_means,
        grand_mean,
        exponent: dm.exponent(),
    }
}

/// `sum_kl a_kl b_kl`.
pub(crate) fn inner<T: Field>(a: &Array2<T>, b: &Array2<T>) -> T {
    let n = a.nrows();
    let mut total = T::zero();
    for k in 0..n {
        let mut row = T::zero();
        for l in 0..n {
            row += a[[k, l]] * b[[k, l]];
        }
        total += row;
    }
    total
}

/// `sum_kl a_kl b_{p[k] p[l]}`: the inner product against a row/column
/// permutation of `b` without materializing it.
pub(crate) fn inner_permuted<T: Field>(a: &Array2<T>, b: &Array2<T>, p: &[usize]) -> T {
    let n = a.nrows();
    let mut total = T::zero();
    for k in 0..n {
        let pk = p[k];
        let mut row = T::zero();
        for l in 0..n {
            row += a[[k, l]] * b[[pk, p[l]]];
        }
        total += row;
    }
    total
}

/// Applies the roundoff clamp to a squared statistic that is mathematically
/// nonnegative. `scale` is the raw-distance product `T2`.
pub(crate) fn clamp_nonnegative<T: Field>(value: T, scale: T) -> Result<T> {
    if value >= T::zero() {
        return Ok(value);
    }
    if value >= T::zero() - T::clamp_tolerance() * scale {
        Ok(T::zero())
    } else {
        Err(DcovError::Internal(format!(
            "squared distance covariance {value:?} is negative beyond roundoff (scale {scale:?})"
        )))
    }
}

/// The squared statistics computed with field arithmetic only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DCovComponents<T> {
    pub dcov_sq: T,
    pub dvar_x_sq: T,
    pub dvar_y_sq: T,
    /// Product of the mean raw distances, `T2`.
    pub t2: T,
    pub n: usize,
}

pub fn dcov_components<T: Field>(
    cx: &CenteredMatrix<T>,
    cy: &CenteredMatrix<T>,
) -> Result<DCovComponents<T>> {
    if cx.n() != cy.n() {
        return Err(DcovError::SizeMismatch(cx.n(), cy.n()));
    }
    let n = cx.n();
    let n2 = T::from_count(n) * T::from_count(n);
    let t2 = cx.grand_mean * cy.grand_mean;
    let dcov_sq = clamp_nonnegative(inner(&cx.entries, &cy.entries) / n2, t2)?;
    let dvar_x_sq = inner(&cx.entries, &cx.entries) / n2;
    let dvar_y_sq = inner(&cy.entries, &cy.entries) / n2;
    Ok(DCovComponents {
        dcov_sq,
        dvar_x_sq,
        dvar_y_sq,
        t2,
        n,
    })
}

/// Squared distance correlation from the squared covariance and variances.
pub fn dcor_sq_from<T: Real>(dcov_sq: T, dvar_x_sq: T, dvar_y_sq: T) -> T {
    let denom = dvar_x_sq * dvar_y_sq;
    if denom > T::zero() {
        (dcov_sq / denom.sqrt()).max(T::zero()).min(T::one())
    } else {
        T::zero()
    }
}

/// Statistics bundle for one pair of samples. All dependence measures are
/// kept squared; take roots only for display.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DCovSummary<T> {
    pub dcov_sq: T,
    pub dcor_sq: T,
    pub dvar_x_sq: T,
    pub dvar_y_sq: T,
    /// Product of mean raw distances, the normalizer of `n dCov^2 / T2`.
    pub t2: T,
    pub n: usize,
    pub alpha: f64,
    pub variant: Variant,
}

impl<T: Real> DCovSummary<T> {
    pub fn dcov(&self) -> T {
        self.dcov_sq.sqrt()
    }

    pub fn dcor(&self) -> T {
        self.dcor_sq.sqrt()
    }

    pub fn dvar_x(&self) -> T {
        self.dvar_x_sq.sqrt()
    }

    pub fn dvar_y(&self) -> T {
        self.dvar_y_sq.sqrt()
    }

    /// `n dCov^2_n`, the permutation-test statistic.
    pub fn n_dcov_sq(&self) -> T {
        T::from_count(self.n) * self.dcov_sq
    }

    /// `n dCov^2_n / T2`. Undefined when both samples are constant.
    pub fn normalized_statistic(&self) -> Result<T> {
        if self.t2 > T::zero() {
            Ok(self.n_dcov_sq() / self.t2)
        } else {
            Err(DcovError::Degenerate(
                "T2 = 0 (a sample is constant); n dCov^2 / T2 is undefined".into(),
            ))
        }
    }

    /// Whether either marginal has zero distance variance.
    pub fn is_degenerate(&self) -> bool {
        self.dvar_x_sq == T::zero() || self.dvar_y_sq == T::zero()
    }
}

pub fn dcov_stats<T: Real>(cx: &CenteredMatrix<T>, cy: &CenteredMatrix<T>) -> Result<DCovSummary<T>> {
    if cx.exponent() != cy.exponent() {
        return Err(DcovError::InvalidParameter(format!(
            "exponents differ: {} vs {}",
            cx.exponent(),
            cy.exponent()
        )));
    }
    let c = dcov_components(cx, cy)?;
    Ok(DCovSummary {
        dcov_sq: c.dcov_sq,
        dcor_sq: dcor_sq_from(c.dcov_sq, c.dvar_x_sq, c.dvar_y_sq),
        dvar_x_sq: c.dvar_x_sq,
        dvar_y_sq: c.dvar_y_sq,
        t2: c.t2,
        n: c.n,
        alpha: cx.exponent(),
        variant: Variant::Plain,
    })
}

/// Distances, centering and statistics in one call.
pub fn dcov_summary<T: Real>(x: &Sample<T>, y: &Sample<T>, alpha: f64) -> Result<DCovSummary<T>> {
    if x.n() != y.n() {
        return Err(DcovError::SizeMismatch(x.n(), y.n()));
    }
    let cx = double_center(&distance_matrix(x, alpha)?);
    let cy = double_center(&distance_matrix(y, alpha)?);
    dcov_stats(&cx, &cy)
}

/// The raw-distance decomposition `dCov^2_n = T1 + T2 - 2 T3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TDecomposition<T> {
    pub t1: T,
    pub t2: T,
    pub t3: T,
    pub dcov_sq: T,
}

/// Squared distance covariance from raw distances, without centering:
///
/// ```text
/// T1 = (1/n^2) sum_kl a_kl b_kl
/// T2 = ((1/n^2) sum_kl a_kl) ((1/n^2) sum_kl b_kl)
/// T3 = (1/n^3) sum_k sum_lm a_kl b_km
/// ```
pub fn dcov_via_t<T: Field>(
    dmx: &DistanceMatrix<T>,
    dmy: &DistanceMatrix<T>,
) -> Result<TDecomposition<T>> {
    if dmx.n() != dmy.n() {
        return Err(DcovError::SizeMismatch(dmx.n(), dmy.n()));
    }
    let n = dmx.n();
    let nf = T::from_count(n);
    let n2 = nf * nf;
    let a = dmx.entries();
    let b = dmy.entries();

    let t1 = inner(a, b) / n2;

    // the triple sum factors through the row sums
    let mut sum_a = T::zero();
    let mut sum_b = T::zero();
    let mut cross = T::zero();
    for k in 0..n {
        let mut ra = T::zero();
        let mut rb = T::zero();
        for l in 0..n {
            ra += a[[k, l]];
            rb += b[[k, l]];
        }
        sum_a += ra;
        sum_b += rb;
        cross += ra * rb;
    }
    let t2 = (sum_a / n2) * (sum_b / n2);
    let t3 = cross / (n2 * nf);
    let two = T::one() + T::one();
    let dcov_sq = clamp_nonnegative(t1 + t2 - two * t3, t2)?;
    Ok(TDecomposition { t1, t2, t3, dcov_sq })
}
