//! Leave-one-out replicates of the distance statistics.
//!
//! Replicate `i` deletes row and column `i` from the raw distance matrices and
//! re-centers the remaining `(n-1)x(n-1)` blocks; no distances are recomputed.

use rayon::prelude::*;
use serde::Serialize;

use crate::dcov::{dcor_sq_from, dcov_components, double_center};
use crate::distance::DistanceMatrix;
use crate::error::{DcovError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JackknifeReport<T> {
    pub replicates_dcov_sq: Vec<T>,
    pub replicates_dcor_sq: Vec<T>,
    /// Jackknife standard error of the unsquared replicates `R_(i)`.
    pub se_dcor: T,
    /// `R_(i) / se`, absent when the replicates do not vary.
    pub studentized: Option<Vec<T>>,
}

impl<T: Real> JackknifeReport<T> {
    /// Builds a report from precomputed replicates.
    pub fn from_replicates(replicates_dcov_sq: Vec<T>, replicates_dcor_sq: Vec<T>) -> Result<Self> {
        if replicates_dcov_sq.len() != replicates_dcor_sq.len() {
            return Err(DcovError::SizeMismatch(
                replicates_dcov_sq.len(),
                replicates_dcor_sq.len(),
            ));
        }
        if replicates_dcor_sq.len() < 2 {
            return Err(DcovError::TooFewObservations {
                required: 2,
                actual: replicates_dcor_sq.len(),
            });
        }
        let se_dcor = jackknife_se(&replicates_dcor_sq);
        let mut report = Self {
            replicates_dcov_sq,
            replicates_dcor_sq,
            se_dcor,
            studentized: None,
        };
        report.studentized = studentize(&report).ok();
        Ok(report)
    }

    pub fn n(&self) -> usize {
        self.replicates_dcor_sq.len()
    }

    /// `R_(i)`, the unsquared distance correlation of each replicate.
    pub fn replicates_dcor(&self) -> Vec<T> {
        self.replicates_dcor_sq.iter().map(|v| v.sqrt()).collect()
    }

    /// Index of the replicate whose studentized value lies farthest from the
    /// mean studentized value.
    pub fn most_influential(&self) -> Option<usize> {
        let t = self.studentized.as_ref()?;
        let mean = t.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(t.len());
        t.iter()
            .enumerate()
            .map(|(i, &v)| (i, (v - mean).abs()))
            .fold(None, |best: Option<(usize, T)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            })
            .map(|(i, _)| i)
    }
}

/// `sqrt(((n-1)/n) sum_i (R_(i) - mean R)^2)` over `R_(i) = sqrt(dcor_sq_i)`.
fn jackknife_se<T: Real>(dcor_sq: &[T]) -> T {
    let n = T::from_count(dcor_sq.len());
    let r: Vec<T> = dcor_sq.iter().map(|v| v.sqrt()).collect();
    let mean = r.iter().fold(T::zero(), |a, &b| a + b) / n;
    let ss = r.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
    ((n - T::one()) / n * ss).sqrt()
}

pub fn jackknife<T: Real>(
    dmx: &DistanceMatrix<T>,
    dmy: &DistanceMatrix<T>,
) -> Result<JackknifeReport<T>> {
    if dmx.n() != dmy.n() {
        return Err(DcovError::SizeMismatch(dmx.n(), dmy.n()));
    }
    let n = dmx.n();
    if n < 3 {
        return Err(DcovError::TooFewObservations {
            required: 3,
            actual: n,
        });
    }
    let reps: Vec<(T, T)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let cx = double_center(&dmx.without_index(i));
            let cy = double_center(&dmy.without_index(i));
            let c = dcov_components(&cx, &cy)?;
            Ok((c.dcov_sq, dcor_sq_from(c.dcov_sq, c.dvar_x_sq, c.dvar_y_sq)))
        })
        .collect::<Result<_>>()?;
    let (dcov, dcor) = reps.into_iter().unzip();
    JackknifeReport::from_replicates(dcov, dcor)
}

/// `R_(i) / se` for every replicate.
pub fn studentize<T: Real>(report: &JackknifeReport<T>) -> Result<Vec<T>> {
    if !(report.se_dcor > T::zero()) {
        return Err(DcovError::NoVariation);
    }
    Ok(report
        .replicates_dcor_sq
        .iter()
        .map(|v| v.sqrt() / report.se_dcor)
        .collect())
}
