//! Distance covariance and distance correlation.
//!
//! The numerical core is generic over the scalar type: `f64` and `f32` for
//! data work, and `Ratio<i64>` where exact hand checks are wanted. The aliases
//! below fix the scalar to `f64`.

pub mod dcov;
pub mod distance;
pub mod error;
pub mod inference;
pub mod jackknife;
pub mod rng;
pub mod sample;
pub mod scalar;
pub mod sims;
pub mod theory;
pub mod transform;

pub use dcov::{
    dcov_stats, dcov_summary, dcov_via_t, double_center, CenteredMatrix, DCovComponents,
    DCovSummary, TDecomposition, Variant,
};
pub use distance::{distance_matrix, DistanceMatrix};
pub use error::{DcovError, Result};
pub use inference::{
    chi2_bound_test, chi2_threshold, permutation_test, rank_test, CriticalTable, ExactRankNull,
    PermutationOptions, RankLevel, RankMode, StatisticName, TestMethod, TestReport,
};
pub use jackknife::{jackknife, studentize, JackknifeReport};
pub use sample::{load_csv, ColumnSelector, LoadedPair, MissingPolicy, Sample};
pub use scalar::{Field, Real};
pub use transform::{affine_dcov_summary, affine_rescale, rank_dcov_summary, rank_transform};

/// Exact rational scalar.
pub type Exact = num_rational::Ratio<i64>;

pub type Sample64 = Sample<f64>;
pub type Sample32 = Sample<f32>;
pub type DistanceMatrix64 = DistanceMatrix<f64>;
pub type DistanceMatrixExact = DistanceMatrix<Exact>;
pub type CenteredMatrix64 = CenteredMatrix<f64>;
pub type CenteredMatrixExact = CenteredMatrix<Exact>;
pub type DCovSummary64 = DCovSummary<f64>;
pub type DCovSummary32 = DCovSummary<f32>;
pub type JackknifeReport64 = JackknifeReport<f64>;
