//! Tests of independence built on the distance statistics.
//!
//! * [`permutation_test`]: resamples `n dCov^2_n` (or `n dCov^2_n / T2`) under
//!   random re-pairings of the rows of `y`.
//! * [`chi2_bound_test`]: rejects when `n dCov^2_n / T2` reaches the `1 - level`
//!   quantile of chi-square(1). Conservative but valid for every level up to
//!   [`CHI2_BOUND_MAX_LEVEL`].
//! * [`rank_test`]: distance correlation of ranks, which is distribution free
//!   for continuous marginals. Decided against [`CriticalTable`] or by
//!   enumerating every permutation for small `n`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dcov::{dcov_stats, double_center, inner_permuted, DCovSummary};
use crate::distance::distance_matrix;
use crate::error::{DcovError, Result};
use crate::rng::stream_rng;
use crate::sample::Sample;
use crate::scalar::Real;
use crate::transform::rank_transform;

/// Largest level for which the chi-square(1) bound is proven.
pub const CHI2_BOUND_MAX_LEVEL: f64 = 0.215;

/// Largest sample size for exact rank enumeration.
pub const EXACT_RANK_MAX_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StatisticName {
    #[serde(rename = "nV2")]
    NV2,
    #[serde(rename = "nV2_over_T2")]
    NV2OverT2,
    #[serde(rename = "nR2_rank")]
    NR2Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Permutation,
    Chi2Bound,
    RankTable,
    RankExact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic_name: StatisticName,
    pub statistic_value: f64,
    /// `None` for decisions made against a threshold only.
    pub p_value: Option<f64>,
    pub method: TestMethod,
    pub replicates: usize,
    pub seed: Option<u64>,
    pub n: usize,
    pub dcor_sq: f64,
    pub dcor: f64,
    pub level: Option<f64>,
    pub threshold: Option<f64>,
    pub reject: Option<bool>,
}

impl TestReport {
    fn base<T: Real>(name: StatisticName, value: T, method: TestMethod, s: &DCovSummary<T>) -> Self {
        let dcor_sq = s.dcor_sq.to_f64_lossy();
        Self {
            statistic_name: name,
            statistic_value: value.to_f64_lossy(),
            p_value: None,
            method,
            replicates: 0,
            seed: None,
            n: s.n,
            dcor_sq,
            dcor: dcor_sq.sqrt(),
            level: None,
            threshold: None,
            reject: None,
        }
    }

    /// Decision at `level` from the p-value or threshold, whichever applies.
    pub fn rejects_at(&self, level: f64) -> bool {
        match self.p_value {
            Some(p) => p <= level,
            None => self.reject.unwrap_or(false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Use `n dCov^2 / T2` instead of `n dCov^2`.
    pub normalized: bool,
    pub alpha: f64,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        Self {
            replicates: 999,
            seed: 0,
            normalized: false,
            alpha: 1.0,
        }
    }
}

/// Permutation test of independence.
///
/// Distances and centering are done once. Replicate `r` shuffles the rows of
/// `y` with its own stream `(seed, r)`; since centering commutes with
/// reindexing, the centered `y` matrix is simply read through the permutation.
/// The p-value is `(1 + #{replicate >= observed}) / (1 + replicates)`.
pub fn permutation_test<T: Real>(
    x: &Sample<T>,
    y: &Sample<T>,
    opts: &PermutationOptions,
) -> Result<TestReport> {
    if x.n() != y.n() {
        return Err(DcovError::SizeMismatch(x.n(), y.n()));
    }
    if opts.replicates == 0 {
        return Err(DcovError::InvalidParameter("replicates must be at least 1".into()));
    }
    let cx = double_center(&distance_matrix(x, opts.alpha)?);
    let cy = double_center(&distance_matrix(y, opts.alpha)?);
    let summary = dcov_stats(&cx, &cy)?;
    let n = summary.n;
    let nf = T::from_count(n);

    let (name, scale) = if opts.normalized {
        if !(summary.t2 > T::zero()) {
            return Err(DcovError::Degenerate(
                "T2 = 0 (a sample is constant); normalized statistic is undefined".into(),
            ));
        }
        (StatisticName::NV2OverT2, T::one() / (nf * summary.t2))
    } else {
        (StatisticName::NV2, T::one() / nf)
    };
    // n dCov^2 = (1/n) sum A B, optionally divided by T2
    let identity: Vec<usize> = (0..n).collect();
    let observed = inner_permuted(cx.entries(), cy.entries(), &identity) * scale;
    let cutoff = observed - observed.abs() * T::clamp_tolerance();

    let exceed = (0..opts.replicates as u64)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = stream_rng(opts.seed, r);
            let mut p = identity.clone();
            p.shuffle(&mut rng);
            inner_permuted(cx.entries(), cy.entries(), &p) * scale >= cutoff
        })
        .count();

    let mut report = TestReport::base(name, observed, TestMethod::Permutation, &summary);
    report.p_value = Some((1 + exceed) as f64 / (1 + opts.replicates) as f64);
    report.replicates = opts.replicates;
    report.seed = Some(opts.seed);
    Ok(report)
}

/// The `1 - level` quantile of chi-square(1).
pub fn chi2_threshold(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(DcovError::InvalidParameter(format!("level {level} outside (0, 1)")));
    }
    let chi2 = ChiSquared::new(1.0).expect("valid degrees of freedom");
    Ok(chi2.inverse_cdf(1.0 - level))
}

/// Asymptotic test rejecting when `n dCov^2_n / T2 >= chi2_{1-level}(1)`.
pub fn chi2_bound_test<T: Real>(
    x: &Sample<T>,
    y: &Sample<T>,
    level: f64,
    alpha: f64,
) -> Result<TestReport> {
    if !(level > 0.0 && level <= CHI2_BOUND_MAX_LEVEL) {
        return Err(DcovError::InvalidParameter(format!(
            "level {level} outside (0, {CHI2_BOUND_MAX_LEVEL}]; the chi-square(1) bound \
             is only valid up to {CHI2_BOUND_MAX_LEVEL}"
        )));
    }
    if x.n() != y.n() {
        return Err(DcovError::SizeMismatch(x.n(), y.n()));
    }
    let cx = double_center(&distance_matrix(x, alpha)?);
    let cy = double_center(&distance_matrix(y, alpha)?);
    let summary = dcov_stats(&cx, &cy)?;
    let statistic = summary.normalized_statistic()?;
    let threshold = chi2_threshold(level)?;
    let mut report = TestReport::base(
        StatisticName::NV2OverT2,
        statistic,
        TestMethod::Chi2Bound,
        &summary,
    );
    report.level = Some(level);
    report.threshold = Some(threshold);
    report.reject = Some(statistic.to_f64_lossy() >= threshold);
    Ok(report)
}

/// Where a set of rank critical values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSource {
    PaperTable,
    ExactEnumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalRow {
    pub n: usize,
    pub cv10: f64,
    pub cv5: f64,
    pub asl10: Option<f64>,
    pub asl5: Option<f64>,
}

/// Critical values of `n dCor^2_n(rank x, rank y)` at the 10% and 5% levels.
/// Reject independence when the statistic is at least the tabled value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalTable {
    pub rows: Vec<CriticalRow>,
    pub source: TableSource,
}

const PUBLISHED_TABLE: &str = include_str!("../data/rank_critical_values.csv");

/// The two levels the table covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankLevel {
    Ten,
    Five,
}

impl RankLevel {
    pub fn from_level(level: f64) -> Result<Self> {
        if (level - 0.10).abs() < 1e-12 {
            Ok(Self::Ten)
        } else if (level - 0.05).abs() < 1e-12 {
            Ok(Self::Five)
        } else {
            Err(DcovError::InvalidParameter(format!(
                "rank table covers levels 0.10 and 0.05, got {level}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Ten => 0.10,
            Self::Five => 0.05,
        }
    }
}

impl CriticalTable {
    /// The published table: exact for `n <= 10`, Monte Carlo above.
    pub fn published() -> Self {
        Self::parse(PUBLISHED_TABLE, TableSource::PaperTable).expect("embedded table is well formed")
    }

    pub fn parse(text: &str, source: TableSource) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<Option<f64>> {
                let cell = rec.get(i).unwrap_or("").trim();
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse().map(Some).map_err(|_| DcovError::Parse {
                    row: rows.len() + 1,
                    column: i.to_string(),
                    value: cell.to_string(),
                })
            };
            let n = num(0)?.ok_or(DcovError::EmptySelection)? as usize;
            rows.push(CriticalRow {
                n,
                cv10: num(1)?.ok_or(DcovError::EmptySelection)?,
                cv5: num(2)?.ok_or(DcovError::EmptySelection)?,
                asl10: num(3)?,
                asl5: num(4)?,
            });
        }
        rows.sort_by_key(|r| r.n);
        Ok(Self { rows, source })
    }

    /// Table from exhaustive enumeration for each `n` in `sizes`.
    pub fn exact(sizes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut rows = Vec::new();
        for n in sizes {
            let null = ExactRankNull::enumerate(n)?;
            let ten = null.critical_point(0.10);
            let five = null.critical_point(0.05);
            rows.push(CriticalRow {
                n,
                cv10: ten.printed,
                cv5: five.printed,
                asl10: Some(ten.asl),
                asl5: Some(five.asl),
            });
        }
        Ok(Self {
            rows,
            source: TableSource::ExactEnumeration,
        })
    }

    /// Critical value for sample size `n`: the row of the largest tabled size
    /// not exceeding `n`.
    pub fn lookup(&self, n: usize, level: RankLevel) -> Result<f64> {
        let row = self
            .rows
            .iter()
            .rev()
            .find(|r| r.n <= n)
            .ok_or(DcovError::TooFewObservations {
                required: self.rows.first().map_or(5, |r| r.n),
                actual: n,
            })?;
        Ok(match level {
            RankLevel::Ten => row.cv10,
            RankLevel::Five => row.cv5,
        })
    }

    /// Largest decrease of a critical value between consecutive Monte Carlo
    /// rows (`n > 10`). Zero means the column is nondecreasing.
    pub fn max_decrease_beyond_exact(&self) -> f64 {
        let tail: Vec<&CriticalRow> = self.rows.iter().filter(|r| r.n >= 10).collect();
        tail.windows(2)
            .flat_map(|w| [w[0].cv10 - w[1].cv10, w[0].cv5 - w[1].cv5])
            .fold(0.0, f64::max)
    }
}

/// A critical point of the exact null distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    /// Smallest attained statistic `c` with `P(T > c) <= level`.
    pub value: f64,
    /// `P(T > c)`, the achieved significance level.
    pub asl: f64,
    /// `c` rounded up to three decimals: the threshold for a `T >= threshold`
    /// rule at table precision.
    pub printed: f64,
}

/// Exact permutation distribution of `n dCor^2_n` between the ranks `1..n`
/// and every rearrangement of them.
///
/// Entries of `n^2 A` for rank distances are integers, so the statistic is
/// tracked as the exact integer `S = sum (n^2 A)_kl (n^2 A)_{s(k) s(l)}` and
/// ties are resolved without tolerance. `n dCor^2 = n S / Q` with
/// `Q = sum (n^2 A)_kl^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRankNull {
    n: usize,
    scaled: Vec<i64>,
    q: i64,
    counts: BTreeMap<i64, u64>,
    total: u64,
}

impl ExactRankNull {
    pub fn enumerate(n: usize) -> Result<Self> {
        if !(2..=EXACT_RANK_MAX_N).contains(&n) {
            return Err(DcovError::InvalidParameter(format!(
                "exact enumeration needs 2 <= n <= {EXACT_RANK_MAX_N}, got {n}"
            )));
        }
        let scaled = scaled_rank_centering(n);
        let q: i64 = scaled.iter().map(|v| v * v).sum();

        // one chunk per leading element, merged in order
        let chunks: Vec<BTreeMap<i64, u64>> = (0..n)
            .into_par_iter()
            .map(|first| {
                let mut counts = BTreeMap::new();
                let mut rest: Vec<usize> = (0..n).filter(|&v| v != first).collect();
                let mut perm = vec![first; n];
                heap_permutations(&mut rest, |tail| {
                    perm[1..].copy_from_slice(tail);
                    *counts.entry(permuted_inner(&scaled, n, &perm)).or_insert(0) += 1;
                });
                counts
            })
            .collect();
        let mut counts = BTreeMap::new();
        for chunk in chunks {
            for (k, v) in chunk {
                *counts.entry(k).or_insert(0) += v;
            }
        }
        let total = counts.values().sum();
        Ok(Self {
            n,
            scaled,
            q,
            counts,
            total,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of permutations, `n!`.
    pub fn total(&self) -> u64 {
        self.total
    }

    fn statistic_of(&self, s: i64) -> f64 {
        self.n as f64 * s as f64 / self.q as f64
    }

    /// `(statistic, probability)` for every attained value, ascending.
    pub fn support(&self) -> Vec<(f64, f64)> {
        self.counts
            .iter()
            .map(|(&s, &c)| (self.statistic_of(s), c as f64 / self.total as f64))
            .collect()
    }

    fn tail_above(&self, s: i64) -> u64 {
        self.counts
            .range((std::ops::Bound::Excluded(s), std::ops::Bound::Unbounded))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn critical_point(&self, level: f64) -> CriticalPoint {
        let total = self.total as f64;
        let mut above = self.total;
        for (&s, &c) in &self.counts {
            above -= c;
            let asl = above as f64 / total;
            if asl <= level {
                let value = self.statistic_of(s);
                return CriticalPoint {
                    value,
                    asl,
                    printed: (value * 1000.0 - 1e-9).ceil() / 1000.0,
                };
            }
        }
        unreachable!("the largest attained value has empty upper tail")
    }

    /// Integer statistic of the pairing that sends x-rank `k+1` to y-rank
    /// `sigma[k]+1`.
    fn integer_statistic(&self, sigma: &[usize]) -> i64 {
        permuted_inner(&self.scaled, self.n, sigma)
    }

    /// Exact `P(T >= t)` for the observed pairing of rank vectors.
    pub fn p_value(&self, rank_x: &[usize], rank_y: &[usize]) -> Result<f64> {
        let sigma = pairing(rank_x, rank_y, self.n)?;
        let s = self.integer_statistic(&sigma);
        let at_least: u64 = self.counts.range(s..).map(|(_, c)| c).sum();
        Ok(at_least as f64 / self.total as f64)
    }

    /// Exact `n dCor^2` for the observed pairing.
    pub fn statistic(&self, rank_x: &[usize], rank_y: &[usize]) -> Result<f64> {
        let sigma = pairing(rank_x, rank_y, self.n)?;
        Ok(self.statistic_of(self.integer_statistic(&sigma)))
    }

    /// `P(T > t)` for the observed pairing.
    pub fn strict_tail(&self, rank_x: &[usize], rank_y: &[usize]) -> Result<f64> {
        let sigma = pairing(rank_x, rank_y, self.n)?;
        Ok(self.tail_above(self.integer_statistic(&sigma)) as f64 / self.total as f64)
    }
}

/// `n^2` times the centered rank-distance matrix, flattened row-major.
fn scaled_rank_centering(n: usize) -> Vec<i64> {
    let ni = n as i64;
    let a = |k: usize, l: usize| (k as i64 - l as i64).abs();
    let rows: Vec<i64> = (0..n).map(|k| (0..n).map(|l| a(k, l)).sum()).collect();
    let total: i64 = rows.iter().sum();
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            out.push(ni * ni * a(k, l) - ni * rows[k] - ni * rows[l] + total);
        }
    }
    out
}

fn permuted_inner(scaled: &[i64], n: usize, p: &[usize]) -> i64 {
    let mut s = 0;
    for k in 0..n {
        let row = &scaled[k * n..(k + 1) * n];
        let prow = &scaled[p[k] * n..(p[k] + 1) * n];
        for l in 0..n {
            s += row[l] * prow[p[l]];
        }
    }
    s
}

/// `sigma[rank_x - 1] = rank_y - 1`.
fn pairing(rank_x: &[usize], rank_y: &[usize], n: usize) -> Result<Vec<usize>> {
    if rank_x.len() != n || rank_y.len() != n {
        return Err(DcovError::SizeMismatch(rank_x.len(), n));
    }
    let mut sigma = vec![usize::MAX; n];
    for (&rx, &ry) in rank_x.iter().zip(rank_y) {
        if rx == 0 || rx > n || ry == 0 || ry > n || sigma[rx - 1] != usize::MAX {
            return Err(DcovError::InvalidParameter("ranks must be a permutation of 1..n".into()));
        }
        sigma[rx - 1] = ry - 1;
    }
    Ok(sigma)
}

/// Heap's algorithm; calls `visit` once per arrangement of `items`.
fn heap_permutations<F: FnMut(&[usize])>(items: &mut [usize], mut visit: F) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    Table,
    Exact,
}

/// Distance-correlation test on ranks.
///
/// Ties within `x` or `y` are broken at random from `seed`. Table mode needs
/// `n >= 5` and a level of 0.10 or 0.05; exact mode needs `n <= 10` and
/// accepts any level in `(0, 1)`.
pub fn rank_test<T: Real>(
    x: &Sample<T>,
    y: &Sample<T>,
    level: f64,
    seed: u64,
    mode: RankMode,
) -> Result<TestReport> {
    if x.d() != 1 {
        return Err(DcovError::NotUnivariate(x.d()));
    }
    if y.d() != 1 {
        return Err(DcovError::NotUnivariate(y.d()));
    }
    if x.n() != y.n() {
        return Err(DcovError::SizeMismatch(x.n(), y.n()));
    }
    let n = x.n();
    let rx = rank_transform(x, crate::rng::derive_seed(seed, 0))?;
    let ry = rank_transform(y, crate::rng::derive_seed(seed, 1))?;
    let cx = double_center(&distance_matrix(&rx, 1.0)?);
    let cy = double_center(&distance_matrix(&ry, 1.0)?);
    let mut summary = dcov_stats(&cx, &cy)?;
    summary.variant = crate::dcov::Variant::Rank;
    let statistic = T::from_count(n) * summary.dcor_sq;

    let mut report = match mode {
        RankMode::Table => {
            let which = RankLevel::from_level(level)?;
            if n < 5 {
                return Err(DcovError::TooFewObservations {
                    required: 5,
                    actual: n,
                });
            }
            let cv = CriticalTable::published().lookup(n, which)?;
            let mut r = TestReport::base(StatisticName::NR2Rank, statistic, TestMethod::RankTable, &summary);
            r.threshold = Some(cv);
            r.reject = Some(statistic.to_f64_lossy() >= cv);
            r
        }
        RankMode::Exact => {
            if !(level > 0.0 && level < 1.0) {
                return Err(DcovError::InvalidParameter(format!("level {level} outside (0, 1)")));
            }
            let null = ExactRankNull::enumerate(n)?;
            let to_ranks = |s: &Sample<T>| -> Vec<usize> {
                s.values().iter().map(|v| v.to_f64_lossy().round() as usize).collect()
            };
            let p = null.p_value(&to_ranks(&rx), &to_ranks(&ry))?;
            let mut r = TestReport::base(StatisticName::NR2Rank, statistic, TestMethod::RankExact, &summary);
            r.p_value = Some(p);
            r.replicates = null.total() as usize;
            r.threshold = Some(null.critical_point(level).value);
            r.reject = Some(p <= level);
            r
        }
    };
    report.level = Some(level);
    report.seed = Some(seed);
    Ok(report)
}
