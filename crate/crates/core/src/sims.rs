//! Data generators and the Monte Carlo power harness.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{DcovError, Result};
use crate::inference::{permutation_test, rank_test, PermutationOptions, RankMode};
use crate::rng::{derive_seed, stream_rng};
use crate::sample::Sample;
use crate::transform::midranks;

fn pair(x: Vec<f64>, y: Vec<f64>) -> Result<(Sample<f64>, Sample<f64>)> {
    Ok((Sample::from_column(&x)?, Sample::from_column(&y)?))
}

/// Standard bivariate normal pairs with correlation `rho`.
pub fn gen_bvn(n: usize, rho: f64, seed: u64) -> Result<(Sample<f64>, Sample<f64>)> {
    if !(rho.abs() <= 1.0) {
        return Err(DcovError::InvalidParameter(format!("|rho| = {} exceeds 1", rho.abs())));
    }
    let mut rng = stream_rng(seed, 0);
    let c = (1.0 - rho * rho).sqrt();
    let (x, y) = (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            (a, rho * a + c * z)
        })
        .unzip();
    pair(x, y)
}

/// Standard normal density.
pub fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `X` standard normal and `Y = phi(X)`: dependent but uncorrelated.
pub fn gen_density_model(n: usize, seed: u64) -> Result<(Sample<f64>, Sample<f64>)> {
    let mut rng = stream_rng(seed, 0);
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y = x.iter().map(|&v| normal_density(v)).collect();
    pair(x, y)
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(DcovError::InvalidParameter(format!("theta = {theta} outside [0, 1]")))
    }
}

/// Conditional density `f(y | x)` of Gumbel's bivariate exponential law.
pub fn gumbel_conditional_density(y: f64, x: f64, theta: f64) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    let c = 1.0 + theta * x;
    (-c * y).exp() * (c * (1.0 + theta * y) - theta)
}

/// Conditional distribution function `F(y | x) = 1 - (1 + theta y) exp(-(1 + theta x) y)`.
pub fn gumbel_conditional_cdf(y: f64, x: f64, theta: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    1.0 - (1.0 + theta * y) * (-(1.0 + theta * x) * y).exp()
}

/// Tolerance on `y` for the conditional-CDF inversion.
pub const GUMBEL_ROOT_TOL: f64 = 1e-12;

/// Solves `F(y | x) = u` by bisection on a doubling bracket.
pub fn gumbel_conditional_quantile(u: f64, x: f64, theta: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while gumbel_conditional_cdf(hi, x, theta) < u {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > GUMBEL_ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gumbel_conditional_cdf(mid, x, theta) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pairs from Gumbel's bivariate exponential distribution: `X ~ Exp(1)`, then
/// `Y | X` by inverting the conditional distribution function.
pub fn gen_gumbel_bve(n: usize, theta: f64, seed: u64) -> Result<(Sample<f64>, Sample<f64>)> {
    check_theta(theta)?;
    let mut rng = stream_rng(seed, 0);
    let draws: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let x: f64 = rng.sample(Exp1);
            let u: f64 = rng.random();
            (x, u)
        })
        .collect();
    let (x, y) = draws
        .into_par_iter()
        .map(|(x, u)| (x, gumbel_conditional_quantile(u, x, theta)))
        .unzip();
    pair(x, y)
}

/// Least-squares residuals of `y` on `[1, x]`.
pub fn linear_residuals(x: &Sample<f64>, y: &Sample<f64>) -> Result<Sample<f64>> {
    if x.n() != y.n() {
        return Err(DcovError::SizeMismatch(x.n(), y.n()));
    }
    let (n, p) = (x.n(), x.d() + 1);
    if n <= p {
        return Err(DcovError::TooFewObservations {
            required: p + 1,
            actual: n,
        });
    }
    let design = DMatrix::from_fn(n, p, |k, j| if j == 0 { 1.0 } else { x.values()[[k, j - 1]] });
    let response = DMatrix::from_fn(n, y.d(), |k, j| y.values()[[k, j]]);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(DcovError::RankDeficient);
    }
    let beta = svd
        .solve(&response, 0.0)
        .map_err(|e| DcovError::Internal(e.to_string()))?;
    let fitted = design * beta;
    let resid = Array2::from_shape_fn((n, y.d()), |(k, j)| response[(k, j)] - fitted[(k, j)]);
    Sample::new(
        resid,
        y.column_names().iter().map(|c| format!("{c}_resid")).collect(),
    )
}

fn pearson_r(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Result of a correlation t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationTest {
    pub estimate: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Two-sided t-test of zero correlation with `n - 2` degrees of freedom.
pub fn pearson_t_test(x: &[f64], y: &[f64]) -> Result<CorrelationTest> {
    if x.len() != y.len() {
        return Err(DcovError::SizeMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(DcovError::TooFewObservations {
            required: 3,
            actual: x.len(),
        });
    }
    let r = pearson_r(x, y);
    let df = (x.len() - 2) as f64;
    if r.abs() >= 1.0 {
        return Ok(CorrelationTest {
            estimate: r,
            t: f64::INFINITY.copysign(r),
            df,
            p_value: 0.0,
        });
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(CorrelationTest {
        estimate: r,
        t,
        df,
        p_value,
    })
}

/// Spearman correlation (midranks) with the same t approximation.
pub fn spearman_t_test(x: &[f64], y: &[f64]) -> Result<CorrelationTest> {
    pearson_t_test(&midranks(x), &midranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Bvn { rho: f64 },
    DensityModel,
    Gumbel { theta: f64 },
}

impl Model {
    pub fn generate(&self, n: usize, seed: u64) -> Result<(Sample<f64>, Sample<f64>)> {
        match *self {
            Model::Bvn { rho } => gen_bvn(n, rho, seed),
            Model::DensityModel => gen_density_model(n, seed),
            Model::Gumbel { theta } => gen_gumbel_bve(n, theta, seed),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Bvn { rho } => write!(f, "bvn({rho})"),
            Model::DensityModel => f.write_str("density_model"),
            Model::Gumbel { theta } => write!(f, "gumbel({theta})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerTest {
    DcovPerm,
    PearsonT,
    Spearman,
    RankDcov,
}

impl PowerTest {
    pub fn name(self) -> &'static str {
        match self {
            PowerTest::DcovPerm => "dcov_perm",
            PowerTest::PearsonT => "pearson_t",
            PowerTest::Spearman => "spearman",
            PowerTest::RankDcov => "rank_dcov",
        }
    }
}

impl fmt::Display for PowerTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PowerTest {
    type Err = DcovError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dcov_perm" => Ok(PowerTest::DcovPerm),
            "pearson_t" => Ok(PowerTest::PearsonT),
            "spearman" => Ok(PowerTest::Spearman),
            "rank_dcov" => Ok(PowerTest::RankDcov),
            other => Err(DcovError::InvalidParameter(format!("unknown test {other:?}"))),
        }
    }
}

/// Settings for [`power_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudy {
    pub model: Model,
    pub sample_sizes: Vec<usize>,
    pub level: f64,
    pub runs: usize,
    pub tests: Vec<PowerTest>,
    pub seed: u64,
    /// Replace `y` by the residuals of its least-squares fit on `x` before testing.
    pub residuals: bool,
    /// Permutation replicates for `dcov_perm`.
    pub permutation_replicates: usize,
}

impl PowerStudy {
    pub fn new(model: Model, sample_sizes: Vec<usize>, tests: Vec<PowerTest>) -> Self {
        Self {
            model,
            sample_sizes,
            level: 0.10,
            runs: 2000,
            tests,
            seed: 0,
            residuals: false,
            permutation_replicates: 199,
        }
    }
}

/// Rejection rates, `power[test][size]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCurve {
    pub model: String,
    pub residuals: bool,
    pub sample_sizes: Vec<usize>,
    pub level: f64,
    pub tests: Vec<PowerTest>,
    pub power: Vec<Vec<f64>>,
    pub runs_per_cell: usize,
    pub seed: u64,
}

impl PowerCurve {
    pub fn power_of(&self, test: PowerTest, n: usize) -> Option<f64> {
        let i = self.tests.iter().position(|&t| t == test)?;
        let j = self.sample_sizes.iter().position(|&m| m == n)?;
        Some(self.power[i][j])
    }

    /// Binomial standard error of a cell estimate.
    pub fn std_error(&self, power: f64) -> f64 {
        (power * (1.0 - power) / self.runs_per_cell as f64).sqrt()
    }

    /// CSV with columns `model,n,test,power,runs,level,seed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "n", "test", "power", "runs", "level", "seed"])?;
        let label = if self.residuals {
            format!("{}_residuals", self.model)
        } else {
            self.model.clone()
        };
        for (i, t) in self.tests.iter().enumerate() {
            for (j, n) in self.sample_sizes.iter().enumerate() {
                w.write_record([
                    label.clone(),
                    n.to_string(),
                    t.to_string(),
                    self.power[i][j].to_string(),
                    self.runs_per_cell.to_string(),
                    self.level.to_string(),
                    self.seed.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| DcovError::Csv(e.into()))?;
        Ok(())
    }
}

fn run_test(test: PowerTest, x: &Sample<f64>, y: &Sample<f64>, study: &PowerStudy, seed: u64) -> Result<bool> {
    Ok(match test {
        PowerTest::DcovPerm => {
            let opts = PermutationOptions {
                replicates: study.permutation_replicates,
                seed,
                normalized: false,
                alpha: 1.0,
            };
            permutation_test(x, y, &opts)?.rejects_at(study.level)
        }
        PowerTest::PearsonT => {
            pearson_t_test(&x.as_column()?, &y.as_column()?)?.p_value <= study.level
        }
        PowerTest::Spearman => {
            spearman_t_test(&x.as_column()?, &y.as_column()?)?.p_value <= study.level
        }
        PowerTest::RankDcov => rank_test(x, y, study.level, seed, RankMode::Table)?
            .reject
            .unwrap_or(false),
    })
}

/// Empirical rejection rate of each test at each sample size.
///
/// Run `r` of size index `j` draws its data from `derive_seed(derive_seed(seed, j), r)`,
/// so the curve is the same for any thread count.
pub fn power_study(study: &PowerStudy) -> Result<PowerCurve> {
    if study.runs < 100 {
        return Err(DcovError::InvalidParameter(format!(
            "runs = {} is below the minimum of 100",
            study.runs
        )));
    }
    if study.tests.is_empty() || study.sample_sizes.is_empty() {
        return Err(DcovError::EmptySelection);
    }
    if !(study.level > 0.0 && study.level < 1.0) {
        return Err(DcovError::InvalidParameter(format!("level {} outside (0, 1)", study.level)));
    }
    let mut power = vec![vec![0.0; study.sample_sizes.len()]; study.tests.len()];
    for (j, &n) in study.sample_sizes.iter().enumerate() {
        let cell_seed = derive_seed(study.seed, j as u64);
        let rejections: Vec<Vec<bool>> = (0..study.runs as u64)
            .into_par_iter()
            .map(|r| {
                let run_seed = derive_seed(cell_seed, r);
                let (x, mut y) = study.model.generate(n, derive_seed(run_seed, 0))?;
                if study.residuals {
                    y = linear_residuals(&x, &y)?;
                }
                study
                    .tests
                    .iter()
                    .map(|&t| run_test(t, &x, &y, study, derive_seed(run_seed, 1)))
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (i, row) in power.iter_mut().enumerate() {
            let hits = rejections.iter().filter(|r| r[i]).count();
            row[j] = hits as f64 / study.runs as f64;
        }
    }
    Ok(PowerCurve {
        model: study.model.to_string(),
        residuals: study.residuals,
        sample_sizes: study.sample_sizes.clone(),
        level: study.level,
        tests: study.tests.clone(),
        power,
        runs_per_cell: study.runs,
        seed: study.seed,
    })
}
