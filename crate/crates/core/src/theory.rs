//! Closed forms and a Monte Carlo check of the Brownian-covariance identity.
//!
//! The empirical distance covariance coincides with the covariance of the
//! samples taken with respect to two independent Brownian fields `W`, `W'`:
//! with `u_k = W(x_k) - mean_j W(x_j)` and `v_k = W'(y_k) - mean_j W'(y_j)`,
//!
//! ```text
//! E[((1/n) sum_k u_k v_k)^2] = dCov^2_n(X, Y).
//! ```
//!
//! [`brownian_cov_mc`] estimates the left side by simulation so it can be
//! compared against the closed form.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::dcov::dcov_via_t;
use crate::distance::distance_matrix;
use crate::error::{DcovError, Result};
use crate::rng::{stream_rng, StreamRng};
use crate::sample::Sample;

/// The weight constant of the exponent-`alpha` distance covariance in
/// dimension `d`:
///
/// ```text
/// C(d, alpha) = 2 pi^(d/2) Gamma(1 - alpha/2) / (alpha 2^alpha Gamma((d + alpha)/2))
/// ```
pub fn constant_c(d: usize, alpha: f64) -> Result<f64> {
    if d == 0 {
        return Err(DcovError::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(DcovError::InvalidParameter(format!(
            "alpha = {alpha} outside (0, 2); Gamma(1 - alpha/2) has a pole at 2"
        )));
    }
    let d = d as f64;
    let num = 2.0 * std::f64::consts::PI.powf(d / 2.0) * gamma(1.0 - alpha / 2.0);
    let den = alpha * 2f64.powf(alpha) * gamma((d + alpha) / 2.0);
    Ok(num / den)
}

/// `c_d = pi^((1+d)/2) / Gamma((1+d)/2)`, the `alpha = 1` constant.
pub fn constant_c_unit(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(DcovError::InvalidParameter("dimension must be at least 1".into()));
    }
    let h = (1.0 + d as f64) / 2.0;
    Ok(std::f64::consts::PI.powf(h) / gamma(h))
}

const BVN_DENOMINATOR: f64 = 1.0 + std::f64::consts::FRAC_PI_3 - 1.732_050_807_568_877_2;

/// `lim_{rho -> 0} R(rho) / |rho|`.
pub fn bvn_limit_ratio() -> f64 {
    0.5 / BVN_DENOMINATOR.sqrt()
}

/// Population distance correlation `R(rho)` of a standard bivariate normal
/// pair with correlation `rho`.
pub fn bvn_dcor(rho: f64) -> Result<f64> {
    if !(rho.abs() <= 1.0 + 1e-12) {
        return Err(DcovError::InvalidParameter(format!("|rho| = {} exceeds 1", rho.abs())));
    }
    let r = rho.clamp(-1.0, 1.0);
    if r.abs() == 1.0 {
        return Ok(1.0);
    }
    let r2 = r * r;
    // the closed-form numerator cancels to O(rho^2); use its series near 0
    let num = if r.abs() < 1e-2 {
        r2 * (0.25 + r2 * (7.0 / 192.0 + r2 * (31.0 / 2560.0 + r2 * 635.0 / 114_688.0)))
    } else {
        r * r.asin() + (1.0 - r2).sqrt() - r * (r / 2.0).asin() - (4.0 - r2).sqrt() + 1.0
    };
    Ok((num / BVN_DENOMINATOR).clamp(0.0, 1.0).sqrt())
}

/// `R(rho)` on a grid, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BvnCurve {
    pub rho_grid: Vec<f64>,
    pub r_values: Vec<f64>,
}

impl BvnCurve {
    /// `points` equally spaced values of `rho` from -1 to 1.
    pub fn grid(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(DcovError::InvalidParameter("need at least two grid points".into()));
        }
        let step = 2.0 / (points - 1) as f64;
        let rho_grid: Vec<f64> = (0..points)
            .map(|i| if i + 1 == points { 1.0 } else { -1.0 + step * i as f64 })
            .collect();
        Self::at(rho_grid)
    }

    pub fn at(rho_grid: Vec<f64>) -> Result<Self> {
        let r_values = rho_grid.iter().map(|&r| bvn_dcor(r)).collect::<Result<_>>()?;
        Ok(Self { rho_grid, r_values })
    }

    /// Two-column CSV `rho,dcor`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rho", "dcor"])?;
        for (r, v) in self.rho_grid.iter().zip(&self.r_values) {
            w.write_record([r.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| DcovError::Csv(e.into()))?;
        Ok(())
    }
}

/// Covariance kernel `K(t, s) = |t| + |s| - |t - s|` of a Brownian field,
/// twice the covariance of standard Brownian motion in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BrownianKernel {
    pub dim: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl BrownianKernel {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn eval(&self, t: &[f64], s: &[f64]) -> f64 {
        let diff: Vec<f64> = t.iter().zip(s).map(|(a, b)| a - b).collect();
        norm(t) + norm(s) - norm(&diff)
    }

    pub fn gram(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        DMatrix::from_fn(n, n, |i, j| self.eval(&points[i], &points[j]))
    }
}

/// Jitter schedule relative to `trace / n`.
const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-8;

/// Sampler for a zero-mean Gaussian vector with a Brownian-kernel covariance
/// at fixed points.
///
/// Duplicate points share one latent value, which keeps the Gram matrix small
/// and makes repeated observations exactly equal.
#[derive(Debug, Clone)]
pub struct BrownianField {
    factor: DMatrix<f64>,
    /// Index into the distinct points for every input point.
    group: Vec<usize>,
    /// Multiplicity of every distinct point.
    counts: Vec<usize>,
}

impl BrownianField {
    pub fn new(points: &[Vec<f64>], kernel: BrownianKernel) -> Result<Self> {
        if points.is_empty() {
            return Err(DcovError::TooFewObservations {
                required: 1,
                actual: 0,
            });
        }
        if points.iter().any(|p| p.len() != kernel.dim || p.iter().any(|v| !v.is_finite())) {
            return Err(DcovError::InvalidParameter(format!(
                "points must be finite and of dimension {}",
                kernel.dim
            )));
        }
        let mut distinct: Vec<Vec<f64>> = Vec::new();
        let mut counts = Vec::new();
        let mut group = Vec::with_capacity(points.len());
        for p in points {
            match distinct.iter().position(|q| q == p) {
                Some(g) => {
                    group.push(g);
                    counts[g] += 1;
                }
                None => {
                    group.push(distinct.len());
                    distinct.push(p.clone());
                    counts.push(1);
                }
            }
        }
        let factor = jittered_cholesky(kernel.gram(&distinct))?;
        Ok(Self {
            factor,
            group,
            counts,
        })
    }

    /// Number of input points.
    pub fn len(&self) -> usize {
        self.group.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group.is_empty()
    }

    fn latent(&self, rng: &mut StreamRng) -> DVector<f64> {
        let m = self.counts.len();
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * z
    }

    /// One draw of the field at every input point.
    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        let w = self.latent(rng);
        self.group.iter().map(|&g| w[g]).collect()
    }

    /// One draw centered by its empirical mean over the input points.
    pub fn sample_centered(&self, rng: &mut StreamRng) -> Vec<f64> {
        let w = self.latent(rng);
        let n = self.len() as f64;
        let mean: f64 = w
            .iter()
            .zip(&self.counts)
            .map(|(v, &c)| v * (c as f64 / n))
            .sum();
        self.group.iter().map(|&g| w[g] - mean).collect()
    }
}

/// Lower Cholesky factor of `gram + jitter I`, escalating the jitter from
/// `1e-12` to `1e-8` times `trace / n`.
fn jittered_cholesky(gram: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = gram.nrows();
    let scale = gram.trace() / n as f64;
    if scale == 0.0 {
        // every point is at the origin, where the field vanishes
        return Ok(DMatrix::zeros(n, n));
    }
    let mut jitter = JITTER_START;
    loop {
        let mut g = gram.clone();
        for i in 0..n {
            g[(i, i)] += jitter * scale;
        }
        if let Some(ch) = g.cholesky() {
            return Ok(ch.unpack());
        }
        if jitter >= JITTER_MAX {
            return Err(DcovError::Factorization { jitter, scale });
        }
        jitter *= 10.0;
    }
}

fn rows_of(s: &Sample<f64>) -> Vec<Vec<f64>> {
    (0..s.n()).map(|k| s.row(k).to_vec()).collect()
}

/// One draw of a Gaussian vector with covariance `K(points_i, points_j)`.
pub fn gp_sample(points: &Sample<f64>, kernel: BrownianKernel, seed: u64) -> Result<Vec<f64>> {
    let field = BrownianField::new(&rows_of(points), kernel)?;
    Ok(field.sample(&mut stream_rng(seed, 0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub mc_se: f64,
    pub draws: usize,
}

/// Monte Carlo estimate of the Brownian covariance `W^2` of the empirical
/// distributions of `x` and `y`. Draw `m` uses stream `(seed, m)`.
pub fn brownian_cov_mc(x: &Sample<f64>, y: &Sample<f64>, draws: usize, seed: u64) -> Result<McEstimate> {
    if x.n() != y.n() {
        return Err(DcovError::SizeMismatch(x.n(), y.n()));
    }
    if x.n() < 2 {
        return Err(DcovError::TooFewObservations {
            required: 2,
            actual: x.n(),
        });
    }
    if draws < 2 {
        return Err(DcovError::InvalidParameter("need at least two draws".into()));
    }
    let fx = BrownianField::new(&rows_of(x), BrownianKernel::new(x.d()))?;
    let fy = BrownianField::new(&rows_of(y), BrownianKernel::new(y.d()))?;
    let n = x.n() as f64;

    let stats: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(seed, m);
            let u = fx.sample_centered(&mut rng);
            let v = fy.sample_centered(&mut rng);
            let c: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / n;
            c * c
        })
        .collect();

    let k = draws as f64;
    let estimate = stats.iter().sum::<f64>() / k;
    let var = stats.iter().map(|s| (s - estimate).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(McEstimate {
        estimate,
        mc_se: (var / k).sqrt(),
        draws,
    })
}

/// Plug-in value of
/// `E|X-X'||Y-Y'| + E|X-X'| E|Y-Y'| - 2 E|X-X'||Y-Y''|`
/// under the empirical distribution of the pairs.
pub fn pairwise_expectation_form(x: &Sample<f64>, y: &Sample<f64>) -> Result<f64> {
    if x.n() != y.n() {
        return Err(DcovError::SizeMismatch(x.n(), y.n()));
    }
    let t = dcov_via_t(&distance_matrix(x, 1.0)?, &distance_matrix(y, 1.0)?)?;
    Ok(t.dcov_sq)
}
