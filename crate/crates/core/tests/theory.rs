use dcov::rng::stream_rng;
use dcov::theory::{
    brownian_cov_mc, bvn_dcor, bvn_limit_ratio, constant_c, constant_c_unit, gp_sample, pairwise_expectation_form,
    BrownianField, BrownianKernel, BvnCurve,
};
use dcov::{dcov_summary, dcov_via_t, distance_matrix, Sample};
use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;

// reference values of R(rho) computed with 50-digit arithmetic
const BVN_REFERENCE: [(f64, f64); 5] = [
    (0.1, 0.089131474237373198),
    (0.25, 0.22369988366945474),
    (0.5, 0.45412650444024848),
    (0.75, 0.70161932182543324),
    (0.9, 0.86817805434883437),
];

#[test]
fn bvn_reference_values() {
    for (rho, r) in BVN_REFERENCE {
        assert!((bvn_dcor(rho).unwrap() - r).abs() < 1e-12, "rho = {rho}");
        assert!((bvn_dcor(-rho).unwrap() - r).abs() < 1e-12, "rho = -{rho}");
    }
    assert!((bvn_dcor(1e-6).unwrap() / 1e-6 - 0.890663371523835).abs() < 1e-9);
    assert!((bvn_limit_ratio() - 0.89066337152377).abs() < 1e-12);
    assert!(bvn_dcor(1.0 + 1e-6).is_err());
}

#[test]
fn bvn_curve_is_monotone_and_bounded() {
    let curve = BvnCurve::grid(201).unwrap();
    assert_eq!(curve.rho_grid.len(), 201);
    for (rho, r) in curve.rho_grid.iter().zip(&curve.r_values) {
        assert!(*r <= rho.abs() + 1e-15);
    }
    let half: Vec<f64> = curve.r_values[100..].to_vec();
    assert!(half.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn sample_dcor_approaches_the_bvn_curve() {
    // n = 3000 averaged over four samples; the V-statistic bias is O(1/n)
    let n = 3000;
    let mut sum = 0.0;
    for seed in 0..4 {
        let (x, y) = dcov::sims::gen_bvn(n, 0.5, seed).unwrap();
        sum += dcov_summary(&x, &y, 1.0).unwrap().dcor();
    }
    let mean = sum / 4.0;
    assert!((mean - bvn_dcor(0.5).unwrap()).abs() < 0.01, "{mean}");
}

#[test]
fn constants() {
    assert!((constant_c(1, 1.0).unwrap() - std::f64::consts::PI).abs() < 1e-13);
    assert!((constant_c(2, 1.0).unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-13);
    for d in 1..=20 {
        assert!((constant_c(d, 1.0).unwrap() - constant_c_unit(d).unwrap()).abs() < 1e-12 * constant_c_unit(d).unwrap());
        for alpha in [0.25, 0.5, 1.0, 1.5, 1.9] {
            assert!(constant_c(d, alpha).unwrap() > 0.0);
        }
    }
    for d in 1..=10 {
        let big = constant_c(d, 1.999).unwrap();
        assert!(big.is_finite() && big > constant_c(d, 1.9).unwrap());
    }
    assert!(constant_c(1, 2.0).is_err());
    assert!(constant_c(0, 1.0).is_err());
}

#[test]
fn kernel_gram_is_positive_semidefinite() {
    let mut rng = stream_rng(40, 0);
    for _ in 0..100 {
        let d = rng.random_range(1..=4);
        let m = rng.random_range(2..=12);
        let pts: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let g = BrownianKernel::new(d).gram(&pts);
        let eig = SymmetricEigen::new(g).eigenvalues;
        let max = eig.max();
        assert!(eig.min() >= -1e-8 * max);
    }
}

#[test]
fn field_moments_match_the_kernel() {
    let draws = 100_000;
    let field = BrownianField::new(&[vec![1.0], vec![3.0]], BrownianKernel::new(1)).unwrap();
    let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
    let mut rng = stream_rng(41, 0);
    for _ in 0..draws {
        let w = field.sample(&mut rng);
        s11 += w[0] * w[0];
        s22 += w[1] * w[1];
        s12 += w[0] * w[1];
    }
    let k = draws as f64;
    let (v1, v2, c) = (s11 / k, s22 / k, s12 / k);
    // Var(W^2) = 2 sigma^4 and Var(W1 W2) = s1 s2 + c^2 for a centered Gaussian pair
    assert!((v1 - 2.0).abs() < 3.0 * (2.0 * 4.0 / k).sqrt(), "{v1}");
    assert!((v2 - 6.0).abs() < 3.0 * (2.0 * 36.0 / k).sqrt(), "{v2}");
    assert!((c - 2.0).abs() < 3.0 * ((2.0 * 6.0 + 4.0) / k).sqrt(), "{c}");
}

#[test]
fn single_point_variance() {
    let draws = 100_000;
    let mut acc = 0.0;
    for seed in 0..draws {
        let w = gp_sample(&Sample::from_row_major(2, vec![1.2, 1.6]).unwrap(), BrownianKernel::new(2), seed).unwrap();
        acc += w[0] * w[0];
    }
    let v = acc / draws as f64;
    assert!((v - 4.0).abs() < 3.0 * (2.0 * 16.0 / draws as f64).sqrt(), "{v}");
    let zero = gp_sample(&Sample::from_row_major(3, vec![0.0; 3]).unwrap(), BrownianKernel::new(3), 9).unwrap();
    assert_eq!(zero, vec![0.0]);
}

#[test]
fn brownian_covariance_matches_hand_value() {
    let s = Sample::from_column(&[0.0, 1.0, 2.0]).unwrap();
    let mc = brownian_cov_mc(&s, &s, 100_000, 42).unwrap();
    assert!((mc.estimate - 40.0 / 81.0).abs() <= 3.0 * mc.mc_se, "{mc:?}");
}

#[test]
fn brownian_covariance_on_random_bivariate_sample() {
    let mut rng = stream_rng(43, 0);
    let data: Vec<f64> = (0..20).map(|_| rng.sample(StandardNormal)).collect();
    let x = Sample::from_row_major(2, data.clone()).unwrap();
    let y = Sample::from_column(&(0..10).map(|k| data[2 * k] * data[2 * k + 1]).collect::<Vec<_>>()).unwrap();
    let mc = brownian_cov_mc(&x, &y, 100_000, 44).unwrap();
    let v = dcov_summary(&x, &y, 1.0).unwrap().dcov_sq;
    assert!((mc.estimate - v).abs() <= 3.0 * mc.mc_se, "{mc:?} vs {v}");
}

#[test]
fn monte_carlo_error_shrinks_as_root_draws() {
    let x = Sample::from_column(&[0.3, -1.2, 2.2, 0.9, -0.4, 1.7]).unwrap();
    let y = Sample::from_column(&[1.0, 0.1, 2.5, 0.3, 0.8, 2.0]).unwrap();
    let se: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&m| brownian_cov_mc(&x, &y, m, 45).unwrap().mc_se)
        .collect();
    let target = 1.0 / 10f64.sqrt();
    for w in se.windows(2) {
        let ratio = w[1] / w[0];
        assert!((ratio - target).abs() < 0.3 * target, "{se:?}");
    }
}

#[test]
fn duplicate_points_share_a_value() {
    let x = Sample::from_column(&[1.0, 1.0, 2.0, 2.0, 5.0]).unwrap();
    let y = Sample::from_column(&[0.0, 3.0, 1.0, 1.0, 4.0]).unwrap();
    let mc = brownian_cov_mc(&x, &y, 50_000, 46).unwrap();
    let v = dcov_summary(&x, &y, 1.0).unwrap().dcov_sq;
    assert!((mc.estimate - v).abs() <= 3.0 * mc.mc_se, "{mc:?} vs {v}");
    let flat = Sample::from_column(&[7.0; 5]).unwrap();
    let zero = brownian_cov_mc(&flat, &y, 100, 1).unwrap();
    assert_eq!((zero.estimate, zero.mc_se), (0.0, 0.0));
}

#[test]
fn brownian_estimate_is_thread_count_independent() {
    let x = Sample::from_column(&[0.0, 1.0, 4.0, 2.0]).unwrap();
    let y = Sample::from_column(&[1.0, 0.0, 3.0, 3.0]).unwrap();
    let a = brownian_cov_mc(&x, &y, 5_000, 47).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    let b = pool.install(|| brownian_cov_mc(&x, &y, 5_000, 47).unwrap());
    assert_eq!(a, b);
}

#[test]
fn expectation_form_is_the_raw_distance_route() {
    let x = Sample::from_column(&[0.0, 1.5]).unwrap();
    let y = Sample::from_column(&[2.0, 2.4]).unwrap();
    assert!((pairwise_expectation_form(&x, &y).unwrap() - 1.5 * 0.4 / 4.0).abs() < 1e-15);

    let mut rng = stream_rng(48, 0);
    let a = Sample::from_row_major(2, (0..40).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
    let b = Sample::from_column(&(0..20).map(|_| rng.random::<f64>()).collect::<Vec<_>>()).unwrap();
    let t = dcov_via_t(&distance_matrix(&a, 1.0).unwrap(), &distance_matrix(&b, 1.0).unwrap()).unwrap();
    assert_eq!(pairwise_expectation_form(&a, &b).unwrap(), t.dcov_sq);
}

#[test]
fn expectation_form_vanishes_under_independence() {
    for run in 0..50 {
        let mut rng = stream_rng(49, run);
        let x: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let v = pairwise_expectation_form(&Sample::from_column(&x).unwrap(), &Sample::from_column(&y).unwrap()).unwrap();
        assert!(v <= 0.005, "run {run}: {v}");
    }
}
