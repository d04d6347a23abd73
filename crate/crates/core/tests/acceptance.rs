//! Acceptance gate. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use dcov::inference::ExactRankNull;
use dcov::sims::{gen_gumbel_bve, gumbel_conditional_cdf, gumbel_conditional_density, power_study, Model, PowerStudy, PowerTest};
use dcov::theory::{bvn_dcor, brownian_cov_mc};
use dcov::{
    affine_dcov_summary, chi2_bound_test, dcov_summary, dcov_via_t, distance_matrix, double_center,
    jackknife, CriticalTable, DistanceMatrix, Exact, Sample,
};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn normal_sample(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Sample<f64> {
    let data = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Sample::from_row_major(d, data).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_t_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(2..=50);
        let p = rng.random_range(1..=5);
        let q = rng.random_range(1..=5);
        let x = normal_sample(&mut rng, n, p);
        let noise = normal_sample(&mut rng, n, q);
        let w = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let y = Sample::new(
            Array2::from_shape_fn((n, q), |(k, j)| noise.values()[[k, j]] + w * x.values()[[k, j % p]].abs()),
            (0..q).map(|j| format!("y{j}")).collect(),
        )
        .unwrap();
        let alpha = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.1..=2.0) };
        let dx = distance_matrix(&x, alpha).unwrap();
        let dy = distance_matrix(&y, alpha).unwrap();
        let centered = dcov::dcov_stats(&double_center(&dx), &double_center(&dy)).unwrap();
        let t = dcov_via_t(&dx, &dy).unwrap();
        let scale = centered.dcov_sq.abs().max(t.dcov_sq.abs());
        let rel = (centered.dcov_sq - t.dcov_sq).abs() / scale;
        worst = worst.max(rel);
    }
    check(worst <= 1e-10, format!("max relative difference {worst:.3e} over 500 samples"))
}

fn c2_hand_oracle() -> Outcome {
    let gaps = [Exact::from_integer(0), Exact::from_integer(1), Exact::from_integer(2)];
    let dm = DistanceMatrix::from_scalar_gaps(&gaps);
    let c = double_center(&dm);
    let exact = dcov::dcov::dcov_components(&c, &c).unwrap().dvar_x_sq;
    let exact_ok = exact == Exact::new(40, 81);

    let s = Sample::from_column(&[0.0, 1.0, 2.0]).unwrap();
    let f: f64 = dcov_summary(&s, &s, 1.0).unwrap().dvar_x_sq;
    let float_ok = (f - 40.0 / 81.0).abs() <= 1e-14;

    let (a, b) = (Exact::new(3, 2), Exact::new(7, 5));
    let dx = DistanceMatrix::from_scalar_gaps(&[Exact::from_integer(0), a]);
    let dy = DistanceMatrix::from_scalar_gaps(&[Exact::from_integer(0), b]);
    let two = dcov::dcov::dcov_components(&double_center(&dx), &double_center(&dy)).unwrap();
    let pair_ok = two.dcov_sq == a * b / Exact::from_integer(4);
    check(
        exact_ok && float_ok && pair_ok,
        format!("dvar^2 exact {exact}, f64 {f:.17}, n=2 dcov^2 {} (expect ab/4 = {})", two.dcov_sq, a * b / Exact::from_integer(4)),
    )
}

fn c3_bvn() -> Outcome {
    let r0 = bvn_dcor(0.0).unwrap();
    let r1 = bvn_dcor(1.0).unwrap();
    let ratio = bvn_dcor(1e-6).unwrap() / 1e-6;
    let mut bound_ok = true;
    for i in 0..=200 {
        let rho = -1.0 + i as f64 / 100.0;
        if bvn_dcor(rho).unwrap() > rho.abs() + 1e-15 {
            bound_ok = false;
        }
    }
    check(
        r0.abs() <= 1e-12 && (r1 - 1.0).abs() <= 1e-12 && (ratio - 0.89066).abs() <= 1e-4 && bound_ok,
        format!("R(0) = {r0}, R(1) = {r1}, R(1e-6)/1e-6 = {ratio:.8}, R <= |rho| on grid: {bound_ok}"),
    )
}

fn c4_alpha_two() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(3..=60);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let slope: f64 = rng.random_range(-2.0..2.0);
        let y: Vec<f64> = x.iter().map(|v| slope * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let nf = n as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let my = y.iter().sum::<f64>() / nf;
        let sxy = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / nf;
        let sxx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / nf;
        let syy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / nf;
        let pearson = sxy / (sxx * syy).sqrt();
        let s = dcov_summary(&Sample::from_column(&x).unwrap(), &Sample::from_column(&y).unwrap(), 2.0).unwrap();
        worst = worst
            .max((s.dcor() - pearson.abs()).abs())
            .max((s.dcov() - 2.0 * sxy.abs()).abs());
    }
    check(worst <= 1e-10, format!("max deviation {worst:.3e} over 100 samples"))
}

fn c5_rank_table() -> Outcome {
    let published = CriticalTable::published();
    let mut lines = Vec::new();
    let mut ok = true;
    for n in 5..=7 {
        let null = ExactRankNull::enumerate(n).unwrap();
        let row = published.rows.iter().find(|r| r.n == n).unwrap();
        for (level, cv, asl) in [(0.10, row.cv10, row.asl10.unwrap()), (0.05, row.cv5, row.asl5.unwrap())] {
            let cp = null.critical_point(level);
            let asl_printed = (cp.asl * 1000.0).round() / 1000.0;
            let hit = (cp.printed - cv).abs() < 5e-7 && (asl_printed - asl).abs() < 5e-7;
            ok &= hit;
            lines.push(format!("n={n} {level}: {:.3}/{asl_printed:.3}", cp.printed));
        }
    }
    check(ok, lines.join(", "))
}

fn c6_brownian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for case in 0..10 {
        let n = rng.random_range(3..=15);
        let p = rng.random_range(1..=3);
        let q = rng.random_range(1..=3);
        let x = normal_sample(&mut rng, n, p);
        let noise = normal_sample(&mut rng, n, q);
        let y = Sample::new(
            Array2::from_shape_fn((n, q), |(k, j)| noise.values()[[k, j]] + x.values()[[k, j % p]]),
            (0..q).map(|j| format!("y{j}")).collect(),
        )
        .unwrap();
        let reference = dcov_summary(&x, &y, 1.0).unwrap().dcov_sq;
        let mc = brownian_cov_mc(&x, &y, 100_000, 600 + case).unwrap();
        worst = worst.max((mc.estimate - reference).abs() / mc.mc_se);
    }
    check(worst <= 3.0, format!("max |estimate - dcov^2| / mc_se = {worst:.3} over 10 samples"))
}

/// Adaptive Simpson quadrature.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn c7_gumbel() -> Outcome {
    let mut worst_quad = 0.0f64;
    for &theta in &[0.0, 0.25, 0.5, 1.0] {
        for &x in &[0.0, 0.3, 1.0, 2.5, 6.0] {
            for &y in &[0.01, 0.2, 0.7, 1.5, 3.0, 8.0] {
                let q = simpson(&|t| gumbel_conditional_density(t, x, theta), 0.0, y, 1e-14);
                worst_quad = worst_quad.max((q - gumbel_conditional_cdf(y, x, theta)).abs());
            }
        }
    }
    let (x, y) = gen_gumbel_bve(1_000_000, 1.0, 7).unwrap();
    let (xv, yv) = (x.as_column().unwrap(), y.as_column().unwrap());
    let r = dcov::sims::pearson_t_test(&xv, &yv).unwrap().estimate;
    check(
        worst_quad <= 1e-10 && (r + 0.40365).abs() <= 0.01,
        format!("quadrature max error {worst_quad:.2e}, theta=1 n=1e6 correlation {r:.5}"),
    )
}

fn c8_power() -> Outcome {
    let runs = 2000;
    let level = 0.10;

    let mut density = PowerStudy::new(Model::DensityModel, vec![100], vec![PowerTest::DcovPerm, PowerTest::PearsonT]);
    density.runs = runs;
    density.level = level;
    density.seed = 81;
    let d = power_study(&density).map_err(|e| e.to_string())?;
    let d_dcov = d.power_of(PowerTest::DcovPerm, 100).unwrap();
    let d_pearson = d.power_of(PowerTest::PearsonT, 100).unwrap();

    let small = vec![30, 50];
    let mut gumbel = PowerStudy::new(Model::Gumbel { theta: 0.5 }, small.clone(), vec![PowerTest::DcovPerm, PowerTest::PearsonT]);
    gumbel.runs = runs;
    gumbel.level = level;
    gumbel.seed = 82;
    let g = power_study(&gumbel).map_err(|e| e.to_string())?;
    let g_pairs: Vec<(f64, f64)> = small
        .iter()
        .map(|&n| (g.power_of(PowerTest::PearsonT, n).unwrap(), g.power_of(PowerTest::DcovPerm, n).unwrap()))
        .collect();
    let gumbel_ok = g_pairs.iter().all(|(p, dc)| p > dc);

    let grid = vec![50, 100, 200];
    let mut resid = PowerStudy::new(Model::Gumbel { theta: 0.5 }, grid.clone(), vec![PowerTest::DcovPerm]);
    resid.runs = runs;
    resid.level = level;
    resid.seed = 83;
    resid.residuals = true;
    let r = power_study(&resid).map_err(|e| e.to_string())?;
    let r_power: Vec<f64> = grid.iter().map(|&n| r.power_of(PowerTest::DcovPerm, n).unwrap()).collect();
    let resid_ok = r_power.windows(2).all(|w| w[1] > w[0]);

    check(
        d_dcov >= 0.9 && d_pearson <= 0.2 && gumbel_ok && resid_ok,
        format!(
            "density n=100 dcov {d_dcov:.3} pearson {d_pearson:.3}; gumbel(0.5) (pearson, dcov) at n={small:?}: {g_pairs:.3?}; residual dcov at n={grid:?}: {r_power:.3?}"
        ),
    )
}

fn c9_chi2_size() -> Outcome {
    let runs = 2000;
    let level = 0.10;
    let n = 40;
    let mut rejections = 0;
    for run in 0..runs {
        let mut rng = dcov::rng::stream_rng(9, run);
        let x: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let report = chi2_bound_test(&Sample::from_column(&x).unwrap(), &Sample::from_column(&y).unwrap(), level, 1.0);
        if let Ok(rep) = report {
            if rep.reject == Some(true) {
                rejections += 1;
            }
        }
    }
    let size = rejections as f64 / runs as f64;
    let limit = level + 3.0 * (level * (1.0 - level) / runs as f64).sqrt();
    check(size <= limit, format!("Bernoulli(0.5) pairs n={n}: size {size:.4} <= {limit:.4}"))
}

/// Reads `(y, x)` pairs from either the NIST StRD `.dat` layout or a CSV with
/// `y` and `x` columns.
fn read_eckerle(path: &PathBuf) -> Result<(Vec<f64>, Vec<f64>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    if let Some(start) = text.lines().position(|l| l.trim_start().starts_with("Data:")) {
        for line in text.lines().skip(start + 1) {
            let cols: Vec<f64> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            if cols.len() == 2 {
                ys.push(cols[0]);
                xs.push(cols[1]);
            }
        }
    } else {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| e.to_string())?.clone();
        let yi = header.iter().position(|h| h.trim() == "y").ok_or("no y column")?;
        let xi = header.iter().position(|h| h.trim() == "x").ok_or("no x column")?;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            ys.push(rec[yi].trim().parse().map_err(|_| "bad y")?);
            xs.push(rec[xi].trim().parse().map_err(|_| "bad x")?);
        }
    }
    Ok((ys, xs))
}

fn c10_eckerle() -> Option<Outcome> {
    let candidates: Vec<PathBuf> = std::env::var_os("DCOV_ECKERLE4")
        .map(PathBuf::from)
        .into_iter()
        .chain([
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/Eckerle4.dat"),
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/Eckerle4.csv"),
        ])
        .collect();
    let path = candidates.into_iter().find(|p| p.is_file())?;
    Some((|| {
        let (y, x) = read_eckerle(&path)?;
        let xs = Sample::from_column(&x).map_err(|e| e.to_string())?;
        let ys = Sample::from_column(&y).map_err(|e| e.to_string())?;
        let s = dcov_summary(&xs, &ys, 1.0).map_err(|e| e.to_string())?;
        let (b1, b2, b3) = (1.55438, 4.08883, 451.541);
        let res: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(&xv, &yv)| yv - b1 / b2 * (-(xv - b3).powi(2) / (2.0 * b2 * b2)).exp())
            .collect();
        let rs = dcov_summary(&ys, &Sample::from_column(&res).unwrap(), 1.0).map_err(|e| e.to_string())?;
        check(
            (s.dcor() - 0.4275431).abs() <= 1e-6
                && (s.n_dcov_sq() - 8.1337).abs() <= 1e-3
                && (rs.dcor() - 0.4285534).abs() <= 1e-3,
            format!(
                "{}: n={} dcor {:.7}, nV^2 {:.4}, dcor(y, residuals) {:.7}",
                path.display(),
                s.n,
                s.dcor(),
                s.n_dcov_sq(),
                rs.dcor()
            ),
        )
    })())
}

fn c11_jackknife() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for n in 3..=12 {
        for _ in 0..5 {
            let p = rng.random_range(1..=3);
            let x = normal_sample(&mut rng, n, p);
            let y = x.map(|v| v * v).unwrap();
            let y = Sample::new(
                Array2::from_shape_fn((n, p), |(k, j)| y.values()[[k, j]] + 0.3 * rng.sample::<f64, _>(StandardNormal)),
                y.column_names().to_vec(),
            )
            .unwrap();
            let report = jackknife(&distance_matrix(&x, 1.0).unwrap(), &distance_matrix(&y, 1.0).unwrap()).unwrap();
            for i in 0..n {
                let full = dcov_summary(&x.without_row(i), &y.without_row(i), 1.0).unwrap();
                worst = worst
                    .max((report.replicates_dcov_sq[i] - full.dcov_sq).abs())
                    .max((report.replicates_dcor_sq[i] - full.dcor_sq).abs());
                checked += 1;
            }
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:.3e} over {checked} deletions, n = 3..=12"))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    m.qr().q()
}

fn transform(s: &Sample<f64>, m: &DMatrix<f64>, shift: &[f64], scale: f64) -> Sample<f64> {
    let (n, d) = (s.n(), s.d());
    let data = DMatrix::from_fn(n, d, |k, j| s.values()[[k, j]]);
    let out = data * m.transpose();
    Sample::new(
        Array2::from_shape_fn((n, d), |(k, j)| shift[j] + scale * out[(k, j)]),
        s.column_names().to_vec(),
    )
    .unwrap()
}

fn c12_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_law = 0.0f64;
    let mut worst_affine = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(8..=40);
        let p = rng.random_range(1..=4);
        let q = rng.random_range(1..=4);
        let x = normal_sample(&mut rng, n, p);
        let noise = normal_sample(&mut rng, n, q);
        let y = Sample::new(
            Array2::from_shape_fn((n, q), |(k, j)| noise.values()[[k, j]] + x.values()[[k, j % p]].powi(2)),
            (0..q).map(|j| format!("y{j}")).collect(),
        )
        .unwrap();
        let base = dcov_summary(&x, &y, 1.0).unwrap();

        let (b1, b2) = (rng.random_range(0.2..5.0) * if rng.random_bool(0.5) { -1.0 } else { 1.0 }, rng.random_range(0.2..5.0));
        let a1: Vec<f64> = (0..p).map(|_| rng.random_range(-10.0..10.0)).collect();
        let a2: Vec<f64> = (0..q).map(|_| rng.random_range(-10.0..10.0)).collect();
        let xt = transform(&x, &random_orthogonal(&mut rng, p), &a1, b1);
        let yt = transform(&y, &random_orthogonal(&mut rng, q), &a2, b2);
        let moved = dcov_summary(&xt, &yt, 1.0).unwrap();
        let expect = (b1 * b2).abs() * base.dcov_sq;
        worst_law = worst_law
            .max((moved.dcov_sq - expect).abs() / expect)
            .max((moved.dcor() - base.dcor()).abs());

        let aff = affine_dcov_summary(&x, &y, 1.0).unwrap();
        let mx = DMatrix::from_fn(p, p, |_, _| rng.random_range(-2.0..2.0)) + DMatrix::identity(p, p) * 3.0;
        let my = DMatrix::from_fn(q, q, |_, _| rng.random_range(-2.0..2.0)) + DMatrix::identity(q, q) * 3.0;
        let aff_moved = affine_dcov_summary(&transform(&x, &mx, &a1, 1.0), &transform(&y, &my, &a2, 1.0), 1.0).unwrap();
        worst_affine = worst_affine
            .max((aff_moved.dcov() - aff.dcov()).abs() / aff.dcov())
            .max((aff_moved.dcor() - aff.dcor()).abs());
    }
    check(
        worst_law <= 1e-9 && worst_affine <= 1e-9,
        format!("dcov^2 scale/rotation law max relative error {worst_law:.3e}; affine variant {worst_affine:.3e}"),
    )
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Option<Outcome>>)> = vec![
        ("1 T-formula identity", Box::new(|| Some(c1_t_identity()))),
        ("2 hand oracle", Box::new(|| Some(c2_hand_oracle()))),
        ("3 bivariate normal dCor", Box::new(|| Some(c3_bvn()))),
        ("4 alpha=2 degeneracy", Box::new(|| Some(c4_alpha_two()))),
        ("5 rank critical values", Box::new(|| Some(c5_rank_table()))),
        ("6 Brownian covariance", Box::new(|| Some(c6_brownian()))),
        ("7 Gumbel sampler", Box::new(|| Some(c7_gumbel()))),
        ("8 power orderings", Box::new(|| Some(c8_power()))),
        ("9 chi-square bound size", Box::new(|| Some(c9_chi2_size()))),
        ("10 Eckerle4", Box::new(c10_eckerle)),
        ("11 jackknife deletion", Box::new(|| Some(c11_jackknife()))),
        ("12 invariance", Box::new(|| Some(c12_invariance()))),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Some(Ok(detail)) => println!("PASS  [{name}] {detail} ({secs:.1}s)"),
            Some(Err(detail)) => {
                failed += 1;
                println!("FAIL  [{name}] {detail} ({secs:.1}s)");
            }
            None => println!(
                "SKIP  [{name}] dataset not found; set DCOV_ECKERLE4 or place Eckerle4.dat in crates/core/tests/data"
            ),
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
