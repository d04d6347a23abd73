use dcov::sims::{power_study, Model, PowerStudy, PowerTest};
use dcov::theory::{brownian_cov_mc, constant_c, BvnCurve};
use dcov::{
    affine_dcov_summary, affine_rescale, chi2_bound_test, dcov_summary, distance_matrix, jackknife,
    load_csv, permutation_test, rank_dcov_summary, rank_test, ColumnSelector, DcovError, LoadedPair,
    MissingPolicy, PermutationOptions, RankMode, Result, Sample,
};
use serde_json::Value;

use crate::args::*;
use crate::output::{Report, Table};

fn effective_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn load(data: &DataArgs) -> Result<LoadedPair<f64>> {
    let policy = match data.missing {
        Missing::Error => MissingPolicy::Error,
        Missing::Drop => MissingPolicy::DropRows,
    };
    load_csv(
        &data.input,
        &ColumnSelector::parse(&data.x)?,
        &ColumnSelector::parse(&data.y)?,
        policy,
    )
}

fn describe_input(r: &mut Report, data: &DataArgs, pair: &LoadedPair<f64>) {
    r.put("input", data.input.display().to_string())
        .put("x", Value::from(pair.x.column_names().to_vec()))
        .put("y", Value::from(pair.y.column_names().to_vec()))
        .put("dropped_rows", pair.dropped);
}

pub fn stats(a: &StatsArgs) -> Result<Report> {
    let pair = load(&a.data)?;
    let mut r = Report::new("stats");
    describe_input(&mut r, &a.data, &pair);
    let s = if a.affine {
        affine_dcov_summary(&pair.x, &pair.y, a.alpha)?
    } else if a.rank {
        let seed = effective_seed(a.seed);
        r.put("seed", seed);
        rank_dcov_summary(&pair.x, &pair.y, seed)?
    } else {
        dcov_summary(&pair.x, &pair.y, a.alpha)?
    };
    r.put("n", s.n)
        .put("alpha", s.alpha)
        .put("variant", s.variant.to_string())
        .put("dcov", s.dcov())
        .put("dcor", s.dcor())
        .put("dvar_x", s.dvar_x())
        .put("dvar_y", s.dvar_y())
        .put("n_dcov_sq", s.n_dcov_sq());
    if s.is_degenerate() {
        r.put("note", "degenerate: a sample has zero distance variance, dcor set to 0");
    }
    Ok(r)
}

fn put_test(r: &mut Report, t: &dcov::TestReport) {
    let json = serde_json::to_value(t).expect("report serializes");
    if let Value::Object(map) = json {
        for (k, v) in map {
            r.put(&k, v);
        }
    }
}

pub fn test(a: &TestArgs) -> Result<Report> {
    let pair = load(&a.data)?;
    let mut r = Report::new("test");
    describe_input(&mut r, &a.data, &pair);
    let (x, y) = if a.affine && a.method != Method::Rank {
        (affine_rescale(&pair.x, "x")?, affine_rescale(&pair.y, "y")?)
    } else {
        (pair.x.clone(), pair.y.clone())
    };
    r.put("variant", if a.affine { "affine" } else { "plain" });
    let report = match a.method {
        Method::Permutation => {
            let seed = effective_seed(a.seed);
            let opts = PermutationOptions {
                replicates: a.replicates,
                seed,
                normalized: a.normalized,
                alpha: a.alpha,
            };
            let mut t = permutation_test(&x, &y, &opts)?;
            t.level = Some(a.level);
            t.reject = Some(t.rejects_at(a.level));
            t
        }
        Method::Chi2 => chi2_bound_test(&x, &y, a.level, a.alpha)?,
        Method::Rank => {
            if a.affine {
                return Err(DcovError::InvalidParameter("--affine does not apply to the rank test".into()));
            }
            rank_test(&x, &y, a.level, effective_seed(a.seed), RankMode::Table)?
        }
    };
    r.put("alpha", a.alpha);
    put_test(&mut r, &report);
    Ok(r)
}

pub fn rank(a: &RankTestArgs) -> Result<Report> {
    let pair = load(&a.data)?;
    let mut r = Report::new("rank-test");
    describe_input(&mut r, &a.data, &pair);
    let mode = match a.mode {
        RankModeArg::Table => RankMode::Table,
        RankModeArg::Exact => RankMode::Exact,
    };
    let report = rank_test(&pair.x, &pair.y, a.level, effective_seed(a.seed), mode)?;
    put_test(&mut r, &report);
    Ok(r)
}

pub fn jackknife_cmd(a: &JackknifeArgs) -> Result<Report> {
    let pair = load(&a.data)?;
    let labels = match &a.labels {
        Some(col) => {
            let all = dcov::sample::load_labels(&a.data.input, col)?;
            pair.kept_rows.iter().map(|&k| all[k].clone()).collect()
        }
        None => pair.kept_rows.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>(),
    };
    let dx = distance_matrix(&pair.x, a.alpha)?;
    let dy = distance_matrix(&pair.y, a.alpha)?;
    let rep = jackknife(&dx, &dy)?;
    let studentized = rep.studentized.clone().ok_or(DcovError::NoVariation)?;
    let full = dcov_summary(&pair.x, &pair.y, a.alpha)?;

    let mut r = Report::new("jackknife");
    describe_input(&mut r, &a.data, &pair);
    r.put("n", rep.n())
        .put("alpha", a.alpha)
        .put("dcor", full.dcor())
        .put("se_dcor", rep.se_dcor);
    if let Some(i) = rep.most_influential() {
        r.put("most_influential", labels[i].clone());
    }
    let rows = (0..rep.n())
        .map(|i| {
            vec![
                Value::from(labels[i].clone()),
                Value::from(rep.replicates_dcov_sq[i]),
                Value::from(rep.replicates_dcor_sq[i]),
                Value::from(rep.replicates_dcor_sq[i].sqrt()),
                Value::from(studentized[i]),
            ]
        })
        .collect();
    r.table(Table {
        name: "replicates".into(),
        columns: ["label", "dcov_sq", "dcor_sq", "dcor", "studentized"].map(String::from).to_vec(),
        rows,
    });
    Ok(r)
}

/// Small data set for `theory brownian-check`: a 2-d sample and a 1-d sample
/// depending on it.
const TOY_X: [[f64; 2]; 8] = [
    [0.0, 1.0],
    [1.5, -0.5],
    [-1.0, 2.0],
    [0.5, 0.5],
    [2.0, 1.0],
    [-0.5, -1.5],
    [1.0, 3.0],
    [-2.0, 0.0],
];
const TOY_Y: [f64; 8] = [1.1, 2.3, 4.8, 0.2, 4.9, 2.7, 10.1, 4.0];

pub fn theory(cmd: &TheoryCommand) -> Result<Report> {
    match cmd {
        TheoryCommand::BvnCurve(a) => {
            let curve = match &a.rho {
                Some(grid) => BvnCurve::at(grid.clone())?,
                None => BvnCurve::grid(a.points)?,
            };
            let mut r = Report::new("theory bvn-curve");
            r.put("points", curve.rho_grid.len());
            let rows = curve
                .rho_grid
                .iter()
                .zip(&curve.r_values)
                .map(|(&rho, &v)| vec![Value::from(rho), Value::from(v)])
                .collect();
            r.table(Table {
                name: "curve".into(),
                columns: vec!["rho".into(), "dcor".into()],
                rows,
            });
            Ok(r)
        }
        TheoryCommand::Constants(a) => {
            let mut rows = Vec::new();
            for &d in &a.dim {
                for &alpha in &a.alpha {
                    rows.push(vec![Value::from(d), Value::from(alpha), Value::from(constant_c(d, alpha)?)]);
                }
            }
            let mut r = Report::new("theory constants");
            r.table(Table {
                name: "constants".into(),
                columns: vec!["dim".into(), "alpha".into(), "c".into()],
                rows,
            });
            Ok(r)
        }
        TheoryCommand::BrownianCheck(a) => {
            let (x, y, source) = match &a.input {
                Some(path) => {
                    let pair = load_csv::<f64>(
                        path,
                        &ColumnSelector::parse(a.x.as_deref().unwrap_or_default())?,
                        &ColumnSelector::parse(a.y.as_deref().unwrap_or_default())?,
                        MissingPolicy::DropRows,
                    )?;
                    (pair.x, pair.y, path.display().to_string())
                }
                None => (
                    Sample::from_row_major(2, TOY_X.iter().flatten().copied().collect())?,
                    Sample::from_column(&TOY_Y)?,
                    "built-in toy data".to_string(),
                ),
            };
            let seed = effective_seed(a.seed);
            let mc = brownian_cov_mc(&x, &y, a.draws, seed)?;
            let reference = dcov_summary(&x, &y, 1.0)?.dcov_sq;
            let z = (mc.estimate - reference).abs() / mc.mc_se;
            let mut r = Report::new("theory brownian-check");
            r.put("data", source)
                .put("n", x.n())
                .put("draws", mc.draws)
                .put("seed", seed)
                .put("estimate", mc.estimate)
                .put("mc_se", mc.mc_se)
                .put("dcov_sq", reference)
                .put("z", if mc.mc_se > 0.0 { Value::from(z) } else { Value::Null })
                .put("pass", mc.estimate == reference || z <= 3.0);
            Ok(r)
        }
    }
}

fn parse_model(spec: &str) -> Result<Model> {
    let bad = || DcovError::InvalidParameter(format!("unknown model {spec:?}; use bvn:RHO, density or gumbel:THETA"));
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    let value = |a: Option<&str>| -> Result<f64> { a.ok_or_else(bad)?.parse().map_err(|_| bad()) };
    match name {
        "bvn" => Ok(Model::Bvn { rho: value(arg)? }),
        "density" | "density_model" => Ok(Model::DensityModel),
        "gumbel" => Ok(Model::Gumbel { theta: value(arg)? }),
        _ => Err(bad()),
    }
}

pub fn power(a: &PowerArgs) -> Result<Report> {
    let model = parse_model(&a.model)?;
    let tests = a.tests.iter().map(|t| t.parse()).collect::<Result<Vec<PowerTest>>>()?;
    let seed = effective_seed(a.seed);
    let mut study = PowerStudy::new(model, a.sizes.clone(), tests);
    study.runs = a.runs;
    study.level = a.level;
    study.seed = seed;
    study.residuals = a.residuals;
    study.permutation_replicates = a.replicates;
    let curve = power_study(&study)?;

    let mut r = Report::new("power");
    let label = if curve.residuals {
        format!("{}_residuals", curve.model)
    } else {
        curve.model.clone()
    };
    r.put("model", label.clone())
        .put("runs", curve.runs_per_cell)
        .put("level", curve.level)
        .put("seed", seed)
        .put("permutation_replicates", a.replicates);
    let mut rows = Vec::new();
    for (i, t) in curve.tests.iter().enumerate() {
        for (j, &n) in curve.sample_sizes.iter().enumerate() {
            let p = curve.power[i][j];
            rows.push(vec![
                Value::from(label.clone()),
                Value::from(n),
                Value::from(t.name()),
                Value::from(p),
                Value::from(curve.runs_per_cell),
                Value::from(curve.level),
                Value::from(seed),
                Value::from(curve.std_error(p)),
            ]);
        }
    }
    r.table(Table {
        name: "power".into(),
        columns: ["model", "n", "test", "power", "runs", "level", "seed", "std_error"]
            .map(String::from)
            .to_vec(),
        rows,
    });
    Ok(r)
}
