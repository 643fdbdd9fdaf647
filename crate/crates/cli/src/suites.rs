//! The four experiment suites: newsvendor simulation, portfolio choice,
//! robust logistic regression and the quadratic toy.

use robust_frontier::{
    bootstrap_frontier, calibrate, frontier_gap, high_confidence_delta, normalize_frontier, oos_frontier,
    predicted_curves, summarize, true_frontier, AsymptoticOptions, CalibrationRule, DataGenerator,
    EmpiricalDistribution, Frontier, FrontierPoint, OosEvaluation, QuadraticModel, RadiusEstimator, RngSeed,
};
use serde_json::json;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::experiments::{self, stream, ExperimentKind};
use crate::output::{num, Artifacts};

pub fn run_suite(kind: ExperimentKind, config: &Config, seed: RngSeed) -> CliResult<Artifacts> {
    match kind {
        ExperimentKind::Newsvendor => newsvendor(config, seed),
        ExperimentKind::Portfolio => portfolio(config, seed),
        ExperimentKind::Logistic => logistic(config, seed),
        ExperimentKind::Toy => toy(config, seed),
    }
}

fn max_mean(f: &Frontier<f64>) -> CliResult<f64> {
    Ok(calibrate::<f64, QuadraticModel<f64>>(f, CalibrationRule::MaxMean, None)?)
}

/// True frontier, simulated out-of-sample frontiers and their gaps for each
/// data size, and normalized bootstrap/out-of-sample pairs.
fn newsvendor(config: &Config, seed: RngSeed) -> CliResult<Artifacts> {
    let nv = experiments::newsvendor(config)?;
    let phi = experiments::phi(config)?;
    let opts = experiments::robust_options(config)?;
    let grid = experiments::delta_grid(config, &experiments::NEWSVENDOR_GRID)?;
    let sizes: Vec<usize> = config.list_or("sizes", &[10, 30, 50])?;
    let repeats: usize = config.parse_or("K", 10_000)?;
    let k: usize = config.parse_or("k", 50)?;
    let true_n: usize = config.parse_or("true_sample", 1_000_000)?;
    let reference_n: usize = config.parse_or("reference_sample", 20_000)?;
    let fresh = match config.string_or("evaluation", "reference").as_str() {
        "reference" => false,
        "fresh_draw" => true,
        other => return Err(CliError::Config(format!("unknown evaluation {other:?} (reference, fresh_draw)"))),
    };

    let big = DataGenerator::<f64>::draw(&nv.dgm, true_n, seed.derive(stream::TRUE_SAMPLE))?;
    let reference = DataGenerator::<f64>::draw(&nv.dgm, reference_n, seed.derive(stream::REFERENCE))?;
    let truth = true_frontier(&nv.model, &big, &reference, &phi, &grid, &opts)?;
    drop(big);
    let evaluation = if fresh {
        OosEvaluation::FreshDraw
    } else {
        OosEvaluation::Reference(&reference)
    };

    let mut art = Artifacts::default();
    let mut gaps = Vec::new();
    for &n in &sizes {
        let oos = oos_frontier(
            &nv.model,
            &nv.dgm,
            n,
            repeats,
            &phi,
            &grid,
            seed.derive(stream::SIMULATION).derive(n as u64),
            &opts,
            evaluation,
        )?;
        let gap = frontier_gap(&oos, &truth)?;
        gaps.push((n, gap));

        let data = DataGenerator::<f64>::draw(&nv.dgm, n, seed.derive(stream::TRAINING).derive(n as u64))?;
        let boot = bootstrap_frontier(&nv.model, &data, &phi, &grid, k, seed.derive(stream::BOOTSTRAP).derive(n as u64), &opts)?;
        art.frontier(format!("normalized_oos_n{n}"), normalize_frontier(&oos)?);
        art.frontier(format!("normalized_bootstrap_n{n}"), normalize_frontier(&boot)?);
        art.frontier(format!("oos_frontier_n{n}"), oos);
        art.frontier(format!("bootstrap_frontier_n{n}"), boot);
    }
    art.frontier("true_frontier", truth);
    art.table(
        "gap_vs_n",
        &["n", "gap"],
        gaps.iter().map(|&(n, g)| vec![n.to_string(), num(g)]).collect(),
    );
    let decreasing = gaps.windows(2).all(|w| w[1].1 < w[0].1);
    art.note("gaps", json!(gaps.iter().map(|&(n, g)| json!({"n": n, "gap": g})).collect::<Vec<_>>()));
    art.note("gap_decreasing", decreasing);
    Ok(art)
}

/// Bootstrap frontier on the training window, δ_α for each confidence level,
/// and out-of-sample frontiers on each test window.
fn portfolio(config: &Config, seed: RngSeed) -> CliResult<Artifacts> {
    let p = experiments::portfolio(config)?;
    let phi = experiments::phi(config)?;
    let opts = experiments::robust_options(config)?;
    let grid = experiments::delta_grid(config, &experiments::PORTFOLIO_GRID)?;
    let k: usize = config.parse_or("k", 50)?;
    let alphas: Vec<f64> = config.list_or("alphas", &[0.10, 0.05, 0.01])?;
    let radius = radius_estimator(config, seed)?;

    let mut art = Artifacts::default();
    let boot = bootstrap_frontier(&p.model, &p.train, &phi, &grid, k, seed.derive(stream::BOOTSTRAP), &opts)?;
    art.note("max_mean_delta", max_mean(&boot)?);
    art.frontier("bootstrap_frontier", boot);

    let mut rows = Vec::new();
    let mut deltas = Vec::new();
    for &alpha in &alphas {
        let delta = high_confidence_delta(&p.model, &p.train, &phi, alpha, radius, &opts)?;
        let q = radius_value(&p.train, &phi, alpha, radius)?;
        rows.push(vec![num(alpha), num(q), num(delta)]);
        deltas.push((alpha, delta));
    }
    art.table("delta_alpha", &["alpha", "radius", "delta"], rows);
    let mut by_alpha = deltas.clone();
    by_alpha.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = by_alpha.windows(2).all(|w| w[1].1 > w[0].1);
    art.note("delta_alpha", json!(deltas.iter().map(|&(a, d)| json!({"alpha": a, "delta": d})).collect::<Vec<_>>()));
    art.note("delta_alpha_increasing_in_confidence", monotone);

    let mut eval_grid: Vec<f64> = grid.iter().copied().chain(deltas.iter().map(|d| d.1)).collect();
    eval_grid.sort_by(f64::total_cmp);
    eval_grid.dedup();
    let mut windows = Vec::new();
    for (i, (label, test)) in p.tests.iter().enumerate() {
        let f = true_frontier(&p.model, &p.train, test, &phi, &eval_grid, &opts)?;
        windows.push(f.clone());
        let mut f = f;
        f.meta.extra.insert("test_window".into(), label.clone());
        art.frontier(format!("oos_window_{}", i + 1), f);
    }
    if !windows.is_empty() {
        let m = windows.len() as f64;
        let points = (0..eval_grid.len())
            .map(|i| FrontierPoint {
                delta: eval_grid[i],
                mu: windows.iter().map(|w| w.points()[i].mu).sum::<f64>() / m,
                sigma2: windows.iter().map(|w| w.points()[i].sigma2).sum::<f64>() / m,
                mu_sd: 0.0,
                sigma2_sd: 0.0,
            })
            .collect();
        let meta = windows[0].meta.clone();
        art.frontier("oos_average", Frontier::new(points, meta)?);
    }
    art.note("train_rows", p.train.len());
    art.note("assets", json!(p.table.assets));
    Ok(art)
}

pub fn radius_estimator(config: &Config, seed: RngSeed) -> CliResult<RadiusEstimator> {
    match config.string_or("radius", "bootstrap").as_str() {
        "bootstrap" => Ok(RadiusEstimator::Bootstrap {
            replicates: config.parse_or("radius_replicates", 1000)?,
            seed: seed.derive(stream::RADIUS),
        }),
        "chi_square" => Ok(RadiusEstimator::ChiSquare),
        other => Err(CliError::Config(format!("unknown radius estimator {other:?} (bootstrap, chi_square)"))),
    }
}

pub fn radius_value(
    data: &EmpiricalDistribution<f64>,
    phi: &robust_frontier::PhiDivergence<f64>,
    alpha: f64,
    radius: RadiusEstimator,
) -> CliResult<f64> {
    Ok(match radius {
        RadiusEstimator::Bootstrap { replicates, seed } => {
            robust_frontier::divergence_quantile(data.len(), phi, alpha, replicates, seed)?
        }
        RadiusEstimator::ChiSquare => robust_frontier::chi_square_radius(data.len(), phi, alpha)?,
    })
}

/// Bootstrap frontier on the training half and the test-half frontier.
fn logistic(config: &Config, seed: RngSeed) -> CliResult<Artifacts> {
    let l = experiments::logistic(config)?;
    let phi = experiments::phi(config)?;
    let opts = experiments::robust_options(config)?;
    let grid = experiments::delta_grid(config, &experiments::LOGISTIC_GRID)?;
    let k: usize = config.parse_or("k", 50)?;

    let mut art = Artifacts::default();
    let boot = bootstrap_frontier(&l.model, &l.train, &phi, &grid, k, seed.derive(stream::BOOTSTRAP), &opts)?;
    let test = true_frontier(&l.model, &l.train, &l.test, &phi, &grid, &opts)?;
    art.note("bootstrap_max_mean_delta", max_mean(&boot)?);
    art.note("test_max_mean_delta", max_mean(&test)?);
    let mle = robust_frontier::empirical_optimize(&l.model, &l.train, &opts.solver)?;
    art.note("mle", json!(mle));
    art.note("covariates", json!(l.covariates));
    art.note("train_rows", l.train.len());
    art.note("test_rows", l.test.len());
    art.frontier("bootstrap_frontier", boot);
    art.frontier("test_frontier", test);
    Ok(art)
}

/// Frontiers for the quadratic toy together with the predicted small-δ curves.
fn toy(config: &Config, seed: RngSeed) -> CliResult<Artifacts> {
    let dgm = experiments::toy_generator(config)?;
    let law = dgm.distribution();
    let model = QuadraticModel::new(1);
    let phi = experiments::phi(config)?;
    let opts = experiments::robust_options(config)?;
    let grid = experiments::delta_grid(config, &experiments::TOY_GRID)?;
    let n: usize = config.parse_or("n", 50)?;
    let repeats: usize = config.parse_or("K", 10_000)?;
    let k: usize = config.parse_or("k", 50)?;

    let mut art = Artifacts::default();
    let truth = true_frontier(&model, &law, &law, &phi, &grid, &opts)?;
    let oos = oos_frontier(
        &model,
        &dgm,
        n,
        repeats,
        &phi,
        &grid,
        seed.derive(stream::SIMULATION),
        &opts,
        OosEvaluation::Reference(&law),
    )?;
    let data = DataGenerator::<f64>::draw(&dgm, n, seed.derive(stream::TRAINING))?;
    let boot = bootstrap_frontier(&model, &data, &phi, &grid, k, seed.derive(stream::BOOTSTRAP), &opts)?;
    let summary = summarize(
        &model,
        &law,
        &phi,
        &AsymptoticOptions {
            solver: opts.solver,
            ..AsymptoticOptions::default()
        },
    )?;
    let curve = predicted_curves(&summary, n, &grid)?;
    art.table(
        "predicted",
        &["delta", "mean", "variance"],
        curve.iter().map(|c| vec![num(c.delta), num(c.mean), num(c.variance)]).collect(),
    );
    art.note(
        "asymptotics",
        json!({
            "x_star": summary.x_star,
            "pi": summary.pi,
            "xi0": summary.xi0.to_rows(),
            "eta0": summary.eta0,
            "kappa0": summary.kappa0,
            "rho": summary.rho,
            "theta": summary.theta,
            "mu_sigma_mu": summary.mu_sigma_mu,
        }),
    );
    art.note("gap", frontier_gap(&oos, &truth)?);
    art.frontier("true_frontier", truth);
    art.frontier("oos_frontier", oos);
    art.frontier("bootstrap_frontier", boot);
    Ok(art)
}
