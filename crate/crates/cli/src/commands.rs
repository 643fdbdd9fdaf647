//! Subcommand implementations behind the binary.

use std::path::{Path, PathBuf};

use robust_frontier::{
    bootstrap_frontier, calibrate, oos_frontier, CalibrationProblem, CalibrationRule, OosEvaluation, RngSeed,
};
use serde_json::json;

use crate::config::{self, Config};
use crate::error::{CliError, CliResult};
use crate::experiments::{self, stream, ExperimentKind};
use crate::output::Artifacts;
use crate::suites;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    FrontierBootstrap,
    FrontierOos,
    Calibrate,
    RunSuite(ExperimentKind),
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::FrontierBootstrap => "frontier-bootstrap".into(),
            Command::FrontierOos => "frontier-oos".into(),
            Command::Calibrate => "calibrate".into(),
            Command::RunSuite(kind) => format!("run-suite {}", kind.name()),
        }
    }
}

/// Options shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub overrides: Vec<String>,
}

/// Loads the configuration (file, then `--set` overrides, then `--seed`).
pub fn load_config(inv: &Invocation) -> CliResult<(Config, RngSeed)> {
    let mut config = match &inv.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for o in &inv.overrides {
        config.apply_override(o)?;
    }
    if let Some(s) = inv.seed {
        config.set("seed", s);
    }
    let seed = RngSeed(config.parse_or("seed", 1u64)?);
    Ok((config, seed))
}

/// Runs `command` and writes its artifacts under `inv.out`.
pub fn execute(command: &Command, inv: &Invocation) -> CliResult<Vec<PathBuf>> {
    let (config, seed) = load_config(inv)?;
    let art = run(command, &config, seed)?;
    art.write(&inv.out, &command.name(), &config)
}

pub fn run(command: &Command, config: &Config, seed: RngSeed) -> CliResult<Artifacts> {
    match command {
        Command::FrontierBootstrap => frontier_bootstrap(config, seed),
        Command::FrontierOos => frontier_oos(config, seed),
        Command::Calibrate => calibrate_command(config, seed),
        Command::RunSuite(kind) => {
            if let Some(e) = config.get("experiment") {
                if ExperimentKind::parse(&e)? != *kind {
                    return Err(CliError::Config(format!(
                        "config is for experiment {e:?} but the suite is {}",
                        kind.name()
                    )));
                }
            }
            suites::run_suite(*kind, config, seed)
        }
    }
}

fn frontier_bootstrap(config: &Config, seed: RngSeed) -> CliResult<Artifacts> {
    let kind = ExperimentKind::from_config(config)?;
    let problem = experiments::problem(kind, config, seed)?;
    let phi = experiments::phi(config)?;
    let opts = experiments::robust_options(config)?;
    let grid = experiments::delta_grid(config, &problem.default_grid)?;
    let k: usize = config.parse_or("k", 50)?;
    let f = bootstrap_frontier(
        problem.model.as_ref(),
        &problem.data,
        &phi,
        &grid,
        k,
        seed.derive(stream::BOOTSTRAP),
        &opts,
    )?;
    let mut art = Artifacts::default();
    art.note("dropped_replicates", f.meta.dropped);
    art.frontier("bootstrap_frontier", f);
    Ok(art)
}

fn frontier_oos(config: &Config, seed: RngSeed) -> CliResult<Artifacts> {
    let kind = ExperimentKind::from_config(config)?;
    let phi = experiments::phi(config)?;
    let opts = experiments::robust_options(config)?;
    let n: usize = config.parse_or("n", 50)?;
    let repeats: usize = config.parse_or("K", 10_000)?;
    let fresh = match config.string_or("evaluation", "reference").as_str() {
        "reference" => false,
        "fresh_draw" => true,
        other => return Err(CliError::Config(format!("unknown evaluation {other:?} (reference, fresh_draw)"))),
    };
    let sim_seed = seed.derive(stream::SIMULATION).derive(n as u64);
    let f = match kind {
        ExperimentKind::Newsvendor => {
            let nv = experiments::newsvendor(config)?;
            let grid = experiments::delta_grid(config, &experiments::NEWSVENDOR_GRID)?;
            let reference_n: usize = config.parse_or("reference_sample", 20_000)?;
            let reference = robust_frontier::DataGenerator::<f64>::draw(&nv.dgm, reference_n, seed.derive(stream::REFERENCE))?;
            let eval = if fresh { OosEvaluation::FreshDraw } else { OosEvaluation::Reference(&reference) };
            oos_frontier(&nv.model, &nv.dgm, n, repeats, &phi, &grid, sim_seed, &opts, eval)?
        }
        ExperimentKind::Toy => {
            let dgm = experiments::toy_generator(config)?;
            let law = dgm.distribution();
            let grid = experiments::delta_grid(config, &experiments::TOY_GRID)?;
            let eval = if fresh { OosEvaluation::FreshDraw } else { OosEvaluation::Reference(&law) };
            oos_frontier(&robust_frontier::QuadraticModel::new(1), &dgm, n, repeats, &phi, &grid, sim_seed, &opts, eval)?
        }
        other => {
            return Err(CliError::Config(format!(
                "experiment {} has no data-generating model; frontier-oos needs newsvendor or toy",
                other.name()
            )))
        }
    };
    let mut art = Artifacts::default();
    art.frontier("oos_frontier", f);
    Ok(art)
}

/// `rule = max_mean | tradeoff | satisficing | high_confidence`.
fn calibrate_command(config: &Config, seed: RngSeed) -> CliResult<Artifacts> {
    let kind = ExperimentKind::from_config(config)?;
    let problem = experiments::problem(kind, config, seed)?;
    let phi = experiments::phi(config)?;
    let opts = experiments::robust_options(config)?;
    let grid = experiments::delta_grid(config, &problem.default_grid)?;
    let rule_name = config.string_or("rule", "max_mean");
    let rule = match rule_name.as_str() {
        "max_mean" => CalibrationRule::MaxMean,
        "tradeoff" => CalibrationRule::MeanVarTradeoff(config.parse_or("lambda", 1.0)?),
        "satisficing" => CalibrationRule::Satisficing(config::parse_value("target", &config.require("target")?)?),
        "high_confidence" => CalibrationRule::HighConfidence {
            alpha: config.parse_or("alpha", 0.05)?,
            radius: suites::radius_estimator(config, seed)?,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown rule {other:?} (max_mean, tradeoff, satisficing, high_confidence)"
            )))
        }
    };
    let mut art = Artifacts::default();
    let frontier = match (&rule, config.get("frontier_path")) {
        (_, Some(path)) => robust_frontier::Frontier::read(Path::new(&path))?,
        (CalibrationRule::HighConfidence { .. } | CalibrationRule::Satisficing(_), None) => {
            // Only the grid is used; skip the bootstrap.
            let points = grid
                .iter()
                .map(|&delta| robust_frontier::FrontierPoint {
                    delta,
                    mu: 0.0,
                    sigma2: 0.0,
                    mu_sd: 0.0,
                    sigma2_sd: 0.0,
                })
                .collect();
            robust_frontier::Frontier::new(
                points,
                robust_frontier::FrontierMeta::new(robust_frontier::FrontierMethod::Bootstrap, 0, problem.data.len()),
            )?
        }
        (_, None) => {
            let k: usize = config.parse_or("k", 50)?;
            let f = bootstrap_frontier(
                problem.model.as_ref(),
                &problem.data,
                &phi,
                &grid,
                k,
                seed.derive(stream::BOOTSTRAP),
                &opts,
            )?;
            art.frontier("bootstrap_frontier", f.clone());
            f
        }
    };
    let ctx = CalibrationProblem {
        model: problem.model.as_ref(),
        dist: &problem.data,
        phi: &phi,
        opts,
    };
    let delta = calibrate(&frontier, rule, Some(&ctx))?;
    art.note("rule", rule_name);
    art.note("delta", delta);
    art.note("calibration", json!({ "delta": delta }));
    Ok(art)
}
