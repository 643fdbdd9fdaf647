//! Builds models, data and solver settings from a configuration.

use std::path::PathBuf;

use robust_frontier::{
    DataGenerator, DiscreteGenerator, EmpiricalDistribution, ExpUtilityModel, ExponentialMixture, FeasibleSet,
    LogisticModel, NewsvendorModel, PhiDivergence, QuadraticModel, RewardModel, RngSeed, RobustOptions,
    SolverOptions,
};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest_csv, ColumnRef, IngestOptions, LabeledTable, ReturnsTable, Schema, Table};

/// Independent random streams of one run, all derived from the run seed.
pub mod stream {
    pub const BOOTSTRAP: u64 = 1;
    pub const SIMULATION: u64 = 2;
    pub const TRUE_SAMPLE: u64 = 3;
    pub const REFERENCE: u64 = 4;
    pub const TRAINING: u64 = 5;
    pub const RADIUS: u64 = 6;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Newsvendor,
    Portfolio,
    Logistic,
    Toy,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "newsvendor" => Ok(Self::Newsvendor),
            "portfolio" => Ok(Self::Portfolio),
            "logistic" => Ok(Self::Logistic),
            "toy" => Ok(Self::Toy),
            other => Err(CliError::Config(format!(
                "unknown experiment {other:?} (newsvendor, portfolio, logistic, toy)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Newsvendor => "newsvendor",
            Self::Portfolio => "portfolio",
            Self::Logistic => "logistic",
            Self::Toy => "toy",
        }
    }

    pub fn from_config(config: &Config) -> CliResult<Self> {
        Self::parse(&config.require("experiment")?)
    }
}

pub fn phi(config: &Config) -> CliResult<PhiDivergence<f64>> {
    match config.string_or("phi", "relative-entropy").as_str() {
        "relative-entropy" | "kl" => Ok(PhiDivergence::relative_entropy()),
        "modified-chi-square" | "chi2" => Ok(PhiDivergence::modified_chi_square()),
        other => Err(CliError::Config(format!(
            "unknown divergence {other:?} (relative-entropy, modified-chi-square)"
        ))),
    }
}

pub fn robust_options(config: &Config) -> CliResult<RobustOptions<f64>> {
    let defaults = SolverOptions::<f64>::default();
    Ok(RobustOptions {
        solver: SolverOptions {
            tolerance: config.parse_or("tolerance", defaults.tolerance)?,
            max_iterations: config.parse_or("max_iterations", defaults.max_iterations)?,
        },
        ..RobustOptions::default()
    })
}

pub fn delta_grid(config: &Config, default: &[f64]) -> CliResult<Vec<f64>> {
    config.list_or("delta_grid", default)
}

pub const NEWSVENDOR_GRID: [f64; 8] = [0.0, 1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2];
pub const PORTFOLIO_GRID: [f64; 9] = [0.0, 1.0, 2.0, 3.0, 5.0, 10.0, 55.0, 58.0, 63.0];
pub const LOGISTIC_GRID: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0, 1.5, 2.0];
pub const TOY_GRID: [f64; 6] = [0.0, 0.0025, 0.005, 0.01, 0.02, 0.04];

pub struct Newsvendor {
    pub model: NewsvendorModel<f64>,
    pub dgm: ExponentialMixture,
}

pub fn newsvendor(config: &Config) -> CliResult<Newsvendor> {
    let low_mean: f64 = config.parse_or("low_mean", 10.0)?;
    let high_mean: f64 = config.parse_or("high_mean", 100.0)?;
    let low_prob: f64 = config.parse_or("low_prob", 0.7)?;
    let dgm = ExponentialMixture::two_regime(low_mean, high_mean, low_prob)?;
    let mean_demand = low_prob * low_mean + (1.0 - low_prob) * high_mean;
    let model = NewsvendorModel::new(
        config.parse_or("revenue", 30.0)?,
        config.parse_or("cost", 2.0)?,
        config.parse_or("smoothing", 1e-3 * mean_demand)?,
    )?;
    Ok(Newsvendor { model, dgm })
}

pub fn toy_generator(config: &Config) -> CliResult<DiscreteGenerator<f64>> {
    let support: Vec<f64> = config.list_or("support", &[0.0, 0.0, 3.0])?;
    Ok(DiscreteGenerator::new(support.into_iter().map(|y| vec![y]).collect())?)
}

pub struct Portfolio {
    pub model: ExpUtilityModel<f64>,
    pub table: ReturnsTable,
    pub train: EmpiricalDistribution<f64>,
    /// `(label, returns)` per configured test window.
    pub tests: Vec<(String, EmpiricalDistribution<f64>)>,
}

pub fn portfolio(config: &Config) -> CliResult<Portfolio> {
    let path = PathBuf::from(config.string_or("returns_path", "data/synthetic_10_industry.csv"));
    let columns = config.get("columns").map(|c| ColumnRef::parse_list(&c)).transpose()?;
    let opts = IngestOptions {
        columns,
        percent_to_decimal: config.parse_or("percent_to_decimal", false)?,
    };
    let Table::Returns(table) = ingest_csv(&path, &Schema::Returns, &opts)? else {
        unreachable!("returns schema yields a returns table")
    };
    let d = table.assets.len();
    let feasible = FeasibleSet::box_budget(
        vec![config.parse_or("lower", -1.0)?; d],
        vec![config.parse_or("upper", 1.0)?; d],
        config.parse_or("budget", 1.0)?,
    )?;
    let model = ExpUtilityModel::with_feasible(config.parse_or("gamma", 1.0)?, d, feasible)?;
    let train_rows = table.window(
        &config.string_or("train_start", "196804"),
        &config.string_or("train_end", "197206"),
    )?;
    let train = EmpiricalDistribution::uniform(train_rows)?;
    let windows = config.string_or("test_windows", "197207:197609,197610:198012,198101:198503");
    let mut tests = Vec::new();
    for w in windows.split(',').map(str::trim).filter(|w| !w.is_empty()) {
        let (a, b) = w
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("test window {w:?} is not start:end")))?;
        tests.push((w.replace(':', "-"), EmpiricalDistribution::uniform(table.window(a.trim(), b.trim())?)?));
    }
    Ok(Portfolio {
        model,
        table,
        train,
        tests,
    })
}

pub struct Logistic {
    pub model: LogisticModel<f64>,
    pub covariates: Vec<String>,
    pub train: EmpiricalDistribution<f64>,
    pub test: EmpiricalDistribution<f64>,
}

pub fn logistic(config: &Config) -> CliResult<Logistic> {
    let path = PathBuf::from(config.string_or("data_path", "data/wdbc.csv"));
    let non_empty = |s: String| (!s.is_empty()).then_some(s);
    let schema = Schema::Labeled {
        label_column: config.string_or("label_column", "diagnosis"),
        positive_label: non_empty(config.string_or("positive_label", "M")),
        id_column: non_empty(config.string_or("id_column", "id")),
    };
    let opts = IngestOptions {
        columns: Some(ColumnRef::parse_list(&config.string_or("covariates", "2,24,25"))?),
        percent_to_decimal: false,
    };
    let Table::Labeled(mut table) = ingest_csv(&path, &schema, &opts)? else {
        unreachable!("labeled schema yields a labeled table")
    };
    let n_train = table.rows.len().div_ceil(2);
    if n_train == 0 || n_train == table.rows.len() {
        return Err(CliError::Data("need at least two rows to split into train and test halves".into()));
    }
    let train_labels = &table.labels[..n_train];
    if train_labels.iter().all(|&y| y == train_labels[0]) {
        return Err(CliError::Data("training half contains a single class".into()));
    }
    if config.parse_or("standardize", true)? {
        standardize(&mut table, n_train)?;
    }
    let outcomes = table.outcomes();
    let (train, test) = outcomes.split_at(n_train);
    Ok(Logistic {
        model: LogisticModel::new(table.covariates.len()),
        covariates: table.covariates.clone(),
        train: EmpiricalDistribution::uniform(train.to_vec())?,
        test: EmpiricalDistribution::uniform(test.to_vec())?,
    })
}

/// Centers and scales each covariate by its training-half mean and sample
/// standard deviation.
fn standardize(table: &mut LabeledTable, n_train: usize) -> CliResult<()> {
    for j in 0..table.covariates.len() {
        let train = table.rows[..n_train].iter().map(|r| r[j]);
        let mean = train.clone().sum::<f64>() / n_train as f64;
        let var = train.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n_train as f64 - 1.0).max(1.0);
        if !(var > 0.0) {
            return Err(CliError::Data(format!(
                "covariate {:?} is constant on the training half",
                table.covariates[j]
            )));
        }
        let sd = var.sqrt();
        for row in &mut table.rows {
            row[j] = (row[j] - mean) / sd;
        }
    }
    Ok(())
}

/// Model and data set a bootstrap frontier or calibration runs on.
pub struct Problem {
    pub model: Box<dyn RewardModel<f64>>,
    pub data: EmpiricalDistribution<f64>,
    pub default_grid: Vec<f64>,
}

pub fn problem(kind: ExperimentKind, config: &Config, seed: RngSeed) -> CliResult<Problem> {
    Ok(match kind {
        ExperimentKind::Newsvendor => {
            let nv = newsvendor(config)?;
            let n: usize = config.parse_or("n", 50)?;
            let data = DataGenerator::<f64>::draw(&nv.dgm, n, seed.derive(stream::TRAINING).derive(n as u64))?;
            Problem {
                model: Box::new(nv.model),
                data,
                default_grid: NEWSVENDOR_GRID.to_vec(),
            }
        }
        ExperimentKind::Portfolio => {
            let p = portfolio(config)?;
            Problem {
                model: Box::new(p.model),
                data: p.train,
                default_grid: PORTFOLIO_GRID.to_vec(),
            }
        }
        ExperimentKind::Logistic => {
            let l = logistic(config)?;
            Problem {
                model: Box::new(l.model),
                data: l.train,
                default_grid: LOGISTIC_GRID.to_vec(),
            }
        }
        ExperimentKind::Toy => Problem {
            model: Box::new(QuadraticModel::new(1)),
            data: toy_generator(config)?.distribution(),
            default_grid: TOY_GRID.to_vec(),
        },
    })
}
