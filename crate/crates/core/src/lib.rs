//! Penalty-form distributionally robust optimization over φ-divergence
//! neighbourhoods of an empirical distribution, the small-δ expansions of the
//! robust solution's out-of-sample behaviour, and bootstrap estimation of the
//! robust mean-variance frontier used to pick δ.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `…64`
//! aliases fix the usual choice.

pub mod asymptotics;
pub mod calibration;
pub mod divergence;
pub mod empirical;
pub mod error;
pub mod feasible;
pub mod frontier;
pub mod linalg;
pub mod optimize;
pub mod reward_models;
pub mod robust_solver;
pub mod scalar;

pub use asymptotics::{
    predicted_curves, sandwich_covariance, summarize, variance_gradient, variance_hessian, AsymptoticOptions,
    AsymptoticSummary, CurvePoint,
};
pub use calibration::{
    calibrate, chi_square_radius, divergence_quantile, high_confidence_delta, satisficing_delta, CalibrationProblem,
    CalibrationRule, RadiusEstimator,
};
pub use divergence::{DivergenceKind, PhiDivergence, PhiFunctions};
pub use empirical::{bootstrap_resample, empirical_optimize, EmpiricalDistribution, RngSeed};
pub use error::{DroError, Result};
pub use feasible::FeasibleSet;
pub use frontier::{
    bootstrap_frontier, frontier_gap, normalize_frontier, oos_frontier, true_frontier, DataGenerator,
    DiscreteGenerator, ExponentialMixture, Frontier, FrontierMeta, FrontierMethod, FrontierPoint, OosEvaluation,
};
pub use linalg::Matrix;
pub use optimize::SolverOptions;
pub use reward_models::{
    model_reward_stats, smoothed_min, ExpUtilityModel, LogisticModel, NewsvendorModel, QuadraticModel,
    RewardModel,
};
pub use robust_solver::{
    foc_residual, robust_optimize, worst_case, worst_case_with, DualPath, RobustOptions, RobustSolution,
    WorstCase,
};
pub use scalar::Scalar;

pub type PhiDivergence64 = PhiDivergence<f64>;
pub type EmpiricalDistribution64 = EmpiricalDistribution<f64>;
pub type RobustSolution64 = RobustSolution<f64>;
pub type Matrix64 = Matrix<f64>;
pub type Frontier64 = Frontier<f64>;
