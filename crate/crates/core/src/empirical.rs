//! Weighted samples, bootstrap resampling and sample-average optimization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DroError, Result};
use crate::linalg::Matrix;
use crate::optimize::{maximize, ConcaveObjective, Evaluation, Maximum, SolverOptions};
use crate::reward_models::RewardModel;
use crate::scalar::Scalar;

/// Outcome vectors `Yᵢ` with probability weights `pᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution<T> {
    samples: Vec<Vec<T>>,
    weights: Vec<T>,
    uniform: bool,
}

impl<T: Scalar> EmpiricalDistribution<T> {
    /// Equal weights `1/n`.
    pub fn uniform(samples: Vec<Vec<T>>) -> Result<Self> {
        check_samples(&samples)?;
        let w = T::one() / T::from_usize_lossy(samples.len());
        Ok(Self {
            weights: vec![w; samples.len()],
            samples,
            uniform: true,
        })
    }

    /// Weights must be nonnegative and sum to one within `1e-12` (scaled up
    /// to a few ulps per sample for low precision types).
    pub fn weighted(samples: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        check_samples(&samples)?;
        if weights.len() != samples.len() {
            return Err(DroError::InvalidArgument(format!(
                "{} weights for {} samples",
                weights.len(),
                samples.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(DroError::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let total: T = weights.iter().copied().sum();
        let slack = T::lit(1e-12).max(T::epsilon() * T::from_usize_lossy(4 * weights.len()));
        if (total - T::one()).abs() > slack {
            return Err(DroError::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        let first = weights[0];
        let uniform = weights.iter().all(|&w| w == first);
        Ok(Self {
            samples,
            weights,
            uniform,
        })
    }

    /// Uniform distribution over one dimensional outcomes.
    pub fn from_scalars(values: Vec<T>) -> Result<Self> {
        Self::uniform(values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Outcome dimension.
    pub fn outcome_dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<T>] {
        &self.samples
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Weighted mean outcome vector.
    pub fn mean_outcome(&self) -> Vec<T> {
        let mut mean = vec![T::zero(); self.outcome_dim()];
        for (y, &w) in self.samples.iter().zip(&self.weights) {
            for (m, &v) in mean.iter_mut().zip(y) {
                *m = *m + w * v;
            }
        }
        mean
    }

    /// Same weights, samples `values[i]` in place of the originals.
    pub fn with_samples(&self, samples: Vec<Vec<T>>) -> Result<Self> {
        if samples.len() != self.len() {
            return Err(DroError::InvalidArgument("sample count changed".into()));
        }
        check_samples(&samples)?;
        Ok(Self {
            samples,
            weights: self.weights.clone(),
            uniform: self.uniform,
        })
    }
}

fn check_samples<T: Scalar>(samples: &[Vec<T>]) -> Result<()> {
    let Some(first) = samples.first() else {
        return Err(DroError::InvalidArgument("empirical distribution needs at least one sample".into()));
    };
    let d = first.len();
    if samples.iter().any(|s| s.len() != d) {
        return Err(DroError::InvalidArgument("samples differ in length".into()));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(DroError::InvalidArgument("samples must be finite".into()));
    }
    Ok(())
}

/// Seed for every random stream in the crate. Streams are ChaCha8 generators
/// seeded with `seed_from_u64`; replicate `j` of a seeded experiment uses
/// [`RngSeed::derive`]`(j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Child seed for stream `index`: a SplitMix64 finalizer applied to the
    /// parent seed and the index.
    pub fn derive(self, index: u64) -> RngSeed {
        let mixed = splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C909)));
        RngSeed(mixed)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `n` samples with replacement: `n` calls of `random_range(0..n)` on
/// `seed.rng()`, in order. The result has uniform weights.
pub fn bootstrap_resample<T: Scalar>(
    dist: &EmpiricalDistribution<T>,
    seed: RngSeed,
) -> Result<EmpiricalDistribution<T>> {
    let n = dist.len();
    if n == 0 {
        return Err(DroError::InvalidArgument("cannot resample an empty distribution".into()));
    }
    if !dist.is_uniform() {
        return Err(DroError::InvalidArgument("bootstrap requires uniform weights".into()));
    }
    let mut rng = seed.rng();
    let samples = (0..n)
        .map(|_| dist.samples[rng.random_range(0..n)].clone())
        .collect();
    EmpiricalDistribution::uniform(samples)
}

/// `Σ pᵢ f(x, Yᵢ)` with derivatives.
pub(crate) struct EmpiricalObjective<'a, T: Scalar, M: RewardModel<T> + ?Sized> {
    pub model: &'a M,
    pub dist: &'a EmpiricalDistribution<T>,
}

impl<T: Scalar, M: RewardModel<T> + ?Sized> ConcaveObjective<T> for EmpiricalObjective<'_, T, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn evaluate(&self, x: &[T], with_hessian: bool) -> Result<Evaluation<T>> {
        let m = self.model.dim();
        let mut value = T::zero();
        let mut gradient = vec![T::zero(); m];
        let mut g = vec![T::zero(); m];
        let mut hessian = with_hessian.then(|| Matrix::zeros(m, m));
        let mut h = Matrix::zeros(m, m);
        for (y, &p) in self.dist.samples().iter().zip(self.dist.weights()) {
            if p == T::zero() {
                continue;
            }
            value = value + p * self.model.reward(x, y);
            self.model.gradient_into(x, y, &mut g);
            for (a, &b) in gradient.iter_mut().zip(&g) {
                *a = *a + p * b;
            }
            if let Some(acc) = hessian.as_mut() {
                self.model.hessian_into(x, y, &mut h);
                acc.add_scaled(p, &h);
            }
        }
        Ok(Evaluation {
            value,
            gradient,
            hessian,
        })
    }
}

pub(crate) fn check_model_dist<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
) -> Result<()> {
    model.feasible_set().check_dim(model.dim())?;
    if dist.is_empty() {
        return Err(DroError::InvalidArgument("empty distribution".into()));
    }
    Ok(())
}

pub(crate) fn empirical_maximum<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    opts: &SolverOptions<T>,
) -> Result<Maximum<T>> {
    check_model_dist(model, dist)?;
    if let Some(x) = model.exact_empirical_solution(dist) {
        let value = crate::reward_models::model_reward_stats(model, &x, dist).0;
        return Ok(Maximum {
            x,
            value,
            iterations: 0,
            stationarity: T::zero(),
        });
    }
    let obj = EmpiricalObjective { model, dist };
    maximize(&obj, model.feasible_set(), &model.initial_point(dist), opts)
}

/// Maximizer of `Σ pᵢ f(x, Yᵢ)` over the model's feasible set.
pub fn empirical_optimize<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    empirical_maximum(model, dist, opts).map(|m| m.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward_models::{ExpUtilityModel, LogisticModel, NewsvendorModel, QuadraticModel};

    #[test]
    fn weights_are_validated() {
        let s = vec![vec![0.0], vec![1.0]];
        assert!(EmpiricalDistribution::weighted(s.clone(), vec![0.5, 0.6]).is_err());
        assert!(EmpiricalDistribution::weighted(s.clone(), vec![1.5, -0.5]).is_err());
        assert!(EmpiricalDistribution::weighted(s.clone(), vec![1.0]).is_err());
        assert!(EmpiricalDistribution::weighted(s, vec![0.25, 0.75]).is_ok());
        assert!(EmpiricalDistribution::<f64>::uniform(vec![]).is_err());
        assert!(EmpiricalDistribution::uniform(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn resample_single_point_and_determinism() {
        let d = EmpiricalDistribution::from_scalars(vec![4.0]).unwrap();
        assert_eq!(bootstrap_resample(&d, RngSeed(9)).unwrap(), d);
        let d = EmpiricalDistribution::from_scalars(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let a = bootstrap_resample(&d, RngSeed(42)).unwrap();
        let b = bootstrap_resample(&d, RngSeed(42)).unwrap();
        assert_eq!(a, b);
        assert_ne!(RngSeed(42).derive(0), RngSeed(42).derive(1));
    }

    #[test]
    fn resample_mean_matches_clt_bound() {
        let d = EmpiricalDistribution::from_scalars(vec![0.0, 1.0]).unwrap();
        let reps = 10_000;
        let total: f64 = (0..reps)
            .map(|j| bootstrap_resample(&d, RngSeed(7).derive(j)).unwrap().mean_outcome()[0])
            .sum();
        let mean = total / reps as f64;
        assert!((mean - 0.5).abs() < 3.0 * 0.5 / (2.0 * reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn newsvendor_oracle_path() {
        let m = NewsvendorModel::new(30.0, 2.0, 0.0).unwrap();
        let d = EmpiricalDistribution::from_scalars((1..=10).map(f64::from).collect()).unwrap();
        assert_eq!(empirical_optimize(&m, &d, &SolverOptions::default()).unwrap(), vec![10.0]);
    }

    #[test]
    fn quadratic_toy_gives_sample_mean() {
        let m = QuadraticModel::<f64>::new(1);
        let d = EmpiricalDistribution::from_scalars(vec![0.0, 0.0, 3.0]).unwrap();
        let x = empirical_optimize(&m, &d, &SolverOptions::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budgeted_single_asset_is_forced() {
        let m = ExpUtilityModel::budgeted(1.0, 1).unwrap();
        let d = EmpiricalDistribution::from_scalars(vec![0.1, -0.2, 0.05]).unwrap();
        assert_eq!(empirical_optimize(&m, &d, &SolverOptions::default()).unwrap(), vec![1.0]);
    }

    #[test]
    fn balanced_intercept_only_logistic() {
        let m = LogisticModel::<f64>::new(0);
        let d = EmpiricalDistribution::uniform(vec![vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]]).unwrap();
        let x = empirical_optimize(&m, &d, &SolverOptions::default()).unwrap();
        assert!(x[0].abs() < 1e-12);
    }

    #[test]
    fn smoothed_newsvendor_near_critical_fractile() {
        let m = NewsvendorModel::new(30.0, 2.0, 1e-3).unwrap();
        let d = EmpiricalDistribution::from_scalars((1..=10).map(f64::from).collect()).unwrap();
        let x = empirical_optimize(&m, &d, &SolverOptions::default()).unwrap();
        assert!((x[0] - 10.0).abs() < 0.01, "{x:?}");
    }
}
