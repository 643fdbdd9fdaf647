//! Reward functions `f(x, Y)` to be maximized, with analytic derivatives.

use crate::empirical::EmpiricalDistribution;
use crate::feasible::FeasibleSet;
use crate::linalg::Matrix;
use crate::scalar::{dot, Scalar};

/// A reward `f(x, y)`, concave in the decision `x`.
///
/// Outcomes `y` are plain slices whose layout is model specific; see each
/// model's docs.
pub trait RewardModel<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    /// Decision dimension.
    fn dim(&self) -> usize;

    fn reward(&self, x: &[T], y: &[T]) -> T;

    /// Writes `∇ₓf(x, y)` into `out`.
    fn gradient_into(&self, x: &[T], y: &[T], out: &mut [T]);

    /// Writes `∇ₓ²f(x, y)` into `out`, overwriting it.
    fn hessian_into(&self, x: &[T], y: &[T], out: &mut Matrix<T>);

    fn feasible_set(&self) -> &FeasibleSet<T>;

    /// Starting point for the optimizers. Need not be feasible.
    fn initial_point(&self, dist: &EmpiricalDistribution<T>) -> Vec<T> {
        let _ = dist;
        vec![T::zero(); self.dim()]
    }

    /// False when the reward has kinks, in which case the robust solver and
    /// the asymptotics refuse to run.
    fn is_smooth(&self) -> bool {
        true
    }

    /// Exact maximizer of the empirical reward, for models where one is
    /// known in closed form and the iterative solver is inappropriate.
    fn exact_empirical_solution(&self, dist: &EmpiricalDistribution<T>) -> Option<Vec<T>> {
        let _ = dist;
        None
    }

    fn gradient(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); self.dim()];
        self.gradient_into(x, y, &mut g);
        g
    }

    fn hessian(&self, x: &[T], y: &[T]) -> Matrix<T> {
        let m = self.dim();
        let mut h = Matrix::zeros(m, m);
        self.hessian_into(x, y, &mut h);
        h
    }
}

/// Weighted mean and variance of `f(x, ·)` under `dist`.
pub fn model_reward_stats<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    x: &[T],
    dist: &EmpiricalDistribution<T>,
) -> (T, T) {
    let f: Vec<T> = dist.samples().iter().map(|y| model.reward(x, y)).collect();
    weighted_mean_var(&f, dist.weights())
}

pub(crate) fn weighted_mean_var<T: Scalar>(values: &[T], weights: &[T]) -> (T, T) {
    let mean: T = values.iter().zip(weights).map(|(&v, &w)| w * v).sum();
    let var: T = values
        .iter()
        .zip(weights)
        .map(|(&v, &w)| w * (v - mean) * (v - mean))
        .sum();
    (mean, var)
}

/// `min(x, y)` for `eps = 0`, otherwise the soft minimum
/// `−eps·ln(exp(−x/eps) + exp(−y/eps))`, which lies within `eps·ln 2` below it.
pub fn smoothed_min<T: Scalar>(x: T, y: T, eps: T) -> T {
    if eps <= T::zero() {
        return x.min(y);
    }
    x.min(y) - eps * (-(x - y).abs() / eps).exp().ln_1p()
}

fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + exp(t))` without overflow.
fn softplus<T: Scalar>(t: T) -> T {
    if t > T::zero() {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `f(x) = −½‖x − y‖²`. Outcome layout: `y ∈ ℝᵐ`.
#[derive(Clone, Debug)]
pub struct QuadraticModel<T> {
    dim: usize,
    feasible: FeasibleSet<T>,
}

impl<T: Scalar> QuadraticModel<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            feasible: FeasibleSet::Unconstrained,
        }
    }
}

impl<T: Scalar> RewardModel<T> for QuadraticModel<T> {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn reward(&self, x: &[T], y: &[T]) -> T {
        let s: T = x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum();
        -s / T::lit(2.0)
    }

    fn gradient_into(&self, x: &[T], y: &[T], out: &mut [T]) {
        for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
            *o = b - a;
        }
    }

    fn hessian_into(&self, _x: &[T], _y: &[T], out: &mut Matrix<T>) {
        out.fill(T::zero());
        for i in 0..self.dim {
            out[(i, i)] = -T::one();
        }
    }

    fn feasible_set(&self) -> &FeasibleSet<T> {
        &self.feasible
    }

    fn initial_point(&self, dist: &EmpiricalDistribution<T>) -> Vec<T> {
        dist.mean_outcome()
    }
}

/// Newsvendor profit `r·min(x, y) − c·x` for order quantity `x` and demand `y`
/// (outcome layout `[demand]`), with the minimum optionally softened.
#[derive(Clone, Debug)]
pub struct NewsvendorModel<T> {
    revenue: T,
    cost: T,
    smoothing: T,
    feasible: FeasibleSet<T>,
}

impl<T: Scalar> NewsvendorModel<T> {
    /// Requires `revenue > cost > 0` and `smoothing ≥ 0`.
    pub fn new(revenue: T, cost: T, smoothing: T) -> crate::Result<Self> {
        if !(revenue > cost && cost > T::zero()) {
            return Err(crate::DroError::InvalidArgument(format!(
                "newsvendor needs r > c > 0, got r={revenue}, c={cost}"
            )));
        }
        if !(smoothing >= T::zero()) || !smoothing.is_finite() {
            return Err(crate::DroError::InvalidArgument(format!(
                "smoothing must be finite and nonnegative, got {smoothing}"
            )));
        }
        Ok(Self {
            revenue,
            cost,
            smoothing,
            feasible: FeasibleSet::Unconstrained,
        })
    }

    /// Smoothing of `1e-3 ×` the given demand scale.
    pub fn with_demand_scale(revenue: T, cost: T, demand_scale: T) -> crate::Result<Self> {
        Self::new(revenue, cost, T::lit(1e-3) * demand_scale.abs())
    }

    pub fn revenue(&self) -> T {
        self.revenue
    }

    pub fn cost(&self) -> T {
        self.cost
    }

    pub fn smoothing(&self) -> T {
        self.smoothing
    }

    /// `(r − c)/r`.
    pub fn critical_fractile(&self) -> T {
        (self.revenue - self.cost) / self.revenue
    }

    /// Maximizer of the unsmoothed empirical profit: the smallest order
    /// statistic whose cumulative weight exceeds the critical fractile. When
    /// some cumulative weight equals the fractile the objective is flat
    /// between two order statistics and the right one is returned.
    pub fn critical_fractile_solution(&self, dist: &EmpiricalDistribution<T>) -> T {
        let mut pairs: Vec<(T, T)> = dist
            .samples()
            .iter()
            .zip(dist.weights())
            .map(|(y, &w)| (y[0], w))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let target = self.critical_fractile();
        let slack = T::lit(1e-12).max(T::epsilon() * T::from_usize_lossy(pairs.len()));
        let mut cum = T::zero();
        for &(y, w) in &pairs {
            cum = cum + w;
            if cum > target + slack {
                return y;
            }
        }
        pairs.last().map(|p| p.0).unwrap_or_else(T::zero)
    }

    fn weight(&self, x: T, y: T) -> T {
        // ∂/∂x of the soft minimum.
        if self.smoothing > T::zero() {
            sigmoid((y - x) / self.smoothing)
        } else if x < y {
            T::one()
        } else if x > y {
            T::zero()
        } else {
            T::lit(0.5)
        }
    }
}

impl<T: Scalar> RewardModel<T> for NewsvendorModel<T> {
    fn name(&self) -> &str {
        "newsvendor"
    }

    fn dim(&self) -> usize {
        1
    }

    fn reward(&self, x: &[T], y: &[T]) -> T {
        self.revenue * smoothed_min(x[0], y[0], self.smoothing) - self.cost * x[0]
    }

    fn gradient_into(&self, x: &[T], y: &[T], out: &mut [T]) {
        out[0] = self.revenue * self.weight(x[0], y[0]) - self.cost;
    }

    fn hessian_into(&self, x: &[T], y: &[T], out: &mut Matrix<T>) {
        out[(0, 0)] = if self.smoothing > T::zero() {
            let w = self.weight(x[0], y[0]);
            -self.revenue * w * (T::one() - w) / self.smoothing
        } else {
            T::zero()
        };
    }

    fn feasible_set(&self) -> &FeasibleSet<T> {
        &self.feasible
    }

    fn initial_point(&self, dist: &EmpiricalDistribution<T>) -> Vec<T> {
        dist.mean_outcome()
    }

    fn is_smooth(&self) -> bool {
        self.smoothing > T::zero()
    }

    fn exact_empirical_solution(&self, dist: &EmpiricalDistribution<T>) -> Option<Vec<T>> {
        (!self.is_smooth()).then(|| vec![self.critical_fractile_solution(dist)])
    }
}

/// Exponential utility `−exp(−γ·Rᵀx)` of portfolio weights `x` given asset
/// returns `R` (outcome layout `[R₁, …, R_d]`).
#[derive(Clone, Debug)]
pub struct ExpUtilityModel<T> {
    gamma: T,
    dim: usize,
    feasible: FeasibleSet<T>,
}

impl<T: Scalar> ExpUtilityModel<T> {
    pub fn unconstrained(gamma: T, dim: usize) -> crate::Result<Self> {
        Self::with_feasible(gamma, dim, FeasibleSet::Unconstrained)
    }

    /// `1ᵀx = 1` and `−1 ≤ xᵢ ≤ 1`.
    pub fn budgeted(gamma: T, dim: usize) -> crate::Result<Self> {
        let set = FeasibleSet::box_budget(vec![-T::one(); dim], vec![T::one(); dim], T::one())?;
        Self::with_feasible(gamma, dim, set)
    }

    pub fn with_feasible(gamma: T, dim: usize, feasible: FeasibleSet<T>) -> crate::Result<Self> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(crate::DroError::InvalidArgument(format!(
                "risk aversion must be positive, got {gamma}"
            )));
        }
        if dim == 0 {
            return Err(crate::DroError::InvalidArgument("portfolio needs at least one asset".into()));
        }
        feasible.check_dim(dim)?;
        Ok(Self {
            gamma,
            dim,
            feasible,
        })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    fn tilt(&self, x: &[T], y: &[T]) -> T {
        (-self.gamma * dot(x, y)).exp()
    }
}

impl<T: Scalar> RewardModel<T> for ExpUtilityModel<T> {
    fn name(&self) -> &str {
        "exp-utility"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn reward(&self, x: &[T], y: &[T]) -> T {
        -self.tilt(x, y)
    }

    fn gradient_into(&self, x: &[T], y: &[T], out: &mut [T]) {
        let s = self.gamma * self.tilt(x, y);
        for (o, &r) in out.iter_mut().zip(y) {
            *o = s * r;
        }
    }

    fn hessian_into(&self, x: &[T], y: &[T], out: &mut Matrix<T>) {
        out.fill(T::zero());
        out.add_outer(-self.gamma * self.gamma * self.tilt(x, y), y, y);
    }

    fn feasible_set(&self) -> &FeasibleSet<T> {
        &self.feasible
    }

    fn initial_point(&self, _dist: &EmpiricalDistribution<T>) -> Vec<T> {
        match &self.feasible {
            FeasibleSet::Unconstrained => vec![T::zero(); self.dim],
            FeasibleSet::BoxBudget { budget, .. } => {
                vec![*budget / T::from_usize_lossy(self.dim); self.dim]
            }
        }
    }
}

/// Logistic log-likelihood `−ln(1 + exp(−y·(βᵀz + β₀)))`.
///
/// Outcome layout `[y, z₁, …, z_d]` with label `y ∈ {−1, +1}`; decision layout
/// `[β₁, …, β_d, β₀]`.
#[derive(Clone, Debug)]
pub struct LogisticModel<T> {
    covariates: usize,
    feasible: FeasibleSet<T>,
}

impl<T: Scalar> LogisticModel<T> {
    pub fn new(covariates: usize) -> Self {
        Self {
            covariates,
            feasible: FeasibleSet::Unconstrained,
        }
    }

    pub fn covariates(&self) -> usize {
        self.covariates
    }

    /// Signed margin `y·(βᵀz + β₀)`.
    pub fn margin(&self, x: &[T], y: &[T]) -> T {
        let d = self.covariates;
        let score = dot(&x[..d], &y[1..=d]) + x[d];
        y[0] * score
    }

    fn feature(&self, y: &[T], i: usize) -> T {
        if i < self.covariates {
            y[i + 1]
        } else {
            T::one()
        }
    }
}

impl<T: Scalar> RewardModel<T> for LogisticModel<T> {
    fn name(&self) -> &str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.covariates + 1
    }

    fn reward(&self, x: &[T], y: &[T]) -> T {
        -softplus(-self.margin(x, y))
    }

    fn gradient_into(&self, x: &[T], y: &[T], out: &mut [T]) {
        let s = sigmoid(-self.margin(x, y)) * y[0];
        for (i, o) in out.iter_mut().enumerate() {
            *o = s * self.feature(y, i);
        }
    }

    fn hessian_into(&self, x: &[T], y: &[T], out: &mut Matrix<T>) {
        let m = self.margin(x, y);
        let w = -sigmoid(m) * sigmoid(-m);
        let dim = self.dim();
        for i in 0..dim {
            let zi = self.feature(y, i);
            for j in 0..dim {
                out[(i, j)] = w * (zi * self.feature(y, j));
            }
        }
    }

    fn feasible_set(&self) -> &FeasibleSet<T> {
        &self.feasible
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothed_min_examples() {
        assert_eq!(smoothed_min(3.0, 5.0, 0.0), 3.0);
        let a = 1.7;
        assert!((smoothed_min(a, a, 0.2) - (a - 0.2 * 2f64.ln())).abs() < 1e-15);
        let v = smoothed_min(0.0, 1.0, 0.1);
        assert!((v - (-0.1 * (-10f64).exp().ln_1p())).abs() < 1e-18);
        assert!((v + 4.54e-6).abs() < 1e-8);
    }

    #[test]
    fn smoothing_error_is_bounded() {
        let model = NewsvendorModel::new(30.0, 2.0, 0.05).unwrap();
        let exact = NewsvendorModel::new(30.0, 2.0, 0.0).unwrap();
        for k in 0..200 {
            let x = [k as f64 * 0.05];
            let y = [3.0];
            let gap = (model.reward(&x, &y) - exact.reward(&x, &y)).abs();
            assert!(gap <= 0.05 * 30.0 * 2f64.ln() + 1e-12);
        }
    }

    #[test]
    fn newsvendor_stats() {
        let m = NewsvendorModel::new(30.0, 2.0, 0.0).unwrap();
        let d = EmpiricalDistribution::from_scalars(vec![1.0, 3.0]).unwrap();
        assert_eq!(model_reward_stats(&m, &[0.0], &d), (0.0, 0.0));
        assert_eq!(model_reward_stats(&m, &[2.0], &d), (41.0, 225.0));
    }

    #[test]
    fn critical_fractile_picks_right_endpoint() {
        let m = NewsvendorModel::new(30.0, 2.0, 0.0).unwrap();
        let d = EmpiricalDistribution::from_scalars((1..=10).map(f64::from).collect()).unwrap();
        assert_eq!(m.critical_fractile_solution(&d), 10.0);
        // fractile 1/2 with two equally likely demands: flat on [1, 2]
        let m = NewsvendorModel::new(2.0, 1.0, 0.0).unwrap();
        let d = EmpiricalDistribution::from_scalars(vec![2.0, 1.0]).unwrap();
        assert_eq!(m.critical_fractile_solution(&d), 2.0);
    }

    #[test]
    fn newsvendor_rejects_bad_prices() {
        assert!(NewsvendorModel::new(2.0, 3.0, 0.0).is_err());
        assert!(NewsvendorModel::new(2.0, 0.0, 0.0).is_err());
        assert!(NewsvendorModel::new(3.0, 2.0, -1.0).is_err());
    }

    #[test]
    fn logistic_reward_is_stable_for_large_margins() {
        let m = LogisticModel::<f64>::new(1);
        let r = m.reward(&[1000.0, 0.0], &[1.0, 1.0]);
        assert!(r <= 0.0 && r > -1e-300);
        let r = m.reward(&[1000.0, 0.0], &[-1.0, 1.0]);
        assert!((r + 1000.0).abs() < 1e-9);
    }
}
