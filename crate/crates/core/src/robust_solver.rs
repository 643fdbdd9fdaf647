//! Penalty-form worst case and robust optimization through the convex dual
//!
//! `min_Q E_Q f + (1/δ) H_φ(Q | P)  =  −min_c { c + (1/δ) Σ pᵢ φ*(δ(−fᵢ − c)) }`.

use crate::divergence::{DivergenceKind, PhiDivergence};
use crate::empirical::{check_model_dist, empirical_maximum, EmpiricalDistribution};
use crate::error::{DroError, Result};
use crate::linalg::Matrix;
use crate::optimize::{maximize, ConcaveObjective, Evaluation, SolverOptions};
use crate::reward_models::RewardModel;
use crate::scalar::{log_sum_exp, norm, Scalar};

/// Which evaluation of the dual to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DualPath {
    /// Closed form for relative entropy, scalar minimization over `c` otherwise.
    #[default]
    Auto,
    /// Scalar minimization over `c` for every divergence.
    Generic,
    /// Log-sum-exp closed form; relative entropy only.
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustOptions<T> {
    pub solver: SolverOptions<T>,
    pub path: DualPath,
}

impl<T: Scalar> Default for RobustOptions<T> {
    fn default() -> Self {
        Self::with_path(DualPath::Auto)
    }
}

impl<T: Scalar> RobustOptions<T> {
    pub fn with_path(path: DualPath) -> Self {
        Self {
            solver: SolverOptions::default(),
            path,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstCase<T> {
    /// Penalized worst-case expected reward.
    pub value: T,
    /// Adversarial probability weights `qᵢ`.
    pub weights: Vec<T>,
    /// Minimizing dual scalar.
    pub c: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustSolution<T> {
    pub x: Vec<T>,
    pub c: T,
    pub delta: T,
    /// Worst-case value at `x` (the empirical mean when `delta = 0`).
    pub objective: T,
    /// Adversarial weights at `x` (the empirical weights when `delta = 0`).
    pub weights: Vec<T>,
    pub iterations: usize,
    pub residual: T,
}

fn use_closed_form<T: Scalar>(phi: &PhiDivergence<T>, path: DualPath) -> Result<bool> {
    let kl = matches!(phi.kind(), DivergenceKind::RelativeEntropy);
    match path {
        DualPath::Auto => Ok(kl),
        DualPath::Generic => Ok(false),
        DualPath::ClosedForm if kl => Ok(true),
        DualPath::ClosedForm => Err(DroError::InvalidArgument(format!(
            "no closed-form worst case for divergence {}",
            phi.kind()
        ))),
    }
}

fn check_delta<T: Scalar>(delta: T, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { delta >= T::zero() } else { delta > T::zero() };
    if !ok || !delta.is_finite() {
        return Err(DroError::InvalidArgument(format!(
            "robustness parameter must be {} and finite, got {delta}",
            if allow_zero { "nonnegative" } else { "positive" }
        )));
    }
    Ok(())
}

/// Worst case of the reward vector `rewards` under reference weights `p`.
pub fn worst_case_of_rewards<T: Scalar>(
    rewards: &[T],
    p: &[T],
    delta: T,
    phi: &PhiDivergence<T>,
    path: DualPath,
) -> Result<WorstCase<T>> {
    check_delta(delta, false)?;
    if rewards.len() != p.len() || p.is_empty() {
        return Err(DroError::InvalidArgument("rewards and weights differ in length".into()));
    }
    if rewards.iter().any(|f| !f.is_finite()) {
        return Err(DroError::Overflow("non-finite reward".into()));
    }
    if use_closed_form(phi, path)? {
        kl_worst_case(rewards, p, delta)
    } else {
        generic_worst_case(rewards, p, delta, phi)
    }
}

fn kl_worst_case<T: Scalar>(f: &[T], p: &[T], delta: T) -> Result<WorstCase<T>> {
    let args: Vec<T> = f.iter().map(|&v| -delta * v).collect();
    if args.iter().any(|a| !a.is_finite()) {
        return Err(DroError::Overflow(format!("δ·f overflows at δ = {delta}")));
    }
    let lse = log_sum_exp(&args, p);
    let weights: Vec<T> = args
        .iter()
        .zip(p)
        .map(|(&a, &pi)| if pi > T::zero() { pi * (a - lse).exp() } else { T::zero() })
        .collect();
    let value = -lse / delta;
    if !value.is_finite() {
        return Err(DroError::Overflow(format!("worst case is not finite at δ = {delta}")));
    }
    Ok(WorstCase {
        value,
        weights,
        c: lse / delta,
    })
}

/// Root of `Σ pᵢ (φ*)′(δ(−fᵢ − c)) = 1`, which lies in `[−max f, −min f]`.
fn solve_dual_c<T: Scalar>(f: &[T], p: &[T], delta: T, phi: &PhiDivergence<T>) -> Result<T> {
    let support = || f.iter().zip(p).filter(|(_, &pi)| pi > T::zero()).map(|(&v, _)| v);
    let f_max = support().fold(T::neg_infinity(), T::max);
    let f_min = support().fold(T::infinity(), T::min);
    if f_max == f_min {
        return Ok(-f_max);
    }
    let mut lo = -f_max;
    let mut hi = -f_min;
    let mean: T = f.iter().zip(p).map(|(&v, &pi)| pi * v).sum();
    let mut c = (-mean).max(lo).min(hi);
    let limit = phi.conj_arg_limit();
    for _ in 0..500 {
        // h(c) = 1 − Σ p (φ*)′(ζ) is nondecreasing in c.
        let mut h = T::zero();
        let mut dh = T::zero();
        let mut overflow = false;
        for (&fi, &pi) in f.iter().zip(p) {
            if pi == T::zero() {
                continue;
            }
            let zeta = -delta * (fi + c);
            if zeta > limit {
                overflow = true;
                break;
            }
            h = h - pi * phi.conj_d1_minus_one(zeta);
            dh = dh + pi * delta * phi.conj_d2(zeta);
        }
        if overflow || !h.is_finite() {
            lo = c;
        } else {
            if h.abs() <= T::epsilon() * T::lit(8.0) {
                return Ok(c);
            }
            if h < T::zero() {
                lo = c;
            } else {
                hi = c;
            }
        }
        if hi - lo <= T::epsilon() * T::lit(2.0) * (lo.abs() + hi.abs()) + T::min_positive_value() {
            return Ok(c);
        }
        let newton = if !overflow && dh > T::zero() { c - h / dh } else { T::nan() };
        c = if newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / T::lit(2.0)
        };
    }
    Ok(c)
}

fn generic_worst_case<T: Scalar>(f: &[T], p: &[T], delta: T, phi: &PhiDivergence<T>) -> Result<WorstCase<T>> {
    let c = solve_dual_c(f, p, delta, phi)?;
    let mut penalty = T::zero();
    let mut weights = Vec::with_capacity(f.len());
    for (&fi, &pi) in f.iter().zip(p) {
        if pi == T::zero() {
            weights.push(T::zero());
            continue;
        }
        let zeta = -delta * (fi + c);
        penalty = penalty + pi * phi.conj(zeta);
        weights.push(pi * phi.conj_d1(zeta));
    }
    let total: T = weights.iter().copied().sum();
    if !total.is_finite() || !penalty.is_finite() || total <= T::zero() {
        return Err(DroError::Overflow(format!("adversarial weights overflow at δ = {delta}")));
    }
    for w in &mut weights {
        *w = *w / total;
    }
    let value = -(c + penalty / delta);
    if !value.is_finite() {
        return Err(DroError::Overflow(format!("worst case is not finite at δ = {delta}")));
    }
    Ok(WorstCase { value, weights, c })
}

/// `min_Q { E_Q f(x, ·) + (1/δ) H_φ(Q | Pₙ) }` and its minimizer.
pub fn worst_case<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    x: &[T],
    dist: &EmpiricalDistribution<T>,
    delta: T,
    phi: &PhiDivergence<T>,
) -> Result<WorstCase<T>> {
    worst_case_with(model, x, dist, delta, phi, DualPath::Auto)
}

pub fn worst_case_with<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    x: &[T],
    dist: &EmpiricalDistribution<T>,
    delta: T,
    phi: &PhiDivergence<T>,
    path: DualPath,
) -> Result<WorstCase<T>> {
    let f: Vec<T> = dist.samples().iter().map(|y| model.reward(x, y)).collect();
    worst_case_of_rewards(&f, dist.weights(), delta, phi, path)
}

/// The worst case as a function of `x`, with gradient `Σ qᵢ∇fᵢ` and the
/// Hessian of the profile over `c`.
struct RobustObjective<'a, T: Scalar, M: RewardModel<T> + ?Sized> {
    model: &'a M,
    dist: &'a EmpiricalDistribution<T>,
    delta: T,
    phi: &'a PhiDivergence<T>,
    path: DualPath,
}

impl<T: Scalar, M: RewardModel<T> + ?Sized> ConcaveObjective<T> for RobustObjective<'_, T, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn evaluate(&self, x: &[T], with_hessian: bool) -> Result<Evaluation<T>> {
        let m = self.model.dim();
        let p = self.dist.weights();
        let f: Vec<T> = self.dist.samples().iter().map(|y| self.model.reward(x, y)).collect();
        let wc = worst_case_of_rewards(&f, p, self.delta, self.phi, self.path)?;
        let closed = use_closed_form(self.phi, self.path)?;
        let mut gradient = vec![T::zero(); m];
        let mut g = vec![T::zero(); m];
        let mut hessian = with_hessian.then(|| Matrix::zeros(m, m));
        let mut h = Matrix::zeros(m, m);
        // Curvature weights δ·pᵢ(φ*)″(ζᵢ); for relative entropy these are δqᵢ.
        let mut curv_total = T::zero();
        let mut curv_grad = vec![T::zero(); m];
        for (i, y) in self.dist.samples().iter().enumerate() {
            let q = wc.weights[i];
            let curv = if closed {
                q
            } else if p[i] > T::zero() {
                p[i] * self.phi.conj_d2(-self.delta * (f[i] + wc.c))
            } else {
                T::zero()
            };
            if q == T::zero() && curv == T::zero() {
                continue;
            }
            self.model.gradient_into(x, y, &mut g);
            for (a, &b) in gradient.iter_mut().zip(&g) {
                *a = *a + q * b;
            }
            if let Some(acc) = hessian.as_mut() {
                if q != T::zero() {
                    self.model.hessian_into(x, y, &mut h);
                    acc.add_scaled(q, &h);
                }
                acc.add_outer(-self.delta * curv, &g, &g);
                curv_total = curv_total + curv;
                for (a, &b) in curv_grad.iter_mut().zip(&g) {
                    *a = *a + curv * b;
                }
            }
        }
        if let Some(acc) = hessian.as_mut() {
            if curv_total > T::zero() {
                acc.add_outer(self.delta / curv_total, &curv_grad, &curv_grad);
            }
        }
        Ok(Evaluation {
            value: wc.value,
            gradient,
            hessian,
        })
    }
}

/// Robust solution `xₙ(δ)` maximizing the worst case over the feasible set,
/// with its dual scalar `cₙ(δ)`. `delta = 0` is plain empirical optimization.
pub fn robust_optimize<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    delta: T,
    phi: &PhiDivergence<T>,
    opts: &RobustOptions<T>,
) -> Result<RobustSolution<T>> {
    check_delta(delta, true)?;
    check_model_dist(model, dist)?;
    if delta == T::zero() {
        let max = empirical_maximum(model, dist, &opts.solver)?;
        return Ok(RobustSolution {
            c: -max.value,
            objective: max.value,
            weights: dist.weights().to_vec(),
            x: max.x,
            delta,
            iterations: max.iterations,
            residual: max.stationarity,
        });
    }
    if !model.is_smooth() {
        return Err(DroError::InvalidArgument(format!(
            "robust solver needs a smooth reward; model {} has kinks",
            model.name()
        )));
    }
    use_closed_form(phi, opts.path)?;
    let obj = RobustObjective {
        model,
        dist,
        delta,
        phi,
        path: opts.path,
    };
    let max = maximize(&obj, model.feasible_set(), &model.initial_point(dist), &opts.solver)?;
    let wc = worst_case_with(model, &max.x, dist, delta, phi, opts.path)?;
    let residual = foc_residual(model, &max.x, wc.c, dist, delta, phi);
    let size = (norm(&max.x).powi(2) + wc.c * wc.c).sqrt();
    let bound = T::lit(1e-7).max(opts.solver.tolerance * T::lit(10.0)) * (T::one() + size);
    if !(residual <= bound) {
        return Err(DroError::NotConverged {
            iterations: max.iterations,
            residual: residual.to_f64_lossy(),
            last_iterate: max.x.iter().map(|v| v.to_f64_lossy()).collect(),
            trace: vec![max.stationarity.to_f64_lossy()],
        });
    }
    Ok(RobustSolution {
        x: max.x,
        c: wc.c,
        delta,
        objective: wc.value,
        weights: wc.weights,
        iterations: max.iterations,
        residual,
    })
}

/// Norm of the first-order conditions in `(x, c)`: the tangent-cone projection
/// of `Σ pᵢ(φ*)′(ζᵢ)∇fᵢ` stacked with `Σ pᵢ[(φ*)′(ζᵢ) − 1]`, `ζᵢ = −δ(fᵢ + c)`.
pub fn foc_residual<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    x: &[T],
    c: T,
    dist: &EmpiricalDistribution<T>,
    delta: T,
    phi: &PhiDivergence<T>,
) -> T {
    let m = model.dim();
    let mut grad = vec![T::zero(); m];
    let mut g = vec![T::zero(); m];
    let mut second = T::zero();
    for (y, &p) in dist.samples().iter().zip(dist.weights()) {
        if p == T::zero() {
            continue;
        }
        let zeta = -delta * (model.reward(x, y) + c);
        let w = phi.conj_d1(zeta);
        second = second + p * phi.conj_d1_minus_one(zeta);
        model.gradient_into(x, y, &mut g);
        for (a, &b) in grad.iter_mut().zip(&g) {
            *a = *a + p * w * b;
        }
    }
    let first = model.feasible_set().stationarity(x, &grad);
    (first * first + second * second).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward_models::{ExpUtilityModel, QuadraticModel};

    fn toy() -> (QuadraticModel<f64>, EmpiricalDistribution<f64>) {
        (
            QuadraticModel::new(1),
            EmpiricalDistribution::from_scalars(vec![0.0, 0.0, 3.0]).unwrap(),
        )
    }

    #[test]
    fn constant_reward_is_adversary_proof() {
        for phi in [PhiDivergence::<f64>::relative_entropy(), PhiDivergence::modified_chi_square()] {
            for path in [DualPath::Auto, DualPath::Generic] {
                let wc = worst_case_of_rewards(&[1.0; 3], &[0.2, 0.3, 0.5], 2.5, &phi, path).unwrap();
                assert!((wc.value - 1.0).abs() < 1e-14);
                assert_eq!(wc.weights, vec![0.2, 0.3, 0.5]);
            }
        }
    }

    #[test]
    fn kl_two_point_example() {
        let phi = PhiDivergence::relative_entropy();
        let d = 2f64.ln();
        for path in [DualPath::ClosedForm, DualPath::Generic] {
            let wc = worst_case_of_rewards(&[0.0, 1.0], &[0.5, 0.5], d, &phi, path).unwrap();
            assert!((wc.weights[0] - 2.0 / 3.0).abs() < 1e-12);
            assert!((wc.value - (4f64 / 3.0).ln() / d).abs() < 1e-12);
            assert!((wc.value - 0.41504).abs() < 1e-5);
        }
    }

    #[test]
    fn delta_must_be_positive() {
        let phi = PhiDivergence::relative_entropy();
        assert!(worst_case_of_rewards(&[0.0], &[1.0], 0.0, &phi, DualPath::Auto).is_err());
        assert!(worst_case_of_rewards(&[0.0], &[1.0], -1.0, &phi, DualPath::Auto).is_err());
        let chi = PhiDivergence::modified_chi_square();
        assert!(worst_case_of_rewards(&[0.0], &[1.0], 1.0, &chi, DualPath::ClosedForm).is_err());
    }

    #[test]
    fn huge_rewards_do_not_overflow() {
        let phi = PhiDivergence::<f64>::relative_entropy();
        let wc = worst_case_of_rewards(&[0.0, 1e6], &[0.5, 0.5], 10.0, &phi, DualPath::Auto).unwrap();
        assert!(wc.value.is_finite() && wc.value >= 0.0 && wc.value < 1.0);
    }

    #[test]
    fn delta_zero_is_empirical() {
        let (m, d) = toy();
        let phi = PhiDivergence::relative_entropy();
        let s = robust_optimize(&m, &d, 0.0, &phi, &RobustOptions::default()).unwrap();
        assert_eq!(s.x, crate::empirical_optimize(&m, &d, &SolverOptions::default()).unwrap());
        assert!((s.c + s.objective).abs() < 1e-15);
    }

    #[test]
    fn toy_solution_moves_with_delta() {
        let (m, d) = toy();
        let phi = PhiDivergence::relative_entropy();
        let mut prev = 1.0;
        for delta in [1e-3, 1e-2, 0.1, 0.5] {
            let s = robust_optimize(&m, &d, delta, &phi, &RobustOptions::default()).unwrap();
            assert!(s.x[0] > prev, "{delta}: {:?}", s.x);
            assert!(s.residual <= 1e-7 * (1.0 + s.x[0].hypot(s.c)));
            let g = robust_optimize(&m, &d, delta, &phi, &RobustOptions::with_path(DualPath::Generic)).unwrap();
            assert!((g.x[0] - s.x[0]).abs() < 1e-8);
            prev = s.x[0];
        }
    }

    #[test]
    fn forced_portfolio_for_every_delta() {
        let m = ExpUtilityModel::budgeted(1.0, 1).unwrap();
        let d = EmpiricalDistribution::from_scalars(vec![0.1, -0.3, 0.02]).unwrap();
        for phi in [PhiDivergence::relative_entropy(), PhiDivergence::modified_chi_square()] {
            for delta in [0.0, 0.5, 10.0] {
                let s = robust_optimize(&m, &d, delta, &phi, &RobustOptions::default()).unwrap();
                assert_eq!(s.x, vec![1.0]);
            }
        }
    }

    #[test]
    fn residual_is_positive_away_from_optimum() {
        let (m, d) = toy();
        let phi = PhiDivergence::relative_entropy();
        assert!(foc_residual(&m, &[5.0], 3.0, &d, 0.3, &phi) > 0.1);
    }
}
