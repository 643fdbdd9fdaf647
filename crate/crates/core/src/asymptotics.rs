//! Small-δ and large-n expansions of robust solutions and of their
//! out-of-sample reward mean and variance.
//!
//! All population expectations are weighted sums over a reference
//! distribution: an empirical data set, or a large Monte Carlo sample standing
//! in for a known data-generating model. Only unconstrained models are
//! supported; at a constrained optimum the estimating equations change form.

use crate::divergence::PhiDivergence;
use crate::empirical::{empirical_maximum, EmpiricalDistribution};
use crate::error::{DroError, Result};
use crate::linalg::Matrix;
use crate::optimize::SolverOptions;
use crate::reward_models::{weighted_mean_var, RewardModel};
use crate::robust_solver::{robust_optimize, RobustOptions};
use crate::scalar::{dot, norm, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticOptions<T> {
    pub solver: SolverOptions<T>,
    /// Finite-difference step in δ for `ξ′(0)`, and relative step in `x` for
    /// the trace gradients.
    pub fd_step: T,
}

impl<T: Scalar> Default for AsymptoticOptions<T> {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            fd_step: T::lit(1e-3),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticSummary<T> {
    /// `x*(0)`, the maximizer of the expected reward.
    pub x_star: Vec<T>,
    /// `E f(x*(0), Y)`.
    pub expected_reward: T,
    /// `Cov[∇ₓf, f]` at `x*(0)`.
    pub mu_f: Vec<T>,
    /// `E ∇ₓ²f` at `x*(0)`.
    pub sigma_f: Matrix<T>,
    /// `x*(δ) = x*(0) + δπ + o(δ)`.
    pub pi: Vec<T>,
    /// Limit covariance of `√n (xₙ(0) − x*(0))`.
    pub xi0: Matrix<T>,
    /// `Var f(x*(0), Y)`.
    pub eta0: T,
    /// `Σ_f⁻¹ μ_f`, the limit cross-covariance of the decision and dual scalar.
    pub kappa0: Vec<T>,
    pub rho: T,
    pub theta: T,
    /// `∇ₓ² Var f` at `x*(0)`.
    pub var_hessian: Matrix<T>,
    /// `μ_fᵀ Σ_f⁻¹ μ_f`, negative for concave rewards with `μ_f ≠ 0`.
    pub mu_sigma_mu: T,
    /// φ″(1).
    pub curvature: T,
}

/// Point on a predicted out-of-sample curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint<T> {
    pub delta: T,
    pub mean: T,
    pub variance: T,
}

fn require_unconstrained<T: Scalar, M: RewardModel<T> + ?Sized>(model: &M) -> Result<()> {
    if !model.feasible_set().is_unconstrained() {
        return Err(DroError::InvalidArgument(
            "expansions are only available for unconstrained models".into(),
        ));
    }
    if !model.is_smooth() {
        return Err(DroError::InvalidArgument(format!(
            "expansions need a smooth reward; model {} has kinks",
            model.name()
        )));
    }
    Ok(())
}

/// `E[ψ]` and `E[J_ψ]` of the estimating function
/// `ψ = [w∇f; −(φ″(1)/δ)(w − 1)]`, `w = (φ*)′(−δ(f + c))`,
/// whose second coordinate is `f + c` at `δ = 0`. `δ` may be negative.
struct Moments<T> {
    psi: Vec<T>,
    jac: Matrix<T>,
    outer: Matrix<T>,
}

fn estimating_moments<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    delta: T,
    x: &[T],
    c: T,
    with_outer: bool,
) -> Moments<T> {
    let m = model.dim();
    let d2 = phi.curvature();
    let mut psi = vec![T::zero(); m + 1];
    let mut jac = Matrix::zeros(m + 1, m + 1);
    let mut outer = Matrix::zeros(m + 1, m + 1);
    let mut g = vec![T::zero(); m];
    let mut h = Matrix::zeros(m, m);
    let mut one = vec![T::zero(); m + 1];
    for (y, &p) in dist.samples().iter().zip(dist.weights()) {
        if p == T::zero() {
            continue;
        }
        let f = model.reward(x, y);
        model.gradient_into(x, y, &mut g);
        model.hessian_into(x, y, &mut h);
        let zeta = -delta * (f + c);
        let w = phi.conj_d1(zeta);
        let dw = phi.conj_d2(zeta);
        let second = if delta == T::zero() {
            f + c
        } else {
            -d2 / delta * phi.conj_d1_minus_one(zeta)
        };
        for i in 0..m {
            one[i] = w * g[i];
            psi[i] = psi[i] + p * one[i];
            for j in 0..m {
                jac[(i, j)] = jac[(i, j)] + p * (w * h[(i, j)] - delta * dw * g[i] * g[j]);
            }
            jac[(i, m)] = jac[(i, m)] - p * delta * dw * g[i];
            jac[(m, i)] = jac[(m, i)] + p * d2 * dw * g[i];
        }
        one[m] = second;
        psi[m] = psi[m] + p * second;
        jac[(m, m)] = jac[(m, m)] + p * d2 * dw;
        if with_outer {
            outer.add_outer(p, &one, &one);
        }
    }
    Moments { psi, jac, outer }
}

/// Solves `E[ψ(x, c)] = 0` by Newton's method from `(x0, c0)`. Unlike the
/// robust solver this accepts negative `δ`, which the central differences in
/// δ need.
pub fn solve_estimating_equations<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    delta: T,
    x0: &[T],
    c0: T,
    opts: &SolverOptions<T>,
) -> Result<(Vec<T>, T)> {
    require_unconstrained(model)?;
    let m = model.dim();
    let mut theta: Vec<T> = x0.iter().copied().chain(std::iter::once(c0)).collect();
    let split = |t: &[T]| (t[..m].to_vec(), t[m]);
    let mut mom = estimating_moments(model, dist, phi, delta, &theta[..m], theta[m], false);
    let mut res = norm(&mom.psi);
    let mut trace = Vec::new();
    let target = |t: &[T]| opts.tolerance * T::lit(1e-2) * (T::one() + norm(t));
    let cap = opts.max_iterations.min(200);
    for _ in 0..cap {
        trace.push(res.to_f64_lossy());
        if res <= target(&theta) {
            return Ok(split(&theta));
        }
        let step = mom.jac.solve(&mom.psi, "estimating equation Jacobian")?;
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<T> = theta.iter().zip(&step).map(|(&a, &s)| a - t * s).collect();
            let cm = estimating_moments(model, dist, phi, delta, &cand[..m], cand[m], false);
            let cr = norm(&cm.psi);
            if cr.is_finite() && cr < res {
                theta = cand;
                mom = cm;
                res = cr;
                accepted = true;
                break;
            }
            t = t / T::lit(2.0);
        }
        if !accepted {
            break;
        }
    }
    // Newton stalls at the rounding floor; accept anything within the
    // ordinary solver tolerance.
    if res <= opts.tolerance * (T::one() + norm(&theta)) {
        return Ok(split(&theta));
    }
    Err(DroError::NotConverged {
        iterations: trace.len(),
        residual: res.to_f64_lossy(),
        last_iterate: theta.iter().map(|v| v.to_f64_lossy()).collect(),
        trace,
    })
}

/// `A⁻¹ B A⁻ᵀ` with `A = −E[J_ψ]`, `B = E[ψψᵀ]`, evaluated at `(x, c)`.
pub fn sandwich_at<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    delta: T,
    x: &[T],
    c: T,
) -> Result<Matrix<T>> {
    let mom = estimating_moments(model, dist, phi, delta, x, c, true);
    let a = mom.jac.scaled(-T::one());
    let a_inv = a.inverse("sandwich bread matrix A")?;
    Ok(a_inv.matmul(&mom.outer).matmul(&a_inv.transpose()).symmetrized())
}

/// Sandwich covariance of `√n ((xₙ(δ), cₙ(δ)) − (x*(δ), c*(δ)))`, with the
/// solution computed on `ref_dist`. The last row and column belong to `c`.
pub fn sandwich_covariance<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    ref_dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    delta: T,
    opts: &SolverOptions<T>,
) -> Result<Matrix<T>> {
    require_unconstrained(model)?;
    let robust = RobustOptions {
        solver: *opts,
        ..RobustOptions::default()
    };
    let sol = robust_optimize(model, ref_dist, delta, phi, &robust)?;
    sandwich_at(model, ref_dist, phi, delta, &sol.x, sol.c)
}

struct PointMoments<T> {
    mean: T,
    var: T,
    cov_f_grad: Vec<T>,
    hess_mean: Matrix<T>,
    grad_var: Matrix<T>,
    cov_f_hess: Matrix<T>,
}

fn point_moments<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    x: &[T],
    dist: &EmpiricalDistribution<T>,
) -> PointMoments<T> {
    let m = model.dim();
    let p = dist.weights();
    let f: Vec<T> = dist.samples().iter().map(|y| model.reward(x, y)).collect();
    let (mean, var) = weighted_mean_var(&f, p);
    let grads: Vec<Vec<T>> = dist.samples().iter().map(|y| model.gradient(x, y)).collect();
    let mut grad_mean = vec![T::zero(); m];
    for (g, &pi) in grads.iter().zip(p) {
        for (a, &b) in grad_mean.iter_mut().zip(g) {
            *a = *a + pi * b;
        }
    }
    let mut cov_f_grad = vec![T::zero(); m];
    let mut grad_var = Matrix::zeros(m, m);
    let mut hess_mean = Matrix::zeros(m, m);
    let mut cov_f_hess = Matrix::zeros(m, m);
    let mut h = Matrix::zeros(m, m);
    let mut centered = vec![T::zero(); m];
    for (i, y) in dist.samples().iter().enumerate() {
        if p[i] == T::zero() {
            continue;
        }
        let df = f[i] - mean;
        for k in 0..m {
            centered[k] = grads[i][k] - grad_mean[k];
            cov_f_grad[k] = cov_f_grad[k] + p[i] * df * centered[k];
        }
        grad_var.add_outer(p[i], &centered, &centered);
        model.hessian_into(x, y, &mut h);
        hess_mean.add_scaled(p[i], &h);
        cov_f_hess.add_scaled(p[i] * df, &h);
    }
    PointMoments {
        mean,
        var,
        cov_f_grad,
        hess_mean,
        grad_var,
        cov_f_hess,
    }
}

/// `∇ₓ Var f(x, Y) = 2 Cov[f, ∇ₓf]`.
pub fn variance_gradient<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    x: &[T],
    dist: &EmpiricalDistribution<T>,
) -> Vec<T> {
    point_moments(model, x, dist)
        .cov_f_grad
        .into_iter()
        .map(|v| v * T::lit(2.0))
        .collect()
}

/// `∇ₓ² Var f(x, Y) = 2 Var[∇ₓf] + 2 Cov[f, ∇ₓ²f]`.
pub fn variance_hessian<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    x: &[T],
    dist: &EmpiricalDistribution<T>,
) -> Matrix<T> {
    let pm = point_moments(model, x, dist);
    pm.grad_var.add(&pm.cov_f_hess).scaled(T::lit(2.0))
}

/// All expansion constants at `x*(0)` of `ref_dist`.
pub fn summarize<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    ref_dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    opts: &AsymptoticOptions<T>,
) -> Result<AsymptoticSummary<T>> {
    require_unconstrained(model)?;
    let m = model.dim();
    let x_star = empirical_maximum(model, ref_dist, &opts.solver)?.x;
    let pm = point_moments(model, &x_star, ref_dist);
    let curvature = phi.curvature();
    let sigma_inv = pm.hess_mean.inverse("expected Hessian of the reward")?;
    let kappa0 = sigma_inv.matvec(&pm.cov_f_grad);
    let pi: Vec<T> = kappa0.iter().map(|&k| k / curvature).collect();
    let xi0 = sigma_inv
        .matmul(&pm.grad_var)
        .matmul(&sigma_inv.transpose())
        .symmetrized();
    let mu_sigma_mu = dot(&pm.cov_f_grad, &kappa0);
    let var_hessian = pm.grad_var.add(&pm.cov_f_hess).scaled(T::lit(2.0));

    // ξ′(0) by central differences of the sandwich in δ.
    let h = opts.fd_step;
    let c_star = -pm.mean;
    let xi_at = |delta: T| -> Result<Matrix<T>> {
        let (x, c) = solve_estimating_equations(model, ref_dist, phi, delta, &x_star, c_star, &opts.solver)?;
        let v = sandwich_at(model, ref_dist, phi, delta, &x, c)?;
        let idx: Vec<usize> = (0..m).collect();
        Ok(v.select(&idx, &idx))
    };
    let xi_prime = xi_at(h)?.sub(&xi_at(-h)?).scaled(T::one() / (T::lit(2.0) * h));

    // πᵀ∇ₓ tr(ξ(0)·G(x)) by central differences along π.
    let pi_norm = norm(&pi);
    let directional = |g: &dyn Fn(&PointMoments<T>) -> Matrix<T>| -> T {
        if pi_norm == T::zero() {
            return T::zero();
        }
        let s = h * (T::one() + norm(&x_star));
        let shifted = |sign: T| {
            let x: Vec<T> = x_star
                .iter()
                .zip(&pi)
                .map(|(&a, &b)| a + sign * s * b / pi_norm)
                .collect();
            xi0.frobenius_dot(&g(&point_moments(model, &x, ref_dist)))
        };
        pi_norm * (shifted(T::one()) - shifted(-T::one())) / (T::lit(2.0) * s)
    };
    let rho = xi_prime.frobenius_dot(&pm.hess_mean) + directional(&|q| q.hess_mean.clone());
    let theta = xi_prime.frobenius_dot(&var_hessian)
        + directional(&|q| q.grad_var.add(&q.cov_f_hess).scaled(T::lit(2.0)));

    Ok(AsymptoticSummary {
        x_star,
        expected_reward: pm.mean,
        mu_f: pm.cov_f_grad,
        sigma_f: pm.hess_mean,
        pi,
        xi0,
        eta0: pm.var,
        kappa0,
        rho,
        theta,
        var_hessian,
        mu_sigma_mu,
        curvature,
    })
}

impl<T: Scalar> AsymptoticSummary<T> {
    /// `E f(xₙ(0), Y)` to order `1/n`.
    pub fn baseline_mean(&self, n: usize) -> T {
        self.expected_reward + self.xi0.frobenius_dot(&self.sigma_f) / (T::lit(2.0) * T::from_usize_lossy(n))
    }

    /// `Var f(xₙ(0), Y)` to order `1/n`.
    pub fn baseline_variance(&self, n: usize) -> T {
        self.eta0 + self.xi0.frobenius_dot(&self.var_hessian) / (T::lit(2.0) * T::from_usize_lossy(n))
    }
}

/// Predicted out-of-sample mean and variance of `f(xₙ(δ), Y)` for each δ.
pub fn predicted_curves<T: Scalar>(summary: &AsymptoticSummary<T>, n: usize, delta_grid: &[T]) -> Result<Vec<CurvePoint<T>>> {
    if n == 0 {
        return Err(DroError::InvalidArgument("sample size must be at least 1".into()));
    }
    let nn = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let k = summary.curvature;
    let q = summary.mu_sigma_mu;
    let mean0 = summary.baseline_mean(n);
    let var0 = summary.baseline_variance(n);
    Ok(delta_grid
        .iter()
        .map(|&delta| CurvePoint {
            delta,
            mean: mean0 + delta * delta / (two * k * k) * q + delta * summary.rho / (two * nn),
            variance: var0 + two * delta / k * q + delta * summary.theta / (two * nn),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward_models::QuadraticModel;

    fn toy() -> (QuadraticModel<f64>, EmpiricalDistribution<f64>) {
        (
            QuadraticModel::new(1),
            EmpiricalDistribution::from_scalars(vec![0.0, 0.0, 3.0]).unwrap(),
        )
    }

    #[test]
    fn toy_summary_matches_hand_moments() {
        let (m, d) = toy();
        let s = summarize(&m, &d, &PhiDivergence::relative_entropy(), &AsymptoticOptions::default()).unwrap();
        assert!((s.x_star[0] - 1.0).abs() < 1e-12);
        assert!((s.sigma_f[(0, 0)] + 1.0).abs() < 1e-12);
        assert!((s.mu_f[0] + 1.0).abs() < 1e-12);
        assert!((s.pi[0] - 1.0).abs() < 1e-12);
        assert!((s.xi0[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((s.mu_sigma_mu + 1.0).abs() < 1e-12);
        let curves = predicted_curves(&s, 10, &[0.0, 1e-6]).unwrap();
        assert_eq!(curves[0].mean, s.baseline_mean(10));
        let slope = (curves[1].variance - curves[0].variance) / 1e-6;
        assert!((slope - (-2.0 + s.theta / 20.0)).abs() < 1e-6);
    }

    #[test]
    fn symmetric_data_has_no_bias() {
        let m = QuadraticModel::<f64>::new(1);
        let d = EmpiricalDistribution::from_scalars(vec![-1.0, 1.0]).unwrap();
        let s = summarize(&m, &d, &PhiDivergence::relative_entropy(), &AsymptoticOptions::default()).unwrap();
        assert!(s.mu_f[0].abs() < 1e-15 && s.pi[0].abs() < 1e-15);
    }

    #[test]
    fn sandwich_small_delta_approaches_summary() {
        let (m, d) = toy();
        let phi = PhiDivergence::relative_entropy();
        let s = summarize(&m, &d, &phi, &AsymptoticOptions::default()).unwrap();
        let v = sandwich_covariance(&m, &d, &phi, 1e-4, &SolverOptions::default()).unwrap();
        assert!((v[(0, 0)] - s.xi0[(0, 0)]).abs() < 1e-2 * s.xi0[(0, 0)]);
        assert!((v[(1, 1)] - s.eta0).abs() < 1e-2 * s.eta0);
        assert!((v[(0, 1)] - s.kappa0[0]).abs() < 1e-2 * s.kappa0[0].abs());
    }

    /// No decision at all: `f(Y) = Y`.
    struct Passive(crate::FeasibleSet<f64>);

    impl RewardModel<f64> for Passive {
        fn name(&self) -> &str {
            "passive"
        }
        fn dim(&self) -> usize {
            0
        }
        fn reward(&self, _x: &[f64], y: &[f64]) -> f64 {
            y[0]
        }
        fn gradient_into(&self, _x: &[f64], _y: &[f64], _out: &mut [f64]) {}
        fn hessian_into(&self, _x: &[f64], _y: &[f64], _out: &mut Matrix<f64>) {}
        fn feasible_set(&self) -> &crate::FeasibleSet<f64> {
            &self.0
        }
    }

    #[test]
    fn dual_only_model_has_reward_variance() {
        let m = Passive(crate::FeasibleSet::Unconstrained);
        let d = EmpiricalDistribution::from_scalars(vec![0.0, 0.0, 3.0]).unwrap();
        let v = sandwich_covariance(&m, &d, &PhiDivergence::relative_entropy(), 0.0, &SolverOptions::default()).unwrap();
        assert_eq!(v.nrows(), 1);
        assert!((v[(0, 0)] - 2.0).abs() < 1e-12);
    }
}
