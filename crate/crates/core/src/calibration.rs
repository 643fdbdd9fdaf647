//! Choosing δ: from a frontier (largest mean, mean-variance tradeoff), from a
//! worst-case target, or by matching a confidence level for the divergence
//! between the data-generating model and the empirical distribution.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::divergence::PhiDivergence;
use crate::empirical::{EmpiricalDistribution, RngSeed};
use crate::error::{DroError, Result};
use crate::frontier::{check_grid, Frontier};
use crate::reward_models::RewardModel;
use crate::robust_solver::{robust_optimize, RobustOptions};
use crate::scalar::Scalar;

/// How the divergence radius for a confidence level is estimated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadiusEstimator {
    /// Empirical quantile of the divergence between bootstrap resamples and
    /// the data, over `replicates` resamples.
    Bootstrap { replicates: usize, seed: RngSeed },
    /// `φ″(1) χ²_{n−1}(1 − α) / (2n)`, the large-sample law of the same
    /// divergence.
    ChiSquare,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CalibrationRule<T> {
    /// Largest frontier mean.
    MaxMean,
    /// Largest `μ(δ) − λ σ²(δ)`.
    MeanVarTradeoff(T),
    /// Largest δ whose worst-case objective still reaches the target.
    Satisficing(T),
    /// δ whose worst-case distribution sits at the `(1 − α)` quantile of the
    /// resampling divergence.
    HighConfidence { alpha: T, radius: RadiusEstimator },
}

/// What the solver-based rules need.
pub struct CalibrationProblem<'a, T: Scalar, M: RewardModel<T> + ?Sized> {
    pub model: &'a M,
    pub dist: &'a EmpiricalDistribution<T>,
    pub phi: &'a PhiDivergence<T>,
    pub opts: RobustOptions<T>,
}

/// Applies `rule`. The frontier rules ignore `problem`; `Satisficing` and
/// `HighConfidence` need it, and `Satisficing` evaluates the frontier's grid.
pub fn calibrate<T: Scalar, M: RewardModel<T> + ?Sized>(
    frontier: &Frontier<T>,
    rule: CalibrationRule<T>,
    problem: Option<&CalibrationProblem<'_, T, M>>,
) -> Result<T> {
    let need = || {
        problem.ok_or_else(|| DroError::InvalidArgument("this calibration rule needs the model and data".into()))
    };
    match rule {
        CalibrationRule::MaxMean => Ok(argmax_delta(frontier, |p| p.mu)),
        CalibrationRule::MeanVarTradeoff(lambda) => {
            if !(lambda >= T::zero()) {
                return Err(DroError::InvalidArgument("tradeoff weight must be nonnegative".into()));
            }
            Ok(argmax_delta(frontier, |p| p.mu - lambda * p.sigma2))
        }
        CalibrationRule::Satisficing(target) => {
            let p = need()?;
            satisficing_delta(p.model, p.dist, p.phi, &frontier.deltas(), target, &p.opts)
        }
        CalibrationRule::HighConfidence { alpha, radius } => {
            let p = need()?;
            high_confidence_delta(p.model, p.dist, p.phi, alpha, radius, &p.opts)
        }
    }
}

fn argmax_delta<T: Scalar>(f: &Frontier<T>, score: impl Fn(&crate::frontier::FrontierPoint<T>) -> T) -> T {
    let mut best = f.points()[0];
    let mut best_score = score(&best);
    for p in &f.points()[1..] {
        let s = score(p);
        if s > best_score {
            best = *p;
            best_score = s;
        }
    }
    best.delta
}

/// Largest δ in `grid` whose robust objective at the robust solution is at
/// least `target`.
pub fn satisficing_delta<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    grid: &[T],
    target: T,
    opts: &RobustOptions<T>,
) -> Result<T> {
    check_grid(grid)?;
    let mut best = None;
    for &delta in grid {
        let sol = robust_optimize(model, dist, delta, phi, opts)?;
        if sol.objective >= target {
            best = Some(delta);
        }
    }
    best.ok_or_else(|| {
        DroError::Calibration(format!("no delta on the grid reaches the worst-case target {target}"))
    })
}

/// Type-7 sample quantile (linear interpolation between order statistics).
pub fn quantile<T: Scalar>(values: &[T], level: T) -> Result<T> {
    if values.is_empty() || !(level >= T::zero() && level <= T::one()) {
        return Err(DroError::InvalidArgument("quantile needs data and a level in [0, 1]".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite divergences"));
    let h = T::from_usize_lossy(v.len() - 1) * level;
    let lo = h.floor().to_usize().unwrap_or(0).min(v.len() - 1);
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - T::from_usize_lossy(lo)) * (v[hi] - v[lo]))
}

/// `(1 − α)` quantile of `D(ℙₙ⁽ʲ⁾ ‖ ℙₙ)` over bootstrap resamples. Resample
/// `j` uses the same draws as [`crate::bootstrap_resample`] with
/// `seed.derive(j)`.
pub fn divergence_quantile<T: Scalar>(
    n: usize,
    phi: &PhiDivergence<T>,
    alpha: T,
    replicates: usize,
    seed: RngSeed,
) -> Result<T> {
    check_alpha(alpha)?;
    if n == 0 || replicates == 0 {
        return Err(DroError::InvalidArgument("need data and at least one replicate".into()));
    }
    let p = vec![T::one() / T::from_usize_lossy(n); n];
    let divs = (0..replicates as u64)
        .map(|j| {
            let mut rng = seed.derive(j).rng();
            let mut counts = vec![0usize; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            let q: Vec<T> = counts.iter().map(|&c| T::from_usize_lossy(c) / T::from_usize_lossy(n)).collect();
            phi.divergence(&q, &p)
        })
        .collect::<Result<Vec<T>>>()?;
    quantile(&divs, T::one() - alpha)
}

/// `φ″(1) χ²_{n−1}(1 − α) / (2n)`.
pub fn chi_square_radius<T: Scalar>(n: usize, phi: &PhiDivergence<T>, alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(DroError::InvalidArgument("chi-square radius needs at least two points".into()));
    }
    let chi = ChiSquared::new((n - 1) as f64).map_err(|e| DroError::InvalidArgument(e.to_string()))?;
    let q = chi.inverse_cdf(1.0 - alpha.to_f64_lossy());
    Ok(phi.curvature() * T::lit(q) / T::from_usize_lossy(2 * n))
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(DroError::InvalidArgument(format!("significance level {alpha} outside (0, 1)")));
    }
    Ok(())
}

const DELTA_MIN: f64 = 1e-6;
const DELTA_MAX: f64 = 1e4;

/// Divergence of the worst-case weights at the robust solution from `ℙₙ`.
pub fn realized_divergence<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    delta: T,
    opts: &RobustOptions<T>,
) -> Result<T> {
    let sol = robust_optimize(model, dist, delta, phi, opts)?;
    phi.divergence(&sol.weights, dist.weights())
}

/// δ_α: the δ in `[1e-6, 1e4]` at which the realized divergence equals the
/// radius for level `alpha`, within `1e-4` relative. Bisection in `ln δ`.
pub fn high_confidence_delta<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    alpha: T,
    radius: RadiusEstimator,
    opts: &RobustOptions<T>,
) -> Result<T> {
    let target = match radius {
        RadiusEstimator::Bootstrap { replicates, seed } => divergence_quantile(dist.len(), phi, alpha, replicates, seed)?,
        RadiusEstimator::ChiSquare => chi_square_radius(dist.len(), phi, alpha)?,
    };
    if !(target > T::zero()) {
        return Err(DroError::Calibration(format!("divergence radius {target} is not positive")));
    }
    let gap = |delta: T| -> Result<T> { Ok(realized_divergence(model, dist, phi, delta, opts)? - target) };

    // Walk a decade grid for a sign change rather than solving at the extreme
    // endpoints straight away; very large δ is slow and often ill-conditioned.
    let (dmin, dmax) = (T::lit(DELTA_MIN), T::lit(DELTA_MAX));
    let mut lo = dmin;
    let g_lo = gap(lo)?;
    if g_lo > T::zero() {
        return Err(DroError::Calibration(format!(
            "realized divergence already exceeds the radius {target} at delta {lo}"
        )));
    }
    if g_lo.abs() <= T::lit(1e-4) * target {
        return Ok(lo);
    }
    let mut hi = None;
    let mut d = dmin;
    while d < dmax {
        let next = (d * T::lit(10.0)).min(dmax);
        let g = gap(next)?;
        if g.abs() <= T::lit(1e-4) * target {
            return Ok(next);
        }
        if g > T::zero() {
            hi = Some(next);
            break;
        }
        lo = next;
        d = next;
    }
    let Some(mut hi) = hi else {
        return Err(DroError::Calibration(format!(
            "realized divergence stays below the radius {target} up to delta {dmax}"
        )));
    };
    for _ in 0..200 {
        let mid = (lo.ln() * T::lit(0.5) + hi.ln() * T::lit(0.5)).exp();
        let g = gap(mid)?;
        if g.abs() <= T::lit(1e-4) * target {
            return Ok(mid);
        }
        if g > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - T::one() <= T::epsilon() * T::lit(4.0) {
            break;
        }
    }
    Err(DroError::Calibration(format!(
        "realized divergence does not reach {target} within tolerance between delta {lo} and {hi}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontier::{FrontierMeta, FrontierMethod, FrontierPoint};
    use crate::reward_models::QuadraticModel;

    fn frontier(mus: &[f64], s2: &[f64]) -> Frontier<f64> {
        let points = mus
            .iter()
            .zip(s2)
            .enumerate()
            .map(|(i, (&mu, &sigma2))| FrontierPoint {
                delta: i as f64,
                mu,
                sigma2,
                mu_sd: 0.0,
                sigma2_sd: 0.0,
            })
            .collect();
        Frontier::new(points, FrontierMeta::new(FrontierMethod::Bootstrap, 2, 2)).unwrap()
    }

    fn rule_only(f: &Frontier<f64>, rule: CalibrationRule<f64>) -> Result<f64> {
        calibrate::<f64, QuadraticModel<f64>>(f, rule, None)
    }

    #[test]
    fn frontier_rules() {
        let f = frontier(&[1.0, 2.0, 2.0, 0.5], &[4.0, 3.0, 1.0, 0.1]);
        assert_eq!(rule_only(&f, CalibrationRule::MaxMean).unwrap(), 1.0);
        assert_eq!(rule_only(&f, CalibrationRule::MeanVarTradeoff(0.0)).unwrap(), 1.0);
        assert_eq!(rule_only(&f, CalibrationRule::MeanVarTradeoff(1.0)).unwrap(), 2.0);
        assert_eq!(rule_only(&f, CalibrationRule::MeanVarTradeoff(100.0)).unwrap(), 3.0);
        assert!(rule_only(&f, CalibrationRule::Satisficing(0.0)).is_err());
    }

    #[test]
    fn type7_quantile() {
        let v = [3.0f64, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&v, 1.0).unwrap(), 4.0);
        assert!((quantile(&v, 0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!((quantile(&v, 0.9).unwrap() - 3.7).abs() < 1e-12);
    }

    #[test]
    fn chi_square_radius_value() {
        let phi = PhiDivergence::<f64>::relative_entropy();
        // χ²₉ upper 5% point is 16.918977604620...
        let r = chi_square_radius(10, &phi, 0.05).unwrap();
        assert!((r - 16.918977604620 / 20.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn satisficing_on_toy() {
        let model = QuadraticModel::<f64>::new(1);
        let dist = EmpiricalDistribution::from_scalars(vec![0.0, 1.0, 2.0]).unwrap();
        let phi = PhiDivergence::relative_entropy();
        let opts = RobustOptions::default();
        let grid = [0.0, 0.5, 1.0, 2.0];
        // Empirical optimum is −1/3; the worst case falls as δ grows.
        assert_eq!(satisficing_delta(&model, &dist, &phi, &grid, -10.0, &opts).unwrap(), 2.0);
        assert_eq!(satisficing_delta(&model, &dist, &phi, &grid, -0.34, &opts).unwrap(), 0.0);
        assert!(matches!(
            satisficing_delta(&model, &dist, &phi, &grid, 0.0, &opts),
            Err(DroError::Calibration(_))
        ));
    }
}
