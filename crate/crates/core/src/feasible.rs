//! Feasible sets understood by the solvers, exposed as Euclidean projections.

use crate::error::{DroError, Result};
use crate::scalar::{norm, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum FeasibleSet<T> {
    Unconstrained,
    /// `lower ≤ x ≤ upper` componentwise and `Σ xᵢ = budget`.
    BoxBudget {
        lower: Vec<T>,
        upper: Vec<T>,
        budget: T,
    },
}

impl<T: Scalar> FeasibleSet<T> {
    pub fn box_budget(lower: Vec<T>, upper: Vec<T>, budget: T) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(DroError::InvalidArgument("box bounds differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(&l, &u)| !(l <= u)) {
            return Err(DroError::Infeasible("lower bound exceeds upper bound".into()));
        }
        let lo: T = lower.iter().copied().sum();
        let hi: T = upper.iter().copied().sum();
        if !(lo <= budget && budget <= hi) {
            return Err(DroError::Infeasible(format!(
                "budget {budget} outside [{lo}, {hi}] reachable within the box"
            )));
        }
        Ok(Self::BoxBudget {
            lower,
            upper,
            budget,
        })
    }

    pub fn is_unconstrained(&self) -> bool {
        matches!(self, Self::Unconstrained)
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Self::BoxBudget { lower, .. } if lower.len() != dim => Err(DroError::InvalidArgument(
                format!("feasible set has dimension {} but decision has {dim}", lower.len()),
            )),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        match self {
            Self::Unconstrained => x.iter().all(|v| v.is_finite()),
            Self::BoxBudget {
                lower,
                upper,
                budget,
            } => {
                let s: T = x.iter().copied().sum();
                (s - *budget).abs() <= tol * (T::one() + budget.abs())
                    && x.iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
            }
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, v: &[T]) -> Vec<T> {
        match self {
            Self::Unconstrained => v.to_vec(),
            Self::BoxBudget {
                lower,
                upper,
                budget,
            } => project_box_budget(v, lower, upper, *budget),
        }
    }

    /// Projection of `g` onto the tangent cone of the set at `x`.
    pub fn project_tangent(&self, x: &[T], g: &[T]) -> Vec<T> {
        match self {
            Self::Unconstrained => g.to_vec(),
            Self::BoxBudget { lower, upper, .. } => {
                let (lo, hi): (Vec<T>, Vec<T>) = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&xi, (&l, &u))| {
                        let at_lo = is_at(xi, l);
                        let at_hi = is_at(xi, u);
                        (
                            if at_lo { T::zero() } else { T::neg_infinity() },
                            if at_hi { T::zero() } else { T::infinity() },
                        )
                    })
                    .unzip();
                project_box_budget(g, &lo, &hi, T::zero())
            }
        }
    }

    /// Norm of the tangent-cone projection of `g`: zero exactly at
    /// first-order stationary points of a maximization over the set.
    pub fn stationarity(&self, x: &[T], g: &[T]) -> T {
        norm(&self.project_tangent(x, g))
    }

    pub(crate) fn at_bound(&self, x: &[T], i: usize) -> bool {
        match self {
            Self::Unconstrained => false,
            Self::BoxBudget { lower, upper, .. } => is_at(x[i], lower[i]) || is_at(x[i], upper[i]),
        }
    }
}

fn is_at<T: Scalar>(x: T, bound: T) -> bool {
    bound.is_finite() && (x - bound).abs() <= T::epsilon() * T::lit(4.0) * (T::one() + bound.abs())
}

fn clamp<T: Scalar>(v: T, lo: T, hi: T) -> T {
    v.max(lo).min(hi)
}

fn clamped_sum<T: Scalar>(v: &[T], lo: &[T], hi: &[T], lambda: T) -> T {
    v.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&vi, (&l, &u))| clamp(vi - lambda, l, u))
        .sum()
}

/// Projects `v` onto `{lo ≤ x ≤ hi, Σx = budget}` via the multiplier λ with
/// `xᵢ = clamp(vᵢ − λ, loᵢ, hiᵢ)`. λ is bracketed and bisected to 1e-12, then
/// recomputed in closed form on the identified free set.
pub(crate) fn project_box_budget<T: Scalar>(v: &[T], lo: &[T], hi: &[T], budget: T) -> Vec<T> {
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    let mut center = (v.iter().copied().sum::<T>() - budget) / T::from_usize_lossy(n);
    if !center.is_finite() {
        center = T::zero();
    }
    let scale = v.iter().fold(T::one(), |m, &x| m.max(x.abs()));
    let mut step = scale;
    let mut a = center - step;
    let mut b = center + step;
    // s(λ) is nonincreasing; need s(a) ≥ budget ≥ s(b).
    for _ in 0..2000 {
        if clamped_sum(v, lo, hi, a) >= budget {
            break;
        }
        step = step * T::lit(2.0);
        a = center - step;
    }
    step = scale;
    for _ in 0..2000 {
        if clamped_sum(v, lo, hi, b) <= budget {
            break;
        }
        step = step * T::lit(2.0);
        b = center + step;
    }
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(4.0));
    for _ in 0..300 {
        if b - a <= tol * (T::one() + a.abs().max(b.abs())) {
            break;
        }
        let mid = (a + b) / T::lit(2.0);
        if clamped_sum(v, lo, hi, mid) >= budget {
            a = mid;
        } else {
            b = mid;
        }
    }
    let lambda = (a + b) / T::lit(2.0);
    let at = |lambda: T| -> Vec<T> {
        v.iter()
            .zip(lo.iter().zip(hi))
            .map(|(&vi, (&l, &u))| clamp(vi - lambda, l, u))
            .collect()
    };
    let bisected = at(lambda);

    // Closed-form multiplier on the free set identified by bisection; kept
    // when it meets the budget at least as well.
    let free: Vec<bool> = (0..n)
        .map(|i| {
            let t = v[i] - lambda;
            t > lo[i] && t < hi[i]
        })
        .collect();
    let count = free.iter().filter(|&&f| f).count();
    if count == 0 {
        return bisected;
    }
    let fixed_sum: T = (0..n).filter(|&i| !free[i]).map(|i| bisected[i]).sum();
    let free_sum: T = (0..n).filter(|&i| free[i]).map(|i| v[i]).sum();
    let exact = at((free_sum + fixed_sum - budget) / T::from_usize_lossy(count));
    let miss = |x: &[T]| (x.iter().copied().sum::<T>() - budget).abs();
    if miss(&exact) <= miss(&bisected) {
        exact
    } else {
        bisected
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex_box(d: usize) -> FeasibleSet<f64> {
        FeasibleSet::box_budget(vec![-1.0; d], vec![1.0; d], 1.0).unwrap()
    }

    #[test]
    fn projection_of_feasible_point_is_identity() {
        let set = simplex_box(3);
        let x = [0.2, 0.3, 0.5];
        let p = set.project(&x);
        for (a, b) in p.iter().zip(x) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn projection_clips_and_restores_budget() {
        let set = simplex_box(3);
        let p = set.project(&[5.0, 0.0, 0.0]);
        assert!(set.contains(&p, 1e-12), "{p:?}");
        assert_eq!(p[0], 1.0);
        assert!((p[1] - 0.0).abs() < 1e-12 && (p[2] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn projection_matches_brute_force_on_grid() {
        // Minimize distance over a fine grid of the 2-d feasible segment.
        let set = FeasibleSet::box_budget(vec![-1.0, -1.0], vec![1.0, 1.0], 0.5).unwrap();
        for v in [[3.0, -2.0], [0.1, 0.2], [-4.0, -4.0], [0.9, 0.9]] {
            let p = set.project(&v);
            let best = (0..=20000)
                .map(|k| -0.5 + 1.5 * k as f64 / 20000.0)
                .map(|x0| [x0, 0.5 - x0])
                .filter(|x| x[1] >= -1.0 && x[1] <= 1.0)
                .min_by(|a, b| {
                    let da = (a[0] - v[0]).powi(2) + (a[1] - v[1]).powi(2);
                    let db = (b[0] - v[0]).powi(2) + (b[1] - v[1]).powi(2);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            assert!((p[0] - best[0]).abs() < 1e-4 && (p[1] - best[1]).abs() < 1e-4, "{v:?}: {p:?} vs {best:?}");
        }
    }

    #[test]
    fn single_asset_budget_is_a_point() {
        let set = simplex_box(1);
        assert_eq!(set.project(&[-7.0]), vec![1.0]);
        assert_eq!(set.stationarity(&[1.0], &[3.0]), 0.0);
    }

    #[test]
    fn tangent_cone_respects_active_bounds() {
        let set = simplex_box(3);
        let x = [1.0, 0.0, 0.0];
        // pushing asset 0 up is blocked; mass can only move within the budget
        let d = set.project_tangent(&x, &[1.0, 0.0, 0.0]);
        assert!(d.iter().all(|v| v.abs() < 1e-12), "{d:?}");
        let d = set.project_tangent(&x, &[0.0, 1.0, 0.0]);
        let want = [-1.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];
        assert!(d.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12), "{d:?}");
        let d = set.project_tangent(&[-1.0, 1.0, 1.0], &[1.0, 1.0, -1.0]);
        assert_eq!(d, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn infeasible_budget_is_rejected() {
        assert!(FeasibleSet::box_budget(vec![0.0, 0.0], vec![1.0, 1.0], 3.0).is_err());
    }
}
