//! Maximization of smooth concave functions over a [`FeasibleSet`].
//!
//! Unconstrained problems use damped Newton. Box+budget problems take a
//! reduced Newton step on the coordinates not pinned at a bound, falling back
//! to a projected gradient step when that fails to make progress. One
//! dimensional unconstrained problems use a bracketed Newton/bisection on the
//! derivative, which also copes with kinks.

use crate::error::{DroError, Result};
use crate::feasible::FeasibleSet;
use crate::linalg::Matrix;
use crate::scalar::{dot, norm, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<T> {
    /// Stop once the projected gradient norm is at most `tolerance·(1 + ‖x‖)`.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::default_tolerance(),
            max_iterations: 10_000,
        }
    }
}

pub struct Evaluation<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub hessian: Option<Matrix<T>>,
}

pub trait ConcaveObjective<T: Scalar> {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[T], with_hessian: bool) -> Result<Evaluation<T>>;
}

#[derive(Clone, Debug)]
pub struct Maximum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    /// Projected gradient norm at `x`.
    pub stationarity: T,
}

fn not_converged<T: Scalar>(iterations: usize, residual: T, x: &[T], trace: &[T]) -> DroError {
    DroError::NotConverged {
        iterations,
        residual: residual.to_f64_lossy(),
        last_iterate: x.iter().map(|v| v.to_f64_lossy()).collect(),
        trace: trace.iter().map(|v| v.to_f64_lossy()).collect(),
    }
}

fn check_finite<T: Scalar>(e: &Evaluation<T>) -> Result<()> {
    if !e.value.is_finite() || e.gradient.iter().any(|g| !g.is_finite()) {
        return Err(DroError::Overflow("objective or gradient is not finite".into()));
    }
    Ok(())
}

pub fn maximize<T: Scalar, O: ConcaveObjective<T> + ?Sized>(
    obj: &O,
    set: &FeasibleSet<T>,
    x0: &[T],
    opts: &SolverOptions<T>,
) -> Result<Maximum<T>> {
    let m = obj.dim();
    if x0.len() != m {
        return Err(DroError::InvalidArgument(format!(
            "starting point has length {} but objective has dimension {m}",
            x0.len()
        )));
    }
    set.check_dim(m)?;
    if m == 1 && set.is_unconstrained() {
        return maximize_1d(obj, x0[0], opts);
    }
    maximize_nd(obj, set, x0, opts)
}

/// Armijo sufficient increase, with an allowance for steps so small that
/// the change in value is below rounding.
fn accept<T: Scalar>(f_old: T, f_new: T, predicted: T) -> bool {
    if !f_new.is_finite() {
        return false;
    }
    let noise = T::epsilon() * T::lit(16.0) * (T::one() + f_old.abs());
    f_new - f_old >= T::lit(1e-4) * predicted || (predicted <= noise && f_new >= f_old - noise)
}

fn maximize_nd<T: Scalar, O: ConcaveObjective<T> + ?Sized>(
    obj: &O,
    set: &FeasibleSet<T>,
    x0: &[T],
    opts: &SolverOptions<T>,
) -> Result<Maximum<T>> {
    let m = x0.len();
    let mut x = set.project(x0);
    let mut eval = obj.evaluate(&x, true)?;
    check_finite(&eval)?;
    let mut trace = Vec::new();
    let mut grad_step = T::zero();
    for iter in 0..opts.max_iterations {
        let stat = set.stationarity(&x, &eval.gradient);
        trace.push(stat);
        if stat <= opts.tolerance * (T::one() + norm(&x)) {
            return Ok(Maximum {
                x,
                value: eval.value,
                iterations: iter,
                stationarity: stat,
            });
        }
        let g = &eval.gradient;
        let h = eval.hessian.as_ref().expect("hessian requested");
        if grad_step <= T::zero() {
            grad_step = T::one() / h.max_abs().max(T::epsilon()) / T::from_usize_lossy(m);
        }

        let mut next: Option<(Vec<T>, Evaluation<T>)> = None;
        if let Some(d) = newton_direction(h, g, &x, set) {
            let mut t = T::one();
            for _ in 0..60 {
                let step: Vec<T> = x.iter().zip(&d).map(|(&a, &b)| a + t * b).collect();
                let cand = set.project(&step);
                let delta: Vec<T> = cand.iter().zip(&x).map(|(&a, &b)| a - b).collect();
                let predicted = dot(g, &delta);
                if predicted <= T::zero() && norm(&delta) > T::zero() {
                    break;
                }
                if let Ok(e) = obj.evaluate(&cand, true) {
                    if check_finite(&e).is_ok() && accept(eval.value, e.value, predicted) {
                        next = Some((cand, e));
                        break;
                    }
                }
                t = t / T::lit(2.0);
            }
        }
        if next.is_none() {
            let mut t = grad_step * T::lit(4.0);
            for _ in 0..100 {
                let step: Vec<T> = x.iter().zip(g).map(|(&a, &b)| a + t * b).collect();
                let cand = set.project(&step);
                let delta: Vec<T> = cand.iter().zip(&x).map(|(&a, &b)| a - b).collect();
                let predicted = dot(g, &delta);
                if predicted > T::zero() {
                    if let Ok(e) = obj.evaluate(&cand, true) {
                        if check_finite(&e).is_ok() && accept(eval.value, e.value, predicted) {
                            grad_step = t;
                            next = Some((cand, e));
                            break;
                        }
                    }
                }
                t = t / T::lit(2.0);
            }
        }
        match next {
            Some((cand, e)) => {
                let moved = cand.iter().zip(&x).any(|(a, b)| a != b);
                if !moved {
                    return Err(not_converged(iter, stat, &x, &trace));
                }
                x = cand;
                eval = e;
            }
            None => return Err(not_converged(iter, stat, &x, &trace)),
        }
    }
    let stat = set.stationarity(&x, &eval.gradient);
    Err(not_converged(opts.max_iterations, stat, &x, &trace))
}

/// Solves `(−H_FF + μI) d_F = g_F` on the free coordinates, keeping the budget
/// when there is one. Returns `None` when no useful Newton step exists.
fn newton_direction<T: Scalar>(
    h: &Matrix<T>,
    g: &[T],
    x: &[T],
    set: &FeasibleSet<T>,
) -> Option<Vec<T>> {
    let m = x.len();
    // Coordinates pinned at a bound whose gradient pushes outward stay fixed.
    let probe = set.project_tangent(x, g);
    let free: Vec<usize> = (0..m)
        .filter(|&i| !set.at_bound(x, i) || probe[i] != T::zero())
        .collect();
    let budget = matches!(set, FeasibleSet::BoxBudget { .. });
    if free.is_empty() || (budget && free.len() < 2) {
        return None;
    }
    let neg_h = h.select(&free, &free).scaled(-T::one()).symmetrized();
    let gf: Vec<T> = free.iter().map(|&i| g[i]).collect();
    let scale = neg_h.max_abs().max(T::one());
    let mut mu = T::zero();
    let chol = loop {
        let mut reg = neg_h.clone();
        for i in 0..free.len() {
            reg[(i, i)] = reg[(i, i)] + mu;
        }
        if let Some(l) = reg.cholesky() {
            break (reg, l);
        }
        mu = if mu == T::zero() { scale * T::lit(1e-10) } else { mu * T::lit(10.0) };
        if mu > scale * T::lit(1e10) {
            return None;
        }
    };
    let (reg, _) = chol;
    let dg = reg.solve(&gf, "reduced Newton system").ok()?;
    let df = if budget {
        let ones = vec![T::one(); free.len()];
        let d1 = reg.solve(&ones, "reduced Newton system").ok()?;
        let denom: T = d1.iter().copied().sum();
        if !(denom > T::zero()) {
            return None;
        }
        let nu = dg.iter().copied().sum::<T>() / denom;
        dg.iter().zip(&d1).map(|(&a, &b)| a - nu * b).collect::<Vec<T>>()
    } else {
        dg
    };
    let mut d = vec![T::zero(); m];
    for (k, &i) in free.iter().enumerate() {
        d[i] = df[k];
    }
    if dot(g, &d) > T::zero() && d.iter().all(|v| v.is_finite()) {
        Some(d)
    } else {
        None
    }
}

/// Bracketing Newton on `f′` for one-dimensional unconstrained problems.
fn maximize_1d<T: Scalar, O: ConcaveObjective<T> + ?Sized>(
    obj: &O,
    x0: T,
    opts: &SolverOptions<T>,
) -> Result<Maximum<T>> {
    let two = T::lit(2.0);
    let eval_at = |x: T| -> Result<(T, T, T)> {
        let e = obj.evaluate(&[x], true)?;
        check_finite(&e)?;
        let h = e.hessian.map(|h| h[(0, 0)]).unwrap_or_else(T::nan);
        Ok((e.value, e.gradient[0], h))
    };
    let tol = |x: T| opts.tolerance * (T::one() + x.abs());
    let mut trace = Vec::new();
    let mut x = x0;
    let (mut f, mut g, mut h) = eval_at(x)?;
    let mut iterations = 0;
    let done = |x: T, f: T, g: T, it: usize| Maximum {
        x: vec![x],
        value: f,
        iterations: it,
        stationarity: g.abs(),
    };
    if g.abs() <= tol(x) {
        return Ok(done(x, f, g, 0));
    }

    // Expand until the derivative changes sign: lo has g > 0, hi has g < 0.
    let base = T::lit(1e-3) * (T::one() + x.abs());
    let mut step = if h < T::zero() {
        (g / -h).abs().max(base).min(base * T::lit(1e6))
    } else {
        base
    };
    let dir = g.signum();
    let (mut lo, mut hi);
    loop {
        iterations += 1;
        if iterations > opts.max_iterations.min(2000) {
            return Err(not_converged(iterations, g.abs(), &[x], &trace));
        }
        let cand = x + dir * step;
        let (fc, gc, hc) = eval_at(cand)?;
        trace.push(gc.abs());
        if gc.abs() <= tol(cand) {
            return Ok(done(cand, fc, gc, iterations));
        }
        if gc.signum() != dir {
            if dir > T::zero() {
                lo = x;
                hi = cand;
            } else {
                lo = cand;
                hi = x;
            }
            break;
        }
        x = cand;
        f = fc;
        g = gc;
        h = hc;
        step = step * two;
    }

    // Safeguarded Newton inside [lo, hi], from the better endpoint.
    let mut width_before = hi - lo;
    loop {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(not_converged(iterations, g.abs(), &[x], &trace));
        }
        let newton = if h < T::zero() { x - g / h } else { T::nan() };
        let cand = if newton > lo && newton < hi && (hi - lo) <= width_before * T::lit(0.75) {
            newton
        } else {
            (lo + hi) / two
        };
        width_before = hi - lo;
        if !(cand > lo && cand < hi) {
            // Bracket has collapsed to adjacent floats: a kink or a rounding floor.
            return Ok(done(x, f, g, iterations));
        }
        let (fc, gc, hc) = eval_at(cand)?;
        trace.push(gc.abs());
        x = cand;
        f = fc;
        g = gc;
        h = hc;
        if g.abs() <= tol(x) {
            return Ok(done(x, f, g, iterations));
        }
        if g > T::zero() {
            lo = x;
        } else {
            hi = x;
        }
    }
}
