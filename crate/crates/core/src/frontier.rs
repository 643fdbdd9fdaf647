//! Robust mean-variance frontiers: the bootstrap estimate, Monte Carlo
//! out-of-sample frontiers for known data-generating models, the frontier
//! under the model itself, and CSV/JSON storage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::PhiDivergence;
use crate::empirical::{bootstrap_resample, EmpiricalDistribution, RngSeed};
use crate::error::{DroError, Result};
use crate::reward_models::{model_reward_stats, RewardModel};
use crate::robust_solver::{robust_optimize, RobustOptions};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontierPoint<T> {
    pub delta: T,
    pub mu: T,
    pub sigma2: T,
    pub mu_sd: T,
    pub sigma2_sd: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontierMethod {
    Bootstrap,
    OosSimulation,
    TrueFrontier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierMeta {
    pub method: FrontierMethod,
    /// Replicates (bootstrap) or repeats (simulation) that entered the averages.
    pub k: usize,
    /// Data set size.
    pub n: usize,
    /// Replicates dropped after a solver failure.
    #[serde(default)]
    pub dropped: usize,
    #[serde(default)]
    pub divergence: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Set by [`normalize_frontier`]; normalized variances may be negative.
    #[serde(default)]
    pub normalized: bool,
    /// Free-form provenance, e.g. the resolved experiment configuration.
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl FrontierMeta {
    pub fn new(method: FrontierMethod, k: usize, n: usize) -> Self {
        Self {
            method,
            k,
            n,
            dropped: 0,
            divergence: String::new(),
            seed: None,
            normalized: false,
            extra: BTreeMap::new(),
        }
    }
}

/// Points `(δ, μ(δ), σ²(δ))` with strictly increasing δ and nonnegative σ².
#[derive(Clone, Debug, PartialEq)]
pub struct Frontier<T> {
    points: Vec<FrontierPoint<T>>,
    pub meta: FrontierMeta,
}

impl<T: Scalar> Frontier<T> {
    pub fn new(points: Vec<FrontierPoint<T>>, meta: FrontierMeta) -> Result<Self> {
        if points.is_empty() {
            return Err(DroError::InvalidArgument("frontier has no points".into()));
        }
        if points.windows(2).any(|w| !(w[0].delta < w[1].delta)) {
            return Err(DroError::InvalidArgument("frontier deltas must be strictly increasing".into()));
        }
        if let Some(p) = points.iter().find(|p| p.sigma2.is_nan() || (!meta.normalized && p.sigma2 < T::zero())) {
            return Err(DroError::InvalidArgument(format!(
                "negative or NaN variance {} at delta {}",
                p.sigma2, p.delta
            )));
        }
        Ok(Self { points, meta })
    }

    pub fn points(&self) -> &[FrontierPoint<T>] {
        &self.points
    }

    pub fn deltas(&self) -> Vec<T> {
        self.points.iter().map(|p| p.delta).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point_at(&self, delta: T) -> Option<&FrontierPoint<T>> {
        self.points.iter().find(|p| p.delta == delta)
    }
}

pub(crate) fn check_grid<T: Scalar>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(DroError::InvalidArgument("delta grid is empty".into()));
    }
    if grid.iter().any(|d| !(*d >= T::zero()) || !d.is_finite()) {
        return Err(DroError::InvalidArgument("delta grid values must be finite and nonnegative".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(DroError::InvalidArgument("delta grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Per-replicate `(mⱼ(δᵢ), vⱼ(δᵢ))` for every grid point.
type ReplicateMoments<T> = Vec<(T, T)>;

/// Keeps successful replicates in order; fails when more than 10% failed.
fn collect_replicates<T>(results: Vec<Result<ReplicateMoments<T>>>) -> Result<(Vec<ReplicateMoments<T>>, usize)> {
    let total = results.len();
    let mut kept = Vec::with_capacity(total);
    let mut first = None;
    for r in results {
        match r {
            Ok(m) => kept.push(m),
            Err(e) => {
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let dropped = total - kept.len();
    if dropped * 10 > total || kept.is_empty() {
        return Err(DroError::TooManyFailures {
            dropped,
            total,
            first: first.unwrap_or_default(),
        });
    }
    Ok((kept, dropped))
}

fn sample_sd<T: Scalar>(values: impl Iterator<Item = T> + Clone, mean: T, count: usize) -> T {
    if count < 2 {
        return T::zero();
    }
    let ss: T = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / T::from_usize_lossy(count - 1)).sqrt()
}

/// Bootstrap estimate of the out-of-sample frontier.
///
/// Replicate `j` resamples `dist` with seed `seed.derive(j)`, solves the
/// robust problem on the resample for every δ, and evaluates the mean `mⱼ`
/// and variance `vⱼ` of the reward under the original `dist`. Then
/// `μ = Σⱼ mⱼ / k` and `σ² = Σⱼ vⱼ / k + Σⱼ (mⱼ − μ)² / (k − 1)`, the second
/// term being zero for `k = 1`, with sums taken in replicate order. `mu_sd`
/// and `sigma2_sd` are the across-replicate standard deviations of `mⱼ` and
/// `vⱼ`. A replicate with any failed solve is dropped.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_frontier<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    delta_grid: &[T],
    k: usize,
    seed: RngSeed,
    opts: &RobustOptions<T>,
) -> Result<Frontier<T>> {
    check_grid(delta_grid)?;
    if k == 0 {
        return Err(DroError::InvalidArgument("need at least one bootstrap replicate".into()));
    }
    if !dist.is_uniform() {
        return Err(DroError::InvalidArgument("bootstrap frontier needs uniform weights".into()));
    }
    let results: Vec<Result<ReplicateMoments<T>>> = (0..k as u64)
        .into_par_iter()
        .map(|j| {
            let replicate = bootstrap_resample(dist, seed.derive(j))?;
            delta_grid
                .iter()
                .map(|&delta| {
                    let sol = robust_optimize(model, &replicate, delta, phi, opts)?;
                    Ok(model_reward_stats(model, &sol.x, dist))
                })
                .collect()
        })
        .collect();
    let (kept, dropped) = collect_replicates(results)?;
    let points = aggregate(&kept, delta_grid, Dispersion::AcrossReplicates);
    let mut meta = FrontierMeta::new(FrontierMethod::Bootstrap, kept.len(), dist.len());
    meta.dropped = dropped;
    meta.divergence = phi.kind().to_string();
    meta.seed = Some(seed.0);
    Frontier::new(points, meta)
}

enum Dispersion {
    /// Standard deviations of `mⱼ` and `vⱼ`.
    AcrossReplicates,
    /// Standard errors of `μ` and `σ²`.
    StandardError,
}

fn aggregate<T: Scalar>(kept: &[ReplicateMoments<T>], grid: &[T], dispersion: Dispersion) -> Vec<FrontierPoint<T>> {
    let k = kept.len();
    let kk = T::from_usize_lossy(k);
    grid.iter()
        .enumerate()
        .map(|(i, &delta)| {
            let ms = kept.iter().map(|r| r[i].0);
            let vs = kept.iter().map(|r| r[i].1);
            let mu = ms.clone().sum::<T>() / kk;
            let within = vs.clone().sum::<T>() / kk;
            let between = if k > 1 {
                ms.clone().map(|m| (m - mu) * (m - mu)).sum::<T>() / T::from_usize_lossy(k - 1)
            } else {
                T::zero()
            };
            let sigma2 = within + between;
            let (mu_sd, sigma2_sd) = match dispersion {
                Dispersion::AcrossReplicates => {
                    let v_mean = within;
                    (sample_sd(ms, mu, k), sample_sd(vs, v_mean, k))
                }
                Dispersion::StandardError => {
                    let scale = if k > 1 { kk / T::from_usize_lossy(k - 1) } else { T::zero() };
                    let parts = kept.iter().map(|r| r[i].1 + (r[i].0 - mu) * (r[i].0 - mu) * scale);
                    let root_k = kk.sqrt();
                    (sample_sd(ms, mu, k) / root_k, sample_sd(parts, sigma2, k) / root_k)
                }
            };
            FrontierPoint {
                delta,
                mu,
                sigma2,
                mu_sd,
                sigma2_sd,
            }
        })
        .collect()
}

/// A data-generating model that can be sampled.
pub trait DataGenerator<T: Scalar>: Send + Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<T>;

    fn sample_n(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// `n` i.i.d. draws as a uniform empirical distribution.
    fn draw(&self, n: usize, seed: RngSeed) -> Result<EmpiricalDistribution<T>> {
        EmpiricalDistribution::uniform(self.sample_n(n, &mut seed.rng()))
    }
}

/// Mixture of exponential distributions, drawn as a one dimensional outcome.
#[derive(Clone, Debug)]
pub struct ExponentialMixture {
    components: Vec<(f64, Exp<f64>)>,
}

impl ExponentialMixture {
    /// `means[i]` with probability `probs[i]`.
    pub fn new(means: &[f64], probs: &[f64]) -> Result<Self> {
        if means.len() != probs.len() || means.is_empty() {
            return Err(DroError::InvalidArgument("mixture means and probabilities differ in length".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(DroError::InvalidArgument("mixture probabilities must form a distribution".into()));
        }
        let mut cum = 0.0;
        let components = means
            .iter()
            .zip(probs)
            .map(|(&m, &p)| {
                cum += p;
                let exp = Exp::new(1.0 / m)
                    .map_err(|e| DroError::InvalidArgument(format!("exponential mean {m}: {e}")))?;
                Ok((cum, exp))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    /// Low/high demand regimes with means `low_mean`, `high_mean` and
    /// probability `low_prob` of the low regime.
    pub fn two_regime(low_mean: f64, high_mean: f64, low_prob: f64) -> Result<Self> {
        Self::new(&[low_mean, high_mean], &[low_prob, 1.0 - low_prob])
    }
}

impl<T: Scalar> DataGenerator<T> for ExponentialMixture {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        let u: f64 = rng.random();
        let (_, exp) = self
            .components
            .iter()
            .find(|(cum, _)| u < *cum)
            .unwrap_or_else(|| self.components.last().expect("nonempty mixture"));
        vec![T::lit(exp.sample(rng))]
    }
}

/// Draws uniformly from a fixed list of outcomes.
#[derive(Clone, Debug)]
pub struct DiscreteGenerator<T> {
    support: Vec<Vec<T>>,
}

impl<T: Scalar> DiscreteGenerator<T> {
    pub fn new(support: Vec<Vec<T>>) -> Result<Self> {
        if support.is_empty() {
            return Err(DroError::InvalidArgument("empty support".into()));
        }
        Ok(Self { support })
    }

    pub fn distribution(&self) -> EmpiricalDistribution<T> {
        EmpiricalDistribution::uniform(self.support.clone()).expect("support validated")
    }
}

impl<T: Scalar> DataGenerator<T> for DiscreteGenerator<T> {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        self.support[rng.random_range(0..self.support.len())].clone()
    }
}

/// How the out-of-sample reward of a fitted decision is measured.
#[derive(Clone, Copy, Debug)]
pub enum OosEvaluation<'a, T> {
    /// Reward at one fresh draw `Y_{n+1}` per repeat.
    FreshDraw,
    /// Exact mean and variance of the reward under a fixed reference sample
    /// standing in for the model. Estimates the same frontier with far less
    /// Monte Carlo noise.
    Reference(&'a EmpiricalDistribution<T>),
}

/// Monte Carlo out-of-sample frontier for data sets of size `n`.
///
/// Repeat `r` draws `n` outcomes from `dgm` using `seed.derive(r)`, solves the
/// robust problem for every δ, and measures the reward of the solution as set
/// by `evaluation` (with `FreshDraw`, the test outcome is the next draw of the
/// same stream). Aggregation is the law of total variance over repeats, which
/// for `FreshDraw` is the plain sample mean and unbiased variance. `mu_sd`
/// and `sigma2_sd` are standard errors.
#[allow(clippy::too_many_arguments)]
pub fn oos_frontier<T: Scalar, M: RewardModel<T> + ?Sized, G: DataGenerator<T> + ?Sized>(
    model: &M,
    dgm: &G,
    n: usize,
    repeats: usize,
    phi: &PhiDivergence<T>,
    delta_grid: &[T],
    seed: RngSeed,
    opts: &RobustOptions<T>,
    evaluation: OosEvaluation<'_, T>,
) -> Result<Frontier<T>> {
    check_grid(delta_grid)?;
    if repeats < 2 {
        return Err(DroError::InvalidArgument("need at least two repeats".into()));
    }
    if n == 0 {
        return Err(DroError::InvalidArgument("data sets need at least one point".into()));
    }
    let results: Vec<Result<ReplicateMoments<T>>> = (0..repeats as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.derive(r).rng();
            let data = EmpiricalDistribution::uniform(dgm.sample_n(n, &mut rng))?;
            let test = match evaluation {
                OosEvaluation::FreshDraw => Some(dgm.sample(&mut rng)),
                OosEvaluation::Reference(_) => None,
            };
            delta_grid
                .iter()
                .map(|&delta| {
                    let sol = robust_optimize(model, &data, delta, phi, opts)?;
                    Ok(match (&test, evaluation) {
                        (Some(y), _) => (model.reward(&sol.x, y), T::zero()),
                        (None, OosEvaluation::Reference(reference)) => model_reward_stats(model, &sol.x, reference),
                        (None, OosEvaluation::FreshDraw) => unreachable!("fresh draws always have a test point"),
                    })
                })
                .collect()
        })
        .collect();
    let (kept, dropped) = collect_replicates(results)?;
    let points = aggregate(&kept, delta_grid, Dispersion::StandardError);
    let mut meta = FrontierMeta::new(FrontierMethod::OosSimulation, kept.len(), n);
    meta.dropped = dropped;
    meta.divergence = phi.kind().to_string();
    meta.seed = Some(seed.0);
    meta.extra.insert(
        "evaluation".into(),
        match evaluation {
            OosEvaluation::FreshDraw => "fresh_draw".into(),
            OosEvaluation::Reference(d) => format!("reference_sample_{}", d.len()),
        },
    );
    Frontier::new(points, meta)
}

/// Frontier of the robust solutions fitted to `solve_dist` (a large sample
/// from the model), with mean and variance of the reward under `eval_dist`.
pub fn true_frontier<T: Scalar, M: RewardModel<T> + ?Sized>(
    model: &M,
    solve_dist: &EmpiricalDistribution<T>,
    eval_dist: &EmpiricalDistribution<T>,
    phi: &PhiDivergence<T>,
    delta_grid: &[T],
    opts: &RobustOptions<T>,
) -> Result<Frontier<T>> {
    check_grid(delta_grid)?;
    let points = delta_grid
        .iter()
        .map(|&delta| {
            let sol = robust_optimize(model, solve_dist, delta, phi, opts)?;
            let (mu, sigma2) = model_reward_stats(model, &sol.x, eval_dist);
            Ok(FrontierPoint {
                delta,
                mu,
                sigma2,
                mu_sd: T::zero(),
                sigma2_sd: T::zero(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut meta = FrontierMeta::new(FrontierMethod::TrueFrontier, 1, solve_dist.len());
    meta.divergence = phi.kind().to_string();
    Frontier::new(points, meta)
}

/// Affine rescaling of each axis sending the first point (smallest δ) to
/// `(1, 1)` and the last to `(0, 0)`. Standard deviations scale with the axis.
pub fn normalize_frontier<T: Scalar>(f: &Frontier<T>) -> Result<Frontier<T>> {
    let pts = f.points();
    if pts.len() < 2 {
        return Err(DroError::InvalidArgument("normalizing needs at least two points".into()));
    }
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    let mu_range = first.mu - last.mu;
    let s2_range = first.sigma2 - last.sigma2;
    if mu_range == T::zero() || s2_range == T::zero() || !mu_range.is_finite() || !s2_range.is_finite() {
        return Err(DroError::InvalidArgument(
            "frontier has zero range on an axis and cannot be normalized".into(),
        ));
    }
    let points = pts
        .iter()
        .map(|p| FrontierPoint {
            delta: p.delta,
            mu: (p.mu - last.mu) / mu_range,
            sigma2: (p.sigma2 - last.sigma2) / s2_range,
            mu_sd: p.mu_sd / mu_range.abs(),
            sigma2_sd: p.sigma2_sd / s2_range.abs(),
        })
        .collect();
    let mut meta = f.meta.clone();
    meta.normalized = true;
    Frontier::new(points, meta)
}

/// Largest distance over common δ between `f` and the reference frontier,
/// measuring the mean axis in units of `|μ_ref|` and the variance axis in
/// units of `σ²_ref` at the reference's first point.
pub fn frontier_gap<T: Scalar>(f: &Frontier<T>, reference: &Frontier<T>) -> Result<T> {
    let base = reference.points()[0];
    let (mu_scale, s2_scale) = (base.mu.abs(), base.sigma2.abs());
    if mu_scale == T::zero() || s2_scale == T::zero() {
        return Err(DroError::InvalidArgument("reference frontier has a zero axis scale".into()));
    }
    let mut gap = T::neg_infinity();
    for p in f.points() {
        let Some(q) = reference.point_at(p.delta) else {
            return Err(DroError::InvalidArgument(format!("reference frontier has no point at delta {}", p.delta)));
        };
        let dm = (p.mu - q.mu) / mu_scale;
        let ds = (p.sigma2 - q.sigma2) / s2_scale;
        gap = gap.max((dm * dm + ds * ds).sqrt());
    }
    Ok(gap)
}

const CSV_HEADER: [&str; 5] = ["delta", "mu", "sigma2", "mu_sd", "sigma2_sd"];

impl<T: Scalar> Frontier<T> {
    /// CSV text with header `delta,mu,sigma2,mu_sd,sigma2_sd`. Numbers use the
    /// shortest decimal that parses back to the same value.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for p in &self.points {
            w.write_record([p.delta, p.mu, p.sigma2, p.mu_sd, p.sigma2_sd].map(|v| v.to_string()))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn points_from_csv_str(text: &str) -> Result<Vec<FrontierPoint<T>>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| DroError::Format(e.to_string()))?;
        if header.iter().ne(CSV_HEADER) {
            return Err(DroError::Format(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
        }
        r.records()
            .enumerate()
            .map(|(row, rec)| {
                let rec = rec.map_err(|e| DroError::Format(e.to_string()))?;
                let cell = |col: usize| -> Result<T> {
                    rec.get(col)
                        .and_then(|s| s.parse::<T>().ok())
                        .ok_or_else(|| DroError::Format(format!("row {}, column {}: not a number", row + 2, CSV_HEADER[col])))
                };
                Ok(FrontierPoint {
                    delta: cell(0)?,
                    mu: cell(1)?,
                    sigma2: cell(2)?,
                    mu_sd: cell(3)?,
                    sigma2_sd: cell(4)?,
                })
            })
            .collect()
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("meta serializes") + "\n"
    }

    /// Writes `path` (CSV) and the metadata sidecar [`sidecar_path`]`(path)`.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        std::fs::write(sidecar_path(path), self.meta_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let points = Self::points_from_csv_str(&std::fs::read_to_string(path)?)?;
        let meta: FrontierMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)
            .map_err(|e| DroError::Format(format!("metadata: {e}")))?;
        Frontier::new(points, meta)
    }
}

/// `frontier.csv` → `frontier.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(delta: f64, mu: f64, sigma2: f64) -> FrontierPoint<f64> {
        FrontierPoint {
            delta,
            mu,
            sigma2,
            mu_sd: 0.0,
            sigma2_sd: 0.0,
        }
    }

    fn meta() -> FrontierMeta {
        FrontierMeta::new(FrontierMethod::Bootstrap, 2, 3)
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(Frontier::new(vec![pt(0.0, 1.0, 1.0), pt(0.0, 1.0, 1.0)], meta()).is_err());
        assert!(Frontier::new(vec![pt(0.0, 1.0, -1.0)], meta()).is_err());
        assert!(Frontier::<f64>::new(vec![], meta()).is_err());
    }

    #[test]
    fn normalize_examples() {
        let f = Frontier::new(vec![pt(0.0, 5.0, 9.0), pt(1.0, 3.0, 1.0)], meta()).unwrap();
        let g = normalize_frontier(&f).unwrap();
        assert_eq!((g.points()[0].mu, g.points()[0].sigma2), (1.0, 1.0));
        assert_eq!((g.points()[1].mu, g.points()[1].sigma2), (0.0, 0.0));
        assert_eq!(normalize_frontier(&g).unwrap().points(), g.points());

        let f = Frontier::new(vec![pt(0.0, 5.0, 9.0), pt(0.5, 4.9, 4.0), pt(1.0, 3.0, 1.0)], meta()).unwrap();
        let mid = normalize_frontier(&f).unwrap().points()[1];
        assert!(mid.mu > 0.0 && mid.mu < 1.0 && mid.sigma2 > 0.0 && mid.sigma2 < 1.0);

        let flat = Frontier::new(vec![pt(0.0, 5.0, 9.0), pt(1.0, 5.0, 1.0)], meta()).unwrap();
        assert!(normalize_frontier(&flat).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = Frontier::new(
            vec![pt(0.0, 0.1 + 0.2, 1.0 / 3.0), pt(1e-300, -2.5e10, f64::MIN_POSITIVE)],
            meta(),
        )
        .unwrap();
        let text = f.to_csv_string();
        assert!(text.starts_with("delta,mu,sigma2,mu_sd,sigma2_sd\n"));
        assert_eq!(Frontier::<f64>::points_from_csv_str(&text).unwrap(), f.points());
        assert!(Frontier::<f64>::points_from_csv_str("delta,mu\n1,2\n").is_err());
        assert!(Frontier::<f64>::points_from_csv_str("delta,mu,sigma2,mu_sd,sigma2_sd\n1,x,0,0,0\n").is_err());
    }

    #[test]
    fn mixture_sampling_is_reproducible() {
        let g = ExponentialMixture::two_regime(10.0, 100.0, 0.7).unwrap();
        let a: Vec<Vec<f64>> = g.sample_n(5, &mut RngSeed(3).rng());
        let b: Vec<Vec<f64>> = g.sample_n(5, &mut RngSeed(3).rng());
        assert_eq!(a, b);
        let big: Vec<Vec<f64>> = g.sample_n(200_000, &mut RngSeed(4).rng());
        let mean = big.iter().map(|y| y[0]).sum::<f64>() / big.len() as f64;
        assert!((mean - 37.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn too_many_failures_is_an_error() {
        let mut rs: Vec<Result<ReplicateMoments<f64>>> = (0..9).map(|_| Ok(vec![(0.0, 0.0)])).collect();
        rs.push(Err(DroError::Calibration("x".into())));
        assert_eq!(collect_replicates(rs).unwrap().1, 1);
        let mut rs: Vec<Result<ReplicateMoments<f64>>> = (0..8).map(|_| Ok(vec![(0.0, 0.0)])).collect();
        rs.push(Err(DroError::Calibration("x".into())));
        rs.push(Err(DroError::Calibration("y".into())));
        assert!(matches!(collect_replicates(rs), Err(DroError::TooManyFailures { dropped: 2, .. })));
    }
}
