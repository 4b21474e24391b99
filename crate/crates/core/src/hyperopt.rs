//! Bayesian hyperparameter search with a Gaussian-process surrogate and
//! expected-improvement acquisition.
//!
//! Points are kept in natural units (integers rounded, categoricals as an
//! index) and mapped to the unit cube for the surrogate. Learning-rate style
//! dimensions are searched on a log scale.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::linalg::{cholesky_solve, cholesky_with_jitter, solve_lower};
use crate::nn::Activation;
use crate::rng;
use crate::{Error, Result, Scalar};

/// Random candidates scored per acquisition step.
pub const ACQUISITION_CANDIDATES: usize = 2048;
/// Upper limit on the random initial design.
pub const MAX_INITIAL_DESIGN: usize = 10;

/// The six tuned settings of one neural simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub n_hidden_layers: usize,
    pub nodes_first: usize,
    pub nodes_rest: usize,
    pub activation: Activation,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.n_hidden_layers == 0
            || self.nodes_first == 0
            || self.nodes_rest == 0
            || self.batch_size == 0
        {
            return Err(Error::InvalidArgument(format!(
                "hyperparameter counts must be at least 1: {self:?}"
            )));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        if self.activation == Activation::Identity {
            return Err(Error::InvalidArgument(
                "hidden activation is relu or sigmoid".into(),
            ));
        }
        Ok(())
    }

    /// `[input, first, rest, …, rest, 1]`.
    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut sizes = vec![input_dim, self.nodes_first];
        sizes.extend(std::iter::repeat_n(
            self.nodes_rest,
            self.n_hidden_layers.saturating_sub(1),
        ));
        sizes.push(1);
        sizes
    }

    /// `prefix.key = value` lines.
    pub fn to_kv(&self, prefix: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{prefix}.hidden_layers = {}", self.n_hidden_layers);
        let _ = writeln!(out, "{prefix}.nodes_first = {}", self.nodes_first);
        let _ = writeln!(out, "{prefix}.nodes_rest = {}", self.nodes_rest);
        let _ = writeln!(out, "{prefix}.activation = {}", self.activation.as_str());
        let _ = writeln!(out, "{prefix}.batch_size = {}", self.batch_size);
        let _ = writeln!(out, "{prefix}.learning_rate = {:?}", self.learning_rate);
        out
    }

    /// Overrides fields from `prefix.*` entries of a key-value map.
    pub fn apply_kv(&mut self, prefix: &str, kv: &BTreeMap<String, String>) -> Result<()> {
        let get = |k: &str| kv.get(&format!("{prefix}.{k}"));
        let count = |k: &str, v: &String| {
            v.parse::<usize>().map_err(|_| {
                Error::InvalidArgument(format!("{prefix}.{k} expects a count, got `{v}`"))
            })
        };
        if let Some(v) = get("hidden_layers") {
            self.n_hidden_layers = count("hidden_layers", v)?;
        }
        if let Some(v) = get("nodes_first") {
            self.nodes_first = count("nodes_first", v)?;
        }
        if let Some(v) = get("nodes_rest") {
            self.nodes_rest = count("nodes_rest", v)?;
        }
        if let Some(v) = get("batch_size") {
            self.batch_size = count("batch_size", v)?;
        }
        if let Some(v) = get("activation") {
            self.activation = Activation::parse(v).ok_or_else(|| {
                Error::InvalidArgument(format!("{prefix}.activation: unknown `{v}`"))
            })?;
        }
        if let Some(v) = get("learning_rate") {
            self.learning_rate = v.parse().map_err(|_| {
                Error::InvalidArgument(format!("{prefix}.learning_rate: bad number `{v}`"))
            })?;
        }
        self.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dimension {
    Continuous { low: f64, high: f64, log: bool },
    Integer { low: i64, high: i64 },
    Categorical { n: usize },
}

impl Dimension {
    fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Dimension::Continuous {
                low,
                high,
                log: false,
            } => low + u * (high - low),
            Dimension::Continuous {
                low,
                high,
                log: true,
            } => (low.ln() + u * (high.ln() - low.ln())).exp(),
            Dimension::Integer { low, high } => (low as f64 + u * (high - low) as f64).round(),
            Dimension::Categorical { n } => (u * (n - 1) as f64).round(),
        }
    }

    fn to_unit(&self, x: f64) -> f64 {
        let span = |a: f64, b: f64| {
            if b > a {
                ((x - a) / (b - a)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        };
        match *self {
            Dimension::Continuous {
                low,
                high,
                log: false,
            } => span(low, high),
            Dimension::Continuous {
                low,
                high,
                log: true,
            } => {
                if high > low {
                    ((x.ln() - low.ln()) / (high.ln() - low.ln())).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            }
            Dimension::Integer { low, high } => span(low as f64, high as f64),
            Dimension::Categorical { n } => span(0.0, (n - 1) as f64),
        }
    }

    fn contains(&self, x: f64) -> bool {
        match *self {
            Dimension::Continuous { low, high, .. } => x >= low && x <= high,
            Dimension::Integer { low, high } => {
                x.fract() == 0.0 && x >= low as f64 && x <= high as f64
            }
            Dimension::Categorical { n } => x.fract() == 0.0 && x >= 0.0 && x < n as f64,
        }
    }
}

/// Box of named dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub dims: Vec<(String, Dimension)>,
}

impl SearchSpace {
    pub fn new(dims: Vec<(String, Dimension)>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument(
                "search space needs a dimension".into(),
            ));
        }
        for (name, d) in &dims {
            let ok = match *d {
                Dimension::Continuous { low, high, log } => {
                    low.is_finite() && high.is_finite() && low <= high && (!log || low > 0.0)
                }
                Dimension::Integer { low, high } => low <= high,
                Dimension::Categorical { n } => n >= 1,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "bad bounds for dimension `{name}`"
                )));
            }
        }
        Ok(Self { dims })
    }

    /// Default network search box: layers 1–8, nodes 16–512, relu/sigmoid,
    /// batch 2–128, learning rate 1e-4–1e-2 (log scale).
    pub fn network_default() -> Self {
        Self::network(1..=8, 16..=512, 2..=128, (1e-4, 1e-2))
    }

    pub fn network(
        layers: std::ops::RangeInclusive<i64>,
        nodes: std::ops::RangeInclusive<i64>,
        batch: std::ops::RangeInclusive<i64>,
        learning_rate: (f64, f64),
    ) -> Self {
        let int = |r: &std::ops::RangeInclusive<i64>| Dimension::Integer {
            low: *r.start(),
            high: *r.end(),
        };
        Self {
            dims: vec![
                ("hidden_layers".into(), int(&layers)),
                ("nodes_first".into(), int(&nodes)),
                ("nodes_rest".into(), int(&nodes)),
                ("activation".into(), Dimension::Categorical { n: 2 }),
                ("batch_size".into(), int(&batch)),
                (
                    "learning_rate".into(),
                    Dimension::Continuous {
                        low: learning_rate.0,
                        high: learning_rate.1,
                        log: true,
                    },
                ),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims.len()
            && self
                .dims
                .iter()
                .zip(point)
                .all(|((_, d), &x)| d.contains(x))
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(u)
            .map(|((_, d), &x)| d.from_unit(x))
            .collect()
    }

    pub fn to_unit(&self, point: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(point)
            .map(|((_, d), &x)| d.to_unit(x))
            .collect()
    }

    fn categorical_dims(&self) -> Vec<(usize, usize)> {
        self.dims
            .iter()
            .enumerate()
            .filter_map(|(i, (_, d))| match d {
                Dimension::Categorical { n } => Some((i, *n)),
                _ => None,
            })
            .collect()
    }
}

/// Decodes a point of [`SearchSpace::network`] into hyperparameters.
pub fn hyperparameters_from_point(point: &[f64]) -> Hyperparameters {
    Hyperparameters {
        n_hidden_layers: point[0] as usize,
        nodes_first: point[1] as usize,
        nodes_rest: point[2] as usize,
        activation: if point[3] == 0.0 {
            Activation::Relu
        } else {
            Activation::Sigmoid
        },
        batch_size: point[4] as usize,
        learning_rate: point[5],
    }
}

pub fn hyperparameters_to_point(h: &Hyperparameters) -> Vec<f64> {
    vec![
        h.n_hidden_layers as f64,
        h.nodes_first as f64,
        h.nodes_rest as f64,
        if h.activation == Activation::Sigmoid {
            1.0
        } else {
            0.0
        },
        h.batch_size as f64,
        h.learning_rate,
    ]
}

/// Squared-exponential GP over the unit cube with a constant prior mean
/// equal to the mean observed loss.
#[derive(Debug, Clone)]
pub struct GpSurrogate<T> {
    points: Vec<Vec<T>>,
    losses: Vec<T>,
    pub length_scale: T,
    pub signal_variance: T,
    pub noise_variance: T,
    pub prior_mean: T,
    pub jitter: T,
    chol: Array2<T>,
    weights: Array1<T>,
}

const LENGTH_SCALE_GRID: [f64; 10] = [0.03, 0.05, 0.08, 0.12, 0.2, 0.3, 0.5, 0.8, 1.3, 2.0];
const SIGNAL_VARIANCE_GRID: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

impl<T: Scalar> GpSurrogate<T> {
    /// Conditions a GP with fixed kernel settings on the observations.
    pub fn with_hyperparameters(
        points: Vec<Vec<T>>,
        losses: Vec<T>,
        length_scale: T,
        signal_variance: T,
        noise_variance: T,
    ) -> Result<Self> {
        let n = losses.len().max(1);
        let prior_mean = losses.iter().copied().sum::<T>() / T::of(n as f64);
        Self::with_prior(
            points,
            losses,
            length_scale,
            signal_variance,
            noise_variance,
            prior_mean,
        )
    }

    /// Like [`GpSurrogate::with_hyperparameters`] with an explicit prior mean.
    pub fn with_prior(
        points: Vec<Vec<T>>,
        losses: Vec<T>,
        length_scale: T,
        signal_variance: T,
        noise_variance: T,
        prior_mean: T,
    ) -> Result<Self> {
        let n = points.len();
        if n == 0 || losses.len() != n {
            return Err(Error::InvalidArgument(
                "GP needs matching, nonempty points and losses".into(),
            ));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::Dimension {
                expected: d,
                found: points.iter().map(Vec::len).find(|&l| l != d).unwrap_or(d),
            });
        }
        let two_l2 = T::of(2.0) * length_scale * length_scale;
        let mut k = Array2::<T>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = signal_variance * (-sq_dist(&points[i], &points[j]) / two_l2).exp();
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
            k[[i, i]] = k[[i, i]] + noise_variance;
        }
        let start = (signal_variance * T::of(1e-10)).max(T::of(1e-12));
        let (chol, jitter) = cholesky_with_jitter(k.view(), start)
            .ok_or_else(|| Error::Numeric("GP kernel matrix could not be factored".into()))?;
        let resid = Array1::from_iter(losses.iter().map(|&y| y - prior_mean));
        let weights = cholesky_solve(chol.view(), resid.view());
        Ok(Self {
            points,
            losses,
            length_scale,
            signal_variance,
            noise_variance,
            prior_mean,
            jitter,
            chol,
            weights,
        })
    }

    /// Log marginal likelihood of the observations under the current kernel.
    pub fn log_marginal_likelihood(&self) -> T {
        let n = self.losses.len();
        let fit: T = self
            .losses
            .iter()
            .zip(self.weights.iter())
            .map(|(&y, &w)| (y - self.prior_mean) * w)
            .sum();
        let log_det: T = (0..n).map(|i| self.chol[[i, i]].ln()).sum();
        -T::of(0.5) * fit - log_det - T::of(0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn losses(&self) -> &[T] {
        &self.losses
    }

    /// Posterior mean and (latent, clamped non-negative) variance at `x`.
    pub fn posterior(&self, x: &[T]) -> (T, T) {
        let two_l2 = T::of(2.0) * self.length_scale * self.length_scale;
        let kx = Array1::from_iter(
            self.points
                .iter()
                .map(|p| self.signal_variance * (-sq_dist(p, x) / two_l2).exp()),
        );
        let mean = self.prior_mean + kx.dot(&self.weights);
        let v = solve_lower(self.chol.view(), kx.view());
        let var = (self.signal_variance - v.dot(&v)).max(T::zero());
        (mean, var)
    }
}

/// Fits a GP to the observations, choosing the length scale and signal
/// variance on a log grid by marginal likelihood. Noise variance is fixed at
/// `1e-6·var(y) + 1e-12`. Identical losses give a flat surrogate.
pub fn gp_fit<T: Scalar>(points: &[Vec<T>], losses: &[T]) -> Result<GpSurrogate<T>> {
    let n = points.len();
    if n < 2 || losses.len() != n {
        return Err(Error::InvalidArgument(
            "GP fit needs at least two observations".into(),
        ));
    }
    if !points.iter().any(|p| p != &points[0]) {
        return Err(Error::InvalidArgument(
            "GP fit needs at least two distinct points".into(),
        ));
    }
    let mean = losses.iter().copied().sum::<T>() / T::of(n as f64);
    let var = losses.iter().map(|&y| (y - mean) * (y - mean)).sum::<T>() / T::of(n as f64);
    let noise = T::of(1e-6) * var + T::of(1e-12);
    if var == T::zero() {
        return GpSurrogate::with_hyperparameters(
            points.to_vec(),
            losses.to_vec(),
            T::one(),
            T::zero(),
            noise,
        );
    }
    let mut best: Option<(T, GpSurrogate<T>)> = None;
    for &l in &LENGTH_SCALE_GRID {
        for &s in &SIGNAL_VARIANCE_GRID {
            let Ok(gp) = GpSurrogate::with_hyperparameters(
                points.to_vec(),
                losses.to_vec(),
                T::of(l),
                T::of(s) * var,
                noise,
            ) else {
                continue;
            };
            let lml = gp.log_marginal_likelihood();
            if lml.is_finite() && best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, gp));
            }
        }
    }
    best.map(|(_, gp)| gp)
        .ok_or_else(|| Error::Numeric("no GP kernel setting could be fitted".into()))
}

pub fn gp_posterior<T: Scalar>(s: &GpSurrogate<T>, x: &[T]) -> (T, T) {
    s.posterior(x)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement below `best` for a Gaussian posterior.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    let gap = best - mean;
    if sigma == 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub loss: f64,
    /// The objective failed and `loss` is the recorded penalty.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: Vec<f64>,
    pub best_loss: f64,
    pub trace: Vec<TraceEntry>,
}

impl TuneResult {
    /// CSV with one row per evaluation: `iteration,<dims…>,loss,failed`.
    pub fn trace_csv(&self, space: &SearchSpace) -> String {
        let mut out = String::from("iteration");
        for (name, _) in &space.dims {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",loss,failed\n");
        for e in &self.trace {
            let _ = write!(out, "{}", e.iteration);
            for x in &e.point {
                let _ = write!(out, ",{x:?}");
            }
            let _ = writeln!(out, ",{:?},{}", e.loss, e.failed);
        }
        out
    }
}

/// `max(2, min(10, ⌈budget/3⌉))`.
pub fn initial_design_size(budget: usize) -> usize {
    budget.div_ceil(3).clamp(2, MAX_INITIAL_DESIGN)
}

/// Minimizes `objective` over `space` with `budget` evaluations: a random
/// initial design, then GP fit + EI maximization over seeded random
/// candidates (categorical dimensions enumerated). A failed evaluation is
/// recorded as ten times the worst loss so far.
pub fn tune<F, E>(
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    mut objective: F,
) -> Result<TuneResult>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
{
    let init = initial_design_size(budget);
    if budget < init {
        return Err(Error::InvalidArgument(format!(
            "tuning budget {budget} is below the initial design size {init}"
        )));
    }
    let mut rng = rng::stream_rng(seed, rng::stream::TUNING);
    let d = space.len();
    let mut trace: Vec<TraceEntry> = Vec::with_capacity(budget);
    let mut evaluate = |iteration: usize, point: Vec<f64>, trace: &mut Vec<TraceEntry>| {
        let result = objective(&point).ok().filter(|l| l.is_finite());
        let (loss, failed) = match result {
            Some(l) => (l, false),
            None => {
                let worst = trace
                    .iter()
                    .map(|e| e.loss)
                    .fold(f64::NEG_INFINITY, f64::max);
                let penalty = if worst.is_finite() {
                    if worst > 0.0 {
                        worst * 10.0
                    } else {
                        worst.abs() * 10.0 + 1.0
                    }
                } else {
                    1e10
                };
                (penalty, true)
            }
        };
        trace.push(TraceEntry {
            iteration,
            point,
            loss,
            failed,
        });
    };
    for i in 0..init {
        let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        evaluate(i, space.from_unit(&u), &mut trace);
    }
    let categorical = space.categorical_dims();
    for i in init..budget {
        let xs: Vec<Vec<f64>> = trace.iter().map(|e| space.to_unit(&e.point)).collect();
        let ys: Vec<f64> = trace.iter().map(|e| e.loss).collect();
        let best_loss = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let next = match gp_fit(&xs, &ys) {
            Ok(gp) => {
                let mut candidates = Vec::with_capacity(ACQUISITION_CANDIDATES);
                for _ in 0..ACQUISITION_CANDIDATES {
                    let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                    let base = space.from_unit(&u);
                    candidates.extend(enumerate_categories(&base, &categorical));
                }
                let scores: Vec<f64> = candidates
                    .par_iter()
                    .map(|c| {
                        let (m, v) = gp.posterior(&space.to_unit(c));
                        expected_improvement(m, v, best_loss)
                    })
                    .collect();
                let mut best_idx = 0;
                for (j, &s) in scores.iter().enumerate() {
                    if s > scores[best_idx] {
                        best_idx = j;
                    }
                }
                candidates.swap_remove(best_idx)
            }
            // all evaluated points coincide; keep exploring at random
            Err(_) => {
                let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                space.from_unit(&u)
            }
        };
        evaluate(i, next, &mut trace);
    }
    let best_entry = trace
        .iter()
        .fold(&trace[0], |b, e| if e.loss < b.loss { e } else { b });
    Ok(TuneResult {
        best: best_entry.point.clone(),
        best_loss: best_entry.loss,
        trace,
    })
}

fn enumerate_categories(base: &[f64], categorical: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut out = vec![base.to_vec()];
    for &(dim, n) in categorical {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |c| {
                    let mut q = p.clone();
                    q[dim] = c as f64;
                    q
                })
            })
            .collect();
    }
    out
}

/// [`tune`] over network hyperparameters.
pub fn tune_hyperparameters<F>(
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    mut objective: F,
) -> Result<(Hyperparameters, TuneResult)>
where
    F: FnMut(&Hyperparameters) -> Result<f64>,
{
    let result = tune(space, budget, seed, |p| {
        objective(&hyperparameters_from_point(p))
    })?;
    Ok((hyperparameters_from_point(&result.best), result))
}
