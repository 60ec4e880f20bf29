//! Bayesian optimisation with a Gaussian-process surrogate.
//!
//! Points live in natural units (learning rate, depth, ...) for the objective
//! and in the unit cube for the surrogate. The GP uses an ARD Matérn-5/2
//! kernel on standardised objectives; its hyper-parameters maximise the log
//! marginal likelihood by multi-start compass search. New points maximise
//! expected improvement over a rotated Halton set plus perturbations of the
//! incumbent.

use std::time::Instant;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::gbtree::HyperParams;

/// Lower bound on the standardised observation-noise variance.
pub const NOISE_FLOOR: f64 = 1e-6;
const MAX_JITTER: f64 = 1e-2;

#[derive(Debug, Error, PartialEq)]
pub enum TunerError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("budget {budget} must exceed the {init} initial trials, and init must be at least 2")]
    InvalidBudget { budget: usize, init: usize },
    #[error("surrogate needs at least {needed} observations, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("kernel matrix is singular even with jitter {MAX_JITTER}")]
    Singular,
    #[error("point has {got} coordinates, space has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("unknown hyper-parameter {0}")]
    UnknownParameter(String),
    #[error("every trial failed")]
    AllTrialsFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
    pub integer: bool,
}

impl Dimension {
    pub fn linear(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            scale: Scale::Linear,
            integer: false,
        }
    }

    pub fn log(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            scale: Scale::Log,
            ..Self::linear(name, lower, upper)
        }
    }

    pub fn integer(name: &str, lower: i64, upper: i64) -> Self {
        Self {
            integer: true,
            ..Self::linear(name, lower as f64, upper as f64)
        }
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        let u = match self.scale {
            Scale::Linear => (x - self.lower) / (self.upper - self.lower),
            Scale::Log => (x.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln()),
        };
        u.clamp(0.0, 1.0)
    }

    /// Inverse of [`to_unit`](Self::to_unit), rounding integer dimensions.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let x = match self.scale {
            Scale::Linear => self.lower + u * (self.upper - self.lower),
            Scale::Log => (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp(),
        };
        let x = x.clamp(self.lower, self.upper);
        if self.integer {
            x.round()
        } else {
            x
        }
    }
}

/// Bounded search domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub dims: Vec<Dimension>,
}

impl Default for ParamSpace {
    /// The booster's tuned dimensions.
    fn default() -> Self {
        Self {
            dims: vec![
                Dimension::log("learning_rate", 1e-3, 0.3),
                Dimension::integer("max_depth", 2, 10),
                Dimension::integer("n_estimators", 100, 1000),
                Dimension::log("min_child_weight", 0.5, 8.0),
                Dimension::linear("subsample", 0.5, 1.0),
                Dimension::linear("colsample_bytree", 0.5, 1.0),
                Dimension::linear("gamma", 0.0, 2.0),
            ],
        }
    }
}

impl ParamSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, TunerError> {
        if dims.is_empty() || dims.len() > PRIMES.len() {
            return Err(TunerError::InvalidSpace(format!(
                "{} dimensions (1 to {} supported)",
                dims.len(),
                PRIMES.len()
            )));
        }
        for d in &dims {
            if !(d.lower < d.upper) || !d.lower.is_finite() || !d.upper.is_finite() {
                return Err(TunerError::InvalidSpace(format!(
                    "{}: bounds {} .. {}",
                    d.name, d.lower, d.upper
                )));
            }
            if d.scale == Scale::Log && d.lower <= 0.0 {
                return Err(TunerError::InvalidSpace(format!(
                    "{}: log scale needs positive bounds",
                    d.name
                )));
            }
        }
        Ok(Self { dims })
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    fn check(&self, x: &[f64]) -> Result<(), TunerError> {
        if x.len() != self.dims.len() {
            return Err(TunerError::Dimension {
                expected: self.dims.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(x).map(|(d, &v)| d.to_unit(v)).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(u).map(|(d, &v)| d.from_unit(v)).collect()
    }

    pub fn named(&self, x: &[f64]) -> IndexMap<String, f64> {
        self.dims.iter().zip(x).map(|(d, &v)| (d.name.clone(), v)).collect()
    }

    /// Reads this space's coordinates out of `params`.
    pub fn point_of(&self, params: &HyperParams) -> Result<Vec<f64>, TunerError> {
        self.dims
            .iter()
            .map(|d| {
                Ok(match d.name.as_str() {
                    "learning_rate" => params.learning_rate,
                    "max_depth" => params.max_depth as f64,
                    "n_estimators" => params.n_estimators as f64,
                    "min_child_weight" => params.min_child_weight,
                    "subsample" => params.subsample,
                    "colsample_bytree" => params.colsample_bytree,
                    "gamma" => params.gamma,
                    "lambda" => params.lambda,
                    other => return Err(TunerError::UnknownParameter(other.into())),
                })
            })
            .collect()
    }

    /// `base` with this space's coordinates replaced by `x`.
    pub fn apply(&self, base: &HyperParams, x: &[f64]) -> Result<HyperParams, TunerError> {
        self.check(x)?;
        let mut p = base.clone();
        for (d, &v) in self.dims.iter().zip(x) {
            match d.name.as_str() {
                "learning_rate" => p.learning_rate = v,
                "max_depth" => p.max_depth = v.round() as usize,
                "n_estimators" => p.n_estimators = v.round() as usize,
                "min_child_weight" => p.min_child_weight = v,
                "subsample" => p.subsample = v,
                "colsample_bytree" => p.colsample_bytree = v,
                "gamma" => p.gamma = v,
                "lambda" => p.lambda = v,
                other => return Err(TunerError::UnknownParameter(other.into())),
            }
        }
        Ok(p)
    }
}

/// Matérn-5/2 correlation at scaled distance `r`.
pub fn matern52(r: f64) -> f64 {
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Kernel hyper-parameters, all on a log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub log_lengths: Vec<f64>,
    pub log_signal_var: f64,
    pub log_noise_var: f64,
}

impl GpHyper {
    pub fn isotropic(dim: usize, length: f64, signal_var: f64, noise_var: f64) -> Self {
        Self {
            log_lengths: vec![length.ln(); dim],
            log_signal_var: signal_var.ln(),
            log_noise_var: noise_var.max(NOISE_FLOOR).ln(),
        }
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = self.log_lengths.clone();
        v.push(self.log_signal_var);
        v.push(self.log_noise_var);
        v
    }

    fn from_vec(v: &[f64]) -> Self {
        let d = v.len() - 2;
        Self {
            log_lengths: v[..d].to_vec(),
            log_signal_var: v[d],
            log_noise_var: v[d + 1],
        }
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.log_lengths)
            .map(|((x, y), l)| {
                let d = (x - y) / l.exp();
                d * d
            })
            .sum();
        self.log_signal_var.exp() * matern52(r2.sqrt())
    }
}

// search box for the log hyper-parameters
const LOG_LENGTH_RANGE: (f64, f64) = (-4.0, 1.6); // ~0.018 .. 5
const LOG_SIGNAL_RANGE: (f64, f64) = (-3.0, 3.0);
const LOG_NOISE_RANGE: (f64, f64) = (-13.8, 0.0); // 1e-6 .. 1

/// Fitted GP over unit-cube inputs.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub hyper: GpHyper,
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    l: DMatrix<f64>,
    alpha: DVector<f64>,
    /// Extra diagonal added to reach positive definiteness.
    pub jitter: f64,
    log_ml: f64,
}

fn factorise(
    hyper: &GpHyper,
    x: &[Vec<f64>],
    y: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>, f64, f64), TunerError> {
    let n = x.len();
    let noise = hyper.log_noise_var.exp().max(NOISE_FLOOR);
    let k = DMatrix::from_fn(n, n, |i, j| {
        hyper.kernel(&x[i], &x[j]) + if i == j { noise } else { 0.0 }
    });
    let mut jitter = 0.0;
    loop {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            let alpha = chol.solve(y);
            let l = chol.unpack();
            let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
            let log_ml = -0.5 * y.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            return Ok((l, alpha, jitter, log_ml));
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 2.0 };
        if jitter > MAX_JITTER {
            return Err(TunerError::Singular);
        }
    }
}

fn standardise(y: &[f64]) -> (f64, f64, DVector<f64>) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    (
        mean,
        scale,
        DVector::from_iterator(y.len(), y.iter().map(|v| (v - mean) / scale)),
    )
}

/// Fits with fixed kernel hyper-parameters; a single observation is allowed.
pub fn gp_fit_fixed(x: &[Vec<f64>], y: &[f64], hyper: GpHyper) -> Result<Surrogate, TunerError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(TunerError::TooFewPoints {
            needed: 1,
            got: x.len().min(y.len()),
        });
    }
    let (y_mean, y_scale, ys) = standardise(y);
    let (l, alpha, jitter, log_ml) = factorise(&hyper, x, &ys)?;
    Ok(Surrogate {
        hyper,
        x: x.to_vec(),
        y_mean,
        y_scale,
        l,
        alpha,
        jitter,
        log_ml,
    })
}

/// Fits kernel hyper-parameters by maximising the log marginal likelihood
/// from several seeded starting points.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<Surrogate, TunerError> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(TunerError::TooFewPoints {
            needed: 2,
            got: x.len().min(y.len()),
        });
    }
    let dim = x[0].len();
    let (_, _, ys) = standardise(y);
    let objective = |v: &[f64]| match factorise(&GpHyper::from_vec(v), x, &ys) {
        Ok((.., lml)) if lml.is_finite() => lml,
        _ => f64::NEG_INFINITY,
    };
    let mut bounds = vec![LOG_LENGTH_RANGE; dim];
    bounds.push(LOG_SIGNAL_RANGE);
    bounds.push(LOG_NOISE_RANGE);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![GpHyper::isotropic(dim, 0.3, 1.0, 1e-3).to_vec()];
    for _ in 0..4 {
        starts.push(bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect());
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in starts {
        let (v, f) = compass_search(&objective, s, &bounds);
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, v));
        }
    }
    let (f, v) = best.expect("at least one start");
    let hyper = if f.is_finite() {
        GpHyper::from_vec(&v)
    } else {
        GpHyper::isotropic(dim, 0.3, 1.0, 1e-3)
    };
    gp_fit_fixed(x, y, hyper)
}

/// Coordinate pattern search maximising `f` inside `bounds`.
fn compass_search(f: &impl Fn(&[f64]) -> f64, mut v: Vec<f64>, bounds: &[(f64, f64)]) -> (Vec<f64>, f64) {
    let mut fv = f(&v);
    let mut step = 1.0;
    let mut evals = 0;
    while step > 1e-2 && evals < 400 {
        let mut improved = false;
        for i in 0..v.len() {
            for dir in [1.0, -1.0] {
                let mut w = v.clone();
                w[i] = (w[i] + dir * step).clamp(bounds[i].0, bounds[i].1);
                if w[i] == v[i] {
                    continue;
                }
                let fw = f(&w);
                evals += 1;
                if fw > fv {
                    v = w;
                    fv = fw;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (v, fv)
}

impl Surrogate {
    /// Predictive mean and standard deviation of the latent function, in the
    /// objective's units.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| self.hyper.kernel(xi, x)));
        let mu = k.dot(&self.alpha);
        let v = self
            .l
            .solve_lower_triangular(&k)
            .expect("cholesky factor has a positive diagonal");
        let var = (self.hyper.log_signal_var.exp() - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mu, self.y_scale * var.sqrt())
    }

    pub fn prior_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn prior_std(&self) -> f64 {
        self.y_scale * (0.5 * self.hyper.log_signal_var).exp()
    }

    /// Observation-noise variance in the objective's units.
    pub fn noise_var(&self) -> f64 {
        self.y_scale * self.y_scale * (self.hyper.log_noise_var.exp().max(NOISE_FLOOR) + self.jitter)
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_ml
    }
}

pub fn gp_posterior(s: &Surrogate, x: &[f64]) -> (f64, f64) {
    s.posterior(x)
}

/// Expected improvement below `best` for a minimisation problem.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    let diff = best - mu;
    if !(sigma > 0.0) {
        return diff.max(0.0);
    }
    let z = diff / sigma;
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (diff * cdf + sigma * pdf).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialSource {
    /// Caller-supplied starting point.
    Seeded,
    Initial,
    Acquisition,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub iteration: usize,
    pub source: TrialSource,
    pub point: IndexMap<String, f64>,
    /// `None` when the objective failed.
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best_point: IndexMap<String, f64>,
    pub best_objective: f64,
    pub trials: Vec<Trial>,
    /// Best objective after each trial; `None` until one succeeds.
    pub incumbent_trace: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub budget: usize,
    /// Initial space-filling trials, seeded points included.
    pub init: usize,
    pub seed: u64,
    pub n_candidates: usize,
    pub n_local: usize,
    /// Natural-unit points evaluated first.
    pub seeded_points: Vec<Vec<f64>>,
}

impl OptimizerConfig {
    pub fn new(budget: usize, init: usize, seed: u64) -> Self {
        Self {
            budget,
            init,
            seed,
            n_candidates: 4096,
            n_local: 512,
            seeded_points: Vec::new(),
        }
    }
}

/// Latin-hypercube sample of `m` points in the unit cube.
pub fn latin_hypercube(m: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; m];
    for j in 0..dim {
        let mut strata: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            strata.swap(i, rng.random_range(0..=i));
        }
        for (i, p) in pts.iter_mut().enumerate() {
            p[j] = (strata[i] as f64 + rng.random::<f64>()) / m as f64;
        }
    }
    pts
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Halton points with a random toroidal shift.
pub fn halton(m: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=m as u64)
        .map(|i| {
            (0..dim)
                .map(|j| (radical_inverse(i, PRIMES[j]) + shift[j]).fract())
                .collect()
        })
        .collect()
}

struct History<'a> {
    space: &'a ParamSpace,
    trials: Vec<Trial>,
    points: Vec<Vec<f64>>,
    trace: Vec<Option<f64>>,
    best: Option<(f64, usize)>,
}

impl History<'_> {
    fn run(
        &mut self,
        x: Vec<f64>,
        source: TrialSource,
        objective: &mut impl FnMut(&[f64]) -> Result<f64, String>,
        on_trial: &mut impl FnMut(&Trial),
    ) {
        let start = Instant::now();
        let outcome = objective(&x).and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("objective returned {v}"))
            }
        });
        let wall = start.elapsed().as_secs_f64();
        let iteration = self.trials.len();
        let (value, error) = match outcome {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e)),
        };
        if let Some(v) = value {
            if self.best.is_none_or(|(b, _)| v < b) {
                self.best = Some((v, iteration));
            }
        }
        let trial = Trial {
            iteration,
            source,
            point: self.space.named(&x),
            objective: value,
            error,
            wall_time_s: Some(wall),
        };
        on_trial(&trial);
        self.trials.push(trial);
        self.points.push(x);
        self.trace.push(self.best.map(|b| b.0));
    }

    fn finish(self) -> Result<OptimizeResult, TunerError> {
        let (best_objective, i) = self.best.ok_or(TunerError::AllTrialsFailed)?;
        Ok(OptimizeResult {
            best_point: self.trials[i].point.clone(),
            best_objective,
            trials: self.trials,
            incumbent_trace: self.trace,
        })
    }
}

/// Minimises `objective` over `space`.
pub fn optimize(
    space: &ParamSpace,
    mut objective: impl FnMut(&[f64]) -> Result<f64, String>,
    config: &OptimizerConfig,
    mut on_trial: impl FnMut(&Trial),
) -> Result<OptimizeResult, TunerError> {
    if config.init < 2 || config.budget <= config.init || config.seeded_points.len() > config.init {
        return Err(TunerError::InvalidBudget {
            budget: config.budget,
            init: config.init,
        });
    }
    for p in &config.seeded_points {
        space.check(p)?;
    }
    let dim = space.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut h = History {
        space,
        trials: Vec::new(),
        points: Vec::new(),
        trace: Vec::new(),
        best: None,
    };

    for p in &config.seeded_points {
        h.run(p.clone(), TrialSource::Seeded, &mut objective, &mut on_trial);
    }
    for u in latin_hypercube(config.init - config.seeded_points.len(), dim, &mut rng) {
        h.run(space.from_unit(&u), TrialSource::Initial, &mut objective, &mut on_trial);
    }

    while h.trials.len() < config.budget {
        let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = h
            .points
            .iter()
            .zip(&h.trials)
            .filter_map(|(x, t)| t.objective.map(|v| (space.to_unit(x), v)))
            .unzip();
        let fit_seed = rng.random::<u64>();
        let surrogate = if xs.len() >= 2 {
            gp_fit(&xs, &ys, fit_seed).ok()
        } else {
            None
        };
        let Some(gp) = surrogate else {
            let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            h.run(space.from_unit(&u), TrialSource::Random, &mut objective, &mut on_trial);
            continue;
        };
        let next = propose(space, &gp, &h, config, &mut rng);
        h.run(next, TrialSource::Acquisition, &mut objective, &mut on_trial);
    }
    h.finish()
}

fn propose(
    space: &ParamSpace,
    gp: &Surrogate,
    h: &History,
    config: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let dim = space.len();
    let (best, best_i) = h.best.expect("surrogate implies a successful trial");
    let incumbent = space.to_unit(&h.points[best_i]);
    let mut candidates = halton(config.n_candidates, dim, rng);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for k in 0..config.n_local {
        let scale = [0.2, 0.05, 0.01][k % 3];
        candidates.push(
            incumbent
                .iter()
                .map(|&u| (u + scale * normal.sample(rng)).clamp(0.0, 1.0))
                .collect(),
        );
    }
    let seen: Vec<Vec<f64>> = h.points.clone();
    let mut pick: Option<(f64, Vec<f64>)> = None;
    for u in candidates {
        let x = space.from_unit(&u);
        if seen.contains(&x) {
            continue;
        }
        let (mu, sigma) = gp.posterior(&space.to_unit(&x));
        let ei = expected_improvement(mu, sigma, best);
        if pick.as_ref().is_none_or(|(b, _)| ei > *b) {
            pick = Some((ei, x));
        }
    }
    match pick {
        Some((_, x)) => x,
        None => space.from_unit(&(0..dim).map(|_| rng.random::<f64>()).collect::<Vec<_>>()),
    }
}

/// Uniform random search with the same bookkeeping as [`optimize`].
pub fn random_search(
    space: &ParamSpace,
    mut objective: impl FnMut(&[f64]) -> Result<f64, String>,
    budget: usize,
    seed: u64,
    mut on_trial: impl FnMut(&Trial),
) -> Result<OptimizeResult, TunerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = History {
        space,
        trials: Vec::new(),
        points: Vec::new(),
        trace: Vec::new(),
        best: None,
    };
    for _ in 0..budget {
        let u: Vec<f64> = (0..space.len()).map(|_| rng.random::<f64>()).collect();
        h.run(space.from_unit(&u), TrialSource::Random, &mut objective, &mut on_trial);
    }
    h.finish()
}

/// Objective change when one coordinate of `tuned` is reset to its value in
/// `reference`, relative to the tuned objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reversion {
    pub parameter: String,
    pub tuned: f64,
    pub reverted_to: f64,
    pub objective: Option<f64>,
    /// `(reverted - tuned_objective) / tuned_objective`.
    pub relative_change: Option<f64>,
}

pub fn reversion_attribution(
    space: &ParamSpace,
    tuned: &[f64],
    tuned_objective: f64,
    reference: &[f64],
    mut objective: impl FnMut(&[f64]) -> Result<f64, String>,
) -> Result<Vec<Reversion>, TunerError> {
    space.check(tuned)?;
    space.check(reference)?;
    let mut out = Vec::new();
    for (j, d) in space.dims.iter().enumerate() {
        if tuned[j] == reference[j] {
            continue;
        }
        let mut x = tuned.to_vec();
        x[j] = reference[j];
        let obj = objective(&x).ok().filter(|v| v.is_finite());
        out.push(Reversion {
            parameter: d.name.clone(),
            tuned: tuned[j],
            reverted_to: reference[j],
            objective: obj,
            relative_change: obj.map(|v| (v - tuned_objective) / tuned_objective),
        });
    }
    Ok(out)
}
