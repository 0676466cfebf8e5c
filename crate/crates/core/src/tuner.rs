//! Derivative-free tuning of the pADMM penalty.
//!
//! The sampled objective is the `k`-step residual reduction of pADMM on one
//! drawn instance. Z-ProxSG runs on it in one dimension with `r` the
//! indicator of `[sigma_min, sigma_max]`, and the last iterate is reported.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::linalg::mean_stderr;
use crate::padmm::{reduction_profile, residual_reduction, PadmmConfig};
use crate::pde::{assemble, Equation, InstanceSampler, QpInstance};
use crate::problem::CompositeProblem;
use crate::prox::{BoxSet, Regularizer};
use crate::rng::RngStream;
use crate::solvers::{run, Method, OutputRule, SolverConfig, StepSchedule};
use crate::trace::RunTrace;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Clone, Debug, PartialEq)]
pub struct TunerConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub k: usize,
    /// `T`; the tuner takes `T + 1` steps.
    pub iterations: usize,
    pub mu: f64,
    /// `None` uses `1 / (2 sqrt(T))`.
    pub alpha: Option<f64>,
    /// `None` starts at the geometric midpoint of the box.
    pub sigma0: Option<f64>,
    pub seed: u64,
    pub training: InstanceSampler,
    pub padmm: PadmmConfig,
}

impl TunerConfig {
    /// Box `[1e-2, 1e2]`, `k = 15`, `mu = 5e-10`, `T = 200 |training set|`.
    pub fn standard(equation: Equation, seed: u64) -> Self {
        let training = InstanceSampler::training(equation);
        Self {
            sigma_min: 1e-2,
            sigma_max: 1e2,
            k: 15,
            iterations: 200 * training.len(),
            mu: 5e-10,
            alpha: None,
            sigma0: None,
            seed,
            training,
            padmm: PadmmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max) {
            return Err(invalid(format!(
                "need 0 < sigma_min < sigma_max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            )));
        }
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        self.training.validate()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
            .unwrap_or_else(|| 0.5 / (self.iterations.max(1) as f64).sqrt())
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
            .unwrap_or_else(|| (self.sigma_min * self.sigma_max).sqrt())
    }

    pub fn interval(&self) -> Result<Regularizer> {
        Ok(Regularizer::Box(BoxSet::new(
            vec![self.sigma_min],
            vec![self.sigma_max],
        )?))
    }

    fn solver_config(&self) -> SolverConfig {
        let mut s = SolverConfig::new(
            Method::ZProxSg,
            StepSchedule::Constant(self.alpha()),
            self.iterations,
            self.mu,
            self.seed,
        );
        s.output = OutputRule::FinalIterate;
        s.log_stride = Some((self.iterations / 200).max(1));
        s.keep_iterates = true;
        s
    }
}

/// The sampled tuning objective over a cached instance family.
pub struct TuningProblem {
    sampler: InstanceSampler,
    specs: Vec<crate::pde::PdeSpec>,
    cache: Vec<OnceLock<QpInstance>>,
    k: usize,
    padmm: PadmmConfig,
    interval: Regularizer,
}

impl TuningProblem {
    pub fn new(cfg: &TunerConfig) -> Result<Self> {
        cfg.validate()?;
        let specs = cfg.training.triples();
        Ok(Self {
            sampler: cfg.training.clone(),
            cache: specs.iter().map(|_| OnceLock::new()).collect(),
            specs,
            k: cfg.k,
            padmm: cfg.padmm,
            interval: cfg.interval()?,
        })
    }

    pub fn instance(&self, idx: usize) -> &QpInstance {
        self.cache[idx].get_or_init(|| assemble(&self.specs[idx]).expect("sampler specs are valid"))
    }

    pub fn specs(&self) -> &[crate::pde::PdeSpec] {
        &self.specs
    }

    /// `F(sigma, xi; k)` for triple `idx`.
    pub fn value(&self, sigma: f64, idx: usize) -> Result<f64> {
        residual_reduction(self.instance(idx), sigma, self.k, &self.padmm)
    }
}

impl CompositeProblem for TuningProblem {
    type Scenario = usize;

    fn dim(&self) -> usize {
        1
    }

    fn sample_scenario(&self, rng: &mut RngStream) -> usize {
        self.sampler.sample_index(rng)
    }

    fn eval(&self, x: &[f64], idx: &usize) -> f64 {
        self.value(x[0], *idx).unwrap_or(f64::NAN)
    }

    fn eval_pair(&self, x1: &[f64], x2: &[f64], idx: &usize) -> (f64, f64) {
        self.instance(*idx);
        rayon::join(|| self.eval(x1, idx), || self.eval(x2, idx))
    }

    fn regularizer(&self) -> &Regularizer {
        &self.interval
    }
}

/// One training triple drawn from `rng`, evaluated at `sigma`.
pub fn tuning_objective_sample(sigma: f64, cfg: &TunerConfig, rng: &mut RngStream) -> Result<f64> {
    cfg.validate()?;
    let (_, inst) = cfg.training.sample_instance(rng)?;
    residual_reduction(&inst, sigma, cfg.k, &cfg.padmm)
}

/// Tunes `p` (one-dimensional, `r` the box indicator) with the settings of
/// `cfg`; returns the last iterate and the trace.
pub fn tune_problem<P: CompositeProblem>(p: &P, cfg: &TunerConfig) -> Result<(f64, RunTrace)> {
    if p.dim() != 1 {
        return Err(invalid("the tuner works in one dimension"));
    }
    let trace = run(p, &[cfg.sigma0()], &cfg.solver_config())?;
    Ok((trace.final_iterate[0], trace))
}

/// Tunes the pADMM penalty on the training family of `cfg`.
pub fn tune(cfg: &TunerConfig) -> Result<(f64, RunTrace)> {
    let p = TuningProblem::new(cfg)?;
    tune_problem(&p, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub sigma: f64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub values: Vec<f64>,
}

impl GridRow {
    fn from_values(sigma: f64, values: Vec<f64>) -> Self {
        let (mean, se) = mean_stderr(&values);
        Self {
            sigma,
            mean,
            ci_low: mean - Z95 * se,
            ci_high: mean + Z95 * se,
            values,
        }
    }
}

/// Holdout draws shared by every grid value.
pub fn draw_holdout(sampler: &InstanceSampler, draws: usize, rng: &mut RngStream) -> Vec<crate::pde::PdeSpec> {
    (0..draws).map(|_| sampler.sample_spec(rng)).collect()
}

/// Mean `k`-step reduction and 95% CI for each `sigma` in `grid`, over
/// `draws` holdout instances drawn once from `seed`.
pub fn grid_oracle(
    cfg: &TunerConfig,
    grid: &[f64],
    holdout: &InstanceSampler,
    draws: usize,
    seed: u64,
) -> Result<Vec<GridRow>> {
    if draws == 0 {
        return Err(invalid("need at least one holdout draw"));
    }
    if let Some(s) = grid.iter().find(|s| !(**s >= cfg.sigma_min && **s <= cfg.sigma_max)) {
        return Err(invalid(format!(
            "grid value {s} outside [{}, {}]",
            cfg.sigma_min, cfg.sigma_max
        )));
    }
    let specs = draw_holdout(holdout, draws, &mut RngStream::from_seed(seed));
    let instances: Vec<QpInstance> = specs
        .par_iter()
        .map(assemble)
        .collect::<Result<_>>()?;
    grid.par_iter()
        .map(|&sigma| {
            let values = instances
                .par_iter()
                .map(|inst| residual_reduction(inst, sigma, cfg.k, &cfg.padmm))
                .collect::<Result<Vec<_>>>()?;
            Ok(GridRow::from_values(sigma, values))
        })
        .collect()
}

/// Per-iteration mean reduction and CI for each `sigma`, iterations `0..=k`.
pub fn grid_profiles(
    grid: &[f64],
    instances: &[QpInstance],
    k: usize,
    padmm: &PadmmConfig,
) -> Result<Vec<(f64, Vec<GridRow>)>> {
    grid.par_iter()
        .map(|&sigma| {
            let profiles = instances
                .par_iter()
                .map(|inst| reduction_profile(inst, sigma, k, padmm))
                .collect::<Result<Vec<_>>>()?;
            let rows = (0..=k)
                .map(|t| GridRow::from_values(t as f64, profiles.iter().map(|p| p[t]).collect()))
                .collect();
            Ok((sigma, rows))
        })
        .collect()
}
