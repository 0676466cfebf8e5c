//! Proximal stochastic (zeroth-order) gradient loops.
//!
//! Every method runs `T + 1` steps `x_{t+1} = prox_{a_t r}(x_t - a_t G_t)`
//! for `t = 0..=T` and differs only in how `G_t` is formed. Z-ProxSG returns
//! the iterate `x_{t*}` drawn with probability proportional to `a_t`; the
//! other four return the last iterate unless told otherwise.

use std::time::Instant;

use crate::error::{invalid, Error, Result};
use crate::linalg::{all_finite, norm2};
use crate::problem::CompositeProblem;
use crate::rng::RngStream;
use crate::smoothing::{DoubleSmoothing, Estimator, UniformSign};
use crate::trace::RunTrace;

/// Norm above which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e8;

/// Scenarios averaged per logged objective when no exact objective exists.
pub const LOG_BATCH: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// Constant step balancing the two terms of the nonasymptotic rate bound.
    RateOptimal { rho: f64, delta: f64, lipschitz: f64 },
    /// Explicit `a_0, ..., a_T`.
    Custom(Vec<f64>),
}

/// `1/2 min{1/rho, sqrt(delta / ((n^2 + 2n) rho L^2 (T + 1)))}`.
pub fn rate_optimal_step(n: usize, rho: f64, delta: f64, lipschitz: f64, t: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("dimension must be positive"));
    }
    for (name, v) in [("rho", rho), ("delta", delta), ("lipschitz", lipschitz)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let n = n as f64;
    let moment = n * n + 2.0 * n;
    let second = (delta / (moment * rho * lipschitz * lipschitz * (t as f64 + 1.0))).sqrt();
    Ok(0.5 * (1.0 / rho).min(second))
}

/// The bound `8 max{delta rho / (T+1), L sqrt(delta rho n (n+2) / (T+1))}` on
/// the weighted mean squared envelope gradient under the balanced step.
pub fn rate_bound(n: usize, rho: f64, delta: f64, lipschitz: f64, t: usize) -> f64 {
    let n = n as f64;
    let t1 = t as f64 + 1.0;
    8.0 * (delta * rho / t1).max(lipschitz * (delta * rho * n * (n + 2.0) / t1).sqrt())
}

impl StepSchedule {
    /// Step sizes `a_0, ..., a_T` for a problem of dimension `n`.
    pub fn alphas(&self, n: usize, t: usize) -> Result<Vec<f64>> {
        let out = match self {
            StepSchedule::Constant(a) => vec![*a; t + 1],
            StepSchedule::RateOptimal {
                rho,
                delta,
                lipschitz,
            } => vec![rate_optimal_step(n, *rho, *delta, *lipschitz, t)?; t + 1],
            StepSchedule::Custom(v) => {
                if v.len() != t + 1 {
                    return Err(invalid(format!(
                        "custom schedule has {} entries, expected T + 1 = {}",
                        v.len(),
                        t + 1
                    )));
                }
                v.clone()
            }
        };
        if let Some(a) = out.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(invalid(format!("step sizes must be positive, got {a}")));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    ZProxSg,
    DszProxSg,
    UniZProxSg,
    Spsa,
    ProxSsg,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::ZProxSg,
        Method::DszProxSg,
        Method::UniZProxSg,
        Method::Spsa,
        Method::ProxSsg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ZProxSg => "z-proxsg",
            Method::DszProxSg => "dsz-proxsg",
            Method::UniZProxSg => "uniz-proxsg",
            Method::Spsa => "spsa",
            Method::ProxSsg => "proxssg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| invalid(format!("unknown solver {s:?}")))
    }

    pub fn is_zeroth_order(self) -> bool {
        self != Method::ProxSsg
    }
}

/// Which iterate a run returns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputRule {
    /// Weighted draw for Z-ProxSG, last iterate for the others.
    #[default]
    AlgorithmDefault,
    WeightedDraw,
    FinalIterate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub schedule: StepSchedule,
    /// `T`; the run takes `T + 1` steps.
    pub iterations: usize,
    /// Radius for the single-smoothing estimators.
    pub mu: f64,
    /// Radii for DSZ-ProxSG.
    pub double: Option<DoubleSmoothing>,
    pub uniform_sign: UniformSign,
    pub batch: usize,
    pub seed: u64,
    pub output: OutputRule,
    /// Logging stride; `None` picks `max(1, T / 500)`.
    pub log_stride: Option<usize>,
    pub keep_iterates: bool,
}

impl SolverConfig {
    pub fn new(method: Method, schedule: StepSchedule, iterations: usize, mu: f64, seed: u64) -> Self {
        Self {
            method,
            schedule,
            iterations,
            mu,
            double: None,
            uniform_sign: UniformSign::default(),
            batch: 1,
            seed,
            output: OutputRule::default(),
            log_stride: None,
            keep_iterates: false,
        }
    }

    pub fn with_double(mut self, mu1: f64, mu2: f64) -> Self {
        self.double = Some(DoubleSmoothing { mu1, mu2 });
        self
    }

    pub fn stride(&self) -> usize {
        self.log_stride.unwrap_or(self.iterations / 500).max(1)
    }

    pub fn estimator(&self) -> Result<Option<Estimator>> {
        if self.double.is_some() && self.method != Method::DszProxSg {
            return Err(invalid("double smoothing radii only apply to dsz-proxsg"));
        }
        let e = match self.method {
            Method::ZProxSg => Estimator::Gaussian { mu: self.mu },
            Method::DszProxSg => Estimator::DoubleGaussian(
                self.double
                    .ok_or_else(|| invalid("dsz-proxsg needs (mu1, mu2)"))?,
            ),
            Method::UniZProxSg => Estimator::Uniform {
                mu: self.mu,
                sign: self.uniform_sign,
            },
            Method::Spsa => Estimator::Spsa { mu: self.mu },
            Method::ProxSsg => return Ok(None),
        };
        e.validate()?;
        Ok(Some(e))
    }

    fn weighted_output(&self) -> bool {
        match self.output {
            OutputRule::AlgorithmDefault => self.method == Method::ZProxSg,
            OutputRule::WeightedDraw => true,
            OutputRule::FinalIterate => false,
        }
    }
}

/// Index drawn with `P(t) = alphas[t] / sum(alphas)`.
pub fn draw_t_star(alphas: &[f64], rng: &mut RngStream) -> Result<usize> {
    if alphas.is_empty() {
        return Err(invalid("empty weight list"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(invalid(format!("weights must be positive, got {a}")));
    }
    let total: f64 = alphas.iter().sum();
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    for (i, a) in alphas.iter().enumerate() {
        acc += a;
        if target < acc {
            return Ok(i);
        }
    }
    Ok(alphas.len() - 1)
}

fn logged_objective<P: CompositeProblem>(p: &P, x: &[f64], rng: &mut RngStream) -> f64 {
    let f = match p.objective(x) {
        Some(v) => v,
        None => {
            let sum: f64 = (0..LOG_BATCH)
                .map(|_| {
                    let s = p.sample_scenario(rng);
                    p.eval(x, &s)
                })
                .sum();
            sum / LOG_BATCH as f64
        }
    };
    f + p.regularizer().value(x)
}

/// Run the configured method from `x0`.
pub fn run<P: CompositeProblem>(p: &P, x0: &[f64], cfg: &SolverConfig) -> Result<RunTrace> {
    run_observed(p, x0, cfg, |_, _, _| {})
}

/// As [`run`], calling `observe(t, x_t, a_t)` for every `t = 0..=T` before
/// the step from `x_t` is taken.
pub fn run_observed<P, O>(p: &P, x0: &[f64], cfg: &SolverConfig, mut observe: O) -> Result<RunTrace>
where
    P: CompositeProblem,
    O: FnMut(usize, &[f64], f64),
{
    let start = Instant::now();
    let n = p.dim();
    if x0.len() != n {
        return Err(invalid(format!("x0 has length {}, problem dimension is {n}", x0.len())));
    }
    if cfg.batch == 0 {
        return Err(invalid("batch size must be at least 1"));
    }
    let r = p.regularizer();
    r.validate(n)?;
    if !r.contains(x0) {
        return Err(invalid("x0 is outside dom(r)"));
    }
    let estimator = cfg.estimator()?;
    if estimator.is_none() && !p.has_subgradient() {
        return Err(invalid("proxssg needs a subgradient oracle"));
    }
    let t_max = cfg.iterations;
    let alphas = cfg.schedule.alphas(n, t_max)?;

    let root = RngStream::from_seed(cfg.seed);
    let mut u_rng = root.split(0);
    let mut xi_rng = root.split(1);
    let mut t_rng = root.split(2);
    let mut log_rng = root.split(3);

    let weighted = cfg.weighted_output();
    let t_star = if weighted {
        draw_t_star(&alphas, &mut t_rng)?
    } else {
        t_max
    };

    let stride = cfg.stride();
    let mut trace = RunTrace::with_stride(stride);
    trace.t_star = t_star;
    let keep = |x: &[f64]| (cfg.keep_iterates).then(|| x.to_vec());

    let mut x = x0.to_vec();
    let mut returned = None;
    let mut evals = 0usize;
    for (t, &alpha) in alphas.iter().enumerate() {
        if t % stride == 0 {
            let obj = logged_objective(p, &x, &mut log_rng);
            trace.record_step(t, keep(&x).as_deref(), obj, alpha)?;
        }
        if weighted && t == t_star {
            returned = Some(x.clone());
        }
        observe(t, &x, alpha);

        let g = match &estimator {
            Some(e) => {
                let est = e.estimate(p, &x, cfg.batch, &mut u_rng, &mut xi_rng)?;
                evals += est.function_evals;
                est.direction
            }
            None => {
                let mut acc = vec![0.0; n];
                for _ in 0..cfg.batch {
                    let s = p.sample_scenario(&mut xi_rng);
                    let g = p
                        .subgradient(&x, &s, alpha)
                        .ok_or_else(|| invalid("subgradient oracle returned nothing"))?;
                    evals += 1;
                    for (a, v) in acc.iter_mut().zip(&g) {
                        *a += v / cfg.batch as f64;
                    }
                }
                acc
            }
        };
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= alpha * gi;
        }
        r.prox_in_place(&mut x, alpha);

        let norm = norm2(&x);
        if !all_finite(&x) || norm > DIVERGENCE_NORM {
            trace.final_iterate = x.clone();
            trace.function_evals = evals;
            trace.wall_time_s = start.elapsed().as_secs_f64();
            return Err(Error::Divergence {
                iteration: t + 1,
                norm,
                trace: Box::new(trace),
            });
        }
        if !r.contains(&x) {
            return Err(invalid(format!("iterate {} left dom(r)", t + 1)));
        }
    }
    let last_alpha = *alphas.last().expect("T + 1 >= 1 step sizes");
    let obj = logged_objective(p, &x, &mut log_rng);
    trace.record_step(t_max + 1, keep(&x).as_deref(), obj, last_alpha)?;

    trace.returned = returned.unwrap_or_else(|| x.clone());
    trace.final_iterate = x;
    trace.function_evals = evals;
    trace.wall_time_s = start.elapsed().as_secs_f64();
    Ok(trace)
}

fn run_as<P: CompositeProblem>(
    method: Method,
    p: &P,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<RunTrace> {
    let mut cfg = cfg.clone();
    cfg.method = method;
    run(p, x0, &cfg)
}

pub fn run_z_proxsg<P: CompositeProblem>(p: &P, x0: &[f64], cfg: &SolverConfig) -> Result<RunTrace> {
    run_as(Method::ZProxSg, p, x0, cfg)
}

pub fn run_dsz_proxsg<P: CompositeProblem>(p: &P, x0: &[f64], cfg: &SolverConfig) -> Result<RunTrace> {
    run_as(Method::DszProxSg, p, x0, cfg)
}

pub fn run_uniz_proxsg<P: CompositeProblem>(p: &P, x0: &[f64], cfg: &SolverConfig) -> Result<RunTrace> {
    run_as(Method::UniZProxSg, p, x0, cfg)
}

pub fn run_spsa<P: CompositeProblem>(p: &P, x0: &[f64], cfg: &SolverConfig) -> Result<RunTrace> {
    run_as(Method::Spsa, p, x0, cfg)
}

pub fn run_prox_ssg<P: CompositeProblem>(p: &P, x0: &[f64], cfg: &SolverConfig) -> Result<RunTrace> {
    run_as(Method::ProxSsg, p, x0, cfg)
}
