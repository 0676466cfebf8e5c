//! Experiment drivers. Each returns its files in memory so that callers can
//! compare reruns before anything touches the disk.

use std::fs;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::moreau::{moreau_prox, LogSquares, MoreauDiagnostics, SmoothComposite};
use crate::padmm::reduction_profile;
use crate::pde::{assemble, Equation, InstanceSampler, QpInstance};
use crate::phase_retrieval::{generate_instance, PhaseRetrievalInstance};
use crate::prox::Regularizer;
use crate::rng::RngStream;
use crate::solvers::{run, run_observed, Method, SolverConfig, StepSchedule};
use crate::trace::RunTrace;
use crate::tuner::{draw_holdout, tune, TunerConfig};

use super::aggregate::{aggregate, AggregateSeries};
use super::config::{ExperimentConfig, ExperimentKind, MoreauSection, TunerSection};
use super::output::{num, series_table, svg_chart, Manifest, Table};

/// Stream label for holdout draws, kept apart from the tuner's own streams.
const HOLDOUT_STREAM: u64 = 7;

/// Files produced by one experiment, relative to `<out>/<experiment>/`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: String,
    pub files: Vec<(PathBuf, String)>,
    pub manifest: Manifest,
    pub warnings: Vec<String>,
}

impl ExperimentOutput {
    fn new(experiment: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            files: Vec::new(),
            manifest: Manifest::new(experiment, &cfg.hash()),
            warnings: Vec::new(),
        }
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        self.files.push((PathBuf::from(format!("{name}.csv")), t.to_csv()?));
        Ok(())
    }

    fn svg(&mut self, name: &str, title: &str, series: &[(String, AggregateSeries)]) {
        self.files
            .push((PathBuf::from(format!("{name}.svg")), svg_chart(title, series)));
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(p, _)| p == Path::new(name))
            .map(|(_, s)| s.as_str())
    }

    /// Writes every file and the manifest under `<root>/<experiment>/`.
    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let dir = root.join(&self.experiment);
        fs::create_dir_all(&dir)?;
        for (rel, text) in &self.files {
            let path = dir.join(rel);
            if let Some(p) = path.parent() {
                fs::create_dir_all(p)?;
            }
            fs::write(path, text)?;
        }
        self.manifest.write(&dir)?;
        Ok(dir)
    }
}

/// `<d>x<m>` tags as used in file names.
pub fn size_tag(d: usize, m: usize) -> String {
    format!("d{d}_m{m}")
}

/// Constant steps `1/(2 d sqrt(T))` for zeroth-order methods and
/// `1/(2 sqrt(T))` for the subgradient method.
pub fn phase_retrieval_solver(
    method: Method,
    d: usize,
    iterations: usize,
    mu: f64,
    double: (f64, f64),
    seed: u64,
) -> SolverConfig {
    let root = 2.0 * (iterations.max(1) as f64).sqrt();
    let alpha = if method.is_zeroth_order() {
        1.0 / (d as f64 * root)
    } else {
        1.0 / root
    };
    let cfg = SolverConfig::new(method, StepSchedule::Constant(alpha), iterations, mu, seed);
    if method == Method::DszProxSg {
        cfg.with_double(double.0, double.1)
    } else {
        cfg
    }
}

fn method_index(m: Method) -> u64 {
    Method::ALL.iter().position(|x| *x == m).expect("listed method") as u64
}

/// Replicate stream for size `size_idx`, replicate `rep`.
pub fn replicate_stream(master: u64, rep: usize, size_idx: usize) -> RngStream {
    RngStream::from_seed(master).split(rep as u64).split(size_idx as u64)
}

/// Per-method results of one phase-retrieval size.
#[derive(Clone, Debug)]
pub struct PhaseRetrievalSummary {
    pub d: usize,
    pub m: usize,
    pub iterations: usize,
    pub initial_objectives: Vec<f64>,
    /// Completed runs per method, in replicate order.
    pub traces: Vec<(Method, Vec<(usize, RunTrace)>)>,
    pub failures: Vec<String>,
}

impl PhaseRetrievalSummary {
    pub fn mean_initial(&self) -> f64 {
        self.initial_objectives.iter().sum::<f64>() / self.initial_objectives.len() as f64
    }

    pub fn mean_final(&self, method: Method) -> Option<f64> {
        let (_, runs) = self.traces.iter().find(|(m, _)| *m == method)?;
        if runs.is_empty() {
            return None;
        }
        let s: f64 = runs.iter().map(|(_, t)| t.final_objective().unwrap_or(f64::NAN)).sum();
        Some(s / runs.len() as f64)
    }

    pub fn series(&self) -> Result<Vec<(String, AggregateSeries)>> {
        self.traces
            .iter()
            .filter(|(_, runs)| !runs.is_empty())
            .map(|(m, runs)| {
                let t: Vec<RunTrace> = runs.iter().map(|(_, t)| t.clone()).collect();
                Ok((m.name().to_string(), aggregate(&t)?))
            })
            .collect()
    }
}

/// One instance per replicate, every method run on it from the same start.
pub fn run_phase_retrieval_size(cfg: &ExperimentConfig, size_idx: usize) -> Result<PhaseRetrievalSummary> {
    let [d, m] = *cfg
        .phase_retrieval
        .sizes
        .get(size_idx)
        .ok_or_else(|| invalid(format!("no size with index {size_idx}")))?;
    let sec = &cfg.phase_retrieval;
    let iterations = sec.iterations_per_measurement * m;
    let methods = cfg.methods()?;
    let reps: Vec<(f64, Vec<Result<RunTrace>>)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let rs = replicate_stream(cfg.seed, rep, size_idx);
            let inst = generate_instance(d, m, &mut rs.split(0))?;
            let runs = methods
                .iter()
                .map(|&method| {
                    let seed = rs.split(1 + method_index(method)).next_u64();
                    let sc = phase_retrieval_solver(method, d, iterations, sec.mu, (sec.mu1, sec.mu2), seed);
                    run(&inst, &inst.start, &sc)
                })
                .collect();
            Ok((inst.objective(&inst.start), runs))
        })
        .collect::<Result<_>>()?;
    let mut summary = PhaseRetrievalSummary {
        d,
        m,
        iterations,
        initial_objectives: reps.iter().map(|(f0, _)| *f0).collect(),
        traces: methods.iter().map(|m| (*m, Vec::new())).collect(),
        failures: Vec::new(),
    };
    for (rep, (_, runs)) in reps.into_iter().enumerate() {
        for (k, r) in runs.into_iter().enumerate() {
            match r {
                Ok(t) => summary.traces[k].1.push((rep, t)),
                Err(e) => summary
                    .failures
                    .push(format!("{} replicate {rep}: {e}", methods[k].name())),
            }
        }
    }
    Ok(summary)
}

fn raw_table(runs: &[(String, Vec<(usize, RunTrace)>)]) -> Table {
    let mut t = Table::new(&["series", "replicate", "iteration", "objective"]);
    for (name, rs) in runs {
        for (rep, tr) in rs {
            for (it, v) in tr.iterations.iter().zip(&tr.objectives) {
                t.push(vec![name.clone(), rep.to_string(), it.to_string(), num(*v)]);
            }
        }
    }
    t
}

fn final_table(rows: &[(String, f64, Vec<f64>)]) -> Table {
    let mut t = Table::new(&["series", "initial_mean", "final_mean", "final_ci_low", "final_ci_high", "completed"]);
    for (name, init, finals) in rows {
        let s = AggregateSeries::from_rows(vec![0], &finals.iter().map(|v| vec![*v]).collect::<Vec<_>>());
        let (mean, lo, hi) = match &s {
            Ok(s) => (s.mean[0], s.ci_low[0], s.ci_high[0]),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        t.push(vec![
            name.clone(),
            num(*init),
            num(mean),
            num(lo),
            num(hi),
            finals.len().to_string(),
        ]);
    }
    t
}

pub fn phase_retrieval(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("phase_retrieval", cfg);
    for (idx, [d, m]) in cfg.phase_retrieval.sizes.iter().enumerate() {
        let s = run_phase_retrieval_size(cfg, idx)?;
        let tag = size_tag(*d, *m);
        let series = s.series()?;
        out.table(&tag, &series_table(&series))?;
        let named: Vec<_> = s
            .traces
            .iter()
            .map(|(m, r)| (m.name().to_string(), r.clone()))
            .collect();
        out.table(&format!("{tag}_raw"), &raw_table(&named))?;
        let finals: Vec<_> = s
            .traces
            .iter()
            .map(|(m, r)| {
                let f = r.iter().map(|(_, t)| t.final_objective().unwrap_or(f64::NAN)).collect();
                (m.name().to_string(), s.mean_initial(), f)
            })
            .collect();
        out.table(&format!("{tag}_final"), &final_table(&finals))?;
        if cfg.svg {
            out.svg(&tag, &format!("phase retrieval (d, m) = ({d}, {m})"), &series);
        }
        out.manifest.set(&format!("{tag}_iterations"), s.iterations);
        out.warnings.extend(s.failures);
    }
    out.manifest.set("replicates", cfg.replicates);
    out.manifest.set("failed_runs", out.warnings.len());
    Ok(out)
}

pub fn pair_tag(mu1: f64, mu2: f64) -> String {
    format!("mu1_{mu1:e}_mu2_{mu2:e}")
}

/// Z-ProxSG with `mu = mu2` against DSZ-ProxSG with `(mu1, mu2)`, one panel
/// per pair, on instances shared across panels.
pub fn smoothing_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("smoothing_sweep", cfg);
    let sec = &cfg.smoothing_sweep;
    let [d, m] = sec.size;
    let iterations = sec.iterations_per_measurement * m;
    let instances: Vec<PhaseRetrievalInstance> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| generate_instance(d, m, &mut replicate_stream(cfg.seed, rep, 0).split(0)))
        .collect::<Result<_>>()?;
    for (p, [mu1, mu2]) in sec.pairs.iter().enumerate() {
        let runs: Vec<[Result<RunTrace>; 2]> = instances
            .par_iter()
            .enumerate()
            .map(|(rep, inst)| {
                let rs = replicate_stream(cfg.seed, rep, 0);
                [Method::ZProxSg, Method::DszProxSg].map(|method| {
                    let seed = rs.split(1 + method_index(method)).split(p as u64).next_u64();
                    let sc = phase_retrieval_solver(method, d, iterations, *mu2, (*mu1, *mu2), seed);
                    run(inst, &inst.start, &sc)
                })
            })
            .collect();
        let mut named = vec![
            (Method::ZProxSg.name().to_string(), Vec::new()),
            (Method::DszProxSg.name().to_string(), Vec::new()),
        ];
        for (rep, pair) in runs.into_iter().enumerate() {
            for (k, r) in pair.into_iter().enumerate() {
                match r {
                    Ok(t) => named[k].1.push((rep, t)),
                    Err(e) => out.warnings.push(format!("{} panel {p} replicate {rep}: {e}", named[k].0)),
                }
            }
        }
        let series: Vec<(String, AggregateSeries)> = named
            .iter()
            .filter(|(_, r)| !r.is_empty())
            .map(|(n, r)| {
                let t: Vec<RunTrace> = r.iter().map(|(_, t)| t.clone()).collect();
                Ok((n.clone(), aggregate(&t)?))
            })
            .collect::<Result<_>>()?;
        let tag = pair_tag(*mu1, *mu2);
        out.table(&tag, &series_table(&series))?;
        out.table(&format!("{tag}_raw"), &raw_table(&named))?;
        if cfg.svg {
            out.svg(&tag, &format!("(mu1, mu2) = ({mu1:e}, {mu2:e})"), &series);
        }
    }
    out.manifest.set("size", size_tag(d, m));
    out.manifest.set("iterations", iterations);
    out.manifest.set("replicates", cfg.replicates);
    out.manifest.set("failed_runs", out.warnings.len());
    Ok(out)
}

/// Tuner settings from a config section.
pub fn tuner_config(sec: &TunerSection, equation: Equation, seed: u64) -> TunerConfig {
    let mut t = TunerConfig::standard(equation, seed);
    t.sigma_min = sec.sigma_min;
    t.sigma_max = sec.sigma_max;
    t.k = sec.k;
    t.mu = sec.mu;
    t.alpha = sec.alpha;
    t.sigma0 = sec.sigma0;
    if let Some(sizes) = &sec.sizes {
        t.training = t.training.with_sizes(sizes.clone());
    }
    t.iterations = sec.iterations.unwrap_or(200 * t.training.len());
    t
}

pub fn holdout_sampler(sec: &TunerSection, equation: Equation) -> InstanceSampler {
    let s = InstanceSampler::holdout(equation, sec.include_largest);
    match &sec.holdout_sizes {
        Some(sizes) => s.with_sizes(sizes.clone()),
        None => s,
    }
}

pub fn tune_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let equation = cfg.equation()?;
    let tag = format!("tune_{}", equation.name());
    let mut out = ExperimentOutput::new(&tag, cfg);
    let tc = tuner_config(&cfg.tuner, equation, cfg.seed);
    let (sigma_star, trace) = tune(&tc)?;
    let mut t = Table::new(&["iteration", "sigma", "objective", "step_size"]);
    for i in 0..trace.len() {
        t.push(vec![
            trace.iterations[i].to_string(),
            num(trace.iterates[i][0]),
            num(trace.objectives[i]),
            num(trace.step_sizes[i]),
        ]);
    }
    out.table("trace", &t)?;
    if cfg.svg {
        let s = AggregateSeries::from_rows(trace.iterations.clone(), &[trace.iterates.iter().map(|x| x[0]).collect()])?;
        out.svg("trace", &format!("tuned penalty, {}", equation.name()), &[("sigma".into(), s)]);
    }
    out.manifest.set("equation", equation.name());
    out.manifest.set("iterations", tc.iterations);
    out.manifest.set("k", tc.k);
    out.manifest.set("alpha", num(tc.alpha()));
    out.manifest.set("sigma0", num(tc.sigma0()));
    out.manifest.set("sigma_star", num(sigma_star));
    Ok(out)
}

/// Looks for `sigma_star` in `<root>/tune_<equation>/manifest.txt`, then in
/// the config.
pub fn resolve_sigma_star(cfg: &ExperimentConfig, root: &Path) -> Result<f64> {
    let equation = cfg.equation()?;
    if let Ok(m) = Manifest::read(&root.join(format!("tune_{}", equation.name()))) {
        if let Some(v) = m.get("sigma_star") {
            return v
                .parse()
                .map_err(|_| invalid(format!("bad sigma_star '{v}' in tuning manifest")));
        }
    }
    cfg.tuner
        .sigma_star
        .ok_or_else(|| invalid("no tuned sigma found; run `tune` first or set tuner.sigma_star"))
}

/// Per-iteration mean reduction over the holdout draws, for each penalty.
pub fn holdout_profiles(
    sec: &TunerSection,
    equation: Equation,
    sigmas: &[f64],
    seed: u64,
) -> Result<Vec<(f64, AggregateSeries)>> {
    let sampler = holdout_sampler(sec, equation);
    let mut rng = RngStream::from_seed(seed).split(HOLDOUT_STREAM);
    let specs = draw_holdout(&sampler, sec.holdout_draws, &mut rng);
    let instances: Vec<QpInstance> = specs.par_iter().map(assemble).collect::<Result<_>>()?;
    let padmm = crate::padmm::PadmmConfig::default();
    sigmas
        .iter()
        .map(|&sigma| {
            let rows = instances
                .par_iter()
                .map(|inst| reduction_profile(inst, sigma, sec.k, &padmm))
                .collect::<Result<Vec<_>>>()?;
            Ok((sigma, AggregateSeries::from_rows((0..=sec.k).collect(), &rows)?))
        })
        .collect()
}

pub fn grid_eval(cfg: &ExperimentConfig, sigma_star: f64) -> Result<ExperimentOutput> {
    let equation = cfg.equation()?;
    let mut out = ExperimentOutput::new("grid_eval", cfg);
    let mut sigmas = cfg.tuner.grid.clone();
    sigmas.push(sigma_star);
    if let Some(s) = sigmas
        .iter()
        .find(|s| !(**s >= cfg.tuner.sigma_min && **s <= cfg.tuner.sigma_max))
    {
        return Err(invalid(format!("penalty {s} outside the tuning interval")));
    }
    let profiles = holdout_profiles(&cfg.tuner, equation, &sigmas, cfg.seed)?;
    let mut grid = Table::new(&["sigma", "role", "mean", "ci_low", "ci_high", "draws"]);
    let mut prof = Table::new(&["sigma", "role", "iteration", "mean", "ci_low", "ci_high"]);
    let last = profiles.len() - 1;
    for (i, (sigma, s)) in profiles.iter().enumerate() {
        let role = if i == last { "tuned" } else { "grid" };
        let k = s.len() - 1;
        grid.push(vec![
            num(*sigma),
            role.into(),
            num(s.mean[k]),
            num(s.ci_low[k]),
            num(s.ci_high[k]),
            s.replicates.to_string(),
        ]);
        for t in 0..s.len() {
            prof.push(vec![
                num(*sigma),
                role.into(),
                s.x_axis[t].to_string(),
                num(s.mean[t]),
                num(s.ci_low[t]),
                num(s.ci_high[t]),
            ]);
        }
    }
    out.table("grid", &grid)?;
    out.table("profiles", &prof)?;
    if cfg.svg {
        let series: Vec<_> = profiles.iter().map(|(s, a)| (format!("sigma {s:.4}"), a.clone())).collect();
        out.svg("profiles", &format!("holdout residual reduction, {}", equation.name()), &series);
    }
    let tuned = profiles[last].1.final_mean().unwrap_or(f64::NAN);
    let beaten = profiles[..last]
        .iter()
        .filter(|(_, s)| tuned <= s.final_mean().unwrap_or(f64::NAN))
        .count();
    out.manifest.set("equation", equation.name());
    out.manifest.set("sigma_star", num(sigma_star));
    out.manifest.set("tuned_not_worse_than", format!("{beaten}/{last}"));
    Ok(out)
}

/// `sum_t alpha_t |grad phi(x_t)|^2 / sum_t alpha_t` along one Z-ProxSG run.
pub fn weighted_moreau_gradient(sec: &MoreauSection, iterations: usize, seed: u64) -> Result<f64> {
    let p = LogSquares::new(sec.dim, Regularizer::l1(sec.dim, sec.l1_weight))?;
    let x0 = vec![sec.start; sec.dim];
    let delta = SmoothComposite::value(&p, &x0);
    let schedule = StepSchedule::RateOptimal {
        rho: LogSquares::WEAK_CONVEXITY,
        delta,
        lipschitz: (sec.dim as f64).sqrt(),
    };
    let sc = SolverConfig::new(Method::ZProxSg, schedule, iterations, sec.mu, seed);
    let diag = MoreauDiagnostics::for_weak_convexity(LogSquares::WEAK_CONVEXITY)?;
    let (mut num_acc, mut den) = (0.0, 0.0);
    let mut err = None;
    run_observed(&p, &x0, &sc, |_, x, a| {
        if err.is_some() {
            return;
        }
        match moreau_prox(&p, x, &diag) {
            Ok(d) => {
                num_acc += a * d.gradient_norm * d.gradient_norm;
                den += a;
            }
            Err(e) => err = Some(e),
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(num_acc / den)
}

/// Weighted squared envelope gradients at the short and long run lengths.
pub fn rate_trend(sec: &MoreauSection, replicates: usize, master: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let runs: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let seed = RngStream::from_seed(master).split(rep as u64).next_u64();
            Ok((
                weighted_moreau_gradient(sec, sec.short_run, seed)?,
                weighted_moreau_gradient(sec, sec.long_run, seed)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(runs.into_iter().unzip())
}

pub fn moreau_check(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("moreau_check", cfg);
    let sec = &cfg.moreau;
    let (short, long) = rate_trend(sec, cfg.replicates, cfg.seed)?;
    let mut raw = Table::new(&["iterations", "replicate", "weighted_sq_gradient"]);
    for (t, vals) in [(sec.short_run, &short), (sec.long_run, &long)] {
        for (rep, v) in vals.iter().enumerate() {
            raw.push(vec![t.to_string(), rep.to_string(), num(*v)]);
        }
    }
    let mut summary = Table::new(&["iterations", "mean", "ci_low", "ci_high"]);
    let mut means = Vec::new();
    for (t, vals) in [(sec.short_run, &short), (sec.long_run, &long)] {
        let rows: Vec<Vec<f64>> = vals.iter().map(|v| vec![*v]).collect();
        let s = AggregateSeries::from_rows(vec![t], &rows)?;
        means.push(s.mean[0]);
        summary.push(vec![t.to_string(), num(s.mean[0]), num(s.ci_low[0]), num(s.ci_high[0])]);
    }
    out.table("rate", &raw)?;
    out.table("summary", &summary)?;
    out.manifest.set("ratio", num(means[0] / means[1]));
    out.manifest.set("replicates", cfg.replicates);
    Ok(out)
}

/// Scaled-down configs for every experiment.
pub fn selftest_configs(cfg: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let base = ExperimentConfig {
        seed: cfg.seed,
        replicates: 3,
        solvers: cfg.solvers.clone(),
        output_dir: cfg.output_dir.clone(),
        svg: cfg.svg,
        ..ExperimentConfig::default()
    };
    let mut pr = ExperimentConfig {
        experiment: ExperimentKind::PhaseRetrieval,
        ..base.clone()
    };
    pr.phase_retrieval.sizes = vec![[5, 10]];
    pr.phase_retrieval.iterations_per_measurement = 50;
    let mut sw = ExperimentConfig {
        experiment: ExperimentKind::SmoothingSweep,
        ..base.clone()
    };
    sw.smoothing_sweep.size = [5, 10];
    sw.smoothing_sweep.iterations_per_measurement = 50;
    sw.smoothing_sweep.pairs.truncate(2);
    let mut tu = ExperimentConfig {
        experiment: ExperimentKind::TunePoisson,
        ..base.clone()
    };
    tu.tuner.sizes = Some(vec![9]);
    tu.tuner.iterations = Some(40);
    tu.tuner.k = 5;
    tu.tuner.holdout_draws = 4;
    tu.tuner.holdout_sizes = Some(vec![9, 17]);
    let ge = ExperimentConfig {
        experiment: ExperimentKind::GridEval,
        ..tu.clone()
    };
    let mut mc = ExperimentConfig {
        experiment: ExperimentKind::MoreauCheck,
        ..base
    };
    mc.moreau.short_run = 50;
    mc.moreau.long_run = 200;
    vec![pr, sw, tu, ge, mc]
}

fn selftest_once(cfg: &ExperimentConfig) -> Result<Vec<ExperimentOutput>> {
    let mut outs = Vec::new();
    let mut sigma_star = None;
    for c in selftest_configs(cfg) {
        let o = match c.experiment {
            ExperimentKind::PhaseRetrieval => phase_retrieval(&c)?,
            ExperimentKind::SmoothingSweep => smoothing_sweep(&c)?,
            ExperimentKind::TunePoisson => {
                let o = tune_experiment(&c)?;
                sigma_star = o.manifest.get("sigma_star").and_then(|v| v.parse().ok());
                o
            }
            ExperimentKind::GridEval => {
                grid_eval(&c, sigma_star.ok_or_else(|| invalid("selftest tuning produced no sigma"))?)?
            }
            _ => moreau_check(&c)?,
        };
        outs.push(o);
    }
    Ok(outs)
}

/// Runs the scaled-down suite twice and fails unless every file matches.
pub fn selftest(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let first = selftest_once(cfg)?;
    let second = selftest_once(cfg)?;
    let mut out = ExperimentOutput::new("selftest", cfg);
    let mut checked = 0;
    for (a, b) in first.iter().zip(&second) {
        if a.files != b.files || a.manifest != b.manifest {
            return Err(invalid(format!("selftest: {} differs between reruns", a.experiment)));
        }
        for (rel, text) in &a.files {
            out.files.push((Path::new(&a.experiment).join(rel), text.clone()));
            checked += 1;
        }
        out.files.push((Path::new(&a.experiment).join("manifest.txt"), a.manifest.render()));
        out.warnings.extend(a.warnings.iter().cloned());
    }
    out.manifest.set("files_compared", checked);
    out.manifest.set("determinism", "ok");
    Ok(out)
}

/// Dispatches on `cfg.experiment`; `root` is consulted for a prior tuning
/// manifest when evaluating the grid.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::PhaseRetrieval => phase_retrieval(cfg),
        ExperimentKind::SmoothingSweep => smoothing_sweep(cfg),
        ExperimentKind::TunePoisson | ExperimentKind::TuneConvdiff => tune_experiment(cfg),
        ExperimentKind::GridEval => grid_eval(cfg, resolve_sigma_star(cfg, root)?),
        ExperimentKind::MoreauCheck => moreau_check(cfg),
        ExperimentKind::Selftest => selftest(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_retrieval_series_set() {
        let mut cfg = selftest_configs(&ExperimentConfig::default()).remove(0);
        cfg.replicates = 2;
        let out = phase_retrieval(&cfg).unwrap();
        let t = Table::from_csv(out.file("d5_m10.csv").unwrap()).unwrap();
        let col = t.column("series").unwrap();
        let mut names: Vec<&str> = t.rows.iter().map(|r| r[col].as_str()).collect();
        names.dedup();
        assert_eq!(names, Method::ALL.map(|m| m.name()).to_vec());
        assert!(out.file("d5_m10_raw.csv").is_some());
        assert!(out.file("d5_m10_final.csv").is_some());
    }

    #[test]
    fn single_replicate_band_collapses() {
        let mut cfg = selftest_configs(&ExperimentConfig::default()).remove(0);
        cfg.replicates = 1;
        cfg.solvers = vec!["z-proxsg".into()];
        let s = run_phase_retrieval_size(&cfg, 0).unwrap();
        let series = s.series().unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].1.ci_low, series[0].1.mean);
    }

    #[test]
    fn smoothing_sweep_panels() {
        let cfg = selftest_configs(&ExperimentConfig::default()).remove(1);
        let out = smoothing_sweep(&cfg).unwrap();
        let csvs = out.files.iter().filter(|(p, _)| !p.to_string_lossy().ends_with("_raw.csv")).count();
        assert_eq!(csvs, cfg.smoothing_sweep.pairs.len());
    }

    #[test]
    fn grid_eval_needs_a_sigma() {
        let cfg = ExperimentConfig::for_experiment(ExperimentKind::GridEval);
        let dir = tempfile::tempdir().unwrap();
        assert!(resolve_sigma_star(&cfg, dir.path()).is_err());
        let mut with = cfg.clone();
        with.tuner.sigma_star = Some(0.3);
        assert_eq!(resolve_sigma_star(&with, dir.path()).unwrap(), 0.3);
    }
}
