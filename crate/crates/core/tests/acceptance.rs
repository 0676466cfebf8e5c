//! Acceptance suite. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test -p zoprox --release --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use common::{reference_solve, report, verdict};
use zoprox::harness::experiments::{holdout_profiles, rate_trend, run_phase_retrieval_size};
use zoprox::harness::{run_experiment, ExperimentConfig, ExperimentKind};
use zoprox::linalg::{dist, dot, mean_stderr, norm2};
use zoprox::moreau::{moreau_prox, prox_fixed_point_residual, LogSquares, MoreauDiagnostics, Quadratic, SmoothComposite};
use zoprox::padmm::{run_padmm, PadmmConfig, DEFAULT_SIGMA_GRID};
use zoprox::pde::{assemble, Equation, InstanceSampler, PdeSpec};
use zoprox::smoothing::{gaussian_estimate, sample_standard_normal};
use zoprox::solvers::Method;
use zoprox::tuner::{tune, tune_problem, TunerConfig};
use zoprox::{BoxSet, FnProblem, Regularizer, RngStream};

const SEED: u64 = 2024;

const MC_DRAWS: usize = 100_000;
const MC_SE_FACTOR: f64 = 3.0;
const SECOND_MOMENT_SLACK: f64 = 1.05;

const HUBER_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-10;
const FIXED_POINT_TOL: f64 = 1e-7;

const DECREASE_FACTOR: f64 = 0.1;
const PAIR_FACTOR: f64 = 2.0;

const RATE_LOW: f64 = 1.4;
const RATE_HIGH: f64 = 3.0;
const RATE_SEEDS: usize = 20;

const QP_REL_GAP: f64 = 1e-5;
const QP_MAX_DIM: usize = 200;
const SMALL_RESIDUAL: f64 = 1e-6;
const SMALL_RESIDUAL_ITERS: usize = 5000;

const TUNER_TOL: f64 = 0.1;
const TUNER_SEEDS: u64 = 5;
const GRID_WINS_NEEDED: usize = 4;

fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let q = nalgebra::DMatrix::from_fn(n, n, |_, _| sample_standard_normal(rng, 1)[0]).qr().q();
    let eig: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64).collect();
    let h = &q * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig)) * q.transpose();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

fn mat_vec(h: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    h.iter().map(|r| dot(r, x)).collect()
}

#[test]
fn estimator_suite() {
    let mut rng = RngStream::from_seed(SEED);
    let mut worst_z = 0.0f64;
    let mut worst_moment = 0.0f64;
    let mut worst_smooth = f64::NEG_INFINITY;
    let mu = 0.1;
    for n in [2usize, 5, 10] {
        // Unbiasedness on a quadratic: the smoothed gradient equals the true one.
        let h = random_spd(n, 0.5, 3.0, &mut rng);
        let g: Vec<f64> = sample_standard_normal(&mut rng, n);
        let x = sample_standard_normal(&mut rng, n);
        let hq = h.clone();
        let gq = g.clone();
        let quad = FnProblem::deterministic(n, move |y: &[f64], _: &()| 0.5 * dot(y, &mat_vec(&hq, y)) + dot(&gq, y));
        let grad: Vec<f64> = mat_vec(&h, &x).iter().zip(&g).map(|(a, b)| a + b).collect();
        let mut u_rng = rng.split(10 + n as u64);
        let mut xi_rng = rng.split(20 + n as u64);
        let draws: Vec<Vec<f64>> = (0..MC_DRAWS)
            .map(|_| gaussian_estimate(&quad, &x, mu, &mut u_rng, &mut xi_rng).unwrap().direction)
            .collect();
        for i in 0..n {
            let col: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            let (m, se) = mean_stderr(&col);
            worst_z = worst_z.max((m - grad[i]).abs() / se);
        }

        // Second moment and smoothing error for F = L |x|.
        let l = 1.5;
        let normf = FnProblem::deterministic(n, move |y: &[f64], _: &()| l * norm2(y));
        let bound = (n * n + 2 * n) as f64 * l * l;
        for point in [vec![0.0; n], sample_standard_normal(&mut rng, n)] {
            let mut u_rng = rng.split(30 + n as u64);
            let mut xi_rng = rng.split(40 + n as u64);
            let sq: Vec<f64> = (0..MC_DRAWS)
                .map(|_| {
                    let d = gaussian_estimate(&normf, &point, mu, &mut u_rng, &mut xi_rng).unwrap().direction;
                    dot(&d, &d)
                })
                .collect();
            let (m2, _) = mean_stderr(&sq);
            worst_moment = worst_moment.max(m2 / bound);

            let mut u_rng = rng.split(50 + n as u64);
            let f0 = l * norm2(&point);
            let diffs: Vec<f64> = (0..MC_DRAWS)
                .map(|_| {
                    let u = sample_standard_normal(&mut u_rng, n);
                    let y: Vec<f64> = point.iter().zip(&u).map(|(a, b)| a + mu * b).collect();
                    l * norm2(&y) - f0
                })
                .collect();
            let (md, se) = mean_stderr(&diffs);
            let allowed = mu * l * (n as f64).sqrt();
            worst_smooth = worst_smooth.max(md.abs() - MC_SE_FACTOR * se - allowed);
        }
    }
    let ok_bias = worst_z <= MC_SE_FACTOR;
    let ok_moment = worst_moment <= SECOND_MOMENT_SLACK;
    let ok_smooth = worst_smooth <= 0.0;
    let ok = ok_bias && ok_moment && ok_smooth;
    report(&format!(
        "[{}] 1 estimator suite: max |bias|/se = {worst_z:.3} (<= {MC_SE_FACTOR}), \
         max E|G|^2 / ((n^2+2n)L^2) = {worst_moment:.4} (<= {SECOND_MOMENT_SLACK}), \
         smoothing error margin = {worst_smooth:.3e} (<= 0)",
        verdict(ok)
    ));
    assert!(ok);
}

fn huber(u: f64, lambda: f64) -> (f64, f64, f64) {
    if u.abs() <= lambda {
        (0.0, u * u / (2.0 * lambda), u / lambda)
    } else {
        (u - lambda * u.signum(), u.abs() - lambda / 2.0, u.signum())
    }
}

#[test]
fn moreau_diagnostics() {
    let abs = Quadratic::new(vec![vec![0.0]], vec![0.0], Regularizer::l1(1, 1.0)).unwrap();
    let mut huber_err = 0.0f64;
    for lambda in [0.25, 1.0, 2.0] {
        let diag = MoreauDiagnostics::with_lambda(lambda).unwrap().with_tolerance(1e-14, 100_000);
        for u in [-3.0, -1.0, -0.3, 0.0, 0.2, 0.5, 0.99, 1.01, 2.5] {
            let out = moreau_prox(&abs, &[u], &diag).unwrap();
            let (p, env, grad) = huber(u, lambda);
            huber_err = huber_err
                .max((out.prox_point[0] - p).abs())
                .max((out.envelope_value - env).abs())
                .max((out.gradient(&[u])[0] - grad).abs());
        }
    }

    let mut rng = RngStream::from_seed(SEED).split(2);
    let mut identity_err = 0.0f64;
    let mut fd_err = 0.0f64;
    let mut fixed_point = 0.0f64;
    let logsq = LogSquares::new(3, Regularizer::l1(3, 0.1)).unwrap();
    let logdiag = MoreauDiagnostics::for_weak_convexity(LogSquares::WEAK_CONVEXITY)
        .unwrap()
        .with_tolerance(1e-12, 100_000);
    for _ in 0..5 {
        let u: Vec<f64> = sample_standard_normal(&mut rng, 3).iter().map(|v| 2.0 * v).collect();
        let out = moreau_prox(&logsq, &u, &logdiag).unwrap();
        let lhs = dist(&out.prox_point, &u);
        identity_err = identity_err.max((lhs - out.lambda * norm2(&out.gradient(&u))).abs());
    }
    for case in 0..12usize {
        let n = 2 + case % 4;
        // Weakly convex cases shift the spectrum below zero.
        let rho = if case % 2 == 0 { 0.0 } else { 0.5 };
        let h = random_spd(n, 0.5 - rho * 2.0, 4.0, &mut rng);
        let lin = sample_standard_normal(&mut rng, n);
        let reg = match case % 3 {
            0 => Regularizer::l1(n, 0.3),
            1 => Regularizer::Box(BoxSet::uniform(n, -0.5, 0.8).unwrap()),
            _ => Regularizer::Zero,
        };
        let q = Quadratic::new(h, lin, reg).unwrap();
        let diag = MoreauDiagnostics::for_weak_convexity(rho.max(0.25) * 2.0)
            .unwrap()
            .with_tolerance(1e-12, 1_000_000);
        let x = sample_standard_normal(&mut rng, n);
        for alpha in [0.25 * diag.lambda, 0.5 * diag.lambda, diag.lambda] {
            fixed_point = fixed_point.max(prox_fixed_point_residual(&q, &x, alpha, &diag).unwrap());
        }
        let out = moreau_prox(&q, &x, &diag).unwrap();
        identity_err = identity_err.max((dist(&out.prox_point, &x) - out.lambda * out.gradient_norm).abs());
        // Central differences of the envelope against its gradient formula.
        let grad = out.gradient(&x);
        let step = 1e-5;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            let fp = moreau_prox(&q, &xp, &diag).unwrap().envelope_value;
            let fm = moreau_prox(&q, &xm, &diag).unwrap().envelope_value;
            fd_err = fd_err.max(((fp - fm) / (2.0 * step) - grad[i]).abs());
        }
        assert!(SmoothComposite::value(&q, &out.prox_point).is_finite());
    }
    let ok = huber_err <= HUBER_TOL && identity_err <= IDENTITY_TOL && fixed_point <= FIXED_POINT_TOL && fd_err <= 1e-5;
    report(&format!(
        "[{}] 2 moreau diagnostics: huber error = {huber_err:.2e} (<= {HUBER_TOL:e}), \
         gradient identity error = {identity_err:.2e} (<= {IDENTITY_TOL:e}), \
         fixed-point residual = {fixed_point:.2e} (<= {FIXED_POINT_TOL:e}), \
         finite-difference gap = {fd_err:.2e}",
        verdict(ok)
    ));
    assert!(ok);
}

#[test]
fn phase_retrieval_ordering() {
    let cfg = ExperimentConfig::for_experiment(ExperimentKind::PhaseRetrieval);
    assert_eq!(cfg.phase_retrieval.sizes, vec![[10, 30]]);
    assert_eq!(cfg.replicates, 15);
    let s = run_phase_retrieval_size(&cfg, 0).unwrap();
    let f0 = s.mean_initial();
    let finals: BTreeMap<&str, f64> = Method::ALL
        .iter()
        .map(|m| (m.name(), s.mean_final(*m).unwrap_or(f64::NAN)))
        .collect();
    let ssg = finals["proxssg"];
    let ok_a = Method::ALL
        .iter()
        .filter(|m| m.is_zeroth_order())
        .all(|m| ssg <= finals[m.name()]);
    let ok_b = finals.values().all(|v| *v <= DECREASE_FACTOR * f0);
    let (z, dsz) = (finals["z-proxsg"], finals["dsz-proxsg"]);
    let ok_c = z.max(dsz) <= PAIR_FACTOR * z.min(dsz);
    let ok = ok_a && ok_b && ok_c && s.failures.is_empty();
    let listing: Vec<String> = finals.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
    report(&format!(
        "[{}] 3 phase retrieval (10,30): (a) subgradient best {} (b) <= {DECREASE_FACTOR} x initial {} \
         (c) z/dsz within factor {PAIR_FACTOR} {}; initial={f0:.4e} {}; failures={}",
        verdict(ok),
        verdict(ok_a),
        verdict(ok_b),
        verdict(ok_c),
        listing.join(" "),
        s.failures.len()
    ));
    assert!(ok);
}

#[test]
fn rate_trend_of_moreau_gradient() {
    let cfg = ExperimentConfig::for_experiment(ExperimentKind::MoreauCheck);
    assert_eq!(cfg.moreau.long_run, 4 * cfg.moreau.short_run);
    let (short, long) = rate_trend(&cfg.moreau, RATE_SEEDS, SEED).unwrap();
    let ms = short.iter().sum::<f64>() / short.len() as f64;
    let ml = long.iter().sum::<f64>() / long.len() as f64;
    let ratio = ms / ml;
    let ok = (RATE_LOW..=RATE_HIGH).contains(&ratio);
    report(&format!(
        "[{}] 4 rate trend: T={} mean={ms:.4e}, T={} mean={ml:.4e}, ratio={ratio:.3} in [{RATE_LOW}, {RATE_HIGH}]",
        verdict(ok),
        cfg.moreau.short_run,
        cfg.moreau.long_run
    ));
    assert!(ok);
}

fn small_instances() -> Vec<PdeSpec> {
    let mut specs = Vec::new();
    for eq in [Equation::Poisson, Equation::ConvectionDiffusion] {
        for sampler in [InstanceSampler::training(eq), InstanceSampler::holdout(eq, false)] {
            specs.extend(
                sampler
                    .triples()
                    .into_iter()
                    .filter(|s| 2 * s.grid_points_per_side * s.grid_points_per_side <= QP_MAX_DIM),
            );
        }
        for n in [3, 5] {
            specs.push(PdeSpec::new(eq, n, 1e-2, 1e-4));
            specs.push(PdeSpec::new(eq, n, 0.0, 0.0));
        }
    }
    specs
}

#[test]
fn padmm_matches_reference() {
    let accurate = PadmmConfig {
        residual_tol: 1e-11,
        max_iters: 200_000,
        ..PadmmConfig::with_sigma(0.1)
    };
    let mut worst_gap = 0.0f64;
    let mut worst_spec = None;
    let specs = small_instances();
    for spec in &specs {
        let inst = assemble(spec).unwrap();
        let (_, f_ref) = reference_solve(&inst);
        let (st, _) = run_padmm(&inst, &accurate, &vec![0.0; inst.n()]).unwrap();
        let f = inst.objective(&st.x);
        let gap = (f - f_ref).abs() / f_ref.abs().max(f64::MIN_POSITIVE);
        if gap > worst_gap {
            worst_gap = gap;
            worst_spec = Some(*spec);
        }
    }

    let mut smallest = Vec::new();
    let sampler = InstanceSampler::training(Equation::Poisson);
    let n_min = *sampler.sizes.iter().min().unwrap();
    for spec in sampler.triples().into_iter().filter(|s| s.grid_points_per_side == n_min) {
        let inst = assemble(&spec).unwrap();
        let best = DEFAULT_SIGMA_GRID
            .iter()
            .map(|&s| {
                let cfg = PadmmConfig {
                    residual_tol: SMALL_RESIDUAL,
                    max_iters: SMALL_RESIDUAL_ITERS,
                    ..PadmmConfig::with_sigma(s)
                };
                let (st, _) = run_padmm(&inst, &cfg, &vec![0.0; inst.n()]).unwrap();
                (st.residuals.scaled, st.iter, s)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        smallest.push((spec, best));
    }
    let ok_gap = worst_gap <= QP_REL_GAP;
    let ok_small = smallest.iter().all(|(_, (r, _, _))| *r <= SMALL_RESIDUAL);
    let slowest = smallest.iter().map(|(_, (_, it, _))| *it).max().unwrap();
    let ok = ok_gap && ok_small;
    report(&format!(
        "[{}] 5 padmm: {} instances with n <= {QP_MAX_DIM}, worst relative gap = {worst_gap:.2e} (<= {QP_REL_GAP:e}) at {:?}; \
         residual <= {SMALL_RESIDUAL:e} within {SMALL_RESIDUAL_ITERS} steps on all {} smallest Poisson instances {} (worst {slowest} steps)",
        verdict(ok),
        specs.len(),
        worst_spec,
        smallest.len(),
        verdict(ok_small)
    ));
    assert!(ok);
}

#[test]
fn tuner_validation() {
    // (a) synthetic black box with a known minimiser.
    let mut located = Vec::new();
    let mut oracle_gap = 0.0f64;
    for seed in 0..TUNER_SEEDS {
        let cfg = TunerConfig::standard(Equation::Poisson, SEED + seed);
        let p = FnProblem::stochastic(
            1,
            |rng: &mut RngStream| sample_standard_normal(rng, 1)[0],
            |x: &[f64], noise: &f64| (x[0] - 2.0).powi(2) + 0.01 * noise,
        )
        .with_regularizer(cfg.interval().unwrap());
        let (s, _) = tune_problem(&p, &cfg).unwrap();
        // Grid search over the same box on the sample mean of the black box.
        let mut rng = RngStream::from_seed(SEED + seed).split(99);
        let noise: Vec<f64> = sample_standard_normal(&mut rng, 400);
        let grid = (0..=4000).map(|i| cfg.sigma_min * (cfg.sigma_max / cfg.sigma_min).powf(i as f64 / 4000.0));
        let best = grid
            .map(|g| {
                let v = noise.iter().map(|e| (g - 2.0f64).powi(2) + 0.01 * e).sum::<f64>() / noise.len() as f64;
                (v, g)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        oracle_gap = oracle_gap.max((s - best).abs());
        located.push(s);
    }
    let ok_a = located.iter().all(|s| (s - 2.0).abs() <= TUNER_TOL) && oracle_gap <= TUNER_TOL;

    // (b) the Poisson family, checked on holdout draws.
    let cfg = TunerConfig::standard(Equation::Poisson, SEED);
    assert_eq!(cfg.iterations, 200 * 80);
    let (sigma_star, _) = tune(&cfg).unwrap();
    let exp = ExperimentConfig::for_experiment(ExperimentKind::GridEval);
    let mut sigmas = DEFAULT_SIGMA_GRID.to_vec();
    sigmas.push(sigma_star);
    let profiles = holdout_profiles(&exp.tuner, Equation::Poisson, &sigmas, SEED).unwrap();
    let tuned = profiles.last().unwrap().1.final_mean().unwrap();
    let wins = profiles[..DEFAULT_SIGMA_GRID.len()]
        .iter()
        .filter(|(_, s)| tuned <= s.final_mean().unwrap())
        .count();
    let ok_b = wins >= GRID_WINS_NEEDED;
    let listing: Vec<String> = profiles
        .iter()
        .map(|(s, a)| format!("{s:.4}:{:.4}", a.final_mean().unwrap()))
        .collect();
    let ok = ok_a && ok_b;
    report(&format!(
        "[{}] 6 tuner: (a) {} synthetic minimiser found at {:?}, max gap to grid oracle {oracle_gap:.2e}; \
         (b) {} sigma* = {sigma_star:.4}, not worse than {wins}/{} grid values (need {GRID_WINS_NEEDED}); mean reductions {}",
        verdict(ok),
        verdict(ok_a),
        located.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>(),
        verdict(ok_b),
        DEFAULT_SIGMA_GRID.len(),
        listing.join(" ")
    ));
    assert!(ok);
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            out.insert(rel, fs::read(&path).unwrap());
        }
    }
}

#[test]
fn selftest_determinism() {
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            output_dir: dir.path().to_path_buf(),
            ..ExperimentConfig::for_experiment(ExperimentKind::Selftest)
        };
        let out = run_experiment(&cfg, dir.path()).unwrap();
        out.write(dir.path()).unwrap();
        let mut files = BTreeMap::new();
        collect_files(dir.path(), dir.path(), &mut files);
        trees.push(files);
    }
    let csvs = trees[0].keys().filter(|k| k.ends_with(".csv")).count();
    let ok = trees[0] == trees[1] && csvs > 0;
    report(&format!(
        "[{}] 7 determinism: {} files ({csvs} csv) byte-identical across selftest reruns",
        verdict(ok),
        trees[0].len()
    ));
    assert!(ok);
}
