//! Proximal ADMM for [`QpInstance`] problems.
//!
//! Splits `x = w`, keeps the box and the `l1` term on `w`, and adds the
//! proximal term `|x - x_t|^2_R / 2` with `R = sigma_hat I - Off(Q)` to the
//! x-update so that only `Diag(Q)` enters the linear system
//!
//! ```text
//! (Diag(Q) + sigma_hat I + sigma A^T A + sigma I) x
//!     = -c + A^T y1 - y2 + sigma A^T b + sigma w + sigma_hat x_t - Off(Q) x_t.
//! ```
//!
//! The system is solved matrix-free by preconditioned CG, warm-started at
//! `x_t`.

use std::io::Write;

use crate::cg::{jacobi, pcg};
use crate::error::{invalid, Result};
use crate::linalg::{dist, norm2};
use crate::pde::QpInstance;
use crate::prox::prox_box_soft_threshold;
use crate::sparse::CsrMatrix;
use crate::spectral::PoissonBlockSolver;

/// Six log-spaced penalties spanning `[1e-2, 1e2]`.
pub const DEFAULT_SIGMA_GRID: [f64; 6] = [
    0.01,
    0.063_095_734_448_019_32,
    0.398_107_170_553_497_25,
    2.511_886_431_509_58,
    15.848_931_924_611_133,
    100.0,
];

/// Dual step used throughout the experiments.
pub const DEFAULT_GAMMA: f64 = 1.618;

/// Lower bound on the automatic `sigma_hat`, which keeps `R` definite when
/// `Q` is diagonal.
pub const SIGMA_HAT_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PadmmConfig {
    pub sigma: f64,
    pub gamma: f64,
    /// `None` picks [`default_sigma_hat`].
    pub sigma_hat: Option<f64>,
    pub max_iters: usize,
    pub linsolve_tol: f64,
    pub linsolve_max_iters: usize,
    pub residual_tol: f64,
}

impl Default for PadmmConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            gamma: DEFAULT_GAMMA,
            sigma_hat: None,
            max_iters: 5000,
            linsolve_tol: 1e-10,
            linsolve_max_iters: 10_000,
            residual_tol: 1e-6,
        }
    }
}

impl PadmmConfig {
    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        let golden = 0.5 * (1.0 + 5f64.sqrt());
        if !(self.gamma > 0.0 && self.gamma < golden) {
            return Err(invalid(format!(
                "gamma must lie in (0, (1 + sqrt 5) / 2), got {}",
                self.gamma
            )));
        }
        if let Some(s) = self.sigma_hat {
            if !(s >= 0.0) {
                return Err(invalid(format!("sigma_hat must be nonnegative, got {s}")));
            }
        }
        if !(self.linsolve_tol > 0.0) {
            return Err(invalid("linsolve_tol must be positive"));
        }
        Ok(())
    }
}

/// `max(1.01 * max_i sum_{j != i} |q_ij|, SIGMA_HAT_FLOOR)`.
pub fn default_sigma_hat(q: &CsrMatrix) -> f64 {
    (1.01 * q.max_offdiag_row_sum()).max(SIGMA_HAT_FLOOR)
}

/// Residual components of an iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// `|A x - b|`.
    pub equality: f64,
    /// `|w - x|`.
    pub coupling: f64,
    /// `|c + Q x - A^T y1 + y2|`.
    pub stationarity: f64,
    /// `dist(y2, subdifferential of |D.|_1 + delta_K at w)`.
    pub inclusion: f64,
    /// Maximum of the four, each divided by `1 + |b|`, `1 + |x|`, `1 + |c|`,
    /// `1 + |c|` respectively.
    pub scaled: f64,
}

impl Residuals {
    pub fn primal(&self) -> f64 {
        self.equality.max(self.coupling)
    }

    pub fn dual(&self) -> f64 {
        self.stationarity.max(self.inclusion)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PadmmState {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub iter: usize,
    pub residuals: Residuals,
    pub cg_iterations: usize,
}

impl PadmmState {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            x: vec![0.0; n],
            w: vec![0.0; n],
            y1: vec![0.0; m],
            y2: vec![0.0; n],
            iter: 0,
            residuals: Residuals::default(),
            cg_iterations: 0,
        }
    }

    pub fn primal_residual(&self) -> f64 {
        self.residuals.primal()
    }

    pub fn dual_residual(&self) -> f64 {
        self.residuals.dual()
    }
}

/// One row of a residual history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub scaled: f64,
}

/// Precomputed operator data for one instance and penalty.
pub struct Padmm<'a> {
    inst: &'a QpInstance,
    cfg: PadmmConfig,
    sigma_hat: f64,
    /// `Diag(Q) + sigma_hat + sigma`.
    shift: Vec<f64>,
    off_q: Option<CsrMatrix>,
    inv_precond: Vec<f64>,
    spectral: Option<PoissonBlockSolver>,
    b_norm: f64,
    c_norm: f64,
}

fn interval_distance(y: f64, w: f64, weight: f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = if w > 0.0 {
        (weight, weight)
    } else if w < 0.0 {
        (-weight, -weight)
    } else {
        (-weight, weight)
    };
    if w >= hi {
        b = f64::INFINITY;
    }
    if w <= lo {
        a = f64::NEG_INFINITY;
    }
    if y < a {
        a - y
    } else if y > b {
        y - b
    } else {
        0.0
    }
}

impl<'a> Padmm<'a> {
    pub fn new(inst: &'a QpInstance, cfg: PadmmConfig) -> Result<Self> {
        cfg.validate()?;
        let sigma_hat = cfg.sigma_hat.unwrap_or_else(|| default_sigma_hat(&inst.q));
        let shift: Vec<f64> = inst.q.diag().iter().map(|d| d + sigma_hat + cfg.sigma).collect();
        let off_q = (!inst.q.is_diagonal()).then(|| inst.q.off_diagonal());
        let col = inst.a.column_norms_sq();
        let spectral = PoissonBlockSolver::detect(inst, &shift, cfg.sigma);
        let inv_precond = shift
            .iter()
            .zip(&col)
            .map(|(d, cn)| 1.0 / (d + cfg.sigma * cn))
            .collect();
        Ok(Self {
            inst,
            cfg,
            sigma_hat,
            shift,
            off_q,
            inv_precond,
            spectral,
            b_norm: norm2(&inst.b),
            c_norm: norm2(&inst.c),
        })
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }

    pub fn config(&self) -> &PadmmConfig {
        &self.cfg
    }

    /// `(Diag(Q) + sigma_hat I + sigma A^T A + sigma I) v`.
    pub fn apply_system(&self, v: &[f64], out: &mut [f64]) {
        self.inst.a.gram_mul_into(v, out);
        let s = self.cfg.sigma;
        for ((o, vi), d) in out.iter_mut().zip(v).zip(&self.shift) {
            *o = s * *o + d * vi;
        }
    }

    /// Right-hand side of the x-update.
    pub fn system_rhs(&self, state: &PadmmState, w: &[f64]) -> Vec<f64> {
        let s = self.cfg.sigma;
        let mut t = self.inst.b.iter().map(|b| s * b).collect::<Vec<_>>();
        for (ti, yi) in t.iter_mut().zip(&state.y1) {
            *ti += yi;
        }
        let mut rhs = self.inst.a.mul_transpose_vec(&t);
        let off = self.off_q.as_ref().map(|o| o.mul_vec(&state.x));
        for i in 0..rhs.len() {
            rhs[i] += -self.inst.c[i] - state.y2[i] + s * w[i] + self.sigma_hat * state.x[i];
            if let Some(off) = &off {
                rhs[i] -= off[i];
            }
        }
        rhs
    }

    pub fn residuals(&self, state: &PadmmState) -> Residuals {
        let inst = self.inst;
        let ax = inst.a.mul_vec(&state.x);
        let equality = dist(&ax, &inst.b);
        let coupling = dist(&state.w, &state.x);
        let qx = inst.q.mul_vec(&state.x);
        let aty = inst.a.mul_transpose_vec(&state.y1);
        let stationarity = inst
            .c
            .iter()
            .zip(&qx)
            .zip(&aty)
            .zip(&state.y2)
            .map(|(((c, q), a), y)| (c + q - a + y).powi(2))
            .sum::<f64>()
            .sqrt();
        let lo = inst.bounds.lower();
        let hi = inst.bounds.upper();
        let inclusion = (0..inst.n())
            .map(|i| interval_distance(state.y2[i], state.w[i], inst.d[i], lo[i], hi[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let scaled = (equality / (1.0 + self.b_norm))
            .max(coupling / (1.0 + norm2(&state.x)))
            .max(stationarity / (1.0 + self.c_norm))
            .max(inclusion / (1.0 + self.c_norm));
        Residuals {
            equality,
            coupling,
            stationarity,
            inclusion,
            scaled,
        }
    }

    /// One pADMM iteration, updating `state` in place.
    pub fn step(&self, state: &mut PadmmState) -> Result<()> {
        let inst = self.inst;
        let s = self.cfg.sigma;
        let v: Vec<f64> = state.x.iter().zip(&state.y2).map(|(x, y)| x + y / s).collect();
        let w = prox_box_soft_threshold(&v, &inst.d, 1.0 / s, &inst.bounds)?;

        let rhs = self.system_rhs(state, &w);
        let mut x = state.x.clone();
        let apply = |v: &[f64], o: &mut [f64]| self.apply_system(v, o);
        let (tol, max) = (self.cfg.linsolve_tol, self.cfg.linsolve_max_iters);
        let out = match &self.spectral {
            Some(sp) => pcg(apply, &rhs, |r, o| sp.solve(r, o), &mut x, tol, max)?,
            None => pcg(apply, &rhs, jacobi(&self.inv_precond), &mut x, tol, max)?,
        };

        let gs = self.cfg.gamma * s;
        let ax = inst.a.mul_vec(&x);
        for ((y, a), b) in state.y1.iter_mut().zip(&ax).zip(&inst.b) {
            *y -= gs * (a - b);
        }
        for ((y, wi), xi) in state.y2.iter_mut().zip(&w).zip(&x) {
            *y -= gs * (wi - xi);
        }
        state.x = x;
        state.w = w;
        state.iter += 1;
        state.cg_iterations += out.iterations;
        state.residuals = self.residuals(state);
        Ok(())
    }

    pub fn initial_state(&self, x_start: &[f64]) -> Result<PadmmState> {
        if x_start.len() != self.inst.n() {
            return Err(invalid(format!(
                "start has length {}, instance has n = {}",
                x_start.len(),
                self.inst.n()
            )));
        }
        let mut st = PadmmState::zeros(self.inst.n(), self.inst.m());
        st.x = x_start.to_vec();
        st.w = x_start.to_vec();
        st.residuals = self.residuals(&st);
        Ok(st)
    }
}

fn row(st: &PadmmState) -> HistoryRow {
    HistoryRow {
        iteration: st.iter,
        primal: st.residuals.primal(),
        dual: st.residuals.dual(),
        scaled: st.residuals.scaled,
    }
}

/// Iterates from `(x_start, x_start, 0, 0)` until the scaled residual drops
/// to `residual_tol` or `max_iters` steps are taken. History row 0 is the
/// starting point.
pub fn run_padmm(
    inst: &QpInstance,
    cfg: &PadmmConfig,
    x_start: &[f64],
) -> Result<(PadmmState, Vec<HistoryRow>)> {
    let solver = Padmm::new(inst, *cfg)?;
    let mut st = solver.initial_state(x_start)?;
    let mut hist = vec![row(&st)];
    while st.iter < cfg.max_iters && st.residuals.scaled > cfg.residual_tol {
        solver.step(&mut st)?;
        hist.push(row(&st));
    }
    Ok((st, hist))
}

/// Scaled residual after `k` steps from the zero start, divided by its
/// value at the start. Returns 0 when the zero start is already exact.
pub fn residual_reduction(inst: &QpInstance, sigma: f64, k: usize, base: &PadmmConfig) -> Result<f64> {
    let cfg = PadmmConfig { sigma, ..*base };
    let solver = Padmm::new(inst, cfg)?;
    let mut st = solver.initial_state(&vec![0.0; inst.n()])?;
    let r0 = st.residuals.scaled;
    if r0 == 0.0 {
        return Ok(0.0);
    }
    for _ in 0..k {
        solver.step(&mut st)?;
    }
    Ok(st.residuals.scaled / r0)
}

/// Residual reductions after `0..=k` steps, same convention as
/// [`residual_reduction`].
pub fn reduction_profile(inst: &QpInstance, sigma: f64, k: usize, base: &PadmmConfig) -> Result<Vec<f64>> {
    let cfg = PadmmConfig { sigma, ..*base };
    let solver = Padmm::new(inst, cfg)?;
    let mut st = solver.initial_state(&vec![0.0; inst.n()])?;
    let r0 = st.residuals.scaled;
    let mut out = vec![if r0 == 0.0 { 0.0 } else { 1.0 }];
    for _ in 0..k {
        solver.step(&mut st)?;
        out.push(if r0 == 0.0 { 0.0 } else { st.residuals.scaled / r0 });
    }
    Ok(out)
}

/// CSV with header `iteration,primal,dual,scaled`.
pub fn write_history_csv<W: Write>(hist: &[HistoryRow], mut w: W) -> Result<()> {
    writeln!(w, "iteration,primal,dual,scaled")?;
    for r in hist {
        writeln!(w, "{},{:e},{:e},{:e}", r.iteration, r.primal, r.dual, r.scaled)?;
    }
    Ok(())
}
