//! Moreau envelope and proximal point of `p = s + r` with `s` smooth and `r`
//! proximable.
//!
//! `prox_{lambda p}(u)` solves the subproblem
//! `min_x s(x) + r(x) + |x - u|^2 / (2 lambda)`, which is strongly convex
//! once `lambda < 1 / rho`. It is computed by an accelerated proximal
//! gradient method with adaptive restart.

use crate::error::{invalid, Error, Result};
use crate::linalg::{dist, dot};
use crate::problem::CompositeProblem;
use crate::prox::Regularizer;
use crate::rng::RngStream;

/// Deterministic objective `s(x) + r(x)` with a gradient oracle for `s`.
pub trait SmoothComposite {
    fn dim(&self) -> usize;
    fn smooth_value(&self, x: &[f64]) -> f64;
    fn smooth_gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Lipschitz constant of `smooth_gradient`.
    fn gradient_lipschitz(&self) -> f64;
    fn regularizer(&self) -> &Regularizer;

    fn value(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.regularizer().value(x)
    }
}

/// Settings and results of one envelope evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct MoreauDiagnostics {
    pub lambda: f64,
    pub rho_bar: f64,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub prox_point: Vec<f64>,
    pub envelope_value: f64,
    pub gradient_norm: f64,
    pub inner_iterations: usize,
    pub inner_residual: f64,
}

impl MoreauDiagnostics {
    /// `lambda = 1 / rho_bar`, defaults `inner_tol = 1e-8`, `10^5` iterations.
    pub fn new(rho_bar: f64) -> Result<Self> {
        if !(rho_bar > 0.0) || !rho_bar.is_finite() {
            return Err(invalid(format!("rho_bar must be positive, got {rho_bar}")));
        }
        Ok(Self {
            lambda: 1.0 / rho_bar,
            rho_bar,
            inner_tol: 1e-8,
            inner_max_iters: 100_000,
            prox_point: Vec::new(),
            envelope_value: f64::NAN,
            gradient_norm: f64::NAN,
            inner_iterations: 0,
            inner_residual: f64::NAN,
        })
    }

    /// `rho_bar = 2 rho`.
    pub fn for_weak_convexity(rho: f64) -> Result<Self> {
        Self::new(2.0 * rho)
    }

    pub fn with_lambda(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Self::new(1.0 / lambda)
    }

    pub fn with_tolerance(mut self, tol: f64, max_iters: usize) -> Self {
        self.inner_tol = tol;
        self.inner_max_iters = max_iters;
        self
    }

    /// `grad phi^lambda(u) = (u - prox_point) / lambda`.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.prox_point)
            .map(|(a, b)| (a - b) / self.lambda)
            .collect()
    }
}

/// Subproblem gradient `grad s(x) + (x - u) / lambda`.
fn sub_gradient<S: SmoothComposite + ?Sized>(obj: &S, x: &[f64], u: &[f64], lambda: f64) -> Vec<f64> {
    let mut g = obj.smooth_gradient(x);
    for ((gi, xi), ui) in g.iter_mut().zip(x).zip(u) {
        *gi += (xi - ui) / lambda;
    }
    g
}

fn prox_grad_step<S: SmoothComposite + ?Sized>(
    obj: &S,
    y: &[f64],
    u: &[f64],
    lambda: f64,
    eta: f64,
) -> Vec<f64> {
    let g = sub_gradient(obj, y, u, lambda);
    let mut z: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - eta * b).collect();
    obj.regularizer().prox_in_place(&mut z, eta);
    z
}

/// Proximal point and envelope of `obj` at `u`.
///
/// Stops once `(1 + lambda L) |x - T_eta(x)| <= inner_tol`, where `T_eta` is
/// one proximal gradient step of length `eta = 1 / (L + 1/lambda)`. The
/// factor makes the same bound hold for any step in `(0, lambda]`.
pub fn moreau_prox<S: SmoothComposite + ?Sized>(
    obj: &S,
    u: &[f64],
    diag: &MoreauDiagnostics,
) -> Result<MoreauDiagnostics> {
    let n = obj.dim();
    if u.len() != n {
        return Err(invalid(format!("point has length {}, expected {n}", u.len())));
    }
    let lambda = diag.lambda;
    let lip = obj.gradient_lipschitz();
    if !(lip >= 0.0) || !lip.is_finite() {
        return Err(invalid(format!("gradient Lipschitz bound {lip} is not usable")));
    }
    let eta = 1.0 / (lip + 1.0 / lambda);
    let scale = 1.0 + lambda * lip;

    let mut x = obj.regularizer().prox(u, eta);
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut residual = f64::INFINITY;
    let mut iters = 0;
    while iters < diag.inner_max_iters {
        iters += 1;
        let x_new = prox_grad_step(obj, &y, u, lambda, eta);
        // Gradient restart: drop momentum when it points uphill.
        let restart = y
            .iter()
            .zip(&x_new)
            .zip(&x)
            .map(|((yi, xn), xo)| (yi - xn) * (xn - xo))
            .sum::<f64>()
            > 0.0;
        let theta_new = if restart {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt())
        };
        let beta = if restart { 0.0 } else { (theta - 1.0) / theta_new };
        y = x_new
            .iter()
            .zip(&x)
            .map(|(xn, xo)| xn + beta * (xn - xo))
            .collect();
        x = x_new;
        theta = theta_new;

        let probe = prox_grad_step(obj, &x, u, lambda, eta);
        residual = scale * dist(&x, &probe);
        if residual <= diag.inner_tol {
            break;
        }
    }
    if residual > diag.inner_tol {
        return Err(Error::NotConverged {
            solver: "moreau_prox",
            iterations: iters,
            residual,
        });
    }

    let d = dist(&x, u);
    let envelope_value = obj.value(&x) + d * d / (2.0 * lambda);
    let gradient_norm = d / lambda;
    debug_assert!((d - lambda * gradient_norm).abs() <= 1e-12 * (1.0 + d));
    Ok(MoreauDiagnostics {
        prox_point: x,
        envelope_value,
        gradient_norm,
        inner_iterations: iters,
        inner_residual: residual,
        ..diag.clone()
    })
}

/// `|x_hat - prox_{alpha r}(alpha rho_bar x - alpha grad s(x_hat) + (1 - alpha rho_bar) x_hat)|`
/// with `x_hat` the proximal point of `obj` at `x` and `s` the smoothed part.
pub fn prox_fixed_point_residual<S: SmoothComposite + ?Sized>(
    obj: &S,
    x: &[f64],
    alpha: f64,
    diag: &MoreauDiagnostics,
) -> Result<f64> {
    if !(alpha > 0.0) || alpha > 1.0 / diag.rho_bar * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "alpha must lie in (0, 1/rho_bar] = (0, {}], got {alpha}",
            1.0 / diag.rho_bar
        )));
    }
    let out = moreau_prox(obj, x, diag)?;
    let xh = &out.prox_point;
    let g = obj.smooth_gradient(xh);
    let delta = 1.0 - alpha * diag.rho_bar;
    let mut v: Vec<f64> = x
        .iter()
        .zip(xh)
        .zip(&g)
        .map(|((xi, hi), gi)| alpha * diag.rho_bar * xi - alpha * gi + delta * hi)
        .collect();
    obj.regularizer().prox_in_place(&mut v, alpha);
    Ok(dist(xh, &v))
}

/// `s(x) = x^T H x / 2 + g^T x + offset` with dense symmetric `H`, plus `r`.
///
/// Under Gaussian smoothing of radius `mu` a quadratic only shifts by the
/// constant `mu^2 tr(H) / 2`, so the same type serves as its own surrogate.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub hessian: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    pub offset: f64,
    pub regularizer: Regularizer,
}

impl Quadratic {
    pub fn new(hessian: Vec<Vec<f64>>, linear: Vec<f64>, regularizer: Regularizer) -> Result<Self> {
        let n = linear.len();
        if hessian.len() != n || hessian.iter().any(|row| row.len() != n) {
            return Err(invalid("hessian shape does not match the linear term"));
        }
        for i in 0..n {
            for j in 0..i {
                if hessian[i][j] != hessian[j][i] {
                    return Err(invalid("hessian must be symmetric"));
                }
            }
        }
        regularizer.validate(n)?;
        Ok(Self {
            hessian,
            linear,
            offset: 0.0,
            regularizer,
        })
    }

    /// Gaussian surrogate of radius `mu`.
    pub fn smoothed(&self, mu: f64) -> Self {
        let trace: f64 = (0..self.linear.len()).map(|i| self.hessian[i][i]).sum();
        Self {
            offset: self.offset + 0.5 * mu * mu * trace,
            ..self.clone()
        }
    }

    fn hx(&self, x: &[f64]) -> Vec<f64> {
        self.hessian.iter().map(|row| dot(row, x)).collect()
    }
}

impl SmoothComposite for Quadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn smooth_value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.hx(x)) + dot(&self.linear, x) + self.offset
    }

    fn smooth_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.hx(x);
        for (gi, ci) in g.iter_mut().zip(&self.linear) {
            *gi += ci;
        }
        g
    }

    fn gradient_lipschitz(&self) -> f64 {
        self.hessian
            .iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }
}

/// `sum_i log(1 + x_i^2) + r(x)`.
///
/// Weakly convex with `rho = 1/4`, gradient Lipschitz constant 2, and
/// `|grad| <= sqrt(n)`. Serves as a deterministic test problem whose Moreau
/// envelope gradient is computable.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSquares {
    pub dim: usize,
    pub regularizer: Regularizer,
}

impl LogSquares {
    pub const WEAK_CONVEXITY: f64 = 0.25;

    pub fn new(dim: usize, regularizer: Regularizer) -> Result<Self> {
        regularizer.validate(dim)?;
        Ok(Self { dim, regularizer })
    }
}

impl SmoothComposite for LogSquares {
    fn dim(&self) -> usize {
        self.dim
    }

    fn smooth_value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.mul_add(*v, 1.0).ln()).sum()
    }

    fn smooth_gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| 2.0 * v / v.mul_add(*v, 1.0)).collect()
    }

    fn gradient_lipschitz(&self) -> f64 {
        2.0
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }
}

impl CompositeProblem for LogSquares {
    type Scenario = ();

    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_scenario(&self, _: &mut RngStream) {}

    fn eval(&self, x: &[f64], _: &()) -> f64 {
        self.smooth_value(x)
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn has_subgradient(&self) -> bool {
        true
    }

    fn subgradient(&self, x: &[f64], _: &(), _: f64) -> Option<Vec<f64>> {
        Some(self.smooth_gradient(x))
    }

    fn objective(&self, x: &[f64]) -> Option<f64> {
        Some(self.smooth_value(x))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some((self.dim as f64).sqrt())
    }

    fn weak_convexity(&self) -> Option<f64> {
        Some(Self::WEAK_CONVEXITY)
    }
}
