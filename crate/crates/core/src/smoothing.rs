//! Zeroth-order gradient estimators and the direction samplers they use.
//!
//! Each estimator spends exactly two oracle calls per draw. Directions are
//! taken from one stream and scenarios from another, so the two sequences are
//! independent and individually replayable.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::norm2;
use crate::problem::CompositeProblem;
use crate::rng::RngStream;

/// Smoothing radii. `double` is used by the double-smoothing estimator only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingParams {
    pub mu: f64,
    pub double: Option<DoubleSmoothing>,
}

/// Outer and inner radii of the double-smoothing estimator, `mu1 >= 2 mu2 > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleSmoothing {
    pub mu1: f64,
    pub mu2: f64,
}

impl SmoothingParams {
    pub fn single(mu: f64) -> Self {
        Self { mu, double: None }
    }

    pub fn double(mu1: f64, mu2: f64) -> Self {
        Self {
            mu: mu2,
            double: Some(DoubleSmoothing { mu1, mu2 }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)?;
        if let Some(d) = self.double {
            d.validate()?;
        }
        Ok(())
    }
}

impl DoubleSmoothing {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu2 > 0.0 && self.mu1 >= 2.0 * self.mu2 && self.mu1.is_finite()) {
            return Err(invalid(format!(
                "double smoothing needs mu1 >= 2 mu2 > 0, got mu1 = {}, mu2 = {}",
                self.mu1, self.mu2
            )));
        }
        Ok(())
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(invalid(format!("smoothing radius {mu} must be positive")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Gaussian,
    DoubleGaussian,
    Uniform,
    Spsa,
    Subgradient,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Gaussian => "gaussian",
            EstimatorKind::DoubleGaussian => "double_gaussian",
            EstimatorKind::Uniform => "uniform",
            EstimatorKind::Spsa => "spsa",
            EstimatorKind::Subgradient => "subgradient",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub direction: Vec<f64>,
    pub function_evals: usize,
    pub estimator: EstimatorKind,
}

/// Sign convention of the uniform-ball estimator.
///
/// `AsDisplayed` multiplies `F(x) - F(x + mu U)` by `U`, which points uphill
/// on smooth problems when subtracted in a descent step; `Corrected` uses
/// `F(x + mu U) - F(x)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UniformSign {
    #[default]
    Corrected,
    AsDisplayed,
}

pub fn sample_standard_normal(rng: &mut RngStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform draw from the closed unit ball in `R^d`.
pub fn sample_uniform_ball(rng: &mut RngStream, d: usize) -> Vec<f64> {
    let mut g = sample_standard_normal(rng, d);
    let norm = norm2(&g);
    if norm == 0.0 {
        return g;
    }
    let radius = rng.uniform().powf(1.0 / d as f64);
    for v in &mut g {
        *v *= radius / norm;
    }
    g
}

pub fn sample_rademacher(rng: &mut RngStream, d: usize) -> Vec<f64> {
    use rand::RngCore;
    let mut out = Vec::with_capacity(d);
    let mut bits = 0u64;
    for i in 0..d {
        if i % 64 == 0 {
            bits = rng.next_u64();
        }
        out.push(if bits & 1 == 1 { 1.0 } else { -1.0 });
        bits >>= 1;
    }
    out
}

fn checked(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            value: v,
            point: x.to_vec(),
        })
    }
}

fn checked_pair<P: CompositeProblem>(
    p: &P,
    x1: &[f64],
    x2: &[f64],
    s: &P::Scenario,
) -> Result<(f64, f64)> {
    let (a, b) = p.eval_pair(x1, x2, s);
    Ok((checked(a, x1)?, checked(b, x2)?))
}

fn shifted(x: &[f64], scale: f64, u: &[f64]) -> Vec<f64> {
    x.iter().zip(u).map(|(a, b)| a + scale * b).collect()
}

/// `(F(x + mu u, s) - F(x, s)) / mu * u` for a given direction and scenario.
pub fn gaussian_quotient<P: CompositeProblem>(
    p: &P,
    x: &[f64],
    mu: f64,
    u: &[f64],
    s: &P::Scenario,
) -> Result<Vec<f64>> {
    let (fp, f0) = checked_pair(p, &shifted(x, mu, u), x, s)?;
    let c = (fp - f0) / mu;
    Ok(u.iter().map(|v| c * v).collect())
}

/// `(F(x + mu1 u1 + mu2 u2, s) - F(x + mu1 u1, s)) / mu2 * u2`.
pub fn double_gaussian_quotient<P: CompositeProblem>(
    p: &P,
    x: &[f64],
    radii: DoubleSmoothing,
    u1: &[f64],
    u2: &[f64],
    s: &P::Scenario,
) -> Result<Vec<f64>> {
    let base = shifted(x, radii.mu1, u1);
    let (fp, f0) = checked_pair(p, &shifted(&base, radii.mu2, u2), &base, s)?;
    let c = (fp - f0) / radii.mu2;
    Ok(u2.iter().map(|v| c * v).collect())
}

/// `(d / mu) (F(x + mu u) - F(x)) u`, or the displayed-sign variant.
pub fn uniform_quotient<P: CompositeProblem>(
    p: &P,
    x: &[f64],
    mu: f64,
    u: &[f64],
    s: &P::Scenario,
    sign: UniformSign,
) -> Result<Vec<f64>> {
    let (fp, f0) = checked_pair(p, &shifted(x, mu, u), x, s)?;
    let diff = match sign {
        UniformSign::Corrected => fp - f0,
        UniformSign::AsDisplayed => f0 - fp,
    };
    let c = u.len() as f64 * diff / mu;
    Ok(u.iter().map(|v| c * v).collect())
}

/// `(F(x + mu u) - F(x - mu u)) / (2 mu u)`, division componentwise.
pub fn spsa_quotient<P: CompositeProblem>(
    p: &P,
    x: &[f64],
    mu: f64,
    u: &[f64],
    s: &P::Scenario,
) -> Result<Vec<f64>> {
    let (fp, fm) = checked_pair(p, &shifted(x, mu, u), &shifted(x, -mu, u), s)?;
    let num = fp - fm;
    Ok(u.iter().map(|v| num / (2.0 * mu * v)).collect())
}

/// A zeroth-order estimator with its radii.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimator {
    Gaussian { mu: f64 },
    DoubleGaussian(DoubleSmoothing),
    Uniform { mu: f64, sign: UniformSign },
    Spsa { mu: f64 },
}

impl Estimator {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            Estimator::Gaussian { .. } => EstimatorKind::Gaussian,
            Estimator::DoubleGaussian(_) => EstimatorKind::DoubleGaussian,
            Estimator::Uniform { .. } => EstimatorKind::Uniform,
            Estimator::Spsa { .. } => EstimatorKind::Spsa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Estimator::Gaussian { mu } | Estimator::Uniform { mu, .. } | Estimator::Spsa { mu } => {
                check_mu(*mu)
            }
            Estimator::DoubleGaussian(d) => d.validate(),
        }
    }

    /// Average of `batch` independent single-draw estimates at `x`.
    pub fn estimate<P: CompositeProblem>(
        &self,
        p: &P,
        x: &[f64],
        batch: usize,
        u_rng: &mut RngStream,
        xi_rng: &mut RngStream,
    ) -> Result<GradientEstimate> {
        if batch == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        let n = x.len();
        let mut acc = vec![0.0; n];
        for _ in 0..batch {
            let g = match *self {
                Estimator::Gaussian { mu } => {
                    let u = sample_standard_normal(u_rng, n);
                    let s = p.sample_scenario(xi_rng);
                    gaussian_quotient(p, x, mu, &u, &s)?
                }
                Estimator::DoubleGaussian(radii) => {
                    let u1 = sample_standard_normal(u_rng, n);
                    let u2 = sample_standard_normal(u_rng, n);
                    let s = p.sample_scenario(xi_rng);
                    double_gaussian_quotient(p, x, radii, &u1, &u2, &s)?
                }
                Estimator::Uniform { mu, sign } => {
                    let u = sample_uniform_ball(u_rng, n);
                    let s = p.sample_scenario(xi_rng);
                    uniform_quotient(p, x, mu, &u, &s, sign)?
                }
                Estimator::Spsa { mu } => {
                    let u = sample_rademacher(u_rng, n);
                    let s = p.sample_scenario(xi_rng);
                    spsa_quotient(p, x, mu, &u, &s)?
                }
            };
            for (a, v) in acc.iter_mut().zip(&g) {
                *a += v;
            }
        }
        if batch > 1 {
            let inv = 1.0 / batch as f64;
            acc.iter_mut().for_each(|a| *a *= inv);
        }
        Ok(GradientEstimate {
            direction: acc,
            function_evals: 2 * batch,
            estimator: self.kind(),
        })
    }
}

/// Single-draw Gaussian estimate.
pub fn gaussian_estimate<P: CompositeProblem>(
    p: &P,
    x: &[f64],
    mu: f64,
    u_rng: &mut RngStream,
    xi_rng: &mut RngStream,
) -> Result<GradientEstimate> {
    let e = Estimator::Gaussian { mu };
    e.validate()?;
    e.estimate(p, x, 1, u_rng, xi_rng)
}

pub fn double_gaussian_estimate<P: CompositeProblem>(
    p: &P,
    x: &[f64],
    mu1: f64,
    mu2: f64,
    u_rng: &mut RngStream,
    xi_rng: &mut RngStream,
) -> Result<GradientEstimate> {
    let e = Estimator::DoubleGaussian(DoubleSmoothing { mu1, mu2 });
    e.validate()?;
    e.estimate(p, x, 1, u_rng, xi_rng)
}

pub fn uniform_estimate<P: CompositeProblem>(
    p: &P,
    x: &[f64],
    mu: f64,
    sign: UniformSign,
    u_rng: &mut RngStream,
    xi_rng: &mut RngStream,
) -> Result<GradientEstimate> {
    let e = Estimator::Uniform { mu, sign };
    e.validate()?;
    e.estimate(p, x, 1, u_rng, xi_rng)
}

pub fn spsa_estimate<P: CompositeProblem>(
    p: &P,
    x: &[f64],
    mu: f64,
    u_rng: &mut RngStream,
    xi_rng: &mut RngStream,
) -> Result<GradientEstimate> {
    let e = Estimator::Spsa { mu };
    e.validate()?;
    e.estimate(p, x, 1, u_rng, xi_rng)
}
