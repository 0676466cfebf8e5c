//! Closed-form proximal operators: weighted soft-thresholding, box
//! projection, and their composition.

use crate::error::{invalid, Result};

/// Coordinatewise interval constraint `lower <= x <= upper`; either side may
/// be infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("box bounds have different lengths"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(invalid(format!("box coordinate {i}: [{l}, {u}] is empty")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub(crate) fn project_in_place(&self, v: &mut [f64]) {
        for (x, (l, u)) in v.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*l, *u);
        }
    }
}

fn check_weights(n: usize, weights: &[f64], step: f64) -> Result<()> {
    if weights.len() != n {
        return Err(invalid(format!(
            "weights have length {}, expected {n}",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(invalid(format!("negative or NaN weight {w}")));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid(format!("step {step} must be positive and finite")));
    }
    Ok(())
}

#[inline]
pub(crate) fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `sign(v_i) * max(|v_i| - step * w_i, 0)`, the prox of `step * sum_i w_i |x_i|`.
pub fn soft_threshold(v: &[f64], weights: &[f64], step: f64) -> Result<Vec<f64>> {
    check_weights(v.len(), weights, step)?;
    Ok(v
        .iter()
        .zip(weights)
        .map(|(x, w)| shrink(*x, step * w))
        .collect())
}

pub fn box_project(v: &[f64], bounds: &BoxSet) -> Result<Vec<f64>> {
    if v.len() != bounds.dim() {
        return Err(invalid("box dimension mismatch"));
    }
    let mut out = v.to_vec();
    bounds.project_in_place(&mut out);
    Ok(out)
}

/// Shrink, then clamp. For a separable weighted l1 term restricted to a box
/// this is the exact prox of the sum.
pub fn prox_box_soft_threshold(
    v: &[f64],
    weights: &[f64],
    step: f64,
    bounds: &BoxSet,
) -> Result<Vec<f64>> {
    box_project(&soft_threshold(v, weights, step)?, bounds)
}

/// The proximable part `r` of a composite objective.
#[derive(Clone, Debug, PartialEq)]
pub enum Regularizer {
    Zero,
    /// Indicator of a box.
    Box(BoxSet),
    /// `sum_i w_i |x_i|`.
    WeightedL1(Vec<f64>),
    /// Weighted l1 plus the indicator of a box.
    BoxWeightedL1 { weights: Vec<f64>, bounds: BoxSet },
}

impl Regularizer {
    pub fn l1(n: usize, weight: f64) -> Self {
        Regularizer::WeightedL1(vec![weight; n])
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Regularizer::Zero => Ok(()),
            Regularizer::Box(b) if b.dim() == n => Ok(()),
            Regularizer::Box(_) => Err(invalid("box dimension mismatch")),
            Regularizer::WeightedL1(w) => check_weights(n, w, 1.0),
            Regularizer::BoxWeightedL1 { weights, bounds } => {
                check_weights(n, weights, 1.0)?;
                if bounds.dim() != n {
                    return Err(invalid("box dimension mismatch"));
                }
                Ok(())
            }
        }
    }

    /// `prox_{step * r}(v)`.
    pub fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        let mut out = v.to_vec();
        self.prox_in_place(&mut out, step);
        out
    }

    pub fn prox_in_place(&self, v: &mut [f64], step: f64) {
        match self {
            Regularizer::Zero => {}
            Regularizer::Box(b) => b.project_in_place(v),
            Regularizer::WeightedL1(w) => {
                for (x, wi) in v.iter_mut().zip(w) {
                    *x = shrink(*x, step * wi);
                }
            }
            Regularizer::BoxWeightedL1 { weights, bounds } => {
                for (x, wi) in v.iter_mut().zip(weights) {
                    *x = shrink(*x, step * wi);
                }
                bounds.project_in_place(v);
            }
        }
    }

    /// `r(x)`, `+inf` outside the domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return f64::INFINITY;
        }
        match self {
            Regularizer::Zero | Regularizer::Box(_) => 0.0,
            Regularizer::WeightedL1(w) | Regularizer::BoxWeightedL1 { weights: w, .. } => {
                x.iter().zip(w).map(|(v, wi)| wi * v.abs()).sum()
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Regularizer::Box(b) | Regularizer::BoxWeightedL1 { bounds: b, .. } => b.contains(x),
            _ => true,
        }
    }
}
