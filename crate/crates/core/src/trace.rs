use crate::error::{invalid, Result};

/// Per-run log of a solver: one row per logging point.
///
/// Row `k` holds the iteration index, the objective estimate at that
/// iterate, and the step size in force there. Iterates are kept only when
/// the solver was asked to store them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub iterations: Vec<usize>,
    pub iterates: Vec<Vec<f64>>,
    pub objectives: Vec<f64>,
    pub step_sizes: Vec<f64>,
    /// Logging stride, shared by every row except possibly the last.
    pub stride: usize,
    /// Index of the returned iterate.
    pub t_star: usize,
    pub returned: Vec<f64>,
    pub final_iterate: Vec<f64>,
    /// Oracle calls spent by the gradient estimator (logging excluded).
    pub function_evals: usize,
    pub wall_time_s: f64,
}

impl RunTrace {
    pub fn with_stride(stride: usize) -> Self {
        Self {
            stride: stride.max(1),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }

    /// Append one logging row. `x` is stored only when `keep_iterate` is set.
    pub fn record_step(
        &mut self,
        iteration: usize,
        x: Option<&[f64]>,
        objective: f64,
        alpha: f64,
    ) -> Result<()> {
        if !objective.is_finite() {
            return Err(invalid(format!("objective {objective} is not finite")));
        }
        if !alpha.is_finite() {
            return Err(invalid(format!("step size {alpha} is not finite")));
        }
        self.iterations.push(iteration);
        if let Some(x) = x {
            self.iterates.push(x.to_vec());
        }
        self.objectives.push(objective);
        self.step_sizes.push(alpha);
        Ok(())
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objectives.last().copied()
    }

    pub fn initial_objective(&self) -> Option<f64> {
        self.objectives.first().copied()
    }
}
