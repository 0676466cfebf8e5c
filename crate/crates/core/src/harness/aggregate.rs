//! Pointwise mean and 95% normal confidence bands over replicate traces.

use crate::error::{invalid, Result};
use crate::linalg::mean_stderr;
use crate::trace::RunTrace;
use crate::tuner::Z95;

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateSeries {
    pub x_axis: Vec<usize>,
    pub mean: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub replicates: usize,
}

impl AggregateSeries {
    /// Aggregates equal-length value rows sampled on a shared axis.
    pub fn from_rows(x_axis: Vec<usize>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("nothing to aggregate"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != x_axis.len()) {
            return Err(invalid(format!(
                "row of length {} on an axis of length {}",
                r.len(),
                x_axis.len()
            )));
        }
        let mut s = Self {
            x_axis,
            mean: Vec::new(),
            ci_low: Vec::new(),
            ci_high: Vec::new(),
            replicates: rows.len(),
        };
        let mut column = Vec::with_capacity(rows.len());
        for i in 0..s.x_axis.len() {
            column.clear();
            column.extend(rows.iter().map(|r| r[i]));
            let (m, se) = mean_stderr(&column);
            let half = Z95 * se;
            s.mean.push(m);
            s.ci_low.push(m - half);
            s.ci_high.push(m + half);
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.x_axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_axis.is_empty()
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.mean.last().copied()
    }
}

/// Aggregates the logged objectives of runs with a common logging stride.
pub fn aggregate(traces: &[RunTrace]) -> Result<AggregateSeries> {
    let first = traces.first().ok_or_else(|| invalid("nothing to aggregate"))?;
    for t in traces {
        if t.stride != first.stride {
            return Err(invalid(format!(
                "logging strides differ ({} vs {})",
                t.stride, first.stride
            )));
        }
        if t.iterations != first.iterations {
            return Err(invalid("traces are logged at different iterations"));
        }
    }
    let rows: Vec<Vec<f64>> = traces.iter().map(|t| t.objectives.clone()).collect();
    AggregateSeries::from_rows(first.iterations.clone(), &rows)
}
