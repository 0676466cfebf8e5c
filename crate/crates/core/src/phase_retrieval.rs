//! Real phase retrieval `min_x (1/m) sum_i |<a_i, x>^2 - b_i|` with Gaussian
//! measurements and a unit-norm signal.
//!
//! A scenario is one measurement index drawn uniformly from `0..m`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm2};
use crate::problem::CompositeProblem;
use crate::prox::Regularizer;
use crate::rng::RngStream;
use crate::smoothing::sample_standard_normal;

/// Residuals with `|<a_i, x>^2 - b_i|` at or below this count as the kink.
pub const KINK_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseRetrievalInstance {
    /// Rows `a_i`, each of length `d`.
    pub measurements: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub signal: Vec<f64>,
    pub start: Vec<f64>,
    regularizer: Regularizer,
}

fn unit_sphere(rng: &mut RngStream, d: usize) -> Vec<f64> {
    loop {
        let g = sample_standard_normal(rng, d);
        let n = norm2(&g);
        if n > 0.0 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Gaussian rows, independent signal and start on the unit sphere.
pub fn generate_instance(d: usize, m: usize, rng: &mut RngStream) -> Result<PhaseRetrievalInstance> {
    if d == 0 || m == 0 {
        return Err(invalid(format!("need d, m >= 1, got d = {d}, m = {m}")));
    }
    let measurements: Vec<Vec<f64>> = (0..m).map(|_| sample_standard_normal(rng, d)).collect();
    let signal = unit_sphere(rng, d);
    let start = unit_sphere(rng, d);
    PhaseRetrievalInstance::from_signal(measurements, signal, start)
}

impl PhaseRetrievalInstance {
    /// Instance with targets `b_i = <a_i, signal>^2`.
    pub fn from_signal(measurements: Vec<Vec<f64>>, signal: Vec<f64>, start: Vec<f64>) -> Result<Self> {
        let targets = measurements.iter().map(|a| dot(a, &signal).powi(2)).collect();
        Self::from_parts(measurements, targets, signal, start)
    }

    pub fn from_parts(
        measurements: Vec<Vec<f64>>,
        targets: Vec<f64>,
        signal: Vec<f64>,
        start: Vec<f64>,
    ) -> Result<Self> {
        let d = signal.len();
        if d == 0 || measurements.is_empty() {
            return Err(invalid("empty phase retrieval instance"));
        }
        if measurements.iter().any(|a| a.len() != d) || start.len() != d {
            return Err(invalid("measurement, signal and start lengths disagree"));
        }
        if targets.len() != measurements.len() {
            return Err(invalid("one target per measurement required"));
        }
        Ok(Self {
            measurements,
            targets,
            signal,
            start,
            regularizer: Regularizer::Zero,
        })
    }

    pub fn d(&self) -> usize {
        self.signal.len()
    }

    pub fn m(&self) -> usize {
        self.measurements.len()
    }

    /// `f_i(x) = |<a_i, x>^2 - b_i|`.
    pub fn sample_f(&self, x: &[f64], i: usize) -> Result<f64> {
        if i >= self.m() {
            return Err(invalid(format!("index {i} out of range 0..{}", self.m())));
        }
        Ok(self.term(x, i))
    }

    fn term(&self, x: &[f64], i: usize) -> f64 {
        (dot(&self.measurements[i], x).powi(2) - self.targets[i]).abs()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (0..self.m()).map(|i| self.term(x, i)).sum::<f64>() / self.m() as f64
    }

    /// `2 <a_i, x> sign(<a_i, x>^2 - b_i) a_i` away from the kink. At the
    /// kink the sign is replaced by the `c` in `{-1, 0, 1}` whose step
    /// `x - alpha c 2 <a_i, x> a_i` gives the lowest objective; ties go to
    /// the earlier candidate in that order.
    pub fn subgradient(&self, x: &[f64], i: usize, alpha: f64) -> Result<Vec<f64>> {
        if i >= self.m() {
            return Err(invalid(format!("index {i} out of range 0..{}", self.m())));
        }
        let a = &self.measurements[i];
        let ip = dot(a, x);
        let q = ip * ip - self.targets[i];
        let c = if q.abs() > KINK_TOL {
            q.signum()
        } else {
            let mut best = (f64::INFINITY, 0.0);
            for c in [-1.0, 0.0, 1.0] {
                let trial: Vec<f64> = x
                    .iter()
                    .zip(a)
                    .map(|(xi, ai)| xi - alpha * c * 2.0 * ip * ai)
                    .collect();
                let v = self.objective(&trial);
                if v < best.0 {
                    best = (v, c);
                }
            }
            best.1
        };
        Ok(a.iter().map(|ai| 2.0 * ip * c * ai).collect())
    }

    /// `2 max_i |a_i|^2`, a weak-convexity modulus for every term.
    pub fn weak_convexity_bound(&self) -> f64 {
        2.0 * self
            .measurements
            .iter()
            .map(|a| dot(a, a))
            .fold(0.0, f64::max)
    }

    /// Columnar text: a header line, `m` rows `a ...`, then `b`, `signal`,
    /// `start` lines. Values round-trip exactly.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "phase_retrieval d={} m={}", self.d(), self.m()).unwrap();
        let line = |s: &mut String, tag: &str, v: &[f64]| {
            s.push_str(tag);
            for x in v {
                write!(s, " {x:e}").unwrap();
            }
            s.push('\n');
        };
        for a in &self.measurements {
            line(&mut s, "a", a);
        }
        line(&mut s, "b", &self.targets);
        line(&mut s, "signal", &self.signal);
        line(&mut s, "start", &self.start);
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        let (mut b, mut signal, mut start) = (None, None, None);
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if !header.starts_with("phase_retrieval") {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        for line in lines {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(tag) = parts.next() else { continue };
            let vals = parts
                .map(|p| p.parse::<f64>().map_err(|e| Error::Parse(format!("{p:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            match tag {
                "a" => rows.push(vals),
                "b" => b = Some(vals),
                "signal" => signal = Some(vals),
                "start" => start = Some(vals),
                other => return Err(Error::Parse(format!("unknown row tag {other:?}"))),
            }
        }
        let missing = |n: &str| Error::Parse(format!("missing {n} row"));
        Self::from_parts(
            rows,
            b.ok_or_else(|| missing("b"))?,
            signal.ok_or_else(|| missing("signal"))?,
            start.ok_or_else(|| missing("start"))?,
        )
    }
}

impl CompositeProblem for PhaseRetrievalInstance {
    type Scenario = usize;

    fn dim(&self) -> usize {
        self.d()
    }

    fn sample_scenario(&self, rng: &mut RngStream) -> usize {
        rng.index(self.m())
    }

    fn eval(&self, x: &[f64], i: &usize) -> f64 {
        self.term(x, *i)
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn has_subgradient(&self) -> bool {
        true
    }

    fn subgradient(&self, x: &[f64], i: &usize, step: f64) -> Option<Vec<f64>> {
        PhaseRetrievalInstance::subgradient(self, x, *i, step).ok()
    }

    fn objective(&self, x: &[f64]) -> Option<f64> {
        Some(PhaseRetrievalInstance::objective(self, x))
    }

    fn weak_convexity(&self) -> Option<f64> {
        Some(self.weak_convexity_bound())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PhaseRetrievalInstance {
        PhaseRetrievalInstance::from_parts(vec![vec![1.0]], vec![1.0], vec![1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn generated_instance_invariants() {
        let inst = generate_instance(10, 30, &mut RngStream::from_seed(1)).unwrap();
        assert_eq!((inst.d(), inst.m()), (10, 30));
        assert!((norm2(&inst.signal) - 1.0).abs() < 1e-12);
        assert!((norm2(&inst.start) - 1.0).abs() < 1e-12);
        assert_eq!(inst.objective(&inst.signal), 0.0);
        let neg: Vec<f64> = inst.signal.iter().map(|v| -v).collect();
        assert!(inst.objective(&neg) < 1e-15);
        let zero = vec![0.0; 10];
        let mean_b = inst.targets.iter().sum::<f64>() / 30.0;
        assert!((inst.objective(&zero) - mean_b).abs() < 1e-14);
        assert!(generate_instance(0, 3, &mut RngStream::from_seed(1)).is_err());
    }

    #[test]
    fn hand_examples() {
        let inst = tiny();
        assert_eq!(inst.objective(&[2.0]), 3.0);
        assert_eq!(inst.sample_f(&[2.0], 0).unwrap(), 3.0);
        assert!(inst.sample_f(&[2.0], 1).is_err());
        assert_eq!(inst.subgradient(&[2.0], 0, 0.1).unwrap(), vec![4.0]);
        assert_eq!(inst.subgradient(&[0.0], 0, 0.1).unwrap(), vec![0.0]);
    }

    #[test]
    fn samples_average_to_objective() {
        let inst = generate_instance(4, 12, &mut RngStream::from_seed(2)).unwrap();
        let mut rng = RngStream::from_seed(3);
        for _ in 0..10 {
            let x = sample_standard_normal(&mut rng, 4);
            let avg = (0..12).map(|i| inst.sample_f(&x, i).unwrap()).sum::<f64>() / 12.0;
            assert!((avg - inst.objective(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn kink_selection_picks_best_decrease() {
        // Two measurements; x sits on the kink of the first term.
        let inst = PhaseRetrievalInstance::from_parts(
            vec![vec![1.0, 0.0], vec![2.0, 0.0]],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
        )
        .unwrap();
        let x = [1.0, 0.0];
        let alpha = 0.05;
        let g = inst.subgradient(&x, 0, alpha).unwrap();
        let value = |c: f64| inst.objective(&[x[0] - alpha * c * 2.0, 0.0]);
        let best = [-1.0, 0.0, 1.0]
            .into_iter()
            .min_by(|a, b| value(*a).partial_cmp(&value(*b)).unwrap())
            .unwrap();
        assert_eq!(g, vec![2.0 * best, 0.0]);
        assert_eq!(best, 1.0);
    }

    #[test]
    fn text_round_trip() {
        let inst = generate_instance(3, 5, &mut RngStream::from_seed(4)).unwrap();
        let mut buf = Vec::new();
        inst.write_text(&mut buf).unwrap();
        let back = PhaseRetrievalInstance::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, inst);
        assert!(PhaseRetrievalInstance::read_text("nonsense\n".as_bytes()).is_err());
    }
}
