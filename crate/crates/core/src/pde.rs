//! Finite-difference optimal-control QPs on the unit square.
//!
//! The state `y` and control `u` live on the `N x N` interior nodes of a
//! uniform grid with `h = 1 / (N + 1)` and zero Dirichlet data. The state
//! equation `L y = u` is the 5-point Laplacian (Poisson) or
//! `-eps Lap + w . grad` with first-order upwinding (convection-diffusion).
//! Integrals use the lumped weight `h^2`, giving
//!
//! ```text
//! min  c^T x + x^T Q x / 2 + |D x|_1 + delta_K(x)   s.t.  A x = b
//! x = (y, u),  A = [h^2 L, -h^2 I],  b = 0,
//! Q = diag(h^2 I, beta2 h^2 I),  c = (-h^2 ybar, 0),  D = diag(0, beta1 h^2 / 2).
//! ```

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::linalg::dot;
use crate::prox::BoxSet;
use crate::rng::RngStream;
use crate::sparse::CsrMatrix;

pub const CONTROL_LOWER: f64 = -2.0;
pub const CONTROL_UPPER: f64 = 1.5;
pub const DIFFUSION_EPS: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Equation {
    Poisson,
    ConvectionDiffusion,
}

impl Equation {
    pub fn name(self) -> &'static str {
        match self {
            Equation::Poisson => "poisson",
            Equation::ConvectionDiffusion => "convdiff",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "poisson" => Ok(Equation::Poisson),
            "convdiff" | "convectiondiffusion" => Ok(Equation::ConvectionDiffusion),
            other => Err(invalid(format!("unknown equation {other:?}"))),
        }
    }

    /// Desired state at `(x1, x2)`.
    pub fn desired_state(self, x1: f64, x2: f64) -> f64 {
        match self {
            Equation::Poisson => (PI * x1).sin() * (PI * x2).sin(),
            Equation::ConvectionDiffusion => {
                (-64.0 * ((x1 - 0.5).powi(2) + (x2 - 0.5).powi(2))).exp()
            }
        }
    }
}

/// Wind field of the convection-diffusion problem.
pub fn wind(x1: f64, x2: f64) -> (f64, f64) {
    (
        2.0 * x2 * (1.0 - x1).powi(2),
        -2.0 * x1 * (1.0 - x2 * x2),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeSpec {
    pub equation: Equation,
    /// Interior nodes per side.
    pub grid_points_per_side: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub control_lower: f64,
    pub control_upper: f64,
    pub diffusion_eps: f64,
}

impl PdeSpec {
    pub fn new(equation: Equation, n: usize, beta1: f64, beta2: f64) -> Self {
        Self {
            equation,
            grid_points_per_side: n,
            beta1,
            beta2,
            control_lower: CONTROL_LOWER,
            control_upper: CONTROL_UPPER,
            diffusion_eps: DIFFUSION_EPS,
        }
    }

    pub fn poisson(n: usize, beta1: f64, beta2: f64) -> Self {
        Self::new(Equation::Poisson, n, beta1, beta2)
    }

    pub fn convection_diffusion(n: usize, beta1: f64, beta2: f64) -> Self {
        Self::new(Equation::ConvectionDiffusion, n, beta1, beta2)
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.grid_points_per_side as f64 + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_side < 3 {
            return Err(invalid(format!(
                "need at least 3 interior points per side, got {}",
                self.grid_points_per_side
            )));
        }
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0) {
            return Err(invalid("regularization weights must be nonnegative"));
        }
        if !(self.control_lower < self.control_upper) {
            return Err(invalid("control bounds must satisfy u_a < u_b"));
        }
        if self.equation == Equation::ConvectionDiffusion && !(self.diffusion_eps > 0.0) {
            return Err(invalid("diffusion coefficient must be positive"));
        }
        Ok(())
    }
}

/// `min c^T x + x^T Q x / 2 + |D x|_1` over `x` in the box, subject to `A x = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct QpInstance {
    pub c: Vec<f64>,
    pub q: CsrMatrix,
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    /// Diagonal of `D`.
    pub d: Vec<f64>,
    pub bounds: BoxSet,
}

impl QpInstance {
    pub fn new(
        c: Vec<f64>,
        q: CsrMatrix,
        a: CsrMatrix,
        b: Vec<f64>,
        d: Vec<f64>,
        bounds: BoxSet,
    ) -> Result<Self> {
        let n = c.len();
        if q.rows() != n || q.cols() != n {
            return Err(invalid("Q must be n x n"));
        }
        if a.cols() != n || a.rows() != b.len() {
            return Err(invalid("A must be m x n with b of length m"));
        }
        if d.len() != n || bounds.dim() != n {
            return Err(invalid("D and the box must have length n"));
        }
        if d.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("D must be nonnegative"));
        }
        if q.asymmetry() != 0.0 {
            return Err(invalid("Q must be symmetric"));
        }
        Ok(Self { c, q, a, b, d, bounds })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// `c^T x + x^T Q x / 2 + |D x|_1`, ignoring the box and the equality.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let qx = self.q.mul_vec(x);
        let l1: f64 = x.iter().zip(&self.d).map(|(v, w)| w * v.abs()).sum();
        dot(&self.c, x) + 0.5 * dot(x, &qx) + l1
    }
}

fn node(i: usize, j: usize, n: usize) -> usize {
    j * n + i
}

/// The state operator `L` (scaled by `1/h^2` for the Laplacian part).
pub fn state_operator(spec: &PdeSpec) -> Result<CsrMatrix> {
    spec.validate()?;
    let n = spec.grid_points_per_side;
    let h = spec.h();
    let inv_h2 = 1.0 / (h * h);
    let diff = match spec.equation {
        Equation::Poisson => 1.0,
        Equation::ConvectionDiffusion => spec.diffusion_eps,
    };
    let mut t = Vec::with_capacity(5 * n * n);
    for j in 0..n {
        for i in 0..n {
            let k = node(i, j, n);
            let mut diag = 4.0 * diff * inv_h2;
            let mut west = -diff * inv_h2;
            let mut east = -diff * inv_h2;
            let mut south = -diff * inv_h2;
            let mut north = -diff * inv_h2;
            if spec.equation == Equation::ConvectionDiffusion {
                let (w1, w2) = wind((i + 1) as f64 * h, (j + 1) as f64 * h);
                if w1 > 0.0 {
                    diag += w1 / h;
                    west -= w1 / h;
                } else {
                    diag -= w1 / h;
                    east += w1 / h;
                }
                if w2 > 0.0 {
                    diag += w2 / h;
                    south -= w2 / h;
                } else {
                    diag -= w2 / h;
                    north += w2 / h;
                }
            }
            t.push((k, k, diag));
            if i > 0 {
                t.push((k, node(i - 1, j, n), west));
            }
            if i + 1 < n {
                t.push((k, node(i + 1, j, n), east));
            }
            if j > 0 {
                t.push((k, node(i, j - 1, n), south));
            }
            if j + 1 < n {
                t.push((k, node(i, j + 1, n), north));
            }
        }
    }
    CsrMatrix::from_triplets(n * n, n * n, &t)
}

/// Desired state sampled at the interior nodes.
pub fn desired_state(spec: &PdeSpec) -> Vec<f64> {
    let n = spec.grid_points_per_side;
    let h = spec.h();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            out[node(i, j, n)] = spec
                .equation
                .desired_state((i + 1) as f64 * h, (j + 1) as f64 * h);
        }
    }
    out
}

pub fn assemble(spec: &PdeSpec) -> Result<QpInstance> {
    let l = state_operator(spec)?;
    let n = spec.grid_points_per_side;
    let nn = n * n;
    let h2 = spec.h() * spec.h();

    let mut t: Vec<(usize, usize, f64)> = l.triplets().into_iter().map(|(r, c, v)| (r, c, h2 * v)).collect();
    t.extend((0..nn).map(|k| (k, nn + k, -h2)));
    let a = CsrMatrix::from_triplets(nn, 2 * nn, &t)?;

    let mut qd = vec![h2; 2 * nn];
    qd[nn..].iter_mut().for_each(|v| *v = spec.beta2 * h2);
    let q = CsrMatrix::diagonal(&qd);

    let mut c: Vec<f64> = desired_state(spec).into_iter().map(|v| -h2 * v).collect();
    c.resize(2 * nn, 0.0);

    let mut d = vec![0.0; 2 * nn];
    d[nn..].iter_mut().for_each(|v| *v = 0.5 * spec.beta1 * h2);

    let mut lower = vec![f64::NEG_INFINITY; 2 * nn];
    let mut upper = vec![f64::INFINITY; 2 * nn];
    lower[nn..].iter_mut().for_each(|v| *v = spec.control_lower);
    upper[nn..].iter_mut().for_each(|v| *v = spec.control_upper);
    let bounds = BoxSet::new(lower, upper)?;

    QpInstance::new(c, q, a, vec![0.0; nn], d, bounds)
}

/// Parameter sets for drawing instances.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSampler {
    pub equation: Equation,
    pub beta1_set: Vec<f64>,
    pub beta2_set: Vec<f64>,
    /// Interior nodes per side; the variable blocks have `N^2` entries.
    pub sizes: Vec<usize>,
}

/// `2^k + 1` for `k = 3..=max_k`.
pub fn grid_sizes(max_k: u32) -> Vec<usize> {
    (3..=max_k).map(|k| (1usize << k) + 1).collect()
}

impl InstanceSampler {
    pub fn training(equation: Equation) -> Self {
        let betas = vec![0.0, 1e-2, 1e-4, 1e-6];
        Self {
            equation,
            beta1_set: betas.clone(),
            beta2_set: betas,
            sizes: grid_sizes(7),
        }
    }

    /// Out-of-sample sets; `include_largest` adds the `2^8 + 1` grid.
    pub fn holdout(equation: Equation, include_largest: bool) -> Self {
        let betas = vec![1e-3, 5e-3, 1e-5, 5e-5];
        Self {
            equation,
            beta1_set: betas.clone(),
            beta2_set: betas,
            sizes: grid_sizes(if include_largest { 8 } else { 7 }),
        }
    }

    pub fn with_sizes(mut self, sizes: Vec<usize>) -> Self {
        self.sizes = sizes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta1_set.is_empty() || self.beta2_set.is_empty() || self.sizes.is_empty() {
            return Err(invalid("instance sampler sets must be nonempty"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.beta1_set.len() * self.beta2_set.len() * self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every `(beta1, beta2, N)` in a fixed order.
    pub fn triples(&self) -> Vec<PdeSpec> {
        let mut out = Vec::with_capacity(self.len());
        for &n in &self.sizes {
            for &b1 in &self.beta1_set {
                for &b2 in &self.beta2_set {
                    out.push(PdeSpec::new(self.equation, n, b1, b2));
                }
            }
        }
        out
    }

    /// Index into [`triples`](Self::triples) of an independent uniform draw
    /// of each coordinate.
    pub fn sample_index(&self, rng: &mut RngStream) -> usize {
        let i1 = rng.index(self.beta1_set.len());
        let i2 = rng.index(self.beta2_set.len());
        let is = rng.index(self.sizes.len());
        (is * self.beta1_set.len() + i1) * self.beta2_set.len() + i2
    }

    pub fn sample_spec(&self, rng: &mut RngStream) -> PdeSpec {
        self.triples()[self.sample_index(rng)]
    }

    pub fn sample_instance(&self, rng: &mut RngStream) -> Result<(PdeSpec, QpInstance)> {
        self.validate()?;
        let spec = self.sample_spec(rng);
        let inst = assemble(&spec)?;
        Ok((spec, inst))
    }
}

pub fn sample_training_instance(
    sampler: &InstanceSampler,
    rng: &mut RngStream,
) -> Result<(PdeSpec, QpInstance)> {
    sampler.sample_instance(rng)
}

pub fn sample_holdout_instance(
    sampler: &InstanceSampler,
    rng: &mut RngStream,
) -> Result<(PdeSpec, QpInstance)> {
    sampler.sample_instance(rng)
}
