//! Oracle interface for `min_x E[F(x, xi)] + r(x)`.

use crate::prox::Regularizer;
use crate::rng::RngStream;

/// Stochastic composite problem accessed through sampled function values.
///
/// Implementors provide scenario sampling, `F(x, xi)`, and the proximable
/// part `r`. A subgradient oracle and an exact objective are optional and
/// only used by the subgradient baseline and by logging.
pub trait CompositeProblem {
    type Scenario;

    fn dim(&self) -> usize;

    fn sample_scenario(&self, rng: &mut RngStream) -> Self::Scenario;

    fn eval(&self, x: &[f64], scenario: &Self::Scenario) -> f64;

    fn regularizer(&self) -> &Regularizer;

    /// `(F(x1, s), F(x2, s))`. Expensive oracles may evaluate the two points
    /// concurrently.
    fn eval_pair(&self, x1: &[f64], x2: &[f64], scenario: &Self::Scenario) -> (f64, f64) {
        (self.eval(x1, scenario), self.eval(x2, scenario))
    }

    fn has_subgradient(&self) -> bool {
        false
    }

    /// An element of `dF(x, xi)`. `step` is the step size the caller is about
    /// to take, for oracles that break ties by lookahead.
    fn subgradient(&self, _x: &[f64], _scenario: &Self::Scenario, _step: f64) -> Option<Vec<f64>> {
        None
    }

    /// Exact `f(x) = E[F(x, xi)]` when it is computable.
    fn objective(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Aggregate Lipschitz bound on `F(., xi)`.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn weak_convexity(&self) -> Option<f64> {
        None
    }
}

type SubgradFn<Sc> = Box<dyn Fn(&[f64], &Sc) -> Vec<f64> + Send + Sync>;

/// Closure-backed problem, mostly for tests and small experiments.
pub struct FnProblem<Sc, S, F> {
    dim: usize,
    sampler: S,
    f: F,
    regularizer: Regularizer,
    subgrad: Option<SubgradFn<Sc>>,
    deterministic: bool,
    lipschitz: Option<f64>,
    weak_convexity: Option<f64>,
}

impl<F> FnProblem<(), fn(&mut RngStream), F>
where
    F: Fn(&[f64], &()) -> f64,
{
    /// Problem with a single scenario; `objective` is exact.
    pub fn deterministic(dim: usize, f: F) -> Self {
        fn no_scenario(_: &mut RngStream) {}
        Self {
            dim,
            sampler: no_scenario,
            f,
            regularizer: Regularizer::Zero,
            subgrad: None,
            deterministic: true,
            lipschitz: None,
            weak_convexity: None,
        }
    }
}

impl<Sc, S, F> FnProblem<Sc, S, F>
where
    S: Fn(&mut RngStream) -> Sc,
    F: Fn(&[f64], &Sc) -> f64,
{
    pub fn stochastic(dim: usize, sampler: S, f: F) -> Self {
        Self {
            dim,
            sampler,
            f,
            regularizer: Regularizer::Zero,
            subgrad: None,
            deterministic: false,
            lipschitz: None,
            weak_convexity: None,
        }
    }

    pub fn with_regularizer(mut self, r: Regularizer) -> Self {
        self.regularizer = r;
        self
    }

    pub fn with_subgradient(
        mut self,
        g: impl Fn(&[f64], &Sc) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.subgrad = Some(Box::new(g));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_weak_convexity(mut self, rho: f64) -> Self {
        self.weak_convexity = Some(rho);
        self
    }
}

impl<Sc, S, F> CompositeProblem for FnProblem<Sc, S, F>
where
    S: Fn(&mut RngStream) -> Sc,
    F: Fn(&[f64], &Sc) -> f64,
{
    type Scenario = Sc;

    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_scenario(&self, rng: &mut RngStream) -> Sc {
        (self.sampler)(rng)
    }

    fn eval(&self, x: &[f64], scenario: &Sc) -> f64 {
        (self.f)(x, scenario)
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn has_subgradient(&self) -> bool {
        self.subgrad.is_some()
    }

    fn subgradient(&self, x: &[f64], scenario: &Sc, _step: f64) -> Option<Vec<f64>> {
        self.subgrad.as_ref().map(|g| g(x, scenario))
    }

    fn objective(&self, x: &[f64]) -> Option<f64> {
        if !self.deterministic {
            return None;
        }
        // A deterministic problem has exactly one scenario; draw it from a
        // throwaway stream.
        let s = (self.sampler)(&mut RngStream::from_seed(0));
        Some((self.f)(x, &s))
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    fn weak_convexity(&self) -> Option<f64> {
        self.weak_convexity
    }
}
