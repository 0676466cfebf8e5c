//! Zeroth-order proximal stochastic gradient methods for weakly convex
//! composite problems, with a phase-retrieval benchmark and an application to
//! tuning the penalty parameter of a proximal ADMM on PDE-constrained QPs.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cg;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod moreau;
pub mod padmm;
pub mod pde;
pub mod phase_retrieval;
pub mod problem;
pub mod prox;
pub mod rng;
pub mod smoothing;
pub mod solvers;
pub mod sparse;
mod spectral;
pub mod trace;
pub mod tuner;

pub use error::{Error, Result};
pub use problem::{CompositeProblem, FnProblem};
pub use prox::{BoxSet, Regularizer};
pub use rng::RngStream;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/moreau.md")]
    mod moreau {}
    #[doc = include_str!("../../../book/src/phase_retrieval.md")]
    mod phase_retrieval {}
    #[doc = include_str!("../../../book/src/padmm.md")]
    mod padmm {}
    #[doc = include_str!("../../../book/src/tuning.md")]
    mod tuning {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
