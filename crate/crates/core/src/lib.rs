//! Gradient descent with Armijo backtracking line searches.
//!
//! The crate provides the basic backtracking search (largest `beta^m * delta0`
//! satisfying Armijo's condition), a two-way warm-started search, and an
//! unbounded search that keeps growing the step by `1/beta` up to a cap
//! `h(||grad f||)` with `t * h(t) -> 0`. Drivers turn these searches into
//! iteration loops, [`diagnostics`] audits finished traces against the
//! convergence guarantees, and [`corpus`] supplies test objectives with known
//! critical points and local Lipschitz data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod drivers;
pub mod error;
pub mod growth;
pub mod linesearch;
pub mod objective;
pub mod params;
pub mod trace;
pub mod vector;

pub use error::{Error, Result};
pub use growth::GrowthFunction;
pub use linesearch::{Phase, SearchResult};
pub use objective::{KnownAnalysis, LocalLipschitz, Objective};
pub use params::LineSearchParams;
pub use trace::{Mode, StepRecord, Termination, Trace};
pub use vector::Vector;
