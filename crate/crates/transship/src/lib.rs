//! Two-location stochastic lot-sizing with proactive lateral transshipment.
//!
//! The crate covers the full pipeline for the finite-horizon, non-stationary
//! problem where two stocking locations order from a shared warehouse and may
//! redistribute stock laterally before demand realizes:
//!
//! - [`demand`]: non-stationary Poisson/Normal demand models, named mean
//!   patterns, discretization to finite integer supports, and convolution.
//! - [`loss`]: first-order loss function, its complement, and the N-region
//!   piecewise-linear lower bounds used by the static model.
//! - [`sdp`]: exact backward-induction solvers over the joint action space
//!   and the decoupled transship-then-order action space, plus policy
//!   evaluation by forward induction.
//! - [`milp`]: the static-uncertainty mixed integer model with fixed-cost
//!   indicator binaries, solved by a built-in branch-and-bound over a dense
//!   two-phase simplex (pluggable backend).
//! - [`heuristic`]: the receding-horizon policy that re-solves the static
//!   model every period, picks the transshipment by one-stage lookahead, and
//!   estimates expected cost under a confidence-interval stopping rule.
//! - [`experiments`]: instance grids, Latin hypercube sampling, optimality-gap
//!   records, pivot tables and box-plot data.

pub mod config;
pub mod demand;
pub mod error;
pub mod experiments;
pub mod heuristic;
pub mod instance;
pub mod loss;
pub mod milp;
pub mod sdp;

pub use error::Error;
pub use instance::{Action, Instance, State};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
