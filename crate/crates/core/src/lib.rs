//! Equivalence checking, model reduction and Monte Carlo validation for
//! discrete-time stochastic linear control systems
//!
//! ```text
//! x(t+1) = A x(t) + B u(t) + G w(t),      w(t) ~ N(mu, I)
//! y(t)   = C x(t) + nu(t),                nu(t) ~ N(0, Psi)
//! ```
//!
//! The state noise `G w` may be degenerate (`rank(G) < n`), in which case the
//! state distribution is supported on a proper affine subspace and admits no
//! density. All checkers and reductions in this crate are built to handle
//! that case.
//!
//! Module map:
//! - [`numlin`]: tolerance-aware rank/kernel/subspace arithmetic (the
//!   geometric substrate for every checker).
//! - [`sysmodel`]: the system type plus exact conditional moments, supports
//!   and the stationary state covariance.
//! - [`relations`]: subspace relations `ker([R1 -R2])` between state spaces.
//! - [`equivalence`]: decision procedures for linear equivalence, external
//!   behavior equivalence and stochastic bisimulation.
//! - [`reduction`]: quotient systems and minimal reductions.
//! - [`montecarlo`]: seeded trajectory simulation and empirical validation
//!   of the analytic verdicts.
//! - [`io`]: JSON document formats for systems, relations and inputs.

pub mod equivalence;
pub mod io;
pub mod montecarlo;
pub mod numlin;
pub mod reduction;
pub mod relations;
pub mod sysmodel;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix or vector dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Structurally invalid input (bad values, malformed documents, bad flags).
    #[error("invalid input: {0}")]
    Invalid(String),
    /// An operation's mathematical precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The iterative eigenvalue computation did not converge.
    #[error("eigenvalue computation did not converge")]
    EigenConvergence,
    /// Operation requires a stable state matrix.
    #[error("unstable system: spectral radius {rho} is not below 1")]
    Unstable { rho: f64 },
    /// A numerical guarantee could not be met.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// I/O failure while reading or writing documents.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use equivalence::{CheckReport, ConditionCheck, ConditionId, Verdict};
pub use numlin::{Subspace, Tolerance};
pub use relations::LinearRelation;
pub use sysmodel::{InputSequence, MomentSequence, StochasticLinearSystem};
