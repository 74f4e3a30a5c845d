//! # fou
//!
//! Covariance structure, stationary moments and asymptotic decay laws of
//! Ornstein-Uhlenbeck processes driven by fractional, subfractional and
//! bifractional Brownian motions and by Hermite processes, of both the
//! first and the second kind.
//!
//! An OU process of the *first kind* solves the Langevin equation
//!
//! ```text
//! dX_t = -θ X_t dt + dG_t,      X_0 = 0,
//! ```
//!
//! with the driving noise `G` used directly. An OU process of the *second
//! kind* is driven instead by `Y_t = ∫_0^t e^{-s} dU_{a_s}` where
//! `a_t = γ e^{t/γ}` is the Lamperti time change of a `γ`-self-similar
//! Gaussian base `U`. First-kind processes keep the long memory of the
//! noise (power-law covariance decay); second-kind processes forget it
//! (exponential decay).
//!
//! The crate is organised in five layers:
//!
//! * [`kernels`]: closed-form covariance kernels, mixed partials,
//!   increment variances and the second-kind auxiliary functions.
//! * [`quadrature`]: singularity-aware adaptive quadrature plus the
//!   specific integral reductions the covariance formulas need.
//! * [`analytics`]: stationary moments, auto-covariances and the
//!   asymptotic regime catalog, with decay-rate fitting.
//! * [`simulate`]: exact-in-law Gaussian path sampling (circulant
//!   embedding / dense factorization) and OU path construction.
//! * [`montecarlo`]: ensemble statistics with standard errors and the
//!   empirical validation layer tying simulation to analytics.
//!
//! The [`validate`] module packages the cross-checks between those layers
//! into named suites; the `fou` CLI exposes everything as batch
//! subcommands. A narrative guide lives in `book/` at the repository root
//! and its code snippets are mirrored as doc-tests in [`guide`].

// Guards written as `!(a < b)` intentionally reject NaN alongside the
// ordinary violation; `partial_cmp` spellings would lose that.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod guide;
pub mod kernels;
pub mod montecarlo;
pub mod quadrature;
pub mod simulate;
pub mod validate;

pub use analytics::{AsymptoticRegime, NoiseKind, OuSpec};
pub use kernels::ProcessSpec;
pub use quadrature::{QuadConfig, QuadResult};
pub use simulate::{Grid, PathEnsemble};

/// Errors shared by every layer of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its admissible range, or an operation was
    /// asked for a process it is not defined for.
    #[error("domain error: {0}")]
    Domain(String),

    /// An integrand or kernel was evaluated on its singular set.
    #[error("singularity: {0}")]
    Singularity(String),

    /// Adaptive quadrature stopped before reaching the requested
    /// tolerance; the best estimate and the achieved error are reported.
    #[error("quadrature did not converge: value ≈ {value}, achieved error {est_error} (requested {requested})")]
    QuadratureNonConvergence {
        value: f64,
        est_error: f64,
        requested: f64,
    },

    /// A covariance matrix could not be factorized even after the jitter
    /// escalation; usually indicates a kernel bug.
    #[error("covariance matrix not positive semidefinite within jitter budget: {0}")]
    NotPositiveSemidefinite(String),

    /// The driver has non-stationary increments, so no stationary version
    /// of the OU solution exists.
    #[error("non-stationary driver: {0}")]
    NonStationaryDriver(String),

    /// A requested time does not lie on the ensemble grid (the estimators
    /// never interpolate).
    #[error("time {0} is not a grid point")]
    OffGrid(f64),

    /// Not enough data for the requested statistic or fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// File- or serialization-level failure in ensemble I/O.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
