//! Numerical laboratory for the radial instability of a self-gravitating
//! polytropic gas with adiabatic exponent 6/5.
//!
//! The crate builds the explicit hydrostatic profile rho0(r) = (1+r^2)^(-5/2),
//! assembles the self-adjoint operator governing radial velocity
//! perturbations, maximizes its Rayleigh quotient to obtain the largest
//! growing mode (mu0, psi0, phi0), evolves both the linearized and the full
//! perturbed Euler-Poisson systems, and measures escape times against the
//! predicted law T = ln(theta/delta) / sqrt(mu0).
//!
//! Modules follow the pipeline:
//!
//! * [`grid`] - stretched radial grids, quadrature and differentiation
//! * [`steady`] - the hydrostatic background profile
//! * [`gravity`] - radial Poisson solve by cumulative enclosed mass
//! * [`eigen`] - the generalized eigenproblem for the growing mode
//! * [`linear`] - linearized evolution and growth-rate measurement
//! * [`nonlinear`] - full perturbed evolution, seeding and escape times
//! * [`energy`] - weighted instant/total energies and related diagnostics
//! * [`probes`] - seeded random test-function suites
//! * [`report`] - plot-ready CSV emission
//! * [`check`] - the deterministic invariant/property suite

pub mod check;
pub mod eigen;
pub mod energy;
pub mod gravity;
pub mod grid;
pub mod linalg;
pub mod linear;
pub mod nonlinear;
pub mod probes;
pub mod report;
pub mod steady;

pub use eigen::{EigenPair, EigenPencil};
pub use grid::{GridFunction, RadialGrid, Stretch};
pub use linear::LinearState;
pub use nonlinear::{EscapeResult, FluidState};
pub use steady::SteadyState;

/// Errors shared by every module of the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("out of domain: r = {0}")]
    OutOfDomain(f64),
    #[error("eigensolve failed to converge: {0}")]
    ConvergenceFailure(String),
    #[error("positivity guard violated at t = {t}, r = {r}")]
    GuardViolated { t: f64, r: f64 },
    #[error("instability detected: norm exceeded {0:e} times its initial value")]
    InstabilityDetected(f64),
    #[error("unknown weight id: {0}")]
    UnknownWeight(String),
    #[error("insufficient history: need {need} stored levels, have {have}")]
    InsufficientHistory { need: usize, have: usize },
    #[error("exponent constraint violated: {0}")]
    ExponentConstraint(String),
    #[error("nonpositive growth rate omega = {0}")]
    NonpositiveOmega(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
