//! Periodic spectral calculus and a zero-Mach-number transport-diffusion
//! solver.
//!
//! The crate is organized bottom-up:
//!
//! * [`cutoff`], [`grid`], [`field`] — FFT-backed fields on a periodic box
//!   and the smooth radial cutoff pair driving the dyadic decomposition;
//! * [`dyadic`] — frequency blocks, low-pass operators and Bernstein-type
//!   probes;
//! * [`besov`], [`trajectory`] — dyadic-weighted norms of fields and of
//!   time-sampled trajectories;
//! * [`paradiff`] — paraproduct/remainder splitting of products, cutoff
//!   commutators, their five-term decomposition, and measured inequality
//!   probes;
//! * [`model`] — the coupled density/velocity/pressure model: coefficient
//!   closures, source terms, residuals, scaling, and the lifespan formula;
//! * [`solver`] — heat semigroup, transport-diffusion and velocity steps,
//!   the variable-coefficient pressure solve, the iterative approximation
//!   driver, the self-consistent time stepper and its monitors.

pub mod besov;
pub mod cutoff;
pub mod dyadic;
pub mod field;
pub mod grid;
pub mod model;
pub mod paradiff;
pub mod sampling;
pub mod solver;
pub mod trajectory;

pub use besov::BesovParams;
pub use cutoff::CutoffPair;
pub use field::Field;
pub use grid::Grid;
pub use model::{FlowState, KappaSpec, LifespanParams, PhysicalParams};
pub use paradiff::InequalityReport;
pub use trajectory::Trajectory;

use thiserror::Error;

/// Unified error type for the whole crate.
///
/// Construction errors (dimensions, indices, parameter ranges) are raised
/// eagerly; solver errors carry enough context to diagnose the run that
/// produced them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spatial dimension must be 2 or 3, got {0}")]
    InvalidDimension(usize),
    #[error("points per axis must be a power of two >= 8, got {0}")]
    InvalidResolution(usize),
    #[error("period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("fields live on different grids ({0} vs {1})")]
    GridMismatch(String, String),
    #[error("expected a field with {expected} component(s), got {got}")]
    ComponentMismatch { expected: usize, got: usize },
    #[error("block index must be >= -1, got {0}")]
    InvalidBlockIndex(i32),
    #[error("dyadic block {j} carries no energy; probe is degenerate")]
    EmptyBlock { j: i32 },
    #[error("Lebesgue exponent must lie in [1, inf], got {0}")]
    InvalidExponent(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("embedding pair is inadmissible: {0}")]
    InadmissiblePair(String),
    #[error("trajectory times must start at 0 and strictly increase (index {0})")]
    NonmonotoneTimes(usize),
    #[error("trajectory has no channel named `{0}`")]
    MissingChannel(String),
    #[error("need at least {need} stored samples, trajectory has {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("physical parameters inconsistent: {0}")]
    InvalidPhysicalParams(String),
    #[error("density leaves the admissible range: min {min:.6e}, max {max:.6e}")]
    DensityOutOfRange { min: f64, max: f64 },
    #[error("diffusion coefficient degenerates: min kappa {0:.6e}")]
    KappaDegenerate(f64),
    #[error("inverse-density coefficient degenerates: min lambda {0:.6e}")]
    LambdaDegenerate(f64),
    #[error("velocity is not solenoidal: ||div u||_inf = {0:.6e}")]
    NonSolenoidal(f64),
    #[error("advective CFL number {cfl:.3} exceeds the limit {limit:.3}")]
    CflViolation { cfl: f64, limit: f64 },
    #[error("pressure solve stalled at relative residual {residual:.3e} after {iterations} iterations")]
    PressureNonconvergence { residual: f64, iterations: usize },
    #[error("inner fixed point stalled at defect {defect:.3e} after {iterations} iterations")]
    FixedPointStall { defect: f64, iterations: usize },
    #[error("density bound violated at t={t:.6}: range [{min:.6e}, {max:.6e}] left [{lo:.6e}, {hi:.6e}]")]
    DensityBoundViolation {
        t: f64,
        min: f64,
        max: f64,
        lo: f64,
        hi: f64,
    },
    #[error("target {target:.3e} unreachable on the stored horizon; best achieved {achieved:.3e}")]
    UnreachableTarget { target: f64, achieved: f64 },
    #[error("{0}")]
    InvalidInput(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
