//! Shock formation in one-dimensional strictly hyperbolic systems
//! `∂f/∂t = M(f)·∂f/∂x`.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] defines the quasilinear systems (built-in Burgers and shallow
//!   water, plus polynomial user models) together with `M(f)` and its
//!   derivative tensor `∂M_ij/∂f_k`.
//! * [`eigensystem`] computes real eigenvalues with right and left
//!   eigenvectors of small dense matrices.
//! * [`spectral`] and [`solver`] evolve periodic initial data with Fourier
//!   collocation and RK4 up to the verge of gradient blowup.
//! * [`singularity`] extrapolates `(x*, t*, f*)` and the wave family from
//!   the monitor series of a run.
//! * [`similarity`] evaluates the universal profile `-ξ = F + K F³`, the
//!   constant `c`, the derivative blowup laws and profile collapse.

pub mod eigensystem;
pub mod linalg;
pub mod model;
pub mod similarity;
pub mod singularity;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use eigensystem::{eigen_decompose, strict_hyperbolicity_margin, EigenError, EigenSystem};
pub use linalg::{DerivativeTensor, SquareMatrix};
pub use model::{HyperbolicSystem, ModelError, StateVector};
pub use similarity::{
    compute_c, fit_k, rescale_and_collapse, solve_f, SimilarityError, SimilarityPrediction,
    SimilaritySolution,
};
pub use singularity::{
    estimate_singularities, resolved_until, EstimateOptions, SingularityError, SingularityEstimate,
    TStarModel,
};
pub use solver::{evolve, Grid, GridSnapshot, RunResult, SolverError, StopReason};
