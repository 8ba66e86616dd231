//! Qualitative reconstruction of a concentric Robin interface inside the
//! unit disk.
//!
//! The pipeline runs in four steps:
//!
//! 1. [`forward`] synthesizes the boundary gap operator `A` from the
//!    separable series solution, optionally perturbed with seeded noise.
//! 2. [`greens`] builds right-hand sides from the Robin Green's trace at a
//!    sampling point.
//! 3. [`regularize`] decomposes `A` and applies Tikhonov, spectral cutoff or
//!    truncated total least squares filters.
//! 4. [`imaging`] turns filtered solutions into normalized LSM and RFM
//!    indicator maps and scores them against the known inclusion.
//!
//! [`runner`] wires these steps to a text configuration and writes
//! artifacts; [`verification`] holds independent reference solvers used by
//! the test suite.

pub mod config;
pub mod error;
pub mod export;
pub mod forward;
pub mod greens;
pub mod imaging;
pub mod regularize;
pub mod runner;
pub mod verification;

pub use config::{ExperimentConfig, SweepAxis};
pub use error::{Error, ErrorKind, Result};
pub use forward::{
    apply_noise, assemble_operator, BoundaryGrid, FourierData, KernelSpec, MediumConfig, ModeCoefficients,
    OperatorMatrix, SeriesSolution,
};
pub use greens::{robin_greens_trace, GreensTrace, SamplingPoint};
pub use imaging::{lsm_indicator, normalize_map, rfm_indicator, score, ImagingGrid, IndicatorMap, Method, ReconMetrics};
pub use regularize::{decompose, filtered_solve, FilterSpec, SpectralSystem};
pub use runner::{RunManifest, RunOutcome};
