//! Shared fixtures for the pipeline benchmarks.

use robin_eit::{assemble_operator, BoundaryGrid, KernelSpec, MediumConfig, OperatorMatrix};

/// Reference medium: `rho = 0.4`, unit conductivity, `gamma = 1`.
pub fn reference_medium() -> MediumConfig {
    MediumConfig::uniform(0.4, 1.0, 1.0).expect("valid medium")
}

pub fn reference_operator(n_points: usize) -> OperatorMatrix {
    let grid = BoundaryGrid::new(n_points).expect("positive grid size");
    assemble_operator(&reference_medium(), &grid, KernelSpec::default()).expect("regular medium")
}
