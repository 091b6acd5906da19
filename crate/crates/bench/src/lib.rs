//! Shared fixtures for the benchmarks.

use fracblow_core::{FracOrder, GradedGrid};

/// Order used throughout the benchmarks.
pub fn order() -> FracOrder {
    FracOrder::new(0.5).expect("0.5 is a valid order")
}

/// Default production grid.
pub fn default_grid() -> GradedGrid {
    GradedGrid::new(GradedGrid::DEFAULT_RHO_MIN, GradedGrid::DEFAULT_RATIO, GradedGrid::DEFAULT_THETA)
        .expect("default grid is valid")
}

/// Coarser grid for the more expensive solves.
pub fn coarse_grid() -> GradedGrid {
    GradedGrid::new(1e-4, GradedGrid::DEFAULT_RATIO, 8).expect("coarse grid is valid")
}
