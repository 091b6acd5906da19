pub mod analysis;
pub mod ctau;
pub mod error;
pub mod fraclap;
pub mod geometry;
pub mod green;
pub mod grid;
pub mod measures;
pub mod nonlinearity;
pub mod operator;
pub mod order;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{BallDomain, BallPoint};
pub use grid::{FieldOnGrid, GradedGrid};
pub use order::FracOrder;
pub use measures::{BoundaryMeasure, PotentialField};
pub use nonlinearity::{truncate, Nonlinearity, Reaction, TruncatedNonlinearity};
pub use solver::{solve, solve_family, SolveOptions, SolveResult, Solver};
pub use analysis::{RateFit, WeakNormEstimate};
