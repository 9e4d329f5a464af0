//! Mixed-dimensional single-phase flow in fractured porous media.
//!
//! The crate provides the full pipeline behind the `nlmc-flow` binary:
//!
//! * [`geometry`] — triangular fine meshes, fracture sets with network
//!   labeling, segment clipping, coarse rectangular grids and oversampled
//!   patches;
//! * [`fvm`] — two-point flux finite-volume assembly of the fine-grid block
//!   system for the discrete fracture model (DFM, fractures resolved by mesh
//!   facets) and the embedded fracture model (EFM, fractures overlaid on a
//!   background grid);
//! * [`linalg`] — sparse matrices, an LDLᵀ direct factorization for the
//!   symmetric positive definite and saddle-point systems that arise, and the
//!   triple product R·A·Rᵀ;
//! * [`nlmc`] — non-local multicontinuum upscaling: constrained
//!   energy-minimizing basis functions on oversampled patches, the projection
//!   matrix R and the upscaled coarse model;
//! * [`sim`] — implicit-Euler time stepping, cell averaging and the relative
//!   L² error metric used to compare coarse and fine solutions;
//! * [`io`] — experiment configuration, trajectory/report output (CSV, legacy
//!   VTK) and debug dumps;
//! * [`cli`] — the subcommand pipeline (`generate`, `solve-fine`, `upscale`,
//!   `solve-coarse`, `compare`, `report`).

pub mod cli;
pub mod fvm;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod nlmc;
pub mod sim;

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the process exit codes of the CLI: configuration and
/// input-format problems exit with 2, geometry violations with 3, solver
/// failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or invalid input value.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed text input (mesh, config, or data file).
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    /// Geometric precondition or invariant violated.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Linear-algebra failure (singular or non-SPD operator, rank-deficient
    /// constraints, residual out of tolerance).
    #[error("solver error: {0}")]
    Solver(String),
    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI maps this error onto.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Io(_) => 2,
            Error::Geometry(_) => 3,
            Error::Solver(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
