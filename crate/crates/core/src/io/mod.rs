//! Config parsing and the on-disk artifact formats shared by the CLI stages.

pub mod config;
pub mod dump;
pub mod report;
pub mod vtk;
