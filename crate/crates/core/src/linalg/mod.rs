//! Sparse linear algebra: CSR matrices, a sparse LDLᵀ factorization with
//! fill-reducing ordering, saddle-point solves for the constrained basis
//! problems, and the R A Rᵀ triple product used by the upscaling.

mod ldlt;
mod saddle;
mod sparse;

pub use ldlt::{factor, solve_spd, LdltFactor, MatrixOrdering};
pub use saddle::{solve_saddle, SaddleFactor, SaddleSolution, SaddleSystem};
pub use sparse::{triple_product, SparseMatrix, TripletBuilder};

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Max-norm of a vector.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |w, &x| w.max(x.abs()))
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
