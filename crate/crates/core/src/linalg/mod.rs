//! Extended-precision scalar and dense-matrix kernels.

mod chol;
mod eigen;
mod lyap;
mod matrix;
pub mod quad;
mod real;

pub use chol::{chol, reconstruction_error};
pub use eigen::{min_eigenvalue, sym_eigen, SymEigen, MAX_SWEEPS};
pub use lyap::{lyap_residual, lyap_solve};
pub use matrix::{LowerTriangular, Matrix, SymMatrix};
pub use quad::{quad_integrate, QuadDomain, QuadResult};
pub use real::{sum_with, Precision, Real};
