//! Quantum limits on Fisher information for moment estimation of
//! subdiffraction incoherent objects.

pub mod bounds;
pub mod cholesky_deriv;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod moments;
pub mod otf;
pub mod table;
pub mod thermal;

pub use error::{Error, Result};
pub use linalg::{Precision, Real};
