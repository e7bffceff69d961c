//! Dense pure states and reduced density operators over mixed-radix
//! tensor-product spaces.

mod density;
mod layout;
pub mod linalg;
mod state;

pub use density::{DensityOperator, DENSITY_TOL};
pub use layout::{Role, SubsystemLayout, MAX_QUBIT_EQUIVALENTS};
pub use linalg::CMatrix;
pub use state::{StateVector, NORM_TOL, UNITARY_TOL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("capacity exceeded: {0:.2} qubit equivalents (limit 24)")]
    CapacityExceeded(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("invalid subsystem indices: {0}")]
    InvalidIndices(String),
    #[error("layouts differ")]
    LayoutMismatch,
    #[error("invalid density operator: {0}")]
    InvalidDensity(String),
}

/// Tensor product of `parts`, in order.
pub fn tensor_compose(parts: &[StateVector]) -> Result<StateVector, HilbertError> {
    StateVector::tensor_compose(parts)
}
