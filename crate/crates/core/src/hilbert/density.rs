use super::linalg::{self, CMatrix};
use super::{HilbertError, SubsystemLayout};

/// Tolerance used by every density-operator invariant.
pub const DENSITY_TOL: f64 = 1e-10;

/// Hermitian, positive, unit-trace operator on the subsystems of `layout`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    layout: SubsystemLayout,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity to within `1e-10`.
    pub fn new(layout: SubsystemLayout, matrix: CMatrix) -> Result<Self, HilbertError> {
        let rho = Self::from_parts(layout, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape check only; for operators positive by construction.
    pub(crate) fn from_parts(
        layout: SubsystemLayout,
        matrix: CMatrix,
    ) -> Result<Self, HilbertError> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(HilbertError::DimensionMismatch {
                expected: d,
                found: matrix.nrows(),
            });
        }
        Ok(Self { layout, matrix })
    }

    pub fn validate(&self) -> Result<(), HilbertError> {
        let herm = linalg::hermiticity_deviation(&self.matrix);
        if herm > DENSITY_TOL {
            return Err(HilbertError::InvalidDensity(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(HilbertError::InvalidDensity(format!("trace {tr}")));
        }
        let sym = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        let min = sym
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -DENSITY_TOL {
            return Err(HilbertError::InvalidDensity(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Ascending spectrum after symmetrization and clamping.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn trace_distance(&self, other: &Self) -> Result<f64, HilbertError> {
        if self.layout.dims() != other.layout.dims() {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(linalg::trace_distance(&self.matrix, &other.matrix))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, HilbertError> {
        if self.layout.dims() != other.layout.dims() {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(linalg::max_abs(&(&self.matrix - &other.matrix)))
    }
}
