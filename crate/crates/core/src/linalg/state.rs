use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{eig_hermitian, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Numerical acceptance thresholds for the validated matrix types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub hermitian: f64,
    pub trace: f64,
    pub psd: f64,
    pub unitary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-10,
            trace: 1e-10,
            psd: 1e-9,
            unitary: 1e-10,
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    matrix: Matrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: Matrix<T>, tol: &Tolerances) -> Result<Self> {
        check_cheap(&matrix, tol)?;
        let eig = eig_hermitian(&matrix)?;
        let min = eig.values.first().copied().unwrap_or(T::zero());
        if min < -T::lit(tol.psd) {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityMatrix { matrix })
    }

    /// Checks Hermiticity and trace only; positivity is the caller's claim.
    pub fn new_trusted(matrix: Matrix<T>, tol: &Tolerances) -> Result<Self> {
        check_cheap(&matrix, tol)?;
        Ok(DensityMatrix { matrix })
    }

    pub(crate) fn new_unchecked(matrix: Matrix<T>) -> Self {
        DensityMatrix { matrix }
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn pure(psi: &[Complex<T>]) -> Result<Self> {
        let norm: T = psi.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        if (norm - T::one()).abs() > T::lit(1e-10) {
            return Err(Error::InvalidState(format!("state vector has norm^2 {norm}")));
        }
        Ok(DensityMatrix {
            matrix: Matrix::outer(psi, psi),
        })
    }

    /// Computational basis projector `|index><index|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        m[(index, index)] = Complex::new(T::one(), T::zero());
        DensityMatrix { matrix: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            matrix: Matrix::identity(dim).scale_real(T::one() / T::lit(dim as f64)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }

    /// Computational-basis populations `<x|rho|x>`.
    pub fn probabilities(&self) -> Vec<T> {
        self.matrix.diagonal().into_iter().map(|z| z.re).collect()
    }

    /// `||a - b||_1 / 2`.
    pub fn trace_distance(&self, other: &Self) -> Result<T> {
        let diff = &self.matrix - &other.matrix;
        let eig = eig_hermitian(&diff)?;
        Ok(eig.values.iter().fold(T::zero(), |a, v| a + v.abs()) * T::lit(0.5))
    }
}

fn check_cheap<T: Real>(m: &Matrix<T>, tol: &Tolerances) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "density matrix must be square, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidState("non-finite entries".into()));
    }
    let herm = m.hermitian_defect();
    if herm > T::lit(tol.hermitian) {
        return Err(Error::InvalidState(format!("Hermiticity defect {herm:e}")));
    }
    let tr = m.trace();
    if (tr - Complex::new(T::one(), T::zero())).norm() > T::lit(tol.trace) {
        return Err(Error::InvalidState(format!("trace {tr}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix<T> {
    matrix: Matrix<T>,
}

impl<T: Real> UnitaryMatrix<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerances::default().unitary)
    }

    pub fn with_tolerance(matrix: Matrix<T>, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "unitary must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let dev = matrix.adjoint_matmul(&matrix).max_abs_diff(&Matrix::identity(matrix.rows()));
        if !(dev <= T::lit(tol)) {
            return Err(Error::NotUnitary { deviation: dev.as_f64() });
        }
        Ok(UnitaryMatrix { matrix })
    }

    pub(crate) fn new_unchecked(matrix: Matrix<T>) -> Self {
        UnitaryMatrix { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        UnitaryMatrix {
            matrix: Matrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }

    /// `U rho U^dagger`.
    pub fn conjugate(&self, rho: &Matrix<T>) -> Matrix<T> {
        self.matrix.matmul(rho).matmul_adjoint(&self.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_states() {
        let bad_trace = Matrix::<f64>::identity(2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = Matrix::<f64>::from_real_diag(&[1.5, -0.5]);
        assert!(matches!(DensityMatrix::new(negative), Err(Error::InvalidState(_))));
        let mut non_herm = Matrix::<f64>::from_real_diag(&[0.5, 0.5]);
        non_herm[(0, 1)] = Complex::new(0.1, 0.0);
        assert!(DensityMatrix::new(non_herm).is_err());
    }

    #[test]
    fn trace_distance_of_orthogonal_states_is_one() {
        let a = DensityMatrix::<f64>::basis(2, 0);
        let b = DensityMatrix::<f64>::basis(2, 1);
        assert!((a.trace_distance(&b).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unitary_validation() {
        assert!(UnitaryMatrix::new(Matrix::<f64>::identity(3)).is_ok());
        assert!(UnitaryMatrix::new(Matrix::<f64>::identity(3).scale_real(2.0)).is_err());
    }
}
