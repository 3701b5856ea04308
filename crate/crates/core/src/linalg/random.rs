use num_complex::Complex;

use super::{qr_decompose, Matrix, UnitaryMatrix};
use crate::rng::RngStream;
use crate::scalar::Real;

/// Ginibre matrix with i.i.d. unit-variance complex Gaussian entries
/// (real and imaginary parts each `Normal(0, 1/2)`).
pub fn sample_ginibre<T: Real>(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Matrix::from_fn(rows, cols, |_, _| {
        let re = rng.normal() * s;
        let im = rng.normal() * s;
        Complex::new(T::lit(re), T::lit(im))
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`, which removes the bias of plain QR.
pub fn sample_haar_unitary<T: Real>(dim: usize, rng: &mut RngStream) -> UnitaryMatrix<T> {
    let g = sample_ginibre::<T>(dim, dim, rng);
    let qr = qr_decompose(&g);
    let mut q = qr.q;
    for j in 0..dim {
        let d = qr.r[(j, j)];
        let n = d.norm();
        let phase = if n > T::zero() {
            d / n
        } else {
            Complex::new(T::one(), T::zero())
        };
        for i in 0..dim {
            q[(i, j)] = q[(i, j)] * phase;
        }
    }
    UnitaryMatrix::new_unchecked(q)
}
