use num_complex::Complex;
use num_traits::Zero;

use super::Matrix;
use crate::scalar::Real;

/// `a = q * r` with `q` unitary (rows x rows) and `r` upper triangular.
pub struct Qr<T> {
    pub q: Matrix<T>,
    pub r: Matrix<T>,
}

/// Householder QR.
pub fn qr_decompose<T: Real>(a: &Matrix<T>) -> Qr<T> {
    let (m, n) = (a.rows(), a.cols());
    let mut r = a.clone();
    let mut q = Matrix::<T>::identity(m);
    let two = T::lit(2.0);
    let mut v = vec![Complex::<T>::zero(); m];

    for k in 0..n.min(m.saturating_sub(1)) {
        let norm_x = (k..m).fold(T::zero(), |acc, i| acc + r[(i, k)].norm_sqr()).sqrt();
        if norm_x == T::zero() {
            continue;
        }
        let x0 = r[(k, k)];
        let phase = if x0.norm() == T::zero() {
            Complex::new(T::one(), T::zero())
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm_x;
        for i in k..m {
            v[i] = r[(i, k)];
        }
        v[k] -= alpha;
        let vnorm = (k..m).fold(T::zero(), |acc, i| acc + v[i].norm_sqr()).sqrt();
        if vnorm == T::zero() {
            continue;
        }
        for vi in v.iter_mut().take(m).skip(k) {
            *vi /= vnorm;
        }
        // r <- (I - 2 v v^H) r
        for j in k..n {
            let dot = (k..m).fold(Complex::zero(), |acc, i| acc + v[i].conj() * r[(i, j)]);
            let s = dot * two;
            for i in k..m {
                let vi = v[i];
                r[(i, j)] -= vi * s;
            }
        }
        // q <- q (I - 2 v v^H)
        for i in 0..m {
            let dot = (k..m).fold(Complex::zero(), |acc, l| acc + q[(i, l)] * v[l]);
            let s = dot * two;
            for l in k..m {
                let vl = v[l].conj();
                q[(i, l)] -= s * vl;
            }
        }
        for i in k + 1..m {
            r[(i, k)] = Complex::zero();
        }
    }
    Qr { q, r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_ginibre;
    use crate::rng::RngStream;

    #[test]
    fn reconstructs_and_is_unitary() {
        let mut rng = RngStream::new(1, 0);
        for &(m, n) in &[(1, 1), (4, 4), (6, 3), (9, 9)] {
            let a = sample_ginibre::<f64>(m, n, &mut rng);
            let Qr { q, r } = qr_decompose(&a);
            assert!(q.matmul(&r).max_abs_diff(&a) < 1e-12);
            assert!(q.adjoint_matmul(&q).max_abs_diff(&Matrix::identity(m)) < 1e-13);
            for i in 0..m {
                for j in 0..i.min(n) {
                    assert_eq!(r[(i, j)], Complex::zero());
                }
            }
        }
    }
}
