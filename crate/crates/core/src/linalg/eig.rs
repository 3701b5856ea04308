use std::cmp::Ordering;

use num_complex::Complex;
use num_traits::{One, Zero};

use super::{Matrix, UnitaryMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct EigConfig {
    /// QR sweep budget is `sweeps_per_dim * dim`.
    pub sweeps_per_dim: usize,
    /// Jacobi sweep budget for Hermitian problems.
    pub jacobi_sweeps: usize,
    /// Allowed `max |m - m^dagger|` relative to `max(1, max |m|)`.
    pub hermitian_tolerance: f64,
}

impl Default for EigConfig {
    fn default() -> Self {
        EigConfig {
            sweeps_per_dim: 30,
            jacobi_sweeps: 100,
            hermitian_tolerance: 1e-8,
        }
    }
}

/// Eigenpairs of a general square matrix, sorted by descending modulus
/// (ties: descending real part, then descending imaginary part).
/// `vectors` holds unit-norm eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct GeneralEigen<T> {
    pub values: Vec<Complex<T>>,
    pub vectors: Matrix<T>,
}

/// Eigenpairs of a Hermitian matrix with real eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    pub vectors: UnitaryMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// `V diag(f(λ)) V^dagger`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let v = self.vectors.matrix();
        let n = v.rows();
        let scaled = Matrix::from_fn(n, n, |i, j| v[(i, j)] * f(self.values[j]));
        scaled.matmul_adjoint(v)
    }
}

fn descending_modulus<T: Real>(a: &Complex<T>, b: &Complex<T>) -> Ordering {
    b.norm()
        .partial_cmp(&a.norm())
        .unwrap_or(Ordering::Equal)
        .then(b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal))
        .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
}

pub fn eig_general<T: Real>(m: &Matrix<T>) -> Result<GeneralEigen<T>> {
    eig_general_with(m, &EigConfig::default())
}

pub fn eig_general_with<T: Real>(m: &Matrix<T>, cfg: &EigConfig) -> Result<GeneralEigen<T>> {
    let (values, vectors) = schur_eigen(m, true, cfg)?;
    let vectors = vectors.expect("vectors requested");
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| descending_modulus(&values[a], &values[b]));
    let values: Vec<Complex<T>> = order.iter().map(|&k| values[k]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);

    #[cfg(debug_assertions)]
    {
        let scale = m.frobenius_norm();
        let tol = T::lit(1e-8).max(T::epsilon() * T::lit(1e4));
        for (j, &lambda) in values.iter().enumerate() {
            let v = vectors.column(j);
            let mv = m.matvec(&v);
            let res = mv
                .iter()
                .zip(&v)
                .fold(T::zero(), |acc, (&a, &b)| acc + (a - b * lambda).norm_sqr())
                .sqrt();
            debug_assert!(
                res <= tol * scale.max(T::min_positive_value()),
                "eigenpair {j} residual {res}"
            );
        }
    }
    Ok(GeneralEigen { values, vectors })
}

/// Eigenvalues only, same ordering as [`eig_general`].
pub fn eigvals_general<T: Real>(m: &Matrix<T>) -> Result<Vec<Complex<T>>> {
    let (mut values, _) = schur_eigen(m, false, &EigConfig::default())?;
    values.sort_by(descending_modulus);
    Ok(values)
}

/// Hessenberg reduction followed by single-shift complex QR iteration to
/// Schur form `m = Z T Z^dagger`; eigenvectors come from back substitution
/// on the triangular factor.
fn schur_eigen<T: Real>(m: &Matrix<T>, want_vectors: bool, cfg: &EigConfig) -> Result<(Vec<Complex<T>>, Option<Matrix<T>>)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidParams("matrix has non-finite entries".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(|| Matrix::zeros(0, 0))));
    }
    let mut h = m.clone();
    let mut z = Matrix::<T>::identity(n);
    hessenberg(&mut h, &mut z, want_vectors);

    let eps = T::epsilon();
    let budget = cfg.sweeps_per_dim * n;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;
    let hnorm = h.frobenius_norm();

    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let mut diag = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if diag == T::zero() {
                diag = hnorm;
            }
            if sub <= eps * diag {
                h[(l, l - 1)] = Complex::zero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > budget {
            return Err(Error::NonConvergence { dim: n, sweeps: budget });
        }

        let mu = if since_deflation % 11 == 10 {
            // exceptional shift breaks cycles
            h[(hi, hi)] + Complex::new(h[(hi, hi - 1)].norm() * T::lit(0.75), T::zero())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for k in l..hi {
            let (x, y) = if k == l {
                (h[(l, l)] - mu, h[(l + 1, l)])
            } else {
                (h[(k, k - 1)], h[(k + 1, k - 1)])
            };
            let (c, s) = givens(x, y);
            let first_col = if k == l { l } else { k - 1 };
            for j in first_col..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = b * c - s.conj() * a;
            }
            let last_row = (k + 2).min(hi);
            for i in 0..=last_row {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = b * c - a * s;
            }
            if want_vectors {
                for i in 0..n {
                    let a = z[(i, k)];
                    let b = z[(i, k + 1)];
                    z[(i, k)] = a * c + b * s.conj();
                    z[(i, k + 1)] = b * c - a * s;
                }
            }
            if k > l {
                h[(k + 1, k - 1)] = Complex::zero();
            }
        }
    }

    let values = h.diagonal();
    if !want_vectors {
        return Ok((values, None));
    }

    // eigenvectors of the triangular factor
    let tnorm = h.frobenius_norm();
    let smin = (eps * tnorm).max(T::min_positive_value());
    let mut y = Matrix::<T>::zeros(n, n);
    for k in 0..n {
        let lambda = h[(k, k)];
        y[(k, k)] = Complex::one();
        for i in (0..k).rev() {
            let mut acc = Complex::<T>::zero();
            for j in i + 1..=k {
                acc += h[(i, j)] * y[(j, k)];
            }
            let mut denom = h[(i, i)] - lambda;
            if denom.norm() < smin {
                denom = Complex::new(smin, T::zero());
            }
            y[(i, k)] = -acc / denom;
        }
    }
    let mut vectors = z.matmul(&y);
    for j in 0..n {
        let norm = (0..n).fold(T::zero(), |acc, i| acc + vectors[(i, j)].norm_sqr()).sqrt();
        if norm > T::zero() {
            for i in 0..n {
                vectors[(i, j)] = vectors[(i, j)] / norm;
            }
        }
    }
    Ok((values, Some(vectors)))
}

fn hessenberg<T: Real>(h: &mut Matrix<T>, z: &mut Matrix<T>, want_vectors: bool) {
    let n = h.rows();
    let two = T::lit(2.0);
    let mut v = vec![Complex::<T>::zero(); n];
    for k in 0..n.saturating_sub(2) {
        let norm_x = (k + 1..n).fold(T::zero(), |acc, i| acc + h[(i, k)].norm_sqr()).sqrt();
        if norm_x == T::zero() {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == T::zero() {
            Complex::one()
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm_x;
        for i in k + 1..n {
            v[i] = h[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm = (k + 1..n).fold(T::zero(), |acc, i| acc + v[i].norm_sqr()).sqrt();
        if vnorm == T::zero() {
            continue;
        }
        for vi in v.iter_mut().take(n).skip(k + 1) {
            *vi /= vnorm;
        }
        for j in k..n {
            let dot = (k + 1..n).fold(Complex::zero(), |acc, i| acc + v[i].conj() * h[(i, j)]);
            let s = dot * two;
            for i in k + 1..n {
                let vi = v[i];
                h[(i, j)] -= vi * s;
            }
        }
        for i in 0..n {
            let dot = (k + 1..n).fold(Complex::zero(), |acc, l| acc + h[(i, l)] * v[l]);
            let s = dot * two;
            for l in k + 1..n {
                let vl = v[l].conj();
                h[(i, l)] -= s * vl;
            }
        }
        if want_vectors {
            for i in 0..n {
                let dot = (k + 1..n).fold(Complex::zero(), |acc, l| acc + z[(i, l)] * v[l]);
                let s = dot * two;
                for l in k + 1..n {
                    let vl = v[l].conj();
                    z[(i, l)] -= s * vl;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex::zero();
        }
    }
}

/// Eigenvalue of `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let mean = (a + d) * half;
    let diff = (a - d) * half;
    let disc = (diff * diff + b * c).sqrt();
    let mu1 = mean + disc;
    let mu2 = mean - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` (real `c`) mapping `(x, y)` to `(r, 0)`.
fn givens<T: Real>(x: Complex<T>, y: Complex<T>) -> (T, Complex<T>) {
    let nx = x.norm();
    let ny = y.norm();
    if ny == T::zero() {
        return (T::one(), Complex::zero());
    }
    if nx == T::zero() {
        return (T::zero(), Complex::one());
    }
    let norm = nx.hypot(ny);
    let c = nx / norm;
    let s = (x / nx) * y.conj() / norm;
    (c, s)
}

pub fn eig_hermitian<T: Real>(m: &Matrix<T>) -> Result<HermitianEigen<T>> {
    eig_hermitian_with(m, &EigConfig::default())
}

/// Cyclic complex Jacobi: unitary plane rotations `J^dagger A J`, each
/// zeroing one off-diagonal pair, until the off-diagonal mass is at rounding
/// level.
pub fn eig_hermitian_with<T: Real>(m: &Matrix<T>, cfg: &EigConfig) -> Result<HermitianEigen<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidParams("matrix has non-finite entries".into()));
    }
    let defect = m.hermitian_defect();
    let allowed = T::lit(cfg.hermitian_tolerance) * m.max_abs().max(T::one());
    if defect > allowed {
        return Err(Error::NotHermitian {
            asymmetry: defect.as_f64(),
        });
    }
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut v = Matrix::<T>::identity(n);
    let eps = T::epsilon();
    let scale = a.frobenius_norm();
    let mut converged = n <= 1;

    for _sweep in 0..cfg.jacobi_sweeps {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= eps * T::lit(0.1) * scale || off == T::zero() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let abs = apq.norm();
                if abs == T::zero() {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (abs + abs);
                let t = if theta.abs() > T::lit(1e10) {
                    T::one() / (theta + theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let e = apq / abs;
                let se = e * s;
                let sec = e.conj() * s;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - sec * akq;
                    a[(k, q)] = se * akp + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - se * aqk;
                    a[(q, k)] = sec * apk + aqk * c;
                }
                a[(p, q)] = Complex::zero();
                a[(q, p)] = Complex::zero();
                a[(p, p)] = Complex::new(app - t * abs, T::zero());
                a[(q, q)] = Complex::new(aqq + t * abs, T::zero());
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - sec * vkq;
                    v[(k, q)] = se * vkp + vkq * c;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            dim: n,
            sweeps: cfg.jacobi_sweeps,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap_or(Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermitianEigen {
        values,
        vectors: UnitaryMatrix::new_unchecked(vectors),
    })
}

/// `m^{-1/2}` for Hermitian positive definite `m`.
pub fn inv_sqrt_psd<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    let eig = eig_hermitian(m)?;
    let min = eig.values.first().copied().unwrap_or(T::one());
    let max = eig.values.last().copied().unwrap_or(T::one());
    if max <= T::zero() || min <= T::lit(1e-12) * max {
        return Err(Error::Singular {
            min_eigenvalue: min.as_f64(),
        });
    }
    Ok(eig.reconstruct_with(|x| T::one() / x.sqrt()))
}
