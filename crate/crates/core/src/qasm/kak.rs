//! Two-qubit KAK decomposition into three CX gates and single-qubit `U`
//! rotations.
//!
//! Local index convention: `2 * bit(q0) + bit(q1)`, so `q0` is the high
//! (left) tensor factor.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use crate::error::{Error, Result};
use crate::linalg::{determinant, kron, Matrix};
use crate::C64;

/// Reconstruction bound (max entrywise, up to global phase).
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-8;

/// One emitted gate on the local pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalOp {
    /// OpenQASM `U(theta, phi, lambda)` on local qubit 0 or 1.
    U {
        qubit: usize,
        theta: f64,
        phi: f64,
        lambda: f64,
    },
    Cx {
        control: usize,
        target: usize,
    },
}

impl LocalOp {
    pub fn matrix(&self) -> Matrix<f64> {
        match *self {
            LocalOp::U {
                qubit,
                theta,
                phi,
                lambda,
            } => {
                let u = u_matrix(theta, phi, lambda);
                if qubit == 0 {
                    kron(&u, &Matrix::identity(2))
                } else {
                    kron(&Matrix::identity(2), &u)
                }
            }
            LocalOp::Cx { control, target } => Matrix::from_fn(4, 4, |i, j| {
                let bit = |x: usize, q: usize| (x >> (1 - q)) & 1;
                let flipped = if bit(j, control) == 1 { j ^ (1 << (1 - target)) } else { j };
                if i == flipped {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        }
    }
}

/// `U(theta, phi, lambda)` in the OpenQASM 3 convention.
pub fn u_matrix(theta: f64, phi: f64, lambda: f64) -> Matrix<f64> {
    let (s, c) = (theta / 2.0).sin_cos();
    let e = |a: f64| C64::from_polar(1.0, a);
    Matrix::from_vec(2, 2, vec![C64::new(c, 0.0), -e(lambda) * s, e(phi) * s, e(phi + lambda) * c]).expect("2x2")
}

/// `(theta, phi, lambda)` with `v = e^{i gamma} U(theta, phi, lambda)`.
pub fn zyz_angles(v: &Matrix<f64>) -> (f64, f64, f64) {
    const EPS: f64 = 1e-12;
    let (v00, v01, v10, v11) = (v[(0, 0)], v[(0, 1)], v[(1, 0)], v[(1, 1)]);
    let theta = 2.0 * v10.norm().atan2(v00.norm());
    let gamma = if v00.norm() > EPS { v00.arg() } else { (-v01).arg() };
    let phi = if v10.norm() > EPS { v10.arg() - gamma } else { 0.0 };
    let lambda = if v01.norm() > EPS {
        (-v01).arg() - gamma
    } else {
        v11.arg() - gamma - phi
    };
    (theta, wrap(phi), wrap(lambda))
}

fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(t) - std::f64::consts::PI;
    if r.abs() < 1e-15 {
        0.0
    } else {
        r
    }
}

fn rz(t: f64) -> Matrix<f64> {
    Matrix::from_diag(&[C64::from_polar(1.0, -t / 2.0), C64::from_polar(1.0, t / 2.0)])
}

fn ry(t: f64) -> Matrix<f64> {
    let (s, c) = (t / 2.0).sin_cos();
    Matrix::from_fn(2, 2, |i, j| {
        C64::new(
            match (i, j) {
                (0, 0) | (1, 1) => c,
                (0, 1) => -s,
                _ => s,
            },
            0.0,
        )
    })
}

/// Columns are the magic (Bell-like) basis in which local `SU(2) x SU(2)`
/// becomes real `SO(4)`.
fn magic() -> Matrix<f64> {
    let h = FRAC_1_SQRT_2;
    let (r, i, z) = (C64::new(h, 0.0), C64::new(0.0, h), C64::new(0.0, 0.0));
    Matrix::from_vec(4, 4, vec![r, i, z, z, z, z, i, r, z, z, i, -r, r, -i, z, z]).expect("4x4")
}

fn pauli_pair(p: char) -> Matrix<f64> {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    let single = match p {
        'x' => Matrix::from_vec(2, 2, vec![z, o, o, z]),
        'y' => Matrix::from_vec(2, 2, vec![z, -i, i, z]),
        _ => Matrix::from_vec(2, 2, vec![o, z, z, -o]),
    }
    .expect("2x2");
    kron(&single, &single)
}

/// Cyclic Jacobi eigen-decomposition of a small real symmetric matrix;
/// returns eigenvectors as columns of a real orthogonal matrix.
fn jacobi_symmetric(a: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut a = *a;
    let mut v = [[0.0; 4]; 4];
    for (k, row) in v.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..3 {
            for q in p + 1..4 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    v
}

fn real_to_matrix(o: &[[f64; 4]; 4]) -> Matrix<f64> {
    Matrix::from_fn(4, 4, |i, j| C64::new(o[i][j], 0.0))
}

/// Real orthogonal `P` (det +1) with `P^T m P` diagonal, for a symmetric
/// unitary `m`.
fn diagonalize_symmetric_unitary(m: &Matrix<f64>) -> Result<Matrix<f64>> {
    // Re m and Im m commute; a generic combination shares their eigenvectors.
    for &mix in &[
        0.618_033_988_749_895,
        1.414_213_562_373_095,
        -0.377_964_473_009_227,
        2.718_281_828_459_045,
    ] {
        let mut h = [[0.0; 4]; 4];
        for (i, row) in h.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                let z = (m[(i, j)] + m[(j, i)]) * 0.5;
                *x = z.re + mix * z.im;
            }
        }
        let mut p = jacobi_symmetric(&h);
        let pm = real_to_matrix(&p);
        if determinant(&pm)?.re < 0.0 {
            for row in p.iter_mut() {
                row[0] = -row[0];
            }
        }
        let pm = real_to_matrix(&p);
        let d = pm.transpose().matmul(m).matmul(&pm);
        let off = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| d[(i, j)].norm())
            .fold(0.0, f64::max);
        if off < 1e-11 {
            return Ok(pm);
        }
    }
    Err(Error::DecompositionFailure { error: f64::NAN })
}

/// Splits `k = a (x) b` into its factors.
fn tensor_factors(k: &Matrix<f64>) -> (Matrix<f64>, Matrix<f64>) {
    let (mut bi, mut bj) = (0, 0);
    for i in 0..4 {
        for j in 0..4 {
            if k[(i, j)].norm() > k[(bi, bj)].norm() {
                bi = i;
                bj = j;
            }
        }
    }
    let (b0, d0) = (bi % 2, bj % 2);
    let mut a = Matrix::from_fn(2, 2, |x, y| k[(2 * x + b0, 2 * y + d0)]);
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    a = a.scale(C64::new(1.0, 0.0) / det.sqrt());
    let (a0, c0) = (bi / 2, bj / 2);
    let pivot = a[(a0, c0)];
    let b = Matrix::from_fn(2, 2, |x, y| k[(2 * a0 + x, 2 * c0 + y)] / pivot);
    (a, b)
}

/// Max entrywise distance between `a` and `b` after removing the best
/// global phase.
pub fn phase_distance(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    let overlap: C64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| y.conj() * x).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    a.max_abs_diff(&b.scale(phase))
}

/// Decomposes a 4x4 unitary into at most ten `U` gates and three CX gates.
pub fn decompose_two_qubit(u: &Matrix<f64>) -> Result<Vec<LocalOp>> {
    if u.rows() != 4 || u.cols() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "expected a 4x4 gate, got {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    let det = determinant(u)?;
    let su = u.scale(C64::from_polar(1.0, -det.arg() / 4.0));
    let mag = magic();
    let up = mag.adjoint().matmul(&su).matmul(&mag);
    let m = up.transpose().matmul(&up);
    let p = diagonalize_symmetric_unitary(&m)?;
    let d = p.transpose().matmul(&m).matmul(&p);
    let mut theta: Vec<f64> = (0..4).map(|k| d[(k, k)].arg() / 2.0).collect();
    let sum: f64 = theta.iter().sum();
    // det(Delta) must be +1, so the half-angles sum to a multiple of 2 pi.
    if (sum / std::f64::consts::PI).round().rem_euclid(2.0) == 1.0 {
        theta[0] += std::f64::consts::PI;
    }
    let delta_inv = Matrix::from_diag(&theta.iter().map(|&t| C64::from_polar(1.0, -t)).collect::<Vec<_>>());
    let o1 = up.matmul(&p).matmul(&delta_inv);
    let k1 = mag.matmul(&o1).matmul(&mag.adjoint());
    let k2 = mag.matmul(&p.transpose()).matmul(&mag.adjoint());
    let (a1, b1) = tensor_factors(&k1);
    let (a2, b2) = tensor_factors(&k2);

    // Solve theta_k = phase + a sx_k + b sy_k + c sz_k; the sign vectors
    // are orthogonal, so projection inverts the system.
    let signs: Vec<Vec<f64>> = ['x', 'y', 'z']
        .iter()
        .map(|&p| {
            let diag = mag.adjoint().matmul(&pauli_pair(p)).matmul(&mag);
            (0..4).map(|k| diag[(k, k)].re).collect()
        })
        .collect();
    let coef = |s: &[f64]| theta.iter().zip(s).map(|(t, s)| t * s).sum::<f64>() / 4.0;
    let (a, b, c) = (coef(&signs[0]), coef(&signs[1]), coef(&signs[2]));

    let single = |qubit: usize, v: &Matrix<f64>| {
        let (theta, phi, lambda) = zyz_angles(v);
        LocalOp::U {
            qubit,
            theta,
            phi,
            lambda,
        }
    };
    let ops = vec![
        single(0, &a2),
        single(1, &rz(FRAC_PI_2).matmul(&b2)),
        LocalOp::Cx { control: 1, target: 0 },
        single(0, &rz(FRAC_PI_2 - 2.0 * c)),
        single(1, &ry(FRAC_PI_2 - 2.0 * a)),
        LocalOp::Cx { control: 0, target: 1 },
        single(1, &ry(2.0 * b - FRAC_PI_2)),
        LocalOp::Cx { control: 1, target: 0 },
        single(0, &a1.matmul(&rz(-FRAC_PI_2))),
        single(1, &b1),
    ];
    let error = phase_distance(&recompose(&ops), u);
    if !(error <= DECOMPOSITION_TOLERANCE) {
        return Err(Error::DecompositionFailure { error });
    }
    Ok(ops)
}

/// Product of the ops in time order.
pub fn recompose(ops: &[LocalOp]) -> Matrix<f64> {
    ops.iter().fold(Matrix::identity(4), |acc, op| op.matrix().matmul(&acc))
}
