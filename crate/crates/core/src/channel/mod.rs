//! CPTP channels in operator-sum form, their superoperator and Choi
//! representations, and the random constructions.
//!
//! Conventions:
//! - `vec` stacks columns, so `vec(K rho K^dagger) = (conj(K) (x) K) vec(rho)`.
//! - The Choi matrix is `sum_ij |i><j| (x) E(|i><j|)` (input factor first,
//!   unnormalized), so trace preservation is `Tr_out(C) = I`.

mod random;

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, kron, partial_trace, DensityMatrix, Matrix, Tolerances, UnitaryMatrix};
use crate::scalar::Real;

pub(crate) use random::stinespring_blocks;
pub use random::{random_choi, random_ginibre_kraus, random_stinespring, Construction};

/// Default bound on `||sum K^dagger K - I||_max`.
pub const TP_TOLERANCE: f64 = 1e-10;
/// Choi eigenvalues below this are treated as zero when extracting Kraus operators.
pub const KRAUS_CUTOFF: f64 = 1e-10;
/// Bound on `||Tr_out(C) - I||_max` accepted by [`from_choi`].
pub const CHOI_TP_TOLERANCE: f64 = 1e-8;
/// Most negative Choi eigenvalue accepted as completely positive.
pub const CHOI_PSD_TOLERANCE: f64 = 1e-9;

/// A trace-preserving channel given by its Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel<T> {
    dim: usize,
    kraus: Vec<Matrix<T>>,
}

impl<T: Real> KrausChannel<T> {
    pub fn new(kraus: Vec<Matrix<T>>) -> Result<Self> {
        Self::with_tolerance(kraus, TP_TOLERANCE)
    }

    pub fn with_tolerance(kraus: Vec<Matrix<T>>, tol: f64) -> Result<Self> {
        let ch = Self::new_unchecked(kraus)?;
        let dev = ch.tp_deviation();
        if !(dev <= T::lit(tol)) {
            return Err(Error::NotTracePreserving { deviation: dev.as_f64() });
        }
        Ok(ch)
    }

    /// Validates shapes and rank bounds but not trace preservation.
    pub(crate) fn new_unchecked(kraus: Vec<Matrix<T>>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidParams("a channel needs at least one Kraus operator".into()))?;
        let dim = first.rows();
        if dim == 0 {
            return Err(Error::DimensionMismatch("zero-dimensional Kraus operator".into()));
        }
        if let Some(bad) = kraus.iter().find(|k| k.rows() != dim || k.cols() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator is {}x{}, expected {dim}x{dim}",
                bad.rows(),
                bad.cols()
            )));
        }
        if kraus.len() > dim * dim {
            return Err(Error::InvalidParams(format!(
                "rank {} exceeds the maximum {} for dimension {dim}",
                kraus.len(),
                dim * dim
            )));
        }
        Ok(KrausChannel { dim, kraus })
    }

    pub fn identity(dim: usize) -> Self {
        KrausChannel {
            dim,
            kraus: vec![Matrix::identity(dim)],
        }
    }

    pub fn unitary(u: &UnitaryMatrix<T>) -> Self {
        KrausChannel {
            dim: u.dim(),
            kraus: vec![u.matrix().clone()],
        }
    }

    /// `E(rho) = I/N` for every input, via the `N^2` operators `|a><b| / sqrt(N)`.
    pub fn completely_depolarizing(dim: usize) -> Self {
        let s = T::one() / T::lit(dim as f64).sqrt();
        let kraus = (0..dim * dim)
            .map(|k| {
                let mut m = Matrix::zeros(dim, dim);
                m[(k / dim, k % dim)] = Complex::new(s, T::zero());
                m
            })
            .collect();
        KrausChannel { dim, kraus }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.kraus.len()
    }

    pub fn kraus_ops(&self) -> &[Matrix<T>] {
        &self.kraus
    }

    /// `||sum K^dagger K - I||_max`.
    pub fn tp_deviation(&self) -> T {
        self.kraus_sum().max_abs_diff(&Matrix::identity(self.dim))
    }

    fn kraus_sum(&self) -> Matrix<T> {
        let mut acc = Matrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            acc = &acc + &k.adjoint_matmul(k);
        }
        acc
    }

    /// `sum K rho K^dagger` on a raw matrix, no validation.
    pub fn apply_matrix(&self, rho: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out = &out + &k.matmul(rho).matmul_adjoint(k);
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        self.check_dim(rho)?;
        let out = self.apply_matrix(rho.matrix()).hermitian_part();
        Ok(DensityMatrix::new_unchecked(out))
    }

    /// `E^t(rho)`; `t = 0` returns the input.
    pub fn iterate(&self, rho: &DensityMatrix<T>, t: usize) -> Result<DensityMatrix<T>> {
        self.check_dim(rho)?;
        let mut m = rho.matrix().clone();
        for _ in 0..t {
            m = self.apply_matrix(&m).hermitian_part();
        }
        Ok(DensityMatrix::new_unchecked(m))
    }

    fn check_dim(&self, rho: &DensityMatrix<T>) -> Result<()> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "channel acts on dimension {}, state has dimension {}",
                self.dim,
                rho.dim()
            )));
        }
        Ok(())
    }

    /// `E2 after self`, i.e. `rho -> other(self(rho))`.
    pub fn then(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch("composed channels differ in dimension".into()));
        }
        let mut kraus = Vec::with_capacity(self.rank() * other.rank());
        for b in &other.kraus {
            for a in &self.kraus {
                kraus.push(b.matmul(a));
            }
        }
        if kraus.len() > self.dim * self.dim {
            // Compress through the Choi matrix to stay within the rank bound.
            let composed = KrausChannel { dim: self.dim, kraus };
            return from_choi(&composed.to_choi());
        }
        Ok(KrausChannel { dim: self.dim, kraus })
    }

    pub fn to_superoperator(&self) -> Superoperator<T> {
        let n2 = self.dim * self.dim;
        let mut s = Matrix::zeros(n2, n2);
        for k in &self.kraus {
            s = &s + &kron(&k.conj(), k);
        }
        Superoperator { matrix: s }
    }

    pub fn to_choi(&self) -> ChoiMatrix<T> {
        let n = self.dim;
        let mut c = Matrix::zeros(n * n, n * n);
        for k in &self.kraus {
            // |v> = sum_i |i> (x) K|i>, so v[i*n + o] = K[o, i].
            let v: Vec<Complex<T>> = (0..n * n).map(|idx| k[(idx % n, idx / n)]).collect();
            for (a, va) in v.iter().enumerate() {
                if va.is_zero() {
                    continue;
                }
                for (b, vb) in v.iter().enumerate() {
                    c[(a, b)] += va * vb.conj();
                }
            }
        }
        ChoiMatrix { dim: n, matrix: c }
    }
}

/// Extracts Kraus operators from a Choi matrix by Hermitian eigendecomposition.
pub fn from_choi<T: Real>(c: &ChoiMatrix<T>) -> Result<KrausChannel<T>> {
    let n = c.dim;
    let dev = c.tp_deviation()?;
    if dev > CHOI_TP_TOLERANCE {
        return Err(Error::NotTracePreserving { deviation: dev });
    }
    let eig = eig_hermitian(&c.matrix.hermitian_part())?;
    let min = eig.values.first().copied().unwrap_or(T::zero());
    if min < -T::lit(CHOI_PSD_TOLERANCE) {
        return Err(Error::NotCompletelyPositive {
            min_eigenvalue: min.as_f64(),
        });
    }
    let vecs = eig.vectors.matrix();
    let mut kraus = Vec::new();
    for (a, &lambda) in eig.values.iter().enumerate().rev() {
        if lambda <= T::lit(KRAUS_CUTOFF) {
            continue;
        }
        let s = lambda.sqrt();
        kraus.push(Matrix::from_fn(n, n, |o, i| vecs[(i * n + o, a)] * s));
    }
    KrausChannel::with_tolerance(kraus, CHOI_TP_TOLERANCE)
}

/// Matrix of a channel acting on column-stacked density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator<T> {
    matrix: Matrix<T>,
}

impl<T: Real> Superoperator<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        let n2 = matrix.rows();
        let n = (n2 as f64).sqrt().round() as usize;
        if !matrix.is_square() || n * n != n2 {
            return Err(Error::DimensionMismatch(format!(
                "superoperator must be N^2 x N^2, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Superoperator { matrix })
    }

    /// Hilbert dimension `N` (the matrix is `N^2 x N^2`).
    pub fn hilbert_dim(&self) -> usize {
        (self.matrix.rows() as f64).sqrt().round() as usize
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }

    pub fn apply_matrix(&self, rho: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.hilbert_dim();
        if rho.rows() != n || rho.cols() != n {
            return Err(Error::DimensionMismatch(format!("expected a {n}x{n} input")));
        }
        Matrix::unvectorize(&self.matrix.matvec(&rho.vectorize()), n, n)
    }

    /// Superoperator of `rho -> other(self(rho))`.
    pub fn then(&self, other: &Self) -> Result<Self> {
        if other.matrix.rows() != self.matrix.rows() {
            return Err(Error::DimensionMismatch("composed superoperators differ in size".into()));
        }
        Ok(Superoperator {
            matrix: other.matrix.matmul(&self.matrix),
        })
    }
}

/// Unnormalized Choi matrix `sum_ij |i><j| (x) E(|i><j|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix<T> {
    dim: usize,
    matrix: Matrix<T>,
}

impl<T: Real> ChoiMatrix<T> {
    /// Wraps a matrix after checking Hermiticity; CP and TP are checked by [`from_choi`].
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        let n2 = matrix.rows();
        let n = (n2 as f64).sqrt().round() as usize;
        if !matrix.is_square() || n * n != n2 {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix must be N^2 x N^2, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let herm = matrix.hermitian_defect();
        let scale = T::one().max(matrix.max_abs());
        if herm > T::lit(Tolerances::default().hermitian) * scale {
            return Err(Error::NotHermitian {
                asymmetry: herm.as_f64(),
            });
        }
        Ok(ChoiMatrix { dim: n, matrix })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    /// `Tr_out(C)`, which equals the identity for trace-preserving maps.
    pub fn output_trace(&self) -> Result<Matrix<T>> {
        partial_trace(&self.matrix, &[self.dim, self.dim], &[0])
    }

    pub fn tp_deviation(&self) -> Result<f64> {
        Ok(self.output_trace()?.max_abs_diff(&Matrix::identity(self.dim)).as_f64())
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        let eig = eig_hermitian(&self.matrix.hermitian_part())?;
        Ok(eig.values.first().copied().unwrap_or(T::zero()))
    }

    /// Number of eigenvalues above [`KRAUS_CUTOFF`].
    pub fn rank(&self) -> Result<usize> {
        let eig = eig_hermitian(&self.matrix.hermitian_part())?;
        Ok(eig.values.iter().filter(|&&v| v > T::lit(KRAUS_CUTOFF)).count())
    }
}

/// Serialized form: Kraus operators as row-major interleaved `re, im` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub dim: usize,
    pub rank: usize,
    pub kraus: Vec<Vec<f64>>,
}

impl<T: Real> From<&KrausChannel<T>> for ChannelRecord {
    fn from(ch: &KrausChannel<T>) -> Self {
        ChannelRecord {
            dim: ch.dim,
            rank: ch.rank(),
            kraus: ch.kraus.iter().map(|k| k.to_interleaved()).collect(),
        }
    }
}

impl ChannelRecord {
    pub fn to_channel<T: Real>(&self) -> Result<KrausChannel<T>> {
        if self.kraus.len() != self.rank {
            return Err(Error::DimensionMismatch(format!(
                "record declares rank {} but holds {} operators",
                self.rank,
                self.kraus.len()
            )));
        }
        let kraus = self
            .kraus
            .iter()
            .map(|v| Matrix::from_interleaved(self.dim, self.dim, v))
            .collect::<Result<Vec<Matrix<T>>>>()?;
        let ch = KrausChannel::new_unchecked(kraus)?;
        if ch.dim != self.dim {
            return Err(Error::DimensionMismatch("record dimension disagrees with operators".into()));
        }
        let dev = ch.tp_deviation();
        // Decimal round trips lose a few ulps; allow slack above the construction tolerance.
        if !(dev <= T::lit(1e-9)) {
            return Err(Error::NotTracePreserving { deviation: dev.as_f64() });
        }
        Ok(ch)
    }
}
