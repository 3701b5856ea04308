//! Superoperator spectra, steady states and convergence estimates.

use std::io::Write;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{eig_general, eig_hermitian, eigvals_general, DensityMatrix, Matrix, Tolerances, UnitaryMatrix};
use crate::scalar::Real;

/// Largest accepted `|lambda - 1|` for the fixed-point eigenvalue.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-7;
/// Eigenvalues with modulus at least `1 - PERIPHERAL_WINDOW` count as peripheral.
pub const PERIPHERAL_WINDOW: f64 = 1e-6;

/// Eigenvalues of a channel's superoperator and derived scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpectrum<T> {
    /// Sorted by descending modulus.
    pub eigenvalues: Vec<Complex<T>>,
    /// Index into `eigenvalues` of the eigenvalue nearest 1.
    pub leading_index: usize,
    pub leading: Complex<T>,
    /// `1 - |lambda_2|`, clamped to `[0, 1]`.
    pub gap: T,
    /// `1 / sqrt(rank)`.
    pub girko_radius: T,
    pub rank: usize,
}

impl<T: Real> ChannelSpectrum<T> {
    fn from_eigenvalues(eigenvalues: Vec<Complex<T>>, rank: usize) -> Result<Self> {
        let one = Complex::new(T::one(), T::zero());
        let (leading_index, distance) = eigenvalues
            .iter()
            .enumerate()
            .map(|(i, v)| (i, (v - one).norm()))
            .fold((0, T::infinity()), |best, cur| if cur.1 < best.1 { cur } else { best });
        if !(distance <= T::lit(FIXED_POINT_TOLERANCE)) {
            return Err(Error::NoFixedPoint {
                distance: distance.as_f64(),
                tolerance: FIXED_POINT_TOLERANCE,
            });
        }
        let second = eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != leading_index)
            .map(|(_, v)| v.norm())
            .fold(T::zero(), T::max);
        let gap = (T::one() - second).max(T::zero()).min(T::one());
        Ok(ChannelSpectrum {
            leading: eigenvalues[leading_index],
            leading_index,
            gap,
            girko_radius: T::one() / T::lit(rank as f64).sqrt(),
            rank,
            eigenvalues,
        })
    }

    /// All eigenvalues except the leading one.
    pub fn subleading(&self) -> impl Iterator<Item = &Complex<T>> {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(move |&(i, _)| i != self.leading_index)
            .map(|(_, v)| v)
    }

    /// `|lambda_2|`.
    pub fn second_modulus(&self) -> T {
        T::one() - self.gap
    }
}

/// `rho_ss = sum_i lambda_i |psi_i><psi_i|` with `lambda_i` descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateDecomposition<T> {
    pub state: DensityMatrix<T>,
    pub eigenvalues: Vec<T>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: UnitaryMatrix<T>,
}

/// Spectrum and steady state from a single eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAnalysis<T> {
    pub spectrum: ChannelSpectrum<T>,
    pub steady: SteadyStateDecomposition<T>,
}

pub fn analyze_spectrum<T: Real>(ch: &KrausChannel<T>) -> Result<ChannelSpectrum<T>> {
    let vals = eigvals_general(ch.to_superoperator().matrix())?;
    ChannelSpectrum::from_eigenvalues(vals, ch.rank())
}

pub fn steady_state<T: Real>(ch: &KrausChannel<T>) -> Result<SteadyStateDecomposition<T>> {
    Ok(analyze_channel(ch)?.steady)
}

pub fn analyze_channel<T: Real>(ch: &KrausChannel<T>) -> Result<ChannelAnalysis<T>> {
    let eig = eig_general(ch.to_superoperator().matrix())?;
    let peripheral = eig
        .values
        .iter()
        .filter(|v| v.norm() >= T::one() - T::lit(PERIPHERAL_WINDOW))
        .count();
    if peripheral >= 2 {
        return Err(Error::DegenerateFixedSpace { count: peripheral });
    }
    let spectrum = ChannelSpectrum::from_eigenvalues(eig.values, ch.rank())?;
    let n = ch.dim();
    let x = Matrix::unvectorize(&eig.vectors.column(spectrum.leading_index), n, n)?;
    let steady = decompose_fixed_point(x)?;
    Ok(ChannelAnalysis { spectrum, steady })
}

/// Turns the raw fixed-point eigenvector (arbitrary complex phase and scale)
/// into a density matrix and its eigendecomposition.
fn decompose_fixed_point<T: Real>(x: Matrix<T>) -> Result<SteadyStateDecomposition<T>> {
    let tr = x.trace();
    if !(tr.norm() > T::lit(1e-12) * x.max_abs()) {
        return Err(Error::InvalidState("fixed-point eigenvector is traceless".into()));
    }
    // Rotate the global phase so the trace is real and positive; the
    // eigenvector is then Hermitian up to solver error.
    let x = x.scale(tr.conj() / tr.norm());
    debug_assert!(
        x.hermitian_defect() <= T::lit(1e-6) * x.max_abs(),
        "fixed-point eigenvector far from Hermitian: {:e}",
        x.hermitian_defect()
    );
    let h = x.hermitian_part();
    let rho = h.scale_real(T::one() / h.trace().re);
    let eig = eig_hermitian(&rho)?;
    let n = rho.rows();
    let mut values: Vec<T> = eig.values.iter().rev().copied().collect();
    if let Some(&min) = values.last() {
        if min < -T::lit(Tolerances::default().psd) {
            return Err(Error::InvalidState(format!("steady state has eigenvalue {min:e}")));
        }
    }
    for v in &mut values {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    let src = eig.vectors.matrix();
    let vectors = Matrix::from_fn(n, n, |i, j| src[(i, n - 1 - j)]);
    let state = DensityMatrix::new_trusted(rho, &Tolerances::default())?;
    Ok(SteadyStateDecomposition {
        state,
        eigenvalues: values,
        eigenvectors: UnitaryMatrix::new_unchecked(vectors),
    })
}

/// `ceil(ln eps / ln(1/sqrt(rank)))`: iterations for the subleading modes to
/// shrink by `eps` at the Girko-disk rate.
pub fn convergence_iterations(rank: usize, epsilon: f64) -> Result<usize> {
    if rank == 0 {
        return Err(Error::InvalidParams("rank must be positive".into()));
    }
    if rank == 1 {
        return Err(Error::RankOne);
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::OutOfRange {
            value: epsilon,
            range: "(0, 1)",
        });
    }
    let t = epsilon.ln() / (1.0 / (rank as f64).sqrt()).ln();
    // Exact ratios like ln(1/4)/ln(1/2) must not round up past the integer.
    Ok(((t - 1e-9).ceil() as usize).max(1))
}

/// Fraction of subleading eigenvalues with modulus at most `girko_radius + slack`,
/// pooled over all spectra.
pub fn girko_fraction<T: Real>(spectra: &[ChannelSpectrum<T>], slack: f64) -> Result<f64> {
    if spectra.is_empty() {
        return Err(Error::InvalidParams("girko_fraction needs at least one spectrum".into()));
    }
    let (mut inside, mut total) = (0usize, 0usize);
    for s in spectra {
        let bound = s.girko_radius.as_f64() + slack;
        for v in s.subleading() {
            total += 1;
            // Absorbs rounding on eigenvalues sitting exactly on the disk edge.
            if v.norm().as_f64() <= bound + 1e-10 {
                inside += 1;
            }
        }
    }
    Ok(if total == 0 { 1.0 } else { inside as f64 / total as f64 })
}

/// Mean of `max(0, |lambda| - girko_radius)` over subleading eigenvalues.
pub fn mean_disk_violation<T: Real>(spectra: &[ChannelSpectrum<T>]) -> Result<f64> {
    if spectra.is_empty() {
        return Err(Error::InvalidParams("mean_disk_violation needs at least one spectrum".into()));
    }
    let (mut acc, mut total) = (0.0, 0usize);
    for s in spectra {
        let r = s.girko_radius.as_f64();
        for v in s.subleading() {
            acc += (v.norm().as_f64() - r).max(0.0);
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { acc / total as f64 })
}

/// Writes `channel,re,im` rows, one per eigenvalue.
pub fn write_spectrum_csv<T: Real, W: Write>(out: W, spectra: &[ChannelSpectrum<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, s) in spectra.iter().enumerate() {
        for v in &s.eigenvalues {
            w.serialize(SpectrumRow {
                channel: i,
                re: v.re.as_f64(),
                im: v.im.as_f64(),
            })
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Serialize, Deserialize)]
struct SpectrumRow {
    channel: usize,
    re: f64,
    im: f64,
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}
