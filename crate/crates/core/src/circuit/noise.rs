use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Matrix, Tolerances};
use crate::C64;

/// Measurement/reset time in microseconds when the noise file gives none.
pub const DEFAULT_MEASUREMENT_DURATION: f64 = 1.0;

fn default_measurement_duration() -> f64 {
    DEFAULT_MEASUREMENT_DURATION
}

/// Per-qubit calibration row. Missing fields fall back to the global values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitNoise {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    /// Probability of reading 1 when the qubit is in `|0>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_p10: Option<f64>,
    /// Probability of reading 0 when the qubit is in `|1>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_p01: Option<f64>,
}

/// Noise acting during one circuit application. Times are in microseconds.
///
/// `depolarizing` is the error weight `w` of `rho -> (1 - w) rho + w I/d`
/// on each gate's qubit pair; `w = 0` is noiseless and `w = 1` fully mixing.
/// Relaxation is skipped on qubits without a `t1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub depolarizing: f64,
    #[serde(default)]
    pub reset_error: f64,
    #[serde(default)]
    pub gate_duration: f64,
    #[serde(default = "default_measurement_duration")]
    pub measurement_duration: f64,
    /// Symmetric readout flip probability for qubits without their own row.
    #[serde(default)]
    pub readout_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    /// Rows indexed by register qubit: ancillas first, then system qubits.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub qubits: Vec<QubitNoise>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            depolarizing: 0.0,
            reset_error: 0.0,
            gate_duration: 0.0,
            measurement_duration: DEFAULT_MEASUREMENT_DURATION,
            readout_error: 0.0,
            t1: None,
            t2: None,
            qubits: Vec::new(),
        }
    }
}

/// Readout flip probabilities of one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReadoutError {
    pub p10: f64,
    pub p01: f64,
}

impl ReadoutError {
    pub fn symmetric(p: f64) -> Self {
        ReadoutError { p10: p, p01: p }
    }

    pub fn is_ideal(&self) -> bool {
        self.p10 == 0.0 && self.p01 == 0.0
    }
}

fn check_probability(p: f64, range: &'static str, hi: f64) -> Result<()> {
    if !(0.0..=hi).contains(&p) {
        return Err(Error::OutOfRange { value: p, range });
    }
    Ok(())
}

fn check_duration(t: f64, what: &str) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "{what} must be finite and non-negative, got {t}"
        )));
    }
    Ok(())
}

fn check_times(t1: f64, t2: f64) -> Result<()> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::InvalidParams(format!("T1 and T2 must be positive, got {t1}, {t2}")));
    }
    if t2 > 2.0 * t1 {
        return Err(Error::InvalidParams(format!("T2 = {t2} exceeds 2 T1 = {}", 2.0 * t1)));
    }
    Ok(())
}

impl NoiseModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: NoiseModel = serde_json::from_str(text)?;
        m.validate(0)?;
        Ok(m)
    }

    /// Checks ranges and the `T2 <= 2 T1` bound on the first `n_qubits`
    /// register qubits (and on every listed row).
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        check_probability(self.depolarizing, "[0, 1]", 1.0)?;
        check_probability(self.reset_error, "[0, 0.5]", 0.5)?;
        check_probability(self.readout_error, "[0, 1]", 1.0)?;
        check_duration(self.gate_duration, "gate_duration")?;
        check_duration(self.measurement_duration, "measurement_duration")?;
        for row in &self.qubits {
            for p in [row.readout_p10, row.readout_p01].into_iter().flatten() {
                check_probability(p, "[0, 1]", 1.0)?;
            }
        }
        for q in 0..n_qubits.max(self.qubits.len()) {
            self.relaxation_times(q)?;
        }
        Ok(())
    }

    /// `(T1, T2)` for a register qubit, `None` when it does not relax.
    /// A missing T2 means pure amplitude damping, `T2 = 2 T1`.
    pub fn relaxation_times(&self, qubit: usize) -> Result<Option<(f64, f64)>> {
        let row = self.qubits.get(qubit).copied().unwrap_or_default();
        let Some(t1) = row.t1.or(self.t1) else {
            if row.t2.or(self.t2).is_some() {
                return Err(Error::InvalidParams(format!("qubit {qubit} has T2 without T1")));
            }
            return Ok(None);
        };
        let t2 = row.t2.or(self.t2).unwrap_or(2.0 * t1);
        check_times(t1, t2)?;
        Ok(Some((t1, t2)))
    }

    pub fn readout(&self, qubit: usize) -> ReadoutError {
        let row = self.qubits.get(qubit).copied().unwrap_or_default();
        ReadoutError {
            p10: row.readout_p10.unwrap_or(self.readout_error),
            p01: row.readout_p01.unwrap_or(self.readout_error),
        }
    }

    /// Readout parameters of the system qubits, system qubit 0 first.
    pub fn system_readout(&self, n_ancilla: usize, n_system: usize) -> Vec<ReadoutError> {
        (0..n_system).map(|s| self.readout(n_ancilla + s)).collect()
    }
}

/// Reset state `(1 - p)|0><0| + p|1><1|` for reset error `p` in `[0, 0.5]`.
pub fn faulty_reset_state(p: f64) -> Result<DensityMatrix<f64>> {
    check_probability(p, "[0, 0.5]", 0.5)?;
    Ok(DensityMatrix::new_unchecked(reset_matrix(p)))
}

pub(crate) fn reset_matrix(p: f64) -> Matrix<f64> {
    Matrix::from_real_diag(&[1.0 - p, p])
}

fn register_qubits(dim: usize) -> Result<usize> {
    if !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("dimension {dim} is not a qubit register")));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn mask_of(qubits: &[usize], n: usize) -> Result<usize> {
    let mut mask = 0usize;
    for &q in qubits {
        if q >= n {
            return Err(Error::InvalidParams(format!("qubit {q} outside a {n}-qubit register")));
        }
        if mask & (1 << q) != 0 {
            return Err(Error::InvalidParams(format!("qubit {q} listed twice")));
        }
        mask |= 1 << q;
    }
    Ok(mask)
}

/// Depolarizes the listed qubits with error weight `w`: the marginal on the
/// other qubits is kept and the listed ones are mixed with weight `w`.
pub fn depolarize(rho: &DensityMatrix<f64>, w: f64, qubits: &[usize]) -> Result<DensityMatrix<f64>> {
    check_probability(w, "[0, 1]", 1.0)?;
    let n = register_qubits(rho.dim())?;
    let mask = mask_of(qubits, n)?;
    let mut m = rho.matrix().clone();
    depolarize_mask(&mut m, w, mask);
    DensityMatrix::new_trusted(m, &Tolerances::default())
}

/// Subsets of `mask`, including 0.
fn submasks(mask: usize) -> impl Iterator<Item = usize> {
    let mut next = Some(0usize);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask {
            None
        } else {
            Some(((cur | !mask).wrapping_add(1)) & mask)
        };
        Some(cur)
    })
}

/// `sum_q rho[(i & !mask) | q, (j & !mask) | q]`: the traced-out block.
fn traced(m: &Matrix<f64>, i: usize, j: usize, mask: usize) -> C64 {
    let (bi, bj) = (i & !mask, j & !mask);
    submasks(mask).map(|q| m[(bi | q, bj | q)]).sum()
}

pub(crate) fn depolarize_mask(m: &mut Matrix<f64>, w: f64, mask: usize) {
    if w == 0.0 || mask == 0 {
        return;
    }
    let d = m.rows();
    let dq = (1usize << mask.count_ones()) as f64;
    let src = m.clone();
    for i in 0..d {
        for j in 0..d {
            let mixed = if i & mask == j & mask {
                traced(&src, i, j, mask) / dq
            } else {
                C64::new(0.0, 0.0)
            };
            m[(i, j)] = src[(i, j)] * (1.0 - w) + mixed * w;
        }
    }
}

/// Traces out `qubit` and re-prepares it in the 2x2 state `fresh`.
pub(crate) fn reset_qubit(m: &mut Matrix<f64>, qubit: usize, fresh: &Matrix<f64>) {
    let d = m.rows();
    let b = 1usize << qubit;
    let src = m.clone();
    for i in 0..d {
        for j in 0..d {
            let s = fresh[(usize::from(i & b != 0), usize::from(j & b != 0))];
            m[(i, j)] = if s == C64::new(0.0, 0.0) {
                s
            } else {
                traced(&src, i, j, b) * s
            };
        }
    }
}

/// Amplitude and phase damping of one qubit for `duration`.
pub fn thermal_relax(rho: &DensityMatrix<f64>, t1: f64, t2: f64, duration: f64, qubit: usize) -> Result<DensityMatrix<f64>> {
    check_times(t1, t2)?;
    check_duration(duration, "duration")?;
    let n = register_qubits(rho.dim())?;
    mask_of(&[qubit], n)?;
    let mut m = rho.matrix().clone();
    relax_qubit(&mut m, t1, t2, duration, qubit);
    DensityMatrix::new_trusted(m, &Tolerances::default())
}

pub(crate) fn relax_qubit(m: &mut Matrix<f64>, t1: f64, t2: f64, duration: f64, qubit: usize) {
    if duration == 0.0 {
        return;
    }
    let gamma = -(-duration / t1).exp_m1();
    let coherence = (-duration / t2).exp();
    let b = 1usize << qubit;
    let d = m.rows();
    for i in (0..d).filter(|i| i & b == 0) {
        for j in (0..d).filter(|j| j & b == 0) {
            let excited = m[(i | b, j | b)];
            m[(i, j)] += excited * gamma;
            m[(i | b, j | b)] = excited * (1.0 - gamma);
            m[(i | b, j)] = m[(i | b, j)] * coherence;
            m[(i, j | b)] = m[(i, j | b)] * coherence;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, partial_trace};
    use crate::rng::RngStream;

    fn random_state(dim: usize, seed: u64) -> DensityMatrix<f64> {
        let g = crate::linalg::sample_ginibre::<f64>(dim, dim, &mut RngStream::new(seed, 0));
        let w = g.matmul_adjoint(&g);
        let t = w.trace().re;
        DensityMatrix::new(w.scale_real(1.0 / t)).unwrap()
    }

    #[test]
    fn reset_state_endpoints() {
        let zero = faulty_reset_state(0.0).unwrap();
        assert_eq!(zero, DensityMatrix::basis(2, 0));
        let half = faulty_reset_state(0.5).unwrap();
        assert_eq!(half, DensityMatrix::maximally_mixed(2));
        let q = faulty_reset_state(0.25).unwrap();
        assert_eq!(q.matrix().diagonal(), vec![C64::new(0.75, 0.0), C64::new(0.25, 0.0)]);
        assert!(matches!(faulty_reset_state(0.6), Err(Error::OutOfRange { .. })));
        assert!(faulty_reset_state(-0.1).is_err());
    }

    #[test]
    fn depolarize_endpoints() {
        let rho = random_state(8, 1);
        assert_eq!(depolarize(&rho, 0.0, &[0, 2]).unwrap(), rho);
        let full = depolarize(&rho, 1.0, &[0, 1, 2]).unwrap();
        assert!(full.matrix().max_abs_diff(DensityMatrix::maximally_mixed(8).matrix()) < 1e-15);
        assert!(depolarize(&rho, 1.5, &[0]).is_err());
        assert!(depolarize(&rho, 0.5, &[3]).is_err());
    }

    #[test]
    fn depolarize_keeps_the_other_marginal() {
        // Qubit 0 is least significant: kron(rest, q0).
        let rho = random_state(8, 2);
        let out = depolarize(&rho, 1.0, &[0]).unwrap();
        let rest = partial_trace(rho.matrix(), &[4, 2], &[0]).unwrap();
        let expected = kron(&rest, &Matrix::identity(2).scale_real(0.5));
        assert!(out.matrix().max_abs_diff(&expected) < 1e-15);
        let half = depolarize(&rho, 0.3, &[0]).unwrap();
        let mix = rho.matrix().scale_real(0.7);
        let expect = Matrix::from_fn(8, 8, |i, j| mix[(i, j)] + expected[(i, j)] * 0.3);
        assert!(half.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn depolarizing_a_pair_in_the_middle() {
        let rho = random_state(16, 3);
        let out = depolarize(&rho, 1.0, &[1, 2]).unwrap();
        // Marginal on qubits 0 and 3 survives; qubits 1, 2 become I/4.
        let tr_both = |m: &Matrix<f64>| partial_trace(m, &[2, 4, 2], &[0, 2]).unwrap();
        assert!(tr_both(out.matrix()).max_abs_diff(&tr_both(rho.matrix())) < 1e-15);
        let mid = partial_trace(out.matrix(), &[2, 4, 2], &[1]).unwrap();
        assert!(mid.max_abs_diff(&Matrix::identity(4).scale_real(0.25)) < 1e-15);
    }

    #[test]
    fn relaxation_matches_scalar_oracle() {
        let one = DensityMatrix::basis(2, 1);
        let out = thermal_relax(&one, 300.0, 200.0, 0.5, 0).unwrap();
        let expected = (-0.5f64 / 300.0).exp();
        assert!((out.matrix()[(1, 1)].re - expected).abs() < 1e-12);
        assert!((out.matrix()[(0, 0)].re - (1.0 - expected)).abs() < 1e-12);
    }

    #[test]
    fn relaxation_damps_coherence_at_t2() {
        let plus = DensityMatrix::pure(&[C64::new(0.5f64.sqrt(), 0.0), C64::new(0.5f64.sqrt(), 0.0)]).unwrap();
        let out = thermal_relax(&plus, 100.0, 50.0, 10.0, 0).unwrap();
        assert!((out.matrix()[(0, 1)].re - 0.5 * (-10.0f64 / 50.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn long_relaxation_reaches_ground_state() {
        let rho = random_state(4, 4);
        let out = thermal_relax(&rho, 50.0, 60.0, 5000.0, 1).unwrap();
        let marginal = partial_trace(out.matrix(), &[2, 2], &[0]).unwrap();
        assert!(marginal.max_abs_diff(DensityMatrix::basis(2, 0).matrix()) < 1e-6);
        assert_eq!(thermal_relax(&rho, 50.0, 60.0, 0.0, 1).unwrap(), rho);
    }

    #[test]
    fn relaxation_rejects_t2_above_twice_t1() {
        let rho = DensityMatrix::<f64>::basis(2, 0);
        assert!(matches!(
            thermal_relax(&rho, 10.0, 25.0, 1.0, 0),
            Err(Error::InvalidParams(_))
        ));
        let model = NoiseModel {
            t1: Some(10.0),
            t2: Some(25.0),
            ..NoiseModel::default()
        };
        assert!(model.validate(2).is_err());
    }

    #[test]
    fn reset_replaces_only_that_qubit() {
        let rho = random_state(8, 5);
        let mut m = rho.matrix().clone();
        reset_qubit(&mut m, 0, &reset_matrix(0.5));
        let rest = partial_trace(rho.matrix(), &[4, 2], &[0]).unwrap();
        assert!(m.max_abs_diff(&kron(&rest, &reset_matrix(0.5))) < 1e-15);
    }

    #[test]
    fn noise_file_round_trip_with_table_rows() {
        let text = r#"{
            "depolarizing": 0.01,
            "reset_error": 0.02,
            "gate_duration": 0.5,
            "readout_error": 0.01,
            "qubits": [
                {"t1": 300.0, "t2": 200.0, "readout_p10": 0.013, "readout_p01": 0.02},
                {"t1": 150.0}
            ]
        }"#;
        let m = NoiseModel::from_json(text).unwrap();
        assert_eq!(m.measurement_duration, DEFAULT_MEASUREMENT_DURATION);
        assert_eq!(m.relaxation_times(0).unwrap(), Some((300.0, 200.0)));
        assert_eq!(m.relaxation_times(1).unwrap(), Some((150.0, 300.0)));
        assert_eq!(m.relaxation_times(2).unwrap(), None);
        assert_eq!(m.readout(0), ReadoutError { p10: 0.013, p01: 0.02 });
        assert_eq!(m.system_readout(1, 2), vec![ReadoutError::symmetric(0.01); 2]);
        let back: NoiseModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(NoiseModel::from_json(r#"{"reset_error": 0.7}"#).is_err());
        assert!(NoiseModel::from_json(r#"{"typo": 1}"#).is_err());
    }

    #[test]
    fn submask_enumeration() {
        let mut v: Vec<usize> = submasks(0b1010).collect();
        v.sort_unstable();
        assert_eq!(v, vec![0, 2, 8, 10]);
        assert_eq!(submasks(0).collect::<Vec<_>>(), vec![0]);
    }
}
