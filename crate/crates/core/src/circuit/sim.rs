use serde::{Deserialize, Serialize};

use super::noise::{depolarize_mask, relax_qubit, reset_matrix, reset_qubit, NoiseModel, ReadoutError};
use super::shots::{sample_shots, Histogram};
use super::{AncillaStrategy, CircuitIR, TerminalOp};
use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, kron, partial_trace, DensityMatrix, Matrix, Tolerances};
use crate::rng::{lane, RngStream};
use crate::C64;

/// How a measure/reset instruction treats the measured ancilla.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementMode {
    /// Average over outcomes: trace the ancilla out.
    #[default]
    Deterministic,
    /// Sample an outcome, project and renormalize, then reset.
    Trajectory,
}

const STEP_TOLERANCES: Tolerances = Tolerances {
    hermitian: 1e-9,
    trace: 1e-9,
    psd: 1e-9,
    unitary: 1e-10,
};

/// Local row index of the 4 states of a gate pair: `2 * bit(a) + bit(b)`.
fn pair_rows(base: usize, a: usize, b: usize) -> [usize; 4] {
    [base, base | 1 << b, base | 1 << a, base | 1 << a | 1 << b]
}

/// `m <- (G on pair) m`.
pub(crate) fn apply_gate_left(m: &mut Matrix<f64>, g: &Matrix<f64>, [a, b]: [usize; 2]) {
    let mask = 1 << a | 1 << b;
    for base in (0..m.rows()).filter(|r| r & mask == 0) {
        let rows = pair_rows(base, a, b);
        for col in 0..m.cols() {
            let v = rows.map(|r| m[(r, col)]);
            for (l, &r) in rows.iter().enumerate() {
                m[(r, col)] = (0..4).map(|k| g[(l, k)] * v[k]).sum();
            }
        }
    }
}

/// `m <- m (G on pair)^dagger`.
fn apply_gate_right_adjoint(m: &mut Matrix<f64>, g: &Matrix<f64>, [a, b]: [usize; 2]) {
    let mask = 1 << a | 1 << b;
    for base in (0..m.cols()).filter(|c| c & mask == 0) {
        let cols = pair_rows(base, a, b);
        for row in 0..m.rows() {
            let v = cols.map(|c| m[(row, c)]);
            for (l, &c) in cols.iter().enumerate() {
                m[(row, c)] = (0..4).map(|k| v[k] * g[(l, k)].conj()).sum();
            }
        }
    }
}

/// Initial ancilla block: `|0><0|` for fresh ancillas or without noise, the
/// faulty reset state otherwise.
pub(crate) fn ancilla_input(c: &CircuitIR, noise: Option<&NoiseModel>) -> Result<Matrix<f64>> {
    let fresh = reset_state(c, noise)?;
    Ok((1..c.n_ancilla()).fold(fresh.clone(), |acc, _| kron(&fresh, &acc)))
}

fn reset_state(c: &CircuitIR, noise: Option<&NoiseModel>) -> Result<Matrix<f64>> {
    let p = match (c.ancilla_strategy(), noise) {
        (AncillaStrategy::Reuse, Some(n)) => n.reset_error,
        _ => 0.0,
    };
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::OutOfRange {
            value: p,
            range: "[0, 0.5]",
        });
    }
    Ok(reset_matrix(p))
}

pub(crate) fn trace_out_ancillas(m: &Matrix<f64>, c: &CircuitIR) -> Matrix<f64> {
    partial_trace(m, &[c.system_dim(), c.ancilla_dim()], &[0]).expect("register dims")
}

fn relax_all(m: &mut Matrix<f64>, noise: &NoiseModel, n_qubits: usize, duration: f64) -> Result<()> {
    if duration == 0.0 {
        return Ok(());
    }
    for q in 0..n_qubits {
        if let Some((t1, t2)) = noise.relaxation_times(q)? {
            relax_qubit(m, t1, t2, duration, q);
        }
    }
    Ok(())
}

fn check_cheap(m: &Matrix<f64>, what: &str) -> Result<()> {
    let asym = m.hermitian_defect();
    let tr = m.trace();
    if !m.is_finite() || asym > STEP_TOLERANCES.hermitian || (tr - C64::new(1.0, 0.0)).norm() > STEP_TOLERANCES.trace {
        return Err(Error::InvalidState(format!("after {what}: asymmetry {asym:.3e}, trace {tr}")));
    }
    Ok(())
}

/// One circuit application without invariant checks. Linear in `rho` in
/// deterministic mode, so it also maps non-physical inputs such as matrix
/// units.
pub(crate) fn step_linear(c: &CircuitIR, noise: Option<&NoiseModel>, rho: &Matrix<f64>) -> Result<Matrix<f64>> {
    let mut m = rho.clone();
    run(c, noise, &mut m, None, |_, _| Ok(()))?;
    Ok(m)
}

/// Applies the circuit in place. `trajectory` selects outcome sampling;
/// `check` runs after every instruction.
fn run(
    c: &CircuitIR,
    noise: Option<&NoiseModel>,
    m: &mut Matrix<f64>,
    mut trajectory: Option<&mut RngStream>,
    check: impl Fn(&Matrix<f64>, &str) -> Result<()>,
) -> Result<()> {
    let n = c.n_qubits();
    for layer in c.layers() {
        for g in layer {
            apply_gate_left(m, g.unitary.matrix(), g.qubits);
            apply_gate_right_adjoint(m, g.unitary.matrix(), g.qubits);
            if let Some(noise) = noise {
                depolarize_mask(m, noise.depolarizing, 1 << g.qubits[0] | 1 << g.qubits[1]);
            }
        }
        if let Some(noise) = noise {
            relax_all(m, noise, n, noise.gate_duration)?;
        }
        check(m, "gate layer")?;
    }
    if let Some(noise) = noise {
        relax_all(m, noise, n, noise.measurement_duration)?;
        check(m, "measurement idle")?;
    }
    let fresh = reset_state(c, noise)?;
    for op in c.terminal_ops() {
        let TerminalOp::MeasureReset(a) = *op;
        if let Some(rng) = trajectory.as_deref_mut() {
            project_outcome(m, a, rng)?;
        }
        reset_qubit(m, a, &fresh);
        check(m, "measure/reset")?;
    }
    Ok(())
}

/// Samples the measurement outcome of `qubit`, keeps that branch and
/// renormalizes.
fn project_outcome(m: &mut Matrix<f64>, qubit: usize, rng: &mut RngStream) -> Result<u8> {
    let b = 1usize << qubit;
    let d = m.rows();
    let p1: f64 = (0..d)
        .filter(|i| i & b != 0)
        .map(|i| m[(i, i)].re)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    let outcome = u8::from(rng.uniform() < p1);
    let keep = if outcome == 1 { b } else { 0 };
    let weight = if outcome == 1 { p1 } else { 1.0 - p1 };
    if weight <= 0.0 {
        return Err(Error::InvalidState(format!(
            "sampled outcome of qubit {qubit} has zero probability"
        )));
    }
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = if i & b == keep && j & b == keep {
                m[(i, j)] / weight
            } else {
                C64::new(0.0, 0.0)
            };
        }
    }
    Ok(outcome)
}

/// Register state of the simulator. Ancillas are the low qubits.
#[derive(Debug, Clone)]
pub struct SimState {
    rho: DensityMatrix<f64>,
    rng: RngStream,
    trajectory_rng: RngStream,
    mode: MeasurementMode,
}

impl SimState {
    /// `system (x) ancilla-input` for the circuit. `rng` is used for shot
    /// sampling; trajectory outcomes draw from its trajectory lane.
    pub fn new(system: &DensityMatrix<f64>, c: &CircuitIR, noise: Option<&NoiseModel>, rng: RngStream) -> Result<Self> {
        if system.dim() != c.system_dim() {
            return Err(Error::DimensionMismatch(format!(
                "system state has dim {}, circuit expects {}",
                system.dim(),
                c.system_dim()
            )));
        }
        let anc = ancilla_input(c, noise)?;
        let rho = DensityMatrix::new_unchecked(kron(system.matrix(), &anc));
        Ok(Self::from_register(rho, rng))
    }

    pub fn from_register(rho: DensityMatrix<f64>, rng: RngStream) -> Self {
        let trajectory_rng = rng.lane(lane::TRAJECTORY);
        SimState {
            rho,
            rng,
            trajectory_rng,
            mode: MeasurementMode::Deterministic,
        }
    }

    pub fn with_mode(mut self, mode: MeasurementMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> MeasurementMode {
        self.mode
    }

    pub fn register(&self) -> &DensityMatrix<f64> {
        &self.rho
    }

    /// Reduced state of the system qubits.
    pub fn system_state(&self, c: &CircuitIR) -> Result<DensityMatrix<f64>> {
        let m = partial_trace(self.rho.matrix(), &[c.system_dim(), c.ancilla_dim()], &[0])?;
        Ok(DensityMatrix::new_unchecked(m))
    }

    /// Reduced 2x2 state of register qubit `qubit`.
    pub fn qubit_marginal(&self, qubit: usize) -> Result<Matrix<f64>> {
        let n = self.rho.dim().trailing_zeros() as usize;
        if qubit >= n {
            return Err(Error::InvalidParams(format!("qubit {qubit} outside a {n}-qubit register")));
        }
        let high = 1usize << (n - qubit - 1);
        let low = 1usize << qubit;
        Ok(partial_trace(self.rho.matrix(), &[high, 2, low], &[1])?)
    }

    /// Applies one circuit repetition, checking state invariants after
    /// every instruction and positivity at the end.
    pub fn step(&mut self, c: &CircuitIR, noise: Option<&NoiseModel>) -> Result<()> {
        if self.rho.dim() != c.register_dim() {
            return Err(Error::DimensionMismatch(format!(
                "register has dim {}, circuit expects {}",
                self.rho.dim(),
                c.register_dim()
            )));
        }
        if let Some(noise) = noise {
            noise.validate(c.n_qubits())?;
        }
        let mut m = self.rho.matrix().clone();
        let traj = match self.mode {
            MeasurementMode::Deterministic => None,
            MeasurementMode::Trajectory => Some(&mut self.trajectory_rng),
        };
        run(c, noise, &mut m, traj, check_cheap)?;
        let m = m.hermitian_part();
        let min = eig_hermitian(&m)?.values.first().copied().unwrap_or(0.0);
        if min < -STEP_TOLERANCES.psd {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e} after step")));
        }
        self.rho = DensityMatrix::new_unchecked(m);
        Ok(())
    }

    pub fn run(&mut self, c: &CircuitIR, noise: Option<&NoiseModel>, steps: usize) -> Result<()> {
        (0..steps).try_for_each(|_| self.step(c, noise))
    }

    /// Measures the system qubits `shots` times.
    pub fn sample_system_shots(&mut self, c: &CircuitIR, shots: u64, readout: &[ReadoutError]) -> Result<Histogram> {
        let sys = self.system_state(c)?;
        sample_shots(&sys, shots, readout, &mut self.rng)
    }
}

/// Value form of [`SimState::step`].
pub fn simulate_step(mut state: SimState, c: &CircuitIR, noise: Option<&NoiseModel>) -> Result<SimState> {
    state.step(c, noise)?;
    Ok(state)
}
