//! Layered two-qubit circuits with terminal ancilla measure/reset, noise
//! channels, a density-matrix simulator, and the circuit-to-channel map.
//!
//! Register layout: qubit `k` is bit `k` of a register index. Ancillas occupy
//! qubits `0..n_ancilla` and system qubit `s` is register qubit
//! `n_ancilla + s`, so a register index is `anc + 2^n_ancilla * sys`.
//! A gate on the ordered pair `(a, b)` acts on the local index
//! `2 * bit(a) + bit(b)`: the first listed qubit is the more significant.

mod noise;
mod shots;
mod sim;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{from_choi, ChoiMatrix, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{determinant, sample_haar_unitary, Matrix, UnitaryMatrix};
use crate::rng::RngStream;
use crate::C64;

pub use noise::{
    depolarize, faulty_reset_state, thermal_relax, NoiseModel, QubitNoise, ReadoutError, DEFAULT_MEASUREMENT_DURATION,
};
pub use shots::{bitstring, sample_shots, Histogram};
pub use sim::{simulate_step, MeasurementMode, SimState};

/// How the ancilla is prepared for the next repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AncillaStrategy {
    /// Measure and reset the same qubit; the reset is subject to reset error.
    #[default]
    Reuse,
    /// Swap in a fresh qubit prepared in `|0>`; no reset error applies.
    Fresh,
}

impl std::str::FromStr for AncillaStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reuse" => Ok(AncillaStrategy::Reuse),
            "fresh" => Ok(AncillaStrategy::Fresh),
            other => Err(Error::InvalidParams(format!("unknown ancilla strategy '{other}'"))),
        }
    }
}

/// A two-qubit unitary on an ordered qubit pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GateRecord", into = "GateRecord")]
pub struct Gate {
    pub qubits: [usize; 2],
    pub unitary: UnitaryMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GateRecord {
    qubits: [usize; 2],
    /// Row-major interleaved `re, im`.
    unitary: Vec<f64>,
}

impl From<Gate> for GateRecord {
    fn from(g: Gate) -> Self {
        GateRecord {
            qubits: g.qubits,
            unitary: g.unitary.matrix().to_interleaved(),
        }
    }
}

impl TryFrom<GateRecord> for Gate {
    type Error = Error;

    fn try_from(r: GateRecord) -> Result<Self> {
        let m = Matrix::from_interleaved(4, 4, &r.unitary)?;
        // Decimal round trips cost a few ulps.
        let unitary = UnitaryMatrix::with_tolerance(m, 1e-9)?;
        Ok(Gate {
            qubits: r.qubits,
            unitary,
        })
    }
}

/// Gates that act in parallel.
pub type Layer = Vec<Gate>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalOp {
    MeasureReset(usize),
}

/// One application of the random map: gate layers, then ancilla measure/reset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRecord", into = "CircuitRecord")]
pub struct CircuitIR {
    n_system: usize,
    n_ancilla: usize,
    layers: Vec<Layer>,
    terminal_ops: Vec<TerminalOp>,
    ancilla_strategy: AncillaStrategy,
}

#[derive(Serialize, Deserialize)]
struct CircuitRecord {
    n_system: usize,
    n_ancilla: usize,
    #[serde(default)]
    ancilla_strategy: AncillaStrategy,
    layers: Vec<Layer>,
    terminal_ops: Vec<TerminalOp>,
}

impl From<CircuitIR> for CircuitRecord {
    fn from(c: CircuitIR) -> Self {
        CircuitRecord {
            n_system: c.n_system,
            n_ancilla: c.n_ancilla,
            ancilla_strategy: c.ancilla_strategy,
            layers: c.layers,
            terminal_ops: c.terminal_ops,
        }
    }
}

impl TryFrom<CircuitRecord> for CircuitIR {
    type Error = Error;

    fn try_from(r: CircuitRecord) -> Result<Self> {
        CircuitIR::new(r.n_system, r.n_ancilla, r.layers, r.terminal_ops, r.ancilla_strategy)
    }
}

/// Largest register the dense simulator accepts.
pub const MAX_REGISTER_QUBITS: usize = 12;

impl CircuitIR {
    pub fn new(
        n_system: usize,
        n_ancilla: usize,
        layers: Vec<Layer>,
        terminal_ops: Vec<TerminalOp>,
        ancilla_strategy: AncillaStrategy,
    ) -> Result<Self> {
        if n_system == 0 || n_ancilla == 0 {
            return Err(Error::InvalidParams(
                "circuits need at least one system and one ancilla qubit".into(),
            ));
        }
        let total = n_system + n_ancilla;
        if total > MAX_REGISTER_QUBITS {
            return Err(Error::InvalidParams(format!(
                "{total} register qubits exceed the simulator limit of {MAX_REGISTER_QUBITS}"
            )));
        }
        for (li, layer) in layers.iter().enumerate() {
            let mut used = vec![false; total];
            for g in layer {
                let [a, b] = g.qubits;
                if a == b || a >= total || b >= total {
                    return Err(Error::InvalidParams(format!("layer {li}: bad qubit pair ({a}, {b})")));
                }
                if used[a] || used[b] {
                    return Err(Error::InvalidParams(format!("layer {li}: gates overlap on ({a}, {b})")));
                }
                if g.unitary.dim() != 4 {
                    return Err(Error::DimensionMismatch(format!("layer {li}: gate is not 4x4")));
                }
                used[a] = true;
                used[b] = true;
            }
        }
        let mut seen = vec![0usize; n_ancilla];
        for op in &terminal_ops {
            let TerminalOp::MeasureReset(a) = *op;
            if a >= n_ancilla {
                return Err(Error::InvalidParams(format!("measure/reset on non-ancilla qubit {a}")));
            }
            seen[a] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::InvalidParams("every ancilla needs exactly one measure/reset".into()));
        }
        Ok(CircuitIR {
            n_system,
            n_ancilla,
            layers,
            terminal_ops,
            ancilla_strategy,
        })
    }

    pub fn n_system(&self) -> usize {
        self.n_system
    }

    pub fn n_ancilla(&self) -> usize {
        self.n_ancilla
    }

    pub fn n_qubits(&self) -> usize {
        self.n_system + self.n_ancilla
    }

    pub fn system_dim(&self) -> usize {
        1 << self.n_system
    }

    pub fn ancilla_dim(&self) -> usize {
        1 << self.n_ancilla
    }

    pub fn register_dim(&self) -> usize {
        1 << self.n_qubits()
    }

    /// Kraus rank of the noiseless map, `2^n_ancilla`.
    pub fn rank(&self) -> usize {
        self.ancilla_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn terminal_ops(&self) -> &[TerminalOp] {
        &self.terminal_ops
    }

    pub fn ancilla_strategy(&self) -> AncillaStrategy {
        self.ancilla_strategy
    }

    pub fn with_strategy(mut self, strategy: AncillaStrategy) -> Self {
        self.ancilla_strategy = strategy;
        self
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Full register unitary of the gate layers.
    pub fn unitary(&self) -> Matrix<f64> {
        let d = self.register_dim();
        let mut u = Matrix::identity(d);
        for layer in &self.layers {
            for g in layer {
                sim::apply_gate_left(&mut u, g.unitary.matrix(), g.qubits);
            }
        }
        u
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Hex SHA-256 of the compact JSON serialization.
    pub fn config_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}

/// Brickwork circuit over the ancilla and system qubits: each depth unit is
/// an even-pair sublayer `(0,1), (2,3), ...` followed by an odd-pair sublayer
/// `(1,2), (3,4), ...`, every gate an independent Haar `SU(4)`.
pub fn build_random_circuit(n_system: usize, depth: usize, rng: &mut RngStream) -> Result<CircuitIR> {
    build_random_circuit_with(n_system, 1, depth, AncillaStrategy::Reuse, rng)
}

pub fn build_random_circuit_with(
    n_system: usize,
    n_ancilla: usize,
    depth: usize,
    strategy: AncillaStrategy,
    rng: &mut RngStream,
) -> Result<CircuitIR> {
    if depth == 0 {
        return Err(Error::InvalidParams("circuit depth must be at least 1".into()));
    }
    let total = n_system + n_ancilla;
    let mut layers = Vec::with_capacity(2 * depth);
    for _ in 0..depth {
        for offset in [0usize, 1] {
            let layer: Layer = (offset..total.saturating_sub(1))
                .step_by(2)
                .map(|a| Gate {
                    qubits: [a, a + 1],
                    unitary: haar_su4(rng),
                })
                .collect();
            if !layer.is_empty() {
                layers.push(layer);
            }
        }
    }
    let terminal = (0..n_ancilla).map(TerminalOp::MeasureReset).collect();
    CircuitIR::new(n_system, n_ancilla, layers, terminal, strategy)
}

/// Haar unitary on 4 dims rescaled to unit determinant.
fn haar_su4(rng: &mut RngStream) -> UnitaryMatrix<f64> {
    let u = sample_haar_unitary::<f64>(4, rng);
    let det = determinant(u.matrix()).expect("square");
    let phase = C64::from_polar(1.0, -det.arg() / 4.0);
    UnitaryMatrix::new_unchecked(u.matrix().scale(phase))
}

/// The channel one circuit application induces on the system.
///
/// Without noise the register unitary is split into Stinespring blocks with
/// the ancillas starting in `|0>`. With noise the simulator is run on the
/// `N^2` matrix units, the ancillas starting in the reset state, and the
/// resulting Choi matrix is converted to Kraus form.
pub fn circuit_to_channel(c: &CircuitIR, noise: Option<&NoiseModel>) -> Result<KrausChannel<f64>> {
    match noise {
        None => {
            let u = c.unitary();
            let kraus = crate::channel::stinespring_blocks(&u, c.system_dim(), c.ancilla_dim());
            KrausChannel::new(kraus)
        }
        Some(noise) => {
            noise.validate(c.n_qubits())?;
            let n = c.system_dim();
            let anc = sim::ancilla_input(c, Some(noise))?;
            let mut choi = Matrix::zeros(n * n, n * n);
            for i in 0..n {
                for j in 0..n {
                    let mut unit = Matrix::zeros(n, n);
                    unit[(i, j)] = C64::new(1.0, 0.0);
                    let out = sim::step_linear(c, Some(noise), &crate::linalg::kron(&unit, &anc))?;
                    let sys = sim::trace_out_ancillas(&out, c);
                    for o in 0..n {
                        for o2 in 0..n {
                            choi[(i * n + o, j * n + o2)] = sys[(o, o2)];
                        }
                    }
                }
            }
            from_choi(&ChoiMatrix::new(choi.hermitian_part())?)
        }
    }
}
