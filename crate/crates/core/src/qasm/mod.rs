//! OpenQASM 3 export of protocol circuits and shot-histogram file I/O.

mod histogram;
mod kak;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circuit::{AncillaStrategy, CircuitIR, TerminalOp};
use crate::error::{Error, Result};

pub use histogram::{parse_histograms, read_histogram_file, serialize_histogram, HistogramFile, HistogramMetadata};
pub use kak::{decompose_two_qubit, phase_distance, recompose, u_matrix, zyz_angles, LocalOp, DECOMPOSITION_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QasmMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QasmProgram {
    pub source: String,
    pub n_qubits: usize,
    /// Mid-circuit ancilla bits.
    pub n_ancilla_bits: usize,
    /// Final system measurement bits.
    pub n_system_bits: usize,
    pub metadata: QasmMetadata,
}

/// Register qubit to physical qubit for repetition `rep`. Fresh ancillas
/// get new qubits each repetition; system qubits follow all ancillas.
fn physical(c: &CircuitIR, reps: usize, rep: usize, q: usize) -> usize {
    let n_anc = c.n_ancilla();
    match c.ancilla_strategy() {
        AncillaStrategy::Reuse => q,
        AncillaStrategy::Fresh if q < n_anc => rep * n_anc + q,
        AncillaStrategy::Fresh => n_anc * reps + (q - n_anc),
    }
}

/// Emits the circuit repeated `repetitions` times. Each repetition ends
/// with a measure into `anc[..]` and a reset of every ancilla; the system
/// is measured into `c[..]` at the end, `c[s]` holding system qubit `s`.
pub fn export_qasm(c: &CircuitIR, repetitions: usize, seed: Option<u64>) -> Result<QasmProgram> {
    if repetitions == 0 {
        return Err(Error::InvalidParams("repetitions must be at least 1".into()));
    }
    let gates: Vec<Vec<(Vec<LocalOp>, [usize; 2])>> = c
        .layers()
        .iter()
        .map(|layer| {
            layer
                .iter()
                .map(|g| Ok((decompose_two_qubit(g.unitary.matrix())?, g.qubits)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let n_qubits = match c.ancilla_strategy() {
        AncillaStrategy::Reuse => c.n_qubits(),
        AncillaStrategy::Fresh => c.n_ancilla() * repetitions + c.n_system(),
    };
    let n_anc_bits = c.n_ancilla() * repetitions;
    let metadata = QasmMetadata {
        seed,
        config_hash: c.config_hash()?,
    };

    let mut s = String::new();
    s.push_str("OPENQASM 3.0;\ninclude \"stdgates.inc\";\n");
    if let Some(seed) = seed {
        let _ = writeln!(s, "// seed: {seed}");
    }
    let _ = writeln!(s, "// config_hash: {}", metadata.config_hash);
    let _ = writeln!(
        s,
        "// qubits 0..{} are ancillas; c[k] is system qubit k (little-endian)",
        n_qubits - c.n_system()
    );
    let _ = writeln!(s, "qubit[{n_qubits}] q;");
    let _ = writeln!(s, "bit[{n_anc_bits}] anc;");
    let _ = writeln!(s, "bit[{}] c;", c.n_system());
    for rep in 0..repetitions {
        let _ = writeln!(s, "// repetition {rep}");
        for layer in &gates {
            for (ops, [a, b]) in layer {
                let pq = [physical(c, repetitions, rep, *a), physical(c, repetitions, rep, *b)];
                for op in ops {
                    match *op {
                        LocalOp::U {
                            qubit,
                            theta,
                            phi,
                            lambda,
                        } => {
                            let _ = writeln!(s, "U({theta:?}, {phi:?}, {lambda:?}) q[{}];", pq[qubit]);
                        }
                        LocalOp::Cx { control, target } => {
                            let _ = writeln!(s, "cx q[{}], q[{}];", pq[control], pq[target]);
                        }
                    }
                }
            }
        }
        for op in c.terminal_ops() {
            let TerminalOp::MeasureReset(a) = *op;
            let q = physical(c, repetitions, rep, a);
            let _ = writeln!(s, "anc[{}] = measure q[{q}];", rep * c.n_ancilla() + a);
            let _ = writeln!(s, "reset q[{q}];");
        }
    }
    for k in 0..c.n_system() {
        let q = physical(c, repetitions, 0, c.n_ancilla() + k);
        let _ = writeln!(s, "c[{k}] = measure q[{q}];");
    }
    Ok(QasmProgram {
        source: s,
        n_qubits,
        n_ancilla_bits: n_anc_bits,
        n_system_bits: c.n_system(),
        metadata,
    })
}
