use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::noise::ReadoutError;
use crate::error::{Error, Result};
use crate::linalg::DensityMatrix;
use crate::rng::RngStream;

/// Outcome counts keyed by bitstring. The rightmost character is qubit 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    n_bits: usize,
    counts: BTreeMap<String, u64>,
}

impl Histogram {
    /// Validates bitstring lengths and characters; zero counts are dropped.
    pub fn new(n_bits: usize, counts: BTreeMap<String, u64>) -> Result<Self> {
        for key in counts.keys() {
            if key.len() != n_bits || !key.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(Error::malformed(
                    Some(format!("key {key:?}")),
                    format!("expected a {n_bits}-bit string"),
                ));
            }
        }
        let counts: BTreeMap<String, u64> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        if counts.is_empty() {
            return Err(Error::malformed(None, "histogram has no shots"));
        }
        Ok(Histogram { n_bits, counts })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn count(&self, outcome: usize) -> u64 {
        self.counts.get(&bitstring(outcome, self.n_bits)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Relative frequency of every outcome, indexed by its integer value.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total() as f64;
        (0..1usize << self.n_bits).map(|x| self.count(x) as f64 / total).collect()
    }
}

pub fn bitstring(outcome: usize, n_bits: usize) -> String {
    format!("{outcome:0n_bits$b}")
}

/// Samples `shots` computational-basis outcomes of `rho`, then flips each
/// bit with its readout error. An empty `readout` means ideal readout.
pub fn sample_shots(rho: &DensityMatrix<f64>, shots: u64, readout: &[ReadoutError], rng: &mut RngStream) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::InvalidParams("shots must be at least 1".into()));
    }
    let dim = rho.dim();
    if !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("dimension {dim} is not a qubit register")));
    }
    let n_bits = dim.trailing_zeros() as usize;
    if !readout.is_empty() && readout.len() != n_bits {
        return Err(Error::DimensionMismatch(format!(
            "{} readout entries for {n_bits} qubits",
            readout.len()
        )));
    }
    for r in readout {
        for p in [r.p10, r.p01] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::OutOfRange {
                    value: p,
                    range: "[0, 1]",
                });
            }
        }
    }
    let mut cumulative = Vec::with_capacity(dim);
    let mut acc = 0.0;
    for p in rho.probabilities() {
        acc += p.max(0.0);
        cumulative.push(acc);
    }
    let mut tallies = vec![0u64; dim];
    for _ in 0..shots {
        let u = rng.uniform() * acc;
        let mut x = cumulative.partition_point(|&c| c <= u).min(dim - 1);
        for (q, r) in readout.iter().enumerate() {
            let flip = if x >> q & 1 == 0 { r.p10 } else { r.p01 };
            if flip > 0.0 && rng.uniform() < flip {
                x ^= 1 << q;
            }
        }
        tallies[x] += 1;
    }
    let counts = tallies
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(x, c)| (bitstring(x, n_bits), c))
        .collect();
    Histogram::new(n_bits, counts)
}
