//! Ensemble benchmark: sample random maps, drive each to its steady state,
//! collect output probabilities and score them against the fixed-trace
//! Wishart reference.

mod ingest;
mod report;

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{Construction, KrausChannel};
use crate::circuit::{
    build_random_circuit_with, circuit_to_channel, sample_shots, AncillaStrategy, CircuitIR, MeasurementMode, NoiseModel,
    SimState,
};
use crate::error::{Error, Result};
use crate::linalg::{sample_haar_unitary, DensityMatrix};
use crate::rmt::{ReferenceCache, ReferenceKey, ReferenceOutputDistribution, DEFAULT_REFERENCE_SAMPLES};
use crate::rng::{lane, RngStream, StreamId};
use crate::spectral::{analyze_channel, convergence_iterations};

pub use ingest::{ingest_external_histograms, ingest_histogram_files};
pub use report::{
    compare_reports, Aggregate, BenchmarkReport, Comparison, MemberReport, QuantileDelta, ReferenceInfo, ReportSource,
    QUANTILE_LEVELS, REPORT_SCHEMA,
};

/// Seed of the reference sample unless the config overrides it.
pub const DEFAULT_REFERENCE_SEED: u64 = 20_240_601;
/// Largest tolerated fraction of failed members.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    AbstractChannel,
    #[default]
    Circuit,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abstract-channel" | "abstract" | "channel" => Ok(Mode::AbstractChannel),
            "circuit" => Ok(Mode::Circuit),
            other => Err(Error::InvalidParams(format!("unknown mode '{other}'"))),
        }
    }
}

/// Number of map applications before measuring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repetitions {
    Fixed(usize),
    /// Enough iterations to shrink subleading modes by this factor at the
    /// Girko-disk rate.
    Auto(f64),
}

impl Repetitions {
    pub fn resolve(self, rank: usize) -> Result<usize> {
        match self {
            Repetitions::Fixed(0) => Err(Error::InvalidParams("repetitions must be at least 1".into())),
            Repetitions::Fixed(t) => Ok(t),
            Repetitions::Auto(eps) => convergence_iterations(rank, eps),
        }
    }
}

impl FromStr for Repetitions {
    type Err = Error;

    /// `40` or `auto(1e-3)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("repetitions '{s}' is neither a count nor auto(eps)"));
        if let Some(inner) = s.trim().strip_prefix("auto(").and_then(|r| r.strip_suffix(')')) {
            return inner.trim().parse().map(Repetitions::Auto).map_err(|_| bad());
        }
        s.trim().parse().map(Repetitions::Fixed).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shots {
    /// Use the exact diagonal of the final state.
    #[default]
    Exact,
    Count(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n_system: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    pub repetitions: Repetitions,
    pub ensemble_size: usize,
    #[serde(default)]
    pub shots: Shots,
    /// Kraus rank target; in circuit mode `2^n_ancilla`.
    pub rank: usize,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    pub master_seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Random-map construction in abstract-channel mode.
    #[serde(default)]
    pub construction: Construction,
    #[serde(default)]
    pub ancilla_strategy: AncillaStrategy,
    #[serde(default)]
    pub measurement: MeasurementMode,
    /// Start from a Haar-random pure state instead of `|0...0>`.
    #[serde(default)]
    pub random_initial_state: bool,
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    #[serde(default = "default_reference_seed")]
    pub reference_seed: u64,
    /// Worker-pool width; never part of the report.
    #[serde(skip)]
    pub workers: Option<usize>,
}

fn default_depth() -> usize {
    3
}

fn default_reference_samples() -> usize {
    DEFAULT_REFERENCE_SAMPLES
}

fn default_reference_seed() -> u64 {
    DEFAULT_REFERENCE_SEED
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_system: 3,
            depth: default_depth(),
            repetitions: Repetitions::Auto(1e-3),
            ensemble_size: 100,
            shots: Shots::Exact,
            rank: 2,
            noise: None,
            master_seed: 0,
            mode: Mode::Circuit,
            construction: Construction::default(),
            ancilla_strategy: AncillaStrategy::default(),
            measurement: MeasurementMode::default(),
            random_initial_state: false,
            reference_samples: DEFAULT_REFERENCE_SAMPLES,
            reference_seed: DEFAULT_REFERENCE_SEED,
            workers: None,
        }
    }
}

impl ProtocolConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProtocolConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn system_dim(&self) -> usize {
        1 << self.n_system
    }

    /// Ancilla count in circuit mode.
    pub fn n_ancilla(&self) -> usize {
        self.rank.trailing_zeros() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_system == 0 || self.n_system > 10 {
            return bad(format!("n_system must be in 1..=10, got {}", self.n_system));
        }
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be at least 1".into());
        }
        if self.rank < 2 {
            return Err(Error::RankOne);
        }
        if let Shots::Count(0) = self.shots {
            return bad("shots must be at least 1".into());
        }
        if let Some(0) = self.workers {
            return bad("workers must be at least 1".into());
        }
        self.repetitions.resolve(self.rank)?;
        let n = self.system_dim();
        match self.mode {
            Mode::AbstractChannel => {
                if self.rank > n * n {
                    return bad(format!("rank {} exceeds N^2 = {}", self.rank, n * n));
                }
                if self.noise.is_some() {
                    return bad("noise models apply to circuit mode only".into());
                }
                if self.measurement == MeasurementMode::Trajectory {
                    return bad("trajectory measurement applies to circuit mode only".into());
                }
            }
            Mode::Circuit => {
                if !self.rank.is_power_of_two() {
                    return bad(format!("circuit rank must be a power of two (2^ancillas), got {}", self.rank));
                }
                if self.depth == 0 {
                    return bad("depth must be at least 1".into());
                }
                if let Some(noise) = &self.noise {
                    noise.validate(self.n_system + self.n_ancilla())?;
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON echo, as archived in reports.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn config_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }

    pub fn reference_key(&self) -> ReferenceKey {
        ReferenceKey {
            n: self.system_dim(),
            r: self.rank,
            seed: self.reference_seed,
            sample_count: self.reference_samples,
        }
    }

    pub fn member_stream(&self, member: usize) -> RngStream {
        RngStream::new(self.master_seed, member as u64)
    }

    /// Circuit of one member; depends only on the seed and circuit settings.
    pub fn member_circuit(&self, member: usize) -> Result<CircuitIR> {
        let mut rng = self.member_stream(member).lane(lane::MAP);
        build_random_circuit_with(self.n_system, self.n_ancilla(), self.depth, self.ancilla_strategy, &mut rng)
    }
}

/// Runs the benchmark with the process-wide reference cache.
pub fn run_benchmark(cfg: &ProtocolConfig) -> Result<BenchmarkReport> {
    run_benchmark_with(cfg, ReferenceCache::shared())
}

pub fn run_benchmark_with(cfg: &ProtocolConfig, cache: &ReferenceCache) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let t = cfg.repetitions.resolve(cfg.rank)?;
    // Fetched before entering the pool, so the build can use all workers.
    let reference = cache.get(cfg.reference_key())?;
    let members = in_pool(cfg.workers, || {
        (0..cfg.ensemble_size)
            .into_par_iter()
            .map(|i| run_member(cfg, i, t).unwrap_or_else(|e| MemberReport::failed(i, member_seed(cfg, i), &e)))
            .collect::<Vec<_>>()
    })?;
    check_failures(&members)?;
    BenchmarkReport::assemble(cfg.clone(), t, members, &reference, ReportSource::Simulation)
}

pub(crate) fn in_pool<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidParams(format!("cannot build a {w}-thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub(crate) fn check_failures(members: &[MemberReport]) -> Result<()> {
    let failed: Vec<&MemberReport> = members.iter().filter(|m| m.error.is_some()).collect();
    if failed.len() as f64 > MAX_FAILURE_FRACTION * members.len() as f64 {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total: members.len(),
            first: failed[0].error.clone().unwrap_or_default(),
        });
    }
    Ok(())
}

fn member_seed(cfg: &ProtocolConfig, i: usize) -> StreamId {
    cfg.member_stream(i).lane(lane::MAP).id()
}

fn initial_state(cfg: &ProtocolConfig, i: usize) -> DensityMatrix<f64> {
    let n = cfg.system_dim();
    if cfg.random_initial_state {
        let mut rng = cfg.member_stream(i).lane(lane::INITIAL_STATE);
        let u = sample_haar_unitary::<f64>(n, &mut rng);
        DensityMatrix::pure(&u.matrix().column(0)).expect("unit column")
    } else {
        DensityMatrix::basis(n, 0)
    }
}

fn run_member(cfg: &ProtocolConfig, i: usize, t: usize) -> Result<MemberReport> {
    let stream = cfg.member_stream(i);
    let rho0 = initial_state(cfg, i);
    let noise = cfg.noise.as_ref();
    let (channel, circuit): (KrausChannel<f64>, Option<CircuitIR>) = match cfg.mode {
        Mode::AbstractChannel => {
            let mut rng = stream.lane(lane::MAP);
            (cfg.construction.sample(cfg.n_system, cfg.rank, &mut rng)?, None)
        }
        Mode::Circuit => {
            let c = cfg.member_circuit(i)?;
            (circuit_to_channel(&c, noise)?, Some(c))
        }
    };
    let analysis = analyze_channel(&channel)?;
    let final_state = match &circuit {
        None => channel.iterate(&rho0, t)?,
        Some(c) => {
            // Physical start: every ancilla in |0>.
            let mut sim = SimState::new(&rho0, c, None, stream.lane(lane::SHOTS))?.with_mode(cfg.measurement);
            sim.run(c, noise, t)?;
            sim.system_state(c)?
        }
    };
    let exact: Vec<f64> = final_state.probabilities();
    let steady_distance = final_state.trace_distance(&analysis.steady.state)?;
    let (probabilities, histogram, exact_probabilities) = match cfg.shots {
        Shots::Exact => (exact, None, None),
        Shots::Count(shots) => {
            let readout = match (noise, &circuit) {
                (Some(n), Some(c)) => n.system_readout(c.n_ancilla(), c.n_system()),
                _ => Vec::new(),
            };
            let mut rng = stream.lane(lane::SHOTS);
            let h = sample_shots(&final_state, shots, &readout, &mut rng)?;
            (h.frequencies(), Some(h), Some(exact))
        }
    };
    let spectrum = &analysis.spectrum;
    Ok(MemberReport {
        index: i,
        seed: member_seed(cfg, i),
        circuit_hash: circuit.as_ref().map(CircuitIR::config_hash).transpose()?,
        kraus_rank: Some(channel.rank()),
        gap: Some(spectrum.gap),
        second_modulus: Some(spectrum.second_modulus()),
        spectrum: spectrum.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
        steady_eigenvalues: analysis.steady.eigenvalues.clone(),
        steady_distance: Some(steady_distance),
        probabilities,
        exact_probabilities,
        histogram,
        error: None,
    })
}

/// Looks up the reference a config is scored against.
pub fn reference_for(cfg: &ProtocolConfig, cache: &ReferenceCache) -> Result<std::sync::Arc<ReferenceOutputDistribution>> {
    cache.get(cfg.reference_key())
}
