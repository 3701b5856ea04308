use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use steadybench::channel::Construction;
use steadybench::circuit::{AncillaStrategy, CircuitIR, MeasurementMode, NoiseModel};
use steadybench::protocol::{
    compare_reports, ingest_histogram_files, run_benchmark_with, BenchmarkReport, Mode, ProtocolConfig, Repetitions, Shots,
};
use steadybench::qasm::export_qasm;
use steadybench::rmt::{ReferenceCache, ReferenceKey, DEFAULT_REFERENCE_SAMPLES};
use steadybench::{Error, Result};

#[derive(Parser)]
#[command(name = "steadybench", version, about = "Random dynamical map benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble benchmark and write the report.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for report.json and CSV sidecars; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record the generation time (makes reports non-reproducible).
        #[arg(long)]
        timestamp: bool,
    },
    /// Compare two reports (files or report directories).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score externally measured shot histograms.
    Ingest {
        #[command(flatten)]
        config: ConfigArgs,
        /// Histogram JSON files, one per ensemble member.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a member circuit as OpenQASM 3.
    ExportQasm {
        #[command(flatten)]
        config: ConfigArgs,
        /// Export this circuit JSON instead of a generated member.
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        member: usize,
        /// Repetitions of the circuit body; defaults to the resolved config value.
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and cache a reference output distribution.
    Reference {
        #[arg(long)]
        qubits: usize,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long, default_value_t = DEFAULT_REFERENCE_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = steadybench::protocol::DEFAULT_REFERENCE_SEED)]
        seed: u64,
        #[arg(long)]
        cache_dir: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON protocol config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// Repetition count or auto(eps).
    #[arg(long, conflicts_with = "epsilon")]
    reps: Option<Repetitions>,
    /// Shorthand for --reps auto(eps).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long, conflicts_with = "exact")]
    shots: Option<u64>,
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    noise_file: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// circuit or abstract-channel.
    #[arg(long)]
    mode: Option<Mode>,
    /// ginibre-kraus, stinespring or choi.
    #[arg(long)]
    construction: Option<Construction>,
    /// reuse or fresh.
    #[arg(long)]
    ancilla: Option<AncillaStrategy>,
    /// Sample ancilla outcomes instead of averaging over them.
    #[arg(long)]
    trajectory: bool,
    #[arg(long)]
    random_initial_state: bool,
    #[arg(long)]
    reference_samples: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for cached reference distributions.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ProtocolConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_str(&read(p)?)?,
            None => ProtocolConfig::default(),
        };
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    cfg.$field = v;
                }
            };
        }
        set!(n_system, self.qubits);
        set!(depth, self.depth);
        set!(repetitions, self.reps.or(self.epsilon.map(Repetitions::Auto)));
        set!(ensemble_size, self.ensemble);
        set!(shots, self.shots.map(Shots::Count));
        set!(rank, self.rank);
        set!(master_seed, self.seed);
        set!(mode, self.mode);
        set!(construction, self.construction);
        set!(ancilla_strategy, self.ancilla);
        set!(reference_samples, self.reference_samples);
        if self.exact {
            cfg.shots = Shots::Exact;
        }
        if self.trajectory {
            cfg.measurement = MeasurementMode::Trajectory;
        }
        if self.random_initial_state {
            cfg.random_initial_state = true;
        }
        if let Some(p) = &self.noise_file {
            cfg.noise = Some(NoiseModel::from_json(&read(p)?)?);
        }
        cfg.workers = self.workers;
        cfg.validate()?;
        Ok(cfg)
    }

    fn cache(&self) -> ReferenceCache {
        match &self.cache_dir {
            Some(d) => ReferenceCache::with_dir(d),
            None => ReferenceCache::in_memory(),
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.write_all(b"\n"))
                .or_else(|e| match e.kind() {
                    std::io::ErrorKind::BrokenPipe => Ok(()),
                    _ => Err(e),
                })
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn write_report(report: &BenchmarkReport, out: Option<&Path>) -> Result<()> {
    match out {
        Some(dir) => report.write_dir(dir),
        None => emit(&report.to_json()?, None),
    }
}

fn load_report(path: &Path) -> Result<BenchmarkReport> {
    if path.is_dir() {
        BenchmarkReport::read(&path.join("report.json"))
    } else {
        BenchmarkReport::read(path)
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, out, timestamp } => {
            let cfg = config.resolve()?;
            let mut report = run_benchmark_with(&cfg, &config.cache())?;
            if timestamp {
                report = report.with_timestamp();
            }
            eprintln!(
                "KS vs reference: {:.4} ({} members ok, {} failed, t = {})",
                report.aggregate.ks_reference,
                report.aggregate.members_ok,
                report.aggregate.members_failed,
                report.aggregate.repetitions
            );
            write_report(&report, out.as_deref())
        }
        Command::Compare { a, b, out } => {
            let cmp = compare_reports(&load_report(&a)?, &load_report(&b)?)?;
            emit(&serde_json::to_string_pretty(&cmp)?, out.as_deref())
        }
        Command::Ingest { config, files, out } => {
            let cfg = config.resolve()?;
            let report = ingest_histogram_files(&files, &cfg, &config.cache())?;
            eprintln!("KS vs reference: {:.4}", report.aggregate.ks_reference);
            write_report(&report, out.as_deref())
        }
        Command::ExportQasm {
            config,
            circuit,
            member,
            repetitions,
            out,
        } => {
            let cfg = config.resolve()?;
            let c: CircuitIR = match &circuit {
                Some(p) => serde_json::from_str(&read(p)?)?,
                None => cfg.member_circuit(member)?,
            };
            let reps = match repetitions {
                Some(r) => r,
                None => cfg.repetitions.resolve(c.rank())?,
            };
            let seed = circuit.is_none().then_some(cfg.master_seed);
            emit(&export_qasm(&c, reps, seed)?.source, out.as_deref())
        }
        Command::Reference {
            qubits,
            rank,
            samples,
            seed,
            cache_dir,
        } => {
            fs::create_dir_all(&cache_dir).map_err(|e| Error::io(&cache_dir, e))?;
            let key = ReferenceKey {
                n: 1 << qubits,
                r: rank,
                seed,
                sample_count: samples,
            };
            let reference = ReferenceCache::with_dir(&cache_dir).get(key)?;
            let m = reference.distribution().moments();
            eprintln!(
                "wrote {} (mean {:.6}, variance {:.3e})",
                cache_dir.join(key.file_name()).display(),
                m.mean,
                m.variance
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
