use std::path::Path;

use super::report::{BenchmarkReport, MemberReport, ReportSource};
use super::{check_failures, Mode, ProtocolConfig, Shots};
use crate::error::{Error, Result};
use crate::qasm::{read_histogram_file, HistogramFile};
use crate::rmt::ReferenceCache;
use crate::rng::lane;

/// Scores externally measured histograms, one per ensemble member, against
/// the reference of `cfg`. Histograms carrying a `member` and
/// `config_hash` in their metadata are checked against the circuit the
/// config generates for that member.
pub fn ingest_external_histograms(
    files: &[HistogramFile],
    cfg: &ProtocolConfig,
    cache: &ReferenceCache,
) -> Result<BenchmarkReport> {
    if files.is_empty() {
        return Err(Error::malformed(None, "no histogram files given"));
    }
    let mut cfg = cfg.clone();
    cfg.ensemble_size = files.len();
    cfg.validate()?;
    let t = cfg.repetitions.resolve(cfg.rank)?;
    let mut members = Vec::with_capacity(files.len());
    for (i, f) in files.iter().enumerate() {
        let h = &f.histogram;
        if h.n_bits() != cfg.n_system {
            return Err(Error::ConfigMismatch(format!(
                "histogram {i} has {}-bit outcomes, config has {} system qubits",
                h.n_bits(),
                cfg.n_system
            )));
        }
        if let Some(seed) = f.metadata.seed {
            if seed != cfg.master_seed {
                return Err(Error::ConfigMismatch(format!(
                    "histogram {i} was produced with seed {seed}, config has {}",
                    cfg.master_seed
                )));
            }
        }
        let member = f.metadata.member.map_or(i, |m| m as usize);
        if let (Some(hash), Mode::Circuit) = (&f.metadata.config_hash, cfg.mode) {
            let expected = cfg.member_circuit(member)?.config_hash()?;
            if *hash != expected {
                return Err(Error::ConfigMismatch(format!(
                    "histogram {i} belongs to circuit {hash}, member {member} of this config is {expected}"
                )));
            }
        }
        members.push(MemberReport::measured(
            member,
            cfg.member_stream(member).lane(lane::MAP).id(),
            h.clone(),
        ));
    }
    if let Some(first) = files.first() {
        cfg.shots = Shots::Count(first.histogram.total());
    }
    check_failures(&members)?;
    let reference = cache.get(cfg.reference_key())?;
    BenchmarkReport::assemble(cfg, t, members, &reference, ReportSource::External)
}

pub fn ingest_histogram_files(
    paths: &[impl AsRef<Path>],
    cfg: &ProtocolConfig,
    cache: &ReferenceCache,
) -> Result<BenchmarkReport> {
    let files = paths
        .iter()
        .map(|p| read_histogram_file(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    ingest_external_histograms(&files, cfg, cache)
}
