use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ProtocolConfig;
use crate::circuit::Histogram;
use crate::error::{Error, Result};
use crate::rmt::{
    empirical_cdf, ks_distance, ks_distance_to_cdf, write_cdf_csv, write_quantiles_csv, EmpiricalDistribution, MPParams,
    ReferenceOutputDistribution, SampleMoments,
};
use crate::rng::StreamId;
use crate::spectral::csv_error;

pub const REPORT_SCHEMA: &str = "steadybench.report/v1";
/// Quantile levels `k / 100` of the report's quantile point set.
pub const QUANTILE_LEVELS: usize = 99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportSource {
    Simulation,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub index: usize,
    pub seed: StreamId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus_rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_modulus: Option<f64>,
    /// Superoperator eigenvalues as `[re, im]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spectrum: Vec<[f64; 2]>,
    /// Steady-state eigenvalues, descending.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steady_eigenvalues: Vec<f64>,
    /// Trace distance of the measured state from the steady state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_distance: Option<f64>,
    /// Output probabilities indexed by outcome; frequencies when sampled.
    pub probabilities: Vec<f64>,
    /// Exact diagonal alongside simulated shots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_probabilities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MemberReport {
    pub fn failed(index: usize, seed: StreamId, e: &Error) -> Self {
        MemberReport {
            error: Some(e.to_string()),
            ..Self::blank(index, seed)
        }
    }

    fn blank(index: usize, seed: StreamId) -> Self {
        MemberReport {
            index,
            seed,
            circuit_hash: None,
            kraus_rank: None,
            gap: None,
            second_modulus: None,
            spectrum: Vec::new(),
            steady_eigenvalues: Vec::new(),
            steady_distance: None,
            probabilities: Vec::new(),
            exact_probabilities: None,
            histogram: None,
            error: None,
        }
    }

    /// A member known only through its measured histogram.
    pub fn measured(index: usize, seed: StreamId, histogram: Histogram) -> Self {
        MemberReport {
            probabilities: histogram.frequencies(),
            histogram: Some(histogram),
            ..Self::blank(index, seed)
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    pub n: usize,
    pub r: usize,
    pub sample_count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub members_ok: usize,
    pub members_failed: usize,
    /// Resolved number of map applications.
    pub repetitions: usize,
    pub reference: ReferenceInfo,
    /// KS distance of pooled output probabilities to the reference.
    pub ks_reference: f64,
    /// KS distance of pooled steady-state eigenvalues to the rescaled
    /// Marchenko-Pastur law, when spectra are available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_eigenvalues_mp: Option<f64>,
    pub output_moments: SampleMoments,
    pub reference_moments: SampleMoments,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalue_moments: Option<SampleMoments>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_second_modulus: Option<f64>,
    /// Empirical CDF of pooled outputs as `(value, cdf)`.
    pub cdf: Vec<(f64, f64)>,
    /// `(reference quantile, sample quantile)` at levels `k / 100`.
    pub quantiles: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: String,
    pub version: String,
    pub source: ReportSource,
    pub config: ProtocolConfig,
    pub config_hash: String,
    /// Seconds since the Unix epoch; absent unless requested, so that
    /// reports stay byte-reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_unix: Option<u64>,
    pub members: Vec<MemberReport>,
    pub aggregate: Aggregate,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn levels() -> impl Iterator<Item = f64> {
    (1..=QUANTILE_LEVELS).map(|k| k as f64 / (QUANTILE_LEVELS + 1) as f64)
}

impl BenchmarkReport {
    pub(crate) fn assemble(
        config: ProtocolConfig,
        repetitions: usize,
        members: Vec<MemberReport>,
        reference: &ReferenceOutputDistribution,
        source: ReportSource,
    ) -> Result<Self> {
        let ok: Vec<&MemberReport> = members.iter().filter(|m| m.is_ok()).collect();
        let pooled = EmpiricalDistribution::new(ok.iter().flat_map(|m| m.probabilities.iter().copied()).collect())?;
        let eigen: Vec<f64> = ok.iter().flat_map(|m| m.steady_eigenvalues.iter().copied()).collect();
        let mp = MPParams::<f64>::new(config.system_dim(), config.rank)?;
        let eigen = (!eigen.is_empty()).then(|| EmpiricalDistribution::new(eigen)).transpose()?;
        let refd = reference.distribution();
        let aggregate = Aggregate {
            members_ok: ok.len(),
            members_failed: members.len() - ok.len(),
            repetitions,
            reference: ReferenceInfo {
                n: reference.params.n,
                r: reference.params.r,
                sample_count: reference.sample_count,
                seed: reference.seed.master_seed,
            },
            ks_reference: ks_distance(&pooled, reference),
            ks_eigenvalues_mp: eigen.as_ref().map(|e| ks_distance_to_cdf(e, |x| mp.cdf(x))),
            output_moments: pooled.moments(),
            reference_moments: refd.moments(),
            eigenvalue_moments: eigen.as_ref().map(EmpiricalDistribution::moments),
            mean_gap: mean(ok.iter().filter_map(|m| m.gap)),
            mean_second_modulus: mean(ok.iter().filter_map(|m| m.second_modulus)),
            cdf: empirical_cdf(&pooled),
            quantiles: levels().map(|q| (refd.quantile(q), pooled.quantile(q))).collect(),
        };
        Ok(BenchmarkReport {
            schema: REPORT_SCHEMA.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            source,
            config_hash: config.config_hash()?,
            config,
            generated_unix: None,
            members,
            aggregate,
        })
    }

    pub fn with_timestamp(mut self) -> Self {
        self.generated_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        self
    }

    pub fn pooled_probabilities(&self) -> Vec<f64> {
        self.members
            .iter()
            .filter(|m| m.is_ok())
            .flat_map(|m| m.probabilities.iter().copied())
            .collect()
    }

    pub fn pooled_eigenvalues(&self) -> Vec<f64> {
        self.members
            .iter()
            .filter(|m| m.is_ok())
            .flat_map(|m| m.steady_eigenvalues.iter().copied())
            .collect()
    }

    pub fn output_distribution(&self) -> Result<EmpiricalDistribution> {
        EmpiricalDistribution::new(self.pooled_probabilities())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: BenchmarkReport = serde_json::from_str(text)?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::InvalidParams(format!(
                "unsupported report schema '{}', expected '{REPORT_SCHEMA}'",
                report.schema
            )));
        }
        Ok(report)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Writes `report.json` and the CSV sidecars `eigenvalues.csv`,
    /// `probabilities.csv`, `spectrum.csv`, `cdf.csv` and `quantiles.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| -> Result<BufWriter<File>> {
            let path = dir.join(name);
            File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
        };
        let mut json = create("report.json")?;
        json.write_all(self.to_json()?.as_bytes())
            .and_then(|_| json.write_all(b"\n"))
            .and_then(|_| json.flush())
            .map_err(|e| Error::io(dir.join("report.json"), e))?;

        let mut w = csv::Writer::from_writer(create("eigenvalues.csv")?);
        for m in self.members.iter().filter(|m| m.is_ok()) {
            for (index, &value) in m.steady_eigenvalues.iter().enumerate() {
                w.serialize(EigenRow {
                    member: m.index,
                    index,
                    value,
                })
                .map_err(csv_error)?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("eigenvalues.csv"), e))?;

        let mut w = csv::Writer::from_writer(create("probabilities.csv")?);
        for m in self.members.iter().filter(|m| m.is_ok()) {
            for (outcome, &probability) in m.probabilities.iter().enumerate() {
                w.serialize(ProbabilityRow {
                    member: m.index,
                    outcome,
                    probability,
                })
                .map_err(csv_error)?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("probabilities.csv"), e))?;

        let mut w = csv::Writer::from_writer(create("spectrum.csv")?);
        for m in self.members.iter().filter(|m| m.is_ok()) {
            for &[re, im] in &m.spectrum {
                w.serialize(SpectrumRow {
                    channel: m.index,
                    re,
                    im,
                })
                .map_err(csv_error)?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("spectrum.csv"), e))?;

        write_cdf_csv(create("cdf.csv")?, &self.aggregate.cdf)?;
        write_quantiles_csv(create("quantiles.csv")?, &self.aggregate.quantiles)
    }
}

#[derive(Serialize)]
struct EigenRow {
    member: usize,
    index: usize,
    value: f64,
}

#[derive(Serialize)]
struct ProbabilityRow {
    member: usize,
    outcome: usize,
    probability: f64,
}

#[derive(Serialize)]
struct SpectrumRow {
    channel: usize,
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileDelta {
    pub level: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub ks_two_sample: f64,
    pub quantile_deltas: Vec<QuantileDelta>,
    pub variance_delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_gap_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_second_modulus_delta: Option<f64>,
}

/// Two-sample comparison of pooled outputs; deltas are `b - a`.
pub fn compare_reports(a: &BenchmarkReport, b: &BenchmarkReport) -> Result<Comparison> {
    let (ca, cb) = (&a.config, &b.config);
    if ca.n_system != cb.n_system || ca.rank != cb.rank {
        return Err(Error::IncompatibleConfigs(format!(
            "(N, r) = ({}, {}) vs ({}, {})",
            ca.system_dim(),
            ca.rank,
            cb.system_dim(),
            cb.rank
        )));
    }
    let (da, db) = (a.output_distribution()?, b.output_distribution()?);
    let delta = |x: Option<f64>, y: Option<f64>| x.zip(y).map(|(x, y)| y - x);
    Ok(Comparison {
        ks_two_sample: ks_distance(&da, &db),
        quantile_deltas: levels()
            .map(|level| {
                let (qa, qb) = (da.quantile(level), db.quantile(level));
                QuantileDelta {
                    level,
                    a: qa,
                    b: qb,
                    delta: qb - qa,
                }
            })
            .collect(),
        variance_delta: db.moments().variance - da.moments().variance,
        mean_gap_delta: delta(a.aggregate.mean_gap, b.aggregate.mean_gap),
        mean_second_modulus_delta: delta(a.aggregate.mean_second_modulus, b.aggregate.mean_second_modulus),
    })
}
