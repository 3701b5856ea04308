use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::stats::EmpiricalDistribution;
use super::MPParams;
use crate::error::{Error, Result};
use crate::linalg::{sample_ginibre, DensityMatrix};
use crate::rng::{lane, RngStream, StreamId};
use crate::scalar::Real;

pub const DEFAULT_REFERENCE_SAMPLES: usize = 1_000_000;
const MIN_REFERENCE_SAMPLES: usize = 10_000;
const CHUNK: usize = 4096;
const MAGIC: &[u8; 8] = b"RMTREF1\0";

/// `W = G G^dagger / Tr(G G^dagger)` for an `N x N r` Ginibre `G`.
pub fn sample_fixed_trace_wishart<T: Real>(n: usize, r: usize, rng: &mut RngStream) -> Result<DensityMatrix<T>> {
    if n == 0 || r == 0 {
        return Err(Error::InvalidParams(format!("Wishart needs N, r >= 1, got N={n}, r={r}")));
    }
    let g = sample_ginibre::<T>(n, n * r, rng);
    let w = g.matmul_adjoint(&g);
    let tr = w.trace().re;
    Ok(DensityMatrix::new_unchecked(w.scale_real(T::one() / tr).hermitian_part()))
}

/// `<0|W|0>` of a fixed-trace Wishart matrix, computed from the Ginibre
/// entries without forming `W`.
pub fn sample_wishart_diagonal(n: usize, r: usize, rng: &mut RngStream) -> f64 {
    let cols = n * r;
    let mut first = 0.0;
    let mut total = 0.0;
    for row in 0..n {
        let mut acc = 0.0;
        for _ in 0..cols {
            let (re, im) = (rng.normal(), rng.normal());
            acc += 0.5 * (re * re + im * im);
        }
        if row == 0 {
            first = acc;
        }
        total += acc;
    }
    first / total
}

/// Monte Carlo law of a single output probability of a random steady state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOutputDistribution {
    pub params: MPParams<f64>,
    pub sample_count: usize,
    pub seed: StreamId,
    distribution: EmpiricalDistribution,
}

impl ReferenceOutputDistribution {
    /// Sorted samples.
    pub fn samples(&self) -> &[f64] {
        self.distribution.samples()
    }

    pub fn distribution(&self) -> &EmpiricalDistribution {
        &self.distribution
    }

    pub fn key(&self) -> ReferenceKey {
        ReferenceKey {
            n: self.params.n,
            r: self.params.r,
            seed: self.seed.master_seed,
            sample_count: self.sample_count,
        }
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(40 + 8 * self.sample_count);
        bytes.extend_from_slice(MAGIC);
        for v in [self.params.n, self.params.r, self.sample_count] {
            bytes.extend_from_slice(&(v as u64).to_le_bytes());
        }
        bytes.extend_from_slice(&self.seed.master_seed.to_le_bytes());
        for s in self.samples() {
            bytes.extend_from_slice(&s.to_le_bytes());
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string()));
        if bytes.len() < 40 || &bytes[..8] != MAGIC {
            return Err(bad("not a reference cache file"));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().expect("8 bytes"));
        let (n, r, count, seed) = (word(0) as usize, word(1) as usize, word(2) as usize, word(3));
        if bytes.len() != 40 + 8 * count {
            return Err(bad("truncated reference cache file"));
        }
        let samples: Vec<f64> = bytes[40..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if samples.windows(2).any(|w| !(w[0] <= w[1])) || samples.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(bad("reference samples are not sorted probabilities"));
        }
        Ok(ReferenceOutputDistribution {
            params: MPParams::new(n, r)?,
            sample_count: count,
            seed: reference_stream(seed, 0),
            distribution: EmpiricalDistribution::from_sorted(samples)?,
        })
    }
}

impl AsRef<EmpiricalDistribution> for ReferenceOutputDistribution {
    fn as_ref(&self) -> &EmpiricalDistribution {
        &self.distribution
    }
}

fn reference_stream(seed: u64, chunk: u64) -> StreamId {
    StreamId {
        master_seed: seed,
        stream_index: chunk,
        lane: lane::REFERENCE,
    }
}

/// Draws `sample_count` diagonal entries. Samples are generated in fixed-size
/// chunks, chunk `c` on stream `c` of the seed's reference lane, so the result
/// does not depend on the rayon pool width.
pub fn reference_output_distribution(
    params: &MPParams<f64>,
    sample_count: usize,
    seed: u64,
) -> Result<ReferenceOutputDistribution> {
    build_reference(params, sample_count, seed, true)
}

fn build_reference(
    params: &MPParams<f64>,
    sample_count: usize,
    seed: u64,
    parallel: bool,
) -> Result<ReferenceOutputDistribution> {
    if sample_count < MIN_REFERENCE_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "reference needs at least {MIN_REFERENCE_SAMPLES} samples, got {sample_count}"
        )));
    }
    let (n, r) = (params.n, params.r);
    let chunks = sample_count.div_ceil(CHUNK);
    let chunk = |c: usize| -> Vec<f64> {
        let len = CHUNK.min(sample_count - c * CHUNK);
        let mut rng = RngStream::from_id(reference_stream(seed, c as u64));
        (0..len).map(|_| sample_wishart_diagonal(n, r, &mut rng)).collect()
    };
    let parts: Vec<Vec<f64>> = if parallel {
        (0..chunks).into_par_iter().map(chunk).collect()
    } else {
        (0..chunks).map(chunk).collect()
    };
    let samples: Vec<f64> = parts.into_iter().flatten().collect();
    Ok(ReferenceOutputDistribution {
        params: *params,
        sample_count,
        seed: reference_stream(seed, 0),
        distribution: EmpiricalDistribution::new(samples)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReferenceKey {
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub sample_count: usize,
}

impl ReferenceKey {
    pub fn file_name(&self) -> String {
        format!("ref_N{}_r{}_seed{}_M{}.bin", self.n, self.r, self.seed, self.sample_count)
    }
}

type Slot = Arc<OnceLock<Arc<ReferenceOutputDistribution>>>;

/// Build-once cache of reference distributions, optionally backed by a directory.
///
/// Concurrent requests for one key block on a single computation.
#[derive(Debug, Default)]
pub struct ReferenceCache {
    dir: Option<PathBuf>,
    slots: Mutex<HashMap<ReferenceKey, Slot>>,
}

impl ReferenceCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache {
            dir: Some(dir.into()),
            slots: Mutex::default(),
        }
    }

    /// Process-wide in-memory cache.
    pub fn shared() -> &'static ReferenceCache {
        static SHARED: OnceLock<ReferenceCache> = OnceLock::new();
        SHARED.get_or_init(ReferenceCache::in_memory)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn get(&self, key: ReferenceKey) -> Result<Arc<ReferenceOutputDistribution>> {
        let params = MPParams::new(key.n, key.r)?;
        if key.sample_count < MIN_REFERENCE_SAMPLES {
            return Err(Error::InvalidParams(format!(
                "reference needs at least {MIN_REFERENCE_SAMPLES} samples"
            )));
        }
        let slot = {
            let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
            slots.entry(key).or_default().clone()
        };
        let path = self.dir.as_ref().map(|d| d.join(key.file_name()));
        let mut computed = false;
        let value = slot.get_or_init(|| {
            if let Some(found) = path.as_deref().and_then(|p| ReferenceOutputDistribution::read_from(p).ok()) {
                if found.key() == key {
                    return Arc::new(found);
                }
            }
            computed = true;
            // A rayon worker blocked here could steal a job that waits on this
            // same slot, so build sequentially when already inside a pool.
            let built = if rayon::current_thread_index().is_some() {
                build_reference(&params, key.sample_count, key.seed, false)
            } else {
                build_reference(&params, key.sample_count, key.seed, true)
            };
            Arc::new(built.expect("parameters validated above"))
        });
        if let (true, Some(dir), Some(path)) = (computed, &self.dir, &path) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            value.write_to(path)?;
        }
        Ok(value.clone())
    }
}
