//! Reproducible random streams.
//!
//! Every stream is a ChaCha20 generator keyed by `(master_seed, lane)` and
//! positioned on the 64-bit ChaCha stream `stream_index`. Members of an
//! ensemble use `stream_index = member`, and independent purposes inside one
//! member (circuit sampling, shot sampling, initial states) use distinct
//! lanes, so changing e.g. the shot count never perturbs the sampled circuits.
//! Results therefore do not depend on how work is split across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Identifies a stream without carrying generator state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamId {
    pub master_seed: u64,
    pub stream_index: u64,
    #[serde(default)]
    pub lane: u64,
}

/// Well-known lanes.
pub mod lane {
    pub const MAP: u64 = 0;
    pub const SHOTS: u64 = 1;
    pub const INITIAL_STATE: u64 = 2;
    pub const TRAJECTORY: u64 = 3;
    pub const REFERENCE: u64 = 4;
}

#[derive(Debug, Clone)]
pub struct RngStream {
    id: StreamId,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self::from_id(StreamId {
            master_seed,
            stream_index,
            lane: 0,
        })
    }

    pub fn from_id(id: StreamId) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&id.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&id.lane.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(id.stream_index);
        RngStream { id, rng }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    /// A fresh stream on another lane of the same `(master_seed, stream_index)`.
    pub fn lane(&self, lane: u64) -> RngStream {
        RngStream::from_id(StreamId { lane, ..self.id })
    }

    /// A fresh stream with a different index on the same seed and lane.
    pub fn substream(&self, stream_index: u64) -> RngStream {
        RngStream::from_id(StreamId { stream_index, ..self.id })
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
