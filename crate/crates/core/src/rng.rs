//! Deterministic random-number streams.
//!
//! Every random quantity in the toolkit is drawn from a counter-based
//! generator keyed by `(master_seed, experiment, replica)`. Distinct keys
//! give statistically independent substreams, replicas can be generated in
//! any order (or in parallel) without coordination, and a rerun with the
//! same key reproduces the exact draw sequence.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};
use serde::{Deserialize, Serialize};

/// Identifies one substream: which experiment and which replica within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub experiment: u32,
    pub replica: u32,
}

impl StreamId {
    pub fn new(experiment: u32, replica: u32) -> Self {
        Self {
            experiment,
            replica,
        }
    }

    /// Injective packing into the generator's 64-bit stream counter.
    fn packed(self) -> u64 {
        ((self.experiment as u64) << 32) | self.replica as u64
    }
}

/// One reproducible stream of randomness.
pub struct RngStream {
    inner: ChaCha8Rng,
    master_seed: u64,
    id: StreamId,
}

// splitmix64: expands the 64-bit master seed into key material.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl RngStream {
    /// The substream keyed by `(master_seed, id)`.
    pub fn substream(master_seed: u64, id: StreamId) -> Self {
        let mut state = master_seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(id.packed());
        Self {
            inner,
            master_seed,
            id,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = StandardNormal.sample(&mut self.inner);
        }
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill_standard_normal(&mut v);
        v
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        StandardUniform.sample(&mut self.inner)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.next_u64() % n
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// Factory for the replica substreams of one experiment.
#[derive(Debug, Clone, Copy)]
pub struct StreamFamily {
    master_seed: u64,
    experiment: u32,
}

impl StreamFamily {
    pub fn new(master_seed: u64, experiment: u32) -> Self {
        Self {
            master_seed,
            experiment,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&self, replica: u32) -> RngStream {
        RngStream::substream(self.master_seed, StreamId::new(self.experiment, replica))
    }
}
