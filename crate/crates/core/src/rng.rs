//! Counter-based random streams.
//!
//! Every random draw in a realization comes from a ChaCha8 stream addressed by
//! `(realization, kind, index)` under a key derived from the master seed. The
//! stream position can be saved and restored, which lets a trajectory segment
//! be replayed bit-for-bit from any checkpoint.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tag of a stream; part of the stream address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamKind {
    /// Survivor choice during selection-mutation.
    Selection = 1,
    /// Initial-condition draws on the surface C.
    Start = 2,
    /// Noise driving a trajectory segment.
    Path = 3,
    /// Brownian-bridge refinement of a branch point.
    Bridge = 4,
    /// Direct Monte-Carlo trajectories.
    Direct = 5,
}

const REALIZATION_BITS: u32 = 24;
const INDEX_BITS: u32 = 32;

/// Address of one independent stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamId(u64);

impl StreamId {
    pub fn new(realization: u64, kind: StreamKind, index: u64) -> Self {
        assert!(realization < (1 << REALIZATION_BITS), "realization index {realization} too large");
        assert!(index < (1 << INDEX_BITS), "stream index {index} too large");
        StreamId((realization << (INDEX_BITS + 8)) | ((kind as u64) << INDEX_BITS) | index)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn index(self) -> u64 {
        self.0 & ((1 << INDEX_BITS) - 1)
    }
}

/// Hands out positioned ChaCha8 streams for a master seed.
#[derive(Clone, Debug)]
pub struct StreamFactory {
    base: ChaCha8Rng,
    seed: u64,
}

impl StreamFactory {
    pub fn new(master_seed: u64) -> Self {
        StreamFactory { base: ChaCha8Rng::seed_from_u64(master_seed), seed: master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.seed
    }

    /// Fresh stream positioned at word 0.
    pub fn stream(&self, id: StreamId) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(id.raw());
        rng.set_word_pos(0);
        rng
    }

    /// Stream positioned at a previously recorded word offset.
    pub fn stream_at(&self, id: StreamId, word_pos: u128) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(id.raw());
        rng.set_word_pos(word_pos);
        rng
    }
}
