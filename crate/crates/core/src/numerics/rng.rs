//! Counter-based random streams.
//!
//! Every replicate draws from its own stream, addressed by
//! `(master_seed, stream_id)`. The generator is Philox4x32-10: the 64-bit key
//! is `splitmix64(master_seed)`, and the 128-bit counter holds the block index
//! in its low half and the stream id in its high half. Streams are therefore
//! derivable without sequential state, and two distinct `(stream, block)`
//! pairs never map to the same counter.

use rand::RngCore;
use serde::{Deserialize, Serialize};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// The splitmix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn philox_round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let p0 = u64::from(PHILOX_M0) * u64::from(ctr[0]);
    let p1 = u64::from(PHILOX_M1) * u64::from(ctr[2]);
    [
        ((p1 >> 32) as u32) ^ ctr[1] ^ key[0],
        p1 as u32,
        ((p0 >> 32) as u32) ^ ctr[3] ^ key[1],
        p0 as u32,
    ]
}

/// One Philox4x32 block with ten rounds.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    ctr = philox_round(ctr, key);
    for _ in 1..10 {
        key[0] = key[0].wrapping_add(PHILOX_W0);
        key[1] = key[1].wrapping_add(PHILOX_W1);
        ctr = philox_round(ctr, key);
    }
    ctr
}

/// Address of one replicate stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedLineage {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Stream id used by the experiment runner for replicate `replicate` at path length `n`.
    pub fn for_replicate(master_seed: u64, n: usize, replicate: u64) -> Self {
        Self::new(master_seed, ((n as u64) << 32) | (replicate & 0xFFFF_FFFF))
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::new(*self)
    }
}

/// A Philox stream positioned at block zero.
#[derive(Debug, Clone)]
pub struct StreamRng {
    key: [u32; 2],
    stream: [u32; 2],
    block: u64,
    buffer: [u64; 2],
    cursor: usize,
}

impl StreamRng {
    pub fn new(lineage: SeedLineage) -> Self {
        let k = splitmix64(lineage.master_seed);
        Self {
            key: [k as u32, (k >> 32) as u32],
            stream: [lineage.stream_id as u32, (lineage.stream_id >> 32) as u32],
            block: 0,
            buffer: [0; 2],
            cursor: 2,
        }
    }

    #[inline]
    fn refill(&mut self) {
        let out = philox4x32_10(
            [
                self.block as u32,
                (self.block >> 32) as u32,
                self.stream[0],
                self.stream[1],
            ],
            self.key,
        );
        self.buffer = [
            u64::from(out[0]) | (u64::from(out[1]) << 32),
            u64::from(out[2]) | (u64::from(out[3]) << 32),
        ];
        self.block = self.block.wrapping_add(1);
        self.cursor = 0;
    }

    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    #[inline]
    pub fn open_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        if self.cursor == 2 {
            self.refill();
        }
        let v = self.buffer[self.cursor];
        self.cursor += 1;
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
