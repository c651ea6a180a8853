//! Deterministic RNG streams.
//!
//! Every unit of stochastic work (one chain iteration, one GOF replicate, one
//! RJ step) draws from its own ChaCha stream keyed by the run seed and a small
//! tuple of indices, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub(crate) const TAG_CHAIN: u64 = 0x6368_6169_6e00_0000;
pub(crate) const TAG_GOF: u64 = 0x676f_6600_0000_0000;
pub(crate) const TAG_RJ: u64 = 0x726a_0000_0000_0000;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG stream for `(seed, keys...)`.
pub fn stream(seed: u64, keys: &[u64]) -> StreamRng {
    let mut h = splitmix64(seed);
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k));
    }
    let mut bytes = [0u8; 32];
    let mut s = h;
    for chunk in bytes.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    StreamRng::from_seed(bytes)
}
