//! Deterministic random streams. Every consumer derives its own substream
//! from (root seed, purpose tag, indices), so work can be farmed out to
//! parallel workers without the schedule leaking into the results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for a (seed, tag, a, b) coordinate. The tag is folded in with FNV-1a
/// so distinct purposes never collide even at equal indices.
pub fn substream(seed: u64, tag: &str, a: u64, b: u64) -> ChaCha8Rng {
    let mut th: u64 = 0xcbf29ce484222325;
    for byte in tag.as_bytes() {
        th ^= *byte as u64;
        th = th.wrapping_mul(0x100000001b3);
    }
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&th.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
