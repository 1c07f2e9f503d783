//! Deterministic seed derivation.
//!
//! Every source of randomness in the crate is a `ChaCha8Rng` whose seed is
//! derived from a single run seed plus a purpose string (and optionally an
//! index). The derivation is a fixed FNV-1a fold over the parent seed bytes
//! and the purpose bytes, so results do not depend on the platform, the Rust
//! version, or how work is split across threads: a parallel run and a serial
//! run draw from identical streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash = FNV_OFFSET;
    for b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Derive a child seed for a named purpose.
pub fn derive(parent: u64, purpose: &str) -> u64 {
    fnv1a(parent.to_le_bytes().into_iter().chain(purpose.bytes()))
}

/// Derive a child seed for a named purpose plus an index (fold id, blob id,
/// row id, ...).
pub fn derive_indexed(parent: u64, purpose: &str, index: u64) -> u64 {
    fnv1a(
        parent
            .to_le_bytes()
            .into_iter()
            .chain(purpose.bytes())
            .chain(index.to_le_bytes()),
    )
}

/// RNG for a derived seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
