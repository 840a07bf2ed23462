//! Seeded randomness keyed by stable identifiers, so results do not depend
//! on iteration or thread scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn key_hash(keys: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for key in keys {
        for b in key.bytes().chain(std::iter::once(0xff)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// A generator for `seed` on a stream selected by `keys`.
pub fn keyed_rng(seed: u64, keys: &[&str]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key_hash(keys));
    rng
}
