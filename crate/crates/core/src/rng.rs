//! Reproducible random streams.
//!
//! Every replica draws from its own ChaCha8 stream. ChaCha is a
//! counter-mode generator: the (key, stream) pair fully determines the
//! output, so a replica's numbers do not depend on which worker thread
//! runs it or in which order replicas are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

/// SplitMix64 finaliser; used to spread user seeds over the key space.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed for a named purpose, e.g. one ensemble size inside a
/// sweep. Distinct `(seed, salt)` pairs give unrelated keys.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    mix64(mix64(seed) ^ salt.rotate_left(17))
}

/// Stream for replica `replica` under master seed `seed`.
pub fn replica_stream(seed: u64, replica: u64) -> ReplicaRng {
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&mix64(seed.wrapping_add(i as u64)).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}
