//! Reproducible random streams. Every replicate draws from its own ChaCha
//! stream keyed by `(seed, replicate)`, so results do not depend on how the
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// The stream for one replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// A seed for an auxiliary experiment that must not share streams with `seed`.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f` once per replicate on the current rayon pool; output is in
/// replicate order.
pub fn replicate<T, F>(seed: u64, reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, u64) -> T + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            f(&mut rng, r)
        })
        .collect()
}
