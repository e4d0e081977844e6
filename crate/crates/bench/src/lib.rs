//! Fixtures shared by the benchmarks.

use lpplab::{LatticeSpec, Marginal, WeightField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A unit-exponential field on the size-`n` triangle.
pub fn exponential_field(n: usize, seed: u64) -> WeightField {
    let f = Marginal::exponential(1.0).expect("valid rate");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WeightField::from_fn(n, |_| f.draw(&mut rng))
}

pub fn lattices(n: usize) -> [LatticeSpec; 3] {
    [
        LatticeSpec::line(n).expect("n >= 1"),
        LatticeSpec::complete(n).expect("n >= 1"),
        LatticeSpec::point(n, n.div_ceil(2)).expect("n >= 1"),
    ]
}
