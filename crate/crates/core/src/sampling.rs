//! Deterministic sample generation.
//!
//! Fits and verification batches draw their points from Kronecker (golden-
//! ratio style) low-discrepancy sequences so they are reproducible and well
//! spread; "random" test cases use ChaCha streams with seeds derived from a
//! global seed and a per-check label, which keeps concurrent checks
//! independent of scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 step, the usual seed scrambler.
fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a stream seed from a base seed and a label.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ base;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut s = h;
    splitmix(&mut s)
}

/// ChaCha stream for a named check.
pub fn rng_for(base: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, label))
}

/// Kronecker sequence in `[0,1)^D` with square-root irrational increments,
/// offset deterministically by the seed.
#[derive(Clone, Debug)]
pub struct Kronecker<const D: usize> {
    alpha: [f64; D],
    offset: [f64; D],
    index: u64,
}

const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];

impl<const D: usize> Kronecker<D> {
    pub fn new(seed: u64) -> Self {
        assert!(D <= PRIMES.len());
        let mut s = seed ^ 0xa5a5a5a5a5a5a5a5;
        let mut alpha = [0.0; D];
        let mut offset = [0.0; D];
        for (d, a) in alpha.iter_mut().enumerate() {
            *a = PRIMES[d].sqrt().fract();
        }
        for o in offset.iter_mut() {
            *o = (splitmix(&mut s) >> 11) as f64 / (1u64 << 53) as f64;
        }
        Kronecker { alpha, offset, index: 0 }
    }

    pub fn next_point(&mut self) -> [f64; D] {
        self.index += 1;
        let k = self.index as f64;
        let mut out = [0.0; D];
        for (d, o) in out.iter_mut().enumerate() {
            *o = (self.offset[d] + k * self.alpha[d]).fract();
        }
        out
    }
}
