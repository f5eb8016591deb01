//! Seedable, splittable random streams.
//!
//! Every stochastic routine in the crate draws from a counter-based ChaCha
//! stream derived from a single master seed: replication `k` uses stream
//! `k`, so replications are mutually independent and can run in parallel
//! while staying bit-reproducible.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Factory for independent per-replication generators.
#[derive(Debug, Clone, Copy)]
pub struct SeedStream {
    master: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Independent generator for stream `index`.
    pub fn stream(&self, index: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master);
        rng.set_stream(index);
        rng
    }
}

/// Draw an index from a probability vector by inverse CDF.
///
/// Tolerates pmf sums a few ulps away from one by assigning the tail mass
/// to the last positive entry.
pub fn sample_pmf(rng: &mut impl Rng, pmf: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in pmf.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}
