//! Random streams and space-filling designs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::objectives::SearchDomain;

/// Deterministic, portable random stream used throughout.
pub type RandomStream = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed for replication `index` of a root seed.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Latin hypercube sample of `n` points in `domain`: every coordinate axis
/// is cut into `n` equal strata and each stratum holds exactly one point.
pub fn latin_hypercube(domain: &SearchDomain, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let mut points = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        let (lo, width) = (domain.lo()[j], domain.width(j));
        for (p, &stratum) in points.iter_mut().zip(&perm) {
            let u: f64 = rng.random();
            p[j] = (lo + (stratum as f64 + u) / n as f64 * width).min(domain.hi()[j]);
        }
    }
    points
}

/// One point drawn uniformly from `domain`.
pub fn uniform_point(domain: &SearchDomain, rng: &mut impl Rng) -> Vec<f64> {
    (0..domain.dim())
        .map(|j| {
            let u: f64 = rng.random();
            (domain.lo()[j] + u * domain.width(j)).min(domain.hi()[j])
        })
        .collect()
}
