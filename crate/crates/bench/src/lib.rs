//! Fixtures shared by the benchmarks.

use gabp_core::synth::{dominant_spd, two_gaussians, uniform_vector};
use gabp_core::{GabpProblem, SamplePoint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded dominant system of order `n` with 20% dense couplings.
pub fn dominant_problem(n: usize, seed: u64) -> GabpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = dominant_spd(&mut rng, n, 0.2, 0.05..0.5);
    let b = uniform_vector(&mut rng, n, 1.0);
    GabpProblem::new(w, b).expect("generated system is valid")
}

pub fn classification_set(n: usize, seed: u64) -> Vec<SamplePoint> {
    two_gaussians(&mut ChaCha8Rng::seed_from_u64(seed), n, 5, 1.5)
}
