//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use gabp_core::synth::{dominant_spd, uniform_vector};
use gabp_core::{SymmetricMatrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss-Jordan inverse with partial pivoting, on plain row-major storage.
pub fn gauss_jordan_inverse(a: &[f64], n: usize) -> Vec<f64> {
    let w = 2 * n;
    let mut m = vec![0.0; n * w];
    for i in 0..n {
        m[i * w..i * w + n].copy_from_slice(&a[i * n..(i + 1) * n]);
        m[i * w + n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * w + col].abs().total_cmp(&m[s * w + col].abs()))
            .unwrap();
        for k in 0..w {
            m.swap(col * w + k, pivot * w + k);
        }
        let d = m[col * w + col];
        assert!(d != 0.0, "singular matrix in oracle");
        for k in 0..w {
            m[col * w + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * w + col];
                if f != 0.0 {
                    for k in 0..w {
                        m[r * w + k] -= f * m[col * w + k];
                    }
                }
            }
        }
    }
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n..(i + 1) * n].copy_from_slice(&m[i * w + n..(i + 1) * w]);
    }
    inv
}

/// `W^-1 b` through the explicit inverse.
pub fn oracle_solve(w: &SymmetricMatrix, b: &[f64]) -> Vec<f64> {
    let n = w.order();
    let inv = gauss_jordan_inverse(w.as_row_major(), n);
    (0..n)
        .map(|i| (0..n).map(|j| inv[i * n + j] * b[j]).sum())
        .collect()
}

pub fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Seeded dominant SPD system of order `n` with a random density.
pub fn dominant_system(seed: u64, n: usize) -> (SymmetricMatrix, Vector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = rng.gen_range(0.05..=1.0);
    let w = dominant_spd(&mut rng, n, density, 0.05..0.5);
    let b = uniform_vector(&mut rng, n, 10.0);
    (w, b)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
