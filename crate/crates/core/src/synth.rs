//! Seeded generators for test systems and synthetic classification data.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::kernels::SamplePoint;
use crate::numerics::{SymmetricMatrix, Vector};

/// Symmetric, strictly diagonally dominant matrix with positive diagonal
/// (hence SPD).
///
/// Off-diagonal entries have magnitude uniform in `[0.1, 1]` and a random
/// sign, each present with probability `density`. Keeping couplings away from
/// zero keeps mean messages, which scale like `1 / W_ij`, well above rounding
/// noise. Row `i` gets diagonal `(1 + m_i) * sum_j |W_ij| + 0.1`
/// with `m_i` uniform in `margin`.
pub fn dominant_spd<R: Rng>(
    rng: &mut R,
    n: usize,
    density: f64,
    margin: std::ops::Range<f64>,
) -> SymmetricMatrix {
    let mut off = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                let v = rng.gen_range(0.1..=1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                off[i * n + j] = v;
                off[j * n + i] = v;
            }
        }
    }
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = off[i * n..(i + 1) * n].iter().map(|v: &f64| v.abs()).sum();
            (1.0 + rng.gen_range(margin.clone())) * s + 0.1
        })
        .collect();
    SymmetricMatrix::from_fn(n, |i, j| if i == j { diag[i] } else { off[i * n + j] })
        .expect("finite by construction")
}

/// `B^T B + n I` with standard normal `B`; SPD but generally not diagonally
/// dominant.
pub fn gram_spd<R: Rng>(rng: &mut R, n: usize) -> SymmetricMatrix {
    let b: Vec<f64> = (0..n * n).map(|_| StandardNormal.sample(rng)).collect();
    SymmetricMatrix::from_fn(n, |i, j| {
        let g: f64 = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum();
        g + if i == j { n as f64 } else { 0.0 }
    })
    .expect("finite by construction")
}

pub fn uniform_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vector {
    Vector::new((0..n).map(|_| rng.gen_range(-scale..=scale)).collect()).expect("finite")
}

/// Two isotropic unit-variance Gaussian classes in `dim` dimensions with
/// means at `+separation` and `-separation` along the first axis, so each
/// mean sits `separation` standard deviations from the Bayes boundary
/// `x_0 = 0`. Labels alternate `+1, -1, ...`.
pub fn two_gaussians<R: Rng>(rng: &mut R, n: usize, dim: usize, separation: f64) -> Vec<SamplePoint> {
    assert!(dim >= 1, "two_gaussians needs at least one dimension");
    (0..n)
        .map(|k| {
            let y = if k % 2 == 0 { 1.0 } else { -1.0 };
            let features = (0..dim)
                .map(|d| {
                    let z: f64 = StandardNormal.sample(rng);
                    if d == 0 {
                        z + y * separation
                    } else {
                        z
                    }
                })
                .collect();
            SamplePoint::labeled(features, y).expect("finite")
        })
        .collect()
}
