//! Gaussian belief propagation (GaBP) for symmetric linear systems, a kernel
//! classifier trained by solving its dual system with GaBP, and a
//! row-partitioned multi-worker runtime where each round only exchanges
//! `2n` aggregated scalars.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dist;
pub mod error;
pub mod gabp;
pub mod kernels;
pub mod numerics;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
pub use gabp::{GabpProblem, GabpSolution, GabpState, Schedule, Variant};
pub use kernels::{KernelFamily, KernelSpec, SamplePoint};
pub use numerics::{ConvergenceDiagnosis, SymmetricMatrix, Vector};
