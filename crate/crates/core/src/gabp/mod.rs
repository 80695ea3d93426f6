//! Gaussian belief propagation for `W x = b` with symmetric `W`.
//!
//! Each variable `i` is a node with scalar fixes `P_ii = W_ii` and
//! `mu_ii = b_i / W_ii`; node `i` sends `(P_ij, mu_ij)` to every `j` with
//! `W_ij != 0`. At the fixed point the marginal means equal `W^-1 b`.
//!
//! Two update rules are provided. [`Variant::Edge`] recomputes each message
//! from the incoming messages of the sender with the receiver excluded.
//! [`Variant::Broadcast`] has every node publish two aggregates
//! `(P~_i, mu~_i)` and recovers each excluded sum by subtraction, which is
//! what makes per-round communication linear in `n`.

mod state;

use serde::{Deserialize, Serialize};

pub use state::GabpState;
pub(crate) use state::{aggregate, broadcast_message, change};

use crate::error::{Error, Result};
use crate::numerics::{check_dim, inf_norm, SymmetricMatrix, Vector};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Flooding: every message of a round is computed from the previous
    /// round's messages.
    #[default]
    Synchronous,
    /// Node-by-node in index order, each node reading the newest messages.
    AsynchronousSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Edge,
    Broadcast,
}

#[derive(Debug, Clone)]
pub struct GabpProblem {
    pub matrix: SymmetricMatrix,
    pub rhs: Vector,
    pub epsilon: f64,
    pub max_iters: usize,
    pub schedule: Schedule,
    pub variant: Variant,
}

impl GabpProblem {
    pub fn new(matrix: SymmetricMatrix, rhs: Vector) -> Result<Self> {
        let problem = GabpProblem {
            matrix,
            rhs,
            epsilon: DEFAULT_EPSILON,
            max_iters: DEFAULT_MAX_ITERS,
            schedule: Schedule::default(),
            variant: Variant::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.matrix.order(), self.rhs.len())?;
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if let Some(row) = (0..self.matrix.order()).find(|&i| self.matrix.get(i, i) == 0.0) {
            return Err(Error::ZeroDiagonal { row });
        }
        Ok(())
    }
}

/// Result of a run. `means` and `precisions` are whatever the last sweep
/// produced; they may be non-finite when `converged` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GabpSolution {
    pub means: Vec<f64>,
    pub precisions: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub final_delta: f64,
}

impl GabpSolution {
    pub(crate) fn from_state(state: &GabpState<'_>, converged: bool) -> Self {
        let (means, precisions) = state.marginals();
        GabpSolution {
            means,
            precisions,
            iterations_used: state.iteration(),
            converged,
            final_delta: state.last_delta(),
        }
    }
}

/// Runs the schedule and variant configured on `problem`, calling `observe`
/// after every sweep.
pub fn solve_with_observer(
    problem: &GabpProblem,
    mut observe: impl FnMut(&GabpState<'_>),
) -> Result<GabpSolution> {
    problem.validate()?;
    let mut state = GabpState::new(&problem.matrix, &problem.rhs)?;
    let mut converged = false;
    for _ in 0..problem.max_iters {
        let delta = state.sweep(problem.schedule, problem.variant)?;
        observe(&state);
        if delta <= problem.epsilon {
            converged = true;
            break;
        }
        if !delta.is_finite() {
            break;
        }
    }
    Ok(GabpSolution::from_state(&state, converged))
}

pub fn solve(problem: &GabpProblem) -> Result<GabpSolution> {
    solve_with_observer(problem, |_| {})
}

/// Synchronous flooding with per-edge messages.
pub fn run_sync(problem: &GabpProblem) -> Result<GabpSolution> {
    solve(&problem.clone().with_schedule(Schedule::Synchronous).with_variant(Variant::Edge))
}

/// In-place node-order sweep; uses the variant configured on `problem`.
pub fn run_async(problem: &GabpProblem) -> Result<GabpSolution> {
    solve(&problem.clone().with_schedule(Schedule::AsynchronousSweep))
}

/// Synchronous flooding with broadcast aggregates.
pub fn run_broadcast(problem: &GabpProblem) -> Result<GabpSolution> {
    solve(&problem.clone().with_schedule(Schedule::Synchronous).with_variant(Variant::Broadcast))
}

/// `|W x - b|_inf`
pub fn residual(w: &SymmetricMatrix, b: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(w.order(), b.len())?;
    let wx = w.mul_vec(x)?;
    Ok(inf_norm(&wx.iter().zip(b).map(|(a, c)| a - c).collect::<Vec<_>>()))
}
