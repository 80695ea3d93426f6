//! Kernel classifier trained through GaBP.
//!
//! Training solves `(D + loading) h = 1` with `D_ij = y_i y_j K(x_i, x_j)`;
//! the box and equality constraints of the SVM dual are not enforced, so the
//! result is the kernel ridge-regression style solution. A query is scored as
//! `sum_i h_i y_i K(x_i, x)`, with the bias carried by the kernel offset.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabp::{self, GabpProblem, GabpSolution, Schedule, Variant};
use crate::kernels::{common_dim, KernelSpec, RowBlock, SamplePoint};
use crate::numerics::{
    check_dim, diagnose_convergence, direct_solve, ConvergenceDiagnosis, SymmetricMatrix,
    Vector, DEFAULT_POWER_ITERS,
};

/// Slack added on top of the off-diagonal row sum by
/// [`LoadingMode::EnforceDominance`].
pub const DOMINANCE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadingMode {
    /// Add `1/C` to every diagonal entry (2-norm soft margin).
    #[default]
    OneOverC,
    /// Add `max(1/C, sum_{j != i} |D_ij| - D_ii + slack)` so every row is
    /// strictly diagonally dominant.
    EnforceDominance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SupportThreshold {
    /// Fraction of `max_i |h_i|`.
    Relative(f64),
    Absolute(f64),
}

impl Default for SupportThreshold {
    fn default() -> Self {
        SupportThreshold::Relative(1e-5)
    }
}

impl SupportThreshold {
    pub fn resolve(&self, weights: &[f64]) -> f64 {
        match *self {
            SupportThreshold::Absolute(t) => t,
            SupportThreshold::Relative(r) => {
                r * weights.iter().fold(0.0f64, |m, h| m.max(h.abs()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub schedule: Schedule,
    pub variant: Variant,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: gabp::DEFAULT_EPSILON,
            max_iters: gabp::DEFAULT_MAX_ITERS,
            schedule: Schedule::Synchronous,
            variant: Variant::Broadcast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kernel: KernelSpec,
    pub cost_c: f64,
    pub solver: SolverConfig,
    pub loading: LoadingMode,
    pub sv_threshold: SupportThreshold,
}

impl TrainConfig {
    pub fn new(kernel: KernelSpec) -> Self {
        TrainConfig {
            kernel,
            cost_c: 1.0,
            solver: SolverConfig::default(),
            loading: LoadingMode::default(),
            sv_threshold: SupportThreshold::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cost_c > 0.0) {
            return Err(Error::InvalidConfig(format!("C must be > 0, got {}", self.cost_c)));
        }
        let t = match self.sv_threshold {
            SupportThreshold::Relative(t) | SupportThreshold::Absolute(t) => t,
        };
        if !(t >= 0.0) {
            return Err(Error::InvalidConfig(format!("support threshold must be >= 0, got {t}")));
        }
        if !(self.solver.epsilon > 0.0) || self.solver.max_iters == 0 {
            return Err(Error::InvalidConfig("epsilon must be > 0 and max_iters >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDiagnostics {
    pub iterations_used: usize,
    pub converged: bool,
    pub final_delta: f64,
    pub loaded_matrix: ConvergenceDiagnosis,
    pub loading: LoadingMode,
    pub cost_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub weights: Vector,
    pub support_indices: Vec<usize>,
    pub training_points: Vec<SamplePoint>,
    pub kernel: KernelSpec,
    pub diagnostics: TrainingDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub decision_values: Vec<f64>,
    pub labels: Vec<f64>,
    /// Present when every query carries a label.
    pub error_rate: Option<f64>,
}

pub(crate) fn class_label(point: &SamplePoint, index: usize) -> Result<f64> {
    match point.label {
        None => Err(Error::MissingLabel { index }),
        Some(y) if y == 1.0 || y == -1.0 => Ok(y),
        Some(value) => Err(Error::InvalidLabel { index, value }),
    }
}

pub(crate) fn class_labels(points: &[SamplePoint]) -> Result<Vec<f64>> {
    points.iter().enumerate().map(|(i, p)| class_label(p, i)).collect()
}

#[inline]
pub fn sign_label(score: f64) -> f64 {
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn build_dual_matrix(points: &[SamplePoint], kernel: &KernelSpec) -> Result<SymmetricMatrix> {
    if points.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let y = class_labels(points)?;
    common_dim(points)?;
    SymmetricMatrix::from_fn(points.len(), |i, j| {
        y[i] * y[j] * kernel.eval_raw(&points[i].features, &points[j].features)
    })
}

/// Diagonal increment for row `i` of `D`.
pub(crate) fn loading_increment(row: &[f64], i: usize, cost_c: f64, mode: LoadingMode) -> f64 {
    let base = 1.0 / cost_c;
    match mode {
        LoadingMode::OneOverC => base,
        LoadingMode::EnforceDominance => {
            let off: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.abs())
                .sum();
            base.max(off - row[i] + DOMINANCE_SLACK)
        }
    }
}

pub fn apply_diagonal_loading(
    d: &SymmetricMatrix,
    cost_c: f64,
    mode: LoadingMode,
) -> Result<SymmetricMatrix> {
    let increments: Vec<f64> = (0..d.order())
        .map(|i| loading_increment(d.row(i), i, cost_c, mode))
        .collect();
    d.with_diagonal_added(&increments)
}

/// Rows `range` of the loaded dual matrix, computed only from the data.
pub fn loaded_dual_rows(
    points: &[SamplePoint],
    config: &TrainConfig,
    range: Range<usize>,
) -> Result<RowBlock> {
    let y = class_labels(points)?;
    let mut block = crate::kernels::assemble_kernel_rows(&config.kernel, points, range)?;
    let n = points.len();
    for i in block.range() {
        let local = i - block.start;
        let row = &mut block.entries[local * n..(local + 1) * n];
        for (j, v) in row.iter_mut().enumerate() {
            *v *= y[i] * y[j];
        }
        row[i] += loading_increment(row, i, config.cost_c, config.loading);
    }
    Ok(block)
}

pub(crate) fn support_set(weights: &[f64], threshold: &SupportThreshold) -> Vec<usize> {
    let t = threshold.resolve(weights);
    weights
        .iter()
        .enumerate()
        .filter(|(_, h)| h.abs() > t)
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn finish_model(
    points: &[SamplePoint],
    config: &TrainConfig,
    solution: GabpSolution,
    loaded_matrix: ConvergenceDiagnosis,
) -> Result<TrainedModel> {
    if !solution.converged {
        return Err(Error::GabpNotConverged(Box::new(solution)));
    }
    let weights = Vector::new(solution.means)?;
    Ok(TrainedModel {
        support_indices: support_set(&weights, &config.sv_threshold),
        weights,
        training_points: points.to_vec(),
        kernel: config.kernel,
        diagnostics: TrainingDiagnostics {
            iterations_used: solution.iterations_used,
            converged: solution.converged,
            final_delta: solution.final_delta,
            loaded_matrix,
            loading: config.loading,
            cost_c: config.cost_c,
        },
    })
}

pub(crate) fn check_trainable(points: &[SamplePoint], config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if points.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "training needs at least 2 points, got {}",
            points.len()
        )));
    }
    class_labels(points)?;
    common_dim(points)?;
    Ok(())
}

/// The loaded system `(D + loading, 1)` that training hands to GaBP.
pub fn training_problem(points: &[SamplePoint], config: &TrainConfig) -> Result<GabpProblem> {
    check_trainable(points, config)?;
    let loaded = apply_diagonal_loading(
        &build_dual_matrix(points, &config.kernel)?,
        config.cost_c,
        config.loading,
    )?;
    Ok(GabpProblem::new(loaded, Vector::ones(points.len()))?
        .with_epsilon(config.solver.epsilon)
        .with_max_iters(config.solver.max_iters)
        .with_schedule(config.solver.schedule)
        .with_variant(config.solver.variant))
}

pub fn train(points: &[SamplePoint], config: &TrainConfig) -> Result<TrainedModel> {
    let problem = training_problem(points, config)?;
    let diagnosis = diagnose_convergence(&problem.matrix, DEFAULT_POWER_ITERS);
    let solution = gabp::solve(&problem)?;
    finish_model(points, config, solution, diagnosis)
}

impl TrainedModel {
    pub fn feature_dim(&self) -> usize {
        self.training_points.first().map_or(0, SamplePoint::dim)
    }

    /// Score of one feature vector, summing over `indices`.
    fn score(&self, x: &[f64], indices: impl Iterator<Item = usize>) -> f64 {
        indices
            .map(|i| {
                let p = &self.training_points[i];
                // labels were validated at training time
                let y = p.label.unwrap_or(1.0);
                self.weights[i] * y * self.kernel.eval_raw(&p.features, x)
            })
            .sum()
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.feature_dim(), x.len())?;
        Ok(self.score(x, 0..self.weights.len()))
    }
}

/// Scores every query with the full weight vector.
pub fn predict(model: &TrainedModel, queries: &[SamplePoint]) -> Result<PredictionReport> {
    predict_with(model, queries, false)
}

/// `support_only` restricts the sum to `model.support_indices`.
pub fn predict_with(
    model: &TrainedModel,
    queries: &[SamplePoint],
    support_only: bool,
) -> Result<PredictionReport> {
    let dim = model.feature_dim();
    let mut decision_values = Vec::with_capacity(queries.len());
    for q in queries {
        check_dim(dim, q.dim())?;
        let s = if support_only {
            model.score(&q.features, model.support_indices.iter().copied())
        } else {
            model.score(&q.features, 0..model.weights.len())
        };
        decision_values.push(s);
    }
    let labels: Vec<f64> = decision_values.iter().map(|&s| sign_label(s)).collect();
    let error_rate = if !queries.is_empty() && queries.iter().all(|q| q.label.is_some()) {
        let wrong = queries
            .iter()
            .zip(&labels)
            .filter(|(q, &l)| q.label != Some(l))
            .count();
        Some(wrong as f64 / queries.len() as f64)
    } else {
        None
    };
    Ok(PredictionReport {
        decision_values,
        labels,
        error_rate,
    })
}

fn regression_targets(points: &[SamplePoint]) -> Result<Vec<f64>> {
    points
        .iter()
        .enumerate()
        .map(|(index, p)| p.label.ok_or(Error::MissingLabel { index }))
        .collect()
}

/// Kernel ridge regression dual weights `alpha = 2 lambda (K + lambda I)^-1 y`.
pub fn krr_closed_form(points: &[SamplePoint], lambda: f64, kernel: &KernelSpec) -> Result<Vector> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
    }
    if points.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let y = Vector::new(regression_targets(points)?)?;
    let k = crate::kernels::kernel_matrix(kernel, points)?;
    let shifted = k.with_diagonal_added(&vec![lambda; points.len()])?;
    let x = direct_solve(&shifted, &y)?;
    Vector::new(x.iter().map(|v| 2.0 * lambda * v).collect())
}

/// `f(x) = y^T (K + lambda I)^-1 k(x)`, evaluated from the dual weights.
pub fn krr_predict(
    points: &[SamplePoint],
    alpha: &Vector,
    lambda: f64,
    kernel: &KernelSpec,
    x: &Vector,
) -> Result<f64> {
    check_dim(points.len(), alpha.len())?;
    let mut f = 0.0;
    for (p, a) in points.iter().zip(alpha.iter()) {
        check_dim(p.dim(), x.len())?;
        f += a / (2.0 * lambda) * kernel.eval_raw(&p.features, x);
    }
    Ok(f)
}
