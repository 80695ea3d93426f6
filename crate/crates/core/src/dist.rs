//! Row-partitioned execution of broadcast GaBP.
//!
//! Worker `r` owns a contiguous block of rows. For every owned node `i` it
//! keeps both directions of each edge, `i -> j` and `j -> i`, and it
//! materializes only its own matrix rows. A round is:
//!
//! 1. each worker forms `(P~_i, mu~_i)` for its owned nodes;
//! 2. one sum-allreduce of a `2n` vector publishes every aggregate;
//! 3. each worker recomputes both directions of its edges from the
//!    aggregates and its local copies;
//! 4. a small max-allreduce carries the largest message change.
//!
//! Reductions always add contributions in ascending rank order, so any worker
//! count yields the same floating-point values as the single-process
//! broadcast engine.

use std::ops::Range;
use std::sync::{Barrier, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabp::{aggregate, broadcast_message, change, GabpProblem, GabpSolution, Schedule, Variant};
use crate::kernels::{RowBlock, SamplePoint};
use crate::numerics::{check_dim, dot, ConvergenceDiagnosis, SymmetricMatrix, Vector};
use crate::svm::{check_trainable, finish_model, loaded_dual_rows, TrainConfig, TrainedModel};

/// Contiguous, balanced row ranges, one per worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerPartition {
    pub n: usize,
    pub ranges: Vec<Range<usize>>,
}

impl WorkerPartition {
    pub fn workers(&self) -> usize {
        self.ranges.len()
    }

    pub fn owner(&self, row: usize) -> Option<usize> {
        self.ranges.iter().position(|r| r.contains(&row))
    }
}

/// The first `n mod p` workers get one extra row.
pub fn make_partition(n: usize, p: usize) -> Result<WorkerPartition> {
    if p == 0 || p > n {
        return Err(Error::InvalidPartition { n, p });
    }
    let (base, extra) = (n / p, n % p);
    let mut ranges = Vec::with_capacity(p);
    let mut start = 0;
    for rank in 0..p {
        let len = base + usize::from(rank < extra);
        ranges.push(start..start + len);
        start += len;
    }
    Ok(WorkerPartition { n, ranges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryFootprint {
    pub rows_per_worker: usize,
    pub row_block_bytes: usize,
}

/// Largest per-worker row count and the size of its dense `f64` row block.
pub fn memory_footprint(n: usize, p: usize) -> Result<MemoryFootprint> {
    make_partition(n, p)?;
    let rows = n.div_ceil(p);
    Ok(MemoryFootprint {
        rows_per_worker: rows,
        row_block_bytes: rows * n * std::mem::size_of::<f64>(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReduceOp {
    Sum,
    Max,
}

fn reduce<V: AsRef<[f64]>>(contributions: &[V], op: ReduceOp) -> Result<Vec<f64>> {
    let Some(first) = contributions.first() else {
        return Err(Error::InvalidConfig("allreduce needs at least one contribution".into()));
    };
    let mut out = first.as_ref().to_vec();
    for c in &contributions[1..] {
        let c = c.as_ref();
        check_dim(out.len(), c.len())?;
        for (o, v) in out.iter_mut().zip(c) {
            match op {
                ReduceOp::Sum => *o += v,
                // NaN-propagating max
                ReduceOp::Max => {
                    if v.is_nan() || *v > *o {
                        *o = *v
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Elementwise sum of the per-worker vectors, accumulated in ascending rank
/// order.
pub fn allreduce_sum<V: AsRef<[f64]>>(contributions: &[V]) -> Result<Vec<f64>> {
    reduce(contributions, ReduceOp::Sum)
}

/// Shared-memory allreduce for `size` threads.
///
/// Every participant deposits its vector, waits at a barrier, reduces all
/// slots in rank order itself, then waits again so no slot is overwritten
/// before everyone has read it.
pub struct AllreduceGroup {
    barrier: Barrier,
    slots: Vec<RwLock<Vec<f64>>>,
}

impl AllreduceGroup {
    pub fn new(size: usize) -> Self {
        AllreduceGroup {
            barrier: Barrier::new(size),
            slots: (0..size).map(|_| RwLock::new(Vec::new())).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.slots.len()
    }

    fn run(&self, rank: usize, local: &[f64], op: ReduceOp) -> Result<Vec<f64>> {
        {
            let mut slot = self.slots[rank].write().expect("allreduce slot poisoned");
            slot.clear();
            slot.extend_from_slice(local);
        }
        self.barrier.wait();
        let out = {
            let guards: Vec<_> = self
                .slots
                .iter()
                .map(|s| s.read().expect("allreduce slot poisoned"))
                .collect();
            let views: Vec<&[f64]> = guards.iter().map(|g| g.as_slice()).collect();
            reduce(&views, op)
        };
        self.barrier.wait();
        out
    }

    pub fn sum(&self, rank: usize, local: &[f64]) -> Result<Vec<f64>> {
        self.run(rank, local, ReduceOp::Sum)
    }

    pub fn max(&self, rank: usize, local: &[f64]) -> Result<Vec<f64>> {
        self.run(rank, local, ReduceOp::Max)
    }
}

/// Provider of matrix rows. Workers only ever request their own range.
pub trait RowSource: Sync {
    fn order(&self) -> usize;
    fn rows(&self, range: Range<usize>) -> Result<RowBlock>;
}

/// Rows copied out of an in-memory matrix.
pub struct MatrixRows<'a>(pub &'a SymmetricMatrix);

impl RowSource for MatrixRows<'_> {
    fn order(&self) -> usize {
        self.0.order()
    }

    fn rows(&self, range: Range<usize>) -> Result<RowBlock> {
        let n = self.0.order();
        if range.end > n || range.start > range.end {
            return Err(Error::InvalidConfig(format!("row range {range:?} outside [0, {n})")));
        }
        Ok(RowBlock {
            start: range.start,
            width: n,
            entries: self.0.as_row_major()[range.start * n..range.end * n].to_vec(),
        })
    }
}

/// Rows of the loaded dual matrix, computed from the training data.
pub struct DualRows<'a> {
    pub points: &'a [SamplePoint],
    pub config: &'a TrainConfig,
}

impl RowSource for DualRows<'_> {
    fn order(&self) -> usize {
        self.points.len()
    }

    fn rows(&self, range: Range<usize>) -> Result<RowBlock> {
        loaded_dual_rows(self.points, self.config, range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// One OS thread per worker, synchronized by barriers.
    #[default]
    Threaded,
    /// All workers stepped in rank order on the calling thread.
    Serial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistConfig {
    pub workers: usize,
    pub mode: ExecutionMode,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Power iterations for the spectral-radius diagnostic; `None` skips it.
    pub power_iters: Option<usize>,
}

impl DistConfig {
    pub fn new(workers: usize) -> Self {
        DistConfig {
            workers,
            mode: ExecutionMode::default(),
            epsilon: crate::gabp::DEFAULT_EPSILON,
            max_iters: crate::gabp::DEFAULT_MAX_ITERS,
            power_iters: None,
        }
    }
}

/// Per-round record of one distributed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTelemetry {
    pub iteration: usize,
    pub delta: f64,
    /// Length of the aggregate vector reduced this round.
    pub reduced_scalars: usize,
    /// Scalars in the convergence/error control reduction.
    pub control_scalars: usize,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributedRun {
    pub solution: GabpSolution,
    pub partition: WorkerPartition,
    pub telemetry: Vec<IterationTelemetry>,
    pub diagnosis: Option<ConvergenceDiagnosis>,
    /// Final means as observed by each worker, by rank.
    pub worker_means: Vec<Vec<f64>>,
}

const CONTROL_SCALARS: usize = 2;

struct Worker {
    range: Range<usize>,
    n: usize,
    rows: RowBlock,
    fix_p: Vec<f64>,
    fix_m: Vec<f64>,
    // [local * n + j]: out = i -> j, inbox = j -> i
    out_p: Vec<f64>,
    out_m: Vec<f64>,
    in_p: Vec<f64>,
    in_m: Vec<f64>,
}

impl Worker {
    fn new<S: RowSource>(source: &S, rhs: &[f64], range: Range<usize>) -> Result<Self> {
        let n = source.order();
        let rows = source.rows(range.clone())?;
        check_dim(range.len() * n, rows.entries.len())?;
        let mut fix_p = Vec::with_capacity(range.len());
        let mut fix_m = Vec::with_capacity(range.len());
        for i in range.clone() {
            let a = rows.row(i)[i];
            if a == 0.0 {
                return Err(Error::ZeroDiagonal { row: i });
            }
            fix_p.push(a);
            fix_m.push(rhs[i] / a);
        }
        let cells = range.len() * n;
        Ok(Worker {
            range,
            n,
            rows,
            fix_p,
            fix_m,
            out_p: vec![0.0; cells],
            out_m: vec![0.0; cells],
            in_p: vec![0.0; cells],
            in_m: vec![0.0; cells],
        })
    }

    fn local(&self, i: usize) -> Range<usize> {
        let l = i - self.range.start;
        l * self.n..(l + 1) * self.n
    }

    /// `[P~ (n) | mu~ (n)]`, zero outside the owned rows.
    fn aggregates(&self) -> Result<Vec<f64>> {
        let mut buf = vec![0.0; 2 * self.n];
        for i in self.range.clone() {
            let l = i - self.range.start;
            let cells = self.local(i);
            let (p, m) = aggregate(
                self.rows.row(i),
                i,
                self.fix_p[l],
                self.fix_m[l],
                &self.in_p[cells.clone()],
                &self.in_m[cells],
            )
            .ok_or(Error::ZeroPivot { from: i, to: i })?;
            buf[i] = p;
            buf[self.n + i] = m;
        }
        Ok(buf)
    }

    /// Recomputes both directions of every owned edge; returns the largest
    /// change over outgoing messages.
    fn update(&mut self, aggregates: &[f64]) -> Result<f64> {
        let n = self.n;
        let (p_tilde, mu_tilde) = aggregates.split_at(n);
        let mut delta = 0.0f64;
        for i in self.range.clone() {
            let base = (i - self.range.start) * n;
            let row = self.rows.row(i);
            for (j, &a) in row.iter().enumerate() {
                if j == i || a == 0.0 {
                    continue;
                }
                let c = base + j;
                let (old_out_p, old_out_m) = (self.out_p[c], self.out_m[c]);
                let (np, nm) =
                    broadcast_message(a, p_tilde[i], mu_tilde[i], self.in_p[c], self.in_m[c])
                        .ok_or(Error::ZeroPivot { from: i, to: j })?;
                let (ip, im) =
                    broadcast_message(a, p_tilde[j], mu_tilde[j], old_out_p, old_out_m)
                        .ok_or(Error::ZeroPivot { from: j, to: i })?;
                delta = delta.max(change(old_out_p, np)).max(change(old_out_m, nm));
                self.out_p[c] = np;
                self.out_m[c] = nm;
                self.in_p[c] = ip;
                self.in_m[c] = im;
            }
        }
        Ok(delta)
    }

    /// `[means (n) | precisions (n)]`, zero outside the owned rows.
    fn marginals(&self) -> Vec<f64> {
        let mut buf = vec![0.0; 2 * self.n];
        for i in self.range.clone() {
            let l = i - self.range.start;
            let cells = self.local(i);
            let mut p = self.fix_p[l];
            let mut num = self.fix_p[l] * self.fix_m[l];
            for (k, &a) in self.rows.row(i).iter().enumerate() {
                if k != i && a != 0.0 {
                    p += self.in_p[cells.start + k];
                    num += self.in_p[cells.start + k] * self.in_m[cells.start + k];
                }
            }
            buf[i] = num / p;
            buf[self.n + i] = p;
        }
        buf
    }

    /// Owned entries of `|I - A| v`.
    fn abs_residual_matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut buf = vec![0.0; self.n];
        for i in self.range.clone() {
            buf[i] = crate::numerics::abs_residual_row(self.rows.row(i), i, v);
        }
        buf
    }

    fn dominance_margin(&self) -> f64 {
        self.range
            .clone()
            .map(|i| crate::numerics::row_dominance_margin(self.rows.row(i), i))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Reductions as seen by one worker.
trait Collective {
    fn sum(&self, local: &[f64]) -> Result<Vec<f64>>;
    fn max(&self, local: &[f64]) -> Result<Vec<f64>>;
}

struct GroupMember<'g> {
    group: &'g AllreduceGroup,
    rank: usize,
}

impl Collective for GroupMember<'_> {
    fn sum(&self, local: &[f64]) -> Result<Vec<f64>> {
        self.group.sum(self.rank, local)
    }

    fn max(&self, local: &[f64]) -> Result<Vec<f64>> {
        self.group.max(self.rank, local)
    }
}

const PEER_FAILED: &str = "a peer worker failed";

/// Agrees on failure: every member learns whether anyone failed. Returns the
/// local error, a placeholder if only a peer failed, or `Ok(v)`.
fn agree<T, C: Collective>(comm: &C, local: Result<T>) -> Result<T> {
    let flag = if local.is_err() { 1.0 } else { 0.0 };
    let any = comm.max(&[flag])?[0];
    match local {
        Err(e) => Err(e),
        Ok(_) if any > 0.0 => Err(Error::InvalidConfig(PEER_FAILED.into())),
        Ok(v) => Ok(v),
    }
}

fn diagnose<C: Collective>(worker: &Worker, comm: &C, power_iters: usize) -> Result<ConvergenceDiagnosis> {
    let n = worker.n;
    let margin = -comm.max(&[-worker.dominance_margin()])?[0];
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut estimate = 0.0;
    for _ in 0..power_iters.max(1) {
        let next = comm.sum(&worker.abs_residual_matvec(&v))?;
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            estimate = 0.0;
            break;
        }
        estimate = norm;
        v = next.into_iter().map(|x| x / norm).collect();
    }
    Ok(ConvergenceDiagnosis {
        spectral_radius_estimate: estimate,
        is_diagonally_dominant: margin > 0.0,
        dominance_margin: margin,
    })
}

struct WorkerOutcome {
    solution: GabpSolution,
    telemetry: Vec<IterationTelemetry>,
    diagnosis: Option<ConvergenceDiagnosis>,
}

/// The per-worker program used by threaded execution.
fn worker_program<S: RowSource, C: Collective>(
    source: &S,
    rhs: &[f64],
    range: Range<usize>,
    config: &DistConfig,
    comm: &C,
) -> Result<WorkerOutcome> {
    let start = Instant::now();
    let mut worker = agree(comm, Worker::new(source, rhs, range))?;
    let diagnosis = match config.power_iters {
        Some(k) => Some(diagnose(&worker, comm, k)?),
        None => None,
    };
    let mut telemetry = Vec::new();
    let mut converged = false;
    let mut delta = f64::INFINITY;
    for iteration in 1..=config.max_iters {
        let local = agree(comm, worker.aggregates())?;
        let aggregates = comm.sum(&local)?;
        let local_delta = agree(comm, worker.update(&aggregates))?;
        delta = comm.max(&[local_delta, 0.0])?[0];
        telemetry.push(IterationTelemetry {
            iteration,
            delta,
            reduced_scalars: aggregates.len(),
            control_scalars: CONTROL_SCALARS,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if delta <= config.epsilon {
            converged = true;
            break;
        }
        if !delta.is_finite() {
            break;
        }
    }
    let marginals = comm.sum(&worker.marginals())?;
    Ok(WorkerOutcome {
        solution: solution_from(marginals, telemetry.len(), converged, delta),
        telemetry,
        diagnosis,
    })
}

fn solution_from(mut marginals: Vec<f64>, iterations: usize, converged: bool, delta: f64) -> GabpSolution {
    let precisions = marginals.split_off(marginals.len() / 2);
    GabpSolution {
        means: marginals,
        precisions,
        iterations_used: iterations,
        converged,
        final_delta: delta,
    }
}

fn run_serial<S: RowSource>(
    source: &S,
    rhs: &[f64],
    partition: &WorkerPartition,
    config: &DistConfig,
) -> Result<WorkerOutcome> {
    let start = Instant::now();
    let mut workers = partition
        .ranges
        .iter()
        .map(|r| Worker::new(source, rhs, r.clone()))
        .collect::<Result<Vec<_>>>()?;
    let diagnosis = config.power_iters.map(|k| serial_diagnose(&workers, k)).transpose()?;
    let mut telemetry = Vec::new();
    let mut converged = false;
    let mut delta = f64::INFINITY;
    for iteration in 1..=config.max_iters {
        let local = workers.iter().map(Worker::aggregates).collect::<Result<Vec<_>>>()?;
        let aggregates = allreduce_sum(&local)?;
        let deltas = workers
            .iter_mut()
            .map(|w| w.update(&aggregates).map(|d| vec![d, 0.0]))
            .collect::<Result<Vec<_>>>()?;
        delta = reduce(&deltas, ReduceOp::Max)?[0];
        telemetry.push(IterationTelemetry {
            iteration,
            delta,
            reduced_scalars: aggregates.len(),
            control_scalars: CONTROL_SCALARS,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if delta <= config.epsilon {
            converged = true;
            break;
        }
        if !delta.is_finite() {
            break;
        }
    }
    let marginals = allreduce_sum(&workers.iter().map(Worker::marginals).collect::<Vec<_>>())?;
    Ok(WorkerOutcome {
        solution: solution_from(marginals, telemetry.len(), converged, delta),
        telemetry,
        diagnosis,
    })
}

fn serial_diagnose(workers: &[Worker], power_iters: usize) -> Result<ConvergenceDiagnosis> {
    let n = workers[0].n;
    let margin = -reduce(
        &workers.iter().map(|w| vec![-w.dominance_margin()]).collect::<Vec<_>>(),
        ReduceOp::Max,
    )?[0];
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut estimate = 0.0;
    for _ in 0..power_iters.max(1) {
        let next = allreduce_sum(&workers.iter().map(|w| w.abs_residual_matvec(&v)).collect::<Vec<_>>())?;
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            estimate = 0.0;
            break;
        }
        estimate = norm;
        v = next.into_iter().map(|x| x / norm).collect();
    }
    Ok(ConvergenceDiagnosis {
        spectral_radius_estimate: estimate,
        is_diagonally_dominant: margin > 0.0,
        dominance_margin: margin,
    })
}

/// Synchronous broadcast GaBP over `config.workers` row-partitioned workers.
pub fn run_distributed<S: RowSource>(source: &S, rhs: &Vector, config: &DistConfig) -> Result<DistributedRun> {
    let n = source.order();
    check_dim(n, rhs.len())?;
    if !(config.epsilon > 0.0) || config.max_iters == 0 {
        return Err(Error::InvalidConfig("epsilon must be > 0 and max_iters >= 1".into()));
    }
    let partition = make_partition(n, config.workers)?;
    match config.mode {
        ExecutionMode::Serial => {
            let out = run_serial(source, rhs, &partition, config)?;
            let worker_means = vec![out.solution.means.clone(); partition.workers()];
            Ok(DistributedRun {
                solution: out.solution,
                partition,
                telemetry: out.telemetry,
                diagnosis: out.diagnosis,
                worker_means,
            })
        }
        ExecutionMode::Threaded => {
            let group = AllreduceGroup::new(partition.workers());
            let results: Vec<Result<WorkerOutcome>> = std::thread::scope(|scope| {
                let handles: Vec<_> = partition
                    .ranges
                    .iter()
                    .enumerate()
                    .map(|(rank, range)| {
                        let group = &group;
                        let range = range.clone();
                        scope.spawn(move || {
                            let comm = GroupMember { group, rank };
                            worker_program(source, rhs, range, config, &comm)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker thread panicked"))
                    .collect()
            });
            let mut outcomes = Vec::with_capacity(results.len());
            let mut first_error = None;
            for r in results {
                match r {
                    Ok(o) => outcomes.push(o),
                    Err(Error::InvalidConfig(msg)) if msg == PEER_FAILED => {}
                    Err(e) => {
                        first_error.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_error {
                return Err(e);
            }
            let worker_means = outcomes.iter().map(|o| o.solution.means.clone()).collect();
            let lead = outcomes.swap_remove(0);
            Ok(DistributedRun {
                solution: lead.solution,
                partition,
                telemetry: lead.telemetry,
                diagnosis: lead.diagnosis,
                worker_means,
            })
        }
    }
}

fn check_sync_broadcast(schedule: Schedule, variant: Variant) -> Result<()> {
    if schedule != Schedule::Synchronous || variant != Variant::Broadcast {
        return Err(Error::InvalidConfig(
            "the distributed runtime only runs synchronous broadcast rounds".into(),
        ));
    }
    Ok(())
}

/// Distributes an in-memory problem; its schedule and variant must be
/// synchronous broadcast.
pub fn solve_distributed(problem: &GabpProblem, workers: usize, mode: ExecutionMode) -> Result<DistributedRun> {
    problem.validate()?;
    check_sync_broadcast(problem.schedule, problem.variant)?;
    let config = DistConfig {
        workers,
        mode,
        epsilon: problem.epsilon,
        max_iters: problem.max_iters,
        power_iters: None,
    };
    run_distributed(&MatrixRows(&problem.matrix), &problem.rhs, &config)
}

/// Trains with each worker computing only its own rows of the loaded dual
/// matrix.
pub fn train_distributed(
    points: &[SamplePoint],
    config: &TrainConfig,
    workers: usize,
    mode: ExecutionMode,
) -> Result<(TrainedModel, DistributedRun)> {
    check_trainable(points, config)?;
    check_sync_broadcast(config.solver.schedule, config.solver.variant)?;
    let dist = DistConfig {
        workers,
        mode,
        epsilon: config.solver.epsilon,
        max_iters: config.solver.max_iters,
        power_iters: Some(crate::numerics::DEFAULT_POWER_ITERS),
    };
    let run = run_distributed(&DualRows { points, config }, &Vector::ones(points.len()), &dist)?;
    let diagnosis = run.diagnosis.expect("diagnosis requested");
    let model = finish_model(points, config, run.solution.clone(), diagnosis)?;
    Ok((model, run))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_examples() {
        let sizes = |n, p| {
            make_partition(n, p)
                .unwrap()
                .ranges
                .iter()
                .map(|r| r.len())
                .collect::<Vec<_>>()
        };
        assert_eq!(sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(make_partition(5, 1).unwrap().ranges, vec![0..5]);
        assert_eq!(sizes(7, 7), vec![1; 7]);
        assert!(matches!(make_partition(3, 4), Err(Error::InvalidPartition { n: 3, p: 4 })));
        assert!(matches!(make_partition(3, 0), Err(Error::InvalidPartition { .. })));
        assert_eq!(make_partition(10, 3).unwrap().owner(4), Some(1));
    }

    #[test]
    fn allreduce_examples() {
        assert_eq!(allreduce_sum(&[vec![1.5, -2.0]]).unwrap(), vec![1.5, -2.0]);
        assert_eq!(allreduce_sum(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), vec![1.0, 1.0]);
        assert!(matches!(
            allreduce_sum(&[vec![1.0], vec![1.0, 2.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(allreduce_sum::<Vec<f64>>(&[]).is_err());
    }

    #[test]
    fn threaded_group_matches_sequential_sum() {
        let p = 4;
        let contributions: Vec<Vec<f64>> = (0..p)
            .map(|r| (0..16).map(|k| ((r * 16 + k) as f64).sin() * 1e3).collect())
            .collect();
        let expected = allreduce_sum(&contributions).unwrap();
        let group = AllreduceGroup::new(p);
        let got: Vec<Vec<f64>> = std::thread::scope(|s| {
            let hs: Vec<_> = (0..p)
                .map(|r| {
                    let (group, c) = (&group, &contributions[r]);
                    s.spawn(move || group.sum(r, c).unwrap())
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for g in got {
            assert_eq!(g, expected);
        }
    }

    #[test]
    fn footprint_examples() {
        assert_eq!(
            memory_footprint(1000, 10).unwrap(),
            MemoryFootprint { rows_per_worker: 100, row_block_bytes: 800_000 }
        );
        assert_eq!(memory_footprint(60_000, 1024).unwrap().rows_per_worker, 59);
        assert_eq!(memory_footprint(12, 12).unwrap().rows_per_worker, 1);
        assert!(memory_footprint(2, 3).is_err());
    }

    #[test]
    fn rejects_async_or_edge() {
        let m = SymmetricMatrix::identity(2).unwrap();
        let p = GabpProblem::new(m, Vector::ones(2)).unwrap();
        assert!(solve_distributed(&p, 1, ExecutionMode::Serial).is_err());
        let p = p.with_variant(Variant::Broadcast);
        assert!(solve_distributed(&p, 1, ExecutionMode::Serial).is_ok());
        let p = p.with_schedule(Schedule::AsynchronousSweep);
        assert!(solve_distributed(&p, 1, ExecutionMode::Serial).is_err());
    }

    #[test]
    fn zero_pivot_does_not_deadlock() {
        let m = SymmetricMatrix::from_rows(&[
            vec![1.0, 1.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        let p = GabpProblem::new(m, Vector::ones(3)).unwrap().with_variant(Variant::Broadcast);
        for mode in [ExecutionMode::Serial, ExecutionMode::Threaded] {
            let err = solve_distributed(&p, 3, mode).unwrap_err();
            assert!(matches!(err, Error::ZeroPivot { .. }), "{err:?}");
        }
    }
}
