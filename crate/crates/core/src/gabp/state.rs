use crate::error::{Error, Result};
use crate::numerics::{check_dim, SymmetricMatrix, Vector};

use super::{Schedule, Variant};

/// Message storage for one GaBP run.
///
/// Messages are kept by receiver: `inbox_*[to * n + from]` holds the scalar
/// pair sent `from -> to`. Entries for non-edges stay at zero.
#[derive(Debug, Clone)]
pub struct GabpState<'a> {
    matrix: &'a SymmetricMatrix,
    n: usize,
    fix_precision: Vec<f64>,
    fix_mean: Vec<f64>,
    inbox_precision: Vec<f64>,
    inbox_mean: Vec<f64>,
    iteration: usize,
    last_delta: f64,
}

/// Outgoing message of the broadcast variant: recovers the cavity terms of
/// the sender from its aggregate by subtracting the receiver's contribution.
#[inline]
pub(crate) fn broadcast_message(
    a_ij: f64,
    p_tilde: f64,
    mu_tilde: f64,
    p_back: f64,
    mu_back: f64,
) -> Option<(f64, f64)> {
    let cavity = p_tilde - p_back;
    if cavity == 0.0 {
        return None;
    }
    Some((-(a_ij * a_ij) / cavity, (p_tilde * mu_tilde - p_back * mu_back) / a_ij))
}

/// Aggregated sums `(P~_i, mu~_i)` from the incoming messages of one node.
#[inline]
pub(crate) fn aggregate(
    row: &[f64],
    node: usize,
    fix_precision: f64,
    fix_mean: f64,
    in_precision: &[f64],
    in_mean: &[f64],
) -> Option<(f64, f64)> {
    let mut p = fix_precision;
    let mut num = fix_precision * fix_mean;
    for (k, &a) in row.iter().enumerate() {
        if k != node && a != 0.0 {
            p += in_precision[k];
            num += in_precision[k] * in_mean[k];
        }
    }
    if p == 0.0 {
        return None;
    }
    Some((p, num / p))
}

#[inline]
pub(crate) fn change(old: f64, new: f64) -> f64 {
    let d = (new - old).abs();
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

impl<'a> GabpState<'a> {
    /// Initial state: scalar fixes from the diagonal, all messages zero.
    pub fn new(matrix: &'a SymmetricMatrix, rhs: &Vector) -> Result<Self> {
        let n = matrix.order();
        check_dim(n, rhs.len())?;
        let mut fix_precision = Vec::with_capacity(n);
        let mut fix_mean = Vec::with_capacity(n);
        for i in 0..n {
            let a = matrix.get(i, i);
            if a == 0.0 {
                return Err(Error::ZeroDiagonal { row: i });
            }
            fix_precision.push(a);
            fix_mean.push(rhs[i] / a);
        }
        Ok(GabpState {
            matrix,
            n,
            fix_precision,
            fix_mean,
            inbox_precision: vec![0.0; n * n],
            inbox_mean: vec![0.0; n * n],
            iteration: 0,
            last_delta: f64::INFINITY,
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Largest absolute message change of the last sweep (infinite before
    /// the first sweep).
    pub fn last_delta(&self) -> f64 {
        self.last_delta
    }

    pub fn fix_precision(&self, i: usize) -> f64 {
        self.fix_precision[i]
    }

    pub fn fix_mean(&self, i: usize) -> f64 {
        self.fix_mean[i]
    }

    #[inline]
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.matrix.get(i, j) != 0.0
    }

    pub fn precision(&self, from: usize, to: usize) -> f64 {
        self.inbox_precision[to * self.n + from]
    }

    pub fn mean(&self, from: usize, to: usize) -> f64 {
        self.inbox_mean[to * self.n + from]
    }

    /// Precision messages laid out by receiver (`[to * n + from]`).
    pub fn precision_messages(&self) -> &[f64] {
        &self.inbox_precision
    }

    pub fn mean_messages(&self) -> &[f64] {
        &self.inbox_mean
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| self.is_edge(i, j)).count())
            .sum()
    }

    /// The `i -> j` message computed from the current incoming messages of
    /// `i`, excluding the one from `j`.
    pub fn edge_message(&self, i: usize, j: usize) -> Result<(f64, f64)> {
        let a = self.matrix.get(i, j);
        if !self.is_edge(i, j) {
            return Err(Error::InvalidConfig(format!("no edge between {i} and {j}")));
        }
        let row = self.matrix.row(i);
        let base = i * self.n;
        let mut p = self.fix_precision[i];
        let mut num = self.fix_precision[i] * self.fix_mean[i];
        for (k, &a_ik) in row.iter().enumerate() {
            if k != i && k != j && a_ik != 0.0 {
                p += self.inbox_precision[base + k];
                num += self.inbox_precision[base + k] * self.inbox_mean[base + k];
            }
        }
        if p == 0.0 {
            return Err(Error::ZeroPivot { from: i, to: j });
        }
        Ok((-(a * a) / p, num / a))
    }

    /// Marginal means and precisions from all incoming messages.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let mut means = Vec::with_capacity(self.n);
        let mut precisions = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let base = i * self.n;
            let mut p = self.fix_precision[i];
            let mut num = self.fix_precision[i] * self.fix_mean[i];
            for (k, &a) in self.matrix.row(i).iter().enumerate() {
                if k != i && a != 0.0 {
                    p += self.inbox_precision[base + k];
                    num += self.inbox_precision[base + k] * self.inbox_mean[base + k];
                }
            }
            means.push(num / p);
            precisions.push(p);
        }
        (means, precisions)
    }

    /// One full round of message updates; returns the largest absolute
    /// change over all precision and mean messages.
    pub fn sweep(&mut self, schedule: Schedule, variant: Variant) -> Result<f64> {
        let delta = match (schedule, variant) {
            (Schedule::Synchronous, Variant::Edge) => self.sweep_sync_edge()?,
            (Schedule::Synchronous, Variant::Broadcast) => self.sweep_sync_broadcast()?,
            (Schedule::AsynchronousSweep, Variant::Edge) => self.sweep_async_edge()?,
            (Schedule::AsynchronousSweep, Variant::Broadcast) => self.sweep_async_broadcast()?,
        };
        self.iteration += 1;
        self.last_delta = delta;
        Ok(delta)
    }

    fn sweep_sync_edge(&mut self) -> Result<f64> {
        let n = self.n;
        let mut next_p = vec![0.0; n * n];
        let mut next_m = vec![0.0; n * n];
        let mut delta = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if !self.is_edge(i, j) {
                    continue;
                }
                let (p, m) = self.edge_message(i, j)?;
                let slot = j * n + i;
                delta = delta
                    .max(change(self.inbox_precision[slot], p))
                    .max(change(self.inbox_mean[slot], m));
                next_p[slot] = p;
                next_m[slot] = m;
            }
        }
        self.inbox_precision = next_p;
        self.inbox_mean = next_m;
        Ok(delta)
    }

    fn aggregates(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let mut p_tilde = Vec::with_capacity(n);
        let mut mu_tilde = Vec::with_capacity(n);
        for i in 0..n {
            let (p, m) = aggregate(
                self.matrix.row(i),
                i,
                self.fix_precision[i],
                self.fix_mean[i],
                &self.inbox_precision[i * n..(i + 1) * n],
                &self.inbox_mean[i * n..(i + 1) * n],
            )
            .ok_or(Error::ZeroPivot { from: i, to: i })?;
            p_tilde.push(p);
            mu_tilde.push(m);
        }
        Ok((p_tilde, mu_tilde))
    }

    fn sweep_sync_broadcast(&mut self) -> Result<f64> {
        let n = self.n;
        let (p_tilde, mu_tilde) = self.aggregates()?;
        let mut delta = 0.0f64;
        // Both directions of an edge read only the other's old value, so the
        // pair can be updated in place.
        for i in 0..n {
            let row = self.matrix.row(i);
            for j in i + 1..n {
                let a = row[j];
                if a == 0.0 {
                    continue;
                }
                let ij = j * n + i;
                let ji = i * n + j;
                let (p_ij, m_ij) = (self.inbox_precision[ij], self.inbox_mean[ij]);
                let (p_ji, m_ji) = (self.inbox_precision[ji], self.inbox_mean[ji]);
                let (np_ij, nm_ij) = broadcast_message(a, p_tilde[i], mu_tilde[i], p_ji, m_ji)
                    .ok_or(Error::ZeroPivot { from: i, to: j })?;
                let (np_ji, nm_ji) = broadcast_message(a, p_tilde[j], mu_tilde[j], p_ij, m_ij)
                    .ok_or(Error::ZeroPivot { from: j, to: i })?;
                delta = delta
                    .max(change(p_ij, np_ij))
                    .max(change(m_ij, nm_ij))
                    .max(change(p_ji, np_ji))
                    .max(change(m_ji, nm_ji));
                self.inbox_precision[ij] = np_ij;
                self.inbox_mean[ij] = nm_ij;
                self.inbox_precision[ji] = np_ji;
                self.inbox_mean[ji] = nm_ji;
            }
        }
        Ok(delta)
    }

    fn sweep_async_edge(&mut self) -> Result<f64> {
        let n = self.n;
        let mut delta = 0.0f64;
        let mut outgoing = Vec::new();
        for i in 0..n {
            outgoing.clear();
            for j in 0..n {
                if self.is_edge(i, j) {
                    outgoing.push((j, self.edge_message(i, j)?));
                }
            }
            for &(j, (p, m)) in &outgoing {
                let slot = j * n + i;
                delta = delta
                    .max(change(self.inbox_precision[slot], p))
                    .max(change(self.inbox_mean[slot], m));
                self.inbox_precision[slot] = p;
                self.inbox_mean[slot] = m;
            }
        }
        Ok(delta)
    }

    fn sweep_async_broadcast(&mut self) -> Result<f64> {
        let n = self.n;
        let mut delta = 0.0f64;
        for i in 0..n {
            let row = self.matrix.row(i);
            let (p_tilde, mu_tilde) = aggregate(
                row,
                i,
                self.fix_precision[i],
                self.fix_mean[i],
                &self.inbox_precision[i * n..(i + 1) * n],
                &self.inbox_mean[i * n..(i + 1) * n],
            )
            .ok_or(Error::ZeroPivot { from: i, to: i })?;
            for (j, &a) in row.iter().enumerate() {
                if j == i || a == 0.0 {
                    continue;
                }
                let ji = i * n + j;
                let (p, m) = broadcast_message(
                    a,
                    p_tilde,
                    mu_tilde,
                    self.inbox_precision[ji],
                    self.inbox_mean[ji],
                )
                .ok_or(Error::ZeroPivot { from: i, to: j })?;
                let slot = j * n + i;
                delta = delta
                    .max(change(self.inbox_precision[slot], p))
                    .max(change(self.inbox_mean[slot], m));
                self.inbox_precision[slot] = p;
                self.inbox_mean[slot] = m;
            }
        }
        Ok(delta)
    }
}
