//! Dense vector and symmetric matrix primitives, a Cholesky direct solver used
//! as the reference answer for the iterative engines, and the two classical
//! sufficient-condition diagnostics for GaBP convergence.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_POWER_ITERS: usize = 100;

/// A vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Vector(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn ones(n: usize) -> Self {
        Vector(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn inf_norm(&self) -> f64 {
        inf_norm(&self.0)
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dim(self.len(), other.len())?;
        Ok(dot(&self.0, &other.0))
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Vector::new(entries)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

/// Dense, row-major, exactly symmetric matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    /// Validates a row-major buffer of `order * order` entries.
    pub fn from_row_major(order: usize, entries: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::EmptyMatrix);
        }
        check_dim(order * order, entries.len())?;
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        for row in 0..order {
            for col in row + 1..order {
                if entries[row * order + col] != entries[col * order + row] {
                    return Err(Error::NotSymmetric { row, col });
                }
            }
        }
        Ok(SymmetricMatrix { order, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let order = rows.len();
        let mut entries = Vec::with_capacity(order * order);
        for row in rows {
            check_dim(order, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::from_row_major(order, entries)
    }

    /// Builds the matrix from its upper triangle; `f` is called once per
    /// unordered pair and the value is mirrored.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            for j in i..order {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite { index: i * order + j });
                }
                entries[i * order + j] = v;
                entries[j * order + i] = v;
            }
        }
        Ok(SymmetricMatrix { order, entries })
    }

    pub fn identity(order: usize) -> Result<Self> {
        Self::from_diagonal(&vec![1.0; order])
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    /// Returns a copy with `increments[i]` added to entry (i, i).
    pub fn with_diagonal_added(&self, increments: &[f64]) -> Result<Self> {
        check_dim(self.order, increments.len())?;
        let mut entries = self.entries.clone();
        for (i, inc) in increments.iter().enumerate() {
            entries[i * self.order + i] += inc;
            if !entries[i * self.order + i].is_finite() {
                return Err(Error::NonFinite { index: i * self.order + i });
            }
        }
        Ok(SymmetricMatrix { order: self.order, entries })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.order, x.len())?;
        Ok((0..self.order).map(|i| dot(self.row(i), x)).collect())
    }
}

/// Lower-triangular Cholesky factor, row-major.
struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    fn factor(w: &SymmetricMatrix) -> Result<Self> {
        let n = w.order();
        let mut lower = vec![0.0; n * n];
        for j in 0..n {
            let mut pivot = w.get(j, j);
            for k in 0..j {
                pivot -= lower[j * n + k] * lower[j * n + k];
            }
            // also rejects NaN pivots
            if !(pivot > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let diag = pivot.sqrt();
            lower[j * n + j] = diag;
            for i in j + 1..n {
                let mut s = w.get(i, j);
                for k in 0..j {
                    s -= lower[i * n + k] * lower[j * n + k];
                }
                lower[i * n + j] = s / diag;
            }
        }
        Ok(Cholesky { n, lower })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let l = &self.lower;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        x
    }
}

/// Solves `W x = b` for positive definite `W`.
pub fn direct_solve(w: &SymmetricMatrix, b: &Vector) -> Result<Vector> {
    check_dim(w.order(), b.len())?;
    let chol = Cholesky::factor(w)?;
    Vector::new(chol.solve(b))
}

/// Exact marginal precisions `1 / (W^-1)_ii` of the Gaussian with
/// information matrix `W`.
pub fn marginal_precisions_oracle(w: &SymmetricMatrix) -> Result<Vector> {
    let n = w.order();
    let chol = Cholesky::factor(w)?;
    let mut unit = vec![0.0; n];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        unit[i] = 1.0;
        let column = chol.solve(&unit);
        out.push(1.0 / column[i]);
        unit[i] = 0.0;
    }
    Vector::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnosis {
    /// Power-iteration estimate of rho(|I - W|).
    pub spectral_radius_estimate: f64,
    pub is_diagonally_dominant: bool,
    /// min_i |W_ii| - sum_{j != i} |W_ij|
    pub dominance_margin: f64,
}

pub fn dominance_margin(w: &SymmetricMatrix) -> f64 {
    (0..w.order())
        .map(|i| row_dominance_margin(w.row(i), i))
        .fold(f64::INFINITY, f64::min)
}

/// `|row[i]| - sum_{j != i} |row[j]|`
pub(crate) fn row_dominance_margin(row: &[f64], i: usize) -> f64 {
    let off: f64 = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, v)| v.abs())
        .sum();
    row[i].abs() - off
}

/// Row `i` of `|I - W|` applied to `v`.
#[inline]
pub(crate) fn abs_residual_row(row: &[f64], i: usize, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (j, (&w, &x)) in row.iter().zip(v).enumerate() {
        let id = if i == j { 1.0 } else { 0.0 };
        s += (id - w).abs() * x;
    }
    s
}

pub fn diagnose_convergence(w: &SymmetricMatrix, power_iters: usize) -> ConvergenceDiagnosis {
    let margin = dominance_margin(w);
    ConvergenceDiagnosis {
        spectral_radius_estimate: spectral_radius_abs_residual(w, power_iters),
        is_diagonally_dominant: margin > 0.0,
        dominance_margin: margin,
    }
}

fn spectral_radius_abs_residual(w: &SymmetricMatrix, power_iters: usize) -> f64 {
    let n = w.order();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut estimate = 0.0;
    for _ in 0..power_iters.max(1) {
        let next: Vec<f64> = (0..n).map(|i| abs_residual_row(w.row(i), i, &v)).collect();
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm;
        v = next.into_iter().map(|x| x / norm).collect();
    }
    estimate
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
