//! Kernel functions and kernel-matrix assembly.
//!
//! The bias term of the classifier is folded into the kernel: every family
//! adds `bias_constant^2`, which is what appending a constant coordinate
//! `bias_constant` to each pattern does to an inner product.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_dim, dot, SymmetricMatrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    Linear,
    /// `exp(-gamma * |a - b|^2)`
    Rbf { gamma: f64 },
    /// `(a . b + coef0)^degree`
    Polynomial { degree: u32, coef0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec")]
pub struct KernelSpec {
    #[serde(flatten)]
    family: KernelFamily,
    bias_constant: f64,
}

#[derive(Deserialize)]
struct RawKernelSpec {
    #[serde(flatten)]
    family: KernelFamily,
    bias_constant: f64,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.family, raw.bias_constant)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bias_constant: f64) -> Result<Self> {
        if !(bias_constant >= 0.0) || !bias_constant.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bias constant must be finite and >= 0, got {bias_constant}"
            )));
        }
        match family {
            KernelFamily::Rbf { gamma } if !(gamma > 0.0) || !gamma.is_finite() => {
                return Err(Error::InvalidConfig(format!("rbf gamma must be > 0, got {gamma}")));
            }
            KernelFamily::Polynomial { degree: 0, .. } => {
                return Err(Error::InvalidConfig("polynomial degree must be >= 1".into()));
            }
            KernelFamily::Polynomial { coef0, .. } if !coef0.is_finite() => {
                return Err(Error::InvalidConfig("polynomial coef0 must be finite".into()));
            }
            _ => {}
        }
        Ok(KernelSpec { family, bias_constant })
    }

    pub fn linear(bias_constant: f64) -> Result<Self> {
        Self::new(KernelFamily::Linear, bias_constant)
    }

    pub fn rbf(gamma: f64, bias_constant: f64) -> Result<Self> {
        Self::new(KernelFamily::Rbf { gamma }, bias_constant)
    }

    pub fn polynomial(degree: u32, coef0: f64, bias_constant: f64) -> Result<Self> {
        Self::new(KernelFamily::Polynomial { degree, coef0 }, bias_constant)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bias_constant(&self) -> f64 {
        self.bias_constant
    }

    pub fn with_bias(self, bias_constant: f64) -> Result<Self> {
        Self::new(self.family, bias_constant)
    }

    /// Kernel value without the dimension check.
    #[inline]
    pub(crate) fn eval_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        let base = match self.family {
            KernelFamily::Linear => dot(a, b),
            KernelFamily::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
            KernelFamily::Polynomial { degree, coef0 } => {
                (dot(a, b) + coef0).powi(degree as i32)
            }
        };
        base + self.bias_constant * self.bias_constant
    }
}

/// A pattern with an optional label (`-1`/`+1` for classification, any real
/// for regression targets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub features: Vector,
    pub label: Option<f64>,
}

impl SamplePoint {
    pub fn new(features: Vector, label: Option<f64>) -> Self {
        SamplePoint { features, label }
    }

    pub fn labeled(features: Vec<f64>, label: f64) -> Result<Self> {
        Ok(SamplePoint {
            features: Vector::new(features)?,
            label: Some(label),
        })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

pub fn kernel_eval(spec: &KernelSpec, a: &Vector, b: &Vector) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(spec.eval_raw(a, b))
}

pub fn default_bias_constant(n_train: usize) -> f64 {
    1.0 / n_train.max(1) as f64
}

/// A contiguous block of full-width matrix rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RowBlock {
    pub start: usize,
    pub width: usize,
    pub entries: Vec<f64>,
}

impl RowBlock {
    pub fn rows(&self) -> usize {
        self.entries.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.rows()
    }

    /// Row by global index.
    #[inline]
    pub fn row(&self, global: usize) -> &[f64] {
        let local = global - self.start;
        &self.entries[local * self.width..(local + 1) * self.width]
    }
}

pub(crate) fn common_dim(points: &[SamplePoint]) -> Result<usize> {
    let dim = points.first().map_or(0, SamplePoint::dim);
    for p in points {
        check_dim(dim, p.dim())?;
    }
    Ok(dim)
}

/// Kernel rows `row_range` against every point.
pub fn assemble_kernel_rows(
    spec: &KernelSpec,
    all_points: &[SamplePoint],
    row_range: Range<usize>,
) -> Result<RowBlock> {
    let n = all_points.len();
    if row_range.start > row_range.end || row_range.end > n {
        return Err(Error::InvalidConfig(format!(
            "row range {row_range:?} outside [0, {n})"
        )));
    }
    common_dim(all_points)?;
    let mut entries = Vec::with_capacity(row_range.len() * n);
    for i in row_range.clone() {
        let xi = &all_points[i].features;
        entries.extend(all_points.iter().map(|xj| spec.eval_raw(xi, &xj.features)));
    }
    Ok(RowBlock {
        start: row_range.start,
        width: n,
        entries,
    })
}

pub fn kernel_matrix(spec: &KernelSpec, points: &[SamplePoint]) -> Result<SymmetricMatrix> {
    common_dim(points)?;
    SymmetricMatrix::from_fn(points.len(), |i, j| {
        spec.eval_raw(&points[i].features, &points[j].features)
    })
}
