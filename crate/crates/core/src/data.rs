//! Dataset ingestion, preprocessing, evaluation and persistence.

use std::io::{BufRead, Read, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::SamplePoint;
use crate::numerics::{SymmetricMatrix, Vector};
use crate::svm::{predict, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<SamplePoint>,
    pub feature_dim: usize,
    pub source: String,
}

impl Dataset {
    pub fn new(points: Vec<SamplePoint>, source: impl Into<String>) -> Result<Self> {
        let feature_dim = crate::kernels::common_dim(&points)?;
        Ok(Dataset {
            points,
            feature_dim,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// How raw labels become `-1`/`+1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LabelMapping {
    /// Numeric labels: `> 0` is positive, anything else negative.
    #[default]
    Sign,
    /// One-vs-rest: labels equal to this class are positive.
    PositiveClass(String),
}

impl LabelMapping {
    fn map(&self, raw: &str, line: usize, column: Option<usize>) -> Result<f64> {
        match self {
            LabelMapping::Sign => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| Error::parse(line, column, format!("invalid label {raw:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(line, column, format!("invalid label {raw:?}")));
                }
                Ok(if v > 0.0 { 1.0 } else { -1.0 })
            }
            LabelMapping::PositiveClass(class) => {
                // numeric classes compare by value so "+1" matches "1"
                let same = match (raw.parse::<f64>(), class.parse::<f64>()) {
                    (Ok(a), Ok(b)) => a == b,
                    _ => raw == class,
                };
                Ok(if same { 1.0 } else { -1.0 })
            }
        }
    }
}

/// Parses `<label> <index>:<value> ...` lines with 1-based, strictly
/// increasing indices; features are densified to the largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R, mapping: &LabelMapping) -> Result<Dataset> {
    let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut dim = 0;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let label = mapping.map(tokens.next().unwrap_or_default(), line_no, None)?;
        let mut entries = Vec::new();
        let mut last = 0usize;
        for (t, token) in tokens.enumerate() {
            let column = Some(t + 2);
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| Error::parse(line_no, column, format!("expected index:value, got {token:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::parse(line_no, column, format!("invalid index {idx:?}")))?;
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(line_no, column, format!("invalid value {val:?}")))?;
            if idx == 0 {
                return Err(Error::parse(line_no, column, "indices are 1-based"));
            }
            if idx <= last {
                return Err(Error::NonMonotonicIndex { line: line_no });
            }
            last = idx;
            entries.push((idx - 1, val));
        }
        dim = dim.max(last);
        rows.push((label, entries));
    }
    let points = rows
        .into_iter()
        .map(|(label, entries)| {
            let mut x = vec![0.0; dim];
            for (i, v) in entries {
                x[i] = v;
            }
            SamplePoint::labeled(x, label)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(points, "libsvm")
}

/// Writes non-zero entries plus the last coordinate, so the dimension
/// survives a round trip.
pub fn write_libsvm<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    for p in &dataset.points {
        let label = p.label.unwrap_or(0.0);
        if label == 1.0 {
            write!(out, "+1")?;
        } else {
            write!(out, "{label}")?;
        }
        let d = p.features.len();
        for (i, v) in p.features.iter().enumerate() {
            if *v != 0.0 || i + 1 == d {
                write!(out, " {}:{}", i + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Headerless CSV; `label_column` holds the class, every other column is a
/// numeric feature.
pub fn parse_csv<R: Read>(reader: R, label_column: usize, positive_label: &str) -> Result<Dataset> {
    parse_csv_with_header(reader, label_column, positive_label, false)
}

/// [`parse_csv`], optionally skipping a header row.
pub fn parse_csv_with_header<R: Read>(
    reader: R,
    label_column: usize,
    positive_label: &str,
    has_header: bool,
) -> Result<Dataset> {
    let mapping = LabelMapping::PositiveClass(positive_label.to_string());
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut points = Vec::new();
    let mut width = None;
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1 + usize::from(has_header);
        let record = record.map_err(|e| Error::parse(row, None, e.to_string()))?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows { row, expected, found: record.len() });
        }
        if label_column >= record.len() {
            return Err(Error::InvalidConfig(format!(
                "label column {label_column} out of range for {} columns",
                record.len()
            )));
        }
        let mut features = Vec::with_capacity(record.len() - 1);
        for (c, cell) in record.iter().enumerate() {
            if c == label_column {
                continue;
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(row, Some(c + 1), format!("non-numeric feature {cell:?}")))?;
            features.push(v);
        }
        let label = mapping.map(&record[label_column], row, Some(label_column + 1))?;
        points.push(SamplePoint::labeled(features, label)?);
    }
    Dataset::new(points, "csv")
}

/// Per-feature min-max scaling to `[0, 1]`, fit on one dataset and applied
/// to others. Constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(dataset: &Dataset) -> Self {
        let d = dataset.feature_dim;
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for p in &dataset.points {
            for (k, &v) in p.features.iter().enumerate() {
                mins[k] = mins[k].min(v);
                maxs[k] = maxs[k].max(v);
            }
        }
        MinMaxScaler { mins, maxs }
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        crate::numerics::check_dim(self.mins.len(), dataset.feature_dim)?;
        let points = dataset
            .points
            .iter()
            .map(|p| {
                let x = p
                    .features
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let span = self.maxs[k] - self.mins[k];
                        if span > 0.0 {
                            (v - self.mins[k]) / span
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Ok(SamplePoint::new(Vector::new(x)?, p.label))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(points, format!("{} | minmax", dataset.source))
    }
}

/// Seeded shuffle, then the first `floor(train_fraction * n)` points train.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must be in [0, 1], got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (train_fraction * dataset.len() as f64).floor() as usize;
    let pick = |idx: &[usize], tag: &str| Dataset {
        points: idx.iter().map(|&i| dataset.points[i].clone()).collect(),
        feature_dim: dataset.feature_dim,
        source: format!("{} | {tag} seed={seed}", dataset.source),
    };
    Ok((pick(&order[..cut], "train"), pick(&order[cut..], "test")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub error_rate: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub wall_time_seconds: f64,
    pub n_points: usize,
    /// Effective configuration echo.
    pub config: serde_json::Value,
}

pub fn evaluate(model: &TrainedModel, test: &Dataset) -> Result<RunReport> {
    let start = Instant::now();
    for (index, p) in test.points.iter().enumerate() {
        crate::svm::class_label(p, index)?;
    }
    let report = predict(model, &test.points)?;
    Ok(RunReport {
        error_rate: report.error_rate.unwrap_or(0.0),
        iterations_used: model.diagnostics.iterations_used,
        converged: model.diagnostics.converged,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        n_points: test.len(),
        config: serde_json::json!({
            "kernel": model.kernel,
            "cost_c": model.diagnostics.cost_c,
            "loading": model.diagnostics.loading,
        }),
    })
}

const MODEL_FORMAT: &str = "gabp-kernel-model";
const MODEL_VERSION: u32 = 1;

/// A model plus the feature scaling it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub model: TrainedModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<MinMaxScaler>,
    /// Raw label treated as `+1` at training time, if one was configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile<B> {
    format: String,
    version: u32,
    #[serde(flatten)]
    bundle: B,
}

pub fn save_bundle<W: Write>(bundle: &ModelBundle, out: W) -> Result<()> {
    serde_json::to_writer_pretty(
        out,
        &ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            bundle,
        },
    )?;
    Ok(())
}

pub fn load_bundle<R: Read>(reader: R) -> Result<ModelBundle> {
    let file: ModelFile<ModelBundle> = serde_json::from_reader(reader)?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported model file {} v{}",
            file.format, file.version
        )));
    }
    let model = &file.bundle.model;
    crate::numerics::check_dim(model.training_points.len(), model.weights.len())?;
    if let Some(s) = &file.bundle.scaler {
        crate::numerics::check_dim(model.feature_dim(), s.mins.len())?;
    }
    Ok(file.bundle)
}

pub fn save_model<W: Write>(model: &TrainedModel, out: W) -> Result<()> {
    save_bundle(
        &ModelBundle {
            model: model.clone(),
            scaler: None,
            positive_class: None,
        },
        out,
    )
}

pub fn load_model<R: Read>(reader: R) -> Result<TrainedModel> {
    Ok(load_bundle(reader)?.model)
}

/// System file: `n`, then `n` rows of `n` reals, then the `n` entries of `b`.
pub fn parse_system<R: BufRead>(reader: R) -> Result<(SymmetricMatrix, Vector)> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(k, l)| l.map(|l| (k + 1, l)))
        .filter(|r| r.as_ref().map_or(true, |(_, l)| !l.trim().is_empty()));
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(0, None, format!("unexpected end of file, expected {what}")))
    };
    let (line, header) = next_line("order")?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, None, format!("invalid order {header:?}")))?;
    let parse_row = |line: usize, text: &str| -> Result<Vec<f64>> {
        let row = text
            .split_whitespace()
            .enumerate()
            .map(|(c, t)| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(line, Some(c + 1), format!("invalid number {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != n {
            return Err(Error::RaggedRows { row: line, expected: n, found: row.len() });
        }
        Ok(row)
    };
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, text) = next_line("matrix row")?;
        rows.push(parse_row(line, &text)?);
    }
    let (line, text) = next_line("right-hand side")?;
    let b = parse_row(line, &text)?;
    Ok((SymmetricMatrix::from_rows(&rows)?, Vector::new(b)?))
}

pub fn write_system<W: Write>(w: &SymmetricMatrix, b: &Vector, mut out: W) -> Result<()> {
    let n = w.order();
    writeln!(out, "{n}")?;
    for i in 0..n {
        let row: Vec<String> = w.row(i).iter().map(f64::to_string).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    let rhs: Vec<String> = b.iter().map(f64::to_string).collect();
    writeln!(out, "{}", rhs.join(" "))?;
    Ok(())
}
