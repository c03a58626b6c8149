//! Dataset ingestion, standardization, splitting and the Gaussian
//! bandwidth heuristic.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Learning task a dataset is tagged with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

/// Column layout of an input CSV, read from a small JSON document:
/// `{"response": "y", "task": "classification", "positive_label": "1"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub response: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_label: Option<String>,
}

impl Schema {
    pub fn regression(response: impl Into<String>) -> Self {
        Schema {
            response: response.into(),
            task: Task::Regression,
            positive_label: None,
        }
    }

    pub fn classification(response: impl Into<String>, positive_label: impl Into<String>) -> Self {
        Schema {
            response: response.into(),
            task: Task::Classification,
            positive_label: Some(positive_label.into()),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Unscaled rows as read from disk. Classification responses are already
/// mapped to ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub features: Array2<f64>,
    pub responses: Array1<f64>,
    pub task: Task,
}

impl RawDataset {
    pub fn new(features: Array2<f64>, responses: Array1<f64>, task: Task) -> Result<Self> {
        if features.nrows() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: responses.len(),
            });
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one feature".into()));
        }
        if task == Task::Classification && responses.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidArgument(
                "classification responses must be -1 or +1".into(),
            ));
        }
        Ok(RawDataset {
            features,
            responses,
            task,
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn select_rows(&self, rows: &[usize]) -> RawDataset {
        RawDataset {
            features: self.features.select(Axis(0), rows),
            responses: self.responses.select(Axis(0), rows),
            task: self.task,
        }
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

fn labels_match(cell: &str, positive: &str) -> bool {
    let (cell, positive) = (cell.trim(), positive.trim());
    if cell == positive {
        return true;
    }
    match (parse_number(cell), parse_number(positive)) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

/// Read a headed, comma-separated file. Every column other than the response
/// is a feature, in file order.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyFile);
    }
    let response_col = headers
        .iter()
        .position(|h| h == schema.response)
        .ok_or_else(|| Error::MissingColumn(schema.response.clone()))?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != response_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::InvalidArgument("no feature columns besides the response".into()));
    }
    let positive = match schema.task {
        Task::Classification => Some(
            schema
                .positive_label
                .as_deref()
                .ok_or(Error::MissingPositiveLabel)?,
        ),
        Task::Regression => None,
    };

    let mut values = Vec::new();
    let mut responses = Vec::new();
    let mut labels = BTreeSet::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                row,
                expected: headers.len(),
                found: record.len(),
            });
        }
        for &c in &feature_cols {
            let cell = &record[c];
            let v = parse_number(cell).ok_or_else(|| Error::NonNumericCell {
                row,
                column: headers[c].to_string(),
                value: cell.to_string(),
            })?;
            values.push(v);
        }
        let cell = &record[response_col];
        let y = match positive {
            Some(pos) => {
                labels.insert(cell.to_string());
                if labels.len() > 2 {
                    return Err(Error::MulticlassLabels(labels.into_iter().collect()));
                }
                if labels_match(cell, pos) {
                    1.0
                } else {
                    -1.0
                }
            }
            None => parse_number(cell).ok_or_else(|| Error::NonNumericCell {
                row,
                column: headers[response_col].to_string(),
                value: cell.to_string(),
            })?,
        };
        responses.push(y);
    }
    if responses.is_empty() {
        return Err(Error::EmptyFile);
    }
    let n = responses.len();
    let features = Array2::from_shape_vec((n, feature_cols.len()), values)
        .expect("row-major buffer has n*d entries");
    RawDataset::new(features, Array1::from(responses), schema.task)
}

/// Per-column affine scaling fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    /// `(lo, hi)` of the training responses; regression only.
    pub response_range: Option<(f64, f64)>,
}

impl Standardizer {
    pub fn identity(d: usize) -> Self {
        Standardizer {
            feature_means: vec![0.0; d],
            feature_stds: vec![1.0; d],
            response_range: None,
        }
    }

    /// Column means and sample standard deviations (divisor N−1). Constant
    /// columns get std 1 so they standardize to zero.
    pub fn fit(raw: &RawDataset) -> Result<Self> {
        let n = raw.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "standardizer needs at least 2 rows, got {n}"
            )));
        }
        let d = raw.dim();
        let mut means = vec![0.0; d];
        let mut stds = vec![0.0; d];
        for (j, col) in raw.features.axis_iter(Axis(1)).enumerate() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            let std = var.sqrt();
            means[j] = mean;
            stds[j] = if std > 0.0 && std.is_finite() { std } else { 1.0 };
        }
        let response_range = match raw.task {
            Task::Regression => {
                let lo = raw.responses.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = raw.responses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi.is_nan() || lo.is_nan() || hi <= lo {
                    return Err(Error::DegenerateResponse(lo));
                }
                Some((lo, hi))
            }
            Task::Classification => None,
        };
        Ok(Standardizer {
            feature_means: means,
            feature_stds: stds,
            response_range,
        })
    }

    pub fn dim(&self) -> usize {
        self.feature_means.len()
    }

    pub fn scale_features(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        for ((v, m), s) in x.iter_mut().zip(&self.feature_means).zip(&self.feature_stds) {
            *v = (*v - m) / s;
        }
        Ok(())
    }

    /// Maps `[lo, hi]` onto `[-1, 1]`; identity when no range is fitted.
    pub fn scale_response(&self, y: f64) -> f64 {
        match self.response_range {
            Some((lo, hi)) => 2.0 * (y - lo) / (hi - lo) - 1.0,
            None => y,
        }
    }

    pub fn unscale_response(&self, y: f64) -> f64 {
        match self.response_range {
            Some((lo, hi)) => lo + (y + 1.0) * (hi - lo) / 2.0,
            None => y,
        }
    }

    pub fn apply(&self, raw: &RawDataset) -> Result<Dataset> {
        if raw.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: raw.dim(),
            });
        }
        let mut x = raw.features.clone();
        for mut row in x.axis_iter_mut(Axis(0)) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.feature_means[j]) / self.feature_stds[j];
            }
        }
        let y = match raw.task {
            Task::Regression => raw.responses.mapv(|v| self.scale_response(v)),
            Task::Classification => raw.responses.clone(),
        };
        Ok(Dataset {
            x,
            y,
            task: raw.task,
            standardizer: Some(self.clone()),
        })
    }
}

/// Standardized design rows and responses ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub task: Task,
    pub standardizer: Option<Standardizer>,
}

impl Dataset {
    /// Wraps already-prepared arrays without any scaling.
    pub fn from_arrays(x: Array2<f64>, y: Array1<f64>, task: Task) -> Result<Self> {
        let raw = RawDataset::new(x, y, task)?;
        Ok(Dataset {
            x: raw.features,
            y: raw.responses,
            task,
            standardizer: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            features: self.x.clone(),
            responses: self.y.clone(),
            task: self.task,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            task: self.task,
            standardizer: self.standardizer.clone(),
        }
    }
}

/// Fit on `raw` and apply to it in one go.
pub fn standardize(raw: &RawDataset) -> Result<Dataset> {
    Standardizer::fit(raw)?.apply(raw)
}

/// Random train/test partition. The training part has `⌈N·(1−f)⌉` rows,
/// clamped so both parts are nonempty; both keep file order.
pub fn split(raw: &RawDataset, test_fraction: f64, seed: u64) -> Result<(RawDataset, RawDataset)> {
    let n = raw.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} rows")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    // the small offset keeps exact products like 39644·(1−13083/39644) from rounding up
    let n_train = ((n as f64) * (1.0 - test_fraction) - 1e-9).ceil() as usize;
    let n_train = n_train.clamp(1, n - 1);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let (train, test) = order.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((raw.select_rows(train), raw.select_rows(test)))
}

/// Uniform sample of `⌊fraction·N⌋` rows without replacement, in original order.
pub fn subsample(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "subsample fraction {fraction} not in (0, 1]"
        )));
    }
    let n = ds.len();
    let keep = ((n as f64) * fraction).floor() as usize;
    if keep < 1 {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} of {n} rows keeps nothing"
        )));
    }
    if keep == n {
        return Ok(ds.clone());
    }
    let mut rows = rand::seq::index::sample(&mut seeded(seed), n, keep).into_vec();
    rows.sort_unstable();
    Ok(ds.select_rows(&rows))
}

/// Neighbour rank used by the bandwidth heuristic.
pub const DEFAULT_NEIGHBOUR_RANK: usize = 50;
/// Upper bound on the number of anchor rows the heuristic probes by default.
pub const DEFAULT_PROBE_LIMIT: usize = 1000;

/// Gaussian bandwidth rule of thumb: the mean, over `probe_count` random
/// anchor rows, of the ℓ2 distance to the `k`-th nearest other row.
///
/// `probe_count = None` probes `min(N, 1000)` anchors; a count of `N` or more
/// uses every row.
pub fn bandwidth_heuristic(
    ds: &Dataset,
    k: usize,
    probe_count: Option<usize>,
    seed: u64,
) -> Result<f64> {
    let n = ds.len();
    if k == 0 {
        return Err(Error::InvalidArgument("neighbour rank must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::TooFewRows { rows: n, k });
    }
    let probes = probe_count.unwrap_or(DEFAULT_PROBE_LIMIT.min(n));
    if probes == 0 {
        return Err(Error::InvalidArgument("probe count must be positive".into()));
    }
    let anchors: Vec<usize> = if probes >= n {
        (0..n).collect()
    } else {
        rand::seq::index::sample(&mut seeded(seed), n, probes).into_vec()
    };

    let x = &ds.x;
    let distances = crate::par::map_range(anchors.len(), |a| {
        let i = anchors[a];
        let anchor = x.row(i);
        let mut dist: Vec<f64> = x
            .axis_iter(Axis(0))
            .enumerate()
            .filter(|&(r, _)| r != i)
            .map(|(_, row)| {
                row.iter()
                    .zip(anchor.iter())
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
            })
            .collect();
        let (_, kth, _) = dist.select_nth_unstable_by(k - 1, f64::total_cmp);
        kth.sqrt()
    });
    Ok(distances.iter().sum::<f64>() / distances.len() as f64)
}
