//! Experiment harness: load a dataset, run one method over a λ grid (and
//! over seeds for randomized methods), and report the best test error with
//! separate preprocessing and training times.
//!
//! Regression error is `100 × MSE` on responses scaled to `[-1, 1]` with the
//! training range; classification error is the misclassification rate in
//! percent.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::baselines::{
    default_lkrf_radius, eerf_score, fit_selected, kernel_train_exact, lkrf_reweight, rks_train,
    KernelKind, KernelModel, ReweightedFeatureSet,
};
use crate::clock::Stopwatch;
use crate::data::{
    bandwidth_heuristic, load_csv, split, Dataset, RawDataset, Schema, Standardizer, Task,
    DEFAULT_NEIGHBOUR_RANK,
};
use crate::error::{Error, Result};
use crate::features::{binomial, BaseKernel, CandidateSet};
use crate::greedy::{mfga_train, GreedyConfig, SparseFit, SparseModel};
use crate::objective::{Loss, Objective};

/// Methods in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rks,
    Lkrf,
    Eerf,
    Mfga,
    Gk,
    Glk,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Rks,
        Method::Lkrf,
        Method::Eerf,
        Method::Mfga,
        Method::Gk,
        Method::Glk,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Rks => "RKS",
            Method::Lkrf => "LKRF",
            Method::Eerf => "EERF",
            Method::Mfga => "MFGA",
            Method::Gk => "GK",
            Method::Glk => "GLK",
        }
    }

    /// Whether results are averaged over seeds.
    pub fn is_randomized(self) -> bool {
        matches!(self, Method::Rks | Method::Lkrf | Method::Eerf)
    }

    pub fn is_kernel_machine(self) -> bool {
        matches!(self, Method::Gk | Method::Glk)
    }

    fn uses_pool(self) -> bool {
        matches!(self, Method::Lkrf | Method::Eerf)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Gaussian bandwidth: a fixed value or the nearest-neighbour heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    #[default]
    Heuristic,
    Fixed(f64),
}

impl Serialize for Bandwidth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bandwidth::Heuristic => s.serialize_str("heuristic"),
            Bandwidth::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Bandwidth::Fixed(v)),
            Raw::Name(n) if n == "heuristic" => Ok(Bandwidth::Heuristic),
            Raw::Name(n) => Err(serde::de::Error::custom(format!(
                "sigma must be a number or \"heuristic\", got \"{n}\""
            ))),
        }
    }
}

/// Schema given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaSource {
    Inline(Schema),
    File(PathBuf),
}

impl SchemaSource {
    pub fn resolve(&self, base: &Path) -> Result<Schema> {
        match self {
            SchemaSource::Inline(s) => Ok(s.clone()),
            SchemaSource::File(p) => Schema::load(base.join(p)),
        }
    }
}

fn default_test_fraction() -> f64 {
    0.2
}

/// Where the data comes from. Without a test file the training file is split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub train: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    pub schema: SchemaSource,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

impl DatasetConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.train
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }
}

/// `{10⁻⁵, 10⁻⁴, …, 10⁵}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-5..=5).map(|e| 10f64.powi(e)).collect()
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_fraction() -> f64 {
    1.0
}

fn default_k() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// One experiment, read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub method: Method,
    /// Number of features `M` (ignored by kernel machines).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Pool size for LKRF / EERF.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<usize>,
    /// Gaussian Taylor order for MFGA; the task default otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taylor_order: Option<u32>,
    #[serde(default = "default_lambda_grid")]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub sigma: Bandwidth,
    /// `N₀/N` for kernel machines.
    #[serde(default = "default_fraction")]
    pub n0_fraction: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Features added per greedy iteration.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lkrf_radius: Option<f64>,
    /// Run the first grid cell once before timing anything.
    #[serde(default = "default_true")]
    pub warmup: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A config with default grid, seeds and bandwidth.
    pub fn new(dataset: DatasetConfig, method: Method, m: Option<usize>) -> Self {
        ExperimentConfig {
            dataset,
            method,
            m,
            m0: None,
            taylor_order: None,
            lambdas: default_lambda_grid(),
            sigma: Bandwidth::Heuristic,
            n0_fraction: 1.0,
            seeds: default_seeds(),
            k: 1,
            lkrf_radius: None,
            warmup: true,
            output: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // relative data paths are relative to the config file
        if let Some(base) = path.parent() {
            cfg.dataset.train = base.join(&cfg.dataset.train);
            if let Some(t) = &cfg.dataset.test {
                cfg.dataset.test = Some(base.join(t));
            }
            if let SchemaSource::File(p) = &cfg.dataset.schema {
                cfg.dataset.schema = SchemaSource::File(base.join(p));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no data.
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::Config("λ grid is empty".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("λ = {l} must be finite and nonnegative")));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if let Bandwidth::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigma = {s} must be positive")));
            }
        }
        if !(self.dataset.test_fraction > 0.0 && self.dataset.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        if !(self.n0_fraction > 0.0 && self.n0_fraction <= 1.0) {
            return Err(Error::Config("n0_fraction must lie in (0, 1]".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !self.method.is_kernel_machine() {
            match self.m {
                None | Some(0) => {
                    return Err(Error::Config(format!(
                        "{} needs a positive feature count m",
                        self.method.label()
                    )))
                }
                Some(m) => {
                    if self.method.uses_pool() {
                        let m0 = self.m0.ok_or_else(|| {
                            Error::Config(format!("{} needs a pool size m0", self.method.label()))
                        })?;
                        if m > m0 {
                            return Err(Error::Config(format!("M = {m} exceeds M0 = {m0}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Candidate set MFGA uses for `d` features.
    pub fn mfga_candidates(&self, d: usize, task: Task, sigma: f64) -> Result<CandidateSet> {
        match self.taylor_order {
            None => CandidateSet::for_task(d, task, sigma),
            Some(order) => {
                let mut kernels = vec![BaseKernel::Gaussian { sigma, order }];
                if task == Task::Classification {
                    kernels.push(BaseKernel::Linear);
                }
                CandidateSet::build(d, kernels, None)
            }
        }
    }

    /// `M₀` MFGA would use for `d` features, without building the set.
    pub fn mfga_candidate_count(&self, d: usize, task: Task) -> u128 {
        let order = self.taylor_order.unwrap_or(match task {
            Task::Classification => 1,
            Task::Regression => 2,
        });
        let gaussian = binomial((d as u64) + order as u64, order as u64);
        match task {
            Task::Classification => gaussian + d as u128,
            Task::Regression => gaussian,
        }
    }
}

/// Unscaled train and test rows: the test file if given, otherwise a
/// seeded split of the training file.
pub fn load_raw_splits(cfg: &DatasetConfig) -> Result<(RawDataset, RawDataset)> {
    let schema = cfg.schema.resolve(Path::new(""))?;
    let raw = load_csv(&cfg.train, &schema)?;
    match &cfg.test {
        Some(p) => Ok((raw, load_csv(p, &schema)?)),
        None => split(&raw, cfg.test_fraction, cfg.split_seed),
    }
}

/// Standardized train and test splits plus the bandwidth in use.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
    pub sigma: f64,
}

impl PreparedData {
    /// Wrap already standardized splits. `Bandwidth::Heuristic` uses the
    /// mean 50th-nearest-neighbour distance on the training split.
    pub fn new(name: impl Into<String>, train: Dataset, test: Dataset, sigma: Bandwidth, seed: u64) -> Result<Self> {
        if train.dim() != test.dim() {
            return Err(Error::DimensionMismatch {
                expected: train.dim(),
                found: test.dim(),
            });
        }
        if train.task != test.task {
            return Err(Error::Config("train and test tasks differ".into()));
        }
        let sigma = match sigma {
            Bandwidth::Fixed(s) => s,
            Bandwidth::Heuristic => bandwidth_heuristic(&train, DEFAULT_NEIGHBOUR_RANK, None, seed)?,
        };
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "bandwidth heuristic produced {sigma}; set sigma explicitly"
            )));
        }
        Ok(PreparedData {
            name: name.into(),
            train,
            test,
            sigma,
        })
    }

    /// Load, split if needed, and standardize with training statistics.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let (train_raw, test_raw) = load_raw_splits(&cfg.dataset)?;
        let standardizer = Standardizer::fit(&train_raw)?;
        let train = standardizer.apply(&train_raw)?;
        let test = standardizer.apply(&test_raw)?;
        PreparedData::new(cfg.dataset.display_name(), train, test, cfg.sigma, cfg.dataset.split_seed)
    }

    pub fn task(&self) -> Task {
        self.train.task
    }
}

/// Test error in percent.
pub fn test_error(task: Task, predictions: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let n = y.len().max(1) as f64;
    match task {
        Task::Classification => {
            let wrong = predictions
                .iter()
                .zip(y.iter())
                .filter(|(&p, &t)| crate::greedy::sign(p) != t)
                .count();
            100.0 * wrong as f64 / n
        }
        Task::Regression => {
            let sq: f64 = predictions
                .iter()
                .zip(y.iter())
                .map(|(p, t)| (p - t) * (p - t))
                .sum();
            100.0 * sq / n
        }
    }
}

/// Seconds spent in each phase; kept apart from the deterministic fields.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_pp: Option<f64>,
    pub t_train: f64,
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub dataset: String,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0_fraction: Option<f64>,
    /// Test error in percent at the best λ (mean over seeds when randomized).
    pub test_error: f64,
    /// Standard error over seeds, randomized methods only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_norm: Option<f64>,
    pub lambda: f64,
    pub sigma: f64,
    pub timing: Timing,
}

/// Any trained model the harness can produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    Sparse(SparseModel),
    Kernel(KernelModel),
}

impl TrainedModel {
    pub fn task(&self) -> Task {
        match self {
            TrainedModel::Sparse(m) => m.task,
            TrainedModel::Kernel(m) => m.task,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            TrainedModel::Sparse(m) => m.predict(x),
            TrainedModel::Kernel(m) => m.predict(x),
        }
    }

    pub fn predict_rows(&self, x: ndarray::ArrayView2<f64>) -> Result<Array1<f64>> {
        match self {
            TrainedModel::Sparse(m) => m.predict_rows(x),
            TrainedModel::Kernel(m) => m.predict_rows(x),
        }
    }
}

/// Self-contained model file: prediction needs no training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub method: Method,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
    pub model: TrainedModel,
}

impl ModelDocument {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }

    /// Predictions on unscaled rows, in the scaled response space.
    pub fn predict_raw(&self, raw: &RawDataset) -> Result<Array1<f64>> {
        let ds = match &self.standardizer {
            Some(s) => s.apply(raw)?,
            None => Dataset::from_arrays(raw.features.clone(), raw.responses.clone(), raw.task)?,
        };
        self.model.predict_rows(ds.x.view())
    }

    /// Test error in percent on unscaled rows.
    pub fn evaluate(&self, raw: &RawDataset) -> Result<f64> {
        let ds = match &self.standardizer {
            Some(s) => s.apply(raw)?,
            None => Dataset::from_arrays(raw.features.clone(), raw.responses.clone(), raw.task)?,
        };
        let p = self.model.predict_rows(ds.x.view())?;
        Ok(test_error(raw.task, p.view(), ds.y.view()))
    }
}

/// Result row plus the model trained at the best λ (first seed).
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub result: BenchmarkResult,
    pub model: ModelDocument,
}

/// Output of one `(λ, seed)` cell.
struct Cell {
    error: f64,
    t_pp: Option<f64>,
    t_train: f64,
    theta_norm: Option<f64>,
    model: Option<TrainedModel>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn standard_error(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    Some((var / v.len() as f64).sqrt())
}

fn sparse_error(model: &SparseModel, test: &Dataset) -> Result<f64> {
    let p = model.predict_rows(test.x.view())?;
    Ok(test_error(test.task, p.view(), test.y.view()))
}

/// Summary over seeds at one λ: the mean error, its standard error, and
/// the mean timings.
struct GridPoint {
    lambda: f64,
    errors: Vec<f64>,
    t_pp: Option<f64>,
    t_train: f64,
    theta_norm: Option<f64>,
    model: Option<TrainedModel>,
}

impl GridPoint {
    fn from_cells(lambda: f64, cells: Vec<Cell>) -> Self {
        let errors: Vec<f64> = cells.iter().map(|c| c.error).collect();
        let t_pp = if cells.iter().all(|c| c.t_pp.is_some()) {
            Some(mean(&cells.iter().map(|c| c.t_pp.unwrap_or(0.0)).collect::<Vec<_>>()))
        } else {
            None
        };
        let t_train = mean(&cells.iter().map(|c| c.t_train).collect::<Vec<_>>());
        let norms: Vec<f64> = cells.iter().filter_map(|c| c.theta_norm).collect();
        let theta_norm = if norms.is_empty() { None } else { Some(mean(&norms)) };
        let model = cells.into_iter().next().and_then(|c| c.model);
        GridPoint {
            lambda,
            errors,
            t_pp,
            t_train,
            theta_norm,
            model,
        }
    }

    fn mean_error(&self) -> f64 {
        mean(&self.errors)
    }
}

/// Lowest mean error; earlier grid entries win ties.
fn best_point(points: Vec<GridPoint>) -> GridPoint {
    points
        .into_iter()
        .reduce(|best, p| {
            if p.mean_error().total_cmp(&best.mean_error()) == Ordering::Less {
                p
            } else {
                best
            }
        })
        .expect("λ grid is nonempty")
}

/// Pool of random features scored once per seed.
fn scored_pool(cfg: &ExperimentConfig, data: &PreparedData, seed: u64, m: usize) -> Result<(ReweightedFeatureSet, f64)> {
    let m0 = cfg.m0.ok_or_else(|| Error::Config("pool size m0 missing".into()))?;
    let clock = Stopwatch::start();
    let pool = Arc::new(CandidateSet::random_fourier(data.train.dim(), m0, data.sigma, seed)?);
    let set = match cfg.method {
        Method::Lkrf => {
            let radius = cfg.lkrf_radius.unwrap_or_else(|| default_lkrf_radius(m0, m));
            lkrf_reweight(pool, &data.train, radius, m)?
        }
        _ => eerf_score(pool, &data.train, m)?,
    };
    Ok((set, clock.seconds()))
}

fn check_mfga_size(cfg: &ExperimentConfig, data: &PreparedData, m: usize) -> Result<()> {
    let m0 = cfg.mfga_candidate_count(data.train.dim(), data.task());
    if m as u128 > m0 {
        return Err(Error::Config(format!("M = {m} exceeds M0 = {m0}")));
    }
    Ok(())
}

fn kernel_kind(method: Method) -> KernelKind {
    if method == Method::Glk {
        KernelKind::GaussianLinear
    } else {
        KernelKind::Gaussian
    }
}

fn run_kernel_cell(cfg: &ExperimentConfig, data: &PreparedData, lambda: f64) -> Result<Cell> {
    let clock = Stopwatch::start();
    let model = kernel_train_exact(
        &data.train,
        kernel_kind(cfg.method),
        data.sigma,
        lambda,
        cfg.n0_fraction,
        cfg.seeds[0],
    )?;
    let t_train = clock.seconds();
    let p = model.predict_rows(data.test.x.view())?;
    Ok(Cell {
        error: test_error(data.task(), p.view(), data.test.y.view()),
        t_pp: None,
        t_train,
        theta_norm: None,
        model: Some(TrainedModel::Kernel(model)),
    })
}

/// Run one method over the λ grid (and seeds) on prepared data.
pub fn run_prepared(cfg: &ExperimentConfig, data: &PreparedData) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let task = data.task();
    let m = cfg.m.unwrap_or(0);

    let points: Vec<GridPoint> = match cfg.method {
        Method::Mfga => {
            check_mfga_size(cfg, data, m)?;
            let clock = Stopwatch::start();
            let candidates = Arc::new(cfg.mfga_candidates(data.train.dim(), task, data.sigma)?);
            let design = candidates.evaluate_design(data.train.x.view())?;
            let t_pp = clock.seconds();
            let greedy = GreedyConfig::new(m).per_iteration(cfg.k);
            let run = |lambda: f64| -> Result<Cell> {
                let obj = Objective::new(design.view(), data.train.y.view(), Loss::for_task(task), lambda)?;
                let clock = Stopwatch::start();
                let (fit, _) = mfga_train(&obj, &greedy)?;
                let t_train = clock.seconds();
                let model = SparseModel::new(candidates.clone(), task, fit)?;
                Ok(Cell {
                    error: sparse_error(&model, &data.test)?,
                    t_pp: Some(t_pp),
                    t_train,
                    theta_norm: Some(model.theta_norm()),
                    model: Some(TrainedModel::Sparse(model)),
                })
            };
            if cfg.warmup {
                run(cfg.lambdas[0])?;
            }
            cfg.lambdas
                .iter()
                .map(|&l| Ok(GridPoint::from_cells(l, vec![run(l)?])))
                .collect::<Result<_>>()?
        }
        Method::Rks => {
            let run = |lambda: f64, seed: u64| -> Result<Cell> {
                let (model, trace) = rks_train(&data.train, m, data.sigma, seed, lambda)?;
                Ok(Cell {
                    error: sparse_error(&model, &data.test)?,
                    t_pp: None,
                    t_train: trace.train_secs,
                    theta_norm: Some(model.theta_norm()),
                    model: Some(TrainedModel::Sparse(model)),
                })
            };
            if cfg.warmup {
                run(cfg.lambdas[0], cfg.seeds[0])?;
            }
            cfg.lambdas
                .iter()
                .map(|&l| {
                    let cells = cfg.seeds.iter().map(|&s| run(l, s)).collect::<Result<Vec<_>>>()?;
                    Ok(GridPoint::from_cells(l, cells))
                })
                .collect::<Result<_>>()?
        }
        Method::Lkrf | Method::Eerf => {
            if cfg.warmup {
                scored_pool(cfg, data, cfg.seeds[0], m)?;
            }
            let pools = cfg
                .seeds
                .iter()
                .map(|&s| scored_pool(cfg, data, s, m))
                .collect::<Result<Vec<_>>>()?;
            cfg.lambdas
                .iter()
                .map(|&l| {
                    let cells = pools
                        .iter()
                        .map(|(set, t_pp)| {
                            let (model, trace) = fit_selected(set, &data.train, l)?;
                            Ok(Cell {
                                error: sparse_error(&model, &data.test)?,
                                t_pp: Some(*t_pp),
                                t_train: trace.train_secs,
                                theta_norm: Some(model.theta_norm()),
                                model: Some(TrainedModel::Sparse(model)),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(GridPoint::from_cells(l, cells))
                })
                .collect::<Result<_>>()?
        }
        Method::Gk | Method::Glk => {
            if cfg.warmup {
                run_kernel_cell(cfg, data, cfg.lambdas[0])?;
            }
            cfg.lambdas
                .iter()
                .map(|&l| Ok(GridPoint::from_cells(l, vec![run_kernel_cell(cfg, data, l)?])))
                .collect::<Result<_>>()?
        }
    };

    let best = best_point(points);
    let result = BenchmarkResult {
        dataset: data.name.clone(),
        method: cfg.method,
        m: (!cfg.method.is_kernel_machine()).then_some(m),
        m0: match cfg.method {
            Method::Lkrf | Method::Eerf => cfg.m0,
            Method::Mfga => Some(cfg.mfga_candidate_count(data.train.dim(), task) as usize),
            _ => None,
        },
        n0_fraction: cfg.method.is_kernel_machine().then_some(cfg.n0_fraction),
        test_error: best.mean_error(),
        stderr: if cfg.method.is_randomized() {
            standard_error(&best.errors)
        } else {
            None
        },
        theta_norm: best.theta_norm,
        lambda: best.lambda,
        sigma: data.sigma,
        timing: Timing {
            t_pp: best.t_pp,
            t_train: best.t_train,
        },
    };
    let model = ModelDocument {
        method: cfg.method,
        lambda: best.lambda,
        standardizer: data.train.standardizer.clone(),
        model: best.model.expect("every cell keeps its model"),
    };
    Ok(ExperimentOutcome { result, model })
}

/// Load the configured data and run the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let data = PreparedData::load(cfg)?;
    run_prepared(cfg, &data)
}

/// `count` log-spaced feature counts ending at `max`, deduplicated.
pub fn default_sweep_sizes(max: usize, count: usize) -> Vec<usize> {
    if max == 0 || count == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let t = if count == 1 { 1.0 } else { i as f64 / (count - 1) as f64 };
            ((max as f64).powf(t)).round().max(1.0) as usize
        })
        .collect();
    out.dedup();
    out
}

/// One result per feature count in `m_values`, reusing shared work: the
/// MFGA design and a single greedy run per λ, and one scored pool per seed
/// for LKRF/EERF. Shared preprocessing time is split evenly across rows.
pub fn sweep_prepared(cfg: &ExperimentConfig, data: &PreparedData, m_values: &[usize]) -> Result<Vec<BenchmarkResult>> {
    if m_values.is_empty() {
        return Err(Error::Config("no feature counts to sweep".into()));
    }
    if m_values.windows(2).any(|w| w[0] >= w[1]) || m_values[0] == 0 {
        return Err(Error::Config("feature counts must be positive and strictly increasing".into()));
    }
    let max_m = *m_values.last().expect("nonempty");
    let mut base = cfg.clone();
    base.m = Some(max_m);
    base.validate()?;
    let task = data.task();
    let rows = m_values.len() as f64;

    let row = |m: usize, best: &GridPoint, m0: Option<usize>| BenchmarkResult {
        dataset: data.name.clone(),
        method: cfg.method,
        m: Some(m),
        m0,
        n0_fraction: None,
        test_error: best.mean_error(),
        stderr: if cfg.method.is_randomized() {
            standard_error(&best.errors)
        } else {
            None
        },
        theta_norm: best.theta_norm,
        lambda: best.lambda,
        sigma: data.sigma,
        timing: Timing {
            t_pp: best.t_pp,
            t_train: best.t_train,
        },
    };

    match cfg.method {
        Method::Mfga => {
            check_mfga_size(&base, data, max_m)?;
            let clock = Stopwatch::start();
            let candidates = Arc::new(base.mfga_candidates(data.train.dim(), task, data.sigma)?);
            let design = candidates.evaluate_design(data.train.x.view())?;
            let test_design = candidates.evaluate_design(data.test.x.view())?;
            let t_pp = clock.seconds() / rows;
            let m0 = Some(candidates.len());

            // per λ: one greedy run, snapshots at every requested size
            let mut per_m: Vec<Vec<GridPoint>> = m_values.iter().map(|_| Vec::new()).collect();
            for &lambda in &cfg.lambdas {
                let obj = Objective::new(design.view(), data.train.y.view(), Loss::for_task(task), lambda)?;
                let (_, trace) = mfga_train(&obj, &GreedyConfig::new(max_m).per_iteration(cfg.k))?;
                for (slot, &m) in per_m.iter_mut().zip(m_values) {
                    let (fit, t_train) = match trace.fit_at(m) {
                        Some(fit) => {
                            let t = trace
                                .records
                                .iter()
                                .find(|r| r.coefficients.len() == m)
                                .map(|r| r.elapsed_secs)
                                .unwrap_or(trace.train_secs);
                            (fit, t)
                        }
                        None => {
                            // multi-pick skipped this size; run it on its own
                            let clock = Stopwatch::start();
                            let (fit, _) = mfga_train(&obj, &GreedyConfig::new(m).per_iteration(cfg.k))?;
                            (fit, clock.seconds())
                        }
                    };
                    let error = design_error(task, &test_design, &fit, &data.test.y);
                    slot.push(GridPoint {
                        lambda,
                        errors: vec![error],
                        t_pp: Some(t_pp),
                        t_train,
                        theta_norm: Some(fit.theta_norm()),
                        model: None,
                    });
                }
            }
            Ok(per_m
                .into_iter()
                .zip(m_values)
                .map(|(points, &m)| row(m, &best_point(points), m0))
                .collect())
        }
        Method::Rks => m_values
            .iter()
            .map(|&m| {
                let mut c = cfg.clone();
                c.m = Some(m);
                c.warmup = false;
                Ok(run_prepared(&c, data)?.result)
            })
            .collect(),
        Method::Lkrf | Method::Eerf => {
            let pools = cfg
                .seeds
                .iter()
                .map(|&s| scored_pool(&base, data, s, max_m))
                .collect::<Result<Vec<_>>>()?;
            m_values
                .iter()
                .map(|&m| {
                    let points = cfg
                        .lambdas
                        .iter()
                        .map(|&l| {
                            let cells = pools
                                .iter()
                                .map(|(set, t_pp)| {
                                    let set = set.with_size(m)?;
                                    let (model, trace) = fit_selected(&set, &data.train, l)?;
                                    Ok(Cell {
                                        error: sparse_error(&model, &data.test)?,
                                        t_pp: Some(t_pp / rows),
                                        t_train: trace.train_secs,
                                        theta_norm: Some(model.theta_norm()),
                                        model: None,
                                    })
                                })
                                .collect::<Result<Vec<_>>>()?;
                            Ok(GridPoint::from_cells(l, cells))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(row(m, &best_point(points), cfg.m0))
                })
                .collect()
        }
        Method::Gk | Method::Glk => {
            let mut c = cfg.clone();
            c.warmup = false;
            let once = run_prepared(&c, data)?.result;
            Ok(m_values.iter().map(|_| once.clone()).collect())
        }
    }
}

fn design_error(task: Task, test_design: &Array2<f64>, fit: &SparseFit, y: &Array1<f64>) -> f64 {
    let cols = test_design.select(Axis(1), &fit.support);
    let p = cols.dot(&Array1::from(fit.coefficients.clone()));
    test_error(task, p.view(), y.view())
}

/// Load the configured data and sweep.
pub fn sweep(cfg: &ExperimentConfig, m_values: &[usize]) -> Result<Vec<BenchmarkResult>> {
    cfg.validate()?;
    let data = PreparedData::load(cfg)?;
    sweep_prepared(cfg, &data, m_values)
}

/// One point of a test-error curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub method: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub error: f64,
    pub stderr: Option<f64>,
}

impl From<&BenchmarkResult> for PlotRow {
    fn from(r: &BenchmarkResult) -> Self {
        PlotRow {
            method: r.method.label().to_string(),
            m: r.m.unwrap_or(0),
            error: r.test_error,
            stderr: r.stderr,
        }
    }
}

/// CSV with columns `method,M,error,stderr`; missing stderr is an empty cell.
pub fn write_plot_csv<W: Write>(results: &[BenchmarkResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(PlotRow::from(r))?;
    }
    w.flush().map_err(|e| Error::io("<plot csv>", e))?;
    Ok(())
}

pub fn read_plot_csv<R: Read>(input: R) -> Result<Vec<PlotRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<PlotRow>, _>>()?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Results from a file holding either one result or a list of them.
pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<BenchmarkResult>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<BenchmarkResult>),
        One(Box<BenchmarkResult>),
    }
    Ok(match read_json::<OneOrMany>(path)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(r) => vec![*r],
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "--".into())
}

/// Render results in table order: by dataset, then RKS, LKRF, EERF, MFGA, GK, GLK.
pub fn render_table(results: &[BenchmarkResult]) -> String {
    let mut rows: Vec<&BenchmarkResult> = results.iter().collect();
    rows.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(a.method.cmp(&b.method))
            .then(a.m.cmp(&b.m))
    });
    let header = ["Dataset", "Method", "M", "M0", "N0/N", "t_pp", "t_train", "error (%)"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            let error = match r.stderr {
                Some(s) => format!("{:.2} ({s:.0e})", r.test_error),
                None => format!("{:.2}", r.test_error),
            };
            [
                r.dataset.clone(),
                r.method.label().to_string(),
                r.m.map(|v| v.to_string()).unwrap_or_else(|| "--".into()),
                r.m0.map(|v| v.to_string()).unwrap_or_else(|| "--".into()),
                fmt_opt(r.n0_fraction, 2),
                fmt_opt(r.timing.t_pp, 2),
                format!("{:.2}", r.timing.t_train),
                error,
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "| {} |", padded.join(" | "));
    };
    line(&header.map(String::from), &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for r in &body {
        line(r, &mut out);
    }
    out
}

/// Load every result file and render one table.
pub fn compare<P: AsRef<Path>>(paths: &[P]) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::Config("compare needs at least one result file".into()));
    }
    let mut all = Vec::new();
    for p in paths {
        all.extend(load_results(p)?);
    }
    Ok(render_table(&all))
}

/// Design-matrix statistics for the MFGA candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub dataset: String,
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub sigma: f64,
    pub m0: usize,
    pub preprocess_secs: f64,
    pub column_norm_min: f64,
    pub column_norm_max: f64,
    pub column_norm_mean: f64,
    /// Largest `Σ φ²` over training rows among Gaussian Taylor features; at most 1.
    pub max_gaussian_energy: f64,
    /// Largest `‖x‖²` over training rows; the linear kernel's diagonal bound.
    pub max_row_sq_norm: f64,
}

pub fn featurize_prepared(cfg: &ExperimentConfig, data: &PreparedData) -> Result<FeatureSummary> {
    let clock = Stopwatch::start();
    let candidates = cfg.mfga_candidates(data.train.dim(), data.task(), data.sigma)?;
    let design = candidates.evaluate_design(data.train.x.view())?;
    let preprocess_secs = clock.seconds();

    let norms: Vec<f64> = design
        .axis_iter(Axis(1))
        .map(|c| c.dot(&c).sqrt())
        .collect();
    let gaussian: Vec<usize> = candidates
        .descriptors()
        .iter()
        .enumerate()
        .filter(|(_, d)| matches!(d.kind, crate::features::FeatureKind::TaylorGaussian { .. }))
        .map(|(j, _)| j)
        .collect();
    let max_gaussian_energy = design
        .rows()
        .into_iter()
        .map(|row| {
            gaussian
                .iter()
                .map(|&j| (row[j] / candidates.descriptors()[j].weight).powi(2))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let max_row_sq_norm = data
        .train
        .x
        .rows()
        .into_iter()
        .map(|r| r.dot(&r))
        .fold(0.0, f64::max);
    Ok(FeatureSummary {
        dataset: data.name.clone(),
        n_train: data.train.len(),
        n_test: data.test.len(),
        d: data.train.dim(),
        sigma: data.sigma,
        m0: candidates.len(),
        preprocess_secs,
        column_norm_min: norms.iter().copied().fold(f64::INFINITY, f64::min),
        column_norm_max: norms.iter().copied().fold(0.0, f64::max),
        column_norm_mean: mean(&norms),
        max_gaussian_energy,
        max_row_sq_norm,
    })
}

pub fn featurize(cfg: &ExperimentConfig) -> Result<FeatureSummary> {
    let data = PreparedData::load(cfg)?;
    featurize_prepared(cfg, &data)
}
