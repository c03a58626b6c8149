//! Comparison methods: random Fourier features used as drawn (RKS), selected
//! from a larger pool by kernel alignment (LKRF) or by label correlation
//! (EERF), and exact kernel machines on a training subsample (GK, GLK).

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::data::{subsample, Dataset, Task};
use crate::error::{Error, Result};
use crate::features::CandidateSet;
use crate::greedy::{refit, sign, IterationRecord, SparseFit, SparseModel, TrainTrace, DEFAULT_TOL};
use crate::linalg::{cholesky_solve, lu_solve};
use crate::objective::{Loss, Objective};

/// Fit dense coefficients on every feature of `candidates`.
pub fn fit_all_features(
    candidates: Arc<CandidateSet>,
    ds: &Dataset,
    lambda: f64,
) -> Result<(SparseModel, TrainTrace)> {
    let clock = Stopwatch::start();
    let design = candidates.evaluate_design(ds.x.view())?;
    let obj = Objective::new(design.view(), ds.y.view(), Loss::for_task(ds.task), lambda)?;
    let support: Vec<usize> = (0..candidates.len()).collect();
    let warm = vec![0.0; support.len()];
    let r = refit(&obj, &support, &warm, DEFAULT_TOL)?;
    let fit = SparseFit {
        support: support.clone(),
        coefficients: r.coefficients,
    };
    let train_secs = clock.seconds();
    let trace = TrainTrace {
        initial_risk: obj.sparse_risk(&[], &[]),
        records: vec![IterationRecord {
            iteration: 1,
            selected: support,
            risk: r.risk,
            refit_iterations: r.iterations,
            theta_norm: fit.theta_norm(),
            elapsed_secs: train_secs,
            coefficients: fit.coefficients.clone(),
        }],
        preprocess_secs: 0.0,
        train_secs,
    };
    Ok((SparseModel::new(candidates, ds.task, fit)?, trace))
}

/// Random kitchen sinks: `m` data-independent random Fourier features,
/// fitted densely. Sampling is part of training; preprocessing time is zero.
pub fn rks_train(
    ds: &Dataset,
    m: usize,
    sigma: f64,
    seed: u64,
    lambda: f64,
) -> Result<(SparseModel, TrainTrace)> {
    let clock = Stopwatch::start();
    let candidates = Arc::new(CandidateSet::random_fourier(ds.dim(), m, sigma, seed)?);
    let (model, mut trace) = fit_all_features(candidates, ds, lambda)?;
    trace.train_secs = clock.seconds();
    Ok((model, trace))
}

/// How a pool of random features was ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolScoring {
    /// χ²-constrained kernel alignment weights.
    Alignment,
    /// Absolute empirical correlation with the responses.
    Correlation,
}

/// A scored pool of random features and its top-`M` selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ReweightedFeatureSet {
    pub pool: Arc<CandidateSet>,
    pub scoring: PoolScoring,
    /// Per-feature alignment (LKRF) or correlation (EERF) score.
    pub scores: Vec<f64>,
    /// Simplex weights from the alignment problem; the scores themselves for EERF.
    pub weights: Vec<f64>,
    /// Every pool index, best first.
    pub ranking: Vec<usize>,
    pub selected: Vec<usize>,
    /// Set when every score was equal and the ranking fell back to index order.
    pub degenerate: bool,
}

impl ReweightedFeatureSet {
    /// Same pool, different `M`.
    pub fn with_size(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.ranking.len() {
            return Err(Error::Config(format!(
                "cannot select {m} of {} pooled features",
                self.ranking.len()
            )));
        }
        Ok(ReweightedFeatureSet {
            selected: self.ranking[..m].to_vec(),
            ..self.clone()
        })
    }

    /// The selected features as a fresh set with scale `√(2/M)`.
    pub fn selected_candidates(&self) -> Result<CandidateSet> {
        self.pool.select_random_fourier(&self.selected)
    }
}

/// Indices sorted by decreasing key, ties to the lower index.
fn rank_descending(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    order
}

/// `a_m = (1/(N(N−1))) Σ_{n≠n'} y_n y_{n'} z_m(x_n) z_m(x_{n'})`, one per column.
pub fn alignment_scores(design: ArrayView2<f64>, y: &Array1<f64>) -> Vec<f64> {
    let n = design.nrows() as f64;
    let denom = n * (n - 1.0);
    design
        .axis_iter(Axis(1))
        .map(|col| {
            let (mut s, mut sq) = (0.0, 0.0);
            for (&z, &yn) in col.iter().zip(y.iter()) {
                let v = yn * z;
                s += v;
                sq += v * v;
            }
            (s * s - sq) / denom
        })
        .collect()
}

/// `s_m = |(1/N) Σ_n y_n z_m(x_n)|`, one per column.
pub fn correlation_scores(design: ArrayView2<f64>, y: &Array1<f64>) -> Vec<f64> {
    let n = design.nrows() as f64;
    design
        .axis_iter(Axis(1))
        .map(|col| (col.dot(y) / n).abs())
        .collect()
}

/// χ²-divergence of `q` from the uniform distribution: `M Σ q² − 1`.
pub fn chi2_from_uniform(q: &[f64]) -> f64 {
    let m = q.len() as f64;
    m * q.iter().map(|v| v * v).sum::<f64>() - 1.0
}

/// Weights `q_m = max(0, 1 + c(a_m − η)) / M` normalized to the simplex
/// for a fixed dual scale `c`; `sorted` holds the scores in decreasing order.
fn weights_for_scale(scores: &[f64], sorted: &[f64], c: f64) -> Vec<f64> {
    let m = scores.len() as f64;
    if c == 0.0 {
        return vec![1.0 / m; scores.len()];
    }
    // with the k largest scores active, Σq = 1 fixes η; keep the largest
    // k whose k-th term is still positive
    let mut prefix = 0.0;
    let mut eta = f64::NAN;
    for (k, &a) in sorted.iter().enumerate() {
        prefix += a;
        let kf = (k + 1) as f64;
        let candidate = (kf + c * prefix - m) / (c * kf);
        if 1.0 + c * (a - candidate) > 0.0 {
            eta = candidate;
        } else {
            break;
        }
    }
    scores
        .iter()
        .map(|&a| (1.0 + c * (a - eta)).max(0.0) / m)
        .collect()
}

/// Maximize `qᵀa` over the simplex subject to `χ²(q ‖ uniform) ≤ radius`.
///
/// The maximizer has the form `q_m ∝ max(0, 1 + c(a_m − η))`; the dual scale
/// `c` is found by bisection so the constraint is tight. Returns `None` when
/// the scores are all equal.
pub fn chi2_alignment_weights(scores: &[f64], radius: f64) -> Option<Vec<f64>> {
    let m = scores.len();
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == 0 || hi.is_nan() || lo.is_nan() || hi <= lo {
        return None;
    }
    let uniform = vec![1.0 / m as f64; m];
    if radius <= 0.0 {
        return Some(uniform);
    }
    // the vertex (or the face of tied maxima) is the most concentrated point
    let top: Vec<usize> = (0..m).filter(|&i| scores[i] == hi).collect();
    let vertex_divergence = m as f64 / top.len() as f64 - 1.0;
    if radius >= vertex_divergence {
        let mut q = vec![0.0; m];
        for &i in &top {
            q[i] = 1.0 / top.len() as f64;
        }
        return Some(q);
    }

    let normalized: Vec<f64> = scores.iter().map(|a| (a - lo) / (hi - lo)).collect();
    let mut sorted = normalized.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let divergence = |c: f64| chi2_from_uniform(&weights_for_scale(&normalized, &sorted, c));
    let mut c_lo = 0.0;
    let mut c_hi = 1.0;
    while divergence(c_hi) < radius {
        c_lo = c_hi;
        c_hi *= 2.0;
        if c_hi > 1e300 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (c_lo + c_hi);
        if mid <= c_lo || mid >= c_hi {
            break;
        }
        if divergence(mid) < radius {
            c_lo = mid;
        } else {
            c_hi = mid;
        }
    }
    Some(weights_for_scale(&normalized, &sorted, c_lo))
}

/// Score a pool by χ²-constrained kernel alignment and keep the top `m`.
pub fn lkrf_reweight(
    pool: Arc<CandidateSet>,
    ds: &Dataset,
    radius: f64,
    m: usize,
) -> Result<ReweightedFeatureSet> {
    if m == 0 || m > pool.len() {
        return Err(Error::Config(format!(
            "cannot select {m} of {} pooled features",
            pool.len()
        )));
    }
    if ds.len() < 2 {
        return Err(Error::InvalidArgument("alignment needs at least two rows".into()));
    }
    let design = pool.evaluate_design(ds.x.view())?;
    let scores = alignment_scores(design.view(), &ds.y);
    let (weights, ranking, degenerate) = match chi2_alignment_weights(&scores, radius) {
        Some(q) => {
            let ranking = rank_descending(&q);
            (q, ranking, false)
        }
        None => {
            let n = scores.len();
            (vec![1.0 / n as f64; n], (0..n).collect(), true)
        }
    };
    Ok(ReweightedFeatureSet {
        pool,
        scoring: PoolScoring::Alignment,
        scores,
        weights,
        selected: ranking[..m].to_vec(),
        ranking,
        degenerate,
    })
}

/// Score a pool by absolute label correlation and keep the top `m`.
pub fn eerf_score(pool: Arc<CandidateSet>, ds: &Dataset, m: usize) -> Result<ReweightedFeatureSet> {
    if m == 0 || m > pool.len() {
        return Err(Error::Config(format!(
            "cannot select {m} of {} pooled features",
            pool.len()
        )));
    }
    let design = pool.evaluate_design(ds.x.view())?;
    let scores = correlation_scores(design.view(), &ds.y);
    let ranking = rank_descending(&scores);
    let degenerate = scores.iter().all(|&s| s == scores[0]);
    Ok(ReweightedFeatureSet {
        pool,
        scoring: PoolScoring::Correlation,
        weights: scores.clone(),
        scores,
        selected: ranking[..m].to_vec(),
        ranking,
        degenerate,
    })
}

/// Default χ² radius for LKRF: the divergence of a uniform distribution over
/// `m` of `pool` features, `pool/m − 1`.
pub fn default_lkrf_radius(pool: usize, m: usize) -> f64 {
    pool as f64 / m as f64 - 1.0
}

/// Retrain unweighted on a selection; the trace's preprocessing time is
/// left for the caller to fill in.
pub fn fit_selected(set: &ReweightedFeatureSet, ds: &Dataset, lambda: f64) -> Result<(SparseModel, TrainTrace)> {
    let clock = Stopwatch::start();
    let chosen = Arc::new(set.selected_candidates()?);
    let (model, mut trace) = fit_all_features(chosen, ds, lambda)?;
    trace.train_secs = clock.seconds();
    Ok((model, trace))
}

/// Full LKRF pipeline: sample `pool_size` features, reweight, keep `m`, retrain.
pub fn lkrf_train(
    ds: &Dataset,
    m: usize,
    pool_size: usize,
    sigma: f64,
    seed: u64,
    lambda: f64,
    radius: Option<f64>,
) -> Result<(SparseModel, TrainTrace)> {
    let clock = Stopwatch::start();
    let pool = Arc::new(CandidateSet::random_fourier(ds.dim(), pool_size, sigma, seed)?);
    let radius = radius.unwrap_or_else(|| default_lkrf_radius(pool_size, m));
    let set = lkrf_reweight(pool, ds, radius, m)?;
    let preprocess = clock.seconds();
    let (model, mut trace) = fit_selected(&set, ds, lambda)?;
    trace.preprocess_secs = preprocess;
    Ok((model, trace))
}

/// Full EERF pipeline: sample `pool_size` features, score, keep `m`, retrain.
pub fn eerf_train(
    ds: &Dataset,
    m: usize,
    pool_size: usize,
    sigma: f64,
    seed: u64,
    lambda: f64,
) -> Result<(SparseModel, TrainTrace)> {
    let clock = Stopwatch::start();
    let pool = Arc::new(CandidateSet::random_fourier(ds.dim(), pool_size, sigma, seed)?);
    let set = eerf_score(pool, ds, m)?;
    let preprocess = clock.seconds();
    let (model, mut trace) = fit_selected(&set, ds, lambda)?;
    trace.preprocess_secs = preprocess;
    Ok((model, trace))
}

/// Exact kernel used by the kernel-machine baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
    /// `(K_gauss + K_lin) / 2`.
    GaussianLinear,
}

impl KernelKind {
    pub fn eval(self, a: &[f64], b: &[f64], sigma: f64) -> f64 {
        let mut sq = 0.0;
        let mut dot = 0.0;
        for (x, y) in a.iter().zip(b) {
            sq += (x - y) * (x - y);
            dot += x * y;
        }
        let g = (-sq / (2.0 * sigma * sigma)).exp();
        match self {
            KernelKind::Gaussian => g,
            KernelKind::GaussianLinear => 0.5 * (g + dot),
        }
    }

    /// Gram matrix between the rows of `a` and `b`.
    pub fn gram(self, a: ArrayView2<f64>, b: ArrayView2<f64>, sigma: f64) -> Array2<f64> {
        let b_rows: Vec<Vec<f64>> = b.rows().into_iter().map(|r| r.to_vec()).collect();
        let rows = crate::par::map_range(a.nrows(), |i| {
            let ai = a.row(i).to_vec();
            b_rows
                .iter()
                .map(|bj| self.eval(&ai, bj, sigma))
                .collect::<Vec<f64>>()
        });
        let mut k = Array2::zeros((a.nrows(), b.nrows()));
        for (mut dst, src) in k.axis_iter_mut(Axis(0)).zip(rows) {
            dst.assign(&ndarray::ArrayView1::from(&src[..]));
        }
        k
    }
}

/// Exact kernel machine `f(x) = Σ_n α_n K(x_n, x)` over a training subsample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub kind: KernelKind,
    pub sigma: f64,
    pub task: Task,
    pub lambda: f64,
    pub support_x: Array2<f64>,
    pub alpha: Vec<f64>,
    /// Newton iterations for classification, 1 for regression.
    pub iterations: usize,
}

impl KernelModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.support_x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.support_x.ncols(),
                found: x.len(),
            });
        }
        Ok(self
            .support_x
            .rows()
            .into_iter()
            .zip(&self.alpha)
            .map(|(row, a)| a * self.kind.eval(&row.to_vec(), x, self.sigma))
            .sum())
    }

    pub fn classify(&self, x: &[f64]) -> Result<f64> {
        Ok(sign(self.predict(x)?))
    }

    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.support_x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.support_x.ncols(),
                found: x.ncols(),
            });
        }
        let k = self.kind.gram(x, self.support_x.view(), self.sigma);
        Ok(k.dot(&Array1::from(self.alpha.clone())))
    }
}

/// Kernel ridge regression or regularized kernel logistic regression on a
/// `fraction` subsample of `ds`.
///
/// Regression solves `(K + λN₀ I) α = y`. Classification minimizes
/// `(1/N₀) Σ log(1 + exp(−y_n (Kα)_n)) + λ αᵀKα` by damped Newton.
pub fn kernel_train_exact(
    ds: &Dataset,
    kind: KernelKind,
    sigma: f64,
    lambda: f64,
    fraction: f64,
    seed: u64,
) -> Result<KernelModel> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!("bandwidth {sigma} must be positive")));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("λ = {lambda} must be nonnegative")));
    }
    let sub = subsample(ds, fraction, seed)?;
    let n = sub.len();
    let k = kind.gram(sub.x.view(), sub.x.view(), sigma);
    let (alpha, iterations) = match ds.task {
        Task::Regression => {
            let mut a = k.clone();
            for i in 0..n {
                a[[i, i]] += lambda * n as f64;
            }
            (cholesky_solve(a.view(), sub.y.view())?, 1)
        }
        Task::Classification => kernel_logistic_newton(&k, &sub.y, lambda)?,
    };
    Ok(KernelModel {
        kind,
        sigma,
        task: ds.task,
        lambda,
        support_x: sub.x,
        alpha: alpha.to_vec(),
        iterations,
    })
}

fn kernel_logistic_newton(k: &Array2<f64>, y: &Array1<f64>, lambda: f64) -> Result<(Array1<f64>, usize)> {
    let n = y.len();
    let nf = n as f64;
    let objective = |alpha: &Array1<f64>| -> f64 {
        let f = k.dot(alpha);
        let data: f64 = f.iter().zip(y).map(|(&p, &yy)| Loss::Logistic.value(p, yy)).sum::<f64>() / nf;
        data + lambda * alpha.dot(&f)
    };
    let mut alpha = Array1::zeros(n);
    let mut value = objective(&alpha);
    for it in 0..crate::greedy::MAX_NEWTON_ITERS {
        let f = k.dot(&alpha);
        // gradient is K·r with r = w/N + 2λα
        let mut r: Array1<f64> = f
            .iter()
            .zip(y)
            .map(|(&p, &yy)| Loss::Logistic.derivative(p, yy) / nf)
            .collect();
        r.scaled_add(2.0 * lambda, &alpha);
        let g = k.dot(&r);
        if g.iter().fold(0.0_f64, |m, v| m.max(v.abs())) <= DEFAULT_TOL {
            return Ok((alpha, it));
        }
        // (diag(c)/N · K + 2λ I) Δ = r is the Newton system with K factored out
        let mut system = k.clone();
        for (i, mut row) in system.rows_mut().into_iter().enumerate() {
            row *= Loss::Logistic.curvature(f[i], y[i]) / nf;
        }
        for i in 0..n {
            system[[i, i]] += 2.0 * lambda;
        }
        let step = lu_solve(system.view(), r.view())?;
        let decrement = g.dot(&step);
        let slack = 1e-14 * (1.0 + value.abs());
        let mut t = 1.0;
        loop {
            let trial = &alpha - &(&step * t);
            let tv = objective(&trial);
            if tv <= value - 1e-4 * t * decrement + slack {
                alpha = trial;
                value = tv;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Ok((alpha, it + 1));
            }
        }
    }
    Err(Error::NoConvergence(crate::greedy::MAX_NEWTON_ITERS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{BaseKernel, FeatureDescriptor, FeatureKind};
    use ndarray::array;

    fn toy_classification(n: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * 13 + j * 7) % 17) as f64 / 8.0 - 1.0);
        let y: Array1<f64> = x.rows().into_iter().map(|r| sign(r[0] + 0.3 * r[1] - 0.1)).collect();
        Dataset::from_arrays(x, y, Task::Classification).unwrap()
    }

    #[test]
    fn constant_rff_feature_reduces_to_scalar_ridge() {
        let cs = CandidateSet::from_parts(
            2,
            vec![BaseKernel::RandomFourier { sigma: 1.0, count: 1, seed: 0 }],
            vec![1.0],
            vec![FeatureDescriptor {
                kernel: 0,
                weight: 1.0,
                kind: FeatureKind::RandomFourier {
                    omega: vec![0.0, 0.0],
                    phase: 0.0,
                    scale: 2f64.sqrt(),
                },
            }],
        )
        .unwrap();
        let x = array![[0.1, 0.2], [1.0, -1.0], [0.5, 0.5]];
        let y = array![0.2, 0.4, 0.9];
        let ds = Dataset::from_arrays(x.clone(), y.clone(), Task::Regression).unwrap();
        let cs = Arc::new(cs);
        let design = cs.evaluate_design(x.view()).unwrap();
        assert!(design.iter().all(|&v| v == 2f64.sqrt()));
        let lambda = 0.1;
        let (model, _) = fit_all_features(cs, &ds, lambda).unwrap();
        // (3·2 + 0.1·3) θ = √2 Σy
        let want = 2f64.sqrt() * y.sum() / (6.0 + lambda * 3.0);
        assert!((model.coefficients[0] - want).abs() < 1e-14);
    }

    #[test]
    fn rks_is_seeded() {
        let ds = toy_classification(40);
        let (a, _) = rks_train(&ds, 10, 1.0, 5, 1e-2).unwrap();
        let (b, _) = rks_train(&ds, 10, 1.0, 5, 1e-2).unwrap();
        assert_eq!(a, b);
        let (c, _) = rks_train(&ds, 10, 1.0, 6, 1e-2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn perfectly_aligned_feature_ranks_first() {
        let n = 12;
        let y: Array1<f64> = (0..n).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let mut design = Array2::from_shape_fn((n, 4), |(i, j)| ((i * 5 + j * 3) % 7) as f64 / 7.0 - 0.4);
        design.column_mut(2).assign(&y);
        let a = alignment_scores(design.view(), &y);
        assert_eq!(rank_descending(&a)[0], 2);
        let s = correlation_scores(design.view(), &y);
        assert_eq!(rank_descending(&s)[0], 2);
        assert!((s[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alignment_matches_pairwise_definition() {
        let design = array![[0.3, -1.0], [0.5, 0.2], [-0.4, 0.9], [0.1, 0.1]];
        let y = array![1.0, -1.0, 1.0, 1.0];
        let fast = alignment_scores(design.view(), &y);
        let n = 4;
        for m in 0..2 {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        s += y[a] * y[b] * design[[a, m]] * design[[b, m]];
                    }
                }
            }
            assert!((fast[m] - s / 12.0).abs() < 1e-15);
        }
    }

    #[test]
    fn chi2_limits() {
        let scores = [0.1, 0.5, 0.3, 0.5, -0.2];
        let q = chi2_alignment_weights(&scores, 0.0).unwrap();
        assert!(q.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        let q = chi2_alignment_weights(&scores, 1e9).unwrap();
        assert_eq!(q, vec![0.0, 0.5, 0.0, 0.5, 0.0]);
        let q = chi2_alignment_weights(&[0.1, 0.9, 0.3], 1e9).unwrap();
        assert_eq!(q, vec![0.0, 1.0, 0.0]);
        assert!(chi2_alignment_weights(&[0.4, 0.4], 1.0).is_none());
    }

    #[test]
    fn chi2_constraint_is_tight() {
        let scores: Vec<f64> = (0..50).map(|i| ((i * 37) % 23) as f64 / 23.0).collect();
        for &radius in &[0.01, 0.3, 2.0, 10.0] {
            let q = chi2_alignment_weights(&scores, radius).unwrap();
            assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(q.iter().all(|&v| v >= 0.0));
            let d = chi2_from_uniform(&q);
            assert!((d - radius).abs() < 1e-8 * radius.max(1.0), "radius {radius}: {d}");
        }
    }

    #[test]
    fn lkrf_zero_radius_keeps_pool_order() {
        let ds = toy_classification(30);
        let pool = Arc::new(CandidateSet::random_fourier(2, 20, 1.0, 3).unwrap());
        let set = lkrf_reweight(pool, &ds, 0.0, 5).unwrap();
        assert_eq!(set.selected, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn eerf_balanced_constant_feature_scores_zero() {
        let design = array![[1.0], [1.0], [1.0], [1.0]];
        let y = array![1.0, -1.0, 1.0, -1.0];
        assert_eq!(correlation_scores(design.view(), &y), vec![0.0]);
    }

    #[test]
    fn one_point_interpolation() {
        let ds = Dataset::from_arrays(array![[0.3, -0.2]], array![0.7], Task::Regression).unwrap();
        let model = kernel_train_exact(&ds, KernelKind::Gaussian, 1.0, 0.0, 1.0, 0).unwrap();
        assert!((model.alpha[0] - 0.7).abs() < 1e-15);
        assert!((model.predict(&[0.3, -0.2]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn heavy_regularization_shrinks_to_zero() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i + j) as f64 / 10.0);
        let y = Array1::from_shape_fn(10, |i| (i as f64).cos());
        let ds = Dataset::from_arrays(x, y, Task::Regression).unwrap();
        let model = kernel_train_exact(&ds, KernelKind::Gaussian, 1.0, 1e12, 1.0, 0).unwrap();
        assert!(model.alpha.iter().all(|a| a.abs() < 1e-10));
        assert!(model.predict(&[0.5, 0.5]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn kernel_logistic_fits_separable_data() {
        let ds = toy_classification(60);
        let model = kernel_train_exact(&ds, KernelKind::GaussianLinear, 1.0, 1e-3, 1.0, 0).unwrap();
        let wrong = ds
            .x
            .rows()
            .into_iter()
            .zip(ds.y.iter())
            .filter(|(r, &y)| model.classify(&r.to_vec()).unwrap() != y)
            .count();
        assert!(wrong <= 3, "{wrong} training errors");
    }

    #[test]
    fn zero_alpha_predicts_zero() {
        let model = KernelModel {
            kind: KernelKind::Gaussian,
            sigma: 1.0,
            task: Task::Regression,
            lambda: 0.0,
            support_x: array![[0.0, 1.0], [1.0, 0.0]],
            alpha: vec![0.0, 0.0],
            iterations: 1,
        };
        assert_eq!(model.predict(&[0.5, 0.5]).unwrap(), 0.0);
        assert!(model.predict(&[0.5]).is_err());
    }

    #[test]
    fn glk_at_origin_is_half_gaussian() {
        let model = KernelModel {
            kind: KernelKind::GaussianLinear,
            sigma: 2.0,
            task: Task::Regression,
            lambda: 0.0,
            support_x: array![[1.0, -1.0]],
            alpha: vec![3.0],
            iterations: 1,
        };
        let want = 3.0 * 0.5 * (-2.0 / 8.0f64).exp();
        assert!((model.predict(&[0.0, 0.0]).unwrap() - want).abs() < 1e-15);
    }
}
