//! Greedy feature selection with fully corrective refits.
//!
//! Starting from `θ = 0` and an empty support, each iteration
//!
//! 1. evaluates the gradient of the regularized risk,
//! 2. adds the `k` unselected candidates whose gradient coordinates are
//!    largest in absolute value,
//! 3. minimizes the risk over the enlarged support.
//!
//! With the quadratic loss and `k = 1` this is orthogonal matching pursuit:
//! off the support the gradient is `−(2/N) ψ_jᵀ(y − Ψθ)`, a scaled
//! residual correlation.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::features::CandidateSet;
use crate::linalg::cholesky_solve;
use crate::objective::{Loss, Objective};

/// Newton iteration cap for logistic refits.
pub const MAX_NEWTON_ITERS: usize = 100;
/// Default gradient tolerance of a refit.
pub const DEFAULT_TOL: f64 = 1e-8;

/// The `k` indices outside `excluded` with the largest `|grad_j|`, in
/// decreasing order; ties go to the lower index.
pub fn select_indices(grad: &[f64], excluded: &[usize], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidArgument("must select at least one index".into()));
    }
    if grad.iter().any(|g| g.is_nan()) {
        return Err(Error::InvalidArgument("gradient contains NaN".into()));
    }
    let mut blocked = vec![false; grad.len()];
    for &j in excluded {
        if let Some(b) = blocked.get_mut(j) {
            *b = true;
        }
    }
    let mut free: Vec<usize> = (0..grad.len()).filter(|&j| !blocked[j]).collect();
    if free.len() < k {
        return Err(Error::Exhausted {
            available: free.len(),
            requested: k,
        });
    }
    let key = |j: usize| grad[j].abs();
    if k < free.len() {
        free.select_nth_unstable_by(k - 1, |&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
        free.truncate(k);
    }
    free.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    Ok(free)
}

/// Result of minimizing the risk over a fixed support.
#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    /// Coefficients aligned with the support.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// `max_j |∂R/∂θ_j|` over the support at the returned point.
    pub gradient_norm: f64,
    pub risk: f64,
}

fn support_columns(design: ArrayView2<f64>, support: &[usize]) -> Array2<f64> {
    design.select(ndarray::Axis(1), support)
}

fn restricted_gradient(obj: &Objective, cols: &Array2<f64>, coef: &Array1<f64>) -> Array1<f64> {
    let p = cols.dot(coef);
    let w = obj.residual_weights(p.view());
    let mut g = cols.t().dot(&w);
    g.scaled_add(2.0 * obj.lambda(), coef);
    g
}

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Minimize the risk over vectors supported on `support`.
///
/// The quadratic loss is solved exactly through the regularized normal
/// equations `(Ψ_Sᵀ Ψ_S + λN I) θ = Ψ_Sᵀ y`. The logistic loss runs damped
/// Newton from `warm_start` until the restricted gradient's ∞-norm is at most
/// `tol`.
pub fn refit(obj: &Objective, support: &[usize], warm_start: &[f64], tol: f64) -> Result<Refit> {
    if support.is_empty() {
        return Err(Error::InvalidArgument("refit needs a nonempty support".into()));
    }
    if warm_start.len() != support.len() {
        return Err(Error::DimensionMismatch {
            expected: support.len(),
            found: warm_start.len(),
        });
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= obj.columns()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: obj.columns(),
        });
    }
    let cols = support_columns(obj.design(), support);
    let n = obj.rows() as f64;
    let lambda = obj.lambda();

    match obj.loss() {
        Loss::Quadratic => {
            let mut gram = cols.t().dot(&cols);
            for i in 0..support.len() {
                gram[[i, i]] += lambda * n;
            }
            let rhs = cols.t().dot(&obj.targets());
            let coef = cholesky_solve(gram.view(), rhs.view())?;
            let g = restricted_gradient(obj, &cols, &coef);
            let coefficients = coef.to_vec();
            Ok(Refit {
                risk: obj.sparse_risk(support, &coefficients),
                coefficients,
                iterations: 1,
                gradient_norm: inf_norm(&g),
            })
        }
        Loss::Logistic => newton_logistic(obj, &cols, support, warm_start, tol),
    }
}

fn newton_logistic(
    obj: &Objective,
    cols: &Array2<f64>,
    support: &[usize],
    warm_start: &[f64],
    tol: f64,
) -> Result<Refit> {
    let n = obj.rows() as f64;
    let lambda = obj.lambda();
    let y = obj.targets();
    let risk_of = |coef: &Array1<f64>| -> f64 {
        let p = cols.dot(coef);
        obj.data_risk(p.view()) + lambda * coef.dot(coef)
    };

    let mut coef = Array1::from(warm_start.to_vec());
    let mut risk = risk_of(&coef);
    for iteration in 0..=MAX_NEWTON_ITERS {
        let p = cols.dot(&coef);
        let w = obj.residual_weights(p.view());
        let mut g = cols.t().dot(&w);
        g.scaled_add(2.0 * lambda, &coef);
        let gnorm = inf_norm(&g);
        if gnorm <= tol {
            return Ok(Refit {
                coefficients: coef.to_vec(),
                iterations: iteration,
                gradient_norm: gnorm,
                risk,
            });
        }
        if iteration == MAX_NEWTON_ITERS {
            break;
        }

        // H = Ψ_Sᵀ diag(c/N) Ψ_S + 2λ I
        let mut weighted = cols.clone();
        for (mut row, (&pi, &yi)) in weighted.rows_mut().into_iter().zip(p.iter().zip(y.iter())) {
            row *= Loss::Logistic.curvature(pi, yi) / n;
        }
        let mut hessian = cols.t().dot(&weighted);
        for i in 0..support.len() {
            hessian[[i, i]] += 2.0 * lambda;
        }
        let step = cholesky_solve(hessian.view(), g.view())?;
        let decrement = g.dot(&step);

        // step halving with an Armijo test; the slack absorbs rounding once
        // the decrement is at machine precision
        let slack = 1e-14 * (1.0 + risk.abs());
        let mut t = 1.0;
        loop {
            let trial = &coef - &(&step * t);
            let trial_risk = risk_of(&trial);
            if trial_risk <= risk - 1e-4 * t * decrement + slack {
                coef = trial;
                risk = trial_risk;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::NoConvergence(iteration + 1));
            }
        }
    }
    Err(Error::NoConvergence(MAX_NEWTON_ITERS))
}

/// Settings of a greedy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Final support size `M`.
    pub max_features: usize,
    /// Candidates added per iteration (`k`).
    pub per_iteration: usize,
    /// Refit gradient tolerance.
    pub tol: f64,
    /// Stop early once the regularized training risk reaches this value.
    pub stop_risk: Option<f64>,
}

impl GreedyConfig {
    pub fn new(max_features: usize) -> Self {
        GreedyConfig {
            max_features,
            per_iteration: 1,
            tol: DEFAULT_TOL,
            stop_risk: None,
        }
    }

    pub fn per_iteration(mut self, k: usize) -> Self {
        self.per_iteration = k;
        self
    }

    pub fn stop_risk(mut self, risk: f64) -> Self {
        self.stop_risk = Some(risk);
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// One greedy iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    pub selected: Vec<usize>,
    /// Regularized training risk after the refit.
    pub risk: f64,
    pub refit_iterations: usize,
    /// `‖θ‖₂` after the refit.
    pub theta_norm: f64,
    /// Seconds since training started.
    pub elapsed_secs: f64,
    /// Coefficients on the support so far, in selection order.
    pub coefficients: Vec<f64>,
}

/// History of a training run plus phase timings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Risk at `θ = 0`.
    pub initial_risk: f64,
    pub records: Vec<IterationRecord>,
    /// Candidate construction and design evaluation time.
    pub preprocess_secs: f64,
    pub train_secs: f64,
}

impl TrainTrace {
    /// Support in selection order.
    pub fn support(&self) -> Vec<usize> {
        self.records.iter().flat_map(|r| r.selected.iter().copied()).collect()
    }

    pub fn risks(&self) -> Vec<f64> {
        std::iter::once(self.initial_risk)
            .chain(self.records.iter().map(|r| r.risk))
            .collect()
    }

    /// True when no refit raised the risk by more than `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.risks().windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// The iterate of the first iteration whose support reaches `size`
    /// (or the empty fit for size 0).
    pub fn fit_at(&self, size: usize) -> Option<SparseFit> {
        if size == 0 {
            return Some(SparseFit::default());
        }
        let support = self.support();
        self.records
            .iter()
            .find(|r| r.coefficients.len() >= size)
            .filter(|r| r.coefficients.len() == size)
            .map(|r| SparseFit {
                support: support[..size].to_vec(),
                coefficients: r.coefficients.clone(),
            })
    }
}

/// Support and coefficients of a sparse model, without its features.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseFit {
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl SparseFit {
    pub fn theta_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Dense `θ ∈ R^{M₀}`.
    pub fn dense(&self, columns: usize) -> Array1<f64> {
        let mut theta = Array1::zeros(columns);
        for (&j, &c) in self.support.iter().zip(&self.coefficients) {
            theta[j] = c;
        }
        theta
    }
}

/// Run the greedy selection loop on a prepared objective.
pub fn mfga_train(obj: &Objective, cfg: &GreedyConfig) -> Result<(SparseFit, TrainTrace)> {
    if cfg.max_features > obj.columns() {
        return Err(Error::Config(format!(
            "M = {} exceeds the {} available candidates",
            cfg.max_features,
            obj.columns()
        )));
    }
    if cfg.per_iteration == 0 {
        return Err(Error::Config("per-iteration pick count must be at least 1".into()));
    }
    let clock = Stopwatch::start();
    let mut fit = SparseFit::default();
    let mut trace = TrainTrace {
        initial_risk: obj.sparse_risk(&[], &[]),
        ..TrainTrace::default()
    };
    let mut risk = trace.initial_risk;

    let mut iteration = 0;
    while fit.support.len() < cfg.max_features {
        if cfg.stop_risk.is_some_and(|s| risk <= s) {
            break;
        }
        iteration += 1;
        let grad = obj.sparse_gradient(&fit.support, &fit.coefficients);
        let k = cfg.per_iteration.min(cfg.max_features - fit.support.len());
        let picked = select_indices(grad.as_slice().expect("contiguous"), &fit.support, k)?;

        fit.support.extend_from_slice(&picked);
        let mut warm = fit.coefficients.clone();
        warm.resize(fit.support.len(), 0.0);
        let refit = refit(obj, &fit.support, &warm, cfg.tol)?;
        fit.coefficients = refit.coefficients;
        risk = refit.risk;

        trace.records.push(IterationRecord {
            iteration,
            selected: picked,
            risk,
            refit_iterations: refit.iterations,
            theta_norm: fit.theta_norm(),
            elapsed_secs: clock.seconds(),
            coefficients: fit.coefficients.clone(),
        });
    }
    trace.train_secs = clock.seconds();
    Ok((fit, trace))
}

/// A trained sparse model over a candidate set: the prediction is
/// `Σ_{j ∈ support} θ_j · weight_j · φ_j(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseModel {
    pub candidates: Arc<CandidateSet>,
    pub task: Task,
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl SparseModel {
    pub fn new(candidates: Arc<CandidateSet>, task: Task, fit: SparseFit) -> Result<Self> {
        if fit.support.len() != fit.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: fit.support.len(),
                found: fit.coefficients.len(),
            });
        }
        if let Some(&bad) = fit.support.iter().find(|&&j| j >= candidates.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: candidates.len(),
            });
        }
        Ok(SparseModel {
            candidates,
            task,
            support: fit.support,
            coefficients: fit.coefficients,
        })
    }

    /// Real-valued output; only the support features are evaluated.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let values = self.candidates.evaluate_subset(x, &self.support)?;
        Ok(values.iter().zip(&self.coefficients).map(|(v, c)| v * c).sum())
    }

    /// Sign of [`SparseModel::predict`], with 0 mapped to +1.
    pub fn classify(&self, x: &[f64]) -> Result<f64> {
        Ok(sign(self.predict(x)?))
    }

    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let rows: Result<Vec<f64>> = x
            .rows()
            .into_iter()
            .map(|r| self.predict(&r.to_vec()))
            .collect();
        Ok(Array1::from(rows?))
    }

    pub fn theta_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

pub(crate) fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Build the design for `candidates` on `ds`, then run the greedy loop.
/// The trace's preprocessing time covers the design evaluation.
pub fn fit_mfga(
    candidates: Arc<CandidateSet>,
    ds: &Dataset,
    lambda: f64,
    cfg: &GreedyConfig,
) -> Result<(SparseModel, TrainTrace)> {
    let clock = Stopwatch::start();
    let design = candidates.evaluate_design(ds.x.view())?;
    let preprocess = clock.seconds();
    let obj = Objective::new(design.view(), ds.y.view(), Loss::for_task(ds.task), lambda)?;
    let (fit, mut trace) = mfga_train(&obj, cfg)?;
    trace.preprocess_secs = preprocess;
    Ok((SparseModel::new(candidates, ds.task, fit)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn select_argmax() {
        assert_eq!(select_indices(&[0.1, -0.9, 0.5], &[], 1).unwrap(), vec![1]);
    }

    #[test]
    fn select_ties_go_low() {
        assert_eq!(select_indices(&[0.5, -0.5], &[], 1).unwrap(), vec![0]);
        assert_eq!(select_indices(&[1.0, 2.0, 2.0, 2.0], &[], 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn select_respects_exclusion() {
        assert_eq!(select_indices(&[3.0, 2.0, 1.0], &[0], 2).unwrap(), vec![1, 2]);
        assert!(matches!(
            select_indices(&[3.0, 2.0], &[0], 2),
            Err(Error::Exhausted { available: 1, requested: 2 })
        ));
    }

    #[test]
    fn refit_on_orthonormal_columns() {
        // columns are orthonormal, so each coefficient is ψ_jᵀ y
        let s = 0.5f64.sqrt();
        let design = array![[s, s], [s, -s], [0.0, 0.0]];
        let y = array![1.0, 2.0, 3.0];
        let obj = Objective::new(design.view(), y.view(), Loss::Quadratic, 0.0).unwrap();
        let r = refit(&obj, &[0, 1], &[0.0, 0.0], 1e-10).unwrap();
        let expected = design.t().dot(&y);
        for (a, b) in r.coefficients.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let residual = &y - &design.dot(&Array1::from(r.coefficients.clone()));
        assert!(design.t().dot(&residual).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn refit_singular_without_regularizer() {
        let design = array![[1.0, 1.0], [2.0, 2.0]];
        let y = array![1.0, 0.0];
        let obj = Objective::new(design.view(), y.view(), Loss::Quadratic, 0.0).unwrap();
        assert!(matches!(
            refit(&obj, &[0, 1], &[0.0, 0.0], 1e-10),
            Err(Error::SingularSystem)
        ));
    }

    #[test]
    fn newton_on_separable_data_stays_finite() {
        let design = array![[1.0], [-1.0]];
        let y = array![1.0, -1.0];
        let obj = Objective::new(design.view(), y.view(), Loss::Logistic, 0.1).unwrap();
        let r = refit(&obj, &[0], &[0.0], 1e-10).unwrap();
        assert!(r.coefficients[0].is_finite() && r.coefficients[0] > 0.0);
        assert!(r.gradient_norm <= 1e-10);
        // stationarity: s(-θ)·1 = 0.2 θ
        let th = r.coefficients[0];
        assert!((crate::objective::sigmoid(-th) - 0.2 * th).abs() < 1e-9);
    }

    #[test]
    fn perfect_feature_first() {
        let design = array![[0.3, 1.0], [0.1, -1.0], [-0.5, 0.5], [0.2, 0.0]];
        let y = design.column(1).to_owned();
        let obj = Objective::new(design.view(), y.view(), Loss::Quadratic, 1e-3).unwrap();
        let (fit, trace) = mfga_train(&obj, &GreedyConfig::new(1)).unwrap();
        assert_eq!(fit.support, vec![1]);
        let penalty = 1e-3 * fit.coefficients[0].powi(2);
        let data = trace.records[0].risk - penalty;
        assert!(data <= penalty, "data term {data} should be at most λ‖θ‖²");
    }

    #[test]
    fn empty_run() {
        let design = array![[0.3, 1.0], [0.1, -1.0]];
        let y = array![1.0, 2.0];
        let obj = Objective::new(design.view(), y.view(), Loss::Quadratic, 0.1).unwrap();
        let (fit, trace) = mfga_train(&obj, &GreedyConfig::new(0)).unwrap();
        assert!(fit.support.is_empty());
        assert!(trace.records.is_empty());
        assert_eq!(trace.initial_risk, obj.risk(array![0.0, 0.0].view()).unwrap());
    }

    #[test]
    fn rejects_m_above_m0() {
        let design = array![[0.3, 1.0]];
        let y = array![1.0];
        let obj = Objective::new(design.view(), y.view(), Loss::Quadratic, 0.1).unwrap();
        assert!(matches!(
            mfga_train(&obj, &GreedyConfig::new(3)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn multi_pick_support_sizes() {
        let design = Array2::from_shape_fn((20, 9), |(i, j)| ((i * 31 + j * 17) % 13) as f64 - 6.0);
        let y = Array1::from_shape_fn(20, |i| (i as f64 * 0.37).sin());
        let obj = Objective::new(design.view(), y.view(), Loss::Quadratic, 0.05).unwrap();
        let (fit, trace) = mfga_train(&obj, &GreedyConfig::new(7).per_iteration(3)).unwrap();
        let sizes: Vec<usize> = trace.records.iter().map(|r| r.coefficients.len()).collect();
        assert_eq!(sizes, vec![3, 6, 7]);
        let mut s = fit.support.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 7);
        assert!(trace.is_monotone(1e-12));
    }

    #[test]
    fn empty_model_predicts_zero() {
        let cs = Arc::new(CandidateSet::for_task(2, Task::Classification, 1.0).unwrap());
        let model = SparseModel::new(cs, Task::Classification, SparseFit::default()).unwrap();
        assert_eq!(model.predict(&[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(model.classify(&[0.3, 0.4]).unwrap(), 1.0);
        assert!(matches!(
            model.predict(&[0.3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_feature_model() {
        let cs = Arc::new(
            CandidateSet::build(
                2,
                vec![crate::features::BaseKernel::Gaussian { sigma: 1.5, order: 1 }],
                None,
            )
            .unwrap(),
        );
        let fit = SparseFit {
            support: vec![0],
            coefficients: vec![0.7],
        };
        let model = SparseModel::new(cs, Task::Regression, fit).unwrap();
        let x = [0.4, -1.0];
        let want = 0.7 * (-(0.16 + 1.0) / (2.0 * 2.25f64)).exp();
        assert!((model.predict(&x).unwrap() - want).abs() < 1e-15);
    }
}
