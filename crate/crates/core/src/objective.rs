//! Losses and the regularized empirical risk over a candidate design matrix.
//!
//! The risk of a coefficient vector `θ` is
//! `(1/N) Σ_n L(⟨row_n, θ⟩, y_n) + λ‖θ‖²`, so the regularizer alone makes it
//! `2λ`-strongly convex.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::linalg::top_gram_eigenvalue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// `(y − f)²`.
    Quadratic,
    /// `log(1 + exp(−y f))` for labels `y ∈ {−1, +1}`.
    Logistic,
}

/// `log(1 + exp(−u))` without overflow.
pub fn logistic_loss(u: f64) -> f64 {
    (-u).max(0.0) + (-u.abs()).exp().ln_1p()
}

/// `1 / (1 + exp(−u))` without overflow.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl Loss {
    pub fn for_task(task: Task) -> Loss {
        match task {
            Task::Regression => Loss::Quadratic,
            Task::Classification => Loss::Logistic,
        }
    }

    pub fn value(self, prediction: f64, y: f64) -> f64 {
        match self {
            Loss::Quadratic => (y - prediction) * (y - prediction),
            Loss::Logistic => logistic_loss(y * prediction),
        }
    }

    /// Derivative with respect to the prediction.
    pub fn derivative(self, prediction: f64, y: f64) -> f64 {
        match self {
            Loss::Quadratic => 2.0 * (prediction - y),
            Loss::Logistic => -y * sigmoid(-y * prediction),
        }
    }

    /// Second derivative with respect to the prediction (labels are ±1).
    pub fn curvature(self, prediction: f64, y: f64) -> f64 {
        match self {
            Loss::Quadratic => 2.0,
            Loss::Logistic => {
                let s = sigmoid(y * prediction);
                s * (1.0 - s)
            }
        }
    }

    /// Upper bound on [`Loss::curvature`].
    pub fn smoothness_constant(self) -> f64 {
        match self {
            Loss::Quadratic => 2.0,
            Loss::Logistic => 0.25,
        }
    }
}

/// Strong convexity and smoothness constants of an [`Objective`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub mu: f64,
    pub beta: f64,
}

impl Curvature {
    pub fn condition_number(&self) -> f64 {
        self.beta / self.mu
    }
}

/// Regularized empirical risk over a borrowed design matrix.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    design: ArrayView2<'a, f64>,
    targets: ArrayView1<'a, f64>,
    loss: Loss,
    lambda: f64,
}

impl<'a> Objective<'a> {
    pub fn new(
        design: ArrayView2<'a, f64>,
        targets: ArrayView1<'a, f64>,
        loss: Loss,
        lambda: f64,
    ) -> Result<Self> {
        if design.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: design.nrows(),
                found: targets.len(),
            });
        }
        if design.nrows() == 0 {
            return Err(Error::InvalidArgument("objective needs at least one row".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "regularization weight {lambda} must be nonnegative"
            )));
        }
        Ok(Objective {
            design,
            targets,
            loss,
            lambda,
        })
    }

    pub fn design(&self) -> ArrayView2<'a, f64> {
        self.design
    }

    pub fn targets(&self) -> ArrayView1<'a, f64> {
        self.targets
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rows(&self) -> usize {
        self.design.nrows()
    }

    /// Number of candidate columns `M₀`.
    pub fn columns(&self) -> usize {
        self.design.ncols()
    }

    fn check_theta(&self, theta: ArrayView1<f64>) -> Result<()> {
        if theta.len() != self.columns() {
            return Err(Error::DimensionMismatch {
                expected: self.columns(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    /// `design · θ`.
    pub fn predictions(&self, theta: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_theta(theta)?;
        Ok(self.design.dot(&theta))
    }

    /// `Σ_{j ∈ support} coef_j ψ_j`, touching only the support columns.
    pub fn sparse_predictions(&self, support: &[usize], coef: &[f64]) -> Array1<f64> {
        debug_assert_eq!(support.len(), coef.len());
        let mut p = Array1::zeros(self.rows());
        for (&j, &c) in support.iter().zip(coef) {
            if c != 0.0 {
                p.scaled_add(c, &self.design.column(j));
            }
        }
        p
    }

    /// Mean loss of a prediction vector, without the regularizer.
    pub fn data_risk(&self, predictions: ArrayView1<f64>) -> f64 {
        let total: f64 = predictions
            .iter()
            .zip(self.targets.iter())
            .map(|(&p, &y)| self.loss.value(p, y))
            .sum();
        total / self.rows() as f64
    }

    /// `(1/N) Σ L(⟨row_n, θ⟩, y_n) + λ‖θ‖²`.
    pub fn risk(&self, theta: ArrayView1<f64>) -> Result<f64> {
        let p = self.predictions(theta)?;
        Ok(self.data_risk(p.view()) + self.lambda * theta.dot(&theta))
    }

    /// Risk of a vector that is zero outside `support`.
    pub fn sparse_risk(&self, support: &[usize], coef: &[f64]) -> f64 {
        let p = self.sparse_predictions(support, coef);
        let sq: f64 = coef.iter().map(|c| c * c).sum();
        self.data_risk(p.view()) + self.lambda * sq
    }

    /// Per-row loss derivatives scaled by `1/N`.
    pub(crate) fn residual_weights(&self, predictions: ArrayView1<f64>) -> Array1<f64> {
        let n = self.rows() as f64;
        predictions
            .iter()
            .zip(self.targets.iter())
            .map(|(&p, &y)| self.loss.derivative(p, y) / n)
            .collect()
    }

    /// Exact gradient of [`Objective::risk`].
    pub fn gradient(&self, theta: ArrayView1<f64>) -> Result<Array1<f64>> {
        let p = self.predictions(theta)?;
        let w = self.residual_weights(p.view());
        let mut g = self.design.t().dot(&w);
        g.scaled_add(2.0 * self.lambda, &theta);
        Ok(g)
    }

    /// Full gradient at a vector that is zero outside `support`.
    pub fn sparse_gradient(&self, support: &[usize], coef: &[f64]) -> Array1<f64> {
        let p = self.sparse_predictions(support, coef);
        let w = self.residual_weights(p.view());
        let mut g = self.design.t().dot(&w);
        for (&j, &c) in support.iter().zip(coef) {
            g[j] += 2.0 * self.lambda * c;
        }
        g
    }

    /// `μ = 2λ` and `β = c_loss · λ_max(designᵀdesign)/N + 2λ`, the top
    /// eigenvalue coming from power iteration.
    pub fn smoothness_estimate(&self) -> Curvature {
        let top = top_gram_eigenvalue(self.design, 1000, 1e-12);
        let mu = 2.0 * self.lambda;
        Curvature {
            mu,
            beta: self.loss.smoothness_constant() * top / self.rows() as f64 + mu,
        }
    }
}
