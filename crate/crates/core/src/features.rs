//! Explicit feature maps and the weighted multi-kernel candidate set.
//!
//! Three families of features are supported:
//!
//! * Taylor features of the Gaussian kernel
//!   `K(x, x') = exp(-‖x − x'‖² / 2σ²)`. For a multi-index `α`,
//!   `φ_α(x) = exp(-‖x‖²/2σ²) · x^α / (σ^|α| √α!)`, and summing
//!   `φ_α(x) φ_α(x')` over every `α` reproduces the kernel exactly.
//! * Raw coordinates, the explicit map of the linear kernel.
//! * Random Fourier features `√(2/M) cos(ωᵀx + b)`.
//!
//! A [`CandidateSet`] is the ordered list of these descriptors, each carrying
//! the weight `√ν_p` of the base kernel it belongs to. Column `j` of
//! [`CandidateSet::evaluate_design`] is candidate `j`.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Tolerance on `Σ ν_p = 1`.
const SIMPLEX_TOL: f64 = 1e-9;

/// Exponent vector of a monomial, stored sparsely as `(coordinate, power)`
/// pairs with strictly increasing coordinates and nonzero powers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    dim: usize,
    terms: Vec<(usize, u32)>,
}

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn from_exponents(exponents: &[u32]) -> Self {
        MultiIndex {
            dim: exponents.len(),
            terms: exponents
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(i, &p)| (i, p))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `|α| = Σ α_i`.
    pub fn order(&self) -> u32 {
        self.terms.iter().map(|&(_, p)| p).sum()
    }

    pub fn terms(&self) -> &[(usize, u32)] {
        &self.terms
    }

    pub fn exponents(&self) -> Vec<u32> {
        let mut e = vec![0; self.dim];
        for &(i, p) in &self.terms {
            e[i] = p;
        }
        e
    }

    /// `ln(α!) = Σ ln(α_i!)`.
    pub fn ln_factorial(&self) -> f64 {
        self.terms.iter().map(|&(_, p)| ln_factorial(p)).sum()
    }
}

/// `ln(k!)` as a sum of logarithms; exact enough for every order used here
/// and never overflows.
pub fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `C(n, k)` in 128-bit arithmetic.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Every multi-index of dimension `d` with order at most `max_order`, graded
/// by order and lexicographic (larger leading exponents first) within a grade.
/// There are `C(d + max_order, max_order)` of them.
pub fn enumerate_multi_indices(d: usize, max_order: u32) -> Vec<MultiIndex> {
    fn fill(coord: usize, left: u32, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if coord + 1 == current.len() {
            current[coord] = left;
            out.push(MultiIndex::from_exponents(current));
            current[coord] = 0;
            return;
        }
        for p in (0..=left).rev() {
            current[coord] = p;
            fill(coord + 1, left - p, current, out);
        }
        current[coord] = 0;
    }

    assert!(d >= 1, "multi-indices need at least one coordinate");
    let mut out = Vec::new();
    let mut current = vec![0; d];
    for grade in 0..=max_order {
        fill(0, grade, &mut current, &mut out);
    }
    out
}

/// Precomputed per-row quantities shared by all Taylor features of one bandwidth.
struct TaylorRow {
    log_envelope: f64,
    log_abs: Vec<f64>,
    negative: Vec<bool>,
}

impl TaylorRow {
    fn new(x: &[f64], sigma: f64) -> Self {
        let sq_norm: f64 = x.iter().map(|v| v * v).sum();
        TaylorRow {
            log_envelope: -sq_norm / (2.0 * sigma * sigma),
            log_abs: x.iter().map(|v| (v.abs() / sigma).ln()).collect(),
            negative: x.iter().map(|&v| v < 0.0).collect(),
        }
    }

    fn feature(&self, index: &MultiIndex) -> f64 {
        let mut log_mag = self.log_envelope;
        let mut negative = false;
        for &(i, p) in index.terms() {
            if self.log_abs[i] == f64::NEG_INFINITY {
                return 0.0;
            }
            log_mag += p as f64 * self.log_abs[i] - 0.5 * ln_factorial(p);
            negative ^= self.negative[i] && p % 2 == 1;
        }
        // exp underflows to 0 rather than producing inf·0
        let mag = log_mag.exp();
        if negative {
            -mag
        } else {
            mag
        }
    }
}

/// Taylor feature `φ_α(x)` of the Gaussian kernel with bandwidth `sigma`,
/// evaluated in the log domain.
pub fn taylor_feature(x: &[f64], sigma: f64, index: &MultiIndex) -> f64 {
    debug_assert_eq!(x.len(), index.dim());
    TaylorRow::new(x, sigma).feature(index)
}

/// Upper bound on `|⟨φ_{≤r}(x), φ_{≤r}(x')⟩ − K(x, x')|` from the Lagrange
/// remainder of `exp`, with `ρ = ‖x‖‖x'‖/σ²`.
pub fn truncation_bound(norm_x: f64, norm_x2: f64, sigma: f64, order: u32) -> f64 {
    let s2 = sigma * sigma;
    let rho = norm_x * norm_x2 / s2;
    if rho == 0.0 {
        return 0.0;
    }
    let log = -(norm_x * norm_x + norm_x2 * norm_x2) / (2.0 * s2)
        + (order as f64 + 1.0) * rho.ln()
        + rho
        - ln_factorial(order + 1);
    log.exp()
}

/// Closed-form Gaussian kernel.
pub fn gaussian_kernel(x: &[f64], x2: &[f64], sigma: f64) -> f64 {
    let sq: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq / (2.0 * sigma * sigma)).exp()
}

/// Coordinate `j` (zero-based) of `x`: the explicit map of the linear kernel.
pub fn linear_feature(x: &[f64], j: usize) -> Result<f64> {
    x.get(j).copied().ok_or(Error::IndexOutOfRange {
        index: j,
        len: x.len(),
    })
}

/// One explicit feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    TaylorGaussian { sigma: f64, index: MultiIndex },
    LinearCoordinate { coord: usize },
    RandomFourier { omega: Vec<f64>, phase: f64, scale: f64 },
}

impl FeatureKind {
    /// Unweighted feature value.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            FeatureKind::TaylorGaussian { sigma, index } => taylor_feature(x, *sigma, index),
            FeatureKind::LinearCoordinate { coord } => x[*coord],
            FeatureKind::RandomFourier { omega, phase, scale } => {
                let proj: f64 = omega.iter().zip(x).map(|(w, v)| w * v).sum();
                scale * (proj + phase).cos()
            }
        }
    }
}

/// A candidate feature together with its base kernel and weight `√ν_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub kernel: usize,
    pub weight: f64,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureDescriptor {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.weight * self.kind.evaluate(x)
    }
}

/// Base kernel a block of candidates is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BaseKernel {
    /// Taylor features up to `order` of a Gaussian kernel.
    Gaussian { sigma: f64, order: u32 },
    Linear,
    /// `count` random Fourier features of a Gaussian kernel drawn with `seed`.
    RandomFourier { sigma: f64, count: usize, seed: u64 },
}

/// Ordered candidate features over `P` base kernels with simplex weights `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    dim: usize,
    kernels: Vec<BaseKernel>,
    nu: Vec<f64>,
    descriptors: Vec<FeatureDescriptor>,
}

fn check_simplex(nu: &[f64], p: usize) -> Result<()> {
    let ok = nu.len() == p
        && nu.iter().all(|&v| v >= 0.0 && v.is_finite())
        && (nu.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSimplex(nu.to_vec()))
    }
}

impl CandidateSet {
    /// Candidates from each base kernel in turn, weighted by `√ν_p`.
    /// `nu = None` assigns uniform weights.
    pub fn build(dim: usize, kernels: Vec<BaseKernel>, nu: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        if kernels.is_empty() {
            return Err(Error::InvalidArgument("need at least one base kernel".into()));
        }
        let p = kernels.len();
        let nu = nu.unwrap_or_else(|| vec![1.0 / p as f64; p]);
        check_simplex(&nu, p)?;

        let mut descriptors = Vec::new();
        for (k, kernel) in kernels.iter().enumerate() {
            let weight = nu[k].sqrt();
            match *kernel {
                BaseKernel::Gaussian { sigma, order } => {
                    check_sigma(sigma)?;
                    descriptors.extend(enumerate_multi_indices(dim, order).into_iter().map(
                        |index| FeatureDescriptor {
                            kernel: k,
                            weight,
                            kind: FeatureKind::TaylorGaussian { sigma, index },
                        },
                    ));
                }
                BaseKernel::Linear => {
                    descriptors.extend((0..dim).map(|coord| FeatureDescriptor {
                        kernel: k,
                        weight,
                        kind: FeatureKind::LinearCoordinate { coord },
                    }));
                }
                BaseKernel::RandomFourier { sigma, count, seed } => {
                    descriptors.extend(sample_rff(dim, count, sigma, seed)?.into_iter().map(
                        |kind| FeatureDescriptor {
                            kernel: k,
                            weight,
                            kind,
                        },
                    ));
                }
            }
        }
        Ok(CandidateSet {
            dim,
            kernels,
            nu,
            descriptors,
        })
    }

    /// Default candidates per task: Gaussian Taylor features of order 1 plus
    /// linear coordinates for classification (`2d + 1`), Gaussian Taylor
    /// features of order 2 for regression (`C(d, 2) + 2d + 1`).
    pub fn for_task(dim: usize, task: Task, sigma: f64) -> Result<Self> {
        match task {
            Task::Classification => CandidateSet::build(
                dim,
                vec![BaseKernel::Gaussian { sigma, order: 1 }, BaseKernel::Linear],
                None,
            ),
            Task::Regression => {
                CandidateSet::build(dim, vec![BaseKernel::Gaussian { sigma, order: 2 }], None)
            }
        }
    }

    /// Assemble a set from explicit descriptors, checking kernel ids, `ν`
    /// and the weight convention `weight = √ν_p`.
    pub fn from_parts(
        dim: usize,
        kernels: Vec<BaseKernel>,
        nu: Vec<f64>,
        descriptors: Vec<FeatureDescriptor>,
    ) -> Result<Self> {
        check_simplex(&nu, kernels.len())?;
        for (i, d) in descriptors.iter().enumerate() {
            if d.kernel >= kernels.len() {
                return Err(Error::IndexOutOfRange {
                    index: d.kernel,
                    len: kernels.len(),
                });
            }
            if (d.weight - nu[d.kernel].sqrt()).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "descriptor {i} has weight {} but its kernel has ν = {}",
                    d.weight, nu[d.kernel]
                )));
            }
            let fits = match &d.kind {
                FeatureKind::TaylorGaussian { index, .. } => index.dim() == dim,
                FeatureKind::LinearCoordinate { coord } => *coord < dim,
                FeatureKind::RandomFourier { omega, .. } => omega.len() == dim,
            };
            if !fits {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: match &d.kind {
                        FeatureKind::TaylorGaussian { index, .. } => index.dim(),
                        FeatureKind::LinearCoordinate { coord } => *coord,
                        FeatureKind::RandomFourier { omega, .. } => omega.len(),
                    },
                });
            }
        }
        Ok(CandidateSet {
            dim,
            kernels,
            nu,
            descriptors,
        })
    }

    /// `count` random Fourier features of a single Gaussian kernel.
    pub fn random_fourier(dim: usize, count: usize, sigma: f64, seed: u64) -> Result<Self> {
        CandidateSet::build(
            dim,
            vec![BaseKernel::RandomFourier { sigma, count, seed }],
            None,
        )
    }

    /// A new single-kernel set holding the chosen random Fourier features of
    /// `self`, rescaled to `√(2/M)` for `M = indices.len()`.
    pub fn select_random_fourier(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty feature selection".into()));
        }
        let scale = (2.0 / indices.len() as f64).sqrt();
        let mut descriptors = Vec::with_capacity(indices.len());
        for &i in indices {
            let d = self.descriptors.get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.descriptors.len(),
            })?;
            match &d.kind {
                FeatureKind::RandomFourier { omega, phase, .. } => {
                    descriptors.push(FeatureDescriptor {
                        kernel: 0,
                        weight: 1.0,
                        kind: FeatureKind::RandomFourier {
                            omega: omega.clone(),
                            phase: *phase,
                            scale,
                        },
                    })
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "candidate {i} is not a random Fourier feature"
                    )))
                }
            }
        }
        let kernels = match self.kernels.first() {
            Some(BaseKernel::RandomFourier { sigma, seed, .. }) => vec![BaseKernel::RandomFourier {
                sigma: *sigma,
                count: indices.len(),
                seed: *seed,
            }],
            _ => self.kernels[..1].to_vec(),
        };
        Ok(CandidateSet {
            dim: self.dim,
            kernels,
            nu: vec![1.0],
            descriptors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of candidates `M₀`.
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn kernels(&self) -> &[BaseKernel] {
        &self.kernels
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    /// Bandwidths of the Gaussian base kernels, in kernel order.
    pub fn sigmas(&self) -> Vec<f64> {
        self.kernels
            .iter()
            .filter_map(|k| match k {
                BaseKernel::Gaussian { sigma, .. } | BaseKernel::RandomFourier { sigma, .. } => {
                    Some(*sigma)
                }
                BaseKernel::Linear => None,
            })
            .collect()
    }

    fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Weighted values of the candidates at `indices` for a single row.
    pub fn evaluate_subset(&self, x: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
        self.check_row(x)?;
        let mut rows = RowEvaluator::new(self, x);
        indices
            .iter()
            .map(|&j| {
                if j >= self.len() {
                    Err(Error::IndexOutOfRange {
                        index: j,
                        len: self.len(),
                    })
                } else {
                    Ok(rows.value(j))
                }
            })
            .collect()
    }

    /// Weighted values of every candidate for a single row.
    pub fn evaluate_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_row(x)?;
        let mut rows = RowEvaluator::new(self, x);
        Ok((0..self.len()).map(|j| rows.value(j)).collect())
    }

    /// `N × M₀` design matrix with entry `(n, j) = weight_j · φ_j(x_n)`.
    pub fn evaluate_design(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.ncols(),
            });
        }
        let n = x.nrows();
        let m = self.len();
        let rows = crate::par::map_range(n, |i| {
            let row = x.row(i).to_vec();
            let mut eval = RowEvaluator::new(self, &row);
            (0..m).map(|j| eval.value(j)).collect::<Vec<f64>>()
        });
        let mut design = Array2::zeros((n, m));
        for (mut dst, src) in design.axis_iter_mut(Axis(0)).zip(rows) {
            dst.assign(&ndarray::ArrayView1::from(&src[..]));
        }
        Ok(design)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("bandwidth {sigma} must be positive")))
    }
}

/// Evaluates candidates of one row, caching per-bandwidth Taylor quantities.
struct RowEvaluator<'a> {
    set: &'a CandidateSet,
    x: &'a [f64],
    taylor: Vec<(f64, TaylorRow)>,
}

impl<'a> RowEvaluator<'a> {
    fn new(set: &'a CandidateSet, x: &'a [f64]) -> Self {
        RowEvaluator {
            set,
            x,
            taylor: Vec::new(),
        }
    }

    fn value(&mut self, j: usize) -> f64 {
        let d = &self.set.descriptors[j];
        let raw = match &d.kind {
            FeatureKind::TaylorGaussian { sigma, index } => {
                let pos = match self.taylor.iter().position(|(s, _)| s == sigma) {
                    Some(p) => p,
                    None => {
                        self.taylor.push((*sigma, TaylorRow::new(self.x, *sigma)));
                        self.taylor.len() - 1
                    }
                };
                self.taylor[pos].1.feature(index)
            }
            other => other.evaluate(self.x),
        };
        d.weight * raw
    }
}

/// `count` random Fourier features for a Gaussian kernel of bandwidth
/// `sigma`: `ω ~ N(0, σ⁻² I_d)`, `b ~ U[0, 2π)`, scale `√(2/count)`.
pub fn sample_rff(dim: usize, count: usize, sigma: f64, seed: u64) -> Result<Vec<FeatureKind>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one random feature".into()));
    }
    check_sigma(sigma)?;
    let normal = Normal::new(0.0, 1.0 / sigma).expect("positive standard deviation");
    let mut rng = seeded(seed);
    let scale = (2.0 / count as f64).sqrt();
    Ok((0..count)
        .map(|_| {
            let omega: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            let phase = rng.random_range(0.0..2.0 * PI);
            FeatureKind::RandomFourier {
                omega,
                phase,
                scale,
            }
        })
        .collect())
}
