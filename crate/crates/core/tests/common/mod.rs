#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || normal(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || normal(rng))
}

/// Uniform point in the unit ball of dimension `d`.
pub fn unit_ball_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let dir: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = rng.random::<f64>().powf(1.0 / d as f64);
    dir.into_iter().map(|v| v * radius / norm).collect()
}

/// `rows × cols` matrix with orthonormal columns (thin QR of a Gaussian matrix).
pub fn orthonormal_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| normal(rng));
    let q = g.qr().q();
    Array2::from_shape_fn((rows, cols), |(i, j)| q[(i, j)])
}

pub fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn to_dvector(a: &Array1<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().copied())
}

/// Closed-form Gaussian kernel, written out independently of the library.
pub fn rbf(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq / (2.0 * sigma * sigma)).exp()
}

/// Regularized least squares on the columns `support`, solved densely:
/// `(ΨₛᵀΨₛ + λN I) θ = Ψₛᵀ y`.
pub fn dense_ridge(design: &Array2<f64>, y: &Array1<f64>, support: &[usize], lambda: f64) -> Vec<f64> {
    let n = design.nrows();
    let ps = DMatrix::from_fn(n, support.len(), |i, j| design[[i, support[j]]]);
    let yv = to_dvector(y);
    let mut a = ps.transpose() * &ps;
    for i in 0..support.len() {
        a[(i, i)] += lambda * n as f64;
    }
    let b = ps.transpose() * yv;
    a.lu().solve(&b).expect("nonsingular").iter().copied().collect()
}

/// Largest eigenvalue of `ΨᵀΨ` via a symmetric eigendecomposition.
pub fn gram_top_eigenvalue(design: &Array2<f64>) -> f64 {
    let p = to_dmatrix(design);
    let g = p.transpose() * p;
    g.symmetric_eigen().eigenvalues.iter().copied().fold(f64::MIN, f64::max)
}

/// Logistic empirical risk `(1/N) Σ log(1 + exp(−y ψᵀθ)) + λ‖θ‖²`.
pub fn logistic_risk(design: &Array2<f64>, y: &Array1<f64>, theta: &Array1<f64>, lambda: f64) -> f64 {
    let p = design.dot(theta);
    let data: f64 = p
        .iter()
        .zip(y)
        .map(|(u, t)| {
            let z = -u * t;
            if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            }
        })
        .sum::<f64>()
        / y.len() as f64;
    data + lambda * theta.dot(theta)
}

/// Quadratic empirical risk `(1/N) Σ (y − ψᵀθ)² + λ‖θ‖²`.
pub fn quadratic_risk(design: &Array2<f64>, y: &Array1<f64>, theta: &Array1<f64>, lambda: f64) -> f64 {
    let r = y - &design.dot(theta);
    r.dot(&r) / y.len() as f64 + lambda * theta.dot(theta)
}

/// Labels in {−1, +1} drawn from the logistic model with parameter `theta`.
pub fn logistic_labels(rng: &mut ChaCha8Rng, design: &Array2<f64>, theta: &Array1<f64>) -> Array1<f64> {
    design
        .dot(theta)
        .mapv(|u| if rng.random::<f64>() < 1.0 / (1.0 + (-u).exp()) { 1.0 } else { -1.0 })
}
