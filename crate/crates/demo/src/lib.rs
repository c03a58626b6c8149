//! Browser demo: three interactive views computed by the core library.
//!
//! * [`taylor_curve`]: exact Gaussian kernel against its truncated Taylor
//!   expansion and the truncation bound, along a 1-D slice.
//! * [`fit_curve`]: greedy selection from Taylor features against random
//!   kitchen sinks on a noisy 1-D regression problem with the same `M`.
//! * [`rff_curve`]: Monte Carlo kernel estimate from `M` random Fourier
//!   features against the exact kernel.
//!
//! Each view has a plain Rust function returning a serializable struct and a
//! `*_json` export for JavaScript.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use mfga::baselines::rks_train;
use mfga::features::{gaussian_kernel, truncation_bound};
use mfga::{fit_mfga, BaseKernel, CandidateSet, Dataset, GreedyConfig, Task};

/// Plot range of every view.
pub const RANGE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorCurve {
    pub anchor: f64,
    pub t: Vec<f64>,
    pub exact: Vec<f64>,
    pub approx: Vec<f64>,
    pub bound: Vec<f64>,
    pub features: usize,
}

fn grid(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| -RANGE + 2.0 * RANGE * i as f64 / (points - 1) as f64)
        .collect()
}

fn demo_error(e: mfga::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// `k(anchor, t)` and its order-`order` Taylor approximation for `t` on a grid.
pub fn taylor_curve(sigma: f64, order: u32, anchor: f64, points: usize) -> mfga::Result<TaylorCurve> {
    let set = CandidateSet::build(1, vec![BaseKernel::Gaussian { sigma, order }], None)?;
    let fa = set.evaluate_row(&[anchor])?;
    let t = grid(points);
    let mut exact = Vec::with_capacity(t.len());
    let mut approx = Vec::with_capacity(t.len());
    let mut bound = Vec::with_capacity(t.len());
    for &v in &t {
        let fv = set.evaluate_row(&[v])?;
        exact.push(gaussian_kernel(&[anchor], &[v], sigma));
        approx.push(fa.iter().zip(&fv).map(|(a, b)| a * b).sum());
        bound.push(truncation_bound(anchor.abs(), v.abs(), sigma, order));
    }
    Ok(TaylorCurve {
        anchor,
        t,
        exact,
        approx,
        bound,
        features: set.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitCurve {
    pub train_x: Vec<f64>,
    pub train_y: Vec<f64>,
    pub t: Vec<f64>,
    pub truth: Vec<f64>,
    pub mfga: Vec<f64>,
    pub rks: Vec<f64>,
    /// Mean squared error against the noiseless target on the plot grid.
    pub mfga_mse: f64,
    pub rks_mse: f64,
    /// Selected Taylor exponents, in selection order.
    pub selected: Vec<u32>,
}

fn target(x: f64) -> f64 {
    (2.0 * x).sin() + 0.3 * x
}

/// Fit `n` noisy samples of a smooth target with `m` features by both
/// greedy Taylor selection (order `2m` candidates) and random kitchen sinks.
pub fn fit_curve(n: usize, m: usize, noise: f64, sigma: f64, lambda: f64, seed: u64) -> mfga::Result<FitCurve> {
    if n < 2 || m == 0 {
        return Err(mfga::Error::InvalidArgument("need n >= 2 samples and m >= 1 features".into()));
    }
    let mut rng = mfga::rng::seeded(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-RANGE..RANGE)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let e: f64 = StandardNormal.sample(&mut rng);
            target(x) + noise * e
        })
        .collect();
    let ds = Dataset::from_arrays(
        Array2::from_shape_vec((n, 1), xs.clone()).expect("n x 1"),
        Array1::from(ys.clone()),
        Task::Regression,
    )?;

    let order = (2 * m) as u32;
    let candidates = Arc::new(CandidateSet::build(1, vec![BaseKernel::Gaussian { sigma, order }], None)?);
    let (mfga_model, _) = fit_mfga(candidates.clone(), &ds, lambda, &GreedyConfig::new(m))?;
    let (rks_model, _) = rks_train(&ds, m, sigma, seed, lambda)?;

    let t = grid(200);
    let grid_x = Array2::from_shape_vec((t.len(), 1), t.clone()).expect("grid");
    let mfga_pred = mfga_model.predict_rows(grid_x.view())?.to_vec();
    let rks_pred = rks_model.predict_rows(grid_x.view())?.to_vec();
    let truth: Vec<f64> = t.iter().map(|&x| target(x)).collect();
    let mse = |p: &[f64]| p.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / t.len() as f64;
    let selected = mfga_model
        .support
        .iter()
        .map(|&j| match &candidates.descriptors()[j].kind {
            mfga::FeatureKind::TaylorGaussian { index, .. } => index.order(),
            _ => 0,
        })
        .collect();
    Ok(FitCurve {
        train_x: xs,
        train_y: ys,
        mfga_mse: mse(&mfga_pred),
        rks_mse: mse(&rks_pred),
        t,
        truth,
        mfga: mfga_pred,
        rks: rks_pred,
        selected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RffCurve {
    pub t: Vec<f64>,
    pub exact: Vec<f64>,
    pub estimate: Vec<f64>,
    /// `√(2/M)`, the scale of the per-point Monte Carlo error.
    pub scale: f64,
}

/// `k(0, t)` against its estimate from `m` random Fourier features.
pub fn rff_curve(m: usize, sigma: f64, seed: u64, points: usize) -> mfga::Result<RffCurve> {
    let set = CandidateSet::random_fourier(1, m, sigma, seed)?;
    let origin = set.evaluate_row(&[0.0])?;
    let t = grid(points);
    let mut exact = Vec::with_capacity(t.len());
    let mut estimate = Vec::with_capacity(t.len());
    for &v in &t {
        let fv = set.evaluate_row(&[v])?;
        exact.push(gaussian_kernel(&[0.0], &[v], sigma));
        estimate.push(origin.iter().zip(&fv).map(|(a, b)| a * b).sum());
    }
    Ok(RffCurve {
        t,
        exact,
        estimate,
        scale: (2.0 / m as f64).sqrt(),
    })
}

fn to_json<T: Serialize>(value: mfga::Result<T>) -> Result<String, JsValue> {
    let value = value.map_err(demo_error)?;
    serde_json::to_string(&value).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn taylor_curve_json(sigma: f64, order: u32, anchor: f64, points: usize) -> Result<String, JsValue> {
    to_json(taylor_curve(sigma, order, anchor, points))
}

#[wasm_bindgen]
pub fn fit_curve_json(n: usize, m: usize, noise: f64, sigma: f64, lambda: f64, seed: u32) -> Result<String, JsValue> {
    to_json(fit_curve(n, m, noise, sigma, lambda, seed as u64))
}

#[wasm_bindgen]
pub fn rff_curve_json(m: usize, sigma: f64, seed: u32, points: usize) -> Result<String, JsValue> {
    to_json(rff_curve(m, sigma, seed as u64, points))
}
