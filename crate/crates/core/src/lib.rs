//! Greedy selection of explicit kernel features.
//!
//! The library builds a pool of explicit features (Taylor features of
//! Gaussian kernels, raw coordinates for the linear kernel, random Fourier
//! features) and greedily selects the ones whose coordinates of the
//! empirical-risk gradient are largest, refitting on the selected support
//! after every pick. Random-feature baselines (plain, alignment-reweighted,
//! score-selected) and exact kernel ridge / kernel logistic regression are
//! included for comparison, along with a small experiment harness.
//!
//! ```
//! use std::sync::Arc;
//! use mfga::{CandidateSet, Dataset, GreedyConfig, Task, fit_mfga};
//! use ndarray::{Array1, Array2};
//!
//! let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
//! let y: Array1<f64> = x.rows().into_iter().map(|r| 0.5 * r[0] - 0.25 * r[1] * r[1]).collect();
//! let ds = Dataset::from_arrays(x, y, Task::Regression).unwrap();
//!
//! let candidates = Arc::new(CandidateSet::for_task(2, Task::Regression, 1.0).unwrap());
//! let (model, trace) = fit_mfga(candidates, &ds, 1e-6, &GreedyConfig::new(4)).unwrap();
//! assert_eq!(model.support.len(), 4);
//! assert!(trace.is_monotone(1e-12));
//! ```

pub mod baselines;
pub mod bench;
pub mod clock;
pub mod data;
pub mod error;
pub mod features;
pub mod greedy;
pub mod linalg;
pub mod objective;
mod par;
pub mod rng;

pub use baselines::{KernelKind, KernelModel};
pub use data::{Dataset, RawDataset, Schema, Standardizer, Task};
pub use error::{Error, Result};
pub use features::{BaseKernel, CandidateSet, FeatureDescriptor, FeatureKind, MultiIndex};
pub use greedy::{fit_mfga, mfga_train, GreedyConfig, SparseFit, SparseModel, TrainTrace};
pub use objective::{Loss, Objective};
pub use par::set_threads;
