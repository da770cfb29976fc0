//! Training toolkit for low-dimensional classification with mixup
//! augmentation and generative-model based relabeling.
//!
//! The crate is organized around a small set of subsystems:
//! - [`data`]: synthetic dataset generators, CSV ingestion, splits and folds
//! - [`density`]: class-conditional Gaussian and kernel density models
//! - [`augment`]: mixup sampling, labeling variants, manifold-intrusion checks
//! - [`models`]: softmax regression and fully-connected ReLU networks
//! - [`train`]: training pipelines and cross-validation
//! - [`eval`]: accuracy, margins, gradient-sign attacks, boundary grids
//! - [`theory`]: closed-form toy-problem optima and Taylor-approximated losses

pub mod augment;
pub mod data;
pub mod density;
pub mod error;
pub mod eval;
pub(crate) mod linalg;
pub mod models;
pub mod rng;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
