//! Robust estimation by adversarial (GAN-style) projection onto parametric
//! candidate families, scored with smoothed generalized Kolmogorov-Smirnov
//! discriminators.

pub mod contamination;
pub mod dataset;
pub mod discriminator;
pub mod distance;
pub mod error;
pub mod estimator;
pub mod generator;
pub mod gradcheck;
pub mod harness;
pub mod lemma_lab;
pub mod linalg;
pub mod orlicz;
pub mod rng;

pub use dataset::{Dataset, Points};
pub use error::{Error, Result};
