//! CRPS-trained probabilistic limited-area ensemble forecasting at desk
//! scale: a latent-noise-conditioned convolutional forecaster trained with
//! the fair CRPS estimator, rolled out autoregressively with boundary
//! forcing, plus verification metrics and a synthetic dataset generator.

pub mod domain;
pub mod error;
pub mod scoring;
pub mod spectra;
pub mod tensor;
pub mod toyatmos;

pub use error::{Error, Result};
