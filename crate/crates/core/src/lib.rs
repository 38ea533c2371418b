//! Autoencoder-based clustering features for material-removal-rate
//! regression on chemical-mechanical-polishing sensor traces.
//!
//! The pipeline runs wafer runs through a feature extractor, trains a dense
//! autoencoder with reconstruction and latent clustering losses, and fits
//! per-wear linear regressions in the latent space.

pub mod cli;
pub mod clustering;
pub mod data;
pub mod error;
pub mod features;
pub mod nn;
pub mod regression;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
