//! Switch-Fuse visual place recognition.
//!
//! Each query is routed through a small number of *units*, each holding an
//! ordered pool of matching techniques. Inside a unit, a Bayesian switching
//! loop picks the technique most likely to match the query correctly, guided
//! by calibrated score likelihoods and pairwise complementarity. The
//! techniques picked by all units are then fused by summing their min-max
//! normalized similarity vectors, and the best fused reference is the match.
//!
//! Module map:
//!
//! - [`descriptor`]: built-in descriptors, `SFDESC1` ingestion, cosine similarity
//! - [`calibration`]: priors, likelihood histograms, the `SFCAL1` store
//! - [`switching`]: posterior, complementarity, the per-unit switching loop
//! - [`fusion`]: normalization, summation, best match
//! - [`evaluation`]: ground truth, PR curves, method comparison
//! - [`synth`]: seeded synthetic datasets for testing the pipeline end to end
//! - [`manifest`], [`report`], [`cli`]: dataset binding, report files, the `switch-fuse` binary

pub mod calibration;
pub mod cli;
pub mod config;
pub mod descriptor;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod io;
pub mod manifest;
pub mod report;
pub mod switching;
pub mod synth;
pub mod technique;

pub use error::{Error, Result};
pub use technique::TechniqueId;
