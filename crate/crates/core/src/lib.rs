//! Learning which photo a user would take of an item.
//!
//! The crate estimates the probability `Pr(u, f)` that user `u` authored photo
//! `f`, and uses it to pick the photos of an item that best match a user's (or
//! a group's) tastes. Around the model sit the pieces needed to reproduce the
//! experimental pipeline on precomputed image codes: corpus ingestion, dataset
//! construction with negative sampling, training, the random and centroid
//! baselines, ranking metrics and a seeded synthetic data generator.

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod group;
pub mod model;
pub mod seed;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
