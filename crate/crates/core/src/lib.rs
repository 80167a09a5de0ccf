//! Dyadic product-coefficient features for 3D point-cloud classification.
//!
//! The crate is organised as a pipeline:
//!
//! * [`cloud`] and [`io`] read LAS/CSV point clouds and normalise them into
//!   the unit cube.
//! * [`spatial`] answers exact closed-ball radius queries.
//! * [`measure`] holds the dyadic measure math: product coefficients, the
//!   Haar-like product formula and constraint validation.
//! * [`features`] slices each point's spherical neighbourhood into a binary
//!   tree of cells and emits the product coefficients as extra columns.
//! * [`dimred`] fits PCA, Nystroem and autoencoder reducers.
//! * [`classify`] provides KNN, random forests, stratified folds and F1
//!   metrics.
//! * [`harness`] ties it all together into seeded, reproducible experiments.

pub mod classify;
pub mod cloud;
pub mod dimred;
mod error;
pub mod features;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod measure;
pub mod rng;
pub mod spatial;

pub use error::{Error, Result};
pub use matrix::{FeatureMatrix, Matrix};
