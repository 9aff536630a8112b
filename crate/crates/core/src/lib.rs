//! Numerical laboratory for the geometry of multi-modal contrastive embeddings.
//!
//! The crate reproduces the cone effect of randomly initialized networks,
//! Monte-Carlo checks of the cosine-monotonicity and variance results behind
//! it, the symmetric contrastive (CLIP) loss landscape that keeps two
//! modalities apart, and small controlled simulations of gap preservation.
//!
//! Module map:
//! - [`numcore`]: seeded RNG, dense matrices, cosine statistics, SVD, cap fractions
//! - [`embedding`]: the modality-labelled [`EmbeddingSet`]
//! - [`cone`]: random MLPs, per-layer cosine curves, multi-seed cones
//! - [`theory`]: Monte-Carlo verification of the monotonicity / variance results
//! - [`gaploss`]: gap vector, contrastive loss and gradient, embedding shift sweeps
//! - [`spheresim`]: 3D mismatch simulation, projected-gradient training, Procrustes
//! - [`io`]: embedding file formats and 2D projection

pub mod cone;
pub mod embedding;
mod error;
pub mod gaploss;
pub mod io;
pub mod numcore;
pub mod spheresim;
pub mod theory;

pub use embedding::EmbeddingSet;
pub use error::{Error, Result};
pub use numcore::{Mat, Rng};

/// Version string recorded in run manifests and JSON reports.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
