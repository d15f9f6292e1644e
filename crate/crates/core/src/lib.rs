//! Latent-space refinement of point-cloud completions.
//!
//! A completion produced by any backbone is encoded into a 128-D global
//! feature vector by a complete-shape autoencoder, nudged by a TD3 policy
//! trained on Chamfer improvement, decoded, and kept only when a
//! parameter-free geometric score (and the Chamfer distance, when ground
//! truth exists) says the refined shape is better.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the default
//! single-precision types used by the pipeline and CLI.

pub mod autoencoder;
pub mod diff;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod refiner;
pub mod scalar;
pub mod selector;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PointCloud32 = geometry::PointCloud<f32>;
pub type PointCloud64 = geometry::PointCloud<f64>;
pub type Mlp32 = diff::Mlp<f32>;
pub type Mlp64 = diff::Mlp<f64>;



pub type AeModel32 = autoencoder::AeModel<f32>;
pub type Gfv32 = autoencoder::Gfv<f32>;
pub type Policy32 = refiner::Policy<f32>;
pub type Policy64 = refiner::Policy<f64>;
