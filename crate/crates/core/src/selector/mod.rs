//! Geometry-aware selection between a baseline completion and its refined
//! counterpart, scored by a parameter-free point encoder against a bank of
//! complete reference shapes.

mod bank;
mod pointnn;
mod select;

pub use bank::{build_feature_bank, FeatureBank};
pub use pointnn::{pointnn_embed, PointNnConfig};
pub use select::{decide, quality_score, score_descriptor, select, Choice, Criterion, SelectionRecord};
