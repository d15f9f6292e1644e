//! File formats, synthetic data, the surrogate completer and experiment
//! orchestration.

mod config;
mod io;
mod pipeline;
mod surrogate;
mod synth;

pub use config::{derive_seed, is_train_id, stable_hash, CategorySource, CategorySpec, CropConfig, ExperimentConfig};
pub use io::{
    decode_pcf, encode_pcf, encode_xyz, load_cloud, load_cloud_auto, parse_xyz, save_cloud, save_cloud_auto,
    CloudFormat, PCF_MAGIC,
};
pub use pipeline::{
    baseline_for, load_category, metrics_to_csv, run_pipeline, CategoryReport, Method, MetricsRow, PipelineReport,
    SampleResult, Shape, AE_DIR, BANK_FILE, CURVES_FILE, GFV_FILE, METRICS_FILE, METRICS_HEADER, POLICY_FILE,
    SELECTIONS_FILE, TRAJECTORIES_FILE,
};
pub use surrogate::{principal_plane, surrogate_complete, SURROGATE_JITTER};
pub use synth::{
    generate_synthetic, synthetic_family, ShapeFamily, ShapeParams, SyntheticShapeSpec, MIN_SYNTHETIC_POINTS,
};
