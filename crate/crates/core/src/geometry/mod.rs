//! Point-set kernels: metrics, sampling, neighbour search, normalization and
//! occlusion generators. Everything here is a pure function of its inputs.

mod cloud;
mod crop;
mod metrics;
mod neighbors;
mod normalize;
mod sampling;

pub use cloud::{dist2, PointCloud};
pub use crop::{crop, crop_seed_proximity, crop_spherical, CropMode, CropResult};
pub use metrics::{chamfer_l2, directional_sq_distances, fscore, MetricReport};
pub use neighbors::{knn, nearest_brute, NearestIndex, BRUTE_FORCE_CUTOFF};
pub(crate) use neighbors::knn_in;
pub use normalize::{normalize_unit_sphere, Normalization};
pub use sampling::farthest_point_sample;
pub(crate) use sampling::farthest_point_sample_in;
