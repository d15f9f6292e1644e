//! Chamfer distance (CD-L2) and F-score.
//!
//! CD-L2 here is the sum of the two directional means of squared
//! nearest-neighbour distances; it is neither halved nor square-rooted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::cloud::PointCloud;
use crate::geometry::neighbors::NearestIndex;
use crate::scalar::Real;

/// Precision/recall summary of a prediction against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cd_l2: f64,
    pub fscore: f64,
    pub precision: f64,
    pub recall: f64,
    /// Absolute match threshold.
    pub tau: f64,
}

/// Per-point squared nearest-neighbour distances from `from` into `to`.
pub fn directional_sq_distances(from: &[[f64; 3]], to: &NearestIndex) -> Vec<f64> {
    from.iter().map(|p| to.nearest(p).1).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn chamfer_l2<T: Real>(a: &PointCloud<T>, b: &PointCloud<T>) -> f64 {
    let pa = a.to_f64_points();
    let pb = b.to_f64_points();
    chamfer_l2_f64(&pa, &pb)
}

pub(crate) fn chamfer_l2_f64(pa: &[[f64; 3]], pb: &[[f64; 3]]) -> f64 {
    let ia = NearestIndex::new(pa.to_vec());
    let ib = NearestIndex::new(pb.to_vec());
    mean(&directional_sq_distances(pa, &ib)) + mean(&directional_sq_distances(pb, &ia))
}

/// F-score at `tau_fraction` of the ground-truth bounding-box diagonal, along
/// with the Chamfer distance of the pair.
pub fn fscore<T: Real>(pred: &PointCloud<T>, gt: &PointCloud<T>, tau_fraction: f64) -> Result<MetricReport> {
    if !(tau_fraction > 0.0 && tau_fraction.is_finite()) {
        return Err(Error::invalid(format!("tau_fraction must be positive, got {tau_fraction}")));
    }
    let diag = gt.bounding_box_diagonal();
    if diag == 0.0 {
        return Err(Error::DegenerateGeometry(
            "ground-truth cloud has a zero bounding-box diagonal".into(),
        ));
    }
    let tau = tau_fraction * diag;
    let pp = pred.to_f64_points();
    let pg = gt.to_f64_points();
    let ip = NearestIndex::new(pp.clone());
    let ig = NearestIndex::new(pg.clone());
    let pred_to_gt = directional_sq_distances(&pp, &ig);
    let gt_to_pred = directional_sq_distances(&pg, &ip);
    let tau2 = tau * tau;
    let within = |v: &[f64]| v.iter().filter(|&&d| d <= tau2).count() as f64 / v.len() as f64;
    let precision = within(&pred_to_gt);
    let recall = within(&gt_to_pred);
    Ok(MetricReport {
        cd_l2: mean(&pred_to_gt) + mean(&gt_to_pred),
        fscore: harmonic(precision, recall),
        precision,
        recall,
        tau,
    })
}

pub(crate) fn harmonic(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}
