//! Parameter-free hierarchical point encoder.
//!
//! Each stage samples centres by farthest point sampling, groups their k
//! nearest neighbours, lifts the relative offsets with fixed sine/cosine
//! bands and pools every group by max and mean. A final max+mean pool over
//! the last stage's centres gives the descriptor, which is L2-normalised.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist2, farthest_point_sample_in, knn_in, PointCloud};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointNnConfig {
    /// Centres sampled per stage; a stage asking for more points than the
    /// previous stage holds keeps all of them.
    pub stage_sizes: Vec<usize>,
    pub k: usize,
    pub bands: usize,
    pub base_scale: f64,
}

impl Default for PointNnConfig {
    fn default() -> Self {
        Self {
            stage_sizes: vec![512, 128],
            k: 16,
            bands: 6,
            base_scale: 1.0,
        }
    }
}

impl PointNnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stage_sizes.is_empty() || self.stage_sizes.contains(&0) {
            return Err(Error::invalid("PointNN needs at least one non-empty stage"));
        }
        if self.stage_sizes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid(format!(
                "PointNN stage sizes must strictly decrease, got {:?}",
                self.stage_sizes
            )));
        }
        if self.k == 0 || self.bands == 0 {
            return Err(Error::invalid("PointNN k and band count must be positive"));
        }
        if !(self.base_scale.is_finite() && self.base_scale > 0.0) {
            return Err(Error::invalid("PointNN base scale must be positive"));
        }
        Ok(())
    }

    /// Smallest cloud the encoder accepts.
    pub fn min_points(&self) -> usize {
        *self.stage_sizes.last().unwrap_or(&1)
    }

    /// Length of the descriptor produced by [`pointnn_embed`].
    pub fn descriptor_dim(&self) -> usize {
        let pe = 6 * self.bands;
        let mut feat = 0;
        for _ in &self.stage_sizes {
            feat = 2 * (pe + feat);
        }
        2 * feat
    }
}

fn encode_offset(offset: [f64; 3], cfg: &PointNnConfig, out: &mut Vec<f64>) {
    for c in offset {
        let mut freq = cfg.base_scale;
        for _ in 0..cfg.bands {
            let (s, co) = (freq * c).sin_cos();
            out.push(s);
            out.push(co);
            freq *= 2.0;
        }
    }
}

fn max_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    let mut mx = vec![f64::NEG_INFINITY; d];
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mx[j] = mx[j].max(r[j]);
            mean[j] += r[j];
        }
    }
    let n = rows.len() as f64;
    mx.extend(mean.into_iter().map(|v| v / n));
    mx
}

/// Index of the point farthest from the centroid, lowest index on ties.
fn farthest_from_centroid(points: &[[f64; 3]]) -> usize {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for j in 0..3 {
            c[j] += p[j] / n;
        }
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = dist2(p, &c);
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Unit-norm geometric descriptor of `cloud`. No trained parameters are
/// involved, so equal inputs give equal outputs in any process.
pub fn pointnn_embed<T: Real>(cloud: &PointCloud<T>, cfg: &PointNnConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cloud.len() < cfg.min_points() {
        return Err(Error::invalid(format!(
            "PointNN needs at least {} points, got {}",
            cfg.min_points(),
            cloud.len()
        )));
    }
    let mut points = cloud.to_f64_points();
    let mut feats: Vec<Vec<f64>> = vec![Vec::new(); points.len()];
    for &size in &cfg.stage_sizes {
        let m = size.min(points.len());
        let centres = farthest_point_sample_in(&points, m, farthest_from_centroid(&points))?;
        let k = cfg.k.min(points.len());
        let groups: Vec<Vec<usize>> = centres
            .iter()
            .map(|&c| knn_in(&points, points[c], k))
            .collect::<Result<_>>()?;
        let radius = centres
            .iter()
            .zip(&groups)
            .flat_map(|(&c, g)| g.iter().map(move |&j| (c, j)))
            .map(|(c, j)| dist2(&points[c], &points[j]))
            .fold(0.0f64, f64::max)
            .sqrt();
        let radius = if radius > 0.0 { radius } else { 1.0 };
        let mut next_feats = Vec::with_capacity(m);
        for (&c, g) in centres.iter().zip(&groups) {
            let rows: Vec<Vec<f64>> = g
                .iter()
                .map(|&j| {
                    let off = [
                        (points[j][0] - points[c][0]) / radius,
                        (points[j][1] - points[c][1]) / radius,
                        (points[j][2] - points[c][2]) / radius,
                    ];
                    let mut row = Vec::with_capacity(6 * cfg.bands + feats[j].len());
                    encode_offset(off, cfg, &mut row);
                    row.extend_from_slice(&feats[j]);
                    row
                })
                .collect();
            next_feats.push(max_mean(&rows));
        }
        points = centres.iter().map(|&c| points[c]).collect();
        feats = next_feats;
    }
    let mut desc = max_mean(&feats);
    let norm = desc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::DegenerateGeometry("PointNN descriptor has zero norm".into()));
    }
    desc.iter_mut().for_each(|v| *v /= norm);
    Ok(desc)
}
