use serde::{Deserialize, Serialize};

use crate::geometry::cloud::{dist2, PointCloud};
use crate::scalar::Real;

/// Affine map taking a cloud into the closed unit ball: `(p - centroid) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub centroid: [f64; 3],
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        centroid: [0.0; 3],
        scale: 1.0,
    };

    pub fn apply<T: Real>(&self, cloud: &PointCloud<T>) -> PointCloud<T> {
        self.map(cloud, |p, d| (p - self.centroid[d]) / self.scale)
    }

    pub fn invert<T: Real>(&self, cloud: &PointCloud<T>) -> PointCloud<T> {
        self.map(cloud, |p, d| p * self.scale + self.centroid[d])
    }

    fn map<T: Real>(&self, cloud: &PointCloud<T>, f: impl Fn(f64, usize) -> f64) -> PointCloud<T> {
        let pts = (0..cloud.len())
            .map(|i| {
                let p = cloud.point_f64(i);
                [T::of(f(p[0], 0)), T::of(f(p[1], 1)), T::of(f(p[2], 2))]
            })
            .collect();
        PointCloud::new(pts).expect("affine image of a finite cloud is finite")
    }
}

/// Centers the cloud on its mean and scales by the largest centroid distance
/// (scale 1 when every point coincides).
pub fn normalize_unit_sphere<T: Real>(src: &PointCloud<T>) -> (PointCloud<T>, Normalization) {
    let centroid = src.centroid();
    let max_d = (0..src.len())
        .map(|i| dist2(&src.point_f64(i), &centroid))
        .fold(0.0f64, f64::max)
        .sqrt();
    let scale = if max_d > 0.0 { max_d } else { 1.0 };
    let norm = Normalization { centroid, scale };
    (norm.apply(src), norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let c = PointCloud::new(vec![[2.0, 0.0, 0.0], [4.0, 0.0, 0.0]]).unwrap();
        let (n, t) = normalize_unit_sphere(&c);
        assert_eq!(n.points(), &[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert_eq!(t.centroid, [3.0, 0.0, 0.0]);
        assert_eq!(t.scale, 1.0);

        let single = PointCloud::new(vec![[5.0, -2.0, 1.0]]).unwrap();
        let (n, t) = normalize_unit_sphere(&single);
        assert_eq!(n.points(), &[[0.0, 0.0, 0.0]]);
        assert_eq!(t.scale, 1.0);

        let unit = PointCloud::new(vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, -0.5, 0.0]]).unwrap();
        let (n, t) = normalize_unit_sphere(&unit);
        assert_eq!(n, unit);
        assert_eq!(t, Normalization::IDENTITY);
    }
}
