use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::Real;

/// Relative jitter of surrogate points, as a fraction of the partial's
/// bounding-box diagonal.
pub const SURROGATE_JITTER: f64 = 0.01;

/// Plane through the centroid orthogonal to the direction of largest
/// spread, returned as `(centroid, unit normal)`.
pub fn principal_plane<T: Real>(cloud: &PointCloud<T>) -> ([f64; 3], [f64; 3]) {
    let c = cloud.centroid();
    let mut cov = Matrix3::<f64>::zeros();
    for p in cloud.points() {
        let d = Vector3::new(p[0].as_f64() - c[0], p[1].as_f64() - c[1], p[2].as_f64() - c[2]);
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / cloud.len() as f64);
    let mut best = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let mut n = eig.eigenvectors.column(best).into_owned();
    // fix the sign so the plane does not depend on solver conventions
    let lead = (0..3).max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap_or(0);
    if n[lead] < 0.0 {
        n = -n;
    }
    (c, [n[0], n[1], n[2]])
}

/// Stand-in for a pretrained completion network. Half of the output
/// resamples the partial with jitter, the other half mirrors resampled
/// partial points across the principal plane. The result is deliberately
/// imperfect.
pub fn surrogate_complete<T: Real>(partial: &PointCloud<T>, target_size: usize, seed: u64) -> Result<PointCloud<T>> {
    if target_size == 0 {
        return Err(Error::invalid("surrogate target size must be positive"));
    }
    let (c, n) = principal_plane(partial);
    let diag = partial.bounding_box_diagonal();
    let sigma = if diag > 0.0 { SURROGATE_JITTER * diag } else { SURROGATE_JITTER };
    let jitter = Normal::new(0.0, sigma).expect("positive sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = partial.to_f64_points();
    let points = (0..target_size)
        .map(|i| {
            let mut p = src[rng.random_range(0..src.len())];
            if i % 2 == 1 {
                let d = (p[0] - c[0]) * n[0] + (p[1] - c[1]) * n[1] + (p[2] - c[2]) * n[2];
                for j in 0..3 {
                    p[j] -= 2.0 * d * n[j];
                }
            }
            p.map(|v| T::of(v + jitter.sample(&mut rng)))
        })
        .collect();
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{chamfer_l2, crop_spherical, farthest_point_sample};
    use crate::harness::synth::{synthetic_family, ShapeFamily};

    #[test]
    fn plane_of_elongated_cloud() {
        let pts: Vec<[f64; 3]> = (0..50).map(|i| [i as f64, (i % 3) as f64 * 0.1, 0.0]).collect();
        let (_, n) = principal_plane(&PointCloud::new(pts).unwrap());
        assert!((n[0] - 1.0).abs() < 1e-3, "{n:?}");
    }

    #[test]
    fn size_determinism_and_imperfection() {
        let shapes: Vec<PointCloud<f64>> = synthetic_family(ShapeFamily::WingedCross, 3, 256, 4).unwrap();
        for (k, gt) in shapes.iter().enumerate() {
            let partial = crop_spherical(gt, 0.25, k as u64).unwrap().partial;
            let a = surrogate_complete(&partial, 256, 1).unwrap();
            assert_eq!(a.len(), 256);
            assert_eq!(a, surrogate_complete(&partial, 256, 1).unwrap());
            let sub = gt.select(&farthest_point_sample(gt, 192, 0).unwrap()).unwrap();
            assert!(chamfer_l2(&a, gt) > chamfer_l2(&sub, gt));
        }
        let single = PointCloud::new(vec![[1.0f32, 2.0, 3.0]]).unwrap();
        assert_eq!(surrogate_complete(&single, 10, 0).unwrap().len(), 10);
        assert!(surrogate_complete(&single, 0, 0).is_err());
    }
}
