//! Occlusion generators that turn complete clouds into partial ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::cloud::{dist2, PointCloud};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CropMode {
    /// Remove the points closest to a random unit vector.
    Spherical,
    /// Remove the neighbourhood of a random seed point.
    SeedProximity,
}

impl std::str::FromStr for CropMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spherical" => Ok(CropMode::Spherical),
            "seed-proximity" | "seed" => Ok(CropMode::SeedProximity),
            other => Err(Error::invalid(format!("unknown crop mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CropResult<T> {
    pub partial: PointCloud<T>,
    /// Strictly increasing indices into the source cloud.
    pub removed_indices: Vec<usize>,
}

fn check_args<T: Real>(src: &PointCloud<T>, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("crop ratio must lie in (0, 1), got {ratio}")));
    }
    if src.len() < 2 {
        return Err(Error::invalid("cropping needs at least two points"));
    }
    Ok((ratio * src.len() as f64).floor() as usize)
}

/// Removes the `k` first entries of `ranked` (a permutation of the source
/// indices ordered by removal priority).
fn remove_ranked<T: Real>(src: &PointCloud<T>, ranked: &[usize], k: usize) -> Result<CropResult<T>> {
    let mut removed = ranked[..k].to_vec();
    removed.sort_unstable();
    let mut drop = vec![false; src.len()];
    for &i in &removed {
        drop[i] = true;
    }
    let kept: Vec<[T; 3]> = src
        .points()
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(p, _)| *p)
        .collect();
    Ok(CropResult {
        partial: PointCloud::new(kept)?,
        removed_indices: removed,
    })
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = dist2(&v, &[0.0; 3]).sqrt();
        if n > 1e-9 {
            return v.map(|c| c / n);
        }
    }
}

/// View-dependent cut: the `floor(ratio * N)` points nearest to a random unit
/// vector (taken as a point on the unit sphere) are removed.
pub fn crop_spherical<T: Real>(src: &PointCloud<T>, ratio: f64, rng_seed: u64) -> Result<CropResult<T>> {
    let k = check_args(src, ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let c = random_unit_vector(&mut rng);
    let mut keyed: Vec<(f64, usize)> = (0..src.len()).map(|i| (dist2(&src.point_f64(i), &c), i)).collect();
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let ranked: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
    remove_ranked(src, &ranked, k)
}

/// Local occlusion: a uniformly random seed point and its
/// `floor(ratio * N) - 1` nearest neighbours are removed.
pub fn crop_seed_proximity<T: Real>(src: &PointCloud<T>, deletion_ratio: f64, rng_seed: u64) -> Result<CropResult<T>> {
    let k = check_args(src, deletion_ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let seed = rng.random_range(0..src.len());
    let s = src.point_f64(seed);
    let mut keyed: Vec<(f64, bool, usize)> = (0..src.len())
        .map(|i| (dist2(&src.point_f64(i), &s), i != seed, i))
        .collect();
    // The seed sorts first even when exact duplicates of it exist.
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let ranked: Vec<usize> = keyed.into_iter().map(|(_, _, i)| i).collect();
    remove_ranked(src, &ranked, k)
}

pub fn crop<T: Real>(src: &PointCloud<T>, mode: CropMode, ratio: f64, rng_seed: u64) -> Result<CropResult<T>> {
    match mode {
        CropMode::Spherical => crop_spherical(src, ratio, rng_seed),
        CropMode::SeedProximity => crop_seed_proximity(src, ratio, rng_seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_cloud(n: usize, seed: u64) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new((0..n).map(|_| random_unit_vector(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn crop_counts() {
        let src = sphere_cloud(2048, 1);
        assert_eq!(crop_spherical(&src, 0.25, 9).unwrap().partial.len(), 1536);
        assert_eq!(crop_spherical(&src, 0.50, 9).unwrap().partial.len(), 1024);
        assert_eq!(crop_seed_proximity(&src, 0.40, 9).unwrap().partial.len(), 1229);
        let small = sphere_cloud(10, 2);
        assert_eq!(crop_seed_proximity(&small, 0.40, 0).unwrap().partial.len(), 6);
    }

    #[test]
    fn crop_rejects_bad_ratio() {
        let src = sphere_cloud(16, 1);
        for r in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(crop_spherical(&src, r, 0).is_err());
            assert!(crop_seed_proximity(&src, r, 0).is_err());
        }
        let one = PointCloud::new(vec![[0.0, 0.0, 0.0]]).unwrap();
        assert!(crop_spherical(&one, 0.5, 0).is_err());
    }

    #[test]
    fn crop_is_seeded() {
        let src = sphere_cloud(300, 4);
        assert_eq!(crop_spherical(&src, 0.3, 5).unwrap(), crop_spherical(&src, 0.3, 5).unwrap());
        assert_eq!(crop_seed_proximity(&src, 0.3, 5).unwrap(), crop_seed_proximity(&src, 0.3, 5).unwrap());
        assert_ne!(
            crop_spherical(&src, 0.3, 5).unwrap().removed_indices,
            crop_spherical(&src, 0.3, 6).unwrap().removed_indices
        );
    }

    #[test]
    fn seed_is_removed_even_with_duplicates() {
        let src = PointCloud::new(vec![[0.0, 0.0, 0.0]; 10]).unwrap();
        for s in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let seed = rng.random_range(0..10usize);
            let r = crop_seed_proximity(&src, 0.2, s).unwrap();
            assert!(r.removed_indices.contains(&seed));
        }
    }
}
