use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordered set of 3-D points in model units. Never empty, always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    points: Vec<[T; 3]>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<[T; 3]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud must contain at least one point"));
        }
        if let Some(i) = points
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    /// Builds a cloud from a flat `[x0, y0, z0, x1, ...]` buffer.
    pub fn from_flat(flat: &[T]) -> Result<Self> {
        if !flat.len().is_multiple_of(3) {
            return Err(Error::invalid(format!(
                "flat coordinate buffer length {} is not a multiple of 3",
                flat.len()
            )));
        }
        Self::new(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with collections.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[[T; 3]] {
        &self.points
    }

    #[inline]
    pub fn point(&self, i: usize) -> [T; 3] {
        self.points[i]
    }

    pub fn into_points(self) -> Vec<[T; 3]> {
        self.points
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.points.iter().flat_map(|p| p.iter().copied()).collect()
    }

    /// Point `i` widened to `f64`.
    #[inline]
    pub fn point_f64(&self, i: usize) -> [f64; 3] {
        let p = &self.points[i];
        [p[0].as_f64(), p[1].as_f64(), p[2].as_f64()]
    }

    pub fn to_f64_points(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.point_f64(i)).collect()
    }

    /// Converts the cloud to another precision.
    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| [U::of(p[0].as_f64()), U::of(p[1].as_f64()), U::of(p[2].as_f64())])
                .collect(),
        }
    }

    /// New cloud holding the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            let p = self
                .points
                .get(i)
                .ok_or_else(|| Error::invalid(format!("index {i} out of range for {} points", self.len())))?;
            out.push(*p);
        }
        Self::new(out)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for i in 0..self.len() {
            let p = self.point_f64(i);
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        dist2(&lo, &hi).sqrt()
    }

    pub fn centroid(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for i in 0..self.len() {
            let p = self.point_f64(i);
            for d in 0..3 {
                c[d] += p[d];
            }
        }
        let n = self.len() as f64;
        c.map(|v| v / n)
    }
}

#[inline]
pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
