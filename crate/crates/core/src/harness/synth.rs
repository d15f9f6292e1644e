//! Synthetic shape families standing in for object categories.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeFamily {
    BoxFrame,
    WingedCross,
    MultiSphere,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 3] = [ShapeFamily::BoxFrame, ShapeFamily::WingedCross, ShapeFamily::MultiSphere];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::BoxFrame => "box-frame",
            ShapeFamily::WingedCross => "winged-cross",
            ShapeFamily::MultiSphere => "multi-sphere",
        }
    }
}

impl std::fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown shape family `{s}`")))
    }
}

/// Family-specific size parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ShapeParams {
    /// Wireframe of a box: the twelve edges as thin bars.
    BoxFrame { half_extents: [f64; 3], bar_radius: f64 },
    /// Fuselage cylinder along x with a main wing and a tail plane along y.
    WingedCross {
        length: f64,
        body_radius: f64,
        span: f64,
        chord: f64,
        tail_span: f64,
    },
    /// Sphere surfaces of one radius with centres on a ring in the xy plane.
    MultiSphere { count: usize, ring_radius: f64, radius: f64 },
}

impl ShapeParams {
    pub fn family(&self) -> ShapeFamily {
        match self {
            ShapeParams::BoxFrame { .. } => ShapeFamily::BoxFrame,
            ShapeParams::WingedCross { .. } => ShapeFamily::WingedCross,
            ShapeParams::MultiSphere { .. } => ShapeFamily::MultiSphere,
        }
    }

    /// Parameters drawn around the family's nominal shape, so that shapes in
    /// one family differ but stay recognisably alike.
    pub fn sample(family: ShapeFamily, rng: &mut impl Rng) -> Self {
        let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
        match family {
            ShapeFamily::BoxFrame => ShapeParams::BoxFrame {
                half_extents: [u(0.6, 1.0), u(0.4, 0.8), u(0.3, 0.6)],
                bar_radius: u(0.02, 0.05),
            },
            ShapeFamily::WingedCross => ShapeParams::WingedCross {
                length: u(1.6, 2.2),
                body_radius: u(0.08, 0.14),
                span: u(1.4, 2.0),
                chord: u(0.25, 0.4),
                tail_span: u(0.5, 0.8),
            },
            ShapeFamily::MultiSphere => {
                let count = if u(0.0, 1.0) < 0.5 { 2 } else { 3 };
                ShapeParams::MultiSphere {
                    count,
                    ring_radius: u(0.4, 0.7),
                    radius: u(0.25, 0.4),
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ShapeParams::BoxFrame { half_extents, bar_radius } => {
                half_extents.iter().all(|&h| h > 0.0) && *bar_radius >= 0.0
            }
            ShapeParams::WingedCross {
                length,
                body_radius,
                span,
                chord,
                tail_span,
            } => [*length, *body_radius, *span, *chord, *tail_span].iter().all(|&v| v > 0.0),
            ShapeParams::MultiSphere { count, ring_radius, radius } => *count >= 1 && *ring_radius >= 0.0 && *radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid shape parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticShapeSpec {
    pub params: ShapeParams,
    pub points: usize,
    pub seed: u64,
}

pub const MIN_SYNTHETIC_POINTS: usize = 64;

fn unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Picks an index with probability proportional to `weights`.
fn pick(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

fn box_frame(h: [f64; 3], bar: f64, rng: &mut impl Rng) -> [f64; 3] {
    // edge along axis a at the corner signs of the two other axes
    let weights = [h[0], h[1], h[2]];
    let a = pick(&weights, rng);
    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
    let mut p = [0.0; 3];
    p[a] = rng.random_range(-h[a]..h[a]);
    p[b] = if rng.random_bool(0.5) { h[b] } else { -h[b] };
    p[c] = if rng.random_bool(0.5) { h[c] } else { -h[c] };
    if bar > 0.0 {
        let theta = rng.random_range(0.0..TAU);
        p[b] += bar * theta.cos();
        p[c] += bar * theta.sin();
    }
    p
}

fn winged_cross(length: f64, r: f64, span: f64, chord: f64, tail: f64, rng: &mut impl Rng) -> [f64; 3] {
    let body_area = TAU * r * length;
    let wing_area = 2.0 * span * chord;
    let tail_area = 2.0 * tail * chord * 0.6;
    match pick(&[body_area, wing_area, tail_area], rng) {
        0 => {
            let theta = rng.random_range(0.0..TAU);
            [rng.random_range(-length / 2.0..length / 2.0), r * theta.cos(), r * theta.sin()]
        }
        1 => [
            rng.random_range(-chord / 2.0..chord / 2.0) + 0.1 * length,
            rng.random_range(-span / 2.0..span / 2.0),
            0.0,
        ],
        _ => {
            let c = 0.6 * chord;
            [
                -length / 2.0 + rng.random_range(0.0..c),
                rng.random_range(-tail / 2.0..tail / 2.0),
                r * 0.5,
            ]
        }
    }
}

fn multi_sphere(count: usize, ring: f64, radius: f64, rng: &mut impl Rng) -> [f64; 3] {
    let k = rng.random_range(0..count);
    let angle = TAU * k as f64 / count as f64;
    let u = unit_vector(rng);
    [
        ring * angle.cos() + radius * u[0],
        ring * angle.sin() + radius * u[1],
        radius * u[2],
    ]
}

/// Surface sample of the specified shape; deterministic in the spec.
pub fn generate_synthetic<T: Real>(spec: &SyntheticShapeSpec) -> Result<PointCloud<T>> {
    if spec.points < MIN_SYNTHETIC_POINTS {
        return Err(Error::invalid(format!(
            "synthetic shapes need at least {MIN_SYNTHETIC_POINTS} points, got {}",
            spec.points
        )));
    }
    spec.params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points = (0..spec.points)
        .map(|_| {
            let p = match spec.params {
                ShapeParams::BoxFrame { half_extents, bar_radius } => box_frame(half_extents, bar_radius, &mut rng),
                ShapeParams::WingedCross {
                    length,
                    body_radius,
                    span,
                    chord,
                    tail_span,
                } => winged_cross(length, body_radius, span, chord, tail_span, &mut rng),
                ShapeParams::MultiSphere { count, ring_radius, radius } => multi_sphere(count, ring_radius, radius, &mut rng),
            };
            p.map(T::of)
        })
        .collect();
    PointCloud::new(points)
}

/// `count` shapes of one family, each with its own parameters and sampling
/// seed derived from `seed`.
pub fn synthetic_family<T: Real>(family: ShapeFamily, count: usize, points: usize, seed: u64) -> Result<Vec<PointCloud<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let params = ShapeParams::sample(family, &mut rng);
            let shape_seed = rng.random();
            generate_synthetic(&SyntheticShapeSpec {
                params,
                points,
                seed: shape_seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        for fam in ShapeFamily::ALL {
            let a: Vec<PointCloud<f32>> = synthetic_family(fam, 3, 100, 9).unwrap();
            let b: Vec<PointCloud<f32>> = synthetic_family(fam, 3, 100, 9).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().all(|c| c.len() == 100));
            assert_ne!(a[0], a[1]);
        }
    }

    #[test]
    fn multi_sphere_bound() {
        let (ring, r) = (0.6, 0.3);
        let spec = SyntheticShapeSpec {
            params: ShapeParams::MultiSphere {
                count: 3,
                ring_radius: ring,
                radius: r,
            },
            points: 500,
            seed: 1,
        };
        let c: PointCloud<f64> = generate_synthetic(&spec).unwrap();
        for p in c.points() {
            assert!((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= ring + r + 1e-12);
        }
    }

    #[test]
    fn box_frame_points_lie_on_edges() {
        let h = [1.0, 0.5, 0.25];
        let spec = SyntheticShapeSpec {
            params: ShapeParams::BoxFrame {
                half_extents: h,
                bar_radius: 0.0,
            },
            points: 200,
            seed: 2,
        };
        let c: PointCloud<f64> = generate_synthetic(&spec).unwrap();
        for p in c.points() {
            let on_face = (0..3).filter(|&j| (p[j].abs() - h[j]).abs() < 1e-12).count();
            assert!(on_face >= 2, "{p:?}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = SyntheticShapeSpec {
            params: ShapeParams::MultiSphere {
                count: 2,
                ring_radius: 0.5,
                radius: 0.3,
            },
            points: 63,
            seed: 0,
        };
        assert!(generate_synthetic::<f32>(&spec).is_err());
        let spec = SyntheticShapeSpec {
            params: ShapeParams::MultiSphere {
                count: 0,
                ring_radius: 0.5,
                radius: 0.3,
            },
            points: 64,
            seed: 0,
        };
        assert!(generate_synthetic::<f32>(&spec).is_err());
        assert!("torus".parse::<ShapeFamily>().is_err());
        assert_eq!("winged-cross".parse::<ShapeFamily>().unwrap(), ShapeFamily::WingedCross);
    }
}
