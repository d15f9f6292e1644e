use crate::error::{Error, Result};
use crate::geometry::cloud::{dist2, PointCloud};
use crate::scalar::Real;

/// Greedy farthest point sampling.
///
/// Returns `m` distinct indices starting at `start_index`; each next index
/// maximizes its minimum distance to the already chosen set, lowest index on
/// ties.
pub fn farthest_point_sample<T: Real>(src: &PointCloud<T>, m: usize, start_index: usize) -> Result<Vec<usize>> {
    farthest_point_sample_in(&src.to_f64_points(), m, start_index)
}

pub(crate) fn farthest_point_sample_in(points: &[[f64; 3]], m: usize, start_index: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("sample size {m} must lie in 1..={n}")));
    }
    if start_index >= n {
        return Err(Error::invalid(format!("start index {start_index} out of range for {n} points")));
    }
    let mut chosen = Vec::with_capacity(m);
    let mut taken = vec![false; n];
    let mut min_d = vec![f64::INFINITY; n];
    let mut current = start_index;
    loop {
        chosen.push(current);
        taken[current] = true;
        if chosen.len() == m {
            break;
        }
        let c = points[current];
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in 0..n {
            let d = dist2(&points[i], &c);
            if d < min_d[i] {
                min_d[i] = d;
            }
            // Already chosen points are skipped so duplicates cannot be re-picked.
            if !taken[i] && min_d[i] > best.1 {
                best = (i, min_d[i]);
            }
        }
        current = best.0;
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_and_trivial_cases() {
        let line = PointCloud::new((0..10).map(|i| [i as f64, 0.0, 0.0]).collect()).unwrap();
        assert_eq!(farthest_point_sample(&line, 1, 4).unwrap(), vec![4]);
        assert_eq!(farthest_point_sample(&line, 2, 0).unwrap(), vec![0, 9]);
        // From 0: 9, then the midpoint tie between 4 and 5 goes to 4.
        assert_eq!(farthest_point_sample(&line, 3, 0).unwrap(), vec![0, 9, 4]);
        let mut all = farthest_point_sample(&line, 10, 3).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(farthest_point_sample(&line, 11, 0).is_err());
        assert!(farthest_point_sample(&line, 2, 10).is_err());
    }

    #[test]
    fn duplicates_are_not_reselected() {
        let c = PointCloud::new(vec![[0.0, 0.0, 0.0]; 4]).unwrap();
        assert_eq!(farthest_point_sample(&c, 4, 2).unwrap(), vec![2, 0, 1, 3]);
    }
}
