use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-column maximum over the rows of a `P x D` feature matrix, with the
/// winning row per column (lowest row on ties).
pub fn maxpool_points<T: Real>(features: ArrayView2<T>) -> Result<(Array1<T>, Vec<usize>)> {
    if features.nrows() == 0 {
        return Err(Error::invalid("max-pool over an empty feature set"));
    }
    let d = features.ncols();
    let mut best = features.row(0).to_owned();
    let mut argmax = vec![0usize; d];
    for (r, row) in features.rows().into_iter().enumerate().skip(1) {
        for (j, &v) in row.iter().enumerate() {
            if v > best[j] {
                best[j] = v;
                argmax[j] = r;
            }
        }
    }
    Ok((best, argmax))
}

/// Routes `upstream` back onto the argmax rows of a `rows x D` feature matrix.
pub fn maxpool_backward<T: Real>(argmax: &[usize], rows: usize, upstream: ArrayView1<T>) -> Result<Array2<T>> {
    if argmax.len() != upstream.len() {
        return Err(Error::invalid(format!(
            "argmax has {} entries, upstream gradient {}",
            argmax.len(),
            upstream.len()
        )));
    }
    let mut g = Array2::zeros((rows, argmax.len()));
    for (j, (&r, &u)) in argmax.iter().zip(upstream.iter()).enumerate() {
        if r >= rows {
            return Err(Error::invalid(format!("argmax row {r} out of range for {rows} rows")));
        }
        g[(r, j)] += u;
    }
    Ok(g)
}

/// Max-pools consecutive blocks of `rows_per_segment` rows, one output row per
/// block. Argmax indices are relative to the start of each block.
pub fn maxpool_segments<T: Real>(
    features: ArrayView2<T>,
    rows_per_segment: usize,
) -> Result<(Array2<T>, Vec<Vec<usize>>)> {
    if rows_per_segment == 0 || !features.nrows().is_multiple_of(rows_per_segment) {
        return Err(Error::invalid(format!(
            "{} rows cannot be split into segments of {rows_per_segment}",
            features.nrows()
        )));
    }
    let segments = features.nrows() / rows_per_segment;
    let mut pooled = Array2::zeros((segments, features.ncols()));
    let mut argmaxes = Vec::with_capacity(segments);
    for s in 0..segments {
        let block = features.slice(ndarray::s![s * rows_per_segment..(s + 1) * rows_per_segment, ..]);
        let (v, a) = maxpool_points(block)?;
        pooled.row_mut(s).assign(&v);
        argmaxes.push(a);
    }
    Ok((pooled, argmaxes))
}

pub fn maxpool_segments_backward<T: Real>(
    argmaxes: &[Vec<usize>],
    rows_per_segment: usize,
    upstream: ArrayView2<T>,
) -> Result<Array2<T>> {
    if upstream.nrows() != argmaxes.len() {
        return Err(Error::invalid("segment count mismatch in max-pool backward"));
    }
    let mut g = Array2::zeros((argmaxes.len() * rows_per_segment, upstream.ncols()));
    for (s, a) in argmaxes.iter().enumerate() {
        for (j, &r) in a.iter().enumerate() {
            g[(s * rows_per_segment + r, j)] += upstream[(s, j)];
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hand_cases() {
        let (v, a) = maxpool_points(array![[1.0, 5.0], [3.0, 2.0]].view()).unwrap();
        assert_eq!(v, array![3.0, 5.0]);
        assert_eq!(a, vec![1, 0]);
        let (v, a) = maxpool_points(array![[0.5, -1.0, 2.0]].view()).unwrap();
        assert_eq!(v, array![0.5, -1.0, 2.0]);
        assert_eq!(a, vec![0, 0, 0]);
        let (_, a) = maxpool_points(array![[1.0], [1.0]].view()).unwrap();
        assert_eq!(a, vec![0]);
        assert!(maxpool_points(Array2::<f64>::zeros((0, 2)).view()).is_err());
    }

    #[test]
    fn permutation_and_routing() {
        let f = array![[1.0, 7.0, -2.0], [4.0, 0.0, -1.0], [2.0, 3.0, -5.0]];
        let p = array![[2.0, 3.0, -5.0], [1.0, 7.0, -2.0], [4.0, 0.0, -1.0]];
        let (v1, a) = maxpool_points(f.view()).unwrap();
        let (v2, _) = maxpool_points(p.view()).unwrap();
        assert_eq!(v1, v2);
        let up = array![0.3, -1.5, 2.0];
        let g = maxpool_backward(&a, 3, up.view()).unwrap();
        assert_eq!(g.sum_axis(ndarray::Axis(0)), up);
        for (j, &r) in a.iter().enumerate() {
            for i in 0..3 {
                if i != r {
                    assert_eq!(g[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn segments_match_single_pool() {
        let f = array![[1.0, 7.0], [4.0, 0.0], [2.0, 3.0], [9.0, -1.0]];
        let (pooled, arg) = maxpool_segments(f.view(), 2).unwrap();
        assert_eq!(pooled, array![[4.0, 7.0], [9.0, 3.0]]);
        assert_eq!(arg, vec![vec![1, 0], vec![1, 0]]);
        let g = maxpool_segments_backward(&arg, 2, array![[1.0, 2.0], [3.0, 4.0]].view()).unwrap();
        assert_eq!(g, array![[0.0, 2.0], [1.0, 0.0], [0.0, 4.0], [3.0, 0.0]]);
        assert!(maxpool_segments(f.view(), 3).is_err());
    }
}
