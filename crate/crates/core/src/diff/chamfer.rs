use ndarray::Array2;

use crate::geometry::{NearestIndex, PointCloud};
use crate::scalar::Real;

/// Chamfer loss and its gradient with respect to `pred`.
///
/// Nearest-neighbour assignments are held fixed, which gives the usual
/// subgradient; the loss is only piecewise smooth where assignments switch.
pub fn chamfer_loss_grad<T: Real>(pred: &PointCloud<T>, target: &PointCloud<T>) -> (f64, Array2<T>) {
    let pp = pred.to_f64_points();
    let pt = target.to_f64_points();
    let ip = NearestIndex::new(pp.clone());
    let it = NearestIndex::new(pt.clone());
    let np = pp.len() as f64;
    let nt = pt.len() as f64;

    let mut grad = vec![[0.0f64; 3]; pp.len()];
    let mut forward = 0.0;
    for (i, p) in pp.iter().enumerate() {
        let (j, d) = it.nearest(p);
        forward += d;
        for k in 0..3 {
            grad[i][k] += 2.0 * (p[k] - pt[j][k]) / np;
        }
    }
    let mut backward = 0.0;
    for t in &pt {
        let (i, d) = ip.nearest(t);
        backward += d;
        for k in 0..3 {
            grad[i][k] += 2.0 * (pp[i][k] - t[k]) / nt;
        }
    }
    let loss = forward / np + backward / nt;
    let g = Array2::from_shape_fn((pp.len(), 3), |(i, k)| T::of(grad[i][k]));
    (loss, g)
}
