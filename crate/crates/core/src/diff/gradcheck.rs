//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::mlp::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub params_checked: usize,
}

impl GradCheckReport {
    pub fn merge(self, other: GradCheckReport) -> GradCheckReport {
        GradCheckReport {
            max_relative_error: self.max_relative_error.max(other.max_relative_error),
            params_checked: self.params_checked + other.params_checked,
        }
    }
}

/// Gradients smaller than this are compared absolutely.
const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic[k]` against central differences of `loss` with respect
/// to the parameters of `nets[k]`.
///
/// `per_net` limits the check to a seeded random subset of each network's
/// parameters; `None` checks all of them.
pub fn check_gradients<F>(
    nets: &mut [Mlp<f64>],
    analytic: &[Gradients<f64>],
    mut loss: F,
    h: f64,
    per_net: Option<usize>,
    seed: u64,
) -> GradCheckReport
where
    F: FnMut(&[Mlp<f64>]) -> f64,
{
    assert_eq!(nets.len(), analytic.len(), "one gradient set per network");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        params_checked: 0,
    };
    for k in 0..nets.len() {
        let flat_grad = analytic[k].flatten();
        let total = nets[k].param_count();
        assert_eq!(flat_grad.len(), total, "gradient shape mismatch");
        let indices: Vec<usize> = match per_net {
            Some(n) if n < total => sample(&mut rng, total, n).into_vec(),
            _ => (0..total).collect(),
        };
        for i in indices {
            let orig = nets[k].params_flat()[i];
            nets[k].set_param(i, orig + h);
            let up = loss(nets);
            nets[k].set_param(i, orig - h);
            let down = loss(nets);
            nets[k].set_param(i, orig);
            let numeric = (up - down) / (2.0 * h);
            report.max_relative_error = report.max_relative_error.max(relative_error(flat_grad[i], numeric));
            report.params_checked += 1;
        }
    }
    report
}
