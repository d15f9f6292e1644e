use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{AeModel, Gfv, GfvDataset};
use crate::error::{Error, Result};
use crate::geometry::{chamfer_l2, PointCloud};
use crate::scalar::Real;

/// Latent update `z' = z + alpha * clamp(action)` and reward shaping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineEnvConfig {
    /// Refinement scaling factor.
    pub alpha: f64,
    /// Per-dimension action clamp.
    pub action_bound: f64,
    /// Weight of the squared action-norm penalty; 0 gives the pure Chamfer
    /// improvement reward.
    pub magnitude_penalty_lambda: f64,
}

impl Default for RefineEnvConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            action_bound: 1.0,
            magnitude_penalty_lambda: 0.001,
        }
    }
}

impl RefineEnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.action_bound > 0.0 && self.action_bound.is_finite()) {
            return Err(Error::invalid(format!("action bound must be positive, got {}", self.action_bound)));
        }
        if !(self.magnitude_penalty_lambda >= 0.0 && self.magnitude_penalty_lambda.is_finite()) {
            return Err(Error::invalid("magnitude penalty must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Outcome of one environment step, independent of how the state is decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub reward: f64,
    pub next_state: Vec<T>,
    pub cd_base: f64,
    pub cd_refined: f64,
    /// L2 norm of the clamped action.
    pub action_norm: f64,
}

/// One-step environment over a fixed set of stored latent states.
pub trait LatentEnv<T: Real> {
    fn num_states(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn state(&self, index: usize) -> &[T];
    fn step(&self, index: usize, action: &[T]) -> Result<StepOutcome<T>>;
}

pub fn clamp_action<T: Real>(action: &[T], bound: f64) -> Vec<T> {
    let b = T::of(bound);
    action.iter().map(|&a| a.max(-b).min(b)).collect()
}

pub(crate) fn sq_norm<T: Real>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64() * x.as_f64()).sum()
}

/// `CD(base, gt) - CD(refined, gt) - lambda * |action|^2`.
pub fn refinement_reward<T: Real>(
    base: &PointCloud<T>,
    refined: &PointCloud<T>,
    gt: &PointCloud<T>,
    action: &[T],
    lambda: f64,
) -> f64 {
    chamfer_l2(base, gt) - chamfer_l2(refined, gt) - lambda * sq_norm(action)
}

/// Applies `z' = z + alpha * clamp(action)`.
pub fn apply_action<T: Real>(z: &Gfv<T>, action: &[T], cfg: &RefineEnvConfig) -> Result<Gfv<T>> {
    if action.len() != z.as_slice().len() {
        return Err(Error::invalid(format!(
            "action has {} values, latent has {}",
            action.len(),
            z.as_slice().len()
        )));
    }
    let a = T::of(cfg.alpha);
    let clamped = clamp_action(action, cfg.action_bound);
    Gfv::new(z.as_slice().iter().zip(&clamped).map(|(&zi, &ai)| zi + a * ai).collect())
}

/// Decodes the refined latent and scores it against ground truth.
pub fn env_step<T: Real>(
    ae: &AeModel<T>,
    z: &Gfv<T>,
    action: &[T],
    gt: Option<&PointCloud<T>>,
    base: &PointCloud<T>,
    cfg: &RefineEnvConfig,
) -> Result<(PointCloud<T>, StepOutcome<T>)> {
    let gt = gt.ok_or_else(|| Error::ContractViolation("refinement reward needs a ground-truth cloud".into()))?;
    let next = apply_action(z, action, cfg)?;
    let refined = ae.decode(&next)?;
    let clamped = clamp_action(action, cfg.action_bound);
    let cd_base = chamfer_l2(base, gt);
    let cd_refined = chamfer_l2(&refined, gt);
    let penalty = cfg.magnitude_penalty_lambda * sq_norm(&clamped);
    Ok((
        refined,
        StepOutcome {
            reward: cd_base - cd_refined - penalty,
            next_state: next.into_vec(),
            cd_base,
            cd_refined,
            action_norm: sq_norm(&clamped).sqrt(),
        },
    ))
}

#[derive(Debug, Clone)]
pub struct RefineSample<T> {
    pub id: String,
    pub z: Gfv<T>,
    pub base: PointCloud<T>,
    pub gt: PointCloud<T>,
}

/// Autoencoder-backed refinement environment over stored GFVs.
#[derive(Debug)]
pub struct RefineEnv<'a, T> {
    ae: &'a AeModel<T>,
    samples: Vec<RefineSample<T>>,
    cfg: RefineEnvConfig,
}

impl<'a, T: Real> RefineEnv<'a, T> {
    pub fn new(ae: &'a AeModel<T>, samples: Vec<RefineSample<T>>, cfg: RefineEnvConfig) -> Result<Self> {
        cfg.validate()?;
        if !ae.is_decoder_frozen() {
            return Err(Error::ContractViolation(
                "refinement requires a trained autoencoder with a frozen decoder".into(),
            ));
        }
        if samples.is_empty() {
            return Err(Error::invalid("refinement environment needs at least one stored GFV"));
        }
        Ok(Self { ae, samples, cfg })
    }

    /// Builds the environment from a GFV dataset, loading clouds through `load`.
    pub fn from_dataset(
        ae: &'a AeModel<T>,
        dataset: &GfvDataset<T>,
        cfg: RefineEnvConfig,
        mut load: impl FnMut(&Path) -> Result<PointCloud<T>>,
    ) -> Result<Self> {
        let samples = dataset
            .records
            .iter()
            .map(|r| {
                let gt_path = r.gt_path.as_ref().ok_or_else(|| {
                    Error::ContractViolation(format!("record `{}` has no ground-truth reference", r.id))
                })?;
                Ok(RefineSample {
                    id: r.id.clone(),
                    z: r.z.clone(),
                    base: load(&r.baseline_path)?,
                    gt: load(gt_path)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ae, samples, cfg)
    }

    pub fn config(&self) -> &RefineEnvConfig {
        &self.cfg
    }

    pub fn samples(&self) -> &[RefineSample<T>] {
        &self.samples
    }
}

impl<T: Real> LatentEnv<T> for RefineEnv<'_, T> {
    fn num_states(&self) -> usize {
        self.samples.len()
    }

    fn state_dim(&self) -> usize {
        crate::autoencoder::LATENT_DIM
    }

    fn action_dim(&self) -> usize {
        crate::autoencoder::LATENT_DIM
    }

    fn state(&self, index: usize) -> &[T] {
        self.samples[index].z.as_slice()
    }

    fn step(&self, index: usize, action: &[T]) -> Result<StepOutcome<T>> {
        let s = &self.samples[index];
        env_step(self.ae, &s.z, action, Some(&s.gt), &s.base, &self.cfg).map(|(_, o)| o)
    }
}

/// Synthetic one-step task with a closed-form optimum: the reward is
/// `-|z + alpha * a - z*|^2` for a per-state target `z*`.
#[derive(Debug, Clone)]
pub struct QuadraticTargetEnv<T> {
    states: Vec<Vec<T>>,
    targets: Vec<Vec<T>>,
    alpha: f64,
    action_bound: f64,
}

impl<T: Real> QuadraticTargetEnv<T> {
    pub fn new(states: Vec<Vec<T>>, targets: Vec<Vec<T>>, alpha: f64, action_bound: f64) -> Result<Self> {
        if states.is_empty() || states.len() != targets.len() {
            return Err(Error::invalid("need one target per state and at least one state"));
        }
        let d = states[0].len();
        if states.iter().chain(&targets).any(|v| v.len() != d) {
            return Err(Error::invalid("all states and targets must share one dimension"));
        }
        Ok(Self {
            states,
            targets,
            alpha,
            action_bound,
        })
    }

    /// Best achievable action for state `i` under the clamp.
    pub fn optimal_action(&self, i: usize) -> Vec<T> {
        let inv = 1.0 / self.alpha;
        let raw: Vec<T> = self.states[i]
            .iter()
            .zip(&self.targets[i])
            .map(|(&z, &t)| T::of((t.as_f64() - z.as_f64()) * inv))
            .collect();
        clamp_action(&raw, self.action_bound)
    }

    fn residual(&self, i: usize, action: &[T]) -> f64 {
        let clamped = clamp_action(action, self.action_bound);
        self.states[i]
            .iter()
            .zip(&self.targets[i])
            .zip(&clamped)
            .map(|((&z, &t), &a)| (z.as_f64() + self.alpha * a.as_f64() - t.as_f64()).powi(2))
            .sum()
    }

    /// Mean reward of the best actions over all states.
    pub fn optimal_mean_reward(&self) -> f64 {
        (0..self.states.len())
            .map(|i| -self.residual(i, &self.optimal_action(i)))
            .sum::<f64>()
            / self.states.len() as f64
    }

    /// Mean reward of `policy` over all states.
    pub fn mean_reward(&self, mut policy: impl FnMut(&[T]) -> Vec<T>) -> f64 {
        (0..self.states.len())
            .map(|i| -self.residual(i, &policy(&self.states[i])))
            .sum::<f64>()
            / self.states.len() as f64
    }
}

impl<T: Real> LatentEnv<T> for QuadraticTargetEnv<T> {
    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    fn action_dim(&self) -> usize {
        self.states[0].len()
    }

    fn state(&self, index: usize) -> &[T] {
        &self.states[index]
    }

    fn step(&self, index: usize, action: &[T]) -> Result<StepOutcome<T>> {
        let clamped = clamp_action(action, self.action_bound);
        let zero = vec![T::zero(); clamped.len()];
        let cd_base = self.residual(index, &zero);
        let cd_refined = self.residual(index, &clamped);
        let a = T::of(self.alpha);
        Ok(StepOutcome {
            reward: -cd_refined,
            next_state: self.states[index].iter().zip(&clamped).map(|(&z, &c)| z + a * c).collect(),
            cd_base,
            cd_refined,
            action_norm: sq_norm(&clamped).sqrt(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{AeArchitecture, LATENT_DIM};

    fn frozen_ae() -> AeModel<f64> {
        let mut ae = AeModel::random(
            AeArchitecture {
                point_widths: vec![8, 16],
                decoder_hidden: vec![16],
                output_size: 24,
            },
            5,
        )
        .unwrap();
        ae.freeze_decoder();
        ae
    }

    fn line(n: usize, x: f64) -> PointCloud<f64> {
        PointCloud::new((0..n).map(|i| [x, i as f64 * 0.1, 0.0]).collect()).unwrap()
    }

    #[test]
    fn reward_arithmetic() {
        // CD(base, gt) = 1.5 and CD(refined, gt) = 1.2 for single-point clouds offset along x.
        let gt = PointCloud::new(vec![[0.0, 0.0, 0.0]]).unwrap();
        let base = PointCloud::new(vec![[0.75f64.sqrt(), 0.0, 0.0]]).unwrap();
        let refined = PointCloud::new(vec![[0.6f64.sqrt(), 0.0, 0.0]]).unwrap();
        let r = refinement_reward(&base, &refined, &gt, &[0.0; 4], 0.0);
        assert!((r - 0.3).abs() < 1e-12);
        let r_pen = refinement_reward(&base, &refined, &gt, &[0.0; 4], 0.5);
        assert_eq!(r, r_pen);
        let r_act = refinement_reward(&base, &refined, &gt, &[1.0, 1.0], 0.5);
        assert!((r_act - (0.3 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_action_reward_is_reconstruction_offset() {
        let ae = frozen_ae();
        let base = line(24, 0.3);
        let gt = line(24, 0.0);
        let z = ae.encode(&base).unwrap();
        let cfg = RefineEnvConfig::default();
        let (refined, out) = env_step(&ae, &z, &[0.0; LATENT_DIM], Some(&gt), &base, &cfg).unwrap();
        assert_eq!(refined, ae.decode(&z).unwrap());
        let expected = chamfer_l2(&base, &gt) - chamfer_l2(&ae.decode(&z).unwrap(), &gt);
        assert_eq!(out.reward, expected);
        assert_eq!(out.next_state, z.as_slice());
    }

    #[test]
    fn step_clamps_and_requires_gt() {
        let ae = frozen_ae();
        let base = line(24, 0.3);
        let z = ae.encode(&base).unwrap();
        let cfg = RefineEnvConfig {
            alpha: 0.5,
            action_bound: 0.2,
            magnitude_penalty_lambda: 0.0,
        };
        assert!(matches!(
            env_step(&ae, &z, &[0.0; LATENT_DIM], None, &base, &cfg),
            Err(Error::ContractViolation(_))
        ));
        let big = vec![10.0; LATENT_DIM];
        let (_, out) = env_step(&ae, &z, &big, Some(&base), &base, &cfg).unwrap();
        for (n, o) in out.next_state.iter().zip(z.as_slice()) {
            assert!((n - o - 0.1).abs() < 1e-12);
        }
        assert!((out.action_norm - 0.2 * (LATENT_DIM as f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn env_requires_frozen_decoder() {
        let ae = AeModel::<f64>::random(AeArchitecture::with_output_size(24), 1).unwrap();
        let s = RefineSample {
            id: "a".into(),
            z: ae.encode(&line(24, 0.0)).unwrap(),
            base: line(24, 0.0),
            gt: line(24, 0.0),
        };
        assert!(matches!(
            RefineEnv::new(&ae, vec![s], RefineEnvConfig::default()),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn quadratic_env_optimum() {
        let env = QuadraticTargetEnv::new(vec![vec![0.0, 0.0]], vec![vec![0.05, 0.5]], 0.1, 1.0).unwrap();
        assert_eq!(env.optimal_action(0), vec![0.5, 1.0]);
        // Second coordinate is clamped: residual 0.5 - 0.1 = 0.4.
        assert!((env.optimal_mean_reward() + 0.16).abs() < 1e-12);
        let out = env.step(0, &[0.5, 1.0]).unwrap();
        assert!((out.reward + 0.16).abs() < 1e-12);
        assert!((out.cd_base - (0.0025 + 0.25)).abs() < 1e-12);
    }
}
