use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::model::{stack, AeArchitecture, AeModel};
use crate::diff::{adam_step, chamfer_loss_grad, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeTrainConfig {
    pub architecture: AeArchitecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl AeTrainConfig {
    /// 2048-point decoder, 400 epochs, batch 24, lr 1e-3 halved at epochs
    /// 60/120/180/400.
    pub fn paper() -> Self {
        Self {
            architecture: AeArchitecture::default(),
            epochs: 400,
            batch_size: 24,
            adam: AdamConfig::default(),
        }
    }

    /// Alternate profile: lr 1e-4, batch 32.
    pub fn paper_alt() -> Self {
        Self {
            batch_size: 32,
            adam: AdamConfig {
                lr: 1e-4,
                ..AdamConfig::default()
            },
            ..Self::paper()
        }
    }

    /// 256-point decoder and 60 epochs, sized for a laptop CPU.
    pub fn desk() -> Self {
        Self {
            architecture: AeArchitecture::with_output_size(256),
            epochs: 60,
            ..Self::paper()
        }
    }
}

/// Result of [`train_ae`]: the model (decoder frozen) and the mean training
/// Chamfer loss of every epoch.
#[derive(Debug, Clone)]
pub struct AeTrainOutcome<T> {
    pub model: AeModel<T>,
    pub epoch_losses: Vec<f64>,
}

/// Trains the autoencoder on complete shapes by minimising the Chamfer loss
/// between each input and its reconstruction.
pub fn train_ae<T: Real>(dataset: &[PointCloud<T>], config: &AeTrainConfig, seed: u64) -> Result<AeTrainOutcome<T>> {
    let first = dataset.first().ok_or_else(|| Error::invalid("autoencoder training set is empty"))?;
    let n_points = first.len();
    if let Some(bad) = dataset.iter().position(|c| c.len() != n_points) {
        return Err(Error::invalid(format!(
            "cloud {bad} has {} points, expected {n_points} like the rest of the set",
            dataset[bad].len()
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }

    let mut model = AeModel::random(config.architecture.clone(), seed)?;
    let mut opt_point = AdamState::new(&model.point_net, config.adam.clone());
    let mut opt_head = AdamState::new(&model.head, config.adam.clone());
    let mut opt_dec = AdamState::new(&model.decoder, config.adam.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ae00);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let clouds: Vec<&PointCloud<T>> = batch.iter().map(|&i| &dataset[i]).collect();
            let b = clouds.len();
            let (latent, enc_tape) = model.encode_stacked(stack(&clouds).view(), n_points)?;
            let (decoded, dec_tape) = model.decoder.forward(latent.view())?;

            let mut out_grad = Array2::<T>::zeros(decoded.raw_dim());
            let inv_b = T::of(1.0 / b as f64);
            for (row, target) in clouds.iter().enumerate() {
                let pred = PointCloud::from_flat(decoded.row(row).as_slice().expect("standard layout"))
                    .map_err(|e| Error::InvalidState(format!("autoencoder diverged at epoch {epoch}: {e}")))?;
                let (loss, g) = chamfer_loss_grad(&pred, target);
                total += loss;
                for (dst, src) in out_grad.row_mut(row).iter_mut().zip(g.iter()) {
                    *dst = *src * inv_b;
                }
            }

            let (dec_grads, latent_grad) = model.decoder.backward(&dec_tape, out_grad.view())?;
            let (point_grads, head_grads) = model.encoder_backward(&enc_tape, latent_grad.view())?;
            adam_step(&mut model.decoder, &dec_grads, &mut opt_dec, epoch)?;
            adam_step(&mut model.head, &head_grads, &mut opt_head, epoch)?;
            adam_step(&mut model.point_net, &point_grads, &mut opt_point, epoch)?;
        }
        epoch_losses.push(total / dataset.len() as f64);
    }
    model.freeze_decoder();
    Ok(AeTrainOutcome { model, epoch_losses })
}

/// Trailing moving average with window `w` (shorter at the start).
pub fn smooth(values: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            let s = &values[lo..=i];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob(rng: &mut ChaCha8Rng, n: usize, offset: f32) -> PointCloud<f32> {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    [
                        offset + rng.random_range(-0.3..0.3),
                        rng.random_range(-0.1..0.1),
                        rng.random_range(-0.5..0.5),
                    ]
                })
                .collect(),
        )
        .unwrap()
    }

    fn tiny_config() -> AeTrainConfig {
        AeTrainConfig {
            architecture: AeArchitecture {
                point_widths: vec![16, 32],
                decoder_hidden: vec![64],
                output_size: 32,
            },
            epochs: 40,
            batch_size: 4,
            adam: AdamConfig::constant(3e-3),
        }
    }

    #[test]
    fn loss_decreases_and_decoder_frozen() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data: Vec<_> = (0..12).map(|i| blob(&mut rng, 32, if i % 2 == 0 { -0.5 } else { 0.5 })).collect();
        let out = train_ae(&data, &tiny_config(), 1).unwrap();
        assert_eq!(out.epoch_losses.len(), 40);
        assert!(out.epoch_losses.iter().all(|l| l.is_finite()));
        let s = smooth(&out.epoch_losses, 5);
        assert!(s[s.len() - 1] < s[0], "{:?}", out.epoch_losses);
        assert!(out.model.is_decoder_frozen());
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data: Vec<_> = (0..6).map(|_| blob(&mut rng, 32, 0.0)).collect();
        let cfg = AeTrainConfig { epochs: 3, ..tiny_config() };
        let a = train_ae(&data, &cfg, 9).unwrap();
        let b = train_ae(&data, &cfg, 9).unwrap();
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert_eq!(a.model.decoder_checksum(), b.model.decoder_checksum());
    }

    #[test]
    fn rejects_bad_datasets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(train_ae::<f32>(&[], &tiny_config(), 0).is_err());
        let mixed = vec![blob(&mut rng, 32, 0.0), blob(&mut rng, 31, 0.0)];
        assert!(train_ae(&mixed, &tiny_config(), 0).is_err());
    }

    #[test]
    fn profiles() {
        let p = AeTrainConfig::paper();
        assert_eq!((p.epochs, p.batch_size, p.adam.lr), (400, 24, 0.001));
        assert_eq!(p.architecture.output_size, 2048);
        assert_eq!(p.adam.milestones, vec![60, 120, 180, 400]);
        let d = AeTrainConfig::desk();
        assert_eq!((d.epochs, d.architecture.output_size), (60, 256));
        assert_eq!(smooth(&[1.0, 3.0, 5.0], 2), vec![1.0, 2.0, 4.0]);
    }
}
