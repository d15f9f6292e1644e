use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diff::{
    encode_checkpoint, load_checkpoint, maxpool_segments, maxpool_segments_backward, save_checkpoint, Activation,
    Gradients, LayerShape, Mlp, Tape,
};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::Real;

/// Dimension of the global feature vector.
pub const LATENT_DIM: usize = 128;

/// Global feature vector: exactly [`LATENT_DIM`] finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Gfv<T>(Vec<T>);

impl<T: Real> Gfv<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() != LATENT_DIM {
            return Err(Error::invalid(format!(
                "a GFV has {LATENT_DIM} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("GFV contains non-finite values"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn l2_distance(&self, other: &Gfv<T>) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Layer widths of the autoencoder. The latent width is fixed at
/// [`LATENT_DIM`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeArchitecture {
    /// Shared per-point MLP widths after the 3 input coordinates.
    pub point_widths: Vec<usize>,
    /// Decoder hidden widths between the latent and the `3 * output_size` output.
    pub decoder_hidden: Vec<usize>,
    /// Number of points the decoder emits.
    pub output_size: usize,
}

impl Default for AeArchitecture {
    fn default() -> Self {
        Self {
            point_widths: vec![64, 128, 256],
            decoder_hidden: vec![256, 512],
            output_size: 2048,
        }
    }
}

impl AeArchitecture {
    pub fn with_output_size(output_size: usize) -> Self {
        Self {
            output_size,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.point_widths.is_empty() || self.point_widths.contains(&0) || self.decoder_hidden.contains(&0) {
            return Err(Error::invalid("autoencoder widths must be non-empty and positive"));
        }
        if self.output_size == 0 {
            return Err(Error::invalid("decoder output size must be positive"));
        }
        Ok(())
    }

    pub fn point_shapes(&self) -> Vec<LayerShape> {
        let mut widths = vec![3];
        widths.extend(&self.point_widths);
        widths.windows(2).map(|w| (w[0], w[1], Activation::Relu)).collect()
    }

    pub fn head_shapes(&self) -> Vec<LayerShape> {
        vec![(*self.point_widths.last().unwrap(), LATENT_DIM, Activation::None)]
    }

    pub fn decoder_shapes(&self) -> Vec<LayerShape> {
        let mut widths = vec![LATENT_DIM];
        widths.extend(&self.decoder_hidden);
        widths.push(3 * self.output_size);
        let n = widths.len() - 1;
        widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| (w[0], w[1], if i + 1 == n { Activation::None } else { Activation::Relu }))
            .collect()
    }
}

fn random_from_shapes<T: Real>(shapes: &[LayerShape], seed: u64) -> Result<Mlp<T>> {
    let mut widths = vec![shapes[0].0];
    widths.extend(shapes.iter().map(|s| s.1));
    let acts: Vec<Activation> = shapes.iter().map(|s| s.2).collect();
    Mlp::random(&widths, &acts, seed)
}

/// Intermediates of a batched encoder pass.
#[derive(Debug, Clone)]
pub struct EncoderTape<T> {
    point: Tape<T>,
    argmax: Vec<Vec<usize>>,
    rows_per_cloud: usize,
    head: Tape<T>,
}

/// Point-cloud autoencoder: shared per-point MLP, max-pool, projection to the
/// latent, and a fully connected decoder to a fixed-size cloud.
#[derive(Debug, Clone)]
pub struct AeModel<T> {
    pub(crate) point_net: Mlp<T>,
    pub(crate) head: Mlp<T>,
    pub(crate) decoder: Mlp<T>,
    arch: AeArchitecture,
    decoder_frozen: bool,
}

const POINT_FILE: &str = "encoder_points.ckpt";
const HEAD_FILE: &str = "encoder_head.ckpt";
const DECODER_FILE: &str = "decoder.ckpt";
const META_FILE: &str = "ae.json";

#[derive(Serialize, Deserialize)]
struct AeMeta {
    architecture: AeArchitecture,
    decoder_frozen: bool,
}

impl<T: Real> AeModel<T> {
    pub fn random(arch: AeArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            point_net: random_from_shapes(&arch.point_shapes(), seed)?,
            head: random_from_shapes(&arch.head_shapes(), seed.wrapping_add(1))?,
            decoder: random_from_shapes(&arch.decoder_shapes(), seed.wrapping_add(2))?,
            arch,
            decoder_frozen: false,
        })
    }

    pub fn from_parts(point_net: Mlp<T>, head: Mlp<T>, decoder: Mlp<T>, arch: AeArchitecture) -> Result<Self> {
        arch.validate()?;
        if point_net.shapes() != arch.point_shapes()
            || head.shapes() != arch.head_shapes()
            || decoder.shapes() != arch.decoder_shapes()
        {
            return Err(Error::invalid("network shapes do not match the autoencoder architecture"));
        }
        Ok(Self {
            point_net,
            head,
            decoder,
            arch,
            decoder_frozen: false,
        })
    }

    pub fn architecture(&self) -> &AeArchitecture {
        &self.arch
    }

    pub fn output_size(&self) -> usize {
        self.arch.output_size
    }

    pub fn point_net(&self) -> &Mlp<T> {
        &self.point_net
    }

    pub fn head(&self) -> &Mlp<T> {
        &self.head
    }

    pub fn decoder(&self) -> &Mlp<T> {
        &self.decoder
    }

    /// Marks the decoder read-only. Refinement never updates it afterwards.
    pub fn freeze_decoder(&mut self) {
        self.decoder_frozen = true;
    }

    pub fn is_decoder_frozen(&self) -> bool {
        self.decoder_frozen
    }

    /// Mutable decoder access, refused once the decoder is frozen.
    pub fn decoder_mut(&mut self) -> Result<&mut Mlp<T>> {
        if self.decoder_frozen {
            return Err(Error::ContractViolation("decoder is frozen".into()));
        }
        Ok(&mut self.decoder)
    }

    /// SHA-256 of the decoder's checkpoint bytes.
    pub fn decoder_checksum(&self) -> String {
        let digest = Sha256::digest(encode_checkpoint(&self.decoder));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Encodes a batch of equally sized clouds stacked as `(B * N) x 3`.
    pub fn encode_stacked(&self, stacked: ArrayView2<T>, rows_per_cloud: usize) -> Result<(Array2<T>, EncoderTape<T>)> {
        let (features, point) = self.point_net.forward(stacked)?;
        let (pooled, argmax) = maxpool_segments(features.view(), rows_per_cloud)?;
        let (latent, head) = self.head.forward(pooled.view())?;
        Ok((
            latent,
            EncoderTape {
                point,
                argmax,
                rows_per_cloud,
                head,
            },
        ))
    }

    /// Backward through the encoder: gradients for the per-point MLP and the
    /// projection head.
    pub fn encoder_backward(&self, tape: &EncoderTape<T>, latent_grad: ArrayView2<T>) -> Result<(Gradients<T>, Gradients<T>)> {
        let (head_grads, pooled_grad) = self.head.backward(&tape.head, latent_grad)?;
        let feature_grad = maxpool_segments_backward(&tape.argmax, tape.rows_per_cloud, pooled_grad.view())?;
        let (point_grads, _) = self.point_net.backward(&tape.point, feature_grad.view())?;
        Ok((point_grads, head_grads))
    }

    pub fn encode(&self, cloud: &PointCloud<T>) -> Result<Gfv<T>> {
        let stacked = stack(&[cloud]);
        let features = self.point_net.infer(stacked.view())?;
        let (pooled, _) = maxpool_segments(features.view(), cloud.len())?;
        let latent = self.head.infer(pooled.view())?;
        Gfv::new(latent.into_raw_vec_and_offset().0)
    }

    pub fn decode(&self, z: &Gfv<T>) -> Result<PointCloud<T>> {
        let out = self.decoder.infer_one(z.as_slice())?;
        PointCloud::from_flat(&out)
    }

    /// Decodes each row of a `B x 128` latent batch.
    pub fn decode_batch(&self, latents: ArrayView2<T>) -> Result<Vec<PointCloud<T>>> {
        let out = self.decoder.infer(latents)?;
        out.rows()
            .into_iter()
            .map(|r| PointCloud::from_flat(r.as_slice().expect("standard layout")))
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_checkpoint(&self.point_net, &dir.join(POINT_FILE))?;
        save_checkpoint(&self.head, &dir.join(HEAD_FILE))?;
        save_checkpoint(&self.decoder, &dir.join(DECODER_FILE))?;
        let meta = AeMeta {
            architecture: self.arch.clone(),
            decoder_frozen: self.decoder_frozen,
        };
        let path = dir.join(META_FILE);
        fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: AeMeta = serde_json::from_str(&text)?;
        let arch = meta.architecture;
        arch.validate()?;
        let point_net = load_checkpoint(&dir.join(POINT_FILE), Some(&arch.point_shapes()))?;
        let head = load_checkpoint(&dir.join(HEAD_FILE), Some(&arch.head_shapes()))?;
        let decoder = load_checkpoint(&dir.join(DECODER_FILE), Some(&arch.decoder_shapes()))?;
        let mut model = Self::from_parts(point_net, head, decoder, arch)?;
        model.decoder_frozen = meta.decoder_frozen;
        Ok(model)
    }

    /// Path of the decoder checkpoint inside a saved model directory.
    pub fn decoder_path(dir: &Path) -> std::path::PathBuf {
        dir.join(DECODER_FILE)
    }
}

/// Stacks clouds row-wise into a `(sum N) x 3` matrix.
pub fn stack<T: Real>(clouds: &[&PointCloud<T>]) -> Array2<T> {
    let rows: usize = clouds.iter().map(|c| c.len()).sum();
    let mut flat = Vec::with_capacity(rows * 3);
    for c in clouds {
        for p in c.points() {
            flat.extend_from_slice(p);
        }
    }
    Array2::from_shape_vec((rows, 3), flat).expect("three coordinates per row")
}
