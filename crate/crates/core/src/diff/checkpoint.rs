//! Binary parameter checkpoints.
//!
//! Layout: magic `RLADNP1`, then per layer `u32 rows`, `u32 cols`, row-major
//! little-endian `f32` weights, `f32` biases (`cols` of them) and a `u8`
//! activation tag. The layer list runs to end of file.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::diff::mlp::{Activation, LayerShape, Linear, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"RLADNP1";

pub fn encode_checkpoint<T: Real>(net: &Mlp<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(CHECKPOINT_MAGIC.len() + 4 * net.param_count() + 9 * net.layers().len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    for l in net.layers() {
        out.extend_from_slice(&(l.inputs() as u32).to_le_bytes());
        out.extend_from_slice(&(l.outputs() as u32).to_le_bytes());
        for v in l.weight.iter().chain(l.bias.iter()) {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        out.push(l.activation.tag());
    }
    out
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    offset: usize,
    source_name: &'a str,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let rest = &self.bytes[self.offset..];
        if rest.len() < n {
            return Err(Error::parse(
                self.source_name,
                format!("byte {}", self.offset),
                format!("truncated while reading {what}"),
            ));
        }
        self.offset += n;
        Ok(&rest[..n])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn at_end(&self) -> bool {
        self.offset == self.bytes.len()
    }
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8], source_name: &str) -> Result<Mlp<T>> {
    let mut r = ByteReader {
        bytes,
        offset: 0,
        source_name,
    };
    if r.take(CHECKPOINT_MAGIC.len(), "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::parse(source_name, "byte 0", "missing RLADNP1 magic"));
    }
    if r.at_end() {
        return Err(Error::parse(source_name, "byte 7", "checkpoint holds no layers"));
    }
    let mut layers = Vec::new();
    while !r.at_end() {
        let rows = r.u32("layer rows")?;
        let cols = r.u32("layer cols")?;
        let floats = r.take(4 * (rows * cols + cols), "layer parameters")?;
        let vals: Vec<T> = floats
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        let tag = r.take(1, "activation tag")?[0];
        let activation = Activation::from_tag(tag).ok_or_else(|| {
            Error::parse(source_name, format!("layer {}", layers.len()), format!("unknown activation tag {tag}"))
        })?;
        let weight = Array2::from_shape_vec((rows, cols), vals[..rows * cols].to_vec()).expect("sized above");
        let bias = Array1::from_vec(vals[rows * cols..].to_vec());
        layers.push(Linear { weight, bias, activation });
    }
    Mlp::from_layers(layers)
}

pub fn save_checkpoint<T: Real>(net: &Mlp<T>, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint; when `expected` is given the stored architecture must
/// match it exactly.
pub fn load_checkpoint<T: Real>(path: &Path, expected: Option<&[LayerShape]>) -> Result<Mlp<T>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let net = decode_checkpoint(&bytes, &path.display().to_string())?;
    if let Some(shapes) = expected {
        let got = net.shapes();
        if got != shapes {
            return Err(Error::invalid(format!(
                "checkpoint {} has architecture {:?}, expected {:?}",
                path.display(),
                got,
                shapes
            )));
        }
    }
    Ok(net)
}
