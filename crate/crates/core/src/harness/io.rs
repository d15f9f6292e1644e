//! Point-cloud files.
//!
//! `xyz` is ASCII with one `x y z` triple per line. `pcf` is binary: the
//! magic `PCF1`, a little-endian u32 count, then `count` little-endian f32
//! triples.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::Real;

pub const PCF_MAGIC: &[u8; 4] = b"PCF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudFormat {
    Xyz,
    Pcf,
}

impl CloudFormat {
    /// Format implied by a file extension; anything but `.pcf` reads as xyz.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pcf") => CloudFormat::Pcf,
            _ => CloudFormat::Xyz,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            CloudFormat::Xyz => "xyz",
            CloudFormat::Pcf => "pcf",
        }
    }
}

impl std::str::FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz" => Ok(CloudFormat::Xyz),
            "pcf" => Ok(CloudFormat::Pcf),
            other => Err(Error::invalid(format!("unknown cloud format `{other}` (expected xyz or pcf)"))),
        }
    }
}

pub fn encode_xyz<T: Real>(cloud: &PointCloud<T>) -> String {
    let mut out = String::with_capacity(cloud.len() * 32);
    for p in cloud.points() {
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }
    out
}

pub fn parse_xyz<T: Real>(text: &str, source: &str) -> Result<PointCloud<T>> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(source, loc, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut p = [T::zero(); 3];
        for (slot, f) in p.iter_mut().zip(&fields) {
            *slot = f
                .parse::<T>()
                .map_err(|_| Error::parse(source, &loc, format!("`{f}` is not a number")))?;
            if !slot.is_finite() {
                return Err(Error::parse(source, &loc, format!("non-finite coordinate `{f}`")));
            }
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(Error::invalid(format!("{source}: no points")));
    }
    PointCloud::new(points)
}

pub fn encode_pcf<T: Real>(cloud: &PointCloud<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 12 * cloud.len());
    out.extend_from_slice(PCF_MAGIC);
    out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    for p in cloud.points() {
        for c in p {
            out.extend_from_slice(&(c.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_pcf<T: Real>(bytes: &[u8], source: &str) -> Result<PointCloud<T>> {
    if bytes.len() < 8 || &bytes[..4] != PCF_MAGIC {
        return Err(Error::parse(source, "offset 0", "missing PCF1 header"));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    if count == 0 {
        return Err(Error::invalid(format!("{source}: no points")));
    }
    let expected = 8 + count * 12;
    if bytes.len() != expected {
        return Err(Error::parse(
            source,
            format!("offset {}", bytes.len().min(expected)),
            format!("header declares {count} points ({expected} bytes) but file has {} bytes", bytes.len()),
        ));
    }
    let points = bytes[8..]
        .chunks_exact(12)
        .enumerate()
        .map(|(i, c)| {
            let mut p = [T::zero(); 3];
            for (j, slot) in p.iter_mut().enumerate() {
                let v = f32::from_le_bytes(c[4 * j..4 * j + 4].try_into().expect("4 bytes"));
                if !v.is_finite() {
                    return Err(Error::parse(source, format!("offset {}", 8 + 12 * i + 4 * j), "non-finite coordinate"));
                }
                *slot = T::of(v as f64);
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;
    PointCloud::new(points)
}

pub fn load_cloud<T: Real>(path: &Path, format: CloudFormat) -> Result<PointCloud<T>> {
    let name = path.display().to_string();
    match format {
        CloudFormat::Xyz => parse_xyz(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?, &name),
        CloudFormat::Pcf => decode_pcf(&fs::read(path).map_err(|e| Error::io(path, e))?, &name),
    }
}

pub fn save_cloud<T: Real>(cloud: &PointCloud<T>, path: &Path, format: CloudFormat) -> Result<()> {
    let bytes = match format {
        CloudFormat::Xyz => encode_xyz(cloud).into_bytes(),
        CloudFormat::Pcf => encode_pcf(cloud),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads with the format implied by the extension.
pub fn load_cloud_auto<T: Real>(path: &Path) -> Result<PointCloud<T>> {
    load_cloud(path, CloudFormat::from_path(path))
}

pub fn save_cloud_auto<T: Real>(cloud: &PointCloud<T>, path: &Path) -> Result<()> {
    save_cloud(cloud, path, CloudFormat::from_path(path))
}
