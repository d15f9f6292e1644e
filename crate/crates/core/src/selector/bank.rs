use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::Real;
use crate::selector::pointnn::{pointnn_embed, PointNnConfig};

const BANK_MAGIC: &str = "PNNBANK v1";

/// Reference descriptors of complete shapes for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    category: String,
    dim: usize,
    embeddings: Vec<Vec<f64>>,
}

impl FeatureBank {
    /// Validates that descriptors are non-empty, equally sized and unit norm.
    pub fn new(category: impl Into<String>, embeddings: Vec<Vec<f64>>) -> Result<Self> {
        let category = category.into();
        if category.is_empty() || category.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("bank category `{category}` must be a non-empty word")));
        }
        let Some(first) = embeddings.first() else {
            return Err(Error::invalid("a feature bank needs at least one descriptor"));
        };
        let dim = first.len();
        for (i, e) in embeddings.iter().enumerate() {
            if e.len() != dim || dim == 0 {
                return Err(Error::invalid(format!("descriptor {i} has length {} (expected {dim})", e.len())));
            }
            let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !e.iter().all(|v| v.is_finite()) || (norm - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!("descriptor {i} is not unit-normalized (norm {norm})")));
            }
        }
        Ok(Self {
            category,
            dim,
            embeddings,
        })
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn embeddings(&self) -> &[Vec<f64>] {
        &self.embeddings
    }

    /// Largest cosine similarity between `descriptor` and any bank entry.
    pub fn max_cosine(&self, descriptor: &[f64]) -> Result<f64> {
        if descriptor.len() != self.dim {
            return Err(Error::invalid(format!(
                "descriptor length {} does not match bank dimension {}",
                descriptor.len(),
                self.dim
            )));
        }
        let norm = descriptor.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("cannot score a zero descriptor"));
        }
        Ok(self
            .embeddings
            .iter()
            .map(|e| e.iter().zip(descriptor).map(|(a, b)| a * b).sum::<f64>() / norm)
            .fold(f64::NEG_INFINITY, f64::max)
            .clamp(-1.0, 1.0))
    }

    /// Floats are written in shortest round-trip form, so loading gives
    /// back exactly the same bank.
    pub fn to_text(&self) -> String {
        let mut out = format!("{BANK_MAGIC} dim={} count={} category={}\n", self.dim, self.len(), self.category);
        for e in &self.embeddings {
            for (j, v) in e.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let bad_header = || Error::parse(source, "line 1", format!("expected `{BANK_MAGIC} dim=<d> count=<n> category=<c>`"));
        let rest = header.strip_prefix(BANK_MAGIC).ok_or_else(bad_header)?;
        let fields: Vec<&str> = rest.split_whitespace().collect();
        let [d, n, c] = fields.as_slice() else {
            return Err(bad_header());
        };
        let dim: usize = d.strip_prefix("dim=").and_then(|v| v.parse().ok()).ok_or_else(bad_header)?;
        let count: usize = n.strip_prefix("count=").and_then(|v| v.parse().ok()).ok_or_else(bad_header)?;
        let category = c.strip_prefix("category=").ok_or_else(bad_header)?;
        let mut embeddings = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let loc = format!("line {}", i + 2);
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(source, &loc, e.to_string()))?;
            if row.len() != dim {
                return Err(Error::parse(source, loc, format!("expected {dim} values, found {}", row.len())));
            }
            embeddings.push(row);
        }
        if embeddings.len() != count {
            return Err(Error::parse(
                source,
                "end of file",
                format!("header declares {count} descriptors, found {}", embeddings.len()),
            ));
        }
        Self::new(category, embeddings)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// One descriptor per complete shape.
pub fn build_feature_bank<T: Real>(shapes: &[PointCloud<T>], category: &str, cfg: &PointNnConfig) -> Result<FeatureBank> {
    if shapes.is_empty() {
        return Err(Error::invalid("cannot build a feature bank from zero shapes"));
    }
    let embeddings = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.len() < cfg.min_points() {
                return Err(Error::invalid(format!(
                    "shape {i} has {} points, below the encoder minimum {}",
                    s.len(),
                    cfg.min_points()
                )));
            }
            pointnn_embed(s, cfg)
        })
        .collect::<Result<_>>()?;
    FeatureBank::new(category, embeddings)
}
