//! Offline GFV datasets.
//!
//! Text format: a header line `GFV128 v1 count=<k>`, then one record per line:
//! `id category v0 .. v127 baseline_path [gt_path]`, whitespace separated.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::autoencoder::model::{AeModel, Gfv, LATENT_DIM};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct GfvRecord<T> {
    pub id: String,
    pub category: String,
    pub z: Gfv<T>,
    pub baseline_path: PathBuf,
    pub gt_path: Option<PathBuf>,
}

/// A baseline completion waiting to be encoded.
#[derive(Debug, Clone)]
pub struct Completion<T> {
    pub id: String,
    pub category: String,
    pub baseline: PointCloud<T>,
    pub baseline_path: PathBuf,
    pub gt_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GfvDataset<T> {
    pub records: Vec<GfvRecord<T>>,
}

fn check_token(what: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("{what} `{s}` must be non-empty and free of whitespace")));
    }
    Ok(())
}

fn path_token(what: &str, p: &Path) -> Result<String> {
    let s = p
        .to_str()
        .ok_or_else(|| Error::invalid(format!("{what} is not valid UTF-8")))?
        .to_string();
    check_token(what, &s)?;
    Ok(s)
}

/// Encodes every completion; records are ordered by id.
pub fn export_gfv_dataset<T: Real>(model: &AeModel<T>, completions: &[Completion<T>]) -> Result<GfvDataset<T>> {
    let mut seen = HashSet::new();
    for c in completions {
        if !seen.insert(c.id.as_str()) {
            return Err(Error::invalid(format!("duplicate sample id `{}`", c.id)));
        }
    }
    let mut records = completions
        .iter()
        .map(|c| {
            Ok(GfvRecord {
                id: c.id.clone(),
                category: c.category.clone(),
                z: model.encode(&c.baseline)?,
                baseline_path: c.baseline_path.clone(),
                gt_path: c.gt_path.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(GfvDataset { records })
}

impl<T: Real> GfvDataset<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = format!("GFV128 v1 count={}\n", self.records.len());
        for r in &self.records {
            check_token("sample id", &r.id)?;
            check_token("category", &r.category)?;
            let mut fields = vec![r.id.clone(), r.category.clone()];
            fields.extend(r.z.as_slice().iter().map(|v| v.to_string()));
            fields.push(path_token("baseline path", &r.baseline_path)?);
            if let Some(gt) = &r.gt_path {
                fields.push(path_token("ground-truth path", gt)?);
            }
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, "line 1", "missing header"))?;
        let count: usize = header
            .strip_prefix("GFV128 v1 count=")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| Error::parse(source_name, "line 1", format!("bad header `{header}`")))?;
        let mut records = Vec::with_capacity(count);
        let mut seen = HashSet::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let loc = format!("line {}", i + 1);
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != LATENT_DIM + 3 && fields.len() != LATENT_DIM + 4 {
                return Err(Error::parse(
                    source_name,
                    loc,
                    format!("expected {} or {} fields, found {}", LATENT_DIM + 3, LATENT_DIM + 4, fields.len()),
                ));
            }
            let values = fields[2..2 + LATENT_DIM]
                .iter()
                .map(|s| s.parse::<T>().map_err(|_| Error::parse(source_name, loc.clone(), format!("bad number `{s}`"))))
                .collect::<Result<Vec<T>>>()?;
            let z = Gfv::new(values).map_err(|e| Error::parse(source_name, loc.clone(), e.to_string()))?;
            if !seen.insert(fields[0].to_string()) {
                return Err(Error::parse(source_name, loc, format!("duplicate id `{}`", fields[0])));
            }
            records.push(GfvRecord {
                id: fields[0].to_string(),
                category: fields[1].to_string(),
                z,
                baseline_path: PathBuf::from(fields[2 + LATENT_DIM]),
                gt_path: fields.get(3 + LATENT_DIM).map(PathBuf::from),
            });
        }
        if records.len() != count {
            return Err(Error::parse(
                source_name,
                "line 1",
                format!("header declares {count} records, found {}", records.len()),
            ));
        }
        Ok(Self { records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::model::AeArchitecture;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn completions(n: usize) -> Vec<Completion<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        (0..n)
            .map(|i| Completion {
                id: format!("s{:02}", n - i),
                category: "box-frame".into(),
                baseline: PointCloud::new(
                    (0..40)
                        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                        .collect(),
                )
                .unwrap(),
                baseline_path: PathBuf::from(format!("base/{i}.pcf")),
                gt_path: (i % 2 == 0).then(|| PathBuf::from(format!("gt/{i}.pcf"))),
            })
            .collect()
    }

    #[test]
    fn export_orders_encodes_and_round_trips() {
        let model = AeModel::<f32>::random(AeArchitecture::with_output_size(64), 1).unwrap();
        let comps = completions(5);
        let ds = export_gfv_dataset(&model, &comps).unwrap();
        assert_eq!(ds.len(), 5);
        let ids: Vec<_> = ds.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["s01", "s02", "s03", "s04", "s05"]);
        for r in &ds.records {
            let c = comps.iter().find(|c| c.id == r.id).unwrap();
            assert_eq!(r.z, model.encode(&c.baseline).unwrap());
        }
        let text = ds.to_text().unwrap();
        assert!(text.starts_with("GFV128 v1 count=5\n"));
        assert_eq!(GfvDataset::<f32>::parse(&text, "mem").unwrap(), ds);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.gfv");
        ds.save(&p).unwrap();
        assert_eq!(GfvDataset::<f32>::load(&p).unwrap(), ds);
    }

    #[test]
    fn duplicate_ids_and_bad_files() {
        let model = AeModel::<f32>::random(AeArchitecture::with_output_size(64), 1).unwrap();
        let mut comps = completions(2);
        comps[1].id = comps[0].id.clone();
        assert!(export_gfv_dataset(&model, &comps).is_err());

        assert!(GfvDataset::<f32>::parse("GFV128 v1 count=1\na b 1 2 3 p\n", "mem").is_err());
        assert!(GfvDataset::<f32>::parse("GFV64 v1 count=0\n", "mem").is_err());
        assert!(GfvDataset::<f32>::parse("GFV128 v1 count=2\n", "mem").is_err());
        let err = GfvDataset::<f32>::parse("GFV128 v1 count=1\nonly two\n", "x.gfv").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
