//! End-to-end experiment: crop, complete, encode, refine, decode, select,
//! score. Categories run one after another, each with its own autoencoder,
//! policy and feature bank.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::{export_gfv_dataset, train_ae, AeModel, Completion, GfvDataset};
use crate::error::{Error, Result};
use crate::geometry::{crop, farthest_point_sample, fscore, normalize_unit_sphere, MetricReport, PointCloud};
use crate::harness::config::{derive_seed, is_train_id, CategorySource, CategorySpec, ExperimentConfig};
use crate::harness::io::{load_cloud_auto, save_cloud, CloudFormat};
use crate::harness::surrogate::surrogate_complete;
use crate::harness::synth::synthetic_family;
use crate::refiner::{refine, save_curves, train_agent, CurveRow, Policy, RefineEnv, RefineSample, Td3Config};
use crate::scalar::Real;
use crate::selector::{build_feature_bank, select, Choice, FeatureBank, SelectionRecord};

pub const METRICS_HEADER: &str = "category,method,mean_cd_l2,mean_fscore,n,selected_refined";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SELECTIONS_FILE: &str = "selections.jsonl";
pub const TRAJECTORIES_FILE: &str = "trajectories.txt";

pub const AE_DIR: &str = "ae";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const BANK_FILE: &str = "bank.txt";
pub const CURVES_FILE: &str = "curves.csv";
pub const GFV_FILE: &str = "gfv.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Refined,
    Selected,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Refined => "refined",
            Method::Selected => "selected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub category: String,
    pub method: Method,
    pub mean_cd_l2: f64,
    pub mean_fscore: f64,
    pub n: usize,
    /// Samples whose final output is the refined cloud.
    pub selected_refined: usize,
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.category,
            r.method.name(),
            r.mean_cd_l2,
            r.mean_fscore,
            r.n,
            r.selected_refined
        );
    }
    out
}

/// One test sample's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub category: String,
    pub selection: SelectionRecord,
    pub baseline: MetricReport,
    pub refined: MetricReport,
    pub selected: MetricReport,
}

#[derive(Debug, Clone)]
pub struct CategoryReport {
    pub name: String,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub ae_epoch_losses: Vec<f64>,
    pub curves: Vec<CurveRow>,
    pub decoder_checksum_before_rl: String,
    pub decoder_checksum_after_rl: String,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub rows: Vec<MetricsRow>,
    pub samples: Vec<SampleResult>,
    /// `(z_before, z_after)` per test sample, in `samples` order.
    pub trajectories: Vec<(Vec<f64>, Vec<f64>)>,
    pub categories: Vec<CategoryReport>,
}

/// A complete shape with its id, normalized at ingestion.
#[derive(Debug, Clone)]
pub struct Shape<T> {
    pub id: String,
    pub cloud: PointCloud<T>,
}

fn fit_size<T: Real>(cloud: PointCloud<T>, points: usize, id: &str) -> Result<PointCloud<T>> {
    match cloud.len() {
        n if n == points => Ok(cloud),
        n if n > points => cloud.select(&farthest_point_sample(&cloud, points, 0)?),
        n => Err(Error::invalid(format!("shape `{id}` has {n} points, fewer than the configured {points}"))),
    }
}

/// Loads or generates a category's complete shapes, resampled to `points`
/// and normalized to the unit sphere.
pub fn load_category<T: Real>(spec: &CategorySpec, points: usize, seed: u64) -> Result<Vec<Shape<T>>> {
    let raw: Vec<(String, PointCloud<T>)> = match &spec.source {
        CategorySource::Synthetic { family, count } => {
            let shapes = synthetic_family(*family, *count, points, derive_seed(seed, &[&spec.name, "shapes"]))?;
            shapes
                .into_iter()
                .enumerate()
                .map(|(i, c)| (format!("{}-{i:04}", spec.name), c))
                .collect()
        }
        CategorySource::Directory { path } => {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("xyz" | "pcf")))
                .collect();
            files.sort();
            files
                .into_iter()
                .map(|p| {
                    let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                    Ok((id, load_cloud_auto(&p)?))
                })
                .collect::<Result<_>>()?
        }
    };
    if raw.is_empty() {
        return Err(Error::invalid(format!("category `{}` has no shapes", spec.name)));
    }
    raw.into_iter()
        .map(|(id, c)| {
            let c = fit_size(c, points, &id)?;
            Ok(Shape {
                cloud: normalize_unit_sphere(&c).0,
                id,
            })
        })
        .collect()
}

/// Occluded input and baseline completion of one complete shape.
pub fn baseline_for<T: Real>(cfg: &ExperimentConfig, category: &str, shape: &Shape<T>) -> Result<PointCloud<T>> {
    if let Some(dir) = &cfg.completions_dir {
        let dir = dir.join(category);
        for fmt in [CloudFormat::Pcf, CloudFormat::Xyz] {
            let p = dir.join(format!("{}.{}", shape.id, fmt.extension()));
            if p.exists() {
                return crate::harness::io::load_cloud(&p, fmt);
            }
        }
        return Err(Error::MissingArtifact {
            stage: "baseline completion",
            detail: format!("no completion for `{}` in {}", shape.id, dir.display()),
        });
    }
    let partial = crop(
        &shape.cloud,
        cfg.crop.mode,
        cfg.crop.ratio,
        derive_seed(cfg.seed, &[category, &shape.id, "crop"]),
    )?
    .partial;
    surrogate_complete(&partial, cfg.points, derive_seed(cfg.seed, &[category, &shape.id, "surrogate"]))
}

fn mean_report(reports: &[MetricReport]) -> (f64, f64) {
    let n = reports.len() as f64;
    (
        reports.iter().map(|r| r.cd_l2).sum::<f64>() / n,
        reports.iter().map(|r| r.fscore).sum::<f64>() / n,
    )
}

fn missing(stage: &'static str, path: &Path) -> Error {
    Error::MissingArtifact {
        stage,
        detail: format!("{} not found", path.display()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs the whole experiment and writes its artifacts under `out`.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<PipelineReport> {
    cfg.validate()?;
    create_dir(out)?;
    let mut report = PipelineReport {
        rows: Vec::new(),
        samples: Vec::new(),
        trajectories: Vec::new(),
        categories: Vec::new(),
    };
    for spec in &cfg.categories {
        run_category(cfg, spec, &out.join(&spec.name), &mut report)?;
    }

    let path = out.join(METRICS_FILE);
    fs::write(&path, metrics_to_csv(&report.rows)).map_err(|e| Error::io(path, e))?;
    let mut sel = String::new();
    for s in &report.samples {
        sel.push_str(&serde_json::to_string(s)?);
        sel.push('\n');
    }
    let path = out.join(SELECTIONS_FILE);
    fs::write(&path, sel).map_err(|e| Error::io(path, e))?;
    let mut traj = String::new();
    for (a, b) in &report.trajectories {
        let line: Vec<String> = a.iter().chain(b).map(|v| format!("{v:?}")).collect();
        traj.push_str(&line.join(" "));
        traj.push('\n');
    }
    let path = out.join(TRAJECTORIES_FILE);
    fs::write(&path, traj).map_err(|e| Error::io(path, e))?;
    Ok(report)
}

fn run_category(cfg: &ExperimentConfig, spec: &CategorySpec, dir: &Path, report: &mut PipelineReport) -> Result<()> {
    let name = spec.name.as_str();
    let shapes: Vec<Shape<f32>> = load_category(spec, cfg.points, cfg.seed)?;
    let (train, test): (Vec<&Shape<f32>>, Vec<&Shape<f32>>) =
        shapes.iter().partition(|s| is_train_id(&s.id, cfg.train_fraction));
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(format!(
            "category `{name}` split into {} train and {} test shapes; both must be non-empty",
            train.len(),
            test.len()
        )));
    }
    create_dir(dir)?;
    let baselines: Vec<PointCloud<f32>> = shapes.iter().map(|s| baseline_for(cfg, name, s)).collect::<Result<_>>()?;
    let base_of = |id: &str| &baselines[shapes.iter().position(|s| s.id == id).expect("known id")];

    // autoencoder
    let ae_dir = dir.join(AE_DIR);
    let (ae, ae_losses) = match &cfg.artifacts_dir {
        Some(art) => {
            let p = art.join(name).join(AE_DIR);
            if !p.join("ae.json").exists() {
                return Err(missing("autoencoder", &p));
            }
            (AeModel::<f32>::load(&p)?, Vec::new())
        }
        None => {
            let gts: Vec<PointCloud<f32>> = train.iter().map(|s| s.cloud.clone()).collect();
            let outcome = train_ae(&gts, &cfg.ae, derive_seed(cfg.seed, &[name, "ae"]))?;
            (outcome.model, outcome.epoch_losses)
        }
    };
    if ae.output_size() != cfg.points {
        return Err(Error::invalid(format!(
            "autoencoder for `{name}` decodes {} points, config expects {}",
            ae.output_size(),
            cfg.points
        )));
    }
    ae.save(&ae_dir)?;

    // offline GFVs of the training completions
    let clouds = dir.join("clouds");
    create_dir(&clouds)?;
    let mut completions = Vec::with_capacity(train.len());
    for s in &train {
        let base_rel = PathBuf::from("clouds").join(format!("{}.base.pcf", s.id));
        let gt_rel = PathBuf::from("clouds").join(format!("{}.gt.pcf", s.id));
        save_cloud(base_of(&s.id), &dir.join(&base_rel), CloudFormat::Pcf)?;
        save_cloud(&s.cloud, &dir.join(&gt_rel), CloudFormat::Pcf)?;
        completions.push(Completion {
            id: s.id.clone(),
            category: name.to_string(),
            baseline: base_of(&s.id).clone(),
            baseline_path: base_rel,
            gt_path: Some(gt_rel),
        });
    }
    let gfv: GfvDataset<f32> = export_gfv_dataset(&ae, &completions)?;
    gfv.save(&dir.join(GFV_FILE))?;

    // policy
    let checksum_before = ae.decoder_checksum();
    let policy_path = dir.join(POLICY_FILE);
    let (policy, curves) = match &cfg.artifacts_dir {
        Some(art) => {
            let p = art.join(name).join(POLICY_FILE);
            if !p.exists() {
                return Err(missing("policy", &p));
            }
            let (policy, td3) = Policy::<f32>::load(&p)?;
            policy.save(&policy_path, &td3)?;
            (policy, Vec::new())
        }
        None => {
            let samples: Vec<RefineSample<f32>> = gfv
                .records
                .iter()
                .map(|r| {
                    let shape = train.iter().find(|s| s.id == r.id).expect("exported from train");
                    RefineSample {
                        id: r.id.clone(),
                        z: r.z.clone(),
                        base: base_of(&r.id).clone(),
                        gt: shape.cloud.clone(),
                    }
                })
                .collect();
            let env = RefineEnv::new(&ae, samples, cfg.env)?;
            let outcome = train_agent(&env, &cfg.agent, cfg.env.action_bound, derive_seed(cfg.seed, &[name, "agent"]))?;
            let td3: Td3Config = cfg.agent.resolved();
            outcome.policy.save(&policy_path, &td3)?;
            save_curves(&outcome.curves, &dir.join(CURVES_FILE))?;
            (outcome.policy, outcome.curves)
        }
    };
    let checksum_after = ae.decoder_checksum();

    // feature bank
    let bank_path = dir.join(BANK_FILE);
    let bank = match &cfg.artifacts_dir {
        Some(art) => {
            let p = art.join(name).join(BANK_FILE);
            if !p.exists() {
                return Err(missing("feature bank", &p));
            }
            FeatureBank::load(&p)?
        }
        None => {
            let gts: Vec<PointCloud<f32>> = train.iter().map(|s| s.cloud.clone()).collect();
            build_feature_bank(&gts, name, &cfg.selector)?
        }
    };
    bank.save(&bank_path)?;

    // evaluation
    let mut per_method: [Vec<MetricReport>; 3] = Default::default();
    let mut chosen_refined = 0;
    for s in &test {
        let base = base_of(&s.id);
        let z = ae.encode(base)?;
        let z_ref = refine(&policy, &z, &cfg.env)?;
        let refined = ae.decode(&z_ref)?;
        let gt = cfg.dual_criterion.then_some(&s.cloud);
        let selection = select(&s.id, base, &refined, &bank, gt, &cfg.selector)?;
        let chosen = match selection.chosen {
            Choice::Baseline => base,
            Choice::Refined => {
                chosen_refined += 1;
                &refined
            }
        };
        let m_base = fscore(base, &s.cloud, cfg.fscore_tau)?;
        let m_ref = fscore(&refined, &s.cloud, cfg.fscore_tau)?;
        let m_sel = fscore(chosen, &s.cloud, cfg.fscore_tau)?;
        for (k, m) in [m_base, m_ref, m_sel].into_iter().enumerate() {
            per_method[k].push(m);
        }
        report.trajectories.push((
            z.as_slice().iter().map(|v| v.as_f64()).collect(),
            z_ref.as_slice().iter().map(|v| v.as_f64()).collect(),
        ));
        report.samples.push(SampleResult {
            category: name.to_string(),
            selection,
            baseline: m_base,
            refined: m_ref,
            selected: m_sel,
        });
    }
    let n = test.len();
    for (k, method) in [Method::Baseline, Method::Refined, Method::Selected].into_iter().enumerate() {
        let (cd, f) = mean_report(&per_method[k]);
        report.rows.push(MetricsRow {
            category: name.to_string(),
            method,
            mean_cd_l2: cd,
            mean_fscore: f,
            n,
            selected_refined: match method {
                Method::Baseline => 0,
                Method::Refined => n,
                Method::Selected => chosen_refined,
            },
        });
    }
    report.categories.push(CategoryReport {
        name: name.to_string(),
        train_ids: train.iter().map(|s| s.id.clone()).collect(),
        test_ids: test.iter().map(|s| s.id.clone()).collect(),
        ae_epoch_losses: ae_losses,
        curves,
        decoder_checksum_before_rl: checksum_before,
        decoder_checksum_after_rl: checksum_after,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::ShapeFamily;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.categories = vec![CategorySpec::synthetic(ShapeFamily::MultiSphere, 10)];
        cfg.points = 64;
        cfg.ae.architecture.output_size = 64;
        cfg.ae.epochs = 2;
        cfg.ae.batch_size = 4;
        cfg.agent.iterations = 20;
        cfg.agent.warmup = 5;
        cfg.agent.batch_size = 8;
        cfg.agent.hidden = vec![16, 16];
        cfg.selector.stage_sizes = vec![32, 8];
        cfg.train_fraction = 0.6;
        cfg
    }

    #[test]
    fn tiny_run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let rep = run_pipeline(&cfg, dir.path()).unwrap();
        assert_eq!(rep.rows.len(), 3);
        let n = rep.samples.len();
        assert!(rep.rows.iter().all(|r| r.n == n));
        let csv = fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
        assert_eq!(csv.lines().next(), Some(METRICS_HEADER));
        assert_eq!(csv.lines().count(), 4);
        let traj = fs::read_to_string(dir.path().join(TRAJECTORIES_FILE)).unwrap();
        assert_eq!(traj.lines().count(), n);
        assert!(traj.lines().all(|l| l.split(' ').count() == 256));
        let cat = dir.path().join("multi-sphere");
        for f in [POLICY_FILE, BANK_FILE, CURVES_FILE, GFV_FILE, "ae/decoder.ckpt"] {
            assert!(cat.join(f).exists(), "{f}");
        }
        for s in &rep.samples {
            assert!(s.selection.is_consistent());
            assert!(s.selected.cd_l2 <= s.baseline.cd_l2.min(s.refined.cd_l2));
        }
        let c = &rep.categories[0];
        assert_eq!(c.decoder_checksum_before_rl, c.decoder_checksum_after_rl);
    }

    #[test]
    fn reuses_artifacts_and_reports_missing_stage() {
        let first = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let a = run_pipeline(&cfg, first.path()).unwrap();
        let second = tempfile::tempdir().unwrap();
        let reuse = ExperimentConfig {
            artifacts_dir: Some(first.path().to_path_buf()),
            ..tiny()
        };
        let b = run_pipeline(&reuse, second.path()).unwrap();
        assert_eq!(a.rows, b.rows);

        fs::remove_file(first.path().join("multi-sphere").join(BANK_FILE)).unwrap();
        let err = run_pipeline(&reuse, second.path()).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact { stage: "feature bank", .. }), "{err}");
    }

    #[test]
    fn external_completions_are_required_per_sample() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            completions_dir: Some(dir.path().to_path_buf()),
            ..tiny()
        };
        let err = run_pipeline(&cfg, &dir.path().join("out")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact { stage: "baseline completion", .. }));
    }
}
