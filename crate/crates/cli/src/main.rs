use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};

use gfvrefine::autoencoder::{export_gfv_dataset, train_ae, AeModel, AeTrainConfig, Completion, GfvDataset};
use gfvrefine::geometry::{crop, fscore, CropMode};
use gfvrefine::harness::{
    load_category, load_cloud_auto, metrics_to_csv, run_pipeline, save_cloud, save_cloud_auto,
    synthetic_family, CategorySource, CategorySpec, CloudFormat, ExperimentConfig, ShapeFamily,
};
use gfvrefine::refiner::{
    actor_param_count, critic_param_count, refine, save_curves, train_agent, AgentKind, Policy, RefineEnv,
};
use gfvrefine::selector::{build_feature_bank, select, Choice, FeatureBank};
use gfvrefine::PointCloud32;

#[derive(Parser, Debug)]
#[command(name = "gfvrefine", version, about = "Latent-space refinement of point-cloud completions")]
struct Cli {
    /// Seed for every random choice (overrides the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Remove a region from a cloud (spherical or seed-proximity occlusion).
    Crop(CropArgs),
    /// Generate synthetic shapes of one family.
    Synth(SynthArgs),
    /// Train the complete-shape autoencoder; the decoder is frozen afterwards.
    AeTrain(AeTrainArgs),
    /// Encode baseline completions into a GFV dataset file.
    GfvExport(GfvExportArgs),
    /// Train a refinement policy (TD3 or DDPG) over stored GFVs.
    RlTrain(RlTrainArgs),
    /// Build a PointNN feature bank from complete shapes.
    BankBuild(BankBuildArgs),
    /// Refine one completion, optionally selecting against a bank.
    Refine(RefineArgs),
    /// Chamfer distance and F-score of a prediction against ground truth.
    Evaluate(EvaluateArgs),
    /// Run the full experiment described by the config.
    Pipeline,
    /// Print actor and critic parameter counts.
    Params,
}

#[derive(Args, Debug)]
struct CropArgs {
    #[arg(long)]
    input: PathBuf,
    /// spherical | seed-proximity (defaults to the config)
    #[arg(long)]
    mode: Option<CropMode>,
    #[arg(long)]
    ratio: Option<f64>,
    /// Output file; defaults to `<out>/<stem>.partial.<ext>`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    family: ShapeFamily,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 256)]
    points: usize,
    #[arg(long, default_value = "pcf")]
    format: CloudFormat,
}

#[derive(Args, Debug)]
struct AeTrainArgs {
    /// Directory of complete shapes (.xyz/.pcf).
    #[arg(long, conflicts_with = "family")]
    data: Option<PathBuf>,
    /// Train on freshly generated shapes of this family instead.
    #[arg(long)]
    family: Option<ShapeFamily>,
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// desk | paper | paper-alt (defaults to the config's settings)
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct GfvExportArgs {
    #[arg(long)]
    ae: PathBuf,
    /// Directory of baseline completions; the file stem is the sample id.
    #[arg(long)]
    baselines: PathBuf,
    /// Directory of ground-truth clouds named like the baselines.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long, default_value = "shape")]
    category: String,
}

#[derive(Args, Debug)]
struct RlTrainArgs {
    #[arg(long)]
    ae: PathBuf,
    #[arg(long)]
    gfv: PathBuf,
    #[arg(long, default_value = "td3")]
    agent: AgentKind,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args, Debug)]
struct BankBuildArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "shape")]
    category: String,
}

#[derive(Args, Debug)]
struct RefineArgs {
    #[arg(long)]
    ae: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Feature bank for selecting between input and refinement.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Ground truth, enabling the dual (score and Chamfer) criterion.
    #[arg(long, requires = "bank")]
    gt: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Threshold as a fraction of the ground-truth diagonal.
    #[arg(long)]
    tau: Option<f64>,
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Ctx {
    fn out_file(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }
}

fn load(path: &Path) -> Result<PointCloud32> {
    load_cloud_auto(path).with_context(|| format!("loading {}", path.display()))
}

fn cloud_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("xyz" | "pcf")))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .xyz or .pcf files in {}", dir.display());
    }
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

fn cmd_crop(ctx: &Ctx, a: &CropArgs) -> Result<()> {
    let src = load(&a.input)?;
    let mode = a.mode.unwrap_or(ctx.cfg.crop.mode);
    let ratio = a.ratio.unwrap_or(ctx.cfg.crop.ratio);
    let res = crop(&src, mode, ratio, ctx.cfg.seed)?;
    let output = match &a.output {
        Some(p) => p.clone(),
        None => {
            let ext = CloudFormat::from_path(&a.input).extension();
            ctx.out_file(&format!("{}.partial.{ext}", stem(&a.input)))?
        }
    };
    save_cloud_auto(&res.partial, &output)?;
    println!(
        "crop: {} -> {} points ({} removed, {mode:?} ratio {ratio}) -> {}",
        src.len(),
        res.partial.len(),
        res.removed_indices.len(),
        output.display()
    );
    Ok(())
}

fn cmd_synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let shapes: Vec<PointCloud32> = synthetic_family(a.family, a.count, a.points, ctx.cfg.seed)?;
    for (i, cloud) in shapes.iter().enumerate() {
        let path = ctx.out_file(&format!("{}-{i:04}.{}", a.family, a.format.extension()))?;
        save_cloud(cloud, &path, a.format)?;
    }
    println!("synth: {} {} shapes x {} points -> {}", a.count, a.family, a.points, ctx.out.display());
    Ok(())
}

fn ae_config(ctx: &Ctx, a: &AeTrainArgs) -> Result<AeTrainConfig> {
    let mut cfg = match a.profile.as_deref() {
        None => ctx.cfg.ae.clone(),
        Some("desk") => AeTrainConfig::desk(),
        Some("paper") => AeTrainConfig::paper(),
        Some("paper-alt") => AeTrainConfig::paper_alt(),
        Some(other) => bail!("unknown autoencoder profile `{other}` (expected desk, paper or paper-alt)"),
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    Ok(cfg)
}

fn cmd_ae_train(ctx: &Ctx, a: &AeTrainArgs) -> Result<()> {
    let cfg = ae_config(ctx, a)?;
    let points = cfg.architecture.output_size;
    let spec = match (&a.data, a.family) {
        (Some(path), _) => CategorySpec {
            name: "data".into(),
            source: CategorySource::Directory { path: path.clone() },
        },
        (None, Some(family)) => CategorySpec::synthetic(family, a.count),
        (None, None) => bail!("ae-train needs --data <dir> or --family <name>"),
    };
    let shapes: Vec<PointCloud32> = load_category(&spec, points, ctx.cfg.seed)?.into_iter().map(|s| s.cloud).collect();
    let outcome = train_ae(&shapes, &cfg, ctx.cfg.seed)?;
    let dir = ctx.out_file("ae")?;
    outcome.model.save(&dir)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in outcome.epoch_losses.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l}");
    }
    fs::write(ctx.out_file("ae_losses.csv")?, csv)?;
    let first = outcome.epoch_losses.first().copied().unwrap_or(f64::NAN);
    let last = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "ae-train: {} shapes, {} epochs, loss {first:.6} -> {last:.6}, decoder frozen, sha256 {} -> {}",
        shapes.len(),
        cfg.epochs,
        outcome.model.decoder_checksum(),
        dir.display()
    );
    Ok(())
}

fn cmd_gfv_export(ctx: &Ctx, a: &GfvExportArgs) -> Result<()> {
    let ae = AeModel::<f32>::load(&a.ae)?;
    let mut completions = Vec::new();
    for path in cloud_files(&a.baselines)? {
        let id = stem(&path);
        let gt_path = match &a.gt {
            Some(dir) => {
                let p = ["pcf", "xyz"]
                    .iter()
                    .map(|e| dir.join(format!("{id}.{e}")))
                    .find(|p| p.exists())
                    .with_context(|| format!("no ground truth for `{id}` in {}", dir.display()))?;
                Some(fs::canonicalize(p)?)
            }
            None => None,
        };
        completions.push(Completion {
            id,
            category: a.category.clone(),
            baseline: load(&path)?,
            baseline_path: fs::canonicalize(&path)?,
            gt_path,
        });
    }
    let ds = export_gfv_dataset(&ae, &completions)?;
    let path = ctx.out_file("gfv.txt")?;
    ds.save(&path)?;
    println!("gfv-export: {} records -> {}", ds.len(), path.display());
    Ok(())
}

fn print_params(hidden: &[usize]) {
    let actor = actor_param_count(128, 128, hidden);
    let critic = critic_param_count(128, 128, hidden);
    println!(
        "params: actor {actor} ({:.3}M), critic {critic} each, twin critics {} ({:.3}M), hidden {hidden:?}",
        actor as f64 / 1e6,
        2 * critic,
        2.0 * critic as f64 / 1e6
    );
}

fn cmd_rl_train(ctx: &Ctx, a: &RlTrainArgs) -> Result<()> {
    let ae = AeModel::<f32>::load(&a.ae)?;
    let decoder_path = AeModel::<f32>::decoder_path(&a.ae);
    let before = fs::read(&decoder_path)?;
    let ds = GfvDataset::<f32>::load(&a.gfv)?;
    let base_dir = a.gfv.parent().map(Path::to_path_buf).unwrap_or_default();
    let env = RefineEnv::from_dataset(&ae, &ds, ctx.cfg.env, |p| {
        let p = if p.is_relative() { base_dir.join(p) } else { p.to_path_buf() };
        load_cloud_auto(&p)
    })?;
    let mut td3 = ctx.cfg.agent.clone();
    td3.agent = a.agent;
    if let Some(n) = a.iterations {
        td3.iterations = n;
    }
    let td3 = td3.resolved();
    print_params(&td3.hidden);
    let outcome = train_agent(&env, &td3, ctx.cfg.env.action_bound, ctx.cfg.seed)?;
    let policy_path = ctx.out_file("policy.ckpt")?;
    outcome.policy.save(&policy_path, &td3)?;
    let curves_path = ctx.out_file("curves.csv")?;
    save_curves(&outcome.curves, &curves_path)?;
    if fs::read(&decoder_path)? != before {
        bail!("decoder checkpoint changed during training");
    }
    let tail = outcome.curves.len().clamp(1, 1000);
    let mean_imp = outcome.curves.iter().rev().take(tail).map(|c| c.improvement).sum::<f64>() / tail as f64;
    println!(
        "rl-train: {} {} iterations on {} GFVs, {} critic / {} actor updates, mean improvement (last {tail}) {mean_imp:.6}, decoder unchanged -> {}",
        a.agent,
        td3.iterations,
        ds.len(),
        outcome.stats.critic_updates,
        outcome.stats.actor_updates,
        policy_path.display()
    );
    Ok(())
}

fn cmd_bank_build(ctx: &Ctx, a: &BankBuildArgs) -> Result<()> {
    let shapes = cloud_files(&a.data)?.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    let bank = build_feature_bank(&shapes, &a.category, &ctx.cfg.selector)?;
    let path = ctx.out_file("bank.txt")?;
    bank.save(&path)?;
    println!("bank-build: {} descriptors of dim {} -> {}", bank.len(), bank.dim(), path.display());
    Ok(())
}

fn cmd_refine(ctx: &Ctx, a: &RefineArgs) -> Result<()> {
    let ae = AeModel::<f32>::load(&a.ae)?;
    let (policy, _) = Policy::<f32>::load(&a.policy)?;
    let input = load(&a.input)?;
    let z = ae.encode(&input)?;
    let z2 = refine(&policy, &z, &ctx.cfg.env)?;
    let refined = ae.decode(&z2)?;
    let output = match &a.output {
        Some(p) => p.clone(),
        None => ctx.out_file(&format!("{}.refined.xyz", stem(&a.input)))?,
    };
    let mut line = format!("refine: |dz| {:.6}", z.l2_distance(&z2));
    let final_cloud = match &a.bank {
        Some(bank_path) => {
            let bank = FeatureBank::load(bank_path)?;
            let gt = a.gt.as_deref().map(load).transpose()?;
            let rec = select(&stem(&a.input), &input, &refined, &bank, gt.as_ref(), &ctx.cfg.selector)?;
            let _ = write!(line, ", q_base {:.6}, q_ref {:.6}, chosen {:?}", rec.q_base, rec.q_ref, rec.chosen);
            if let (Some(b), Some(r)) = (rec.cd_base, rec.cd_ref) {
                let _ = write!(line, ", cd_base {b:.6}, cd_ref {r:.6}");
            }
            match rec.chosen {
                Choice::Baseline => input,
                Choice::Refined => refined,
            }
        }
        None => refined,
    };
    save_cloud_auto(&final_cloud, &output)?;
    println!("{line} -> {}", output.display());
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<()> {
    let pred = load(&a.pred)?;
    let gt = load(&a.gt)?;
    let tau = a.tau.unwrap_or(ctx.cfg.fscore_tau);
    let m = fscore(&pred, &gt, tau)?;
    let path = ctx.out_file("evaluation.csv")?;
    fs::write(
        &path,
        format!(
            "pred,gt,cd_l2,fscore,precision,recall,tau\n{},{},{},{},{},{},{}\n",
            a.pred.display(),
            a.gt.display(),
            m.cd_l2,
            m.fscore,
            m.precision,
            m.recall,
            m.tau
        ),
    )?;
    println!(
        "evaluate: cd_l2 {} fscore {} (precision {}, recall {}, tau {})",
        m.cd_l2, m.fscore, m.precision, m.recall, m.tau
    );
    Ok(())
}

fn cmd_pipeline(ctx: &Ctx) -> Result<()> {
    let rep = run_pipeline(&ctx.cfg, &ctx.out)?;
    print!("{}", metrics_to_csv(&rep.rows));
    let refined = rep.rows.iter().filter(|r| r.method.name() == "selected").map(|r| r.selected_refined).sum::<usize>();
    println!(
        "pipeline: {} categories, {} test samples, {} refined outputs selected -> {}",
        rep.categories.len(),
        rep.samples.len(),
        refined,
        ctx.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::desk(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let ctx = Ctx { cfg, out: cli.out };
    match &cli.command {
        Command::Crop(a) => cmd_crop(&ctx, a),
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::AeTrain(a) => cmd_ae_train(&ctx, a),
        Command::GfvExport(a) => cmd_gfv_export(&ctx, a),
        Command::RlTrain(a) => cmd_rl_train(&ctx, a),
        Command::BankBuild(a) => cmd_bank_build(&ctx, a),
        Command::Refine(a) => cmd_refine(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Pipeline => cmd_pipeline(&ctx),
        Command::Params => {
            print_params(&ctx.cfg.agent.hidden);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::FAILURE
        }
    }
}
