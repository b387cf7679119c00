//! One function per subcommand. Each reads its inputs, runs the pipeline and
//! writes artifacts into the prepared run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flowfit::body::{BodyParams, MeshTemplate};
use flowfit::data::{generate, read_dataset, write_dataset, Dataset};
use flowfit::eval::{
    coefficient_of_variation, evaluate_model, evaluate_sequences, flow_loss_samples, flow_quality_audit, ground_truth,
    predict_dataset, FlowSource, MetricReport,
};
use flowfit::nn::{Checkpoint, ContextConfig, ContextNet, Regressor};
use flowfit::train::{
    optimize_sequence, pretrain_baseline, refine_anchored_unsupervised, refine_with_flow, ContextHistory,
    PredictionCache, TrainLog,
};

use crate::artifacts::{Metrics, RunDir};
use crate::config::{ExperimentConfig, FlowSourceKind};
use crate::plot;

pub const CHECKPOINT_FILE: &str = "checkpoint.ffck";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.txt";

pub struct RunContext<'a> {
    pub config: &'a ExperimentConfig,
    pub run: &'a RunDir,
    pub template: MeshTemplate,
    pub workers: usize,
}

pub fn load_template(path: Option<&Path>) -> Result<MeshTemplate> {
    match path {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading template {}", p.display()))?;
            MeshTemplate::from_bytes(&bytes).with_context(|| format!("decoding template {}", p.display()))
        }
        None => Ok(MeshTemplate::default_humanoid()),
    }
}

fn required<'p>(value: &'p Option<PathBuf>, key: &str) -> Result<&'p Path> {
    let p = value
        .as_deref()
        .with_context(|| format!("missing input: set `{key}` in the config or pass --set {key}=PATH"))?;
    if !p.exists() {
        bail!("input `{key}` = {} does not exist", p.display());
    }
    Ok(p)
}

fn load_dataset(value: &Option<PathBuf>, key: &str, workers: usize) -> Result<Dataset> {
    let p = required(value, key)?;
    read_dataset(p, workers).with_context(|| format!("reading corpus {}", p.display()))
}

fn load_checkpoint(value: &Option<PathBuf>, key: &str) -> Result<Checkpoint> {
    let p = required(value, key)?;
    Checkpoint::load(p).with_context(|| format!("reading checkpoint {}", p.display()))
}

fn check_size(regressor: &Regressor, dataset: &Dataset, what: &str) -> Result<()> {
    let s = regressor.config().image_size();
    if s != dataset.size {
        bail!(
            "{what} has {}x{} frames but the network expects {}x{}",
            dataset.size.width,
            dataset.size.height,
            s.width,
            s.height
        );
    }
    Ok(())
}

fn write_log(ctx: &RunContext<'_>, log: &TrainLog, metrics: &mut Metrics) -> Result<()> {
    ctx.run.write(TRAIN_LOG_FILE, log.to_csv())?;
    metrics.put("steps", log.records.len());
    if let Some(last) = log.records.last() {
        metrics.put("final_loss", last.total);
    }
    metrics.put("skipped_pairs", log.skipped_pairs());
    Ok(())
}

fn report_plots(ctx: &RunContext<'_>, report: &MetricReport, prefix: &str) -> Result<()> {
    if !ctx.config.eval.plots {
        return Ok(());
    }
    let accel: Vec<f64> = report.per_sequence.iter().map(|m| m.accel_err).collect();
    let err: Vec<f64> = report.per_sequence.iter().map(|m| m.pmpjpe).collect();
    ctx.run.write(
        &format!("{prefix}accel_per_sequence.svg"),
        plot::bar_chart("Accel.Err per sequence (mm/s^2)", &accel),
    )?;
    ctx.run.write(&format!("{prefix}pmpjpe_per_sequence.svg"), plot::bar_chart("P-MPJPE per sequence (mm)", &err))
}

/// Scores a checkpoint on the optional held-out corpus.
fn held_out(ctx: &RunContext<'_>, checkpoint: &Checkpoint, baseline: Option<&Regressor>, metrics: &mut Metrics) -> Result<()> {
    if ctx.config.inputs.eval_dataset.is_none() {
        return Ok(());
    }
    let test = load_dataset(&ctx.config.inputs.eval_dataset, "inputs.eval_dataset", ctx.workers)?;
    let report = score(ctx, checkpoint, baseline, &test)?;
    metrics.extend_prefixed("eval.", &report.to_text());
    report_plots(ctx, &report, "eval_")
}

fn score(ctx: &RunContext<'_>, checkpoint: &Checkpoint, baseline: Option<&Regressor>, dataset: &Dataset) -> Result<MetricReport> {
    check_size(&checkpoint.regressor, dataset, "evaluation corpus")?;
    let length = ctx.config.train.context_length;
    let report = match (&checkpoint.context, baseline) {
        (Some(net), Some(base)) if length > 0 => {
            let cache = PredictionCache::build(base, dataset, ctx.workers)?;
            evaluate_model(&ctx.template, &checkpoint.regressor, Some((net, &cache, length)), dataset, ctx.workers)?
        }
        (Some(_), None) if length > 0 => {
            bail!("the checkpoint has a context network; set inputs.baseline so frame histories can be computed")
        }
        _ => evaluate_model(&ctx.template, &checkpoint.regressor, None, dataset, ctx.workers)?,
    };
    Ok(report)
}

pub fn synth_gen(ctx: &RunContext<'_>) -> Result<Metrics> {
    let dataset = generate(&ctx.template, &ctx.config.data, ctx.workers)?;
    write_dataset(&dataset, &ctx.run.path)?;
    let mut m = Metrics::default();
    m.put("sequences", dataset.sequences.len());
    m.put("frames", dataset.num_frames());
    m.put("pairs", dataset.pairs().len());
    m.put("labeled_frames", dataset.labeled_indices().len());
    let pairs = dataset.pairs();
    let mean_flow = pairs
        .iter()
        .map(|p| {
            let f = p.flow_1to2;
            let size = f.size();
            let (mut sum, mut n) = (0.0, 0usize);
            for r in 0..size.height {
                for c in 0..size.width {
                    if f.is_valid(r, c) {
                        sum += f.at(r, c).norm();
                        n += 1;
                    }
                }
            }
            sum / n.max(1) as f64
        })
        .sum::<f64>()
        / pairs.len().max(1) as f64;
    m.put("mean_flow_px", mean_flow);
    Ok(m)
}

pub fn pretrain(ctx: &RunContext<'_>) -> Result<Metrics> {
    let cfg = ctx.config;
    let dataset = load_dataset(&cfg.inputs.dataset, "inputs.dataset", ctx.workers)?;
    let (regressor, log) = pretrain_baseline(&ctx.template, &dataset, cfg.model.regressor.clone(), &cfg.train)?;
    let checkpoint = Checkpoint { regressor, context: None };
    checkpoint.save(ctx.run.file(CHECKPOINT_FILE))?;
    let mut m = Metrics::default();
    m.put("labeled_frames", flowfit::train::select_labeled(&dataset, cfg.train.label_fraction, cfg.train.label_seed).len());
    write_log(ctx, &log, &mut m)?;
    held_out(ctx, &checkpoint, None, &mut m)?;
    Ok(m)
}

fn context_config(cfg: &ExperimentConfig, regressor: &Regressor) -> ContextConfig {
    ContextConfig {
        feature_dim: regressor.feature_dim(),
        ..cfg.model.context.clone()
    }
}

pub fn refine(ctx: &RunContext<'_>) -> Result<Metrics> {
    let cfg = ctx.config;
    let baseline = load_checkpoint(&cfg.inputs.baseline, "inputs.baseline")?.regressor;
    let labeled = load_dataset(&cfg.inputs.dataset, "inputs.dataset", ctx.workers)?;
    let unlabeled = match &cfg.inputs.unlabeled {
        Some(_) => Some(load_dataset(&cfg.inputs.unlabeled, "inputs.unlabeled", ctx.workers)?),
        None => None,
    };
    let pair_source = unlabeled.as_ref().unwrap_or(&labeled);
    check_size(&baseline, &labeled, "labeled corpus")?;
    check_size(&baseline, pair_source, "unlabeled corpus")?;
    let pairs = pair_source.pairs();

    let use_context = cfg.train.context_length > 0;
    let caches = if use_context {
        Some((
            PredictionCache::build(&baseline, &labeled, ctx.workers)?,
            PredictionCache::build(&baseline, pair_source, ctx.workers)?,
        ))
    } else {
        None
    };
    let history = caches.as_ref().map(|(l, p)| ContextHistory { labeled: l, pairs: p });
    let context = if use_context {
        Some(ContextNet::new(context_config(cfg, &baseline))?)
    } else {
        None
    };
    let (regressor, context, log) = refine_with_flow(&ctx.template, &baseline, context, &labeled, &pairs, history, &cfg.train)?;
    let checkpoint = Checkpoint { regressor, context };
    checkpoint.save(ctx.run.file(CHECKPOINT_FILE))?;
    let mut m = Metrics::default();
    write_log(ctx, &log, &mut m)?;
    loss_spread(ctx, &baseline, &pairs, &mut m)?;
    held_out(ctx, &checkpoint, Some(&baseline), &mut m)?;
    Ok(m)
}

/// Spread of the baseline's per-pair flow loss with and without scaling.
fn loss_spread(ctx: &RunContext<'_>, baseline: &Regressor, pairs: &[flowfit::data::UnlabeledPair<'_>], m: &mut Metrics) -> Result<()> {
    let images: Vec<Vec<f32>> = pairs.iter().flat_map(|p| [p.image_1.to_unit(), p.image_2.to_unit()]).collect();
    let refs: Vec<&[f32]> = images.iter().map(|v| v.as_slice()).collect();
    let preds = flowfit::train::predict_batched(baseline, None, &refs, &vec![&[][..]; refs.len()])?;
    let preds: Vec<[BodyParams; 2]> = preds.chunks(2).map(|c| [c[0].clone(), c[1].clone()]).collect();
    let samples = flow_loss_samples(&ctx.template, pairs, &preds, ctx.config.train.flow_options())?;
    if samples.len() < 2 {
        return Ok(());
    }
    let scaled: Vec<f64> = samples.iter().map(|s| s.scaled).collect();
    let unscaled: Vec<f64> = samples.iter().map(|s| s.unscaled).collect();
    m.put("baseline_flow_loss_cv_scaled", coefficient_of_variation(&scaled)?);
    m.put("baseline_flow_loss_cv_unscaled", coefficient_of_variation(&unscaled)?);
    if ctx.config.eval.plots {
        ctx.run.write(
            "flow_loss_histogram.svg",
            plot::relative_histograms(
                "Baseline flow loss per pair (relative to mean)",
                &[("unscaled", &unscaled), ("scaled", &scaled)],
                30,
            ),
        )?;
    }
    Ok(())
}

pub fn refine_unsup(ctx: &RunContext<'_>) -> Result<Metrics> {
    let cfg = ctx.config;
    let baseline = load_checkpoint(&cfg.inputs.baseline, "inputs.baseline")?.regressor;
    let key = if cfg.inputs.unlabeled.is_some() { "inputs.unlabeled" } else { "inputs.dataset" };
    let source = if cfg.inputs.unlabeled.is_some() { &cfg.inputs.unlabeled } else { &cfg.inputs.dataset };
    let dataset = load_dataset(source, key, ctx.workers)?;
    check_size(&baseline, &dataset, "unlabeled corpus")?;
    let pairs = dataset.pairs();
    let (regressor, log) = refine_anchored_unsupervised(&ctx.template, &baseline, &pairs, &cfg.train)?;
    let checkpoint = Checkpoint { regressor, context: None };
    checkpoint.save(ctx.run.file(CHECKPOINT_FILE))?;
    let mut m = Metrics::default();
    write_log(ctx, &log, &mut m)?;
    held_out(ctx, &checkpoint, None, &mut m)?;
    Ok(m)
}

fn trajectory_text(params: &[BodyParams]) -> String {
    let mut s = String::new();
    for (t, p) in params.iter().enumerate() {
        write!(s, "{t}").unwrap();
        for v in p.to_vec() {
            write!(s, " {v:?}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn optimize_seq(ctx: &RunContext<'_>) -> Result<Metrics> {
    let cfg = ctx.config;
    let baseline = load_checkpoint(&cfg.inputs.baseline, "inputs.baseline")?.regressor;
    let dataset = load_dataset(&cfg.inputs.dataset, "inputs.dataset", ctx.workers)?;
    check_size(&baseline, &dataset, "corpus")?;
    let s = cfg.eval.sequence;
    let sequence = dataset
        .sequences
        .get(s)
        .with_context(|| format!("eval.sequence = {s} but the corpus has {} sequences", dataset.sequences.len()))?;
    let (optimized, log) = optimize_sequence(&ctx.template, &baseline, sequence, &cfg.train)?;
    ctx.run.write(TRAJECTORY_FILE, trajectory_text(&optimized))?;
    let mut m = Metrics::default();
    m.put("sequence", s);
    write_log(ctx, &log, &mut m)?;
    let truth: Option<Vec<BodyParams>> = (0..sequence.len()).map(|t| dataset.labels.get(s, t).cloned()).collect();
    if let Some(truth) = truth {
        let images: Vec<Vec<f32>> = sequence.frames.iter().map(|f| f.to_unit()).collect();
        let refs: Vec<&[f32]> = images.iter().map(|v| v.as_slice()).collect();
        let initial = flowfit::train::predict_batched(&baseline, None, &refs, &vec![&[][..]; refs.len()])?;
        let truth = vec![truth];
        let before = evaluate_sequences(&ctx.template, &[initial], &truth, dataset.fps)?;
        let after = evaluate_sequences(&ctx.template, &[optimized], &truth, dataset.fps)?;
        m.put("initial.pmpjpe_mm", before.pmpjpe);
        m.put("initial.accel_err_mm_s2", before.accel_err);
        m.put("optimized.pmpjpe_mm", after.pmpjpe);
        m.put("optimized.accel_err_mm_s2", after.accel_err);
    }
    Ok(m)
}

pub fn eval(ctx: &RunContext<'_>) -> Result<Metrics> {
    let cfg = ctx.config;
    let checkpoint = load_checkpoint(&cfg.inputs.checkpoint, "inputs.checkpoint")?;
    let baseline = match &cfg.inputs.baseline {
        Some(_) => Some(load_checkpoint(&cfg.inputs.baseline, "inputs.baseline")?.regressor),
        None => None,
    };
    let dataset = load_dataset(&cfg.inputs.dataset, "inputs.dataset", ctx.workers)?;
    let report = score(ctx, &checkpoint, baseline.as_ref(), &dataset)?;
    report_plots(ctx, &report, "")?;
    let mut m = Metrics::default();
    m.extend_prefixed("", &report.to_text());
    Ok(m)
}

pub fn flow_audit(ctx: &RunContext<'_>) -> Result<Metrics> {
    let cfg = ctx.config;
    let checkpoint = load_checkpoint(&cfg.inputs.checkpoint, "inputs.checkpoint")?;
    let dataset = load_dataset(&cfg.inputs.dataset, "inputs.dataset", ctx.workers)?;
    check_size(&checkpoint.regressor, &dataset, "corpus")?;
    let truth = ground_truth(&dataset).context("the flow audit needs ground truth for every frame")?;
    let predictions = predict_dataset(&checkpoint.regressor, None, &dataset, ctx.workers)?;
    let maps: Vec<_> = dataset.sequences.iter().map(|s| s.forward_flows.clone()).collect();
    let mut m = Metrics::default();
    for &dt in &cfg.eval.delta_t {
        let source = match cfg.eval.flow_source {
            FlowSourceKind::Render => FlowSource::Oracle,
            FlowSourceKind::Archive if dt == 1 => FlowSource::Maps(&maps),
            FlowSourceKind::Archive => {
                bail!("stored flow covers consecutive frames only; use eval.flow_source=\"render\" for delta_t={dt}")
            }
        };
        let report = flow_quality_audit(&ctx.template, &truth, &predictions, source, dataset.size, dt, cfg.eval.oracle)?;
        m.extend_prefixed(&format!("delta_t.{dt}."), &report.to_text());
    }
    Ok(m)
}
