use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use smot_core::data_io::{
    pair_sequences, parse_coco_vid_tracks, parse_mot, parse_mot_gt, read_mot_dir, NamedDetections,
};
use smot_core::geometry::mean_object_size;
use smot_core::metrics::{evaluate_dataset, EvalConfig, MetricSet};
use smot_core::{Error, MeanObjectSize};

use crate::{emit, status, CmdResult, Failure};

#[derive(Clone, Copy, ValueEnum)]
pub enum InputFormat {
    Mot,
    Coco,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Ground truth: MOT directory or file, or COCO-video JSON.
    #[arg(long)]
    gt: PathBuf,
    /// Predictions in the same format.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value = "mot")]
    format: InputFormat,
    /// Comma-separated subset of so-hota, hota, clear, idf1.
    #[arg(long, default_value = "so-hota,hota,clear,idf1")]
    metrics: String,
    /// Mean object size S; computed from the ground truth when absent.
    #[arg(long)]
    s_override: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    out_format: OutFormat,
    /// Worker threads (default: logical cores).
    #[arg(long, env = "SMOT_EVAL_JOBS")]
    jobs: Option<usize>,
    /// Treat warnings as errors.
    #[arg(long)]
    strict: bool,
}

fn load_mot(path: &Path, gt: bool) -> Result<NamedDetections, Error> {
    if path.is_dir() {
        return Ok(read_mot_dir(path, gt)?
            .into_iter()
            .map(|(name, f)| (name, (f.detections, f.frame_count)))
            .collect());
    }
    let file = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    let reader = BufReader::new(file);
    let dets = if gt { parse_mot_gt(reader) } else { parse_mot(reader) }.map_err(|e| e.in_file(path))?;
    let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    Ok([(name, (dets, None))].into_iter().collect())
}

fn load_coco(path: &Path) -> Result<NamedDetections, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    Ok(parse_coco_vid_tracks(&text)
        .map_err(|e| e.in_file(path))?
        .into_iter()
        .map(|v| (v.name, (v.detections, Some(v.frame_count))))
        .collect())
}

pub fn run(args: EvaluateArgs) -> CmdResult {
    let metrics = MetricSet::parse_list(args.metrics.split(','))?;
    let (gt, pred) = match args.format {
        InputFormat::Mot => (load_mot(&args.gt, true)?, load_mot(&args.pred, false)?),
        InputFormat::Coco => (load_coco(&args.gt)?, load_coco(&args.pred)?),
    };
    let (sequences, extra) = pair_sequences(gt, pred)?;
    let mut warnings: Vec<String> = extra
        .iter()
        .map(|n| format!("prediction sequence `{n}` has no ground truth"))
        .collect();
    warnings.extend(
        sequences
            .iter()
            .filter(|s| s.gt().is_empty())
            .map(|s| format!("sequence `{}` has no ground truth boxes", s.name())),
    );

    let s = match args.s_override {
        Some(v) => MeanObjectSize::new(v)?,
        None => mean_object_size(sequences.iter().flat_map(|s| s.gt().iter().map(|d| &d.bbox)))?,
    };
    let cfg = EvalConfig::new(metrics, s);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::internal(e.to_string()))?;
    let start = Instant::now();
    let report = pool.install(|| evaluate_dataset(&sequences, &cfg))?;
    let elapsed = start.elapsed().as_secs_f64();

    warnings.extend(report.pooled.flags.iter().map(|f| format!("pooled score flag `{f}`")));
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if args.strict && !warnings.is_empty() {
        return Err(Failure::validation(format!(
            "{} warning(s) under --strict",
            warnings.len()
        )));
    }

    let payload = match args.out_format {
        OutFormat::Json => report.to_json()? + "\n",
        OutFormat::Csv => report.to_csv(),
    };
    emit(args.out.as_deref(), payload.as_bytes())?;

    let out = args.out.as_ref();
    let headline: Vec<String> = report
        .pooled
        .entries()
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .filter(|(k, _)| ["so_hota", "so_deta", "so_assa", "hota", "mota", "idf1"].contains(k))
        .map(|(k, v)| format!("{} {v:.2}", k.replace('_', "-").to_uppercase()))
        .collect();
    status(out, &headline.join("  "));
    let frames: usize = sequences.iter().map(|s| s.frame_count()).sum();
    status(
        out,
        &format!(
            "{} sequences, {frames} frames, S = {:.3}, {:.1} frames/s",
            sequences.len(),
            s.get(),
            frames as f64 / elapsed.max(1e-9)
        ),
    );
    Ok(())
}
