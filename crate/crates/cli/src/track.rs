use std::collections::HashSet;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use smot_core::data_io::{load_affines, parse_mot, write_mot, AffineSchedule};
use smot_core::geometry::{mean_object_size, ExpansionParams};
use smot_core::tracker::{interpolate_tracks, track_sequence, TrackerConfig};
use smot_core::{Error, MeanObjectSize, SimilarityMeasure};

use crate::{emit, status, CmdResult};

#[derive(Args)]
pub struct TrackArgs {
    /// Raw detections in MOT format (id -1).
    #[arg(long)]
    detections: PathBuf,
    /// Per-frame affine CSV `frame,a,b,tx,c,d,ty`.
    #[arg(long)]
    affine: Option<PathBuf>,
    /// iou, dotd, diou or expanded-penalty.
    #[arg(long, default_value = "expanded-penalty")]
    similarity: String,
    #[arg(long, default_value_t = 0.5)]
    expand: f64,
    #[arg(long, default_value_t = 0.25)]
    penalty_weight: f64,
    #[arg(long, default_value_t = 0.3)]
    assoc_threshold: f64,
    #[arg(long, default_value_t = 0.9)]
    ema_lambda: f64,
    #[arg(long, default_value_t = 0.2)]
    ocm_weight: f64,
    #[arg(long, default_value_t = 30)]
    max_age: usize,
    #[arg(long, default_value_t = 3)]
    min_hits: usize,
    /// Fill short gaps in the output tracks.
    #[arg(long)]
    interpolate: bool,
    #[arg(long, default_value_t = 20)]
    max_gap: usize,
    /// Mean object size S; derived from the detections when absent.
    #[arg(long)]
    s_override: Option<f64>,
    /// Sequence length; defaults to the last detection frame.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: TrackArgs) -> CmdResult {
    let file = fs::File::open(&a.detections).map_err(|e| Error::from(e).in_file(&a.detections))?;
    let dets = parse_mot(BufReader::new(file)).map_err(|e| e.in_file(&a.detections))?;
    if let Some(w) = dets.windows(2).find(|w| w[1].frame < w[0].frame) {
        return Err(Error::FrameOrder {
            last: w[0].frame + 1,
            got: w[1].frame + 1,
        }
        .in_file(&a.detections)
        .into());
    }
    let affines = match &a.affine {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| Error::from(e).in_file(p))?;
            AffineSchedule::new(load_affines(BufReader::new(f)).map_err(|e| e.in_file(p))?)?
        }
        None => AffineSchedule::default(),
    };

    let similarity = match a.similarity.parse::<SimilarityMeasure>()? {
        SimilarityMeasure::ExpandedPenalty(_) => SimilarityMeasure::ExpandedPenalty(ExpansionParams {
            expand: a.expand,
            penalty_weight: a.penalty_weight,
        }),
        other => other,
    };
    let mean_size = match a.s_override {
        Some(s) => MeanObjectSize::new(s)?,
        None if dets.is_empty() => TrackerConfig::default().mean_size,
        None => mean_object_size(dets.iter().map(|d| &d.bbox))?,
    };
    let cfg = TrackerConfig {
        similarity,
        assoc_threshold: a.assoc_threshold,
        ema_lambda: a.ema_lambda,
        ocm_weight: a.ocm_weight,
        max_age: a.max_age,
        min_hits: a.min_hits,
        interpolation_max_gap: a.max_gap,
        mean_size,
    };
    let frames = a
        .frames
        .unwrap_or_else(|| dets.iter().map(|d| d.frame + 1).max().unwrap_or(0));

    let start = Instant::now();
    let mut out = track_sequence(&dets, frames, &affines, &cfg)?;
    if a.interpolate {
        out = interpolate_tracks(&out, cfg.interpolation_max_gap);
    }
    let elapsed = start.elapsed().as_secs_f64();

    let mut buf = Vec::new();
    write_mot(&out, &mut buf)?;
    emit(a.out.as_deref(), &buf)?;
    let tracks: HashSet<_> = out.iter().filter_map(|d| d.track_id).collect();
    status(
        a.out.as_ref(),
        &format!(
            "{} tracks, {frames} frames, {:.1} frames/s",
            tracks.len(),
            frames as f64 / elapsed.max(1e-9)
        ),
    );
    Ok(())
}
