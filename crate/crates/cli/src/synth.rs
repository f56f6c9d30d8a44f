use std::path::PathBuf;

use clap::{Args, Subcommand};
use smot_core::data_io::write_mot;
use smot_core::synth::{
    corrupt, displacement_csv, displacement_study, generate_scene, shift_range, CorruptionConfig,
    DisplacementStudyConfig, Motion, SceneConfig,
};
use smot_core::MeanObjectSize;

use crate::{emit, status, CmdResult, Failure};

#[derive(Subcommand)]
pub enum SynthCommand {
    /// Kernel and metric curves for a vertically displaced static track.
    Displacement(DisplacementArgs),
    /// Random multi-object scene in MOT format.
    Scene(SceneArgs),
}

#[derive(Args)]
pub struct DisplacementArgs {
    #[arg(long, default_value_t = 16.0)]
    box_size: f64,
    /// `start:end:step` in pixels, end inclusive.
    #[arg(long, default_value = "0:64:1")]
    shifts: String,
    #[arg(long, default_value_t = 50)]
    frames: usize,
    #[arg(long)]
    s_override: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SceneArgs {
    #[arg(long, default_value_t = 5)]
    objects: usize,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1920.0)]
    arena_width: f64,
    #[arg(long, default_value_t = 1080.0)]
    arena_height: f64,
    #[arg(long, default_value_t = 8.0)]
    box_min: f64,
    #[arg(long, default_value_t = 24.0)]
    box_max: f64,
    #[arg(long, default_value = "linear")]
    motion: String,
    #[arg(long, default_value_t = 0.5)]
    speed_min: f64,
    #[arg(long, default_value_t = 4.0)]
    speed_max: f64,
    /// Ground-truth output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write corrupted predictions here.
    #[arg(long)]
    pred_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    miss_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    fp_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    id_switch_rate: f64,
    /// Strip identities from the predictions.
    #[arg(long)]
    drop_ids: bool,
}

fn parse_shifts(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::validation(format!("malformed --shifts `{spec}`, expected start:end:step")))?;
    match parts[..] {
        [a, b, step] => Ok(shift_range(a, b, step)?),
        [a, b] => Ok(shift_range(a, b, 1.0)?),
        _ => Err(Failure::validation(format!(
            "malformed --shifts `{spec}`, expected start:end:step"
        ))),
    }
}

pub fn run(cmd: SynthCommand) -> CmdResult {
    match cmd {
        SynthCommand::Displacement(a) => {
            let cfg = DisplacementStudyConfig {
                box_size: a.box_size,
                shifts: parse_shifts(&a.shifts)?,
                frames: a.frames,
                s_override: a.s_override.map(MeanObjectSize::new).transpose()?,
            };
            let rows = displacement_study(&cfg)?;
            emit(a.out.as_deref(), displacement_csv(&rows).as_bytes())?;
            status(a.out.as_ref(), &format!("{} rows", rows.len()));
            Ok(())
        }
        SynthCommand::Scene(a) => {
            let cfg = SceneConfig {
                n_objects: a.objects,
                frames: a.frames,
                arena: (a.arena_width, a.arena_height),
                box_size_range: (a.box_min, a.box_max),
                motion: a.motion.parse::<Motion>()?,
                speed_range: (a.speed_min, a.speed_max),
                seed: a.seed,
            };
            let scene = generate_scene(&cfg)?;
            let mut buf = Vec::new();
            write_mot(scene.gt(), &mut buf)?;
            emit(a.out.as_deref(), &buf)?;
            if let Some(p) = &a.pred_out {
                let corruption = CorruptionConfig {
                    center_noise_sigma: a.noise,
                    miss_rate: a.miss_rate,
                    fp_rate: a.fp_rate,
                    id_switch_rate: a.id_switch_rate,
                    drop_ids: a.drop_ids,
                    seed: a.seed,
                };
                let pred = corrupt(&scene, &corruption)?;
                let mut buf = Vec::new();
                write_mot(&pred, &mut buf)?;
                emit(Some(p), &buf)?;
            }
            status(
                a.out.as_ref(),
                &format!("{} objects, {} frames, {} boxes", a.objects, a.frames, scene.gt().len()),
            );
            Ok(())
        }
    }
}
