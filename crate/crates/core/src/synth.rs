//! Deterministic synthetic data: the vertical-displacement study, random
//! multi-object scenes and prediction corruption.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Normal and
//! Poisson draws use `rand_distr`. Outputs are a pure function of the config.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data_io::{Detection, FrameIndex, SequencePair};
use crate::error::{Error, Result};
use crate::geometry::{dotd, iou, BoundingBox, MeanObjectSize};
use crate::matching::ThresholdAlpha;
use crate::metrics::{hota_suite, so_hota_suite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementStudyConfig {
    pub box_size: f64,
    pub shifts: Vec<f64>,
    pub frames: usize,
    pub s_override: Option<MeanObjectSize>,
}

impl DisplacementStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.box_size.is_finite() && self.box_size > 0.0) {
            return Err(Error::Validation(format!(
                "box size must be positive, got {}",
                self.box_size
            )));
        }
        if self.frames == 0 {
            return Err(Error::Validation("frames must be >= 1".into()));
        }
        if self.shifts.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Validation("shifts must be finite and >= 0".into()));
        }
        if self.shifts.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Validation("shifts must be sorted ascending".into()));
        }
        Ok(())
    }
}

/// `start, start+step, ...` up to and including `end` (with a small slack
/// for float steps).
pub fn shift_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) || step <= 0.0 || start < 0.0 || end < start {
        return Err(Error::Validation(format!("invalid shift range {start}:{end}:{step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementRow {
    pub x: f64,
    pub iou: f64,
    pub dotd: f64,
    pub hota: f64,
    pub so_hota: f64,
}

/// Static `d x d` gt track against the same track shifted down by each `x`.
pub fn displacement_study(cfg: &DisplacementStudyConfig) -> Result<Vec<DisplacementRow>> {
    cfg.validate()?;
    let d = cfg.box_size;
    let s = cfg.s_override.map_or_else(|| MeanObjectSize::new(d), Ok)?;
    let alphas = ThresholdAlpha::canonical_grid();
    let base = BoundingBox::new(100.0, 100.0, d, d)?;
    let gt: Vec<Detection> = (0..cfg.frames).map(|f| Detection::tracked(f, 1, base)).collect();

    cfg.shifts
        .iter()
        .map(|&x| {
            let shifted = base.translated(0.0, x);
            let pred = gt.iter().map(|g| Detection::tracked(g.frame, 1, shifted)).collect();
            let seq = SequencePair::new("displacement", cfg.frames, gt.clone(), pred)?;
            let seqs = [seq];
            Ok(DisplacementRow {
                x,
                iou: iou(&base, &shifted),
                dotd: dotd(&base, &shifted, s),
                hota: hota_suite(&seqs, &alphas)?.pooled.hota,
                so_hota: so_hota_suite(&seqs, s, &alphas)?.pooled.hota,
            })
        })
        .collect()
}

pub fn displacement_csv(rows: &[DisplacementRow]) -> String {
    let mut out = String::from("x,iou,dotd,hota,so_hota\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.x, r.iou, r.dotd, r.hota, r.so_hota
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    Linear,
    Sinusoidal,
    Flock,
}

impl std::str::FromStr for Motion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "sinusoidal" => Ok(Self::Sinusoidal),
            "flock" => Ok(Self::Flock),
            other => Err(Error::Validation(format!("unknown motion `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub n_objects: usize,
    pub frames: usize,
    pub arena: (f64, f64),
    pub box_size_range: (f64, f64),
    pub motion: Motion,
    /// px/frame
    pub speed_range: (f64, f64),
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_objects: 5,
            frames: 100,
            arena: (1920.0, 1080.0),
            box_size_range: (8.0, 24.0),
            motion: Motion::Linear,
            speed_range: (0.5, 4.0),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.box_size_range;
        let (smin, smax) = self.speed_range;
        let (w, h) = self.arena;
        let bad = |m: &str| Err(Error::Validation(m.to_string()));
        if self.n_objects == 0 || self.frames == 0 {
            return bad("objects and frames must be >= 1");
        }
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi < lo {
            return bad("box size range must satisfy 0 < min <= max");
        }
        if !(w.is_finite() && h.is_finite()) || w <= hi || h <= hi {
            return bad("arena must be larger than the largest box");
        }
        if !(smin.is_finite() && smax.is_finite()) || smin < 0.0 || smax < smin {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        Ok(())
    }
}

/// Reflects a 1-D coordinate into `[0, limit]`, flipping the velocity.
fn reflect(pos: &mut f64, vel: &mut f64, limit: f64) {
    if *pos < 0.0 {
        *pos = -*pos;
        *vel = -*vel;
    } else if *pos > limit {
        *pos = 2.0 * limit - *pos;
        *vel = -*vel;
    }
    *pos = pos.clamp(0.0, limit);
}

struct Body {
    w: f64,
    h: f64,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    amp: f64,
    period: f64,
    phase: f64,
}

/// Ground-truth tracks with ids `1..=n_objects` over every frame. The
/// prediction side is empty.
pub fn generate_scene(cfg: &SceneConfig) -> Result<SequencePair> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (aw, ah) = cfg.arena;
    let (lo, hi) = cfg.box_size_range;
    let (smin, smax) = cfg.speed_range;

    let heading = |rng: &mut ChaCha8Rng| {
        let speed = rng.random_range(smin..=smax);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        (speed * theta.cos(), speed * theta.sin())
    };
    let group = heading(&mut rng);
    let mut bodies: Vec<Body> = (0..cfg.n_objects)
        .map(|_| {
            let w = rng.random_range(lo..=hi);
            let h = rng.random_range(lo..=hi);
            let x = rng.random_range(0.0..=aw - w);
            let y = rng.random_range(0.0..=ah - h);
            let (vx, vy) = match cfg.motion {
                Motion::Flock => group,
                _ => heading(&mut rng),
            };
            Body {
                w,
                h,
                x,
                y,
                vx,
                vy,
                amp: rng.random_range(0.0..=2.0 * hi),
                period: rng.random_range(20.0..=80.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect();

    let jitter = Normal::new(0.0, 0.1 * smax.max(1e-9)).expect("positive sigma");
    let mut gt = Vec::with_capacity(cfg.n_objects * cfg.frames);
    for f in 0..cfg.frames {
        for (k, b) in bodies.iter_mut().enumerate() {
            if f > 0 {
                let (jx, jy) = match cfg.motion {
                    Motion::Flock => (jitter.sample(&mut rng), jitter.sample(&mut rng)),
                    _ => (0.0, 0.0),
                };
                b.x += b.vx + jx;
                b.y += b.vy + jy;
                reflect(&mut b.x, &mut b.vx, aw - b.w);
                reflect(&mut b.y, &mut b.vy, ah - b.h);
            }
            let (mut x, mut y) = (b.x, b.y);
            if cfg.motion == Motion::Sinusoidal {
                let speed = b.vx.hypot(b.vy);
                let (nx, ny) = if speed > 1e-9 {
                    (-b.vy / speed, b.vx / speed)
                } else {
                    (0.0, 1.0)
                };
                let off = b.amp * (std::f64::consts::TAU * f as f64 / b.period + b.phase).sin();
                x = (x + off * nx).clamp(0.0, aw - b.w);
                y = (y + off * ny).clamp(0.0, ah - b.h);
            }
            gt.push(Detection::tracked(f, k as u32 + 1, BoundingBox::new(x, y, b.w, b.h)?));
        }
    }
    SequencePair::new(format!("scene-{}", cfg.seed), cfg.frames, gt, Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub center_noise_sigma: f64,
    pub miss_rate: f64,
    pub fp_rate: f64,
    pub id_switch_rate: f64,
    pub drop_ids: bool,
    pub seed: u64,
}

impl CorruptionConfig {
    pub fn identity(seed: u64) -> Self {
        Self {
            center_noise_sigma: 0.0,
            miss_rate: 0.0,
            fp_rate: 0.0,
            id_switch_rate: 0.0,
            drop_ids: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_noise_sigma.is_finite() && self.center_noise_sigma >= 0.0) {
            return Err(Error::Validation("noise sigma must be >= 0".into()));
        }
        for (name, r) in [
            ("miss", self.miss_rate),
            ("fp", self.fp_rate),
            ("id switch", self.id_switch_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Validation(format!("{name} rate {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Derives predictions from a sequence's ground truth.
pub fn corrupt(seq: &SequencePair, cfg: &CorruptionConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gt = seq.gt();
    if gt.is_empty() {
        return Ok(Vec::new());
    }
    let noise = (cfg.center_noise_sigma > 0.0).then(|| Normal::new(0.0, cfg.center_noise_sigma).expect("sigma >= 0"));
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for d in gt {
        x0 = x0.min(d.bbox.left());
        y0 = y0.min(d.bbox.top());
        x1 = x1.max(d.bbox.right());
        y1 = y1.max(d.bbox.bottom());
    }
    let sizes: Vec<(f64, f64)> = gt.iter().map(|d| (d.bbox.width(), d.bbox.height())).collect();
    let mut next_id = gt.iter().filter_map(|d| d.track_id).max().unwrap_or(0) + 1;
    // gt id -> emitted id
    let mut mapping: BTreeMap<u32, u32> = BTreeMap::new();

    let index = FrameIndex::new(gt, seq.frame_count());
    let mut out = Vec::with_capacity(gt.len());
    for f in 0..seq.frame_count() {
        let frame = &gt[index.range(f)];
        let ids: Vec<u32> = frame.iter().filter_map(|d| d.track_id).collect();
        for &id in &ids {
            mapping.entry(id).or_insert(id);
        }
        if cfg.id_switch_rate > 0.0 && ids.len() > 1 {
            for (i, &id) in ids.iter().enumerate() {
                if rng.random_bool(cfg.id_switch_rate) {
                    let mut j = rng.random_range(0..ids.len() - 1);
                    if j >= i {
                        j += 1;
                    }
                    let a = mapping[&id];
                    let b = mapping[&ids[j]];
                    mapping.insert(id, b);
                    mapping.insert(ids[j], a);
                }
            }
        }
        for d in frame {
            if cfg.miss_rate > 0.0 && rng.random_bool(cfg.miss_rate) {
                continue;
            }
            let mut bbox = d.bbox;
            if let Some(n) = &noise {
                bbox = bbox.translated(n.sample(&mut rng), n.sample(&mut rng));
            }
            let track_id = if cfg.drop_ids {
                None
            } else {
                d.track_id.map(|id| mapping[&id])
            };
            out.push(Detection { bbox, track_id, ..*d });
        }
        let lambda = cfg.fp_rate * frame.len() as f64;
        if lambda > 0.0 {
            let k = Poisson::new(lambda).expect("positive rate").sample(&mut rng) as usize;
            for _ in 0..k {
                let &(w, h) = sizes.choose(&mut rng).expect("non-empty gt");
                let left = rng.random_range(x0..=(x1 - w).max(x0));
                let top = rng.random_range(y0..=(y1 - h).max(y0));
                let track_id = if cfg.drop_ids {
                    None
                } else {
                    next_id += 1;
                    Some(next_id - 1)
                };
                out.push(Detection::new(
                    f,
                    BoundingBox::new(left, top, w, h)?,
                    rng.random_range(0.05..=1.0),
                    track_id,
                )?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::write_mot;
    use crate::metrics::so_hota_suite;

    fn study(shifts: Vec<f64>) -> Vec<DisplacementRow> {
        displacement_study(&DisplacementStudyConfig {
            box_size: 16.0,
            shifts,
            frames: 10,
            s_override: None,
        })
        .unwrap()
    }

    #[test]
    fn displacement_examples() {
        let rows = study(vec![0.0, 8.0, 16.0]);
        let r0 = rows[0];
        assert_eq!((r0.iou, r0.dotd, r0.hota, r0.so_hota), (1.0, 1.0, 1.0, 1.0));
        assert!((rows[1].iou - 1.0 / 3.0).abs() < 1e-12);
        assert!((rows[1].hota - 6.0 / 19.0).abs() < 1e-9);
        assert_eq!(rows[2].dotd, (-1.0f64).exp());
        assert_eq!(rows[2].hota, 0.0);
    }

    #[test]
    fn displacement_monotone_and_csv() {
        let rows = study(shift_range(0.0, 40.0, 2.0).unwrap());
        assert_eq!(rows.len(), 21);
        assert!(rows.windows(2).all(|w| w[1].so_hota <= w[0].so_hota));
        let csv = displacement_csv(&rows[..1]);
        assert_eq!(
            csv,
            "x,iou,dotd,hota,so_hota\n0.000000,1.000000,1.000000,1.000000,1.000000\n"
        );
    }

    #[test]
    fn displacement_validation() {
        let mut cfg = DisplacementStudyConfig {
            box_size: 16.0,
            shifts: vec![2.0, 1.0],
            frames: 3,
            s_override: None,
        };
        assert!(displacement_study(&cfg).is_err());
        cfg.shifts = vec![1.0];
        cfg.box_size = 0.0;
        assert!(displacement_study(&cfg).is_err());
        assert!(shift_range(0.0, 64.0, 0.0).is_err());
        assert_eq!(shift_range(0.0, 64.0, 1.0).unwrap().len(), 65);
    }

    fn mot_bytes(dets: &[Detection]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_mot(dets, &mut buf).unwrap();
        buf
    }

    #[test]
    fn scene_counts_and_determinism() {
        let cfg = SceneConfig::default();
        let a = generate_scene(&cfg).unwrap();
        assert_eq!(a.gt().len(), 500);
        let mut ids: Vec<_> = a.gt().iter().map(|d| d.track_id.unwrap()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids, [1, 2, 3, 4, 5]);
        let b = generate_scene(&cfg).unwrap();
        assert_eq!(mot_bytes(a.gt()), mot_bytes(b.gt()));
    }

    #[test]
    fn static_scene() {
        let cfg = SceneConfig {
            n_objects: 1,
            speed_range: (0.0, 0.0),
            ..SceneConfig::default()
        };
        let s = generate_scene(&cfg).unwrap();
        assert!(s.gt().iter().all(|d| d.bbox == s.gt()[0].bbox));
    }

    #[test]
    fn scenes_stay_in_arena() {
        for motion in [Motion::Linear, Motion::Sinusoidal, Motion::Flock] {
            let cfg = SceneConfig {
                n_objects: 8,
                frames: 400,
                arena: (200.0, 150.0),
                speed_range: (3.0, 12.0),
                motion,
                seed: 9,
                ..SceneConfig::default()
            };
            for d in generate_scene(&cfg).unwrap().gt() {
                let b = d.bbox;
                assert!(
                    b.left() >= 0.0 && b.top() >= 0.0 && b.right() <= 200.0 && b.bottom() <= 150.0,
                    "{motion:?}"
                );
            }
        }
    }

    #[test]
    fn corrupt_identity_and_misses() {
        let scene = generate_scene(&SceneConfig::default()).unwrap();
        let pred = corrupt(&scene, &CorruptionConfig::identity(3)).unwrap();
        assert_eq!(pred, scene.gt());
        let s = MeanObjectSize::new(16.0).unwrap();
        let seq = scene.clone().with_pred(pred).unwrap();
        let r = so_hota_suite(&[seq], s, &ThresholdAlpha::canonical_grid()).unwrap();
        assert_eq!(r.pooled.hota, 1.0);

        let all_missed = CorruptionConfig {
            miss_rate: 1.0,
            ..CorruptionConfig::identity(3)
        };
        assert!(corrupt(&scene, &all_missed).unwrap().is_empty());
    }

    #[test]
    fn corrupt_noise_keeps_counts_balanced() {
        let scene = generate_scene(&SceneConfig::default()).unwrap();
        let s = crate::geometry::mean_object_size(scene.gt().iter().map(|d| &d.bbox)).unwrap();
        let cfg = CorruptionConfig {
            center_noise_sigma: s.get(),
            ..CorruptionConfig::identity(5)
        };
        let pred = corrupt(&scene, &cfg).unwrap();
        assert_eq!(pred.len(), scene.gt().len());
        let seq = scene.clone().with_pred(pred).unwrap();
        let r = so_hota_suite(&[seq], s, &ThresholdAlpha::canonical_grid()).unwrap();
        for a in &r.pooled.per_alpha {
            assert_eq!(a.detpr, a.detre);
        }
    }

    #[test]
    fn corrupt_switches_fps_and_dropped_ids() {
        let scene = generate_scene(&SceneConfig::default()).unwrap();
        let cfg = CorruptionConfig {
            center_noise_sigma: 1.0,
            miss_rate: 0.1,
            fp_rate: 0.3,
            id_switch_rate: 0.05,
            drop_ids: false,
            seed: 11,
        };
        let a = corrupt(&scene, &cfg).unwrap();
        assert_eq!(a, corrupt(&scene, &cfg).unwrap());
        // valid as a prediction side: ids unique per frame
        scene.clone().with_pred(a).unwrap();
        let anon = corrupt(&scene, &CorruptionConfig { drop_ids: true, ..cfg }).unwrap();
        assert!(anon.iter().all(|d| d.track_id.is_none()));
        let bad = CorruptionConfig { miss_rate: 1.5, ..cfg };
        assert!(corrupt(&scene, &bad).is_err());
    }
}
