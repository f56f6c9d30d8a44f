//! Tracking by detection: constant-velocity Kalman prediction, association
//! with a direction-consistency cost, EMA-smoothed velocity, gap re-update,
//! optional affine ego-motion compensation, plus fusion helpers.

mod fusion;
mod kalman;

pub use fusion::{adaptive_wbf_weights, interpolate_tracks, intersection_ensemble, wbf, ScoredBox};
pub use kalman::{KalmanState, StateCovariance, StateVector, STD_POSITION, STD_VELOCITY};

use serde::{Deserialize, Serialize};

use crate::data_io::{AffineSchedule, AffineTransform, Detection, FrameIndex};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ExpansionParams, MeanObjectSize, SimilarityMeasure};
use crate::hungarian::solve_min;

const MIN_DIRECTION_NORM: f64 = 1e-6;
const INELIGIBLE_COST: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub similarity: SimilarityMeasure,
    pub assoc_threshold: f64,
    pub ema_lambda: f64,
    pub ocm_weight: f64,
    pub max_age: usize,
    pub min_hits: usize,
    pub interpolation_max_gap: usize,
    /// `S` for DotD-based similarities.
    pub mean_size: MeanObjectSize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            similarity: SimilarityMeasure::ExpandedPenalty(ExpansionParams::default()),
            assoc_threshold: 0.3,
            ema_lambda: 0.9,
            ocm_weight: 0.2,
            max_age: 30,
            min_hits: 3,
            interpolation_max_gap: 20,
            mean_size: MeanObjectSize::new(16.0).expect("positive"),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !self.assoc_threshold.is_finite() {
            return bad(format!("association threshold {} is not finite", self.assoc_threshold));
        }
        if !(0.0..=1.0).contains(&self.ema_lambda) {
            return bad(format!("ema lambda {} outside [0, 1]", self.ema_lambda));
        }
        if !(self.ocm_weight.is_finite() && self.ocm_weight >= 0.0) {
            return bad(format!("ocm weight {} must be >= 0", self.ocm_weight));
        }
        if self.min_hits == 0 {
            return bad("min hits must be >= 1".into());
        }
        if let SimilarityMeasure::ExpandedPenalty(p) = self.similarity {
            if !(p.expand.is_finite() && p.expand >= 0.0) {
                return bad(format!("expansion ratio {} must be >= 0", p.expand));
            }
            if !(0.0..=1.0).contains(&p.penalty_weight) {
                return bad(format!("penalty weight {} outside [0, 1]", p.penalty_weight));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub bbox: BoundingBox,
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub id: u32,
    pub kalman: KalmanState,
    pub ema_velocity: (f64, f64),
    /// False until a velocity has been observed.
    pub velocity_seen: bool,
    pub hits: usize,
    pub age: usize,
    pub time_since_update: usize,
    pub last_observation: Observation,
    pub confirmed: bool,
    /// Filter state right after the last observation, replayed on gap
    /// re-update.
    checkpoint: KalmanState,
}

impl TrackState {
    pub fn new(id: u32, det: &Detection) -> Self {
        let kalman = KalmanState::initiate(&det.bbox);
        Self {
            id,
            kalman,
            ema_velocity: (0.0, 0.0),
            velocity_seen: false,
            hits: 1,
            age: 0,
            time_since_update: 0,
            last_observation: Observation {
                bbox: det.bbox,
                frame: det.frame,
            },
            confirmed: false,
            checkpoint: kalman,
        }
    }

    /// Current (predicted or updated) box.
    pub fn bbox(&self) -> BoundingBox {
        self.kalman.bbox()
    }
}

/// Advances the filter one frame and returns the predicted box.
pub fn predict(track: &mut TrackState) -> BoundingBox {
    track.kalman.predict();
    track.age += 1;
    track.time_since_update += 1;
    track.bbox()
}

/// Applies an ego-motion transform to predicted boxes, EMA velocities and
/// last observations.
pub fn affine_compensate(tracks: &mut [TrackState], t: &AffineTransform) {
    if t.is_identity() {
        return;
    }
    for tr in tracks {
        tr.kalman.transform(t);
        tr.checkpoint.transform(t);
        tr.ema_velocity = t.apply_vector(tr.ema_velocity.0, tr.ema_velocity.1);
        tr.last_observation.bbox = t.map_box(&tr.last_observation.bbox);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    /// `(track index, detection index)`
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Angle in `[0, pi]` between the track's EMA velocity and the displacement
/// from its last observation to `det`. Zero when either vector is tiny.
fn direction_gap(track: &TrackState, det: &BoundingBox) -> f64 {
    if !track.velocity_seen {
        return 0.0;
    }
    let (vx, vy) = track.ema_velocity;
    let (ox, oy) = track.last_observation.bbox.center();
    let (dx, dy) = det.center();
    let (ux, uy) = (dx - ox, dy - oy);
    let (nv, nu) = (vx.hypot(vy), ux.hypot(uy));
    if nv < MIN_DIRECTION_NORM || nu < MIN_DIRECTION_NORM {
        return 0.0;
    }
    ((vx * ux + vy * uy) / (nv * nu)).clamp(-1.0, 1.0).acos()
}

/// Minimizes `-sim + ocm_weight * angle / pi` over tracks and detections;
/// pairs below the association threshold stay unmatched.
pub fn associate(tracks: &[TrackState], detections: &[Detection], cfg: &TrackerConfig) -> Association {
    let cols = detections.len();
    let mut sim = vec![0.0; tracks.len() * cols];
    let mut cost = vec![0.0; tracks.len() * cols];
    for (i, tr) in tracks.iter().enumerate() {
        let pred = tr.bbox();
        for (j, d) in detections.iter().enumerate() {
            let s = cfg.similarity.eval(&pred, &d.bbox, cfg.mean_size);
            sim[i * cols + j] = s;
            cost[i * cols + j] = if s >= cfg.assoc_threshold {
                -s + cfg.ocm_weight * direction_gap(tr, &d.bbox) / std::f64::consts::PI
            } else {
                INELIGIBLE_COST
            };
        }
    }
    let assignment = solve_min(tracks.len(), cols, |i, j| cost[i * cols + j]);
    let mut out = Association::default();
    let mut det_used = vec![false; cols];
    for (i, a) in assignment.into_iter().enumerate() {
        match a {
            Some(j) if sim[i * cols + j] >= cfg.assoc_threshold => {
                det_used[j] = true;
                out.matches.push((i, j));
            }
            _ => out.unmatched_tracks.push(i),
        }
    }
    out.unmatched_detections = (0..cols).filter(|&j| !det_used[j]).collect();
    out
}

fn lerp_box(a: &BoundingBox, b: &BoundingBox, t: f64) -> BoundingBox {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let l = |x: f64, y: f64| x + (y - x) * t;
    BoundingBox::from_center(l(ax, bx), l(ay, by), l(a.width(), b.width()), l(a.height(), b.height()))
        .expect("interpolated box")
}

/// Incorporates a matched detection: EMA velocity, gap re-update when the
/// track missed frames, then the Kalman measurement update.
pub fn update(track: &mut TrackState, det: &Detection, cfg: &TrackerConfig) {
    let last = track.last_observation;
    let dt = det.frame.saturating_sub(last.frame).max(1);
    let (ox, oy) = last.bbox.center();
    let (nx, ny) = det.bbox.center();
    let v_obs = ((nx - ox) / dt as f64, (ny - oy) / dt as f64);
    track.ema_velocity = if track.velocity_seen {
        let l = cfg.ema_lambda;
        (
            l * track.ema_velocity.0 + (1.0 - l) * v_obs.0,
            l * track.ema_velocity.1 + (1.0 - l) * v_obs.1,
        )
    } else {
        v_obs
    };
    track.velocity_seen = true;

    if track.time_since_update > 1 && dt > 1 {
        let mut k = track.checkpoint;
        for step in 1..dt {
            k.predict();
            k.update(&lerp_box(&last.bbox, &det.bbox, step as f64 / dt as f64));
        }
        k.predict();
        track.kalman = k;
    }
    track.kalman.update(&det.bbox);
    track.checkpoint = track.kalman;
    track.last_observation = Observation {
        bbox: det.bbox,
        frame: det.frame,
    };
    track.hits += 1;
    track.time_since_update = 0;
}

/// Per-sequence tracker. Frames must be fed in increasing order.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<TrackState>,
    next_id: u32,
    last_frame: Option<usize>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    /// Processes one frame and returns confirmed tracks updated in it, with
    /// the associated detection box and the track id.
    pub fn step(
        &mut self,
        frame: usize,
        detections: &[Detection],
        affine: Option<&AffineTransform>,
    ) -> Result<Vec<Detection>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::FrameOrder {
                    last: last + 1,
                    got: frame + 1,
                });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::Validation(format!(
                "detection for frame {} passed with frame {}",
                d.frame + 1,
                frame + 1
            )));
        }
        let elapsed = self.last_frame.map_or(1, |l| frame - l);
        self.last_frame = Some(frame);

        for tr in &mut self.tracks {
            for _ in 0..elapsed {
                predict(tr);
            }
        }
        if let Some(t) = affine {
            affine_compensate(&mut self.tracks, t);
        }
        let assoc = associate(&self.tracks, detections, &self.cfg);
        for &(i, j) in &assoc.matches {
            update(&mut self.tracks[i], &detections[j], &self.cfg);
        }
        for &j in &assoc.unmatched_detections {
            self.tracks.push(TrackState::new(self.next_id, &detections[j]));
            self.next_id += 1;
        }
        let max_age = self.cfg.max_age;
        self.tracks.retain(|t| t.time_since_update <= max_age);

        let mut out = Vec::new();
        for tr in &mut self.tracks {
            if tr.hits >= self.cfg.min_hits {
                tr.confirmed = true;
            }
            if tr.confirmed && tr.time_since_update == 0 {
                out.push(Detection {
                    frame,
                    bbox: tr.last_observation.bbox,
                    confidence: 1.0,
                    track_id: Some(tr.id),
                    class_id: crate::data_io::BIRD_CLASS,
                });
            }
        }
        out.sort_by_key(|d| d.track_id);
        Ok(out)
    }
}

/// Runs a fresh tracker over `frame_count` frames of raw detections.
pub fn track_sequence(
    detections: &[Detection],
    frame_count: usize,
    affines: &AffineSchedule,
    cfg: &TrackerConfig,
) -> Result<Vec<Detection>> {
    let mut dets = detections.to_vec();
    dets.sort_by(crate::data_io::canonical_cmp);
    if let Some(d) = dets.iter().find(|d| d.frame >= frame_count) {
        return Err(Error::Validation(format!(
            "detection in frame {} beyond frame count {frame_count}",
            d.frame + 1
        )));
    }
    let index = FrameIndex::new(&dets, frame_count);
    let mut tracker = Tracker::new(*cfg)?;
    let mut out = Vec::new();
    for f in 0..frame_count {
        let t = affines.get(f);
        let t = (!t.is_identity()).then_some(t);
        out.extend(tracker.step(f, &dets[index.range(f)], t.as_ref())?);
    }
    Ok(out)
}
