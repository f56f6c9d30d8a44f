//! Tracking data model and file formats.
//!
//! Frame indices are 0-based in memory. Every external format here is 1-based
//! and the conversion happens only inside the parsers and writers.

mod affine;
mod coco;
mod mot;

pub use affine::{load_affines, AffineSchedule, AffineTransform};
pub use coco::{parse_coco_vid, parse_coco_vid_tracks, CocoVideoTracks};
pub use mot::{parse_mot, parse_mot_gt, read_mot_dir, write_mot, MotSequenceFile};

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// A single per-frame observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// 0-based frame index.
    pub frame: usize,
    pub bbox: BoundingBox,
    /// Detector confidence in `[0, 1]`; ground truth uses 1.
    pub confidence: f64,
    pub track_id: Option<u32>,
    pub class_id: i32,
}

pub const BIRD_CLASS: i32 = 1;

impl Detection {
    pub fn new(frame: usize, bbox: BoundingBox, confidence: f64, track_id: Option<u32>) -> Result<Self> {
        let det = Self {
            frame,
            bbox,
            confidence,
            track_id,
            class_id: BIRD_CLASS,
        };
        det.validate()?;
        Ok(det)
    }

    /// Ground-truth style detection: confidence 1 and a track id.
    pub fn tracked(frame: usize, track_id: u32, bbox: BoundingBox) -> Self {
        Self {
            frame,
            bbox,
            confidence: 1.0,
            track_id: Some(track_id),
            class_id: BIRD_CLASS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Validation(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        if self.track_id == Some(0) {
            return Err(Error::Validation("track id must be >= 1".into()));
        }
        Ok(())
    }
}

/// Total order used to canonicalize detection lists.
pub fn canonical_cmp(a: &Detection, b: &Detection) -> Ordering {
    let id = |d: &Detection| d.track_id.map_or(-1i64, i64::from);
    a.frame
        .cmp(&b.frame)
        .then_with(|| id(a).cmp(&id(b)))
        .then_with(|| a.bbox.left().total_cmp(&b.bbox.left()))
        .then_with(|| a.bbox.top().total_cmp(&b.bbox.top()))
        .then_with(|| a.bbox.width().total_cmp(&b.bbox.width()))
        .then_with(|| a.bbox.height().total_cmp(&b.bbox.height()))
        .then_with(|| a.confidence.total_cmp(&b.confidence))
}

/// Aligned ground truth and prediction for one video.
///
/// Both sides are kept sorted by `(frame, track_id, box)` so that any
/// permutation of the input lines produces the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePair {
    name: String,
    frame_count: usize,
    gt: Vec<Detection>,
    pred: Vec<Detection>,
}

impl SequencePair {
    pub fn new(
        name: impl Into<String>,
        frame_count: usize,
        mut gt: Vec<Detection>,
        mut pred: Vec<Detection>,
    ) -> Result<Self> {
        let name = name.into();
        if frame_count == 0 {
            return Err(Error::Validation(format!("sequence `{name}` has no frames")));
        }
        gt.sort_by(canonical_cmp);
        pred.sort_by(canonical_cmp);
        check_side(&name, frame_count, &gt, true)?;
        check_side(&name, frame_count, &pred, false)?;
        Ok(Self {
            name,
            frame_count,
            gt,
            pred,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn gt(&self) -> &[Detection] {
        &self.gt
    }

    pub fn pred(&self) -> &[Detection] {
        &self.pred
    }

    pub fn with_pred(self, pred: Vec<Detection>) -> Result<Self> {
        Self::new(self.name, self.frame_count, self.gt, pred)
    }

    /// Evaluation needs an identity on every prediction.
    pub fn check_pred_ids(&self) -> Result<()> {
        match self.pred.iter().find(|d| d.track_id.is_none()) {
            Some(d) => Err(Error::Validation(format!(
                "sequence `{}`: prediction in frame {} has no track id",
                self.name,
                d.frame + 1
            ))),
            None => Ok(()),
        }
    }
}

fn check_side(name: &str, frame_count: usize, dets: &[Detection], require_ids: bool) -> Result<()> {
    let mut seen = HashSet::new();
    for d in dets {
        d.validate()?;
        if d.frame >= frame_count {
            return Err(Error::Validation(format!(
                "sequence `{name}`: frame {} beyond frame count {frame_count}",
                d.frame + 1
            )));
        }
        match d.track_id {
            Some(id) => {
                if !seen.insert((d.frame, id)) {
                    return Err(Error::DuplicateTrackFrame {
                        sequence: name.to_string(),
                        frame: d.frame + 1,
                        track_id: id,
                    });
                }
            }
            None if require_ids => {
                return Err(Error::Validation(format!(
                    "sequence `{name}`: ground truth in frame {} has no track id",
                    d.frame + 1
                )));
            }
            None => {}
        }
    }
    Ok(())
}

/// Detections of one side, with an optional known frame count.
pub type NamedDetections = BTreeMap<String, (Vec<Detection>, Option<usize>)>;

/// Pairs ground truth and predictions by sequence name.
///
/// Every gt sequence must have a prediction entry. Prediction sequences
/// without gt are reported in the returned list of names.
pub fn pair_sequences(gt: NamedDetections, mut pred: NamedDetections) -> Result<(Vec<SequencePair>, Vec<String>)> {
    let mut out = Vec::with_capacity(gt.len());
    for (name, (gt_dets, gt_frames)) in gt {
        let Some((pred_dets, pred_frames)) = pred.remove(&name) else {
            return Err(Error::Pairing(format!("no prediction for sequence `{name}`")));
        };
        let observed = gt_dets
            .iter()
            .chain(pred_dets.iter())
            .map(|d| d.frame + 1)
            .max()
            .unwrap_or(1);
        let frame_count = gt_frames.or(pred_frames).unwrap_or(observed);
        out.push(SequencePair::new(name, frame_count, gt_dets, pred_dets)?);
    }
    Ok((out, pred.into_keys().collect()))
}

/// Per-frame ranges into a frame-sorted detection slice.
#[derive(Debug, Clone)]
pub struct FrameIndex {
    starts: Vec<usize>,
}

impl FrameIndex {
    pub fn new(dets: &[Detection], frame_count: usize) -> Self {
        debug_assert!(dets.windows(2).all(|w| w[0].frame <= w[1].frame));
        let mut starts = vec![0usize; frame_count + 1];
        for d in dets {
            starts[d.frame + 1] += 1;
        }
        for f in 0..frame_count {
            starts[f + 1] += starts[f];
        }
        Self { starts }
    }

    pub fn range(&self, frame: usize) -> std::ops::Range<usize> {
        self.starts[frame]..self.starts[frame + 1]
    }
}
