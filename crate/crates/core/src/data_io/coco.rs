//! COCO-style video annotations.
//!
//! ```json
//! {
//!   "videos": [{"id": 1, "name": "seq", "frame_count": 100}],
//!   "images": [{"id": 10, "video_id": 1, "frame_index": 1}],
//!   "annotations": [{"image_id": 10, "bbox": [x, y, w, h], "track_id": 7, "category_id": 1}]
//! }
//! ```
//!
//! `frame_index` is 1-based. Prediction documents use the same schema with an
//! optional per-annotation `score` (default 1).

use std::collections::{HashMap, HashSet};

use serde::Deserialize;

use super::{Detection, SequencePair, BIRD_CLASS};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

#[derive(Debug, Deserialize)]
struct CocoDoc {
    videos: Vec<CocoVideo>,
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
}

#[derive(Debug, Deserialize)]
struct CocoVideo {
    id: i64,
    name: String,
    frame_count: usize,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: i64,
    video_id: i64,
    frame_index: usize,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    image_id: i64,
    bbox: [f64; 4],
    track_id: u32,
    #[serde(default = "default_category")]
    category_id: i32,
    #[serde(default = "default_score")]
    score: f64,
}

fn default_category() -> i32 {
    BIRD_CLASS
}

fn default_score() -> f64 {
    1.0
}

/// Tracks of one video from a COCO document.
#[derive(Debug, Clone)]
pub struct CocoVideoTracks {
    pub name: String,
    pub frame_count: usize,
    pub detections: Vec<Detection>,
}

/// Parses a document into per-video tracked detections, in video order.
pub fn parse_coco_vid_tracks(json: &str) -> Result<Vec<CocoVideoTracks>> {
    let doc: CocoDoc = serde_json::from_str(json)?;

    let mut videos: Vec<CocoVideoTracks> = Vec::with_capacity(doc.videos.len());
    let mut video_slot = HashMap::new();
    for v in &doc.videos {
        if v.frame_count == 0 {
            return Err(Error::Validation(format!("video `{}` has frame_count 0", v.name)));
        }
        if video_slot.insert(v.id, videos.len()).is_some() {
            return Err(Error::Validation(format!("duplicate video id {}", v.id)));
        }
        videos.push(CocoVideoTracks {
            name: v.name.clone(),
            frame_count: v.frame_count,
            detections: Vec::new(),
        });
    }

    // image id -> (video slot, 0-based frame)
    let mut images = HashMap::with_capacity(doc.images.len());
    for im in &doc.images {
        let slot = *video_slot.get(&im.video_id).ok_or(Error::UnknownReference {
            kind: "video",
            id: im.video_id,
        })?;
        let fc = videos[slot].frame_count;
        if im.frame_index < 1 || im.frame_index > fc {
            return Err(Error::Validation(format!(
                "image {} has frame_index {} outside 1..={fc}",
                im.id, im.frame_index
            )));
        }
        if images.insert(im.id, (slot, im.frame_index - 1)).is_some() {
            return Err(Error::Validation(format!("duplicate image id {}", im.id)));
        }
    }

    let mut seen = HashSet::new();
    for ann in &doc.annotations {
        let &(slot, frame) = images.get(&ann.image_id).ok_or(Error::UnknownReference {
            kind: "image",
            id: ann.image_id,
        })?;
        if !seen.insert((slot, frame, ann.track_id)) {
            return Err(Error::DuplicateTrackFrame {
                sequence: videos[slot].name.clone(),
                frame: frame + 1,
                track_id: ann.track_id,
            });
        }
        let [x, y, w, h] = ann.bbox;
        let det = Detection {
            frame,
            bbox: BoundingBox::new(x, y, w, h)?,
            confidence: ann.score,
            track_id: Some(ann.track_id),
            class_id: ann.category_id,
        };
        det.validate()?;
        videos[slot].detections.push(det);
    }
    Ok(videos)
}

/// Parses a ground-truth document into per-video sequences (prediction side
/// left empty).
pub fn parse_coco_vid(json: &str) -> Result<Vec<SequencePair>> {
    parse_coco_vid_tracks(json)?
        .into_iter()
        .map(|v| SequencePair::new(v.name, v.frame_count, v.detections, Vec::new()))
        .collect()
}
