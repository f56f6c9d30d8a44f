//! Multi-detector fusion and output post-processing.

use std::collections::BTreeMap;

use crate::data_io::{canonical_cmp, Detection};
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A box with its detector confidence.
pub type ScoredBox = (BoundingBox, f64);

struct Cluster {
    members: Vec<(ScoredBox, f64)>,
    fused: ScoredBox,
}

impl Cluster {
    fn refuse(&mut self) {
        let total_w: f64 = self.members.iter().map(|(_, w)| w).sum();
        let mass: f64 = self.members.iter().map(|((_, c), w)| w * c).sum();
        let n = self.members.len() as f64;
        let mut corners = [0.0; 4];
        for ((b, c), w) in &self.members {
            let k = if mass > 0.0 { w * c / mass } else { 1.0 / n };
            for (acc, v) in corners.iter_mut().zip([b.left(), b.top(), b.right(), b.bottom()]) {
                *acc += k * v;
            }
        }
        let conf = if total_w > 0.0 { mass / total_w } else { 0.0 };
        let [x0, y0, x1, y1] = corners;
        let bbox = BoundingBox::from_corners(x0, y0, x1, y1).expect("convex combination of boxes");
        self.fused = (bbox, conf);
    }
}

/// Weighted boxes fusion across detectors.
///
/// Boxes are visited by descending `weight * confidence` and join the cluster
/// whose running fused box overlaps best with `IoU >= cluster_iou`.
pub fn wbf(box_lists: &[Vec<ScoredBox>], weights: &[f64], cluster_iou: f64) -> Result<Vec<ScoredBox>> {
    if weights.len() != box_lists.len() {
        return Err(Error::Validation(format!(
            "{} weights for {} detectors",
            weights.len(),
            box_lists.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL || weights.iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(Error::WeightSum(sum));
    }
    let mut all: Vec<(ScoredBox, f64)> = box_lists
        .iter()
        .zip(weights)
        .flat_map(|(list, &w)| list.iter().map(move |&sb| (sb, w)))
        .collect();
    all.sort_by(|a, b| (b.1 * b.0 .1).total_cmp(&(a.1 * a.0 .1)));

    let mut clusters: Vec<Cluster> = Vec::new();
    for item in all {
        let best = clusters
            .iter()
            .enumerate()
            .map(|(i, c)| (i, iou(&c.fused.0, &item.0 .0)))
            .filter(|&(_, v)| v >= cluster_iou)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((i, _)) => {
                clusters[i].members.push(item);
                clusters[i].refuse();
            }
            None => {
                let mut c = Cluster {
                    members: vec![item],
                    fused: item.0,
                };
                c.refuse();
                clusters.push(c);
            }
        }
    }
    Ok(clusters.into_iter().map(|c| c.fused).collect())
}

/// Per-frame weights `w_i = s_i / sum(s)` from each detector's mean
/// confidence; a detector without detections has `s_i = 0`.
pub fn adaptive_wbf_weights(confidences: &[Vec<f64>]) -> Result<Vec<f64>> {
    if confidences.iter().all(Vec::is_empty) {
        return Err(Error::NoDetections);
    }
    let means: Vec<f64> = confidences
        .iter()
        .map(|c| {
            if c.is_empty() {
                0.0
            } else {
                c.iter().sum::<f64>() / c.len() as f64
            }
        })
        .collect();
    let total: f64 = means.iter().sum();
    if total <= 0.0 {
        let active = confidences.iter().filter(|c| !c.is_empty()).count() as f64;
        return Ok(confidences
            .iter()
            .map(|c| if c.is_empty() { 0.0 } else { 1.0 / active })
            .collect());
    }
    Ok(means.iter().map(|m| m / total).collect())
}

/// Keeps primary detections that overlap (`IoU > 0`) any secondary detection.
pub fn intersection_ensemble(primary: &[Detection], secondary: &[Detection]) -> Vec<Detection> {
    primary
        .iter()
        .filter(|p| secondary.iter().any(|s| iou(&p.bbox, &s.bbox) > 0.0))
        .copied()
        .collect()
}

/// Fills per-track gaps of at most `max_gap` frames by linear interpolation
/// of `(left, top, width, height)` and confidence. Untracked detections pass
/// through unchanged.
pub fn interpolate_tracks(outputs: &[Detection], max_gap: usize) -> Vec<Detection> {
    let mut by_id: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    let mut out = Vec::with_capacity(outputs.len());
    for d in outputs {
        match d.track_id {
            Some(id) => by_id.entry(id).or_default().push(*d),
            None => out.push(*d),
        }
    }
    for (_, mut track) in by_id {
        track.sort_by_key(|d| d.frame);
        for pair in track.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            out.push(*a);
            let gap = b.frame - a.frame - 1;
            if gap == 0 || gap > max_gap {
                continue;
            }
            for k in 1..=gap {
                let t = k as f64 / (gap + 1) as f64;
                let lerp = |x: f64, y: f64| x + (y - x) * t;
                let bbox = BoundingBox::new(
                    lerp(a.bbox.left(), b.bbox.left()),
                    lerp(a.bbox.top(), b.bbox.top()),
                    lerp(a.bbox.width(), b.bbox.width()),
                    lerp(a.bbox.height(), b.bbox.height()),
                )
                .expect("interpolated box");
                out.push(Detection {
                    frame: a.frame + k,
                    bbox,
                    confidence: lerp(a.confidence, b.confidence),
                    ..*a
                });
            }
        }
        if let Some(last) = track.last() {
            out.push(*last);
        }
    }
    out.sort_by(canonical_cmp);
    out
}
