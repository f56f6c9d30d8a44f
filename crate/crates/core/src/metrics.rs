//! SO-HOTA / HOTA suites, CLEAR metrics and IDF1.
//!
//! Every score is computed from counts. Pooling adds counts across sequences
//! before any ratio is taken, so a dataset score is never an average of
//! per-sequence ratios.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{FrameIndex, SequencePair};
use crate::error::{Error, Result};
use crate::geometry::{iou, MeanObjectSize, SimilarityMeasure};
use crate::hungarian::{solve_min, Lex3};
use crate::matching::{accumulate, AlphaCounts, MatchAccumulator, ThresholdAlpha, TrackKey};

pub const DEFAULT_CLEAR_THRESHOLD: f64 = 0.5;
const MOSTLY_TRACKED: f64 = 0.8;
const MOSTLY_LOST: f64 = 0.2;

/// Scores at a single threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaScores {
    pub alpha: f64,
    pub deta: f64,
    pub assa: f64,
    pub detre: f64,
    pub detpr: f64,
    pub hota: f64,
}

fn is_vacuous(c: &AlphaCounts) -> bool {
    c.tp == 0 && c.fn_ == 0 && c.fp == 0
}

/// `tp / (tp + fn + fp)`; 1 when there is nothing to detect and nothing
/// predicted.
pub fn so_deta(c: &AlphaCounts) -> f64 {
    if is_vacuous(c) {
        return 1.0;
    }
    c.tp as f64 / (c.tp + c.fn_ + c.fp) as f64
}

/// Mean association accuracy over true positives, in grouped form: every TP
/// of a pair `(g, p)` shares `A = n / (|g| + |p| - n)` with `n` the pair's
/// co-match count.
pub fn so_assa(
    c: &AlphaCounts,
    gt_track_size: &BTreeMap<TrackKey, u64>,
    pred_track_size: &BTreeMap<TrackKey, u64>,
) -> f64 {
    if is_vacuous(c) {
        return 1.0;
    }
    if c.tp == 0 {
        return 0.0;
    }
    let sum: f64 = c
        .pair_tp
        .iter()
        .map(|(k, &n)| {
            let g = gt_track_size[&k.gt_key()];
            let p = pred_track_size[&k.pred_key()];
            let n = n as f64;
            n * n / (g as f64 + p as f64 - n)
        })
        .sum();
    sum / c.tp as f64
}

fn ratio_or(num: u64, den: u64, vacuous: bool) -> f64 {
    match den {
        0 if vacuous => 1.0,
        0 => 0.0,
        _ => num as f64 / den as f64,
    }
}

pub fn alpha_scores(acc: &MatchAccumulator) -> Vec<AlphaScores> {
    acc.alphas
        .iter()
        .zip(&acc.per_alpha)
        .map(|(alpha, c)| {
            let vacuous = is_vacuous(c);
            let deta = so_deta(c);
            let assa = so_assa(c, &acc.gt_track_size, &acc.pred_track_size);
            AlphaScores {
                alpha: alpha.get(),
                deta,
                assa,
                detre: ratio_or(c.tp, c.tp + c.fn_, vacuous),
                detpr: ratio_or(c.tp, c.tp + c.fp, vacuous),
                hota: (deta * assa).sqrt(),
            }
        })
        .collect()
}

/// Threshold-averaged HOTA-family scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotaSummary {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub detre: f64,
    pub detpr: f64,
    pub per_alpha: Vec<AlphaScores>,
    pub vacuous: bool,
}

pub fn summarize(acc: &MatchAccumulator) -> HotaSummary {
    let per_alpha = alpha_scores(acc);
    let n = per_alpha.len().max(1) as f64;
    let mean = |f: fn(&AlphaScores) -> f64| per_alpha.iter().map(f).sum::<f64>() / n;
    HotaSummary {
        hota: mean(|a| a.hota),
        deta: mean(|a| a.deta),
        assa: mean(|a| a.assa),
        detre: mean(|a| a.detre),
        detpr: mean(|a| a.detpr),
        vacuous: acc.per_alpha.iter().all(is_vacuous),
        per_alpha,
    }
}

/// Pooled and per-sequence summaries of one HOTA-family suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub pooled: HotaSummary,
    pub per_sequence: BTreeMap<String, HotaSummary>,
}

fn run_suite(
    sequences: &[SequencePair],
    measure: SimilarityMeasure,
    s: MeanObjectSize,
    alphas: &[ThresholdAlpha],
) -> Result<SuiteReport> {
    let accs: Vec<MatchAccumulator> = sequences
        .par_iter()
        .map(|seq| accumulate(seq, measure, s, alphas))
        .collect::<Result<_>>()?;
    let mut pooled = MatchAccumulator::empty(measure, s, alphas);
    for acc in &accs {
        pooled.merge(acc)?;
    }
    Ok(SuiteReport {
        pooled: summarize(&pooled),
        per_sequence: sequences
            .iter()
            .zip(&accs)
            .map(|(seq, acc)| (seq.name().to_string(), summarize(acc)))
            .collect(),
    })
}

/// DotD-matched HOTA suite.
pub fn so_hota_suite(sequences: &[SequencePair], s: MeanObjectSize, alphas: &[ThresholdAlpha]) -> Result<SuiteReport> {
    run_suite(sequences, SimilarityMeasure::Dotd, s, alphas)
}

/// IoU stand-in for the unused mean size of IoU-matched suites.
fn unit_size() -> MeanObjectSize {
    MeanObjectSize::new(1.0).expect("1 is a valid size")
}

/// Classical IoU-matched HOTA suite.
pub fn hota_suite(sequences: &[SequencePair], alphas: &[ThresholdAlpha]) -> Result<SuiteReport> {
    run_suite(sequences, SimilarityMeasure::Iou, unit_size(), alphas)
}

/// CLEAR-style counts for one or more sequences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClearCounts {
    pub threshold: f64,
    pub gt_detections: u64,
    pub matches: u64,
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub gt_tracks: u64,
    pub mostly_tracked: u64,
    pub mostly_lost: u64,
}

impl ClearCounts {
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.threshold != other.threshold {
            return Err(Error::ConfigMismatch(format!(
                "CLEAR thresholds {} and {} differ",
                self.threshold, other.threshold
            )));
        }
        self.gt_detections += other.gt_detections;
        self.matches += other.matches;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.idsw += other.idsw;
        self.gt_tracks += other.gt_tracks;
        self.mostly_tracked += other.mostly_tracked;
        self.mostly_lost += other.mostly_lost;
        Ok(())
    }

    pub fn mota(&self) -> Result<f64> {
        if self.gt_detections == 0 {
            return Err(Error::NoGroundTruth);
        }
        Ok(1.0 - (self.fn_ + self.fp + self.idsw) as f64 / self.gt_detections as f64)
    }

    pub fn mt(&self) -> f64 {
        ratio_or(self.mostly_tracked, self.gt_tracks, false)
    }

    pub fn ml(&self) -> f64 {
        ratio_or(self.mostly_lost, self.gt_tracks, false)
    }
}

/// Frame-by-frame CLEAR matching with carry-over of the previous frame's
/// pairs that still satisfy `IoU >= threshold`.
pub fn clear_counts(seq: &SequencePair, threshold: f64) -> Result<ClearCounts> {
    seq.check_pred_ids()?;
    let frames = seq.frame_count();
    let gt_index = FrameIndex::new(seq.gt(), frames);
    let pred_index = FrameIndex::new(seq.pred(), frames);
    let id = |d: &crate::data_io::Detection| d.track_id.expect("checked");

    let mut counts = ClearCounts {
        threshold,
        ..Default::default()
    };
    let mut previous: HashMap<u32, u32> = HashMap::new();
    let mut last_match: HashMap<u32, u32> = HashMap::new();
    let mut matched_frames: HashMap<u32, u64> = HashMap::new();
    let mut track_len: BTreeMap<u32, u64> = BTreeMap::new();

    for f in 0..frames {
        let gt = &seq.gt()[gt_index.range(f)];
        let pred = &seq.pred()[pred_index.range(f)];
        for g in gt {
            *track_len.entry(id(g)).or_default() += 1;
        }
        let sim: Vec<f64> = gt
            .iter()
            .flat_map(|g| pred.iter().map(move |p| iou(&g.bbox, &p.bbox)))
            .collect();
        let cols = pred.len();
        let pred_pos: HashMap<u32, usize> = pred.iter().enumerate().map(|(j, p)| (id(p), j)).collect();

        let mut row_used = vec![false; gt.len()];
        let mut col_used = vec![false; cols];
        let mut matches = Vec::new();
        for (i, g) in gt.iter().enumerate() {
            let Some(&j) = previous.get(&id(g)).and_then(|p| pred_pos.get(p)) else {
                continue;
            };
            if !col_used[j] && sim[i * cols + j] >= threshold {
                row_used[i] = true;
                col_used[j] = true;
                matches.push((i, j));
            }
        }

        let free_rows: Vec<usize> = (0..gt.len()).filter(|&i| !row_used[i]).collect();
        let free_cols: Vec<usize> = (0..cols).filter(|&j| !col_used[j]).collect();
        let assignment = solve_min(free_rows.len(), free_cols.len(), |a, b| {
            let v = sim[free_rows[a] * cols + free_cols[b]];
            if v >= threshold {
                Lex3(-1.0, -v, 0.0)
            } else {
                Lex3(0.0, 0.0, 0.0)
            }
        });
        for (a, b) in assignment.into_iter().enumerate() {
            if let Some(b) = b {
                let (i, j) = (free_rows[a], free_cols[b]);
                if sim[i * cols + j] >= threshold {
                    matches.push((i, j));
                }
            }
        }

        previous.clear();
        for &(i, j) in &matches {
            let (g, p) = (id(&gt[i]), id(&pred[j]));
            previous.insert(g, p);
            if let Some(old) = last_match.insert(g, p) {
                if old != p {
                    counts.idsw += 1;
                }
            }
            *matched_frames.entry(g).or_default() += 1;
        }
        let m = matches.len() as u64;
        counts.matches += m;
        counts.fn_ += gt.len() as u64 - m;
        counts.fp += pred.len() as u64 - m;
        counts.gt_detections += gt.len() as u64;
    }

    for (g, len) in track_len {
        let ratio = matched_frames.get(&g).copied().unwrap_or(0) as f64 / len as f64;
        counts.gt_tracks += 1;
        if ratio >= MOSTLY_TRACKED {
            counts.mostly_tracked += 1;
        }
        if ratio <= MOSTLY_LOST {
            counts.mostly_lost += 1;
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearMetrics {
    pub mota: f64,
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub mt: f64,
    pub ml: f64,
}

/// Pooled CLEAR metrics; errors when there is no ground truth at all.
pub fn clear_metrics(sequences: &[SequencePair], iou_threshold: f64) -> Result<ClearMetrics> {
    let per_seq: Vec<ClearCounts> = sequences
        .par_iter()
        .map(|s| clear_counts(s, iou_threshold))
        .collect::<Result<_>>()?;
    let mut total = ClearCounts {
        threshold: iou_threshold,
        ..Default::default()
    };
    for c in &per_seq {
        total.merge(c)?;
    }
    Ok(ClearMetrics {
        mota: total.mota()?,
        fp: total.fp,
        fn_: total.fn_,
        idsw: total.idsw,
        mt: total.mt(),
        ml: total.ml(),
    })
}

/// Identity-measure counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityCounts {
    pub threshold: f64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

impl IdentityCounts {
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.threshold != other.threshold {
            return Err(Error::ConfigMismatch(format!(
                "IDF1 thresholds {} and {} differ",
                self.threshold, other.threshold
            )));
        }
        self.idtp += other.idtp;
        self.idfp += other.idfp;
        self.idfn += other.idfn;
        Ok(())
    }

    pub fn is_vacuous(&self) -> bool {
        self.idtp == 0 && self.idfp == 0 && self.idfn == 0
    }

    pub fn idf1(&self) -> f64 {
        if self.is_vacuous() {
            return 1.0;
        }
        2.0 * self.idtp as f64 / (2 * self.idtp + self.idfp + self.idfn) as f64
    }
}

/// Globally optimal one-to-one gt-track / pred-track assignment maximizing
/// the number of co-matched frames (`IoU >= threshold`).
pub fn identity_counts(seq: &SequencePair, threshold: f64) -> Result<IdentityCounts> {
    seq.check_pred_ids()?;
    let frames = seq.frame_count();
    let gt_index = FrameIndex::new(seq.gt(), frames);
    let pred_index = FrameIndex::new(seq.pred(), frames);
    let mut co: HashMap<(u32, u32), u64> = HashMap::new();
    for f in 0..frames {
        for g in &seq.gt()[gt_index.range(f)] {
            for p in &seq.pred()[pred_index.range(f)] {
                if iou(&g.bbox, &p.bbox) >= threshold {
                    *co.entry((g.track_id.expect("gt id"), p.track_id.expect("checked")))
                        .or_default() += 1;
                }
            }
        }
    }

    let mut gt_ids: Vec<u32> = co.keys().map(|k| k.0).collect();
    let mut pred_ids: Vec<u32> = co.keys().map(|k| k.1).collect();
    gt_ids.sort_unstable();
    gt_ids.dedup();
    pred_ids.sort_unstable();
    pred_ids.dedup();
    let assignment = solve_min(gt_ids.len(), pred_ids.len(), |i, j| {
        -(co.get(&(gt_ids[i], pred_ids[j])).copied().unwrap_or(0) as f64)
    });
    let idtp: u64 = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.and_then(|j| co.get(&(gt_ids[i], pred_ids[j]))))
        .sum();
    Ok(IdentityCounts {
        threshold,
        idtp,
        idfn: seq.gt().len() as u64 - idtp,
        idfp: seq.pred().len() as u64 - idtp,
    })
}

/// Pooled IDF1 with a vacuous flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityMetrics {
    pub idf1: f64,
    pub counts: IdentityCounts,
    pub vacuous: bool,
}

pub fn idf1(sequences: &[SequencePair], iou_threshold: f64) -> Result<IdentityMetrics> {
    let mut total = IdentityCounts {
        threshold: iou_threshold,
        ..Default::default()
    };
    for seq in sequences {
        total.merge(&identity_counts(seq, iou_threshold)?)?;
    }
    Ok(IdentityMetrics {
        idf1: total.idf1(),
        counts: total,
        vacuous: total.is_vacuous(),
    })
}

/// Which metric families to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSet {
    pub so_hota: bool,
    pub hota: bool,
    pub clear: bool,
    pub idf1: bool,
}

impl MetricSet {
    pub fn all() -> Self {
        Self {
            so_hota: true,
            hota: true,
            clear: true,
            idf1: true,
        }
    }

    pub fn none() -> Self {
        Self {
            so_hota: false,
            hota: false,
            clear: false,
            idf1: false,
        }
    }

    /// Parses names such as `so-hota`, `hota`, `clear`, `idf1`.
    pub fn parse_list<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut set = Self::none();
        for name in names {
            match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
                "so-hota" => set.so_hota = true,
                "hota" => set.hota = true,
                "clear" | "mota" => set.clear = true,
                "idf1" => set.idf1 = true,
                other => return Err(Error::Validation(format!("unknown metric `{other}`"))),
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub metrics: MetricSet,
    pub mean_size: MeanObjectSize,
    pub alphas: Vec<ThresholdAlpha>,
    pub clear_threshold: f64,
}

impl EvalConfig {
    pub fn new(metrics: MetricSet, mean_size: MeanObjectSize) -> Self {
        Self {
            metrics,
            mean_size,
            alphas: ThresholdAlpha::canonical_grid(),
            clear_threshold: DEFAULT_CLEAR_THRESHOLD,
        }
    }
}

/// Count-level evaluation state of a sequence, or of a pooled set.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEvaluation {
    pub so: Option<MatchAccumulator>,
    pub hota: Option<MatchAccumulator>,
    pub clear: Option<ClearCounts>,
    pub identity: Option<IdentityCounts>,
}

pub fn evaluate_sequence(seq: &SequencePair, cfg: &EvalConfig) -> Result<SequenceEvaluation> {
    let m = cfg.metrics;
    Ok(SequenceEvaluation {
        so: m
            .so_hota
            .then(|| accumulate(seq, SimilarityMeasure::Dotd, cfg.mean_size, &cfg.alphas))
            .transpose()?,
        hota: m
            .hota
            .then(|| accumulate(seq, SimilarityMeasure::Iou, unit_size(), &cfg.alphas))
            .transpose()?,
        clear: m.clear.then(|| clear_counts(seq, cfg.clear_threshold)).transpose()?,
        identity: m.idf1.then(|| identity_counts(seq, cfg.clear_threshold)).transpose()?,
    })
}

fn merge_opt<T: Clone>(
    into: &mut Option<T>,
    from: &Option<T>,
    merge: impl FnOnce(&mut T, &T) -> Result<()>,
) -> Result<()> {
    match (into.as_mut(), from) {
        (Some(a), Some(b)) => merge(a, b),
        (None, None) => Ok(()),
        _ => Err(Error::ConfigMismatch(
            "evaluations computed different metric sets".into(),
        )),
    }
}

/// Adds the counts of several evaluations. Configurations must agree.
pub fn pool(evals: &[SequenceEvaluation]) -> Result<SequenceEvaluation> {
    let Some((first, rest)) = evals.split_first() else {
        return Err(Error::Validation("nothing to pool".into()));
    };
    let mut out = first.clone();
    for e in rest {
        merge_opt(&mut out.so, &e.so, |a, b| a.merge(b))?;
        merge_opt(&mut out.hota, &e.hota, |a, b| a.merge(b))?;
        merge_opt(&mut out.clear, &e.clear, |a, b| a.merge(b))?;
        merge_opt(&mut out.identity, &e.identity, |a, b| a.merge(b))?;
    }
    Ok(out)
}

/// Flat score record. Absent families are omitted from serialization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub so_hota: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub so_deta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub so_assa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub so_detre: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub so_detpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hota: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mota: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idf1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ml: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idsw: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp: Option<u64>,
    #[serde(rename = "fn", skip_serializing_if = "Option::is_none")]
    pub fn_: Option<u64>,
    /// Warnings such as `vacuous_so_hota` or `mota_undefined`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl MetricReport {
    /// `(key, value)` pairs in schema order, for tabular output.
    pub fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        let count = |v: Option<u64>| v.map(|x| x as f64);
        vec![
            ("so_hota", self.so_hota),
            ("so_deta", self.so_deta),
            ("so_assa", self.so_assa),
            ("so_detre", self.so_detre),
            ("so_detpr", self.so_detpr),
            ("hota", self.hota),
            ("deta", self.deta),
            ("assa", self.assa),
            ("mota", self.mota),
            ("idf1", self.idf1),
            ("mt", self.mt),
            ("ml", self.ml),
            ("idsw", count(self.idsw)),
            ("fp", count(self.fp)),
            ("fn", count(self.fn_)),
        ]
    }
}

impl SequenceEvaluation {
    pub fn report(&self) -> MetricReport {
        let mut r = MetricReport::default();
        if let Some(acc) = &self.so {
            let s = summarize(acc);
            r.so_hota = Some(s.hota);
            r.so_deta = Some(s.deta);
            r.so_assa = Some(s.assa);
            r.so_detre = Some(s.detre);
            r.so_detpr = Some(s.detpr);
            if s.vacuous {
                r.flags.push("vacuous_so_hota".into());
            }
        }
        if let Some(acc) = &self.hota {
            let s = summarize(acc);
            r.hota = Some(s.hota);
            r.deta = Some(s.deta);
            r.assa = Some(s.assa);
            if s.vacuous {
                r.flags.push("vacuous_hota".into());
            }
        }
        if let Some(c) = &self.clear {
            match c.mota() {
                Ok(m) => r.mota = Some(m),
                Err(_) => r.flags.push("mota_undefined".into()),
            }
            r.mt = Some(c.mt());
            r.ml = Some(c.ml());
            r.idsw = Some(c.idsw);
            r.fp = Some(c.fp);
            r.fn_ = Some(c.fn_);
        }
        if let Some(c) = &self.identity {
            r.idf1 = Some(c.idf1());
            if c.is_vacuous() {
                r.flags.push("vacuous_idf1".into());
            }
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub measure: String,
    pub thresholds: Vec<f64>,
    pub s_used: f64,
}

/// Dataset-level report: pooled scores, per-sequence scores, configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub pooled: MetricReport,
    pub per_sequence: BTreeMap<String, MetricReport>,
    pub config: ReportConfig,
}

impl DatasetReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per sequence plus a `__pooled__` row. Columns are the keys
    /// present in the pooled report.
    pub fn to_csv(&self) -> String {
        let keys: Vec<&str> = self
            .pooled
            .entries()
            .into_iter()
            .filter(|(_, v)| v.is_some())
            .map(|(k, _)| k)
            .collect();
        let mut out = String::from("sequence");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        let rows = self
            .per_sequence
            .iter()
            .map(|(n, r)| (n.as_str(), r))
            .chain(std::iter::once(("__pooled__", &self.pooled)));
        for (name, report) in rows {
            out.push_str(name);
            let values: HashMap<_, _> = report.entries().into_iter().collect();
            for k in &keys {
                out.push(',');
                if let Some(Some(v)) = values.get(k) {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates every sequence (in parallel) and pools the counts.
pub fn evaluate_dataset(sequences: &[SequencePair], cfg: &EvalConfig) -> Result<DatasetReport> {
    let evals: Vec<SequenceEvaluation> = sequences
        .par_iter()
        .map(|seq| evaluate_sequence(seq, cfg))
        .collect::<Result<_>>()?;
    let pooled = if evals.is_empty() {
        MetricReport::default()
    } else {
        pool(&evals)?.report()
    };
    let per_sequence = sequences
        .iter()
        .zip(&evals)
        .map(|(seq, e)| (seq.name().to_string(), e.report()))
        .collect();
    Ok(DatasetReport {
        pooled,
        per_sequence,
        config: ReportConfig {
            measure: SimilarityMeasure::Dotd.name().to_string(),
            thresholds: cfg.alphas.iter().map(|a| a.get()).collect(),
            s_used: cfg.mean_size.get(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::Detection;
    use crate::geometry::BoundingBox;

    fn det(frame: usize, id: u32, l: f64, t: f64) -> Detection {
        Detection::tracked(frame, id, BoundingBox::new(l, t, 16.0, 16.0).unwrap())
    }

    fn s16() -> MeanObjectSize {
        MeanObjectSize::new(16.0).unwrap()
    }

    fn grid() -> Vec<ThresholdAlpha> {
        ThresholdAlpha::canonical_grid()
    }

    fn worked() -> SequencePair {
        let gt: Vec<_> = (0..4).map(|f| det(f, 1, 10., 10.)).collect();
        let pred = gt[..3].to_vec();
        SequencePair::new("worked", 4, gt, pred).unwrap()
    }

    #[test]
    fn worked_scenario_suite() {
        let r = so_hota_suite(&[worked()], s16(), &grid()).unwrap();
        for a in &r.pooled.per_alpha {
            assert!((a.deta - 0.75).abs() < 1e-12);
            assert!((a.assa - 0.75).abs() < 1e-12);
        }
        assert!((r.pooled.hota - 0.75).abs() < 1e-12);
        assert!((r.pooled.detre - 0.75).abs() < 1e-12);
        assert_eq!(r.pooled.detpr, 1.0);
    }

    #[test]
    fn deta_and_assa_edge_cases() {
        let c = AlphaCounts::default();
        assert_eq!(so_deta(&c), 1.0);
        let c = AlphaCounts {
            tp: 0,
            fn_: 4,
            fp: 0,
            pair_tp: BTreeMap::new(),
        };
        assert_eq!(so_deta(&c), 0.0);
        assert_eq!(so_assa(&c, &BTreeMap::new(), &BTreeMap::new()), 0.0);
    }

    #[test]
    fn split_track_assa_is_half() {
        // one gt track of 8 frames, covered by pred 1 (frames 0..4) and pred 2 (4..8)
        let gt: Vec<_> = (0..8).map(|f| det(f, 1, 0., 0.)).collect();
        let pred: Vec<_> = (0..8).map(|f| det(f, if f < 4 { 1 } else { 2 }, 0., 0.)).collect();
        let seq = SequencePair::new("split", 8, gt, pred).unwrap();
        let r = so_hota_suite(&[seq], s16(), &grid()).unwrap();
        assert!((r.pooled.assa - 0.5).abs() < 1e-12);
        assert_eq!(r.pooled.deta, 1.0);
    }

    #[test]
    fn geometric_mean_identity() {
        let c = AlphaCounts {
            tp: 1,
            fn_: 3,
            fp: 0,
            pair_tp: BTreeMap::new(),
        };
        assert_eq!(so_deta(&c), 0.25);
        assert_eq!((0.25f64 * 1.0).sqrt(), 0.5);
    }

    #[test]
    fn hota_examples() {
        let gt: Vec<_> = (0..5).map(|f| det(f, 1, 0., 0.)).collect();
        let perfect = SequencePair::new("p", 5, gt.clone(), gt.clone()).unwrap();
        assert_eq!(hota_suite(&[perfect], &grid()).unwrap().pooled.hota, 1.0);
        let far: Vec<_> = gt.iter().map(|d| det(d.frame, 1, 40., 0.)).collect();
        let shifted = SequencePair::new("f", 5, gt.clone(), far).unwrap();
        assert_eq!(
            hota_suite(std::slice::from_ref(&shifted), &grid()).unwrap().pooled.hota,
            0.0
        );
        assert!(so_hota_suite(&[shifted], s16(), &grid()).unwrap().pooled.hota > 0.0);
        let half: Vec<_> = gt.iter().map(|d| det(d.frame, 1, 0., 8.)).collect();
        let seq = SequencePair::new("h", 5, gt, half).unwrap();
        let r = hota_suite(&[seq], &grid()).unwrap();
        assert!((r.pooled.hota - 6.0 / 19.0).abs() < 1e-9);
    }

    /// gt A and B over 5 frames; B's prediction misses frames 2-3 and returns
    /// with a new id; one spurious box in frame 0.
    pub(crate) fn ten_two_one_one() -> SequencePair {
        let gt: Vec<_> = (0..5).flat_map(|f| [det(f, 1, 0., 0.), det(f, 2, 100., 0.)]).collect();
        let mut pred: Vec<_> = (0..5).map(|f| det(f, 1, 0., 0.)).collect();
        pred.push(det(0, 2, 100., 0.));
        pred.push(det(1, 2, 100., 0.));
        pred.push(det(4, 3, 100., 0.));
        pred.push(det(0, 9, 300., 300.));
        SequencePair::new("clear", 5, gt, pred).unwrap()
    }

    #[test]
    fn clear_examples() {
        let gt: Vec<_> = (0..5).flat_map(|f| [det(f, 1, 0., 0.), det(f, 2, 100., 0.)]).collect();
        let perfect = SequencePair::new("p", 5, gt.clone(), gt).unwrap();
        let c = clear_metrics(&[perfect], 0.5).unwrap();
        assert_eq!((c.mota, c.idsw, c.mt, c.ml), (1.0, 0, 1.0, 0.0));

        let c = clear_metrics(&[ten_two_one_one()], 0.5).unwrap();
        assert_eq!((c.fn_, c.fp, c.idsw), (2, 1, 1));
        assert!((c.mota - 0.6).abs() < 1e-12);
        // track 2 matched in 3 of 5 frames: neither mostly tracked nor lost
        assert_eq!((c.mt, c.ml), (0.5, 0.0));

        let empty = SequencePair::new("e", 3, vec![], vec![det(0, 1, 0., 0.)]).unwrap();
        assert!(matches!(clear_metrics(&[empty], 0.5), Err(Error::NoGroundTruth)));
    }

    #[test]
    fn clear_carries_over_previous_match() {
        // pred 7 keeps gt 1 although pred 8 overlaps gt 1 slightly better in frame 1
        let gt = vec![det(0, 1, 0., 0.), det(1, 1, 0., 0.)];
        let pred = vec![det(0, 7, 0., 0.), det(1, 7, 2., 0.), det(1, 8, 1., 0.)];
        let seq = SequencePair::new("c", 2, gt, pred).unwrap();
        let c = clear_counts(&seq, 0.5).unwrap();
        assert_eq!((c.idsw, c.fp), (0, 1));
    }

    #[test]
    fn idf1_examples() {
        let gt: Vec<_> = (0..4).map(|f| det(f, 1, 0., 0.)).collect();
        let perfect = SequencePair::new("p", 4, gt.clone(), gt.clone()).unwrap();
        assert_eq!(idf1(&[perfect], 0.5).unwrap().idf1, 1.0);
        let none = SequencePair::new("n", 4, gt.clone(), vec![]).unwrap();
        assert_eq!(idf1(&[none], 0.5).unwrap().idf1, 0.0);
        let partial = SequencePair::new("h", 4, gt.clone(), gt[..2].to_vec()).unwrap();
        let m = idf1(&[partial], 0.5).unwrap();
        assert_eq!((m.counts.idtp, m.counts.idfn, m.counts.idfp), (2, 2, 0));
        assert!((m.idf1 - 4.0 / 6.0).abs() < 1e-12);
        let vac = SequencePair::new("v", 1, vec![], vec![]).unwrap();
        let m = idf1(&[vac], 0.5).unwrap();
        assert!(m.vacuous && m.idf1 == 1.0);
    }

    #[test]
    fn pooling_examples() {
        let cfg = EvalConfig::new(MetricSet::all(), s16());
        let gt: Vec<_> = (0..4).map(|f| det(f, 1, 0., 0.)).collect();
        let perfect = SequencePair::new("a", 4, gt.clone(), gt.clone()).unwrap();
        let empty = SequencePair::new("b", 4, gt, vec![]).unwrap();
        let ea = evaluate_sequence(&perfect, &cfg).unwrap();
        let eb = evaluate_sequence(&empty, &cfg).unwrap();
        let pooled = pool(&[ea.clone(), eb.clone()]).unwrap().report();
        assert_eq!(pooled.so_detre, Some(0.5));
        assert_eq!(pool(std::slice::from_ref(&ea)).unwrap().report(), ea.report());

        let w = evaluate_sequence(&worked(), &cfg).unwrap();
        let twice = pool(&[w.clone(), w.clone()]).unwrap().report();
        let once = w.report();
        for ((k, a), (_, b)) in once.entries().into_iter().zip(twice.entries()) {
            if !["idsw", "fp", "fn"].contains(&k) {
                assert!((a.unwrap() - b.unwrap()).abs() < 1e-12, "{k}");
            }
        }

        let mut other = cfg.clone();
        other.mean_size = MeanObjectSize::new(8.0).unwrap();
        let e8 = evaluate_sequence(&perfect, &other).unwrap();
        assert!(pool(&[ea, e8]).is_err());
        let only_so = EvalConfig::new(MetricSet::parse_list(["so-hota"]).unwrap(), s16());
        let es = evaluate_sequence(&perfect, &only_so).unwrap();
        assert!(pool(&[es, eb]).is_err());
    }

    #[test]
    fn report_json_schema() {
        let cfg = EvalConfig::new(MetricSet::parse_list(["so-hota"]).unwrap(), s16());
        let r = evaluate_dataset(&[worked()], &cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        let pooled = v["pooled"].as_object().unwrap();
        let mut keys: Vec<_> = pooled.keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["so_assa", "so_deta", "so_detpr", "so_detre", "so_hota"]);
        assert!(v["per_sequence"]["worked"].is_object());
        assert_eq!(v["config"]["measure"], "dotd");
        assert_eq!(v["config"]["thresholds"].as_array().unwrap().len(), 19);
        assert_eq!(v["config"]["s_used"], 16.0);

        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "sequence,so_hota,so_deta,so_assa,so_detre,so_detpr");
        assert!(lines[1].starts_with("worked,0.75"));
        assert!(lines[2].starts_with("__pooled__,"));
    }

    #[test]
    fn metric_set_parsing() {
        let m = MetricSet::parse_list("so-hota,idf1".split(',')).unwrap();
        assert!(m.so_hota && m.idf1 && !m.hota && !m.clear);
        assert!(MetricSet::parse_list(["loca"]).is_err());
    }
}
