//! Per-frame, per-threshold optimal assignment between ground truth and
//! predictions, and accumulation of the counts every metric is built from.
//!
//! Matching is two-pass. A sequence-wide association potential is computed
//! first for every (gt track, pred track) pair; then each frame is matched
//! independently at each threshold, maximizing in order:
//!
//! 1. the number of matched pairs with `sim >= alpha`,
//! 2. the summed potential of the matched pairs,
//! 3. the summed similarity of the matched pairs.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data_io::{Detection, FrameIndex, SequencePair};
use crate::error::{Error, Result};
use crate::geometry::{MeanObjectSize, SimilarityMeasure};
use crate::hungarian::{solve_min, Lex3};

/// Similarity threshold in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ThresholdAlpha(f64);

impl ThresholdAlpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::Validation(format!("threshold {alpha} outside (0, 1)")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `{0.05, 0.10, ..., 0.95}`.
    pub fn canonical_grid() -> Vec<Self> {
        (1..=19).map(|i| Self(i as f64 / 20.0)).collect()
    }
}

impl TryFrom<f64> for ThresholdAlpha {
    type Error = Error;

    fn try_from(a: f64) -> Result<Self> {
        Self::new(a)
    }
}

impl From<ThresholdAlpha> for f64 {
    fn from(a: ThresholdAlpha) -> Self {
        a.0
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// `|gt| x |pred|` matrix of `measure(gt_i, pred_j)`.
pub fn similarity_matrix(
    gt_frame: &[Detection],
    pred_frame: &[Detection],
    measure: SimilarityMeasure,
    s: MeanObjectSize,
) -> ScoreMatrix {
    ScoreMatrix::from_fn(gt_frame.len(), pred_frame.len(), |i, j| {
        measure.eval(&gt_frame[i].bbox, &pred_frame[j].bbox, s)
    })
}

/// Association potential keyed by `(gt track id, pred track id)`.
pub type PotentialMap = HashMap<(u32, u32), f64>;

fn require_ids(seq: &SequencePair) -> Result<()> {
    seq.check_pred_ids()
}

/// Jaccard-style prior on each track pair:
/// `sum_f sim_f(g, p) / (|g| + |p| - sum_f sim_f(g, p))`.
pub fn association_potential(
    seq: &SequencePair,
    measure: SimilarityMeasure,
    s: MeanObjectSize,
) -> Result<PotentialMap> {
    require_ids(seq)?;
    let gt_index = FrameIndex::new(seq.gt(), seq.frame_count());
    let pred_index = FrameIndex::new(seq.pred(), seq.frame_count());
    let mut sums: HashMap<(u32, u32), f64> = HashMap::new();
    for f in 0..seq.frame_count() {
        let gt = &seq.gt()[gt_index.range(f)];
        let pred = &seq.pred()[pred_index.range(f)];
        for g in gt {
            for p in pred {
                *sums.entry((track(g), track(p))).or_default() += measure.eval(&g.bbox, &p.bbox, s);
            }
        }
    }
    Ok(potentials_from_sums(
        sums,
        &track_sizes(seq.gt()),
        &track_sizes(seq.pred()),
    ))
}

fn potentials_from_sums(
    sums: HashMap<(u32, u32), f64>,
    gt_sizes: &HashMap<u32, u64>,
    pred_sizes: &HashMap<u32, u64>,
) -> PotentialMap {
    sums.into_iter()
        .map(|((g, p), sum)| {
            let denom = (gt_sizes[&g] + pred_sizes[&p]) as f64 - sum;
            let pot = if denom > 0.0 { sum / denom } else { 0.0 };
            ((g, p), pot)
        })
        .collect()
}

fn track(d: &Detection) -> u32 {
    d.track_id.expect("track id checked before matching")
}

fn track_sizes(dets: &[Detection]) -> HashMap<u32, u64> {
    let mut sizes = HashMap::new();
    for d in dets {
        *sizes.entry(track(d)).or_default() += 1;
    }
    sizes
}

/// Optimal one-to-one assignment over pairs with `sim >= alpha`.
///
/// `potential` is aligned with `sim`. Returns `(gt_idx, pred_idx)` pairs in
/// ascending gt order.
pub fn match_frame(sim: &ScoreMatrix, alpha: ThresholdAlpha, potential: &ScoreMatrix) -> Vec<(usize, usize)> {
    debug_assert_eq!((sim.rows, sim.cols), (potential.rows, potential.cols));
    let eligible: Vec<bool> = sim.data.iter().map(|&v| v >= alpha.0).collect();
    match_eligible(sim, potential, &eligible)
}

fn match_eligible(sim: &ScoreMatrix, potential: &ScoreMatrix, eligible: &[bool]) -> Vec<(usize, usize)> {
    let (rows, cols) = (sim.rows, sim.cols);
    if !eligible.iter().any(|&e| e) {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| {
        let k = i * cols + j;
        if eligible[k] {
            Lex3(-1.0, -potential.data[k], -sim.data[k])
        } else {
            Lex3(0.0, 0.0, 0.0)
        }
    };
    solve_min(rows, cols, cost)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.filter(|&j| eligible[i * cols + j]).map(|j| (i, j)))
        .collect()
}

/// Value of the three-tier matching objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub matched: usize,
    pub potential: f64,
    pub similarity: f64,
}

impl Objective {
    pub fn of(sim: &ScoreMatrix, potential: &ScoreMatrix, assignment: &[(usize, usize)]) -> Self {
        let mut sorted = assignment.to_vec();
        sorted.sort_unstable();
        Self {
            matched: sorted.len(),
            potential: sorted.iter().map(|&(i, j)| potential.get(i, j)).sum(),
            similarity: sorted.iter().map(|&(i, j)| sim.get(i, j)).sum(),
        }
    }

    /// Equal within `tol` on the real-valued tiers.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.matched == other.matched
            && (self.potential - other.potential).abs() <= tol
            && (self.similarity - other.similarity).abs() <= tol
    }

    fn better_than(&self, other: &Self, tol: f64) -> bool {
        if self.matched != other.matched {
            return self.matched > other.matched;
        }
        if (self.potential - other.potential).abs() > tol {
            return self.potential > other.potential;
        }
        self.similarity > other.similarity + tol
    }
}

/// Exhaustive reference for [`match_frame`] on matrices up to 6x6.
///
/// Returns the lexicographically smallest assignment among the optima.
pub fn brute_force_match(
    sim: &ScoreMatrix,
    alpha: ThresholdAlpha,
    potential: &ScoreMatrix,
) -> Result<Vec<(usize, usize)>> {
    if sim.rows > 6 || sim.cols > 6 {
        return Err(Error::MatrixTooLarge {
            rows: sim.rows,
            cols: sim.cols,
        });
    }
    const TOL: f64 = 1e-12;
    let mut best: Vec<(usize, usize)> = Vec::new();
    let mut best_obj = Objective::of(sim, potential, &best);
    let mut current = Vec::new();
    let mut used = vec![false; sim.cols];

    #[allow(clippy::too_many_arguments)]
    fn rec(
        row: usize,
        sim: &ScoreMatrix,
        alpha: f64,
        potential: &ScoreMatrix,
        current: &mut Vec<(usize, usize)>,
        used: &mut [bool],
        best: &mut Vec<(usize, usize)>,
        best_obj: &mut Objective,
    ) {
        if row == sim.rows {
            let obj = Objective::of(sim, potential, current);
            if obj.better_than(best_obj, TOL) || (!best_obj.better_than(&obj, TOL) && *current < *best) {
                *best = current.clone();
                *best_obj = obj;
            }
            return;
        }
        rec(row + 1, sim, alpha, potential, current, used, best, best_obj);
        for j in 0..sim.cols {
            if !used[j] && sim.get(row, j) >= alpha {
                used[j] = true;
                current.push((row, j));
                rec(row + 1, sim, alpha, potential, current, used, best, best_obj);
                current.pop();
                used[j] = false;
            }
        }
    }

    rec(
        0,
        sim,
        alpha.0,
        potential,
        &mut current,
        &mut used,
        &mut best,
        &mut best_obj,
    );
    Ok(best)
}

/// A track identity namespaced by its sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackKey {
    pub sequence: Arc<str>,
    pub id: u32,
}

/// A (gt track, pred track) pair within one sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub sequence: Arc<str>,
    pub gt: u32,
    pub pred: u32,
}

impl PairKey {
    pub fn gt_key(&self) -> TrackKey {
        TrackKey {
            sequence: self.sequence.clone(),
            id: self.gt,
        }
    }

    pub fn pred_key(&self) -> TrackKey {
        TrackKey {
            sequence: self.sequence.clone(),
            id: self.pred,
        }
    }
}

/// Detection and association counts at one threshold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlphaCounts {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub pair_tp: BTreeMap<PairKey, u64>,
}

/// Counts per threshold plus threshold-independent track sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchAccumulator {
    pub measure: SimilarityMeasure,
    pub mean_size: MeanObjectSize,
    pub alphas: Vec<ThresholdAlpha>,
    pub per_alpha: Vec<AlphaCounts>,
    pub gt_track_size: BTreeMap<TrackKey, u64>,
    pub pred_track_size: BTreeMap<TrackKey, u64>,
}

impl MatchAccumulator {
    pub fn empty(measure: SimilarityMeasure, mean_size: MeanObjectSize, alphas: &[ThresholdAlpha]) -> Self {
        Self {
            measure,
            mean_size,
            alphas: alphas.to_vec(),
            per_alpha: vec![AlphaCounts::default(); alphas.len()],
            gt_track_size: BTreeMap::new(),
            pred_track_size: BTreeMap::new(),
        }
    }

    pub fn total_gt(&self) -> u64 {
        self.gt_track_size.values().sum()
    }

    pub fn total_pred(&self) -> u64 {
        self.pred_track_size.values().sum()
    }

    pub fn same_config(&self, other: &Self) -> bool {
        self.measure == other.measure && self.mean_size == other.mean_size && self.alphas == other.alphas
    }

    /// Count-level addition. Commutative and associative.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.same_config(other) {
            return Err(Error::ConfigMismatch(format!(
                "cannot pool {} (S={}) with {} (S={}) or differing thresholds",
                self.measure.name(),
                self.mean_size.get(),
                other.measure.name(),
                other.mean_size.get()
            )));
        }
        for (mine, theirs) in self.per_alpha.iter_mut().zip(&other.per_alpha) {
            mine.tp += theirs.tp;
            mine.fn_ += theirs.fn_;
            mine.fp += theirs.fp;
            for (k, v) in &theirs.pair_tp {
                *mine.pair_tp.entry(k.clone()).or_default() += v;
            }
        }
        for (k, v) in &other.gt_track_size {
            *self.gt_track_size.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.pred_track_size {
            *self.pred_track_size.entry(k.clone()).or_default() += v;
        }
        Ok(())
    }

    /// Checks the internal count identities.
    pub fn check_invariants(&self) -> Result<()> {
        let (n_gt, n_pred) = (self.total_gt(), self.total_pred());
        for (a, c) in self.alphas.iter().zip(&self.per_alpha) {
            let bad = |what: &str| Err(Error::Validation(format!("alpha {}: {what}", a.get())));
            if c.tp != c.pair_tp.values().sum::<u64>() {
                return bad("tp != sum(pair_tp)");
            }
            if c.tp + c.fn_ != n_gt || c.tp + c.fp != n_pred {
                return bad("tp + fn / tp + fp do not match detection totals");
            }
            for (k, &v) in &c.pair_tp {
                let g = self.gt_track_size.get(&k.gt_key()).copied().unwrap_or(0);
                let p = self.pred_track_size.get(&k.pred_key()).copied().unwrap_or(0);
                if v > g.min(p) {
                    return bad("pair_tp exceeds a track size");
                }
            }
        }
        Ok(())
    }
}

/// One matched detection pair: `(frame, gt track, pred track)`.
pub type MatchedPair = (usize, u32, u32);

/// Runs the two-pass matching and calls `visit(alpha_idx, pair)` for every
/// true positive, frame by frame.
pub fn for_each_match(
    seq: &SequencePair,
    measure: SimilarityMeasure,
    s: MeanObjectSize,
    alphas: &[ThresholdAlpha],
    mut visit: impl FnMut(usize, MatchedPair),
) -> Result<()> {
    require_ids(seq)?;
    let frames = seq.frame_count();
    let gt_index = FrameIndex::new(seq.gt(), frames);
    let pred_index = FrameIndex::new(seq.pred(), frames);

    // pass 1: per-frame similarities and potential sums
    let mut sims = Vec::with_capacity(frames);
    let mut sums: HashMap<(u32, u32), f64> = HashMap::new();
    for f in 0..frames {
        let gt = &seq.gt()[gt_index.range(f)];
        let pred = &seq.pred()[pred_index.range(f)];
        let m = similarity_matrix(gt, pred, measure, s);
        for (i, g) in gt.iter().enumerate() {
            for (j, p) in pred.iter().enumerate() {
                *sums.entry((track(g), track(p))).or_default() += m.get(i, j);
            }
        }
        sims.push(m);
    }
    let potential = potentials_from_sums(sums, &track_sizes(seq.gt()), &track_sizes(seq.pred()));

    // pass 2: per-frame matching at each threshold
    let mut eligible = Vec::new();
    let mut prev_eligible = Vec::new();
    let mut assignment = Vec::new();
    for (f, sim) in sims.iter().enumerate() {
        if sim.rows == 0 || sim.cols == 0 {
            continue;
        }
        let gt = &seq.gt()[gt_index.range(f)];
        let pred = &seq.pred()[pred_index.range(f)];
        let pot = ScoreMatrix::from_fn(gt.len(), pred.len(), |i, j| {
            potential.get(&(track(&gt[i]), track(&pred[j]))).copied().unwrap_or(0.0)
        });
        prev_eligible.clear();
        for (ai, alpha) in alphas.iter().enumerate() {
            eligible.clear();
            eligible.extend(sim.data.iter().map(|&v| v >= alpha.0));
            // identical eligibility gives an identical optimum
            if ai == 0 || eligible != prev_eligible {
                assignment = match_eligible(sim, &pot, &eligible);
                std::mem::swap(&mut eligible, &mut prev_eligible);
            }
            for &(i, j) in &assignment {
                visit(ai, (f, track(&gt[i]), track(&pred[j])));
            }
        }
    }
    Ok(())
}

/// True positives per threshold, in frame order.
pub fn matched_pairs(
    seq: &SequencePair,
    measure: SimilarityMeasure,
    s: MeanObjectSize,
    alphas: &[ThresholdAlpha],
) -> Result<Vec<Vec<MatchedPair>>> {
    let mut out = vec![Vec::new(); alphas.len()];
    for_each_match(seq, measure, s, alphas, |ai, pair| out[ai].push(pair))?;
    Ok(out)
}

/// Builds the match accumulator of one sequence.
pub fn accumulate(
    seq: &SequencePair,
    measure: SimilarityMeasure,
    s: MeanObjectSize,
    alphas: &[ThresholdAlpha],
) -> Result<MatchAccumulator> {
    let name: Arc<str> = Arc::from(seq.name());
    let mut acc = MatchAccumulator::empty(measure, s, alphas);
    let mut pair_counts: Vec<HashMap<(u32, u32), u64>> = vec![HashMap::new(); alphas.len()];
    for_each_match(seq, measure, s, alphas, |ai, (_, g, p)| {
        *pair_counts[ai].entry((g, p)).or_default() += 1;
    })?;

    let key = |id: u32| TrackKey {
        sequence: name.clone(),
        id,
    };
    for (id, n) in track_sizes(seq.gt()) {
        acc.gt_track_size.insert(key(id), n);
    }
    for (id, n) in track_sizes(seq.pred()) {
        acc.pred_track_size.insert(key(id), n);
    }
    let (n_gt, n_pred) = (seq.gt().len() as u64, seq.pred().len() as u64);
    for (counts, pairs) in acc.per_alpha.iter_mut().zip(pair_counts) {
        counts.tp = pairs.values().sum();
        counts.fn_ = n_gt - counts.tp;
        counts.fp = n_pred - counts.tp;
        counts.pair_tp = pairs
            .into_iter()
            .map(|((gt, pred), n)| {
                (
                    PairKey {
                        sequence: name.clone(),
                        gt,
                        pred,
                    },
                    n,
                )
            })
            .collect();
    }
    Ok(acc)
}
