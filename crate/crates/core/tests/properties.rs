use proptest::prelude::*;
use smot_core::data_io::{parse_mot, Detection, SequencePair};
use smot_core::matching::{
    accumulate, brute_force_match, match_frame, matched_pairs, Objective, ScoreMatrix, ThresholdAlpha,
};
use smot_core::metrics::{evaluate_dataset, evaluate_sequence, pool, EvalConfig, MetricSet};
use smot_core::synth::{corrupt, generate_scene, CorruptionConfig, SceneConfig};
use smot_core::{BoundingBox, MeanObjectSize, SimilarityMeasure};

fn s16() -> MeanObjectSize {
    MeanObjectSize::new(16.0).unwrap()
}

fn scene(seed: u64, miss: f64, fp: f64, sw: f64) -> SequencePair {
    let gt = generate_scene(&SceneConfig {
        n_objects: 4,
        frames: 30,
        arena: (300.0, 200.0),
        seed,
        ..SceneConfig::default()
    })
    .unwrap();
    let pred = corrupt(
        &gt,
        &CorruptionConfig {
            center_noise_sigma: 4.0,
            miss_rate: miss,
            fp_rate: fp,
            id_switch_rate: sw,
            drop_ids: false,
            seed: seed + 1,
        },
    )
    .unwrap();
    gt.with_pred(pred).unwrap()
}

fn matrix(max: usize) -> impl Strategy<Value = (ScoreMatrix, ScoreMatrix)> {
    (0..=max, 0..=max).prop_flat_map(|(r, c)| {
        (
            prop::collection::vec(
                prop_oneof![0.0..=1.0f64, (1u8..20).prop_map(|k| f64::from(k) / 20.0)],
                r * c,
            ),
            prop::collection::vec(0.0..=1.0f64, r * c),
        )
            .prop_map(move |(s, p)| {
                (
                    ScoreMatrix::from_fn(r, c, |i, j| s[i * c + j]),
                    ScoreMatrix::from_fn(r, c, |i, j| p[i * c + j]),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn match_frame_is_optimal((sim, pot) in matrix(5), k in 1usize..20) {
        let alpha = ThresholdAlpha::new(k as f64 / 20.0).unwrap();
        let got = match_frame(&sim, alpha, &pot);
        let want = brute_force_match(&sim, alpha, &pot).unwrap();
        prop_assert!(Objective::of(&sim, &pot, &got).approx_eq(&Objective::of(&sim, &pot, &want), 1e-9));
        let mut rows: Vec<_> = got.iter().map(|m| m.0).collect();
        let mut cols: Vec<_> = got.iter().map(|m| m.1).collect();
        rows.dedup();
        cols.sort();
        cols.dedup();
        prop_assert_eq!(rows.len(), got.len());
        prop_assert_eq!(cols.len(), got.len());
        prop_assert!(got.iter().all(|&(i, j)| sim.get(i, j) >= alpha.get()));
    }

    #[test]
    fn tp_count_non_increasing_in_alpha(seed in 0u64..1000, miss in 0.0..0.4f64, fp in 0.0..0.4f64) {
        let seq = scene(seed, miss, fp, 0.02);
        let acc = accumulate(&seq, SimilarityMeasure::Dotd, s16(), &ThresholdAlpha::canonical_grid()).unwrap();
        acc.check_invariants().unwrap();
        prop_assert!(acc.per_alpha.windows(2).all(|w| w[1].tp <= w[0].tp));
        for c in &acc.per_alpha {
            prop_assert_eq!(c.tp + c.fn_, seq.gt().len() as u64);
            prop_assert_eq!(c.tp + c.fp, seq.pred().len() as u64);
        }
    }

    #[test]
    fn frames_matched_independently(seed in 0u64..1000) {
        // no gt or pred is matched twice in a frame
        let seq = scene(seed, 0.1, 0.3, 0.05);
        for tps in matched_pairs(&seq, SimilarityMeasure::Dotd, s16(), &ThresholdAlpha::canonical_grid()).unwrap() {
            let mut g: Vec<_> = tps.iter().map(|t| (t.0, t.1)).collect();
            let mut p: Vec<_> = tps.iter().map(|t| (t.0, t.2)).collect();
            let n = g.len();
            g.sort();
            g.dedup();
            p.sort();
            p.dedup();
            prop_assert_eq!(g.len(), n);
            prop_assert_eq!(p.len(), n);
        }
    }

    #[test]
    fn input_order_does_not_matter(seed in 0u64..1000, rot in 0usize..200) {
        let seq = scene(seed, 0.1, 0.1, 0.02);
        let mut gt = seq.gt().to_vec();
        let mut pred = seq.pred().to_vec();
        gt.reverse();
        let r = rot % pred.len().max(1);
        pred.rotate_left(r);
        let shuffled = SequencePair::new(seq.name(), seq.frame_count(), gt, pred).unwrap();
        prop_assert_eq!(&shuffled, &seq);
        let cfg = EvalConfig::new(MetricSet::all(), s16());
        prop_assert_eq!(
            evaluate_sequence(&shuffled, &cfg).unwrap().report(),
            evaluate_sequence(&seq, &cfg).unwrap().report()
        );
    }
}

#[test]
fn pooling_is_order_and_schedule_invariant() {
    let seqs: Vec<SequencePair> = (0..6)
        .map(|i| {
            let s = scene(i, 0.1, 0.2, 0.02);
            SequencePair::new(format!("s{i}"), s.frame_count(), s.gt().to_vec(), s.pred().to_vec()).unwrap()
        })
        .collect();
    let cfg = EvalConfig::new(MetricSet::all(), s16());
    let evals: Vec<_> = seqs.iter().map(|s| evaluate_sequence(s, &cfg).unwrap()).collect();
    let forward = pool(&evals).unwrap().report();
    let mut rev = evals.clone();
    rev.reverse();
    let backward = pool(&rev).unwrap().report();
    for ((k, a), (_, b)) in forward.entries().into_iter().zip(backward.entries()) {
        assert!((a.unwrap() - b.unwrap()).abs() < 1e-12, "{k}");
    }

    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| evaluate_dataset(&seqs, &cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn mot_text_to_scores() {
    let gt = "1,1,10,10,16,16,1,1,1\n2,1,10,10,16,16,1,1,1\n3,1,10,10,16,16,1,1,1\n4,1,10,10,16,16,1,1,1\n";
    let pred = "1,1,10,10,16,16,0.9\n2,1,10,10,16,16,0.9\n3,1,10,10,16,16,0.9\n";
    let gt = smot_core::data_io::parse_mot_gt(gt.as_bytes()).unwrap();
    let pred = parse_mot(pred.as_bytes()).unwrap();
    let seq = SequencePair::new("seq", 4, gt, pred).unwrap();
    let r = evaluate_sequence(&seq, &EvalConfig::new(MetricSet::all(), s16()))
        .unwrap()
        .report();
    assert!((r.so_hota.unwrap() - 0.75).abs() < 1e-12);
    assert!((r.mota.unwrap() - 0.75).abs() < 1e-12);
    assert!((r.idf1.unwrap() - 6.0 / 7.0).abs() < 1e-12);
}

#[test]
fn far_predictions_only_score_under_dotd() {
    let b = |x: f64| BoundingBox::new(x, 0.0, 16.0, 16.0).unwrap();
    let gt: Vec<_> = (0..5).map(|f| Detection::tracked(f, 1, b(0.0))).collect();
    let pred: Vec<_> = (0..5).map(|f| Detection::tracked(f, 1, b(20.0))).collect();
    let seq = SequencePair::new("far", 5, gt, pred).unwrap();
    let r = evaluate_sequence(&seq, &EvalConfig::new(MetricSet::all(), s16()))
        .unwrap()
        .report();
    assert_eq!(r.hota, Some(0.0));
    assert!(r.so_hota.unwrap() > 0.0);
}
