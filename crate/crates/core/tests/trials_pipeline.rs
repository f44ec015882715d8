mod common;

use std::collections::BTreeSet;

use common::{n_choose_2, rho2_oracle};
use durleak_core::{
    build_grid, expected_durations, gen_corpus, rate_distance, score_trials, speech_rate,
    trials::{gen_diff_speaker, gen_same_speaker, read_trials, write_scores, write_trials},
    Corpus, DurationProfile, GridSpec, MetricConfig, MetricKind, SynthConfig, TrialLabel, TrialSet,
};
use proptest::prelude::*;

fn corpus(n_speakers: usize, utts: usize, seed: u64) -> Corpus {
    gen_corpus(&SynthConfig {
        n_speakers,
        utts_per_speaker: utts,
        phones_per_utt: 42,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn worked_counts() {
    let c = corpus(3, 4, 1);
    assert_eq!(gen_same_speaker(&c, 1, 0).unwrap().len(), 3 * 6);
    assert_eq!(gen_same_speaker(&c, 2, 0).unwrap().len(), 3);
    let diff = gen_diff_speaker(&c, 2, 1, 0).unwrap();
    assert_eq!(diff.len(), 3);
    for t in &diff {
        let a = &c.utterance(t.side_a[0]).speaker_id;
        let b = &c.utterance(t.side_b[0]).speaker_id;
        assert_ne!(a, b);
    }
    assert!(gen_diff_speaker(&c, 1, 3, 0).is_err());
}

#[test]
fn trial_files_round_trip() {
    let c = corpus(4, 6, 2);
    let set = TrialSet::generate(&c, 2, 3, 5).unwrap();
    let mut buf = Vec::new();
    write_trials(&c, &set.trials, &mut buf).unwrap();
    let back = read_trials(&c, buf.as_slice()).unwrap();
    assert_eq!(back, set.trials);

    let report = score_trials(&c, &set.trials, &MetricConfig::new(MetricKind::Rho2), None).unwrap();
    let mut scored = Vec::new();
    write_scores(&c, &report.scored, &mut scored).unwrap();
    assert_eq!(read_trials(&c, scored.as_slice()).unwrap(), set.trials);
}

#[test]
fn scores_equal_hand_computed_metrics() {
    let c = corpus(5, 6, 3);
    let set = TrialSet::generate(&c, 3, 4, 1).unwrap();
    for min_instances in [1, 3] {
        let cfg = MetricConfig::new(MetricKind::Rho2).with_min_instances(min_instances);
        let report = score_trials(&c, &set.trials, &cfg, None).unwrap();
        assert!(report.excluded.is_empty());
        for s in &report.scored {
            let pa = DurationProfile::from_group(&c, &s.trial.side_a, min_instances).unwrap();
            let pb = DurationProfile::from_group(&c, &s.trial.side_b, min_instances).unwrap();
            assert!((s.score - rho2_oracle(&pa.mu, &pb.mu)).abs() < 1e-12);
            assert!(s.score.is_finite() && s.score >= 0.0);
        }
    }

    let e = expected_durations(&c).unwrap();
    let rate = MetricConfig::new(MetricKind::Rate);
    let report = score_trials(&c, &set.trials, &rate, Some(&e)).unwrap();
    for s in &report.scored {
        let side_rate = |side: &[u32]| {
            side.iter()
                .map(|&i| speech_rate(c.utterance(i), &e).unwrap())
                .sum::<f64>()
                / side.len() as f64
        };
        let want = rate_distance(side_rate(&s.trial.side_a), side_rate(&s.trial.side_b)).unwrap();
        assert!((s.score - want).abs() < 1e-12);
    }
    assert!(score_trials(&c, &set.trials, &rate, None).is_err());
}

#[test]
fn grid_is_complete_and_sorted() {
    let c = corpus(20, 12, 4);
    let spec = GridSpec {
        metric: MetricConfig::new(MetricKind::Rho1),
        m_values: vec![5, 1, 3],
        min_instance_values: vec![3, 1, 5],
        k_per_speaker: 10,
        seed: 2,
    };
    let g = build_grid(&c, &spec, None).unwrap();
    assert_eq!(g.rows, vec![1, 3, 5]);
    assert_eq!(g.cols, vec![1, 3, 5]);
    assert_eq!(g.cells.len(), 9);
    for cell in &g.cells {
        match cell.result {
            Some(r) => {
                assert!((0.0..=1.0).contains(&r.eer));
                assert!(r.n_diff <= 200 && r.n_same > 0);
            }
            // Single utterances hold each class about once, so a threshold of
            // 3 or 5 turns every profile into its constant global mean.
            None => assert!(cell.m == 1 && cell.min_instances > 1 && cell.excluded > 0),
        }
    }
    assert!(g.eer(5, 5).is_some());
    let again = build_grid(&c, &spec, None).unwrap();
    assert_eq!(g, again);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structural_invariants(seed in 0u64..1000, m in 1usize..5, k in 1usize..5) {
        let c = corpus(6, 9, seed);
        let set = TrialSet::generate(&c, m, k, seed).unwrap();
        prop_assert_eq!(set.count(TrialLabel::Different), 6 * k);
        let chunks = 9 / m;
        prop_assert_eq!(set.count(TrialLabel::Same), 6 * n_choose_2(chunks));
        prop_assert!((set.mean_side_size() - m as f64).abs() <= 0.1 * m as f64);
        for t in &set.trials {
            t.validate(&c).unwrap();
            let a: BTreeSet<_> = t.side_a.iter().collect();
            prop_assert!(t.side_b.iter().all(|u| !a.contains(u)));
            prop_assert!(t.side_a.len() == m && t.side_b.len() == m);
        }
        // Same-speaker chunks are disjoint: each pair of distinct sides of one
        // speaker shares no utterance.
        let same: Vec<_> = set.trials.iter().filter(|t| t.label == TrialLabel::Same).collect();
        let sides: BTreeSet<_> = same.iter().flat_map(|t| [t.side_a.to_vec(), t.side_b.to_vec()]).collect();
        let mut seen = BTreeSet::new();
        for s in &sides {
            for u in s {
                prop_assert!(seen.insert(*u), "utterance {} in two chunks", u);
            }
        }
        prop_assert_eq!(TrialSet::generate(&c, m, k, seed).unwrap(), set);
    }

    #[test]
    fn same_speaker_count_matches_pair_enumeration(seed in 0u64..1000, keep in prop::collection::vec(1usize..8, 2..12)) {
        let full = corpus(keep.len(), 8, seed);
        let utts: Vec<_> = full
            .speakers()
            .values()
            .zip(&keep)
            .flat_map(|(idx, &n)| idx[..n].iter().map(|&i| full.utterance(i).clone()).collect::<Vec<_>>())
            .collect();
        let c = Corpus::new(full.inventory().clone(), utts).unwrap();
        let u = c.utterances();
        let mut pairs = 0;
        for i in 0..u.len() {
            for j in i + 1..u.len() {
                pairs += usize::from(u[i].speaker_id == u[j].speaker_id);
            }
        }
        prop_assert_eq!(gen_same_speaker(&c, 1, seed).unwrap().len(), pairs);
    }
}
