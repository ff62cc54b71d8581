use std::collections::HashSet;

use fairsv::data::{
    generate_trials, load_embeddings, load_scores, save_embeddings, save_scores, DatasetSplit, EmbeddingRecord, Group,
    GroupTag, Label, ScoredTrial, Trial,
};
use fairsv::metrics::{au_fadr, default_far_grid, fadr_curve, threshold_for_pooled_far, FadrParams};
use fairsv::scoring::ScorePartition;
use fairsv::stats::{kde, overlap_percent, perm_test_eer};
use fairsv::synth::{generate, SynthConfig};
use proptest::prelude::*;

fn cell(max: usize) -> impl Strategy<Value = Vec<f64>> {
    // coarse values so ties are common
    prop::collection::vec((0u32..40).prop_map(|v| v as f64 / 40.0), 2..max)
}

fn partition() -> impl Strategy<Value = ScorePartition> {
    (cell(30), cell(30), cell(120), cell(120)).prop_map(|(g1, g2, i1, i2)| ScorePartition::from_cells(g1, g2, i1, i2))
}

fn small_config() -> impl Strategy<Value = SynthConfig> {
    (2usize..6, 2usize..6, 2usize..5, 0.0f64..0.9, 0.0f64..0.9, any::<u64>()).prop_map(|(s1, s2, u, r1, r2, seed)| {
        SynthConfig {
            dim: 6,
            speakers_g1: s1,
            speakers_g2: s2,
            utts_per_speaker: u,
            rho_g1: r1,
            rho_g2: r2,
            speaker_rank: 0,
            seed,
            ..SynthConfig::default()
        }
    })
}

fn scored(cells: &[(Label, GroupTag, Vec<f64>)]) -> Vec<ScoredTrial> {
    let mut out = Vec::new();
    for (label, tag, scores) in cells {
        for (i, &score) in scores.iter().enumerate() {
            out.push(ScoredTrial {
                trial: Trial {
                    enrol_utt: format!("{}-{}-{i}", tag.as_str(), label.as_str()),
                    test_utt: format!("t{i}"),
                    label: *label,
                    group_tag: *tag,
                },
                score,
            });
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn au_fadr_is_bounded_and_group_symmetric(p in partition(), w in 0.0f64..=1.0) {
        let params = FadrParams::new(w).unwrap();
        let grid = default_far_grid();
        let curve = fadr_curve(&p, params, &grid).unwrap();
        let area = au_fadr(&curve).unwrap();
        prop_assert!((0.0..=900.0 + 1e-9).contains(&area));
        prop_assert_eq!(area, au_fadr(&fadr_curve(&p.swap_groups(), params, &grid).unwrap()).unwrap());
        for pt in &curve.points {
            prop_assert!((0.0..=100.0).contains(&pt.fadr_percent));
        }
    }

    #[test]
    fn identical_groups_score_900(g in cell(30), i in cell(120), w in 0.0f64..=1.0) {
        let p = ScorePartition::from_cells(g.clone(), g, i.clone(), i);
        let area = au_fadr(&fadr_curve(&p, FadrParams::new(w).unwrap(), &default_far_grid()).unwrap()).unwrap();
        prop_assert!((area - 900.0).abs() <= 1e-9);
    }

    #[test]
    fn thresholds_respect_the_far_budget(p in partition()) {
        let mut prev_tau = f64::INFINITY;
        for pct in default_far_grid() {
            let op = threshold_for_pooled_far(&p, pct / 100.0).unwrap();
            prop_assert!(op.pooled_far <= pct / 100.0 + 1e-12);
            prop_assert!(op.tau <= prev_tau);
            prev_tau = op.tau;
        }
    }

    #[test]
    fn trials_stay_within_groups(config in small_config(), cap in 1usize..40, seed in any::<u64>()) {
        let split = generate(&config).unwrap();
        let trials = generate_trials(&split, cap, seed).unwrap();
        prop_assert_eq!(&trials, &generate_trials(&split, cap, seed).unwrap());

        let mut seen = HashSet::new();
        let mut per_cell = std::collections::HashMap::new();
        for t in &trials {
            let a = split.get(&t.enrol_utt).unwrap();
            let b = split.get(&t.test_utt).unwrap();
            prop_assert_ne!(&a.utt_id, &b.utt_id);
            prop_assert_eq!(a.group, b.group);
            prop_assert_eq!(t.group_tag, GroupTag::of(a.group, b.group));
            prop_assert_eq!(t.label == Label::Genuine, a.speaker_id == b.speaker_id);
            let key = if a.utt_id < b.utt_id { (&a.utt_id, &b.utt_id) } else { (&b.utt_id, &a.utt_id) };
            prop_assert!(seen.insert(key));
            *per_cell.entry((t.group_tag, t.label)).or_insert(0usize) += 1;
        }
        prop_assert!(per_cell.values().all(|&n| n <= cap));
    }

    #[test]
    fn embeddings_round_trip_bit_exact(values in prop::collection::vec(-1e6f64..1e6, 12)) {
        let records = values
            .chunks(3)
            .enumerate()
            .map(|(i, v)| EmbeddingRecord {
                utt_id: format!("u{i}"),
                speaker_id: format!("s{}", i / 2),
                group: if i < 2 { Group::G1 } else { Group::G2 },
                vector: v.to_vec(),
            })
            .collect();
        let split = DatasetSplit::new(3, records).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        save_embeddings(&split, &path).unwrap();
        prop_assert_eq!(load_embeddings(&path).unwrap(), split);
    }

    #[test]
    fn scores_round_trip_bit_exact(g in cell(10), i in cell(10), jitter in -1.0f64..1.0) {
        let g: Vec<f64> = g.iter().map(|s| s + jitter * 1e-7).collect();
        let original = scored(&[(Label::Genuine, GroupTag::G1, g), (Label::Impostor, GroupTag::G2, i)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        save_scores(&original, &path).unwrap();
        prop_assert_eq!(load_scores(&path).unwrap(), original);
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(a in prop::collection::vec(-3.0f64..3.0, 3..60), b in prop::collection::vec(-3.0f64..3.0, 3..60)) {
        prop_assume!(a.iter().any(|&x| x != a[0]) && b.iter().any(|&x| x != b[0]));
        let (ka, kb) = (kde(&a, 128).unwrap(), kde(&b, 128).unwrap());
        let ab = overlap_percent(&ka, &kb);
        prop_assert!((0.0..=100.0 + 1e-9).contains(&ab));
        prop_assert!((ab - overlap_percent(&kb, &ka)).abs() <= 1e-9);
    }

    #[test]
    fn p_values_are_proper(g1 in cell(8), g2 in cell(8), i1 in cell(20), i2 in cell(20), shift in -0.2f64..0.2, seed in any::<u64>()) {
        let a = scored(&[
            (Label::Genuine, GroupTag::G1, g1.clone()),
            (Label::Genuine, GroupTag::G2, g2.clone()),
            (Label::Impostor, GroupTag::G1, i1.clone()),
            (Label::Impostor, GroupTag::G2, i2.clone()),
        ]);
        let b: Vec<ScoredTrial> = a.iter().map(|s| ScoredTrial { score: s.score + shift, ..s.clone() }).collect();
        let n = 30;
        let report = perm_test_eer(&a, &b, n, seed).unwrap();
        prop_assert!(report.p_value >= 1.0 / (n as f64 + 1.0));
        prop_assert!(report.p_value <= 1.0);
        prop_assert_eq!(report.null_stats.len(), n);
    }

    #[test]
    fn synth_is_a_function_of_its_config(config in small_config()) {
        let split = generate(&config).unwrap();
        prop_assert_eq!(split.len(), (config.speakers_g1 + config.speakers_g2) * config.utts_per_speaker);
        prop_assert_eq!(split.speakers_in(Group::G1).len(), config.speakers_g1);
        prop_assert_eq!(generate(&config).unwrap(), split);
    }
}
