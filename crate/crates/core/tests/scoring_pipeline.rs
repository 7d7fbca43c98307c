use std::collections::HashSet;

use proptest::prelude::*;
use supercluster::corpus::{write_corpus, CorpusFormat, Taxonomy};
use supercluster::pipeline::{load_report, run_pipeline, verify_report, InputSpec, MethodSpec, RunConfig};
use supercluster::rng::stable_mix;
use supercluster::scoring::{
    agreement, align_clusters, contingency, entropy_sum, finalize_assignment, majority_vote_supertactics,
    row_entropies, score, LogBase, ScoreConfig,
};
use supercluster::synth::{planted_corpus, MITRE_GROUP_OF_TACTIC};
use supercluster::ClusterAssignment;

/// Labels covering `1..=t` plus a cluster assignment over `k` ids.
fn labeled_assignment() -> impl Strategy<Value = (Vec<u32>, u32, Vec<usize>, usize)> {
    (1u32..6, 1usize..6, 0usize..40).prop_flat_map(|(t, k, extra)| {
        let n = t as usize + extra;
        (
            prop::collection::vec(1..=t, extra).prop_map(move |rest| (1..=t).chain(rest).collect::<Vec<u32>>()),
            prop::collection::vec(0..k, n),
        )
            .prop_map(move |(labels, a)| (labels, t, a, k))
    })
}

proptest! {
    #[test]
    fn row_entropy_bounds((labels, t, a, k) in labeled_assignment()) {
        let a = ClusterAssignment::new(a, k, f64::NAN).unwrap();
        let table = contingency(&labels, t, &a).unwrap();
        for (row, h) in table.proportions.iter().zip(row_entropies(&table, LogBase::E)) {
            prop_assert!(h >= 0.0 && h <= (k as f64).ln() + 1e-12);
            let point_mass = row.iter().filter(|&&p| p > 0.0).count() == 1;
            prop_assert_eq!(h == 0.0, point_mass);
        }
    }

    #[test]
    fn scores_ignore_node_order((labels, t, a, k) in labeled_assignment(), rot in 0usize..40) {
        let cfg = ScoreConfig::default();
        let base = score(&labels, t, &ClusterAssignment::new(a.clone(), k, f64::NAN).unwrap(), &cfg).unwrap();
        let n = labels.len();
        let shift = rot % n;
        let mut l2 = labels.clone();
        let mut a2 = a.clone();
        l2.rotate_left(shift);
        a2.rotate_left(shift);
        let moved = score(&l2, t, &ClusterAssignment::new(a2, k, f64::NAN).unwrap(), &cfg).unwrap();
        prop_assert_eq!(base, moved);
    }

    #[test]
    fn alignment_never_lowers_agreement(
        pair in (1usize..40).prop_flat_map(|n| (prop::collection::vec(0usize..5, n), prop::collection::vec(0usize..7, n)))
    ) {
        let reference = ClusterAssignment::new(pair.0, 5, f64::NAN).unwrap();
        let candidate = ClusterAssignment::new(pair.1, 7, f64::NAN).unwrap();
        let map = align_clusters(&reference, &candidate).unwrap();
        let aligned = map.apply(&candidate);
        prop_assert!(agreement(&reference, &aligned) >= agreement(&reference, &candidate));
        prop_assert!(same_grouping(&aligned.labels, &candidate.labels));
    }

    #[test]
    fn finalize_is_idempotent((labels, t, a, k) in labeled_assignment()) {
        let a = ClusterAssignment::new(a, k, f64::NAN).unwrap();
        let map = majority_vote_supertactics(&contingency(&labels, t, &a).unwrap());
        let fin = finalize_assignment(&labels, &map).unwrap();
        let table = contingency(&labels, t, &fin).unwrap();
        prop_assert_eq!(entropy_sum(&table, LogBase::E), 0.0);
        let again = majority_vote_supertactics(&table);
        prop_assert_eq!(&again.cluster_of, &map.cluster_of);
        prop_assert_eq!(finalize_assignment(&labels, &again).unwrap().labels, fin.labels);
    }
}

fn same_grouping(a: &[usize], b: &[usize]) -> bool {
    let pairs: HashSet<(usize, usize)> = a.iter().copied().zip(b.iter().copied()).collect();
    let left: HashSet<usize> = pairs.iter().map(|p| p.0).collect();
    let right: HashSet<usize> = pairs.iter().map(|p| p.1).collect();
    pairs.len() == left.len() && pairs.len() == right.len()
}

#[test]
fn derived_trial_seeds_are_distinct() {
    let mut seen = HashSet::new();
    for m in 0..10u32 {
        for t in 0..10_000u32 {
            assert!(seen.insert(stable_mix(42, m, t)), "collision at method {m} trial {t}");
        }
    }
}

#[test]
fn corpus_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let sizes = vec![12; 14];
    let corpus = planted_corpus(&sizes, &MITRE_GROUP_OF_TACTIC, 16, 0.15, 5, Taxonomy::mitre()).unwrap();
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, &path, CorpusFormat::Jsonl).unwrap();

    let mut cfg = RunConfig {
        input: Some(InputSpec::Corpus {
            path: path.clone(),
            taxonomy: None,
        }),
        methods: vec![
            MethodSpec::Louvain,
            MethodSpec::Kmeans { k: 4 },
            MethodSpec::Spectral { n_clusters: 4, egn: 4 },
        ],
        trials: 4,
        seed: 9,
        workers: Some(1),
        ..RunConfig::default()
    };
    let out1 = dir.path().join("one");
    let (report, outcome) = run_pipeline(&cfg, &out1, Some(&dir.path().join("spec"))).unwrap();
    assert!(!outcome.any_failed());
    assert_eq!(report.trials.len(), 12);
    assert!(dir.path().join("spec/eigenvalues.csv").exists());
    assert!(report.spectral_zero_multiplicity.is_some());

    let loaded = load_report(&out1.join("report.json")).unwrap();
    verify_report(&loaded).unwrap();
    assert_eq!(loaded.trials, report.trials);

    cfg.workers = Some(3);
    let out2 = dir.path().join("three");
    let (again, _) = run_pipeline(&cfg, &out2, None).unwrap();
    for (a, b) in report.trials.iter().zip(&again.trials) {
        assert_eq!(
            (a.seed, &a.assignment.labels, a.scores),
            (b.seed, &b.assignment.labels, b.scores)
        );
    }
    assert_eq!(
        std::fs::read(out1.join("scores.csv")).unwrap(),
        std::fs::read(out2.join("scores.csv")).unwrap()
    );
}
