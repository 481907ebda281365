mod common;

use std::collections::HashMap;

use common::{doa_reference, metric_oracle_errors, pearson_reference, random_hierarchy, ParentIndex};
use quesco::corpus::SimilarityLabel;
use quesco::eval::metrics::{cosine, doa, mae, pearson, rmse, spearman};
use quesco::eval::{concept_probe, difficulty_probe, rank_similarity_report, zero_shot_similarity, ProbeConfig, RankItem};
use quesco::model::ParamStore;
use quesco::rng::stream;
use rand::Rng;

#[test]
fn metrics_match_direct_formulas() {
    for (name, err) in metric_oracle_errors() {
        assert!(err <= 1e-10, "{name} differs by {err:e}");
    }
}

#[test]
fn hand_checked_values() {
    // Pearson of (1,2,3,4,5) against (2,4,5,4,5) is 0.7745966692...
    let r = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 5.0, 4.0, 5.0]).unwrap();
    assert!((r - 0.6f64.sqrt()).abs() < 1e-12);
    assert!((mae(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.5).abs() < 1e-15);
    assert!((rmse(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
    // Pairs with truth_i > truth_j: (b,a) agrees, (c,a) tie, (c,b) disagrees.
    assert!((doa(&[0.1, 0.5, 0.9], &[0.2, 0.6, 0.2]).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn trivial_extremes() {
    let gold = [0.1, 0.4, 0.35, 0.8, 0.6];
    assert!((pearson(&gold, &gold).unwrap() - 1.0).abs() < 1e-12);
    assert!((spearman(&gold, &gold).unwrap() - 1.0).abs() < 1e-12);
    let neg: Vec<f64> = gold.iter().map(|g| -g).collect();
    assert!((pearson(&gold, &neg).unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(mae(&gold, &gold), Some(0.0));
    assert_eq!(rmse(&gold, &gold), Some(0.0));
    assert_eq!(doa(&gold, &gold), Some(1.0));
    assert_eq!(doa(&gold, &neg), Some(0.0));
    assert_eq!(doa(&[0.3, 0.3], &[0.1, 0.2]), None);
    assert_eq!(pearson(&[1.0, 1.0, 1.0], &gold[..3]), None);
}

#[test]
fn rank_metrics_are_invariant_to_monotone_maps() {
    for seed in 0..30 {
        let mut rng = stream(seed, "invariance", "");
        let n = rng.gen_range(5..20);
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mono: Vec<f64> = p.iter().map(|v| (3.0 * v).exp() + v.powi(3)).collect();
        let affine: Vec<f64> = p.iter().map(|v| 2.5 * v - 7.0).collect();
        assert!((spearman(&t, &p).unwrap() - spearman(&t, &mono).unwrap()).abs() < 1e-12);
        assert!((pearson(&t, &p).unwrap() - pearson(&t, &affine).unwrap()).abs() < 1e-12);
        assert!((doa(&t, &p).unwrap() - doa(&t, &mono).unwrap()).abs() < 1e-12);
        assert!((pearson(&t, &p).unwrap() - pearson_reference(&t, &p)).abs() < 1e-10);
        assert!((doa(&t, &p).unwrap() - doa_reference(&t, &p)).abs() < 1e-12);
    }
}

#[test]
fn zero_shot_similarity_uses_cosine() {
    let mut reps = HashMap::new();
    reps.insert("a".to_string(), vec![1.0, 0.0]);
    reps.insert("b".to_string(), vec![1.0, 1.0]);
    reps.insert("c".to_string(), vec![0.0, 1.0]);
    reps.insert("d".to_string(), vec![-1.0, 0.2]);
    let label = |a: &str, b: &str, s: f64| SimilarityLabel {
        question_a: a.into(),
        question_b: b.into(),
        score: s,
    };
    let labels: Vec<SimilarityLabel> = [("a", "b"), ("a", "c"), ("a", "d"), ("b", "c")]
        .iter()
        .map(|(x, y)| label(x, y, cosine(&reps[*x], &reps[*y])))
        .collect();
    let r = zero_shot_similarity(&reps, &labels).unwrap();
    assert!((r.metric("pearson").unwrap() - 1.0).abs() < 1e-12);
    assert!((r.metric("spearman").unwrap() - 1.0).abs() < 1e-12);
    assert!(zero_shot_similarity(&reps, &labels[..1]).is_err());
    assert!(zero_shot_similarity(&reps, &[labels[0].clone(), label("a", "zz", 0.1)]).is_err());
}

#[test]
fn constant_predictor_scores_chance_on_balanced_classes() {
    // Identical features give the classifier nothing but its bias.
    let k = 4;
    let reps: Vec<Vec<f64>> = vec![vec![0.5, 0.5]; 200];
    let labels: Vec<String> = (0..200).map(|i| format!("c{}", i % k)).collect();
    let r = concept_probe(&reps, &labels, &ProbeConfig::default()).unwrap();
    let acc = r.metric("accuracy").unwrap();
    let base = r.metric("majority_baseline").unwrap();
    assert!((acc - base).abs() < 1e-12);
    assert!((acc - 1.0 / k as f64).abs() < 0.1, "accuracy {acc}");
}

#[test]
fn perfect_difficulty_predictions() {
    let reps: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0]).collect();
    let d: Vec<f64> = reps.iter().map(|r| 0.2 + 0.5 * r[0]).collect();
    let r = difficulty_probe(&reps, &d, &ProbeConfig::default()).unwrap();
    assert!(r.metric("mae").unwrap() < 1e-12);
    assert!(r.metric("rmse").unwrap() < 1e-12);
    assert!((r.metric("pcc").unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(r.metric("doa"), Some(1.0));
    let flat = difficulty_probe(&reps, &[0.5; 20], &ProbeConfig::default()).unwrap();
    assert!(flat.metric("doa").is_none());
    assert!(flat.notes.iter().any(|n| n.starts_with("doa")));
}

#[test]
fn rank_report_grouping_matches_brute_force_khd() {
    let mut rng = stream(4, "rank-report", "");
    let h = random_hierarchy(&mut rng);
    let idx = ParentIndex::new(&h);
    let items: Vec<RankItem> = (0..30)
        .map(|i| {
            let leaf = &idx.leaves[rng.gen_range(0..idx.leaves.len())];
            RankItem {
                id: format!("q{i}"),
                concepts: idx.path(leaf),
                rep: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.1],
                view_rep: None,
            }
        })
        .collect();
    let report = rank_similarity_report(&items, h.levels(), 1000, 0).unwrap();
    let mut counts = vec![0usize; h.levels() + 2];
    let mut sums = vec![0.0; h.levels() + 2];
    for a in &items {
        for b in &items {
            if a.id != b.id {
                let r = idx.khd(a.concepts.leaf().unwrap(), b.concepts.leaf().unwrap());
                counts[r] += 1;
                sums[r] += cosine(&a.rep, &b.rep);
            }
        }
    }
    for row in &report.rows {
        assert_eq!(row.pairs, counts[row.rank]);
        assert!((row.mean - sums[row.rank] / counts[row.rank] as f64).abs() < 1e-12);
    }
    assert_eq!(report.rows.len(), counts.iter().filter(|c| **c > 0).count());
}

#[test]
fn probes_leave_encoder_parameters_untouched() {
    let cfg = quesco::model::ModelConfig::default();
    let params = ParamStore::init(&cfg, 30, &mut stream(0, "frozen", ""));
    let before = params.digest();
    let reps: Vec<Vec<f64>> = (0..30).map(|i| params.embedding.row(i).to_vec()).collect();
    let labels: Vec<String> = (0..30).map(|i| format!("c{}", i % 3)).collect();
    let diffs: Vec<f64> = (0..30).map(|i| (i % 7) as f64 / 7.0).collect();
    concept_probe(&reps, &labels, &ProbeConfig::default()).unwrap();
    difficulty_probe(&reps, &diffs, &ProbeConfig::default()).unwrap();
    assert_eq!(params.digest(), before);
}
