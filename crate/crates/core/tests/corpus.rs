use quesco::corpus::{
    generate_synthetic, load_corpus, load_hierarchy, load_labels, save_hierarchy, write_corpus, write_jsonl,
    GeneratorSpec,
};
use quesco::eval::metrics::spearman;
use quesco::khar::khd;

#[test]
fn default_corpus_shape() {
    let c = generate_synthetic(&GeneratorSpec::default(), 7).unwrap();
    assert_eq!(c.questions.len(), 720);
    assert_eq!(c.hierarchy.levels(), 3);
    assert_eq!(c.hierarchy.level_sizes(), vec![4, 12, 36]);
    for q in &c.questions {
        c.hierarchy.validate_path(&q.concepts).unwrap();
        let d = q.difficulty.unwrap();
        assert!((0.0..=1.0).contains(&d));
    }
    assert_eq!(c.labels.len(), 4 * 250);
}

#[test]
fn gold_similarity_falls_with_kh_distance() {
    let c = generate_synthetic(&GeneratorSpec::default(), 3).unwrap();
    let by_id: std::collections::HashMap<&str, _> = c.questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut sums = [0.0; 5];
    let mut counts = [0usize; 5];
    let mut dist = Vec::new();
    let mut score = Vec::new();
    for l in &c.labels {
        let d = khd(&by_id[l.question_a.as_str()].concepts, &by_id[l.question_b.as_str()].concepts, 3).unwrap();
        sums[d] += l.score;
        counts[d] += 1;
        dist.push(d as f64);
        score.push(l.score);
    }
    let means: Vec<f64> = (1..=4).map(|d| sums[d] / counts[d] as f64).collect();
    assert!(means.windows(2).all(|w| w[0] > w[1]), "{means:?}");
    assert!(spearman(&dist, &score).unwrap() < -0.9);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let c = generate_synthetic(&GeneratorSpec::default(), 5).unwrap();
    let hp = dir.path().join("hierarchy.json");
    let qp = dir.path().join("corpus.jsonl");
    let lp = dir.path().join("labels.jsonl");
    save_hierarchy(&c.hierarchy, &hp).unwrap();
    write_corpus(&qp, &c.questions).unwrap();
    write_jsonl(&lp, &c.labels).unwrap();
    let h = load_hierarchy(&hp).unwrap();
    assert_eq!(h, c.hierarchy);
    assert_eq!(load_corpus(&qp, &h).unwrap(), c.questions);
    assert_eq!(load_labels(&lp).unwrap(), c.labels);
}

#[test]
fn corpus_with_foreign_concepts_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = generate_synthetic(&GeneratorSpec::default(), 5).unwrap();
    let other = generate_synthetic(
        &GeneratorSpec {
            branching: vec![2, 2, 2],
            ..GeneratorSpec::default()
        },
        5,
    )
    .unwrap();
    let qp = dir.path().join("corpus.jsonl");
    write_corpus(&qp, &c.questions).unwrap();
    assert!(load_corpus(&qp, &other.hierarchy).is_err());
    std::fs::write(&qp, "{\"id\": \"q\", \"content\": \"$x$\"}\n").unwrap();
    assert!(load_corpus(&qp, &c.hierarchy).is_err());
}
