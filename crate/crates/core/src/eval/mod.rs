//! Downstream evaluation on frozen representations.
//!
//! All probes read pre-projector representations and never touch encoder
//! parameters. Splits are seeded 80/20 shuffles.

pub mod metrics;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{ConceptPath, SimilarityLabel};
use crate::khar::khd;
use crate::{rng, Error, Result};

pub use metrics::{accuracy, average_ranks, cosine, doa, macro_f1, mae, pearson, rmse, spearman};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub task: String,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: BTreeMap<String, f64>,
    /// Metrics that are undefined on this data, with the reason.
    pub notes: Vec<String>,
}

impl ProbeResult {
    fn new(task: &str, train_size: usize, test_size: usize) -> Self {
        ProbeResult {
            task: task.into(),
            train_size,
            test_size,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn put(&mut self, name: &str, value: Option<f64>, why: &str) {
        match value {
            Some(v) if v.is_finite() => {
                self.metrics.insert(name.into(), v);
            }
            _ => self.notes.push(format!("{name} undefined: {why}")),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{} (train {}, test {})\n", self.task, self.train_size, self.test_size);
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "  {k:<18} {v:.4}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        s
    }
}

fn lookup<'a>(reps: &'a HashMap<String, Vec<f64>>, id: &str) -> Result<&'a [f64]> {
    reps.get(id)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::invalid(format!("no representation for question {id}")))
}

/// Cosine of each labeled pair against its gold score.
pub fn zero_shot_similarity(reps: &HashMap<String, Vec<f64>>, labels: &[SimilarityLabel]) -> Result<ProbeResult> {
    if labels.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 labeled pairs, got {}", labels.len())));
    }
    let mut pred = Vec::with_capacity(labels.len());
    let mut gold = Vec::with_capacity(labels.len());
    for l in labels {
        pred.push(cosine(lookup(reps, &l.question_a)?, lookup(reps, &l.question_b)?));
        gold.push(l.score);
    }
    let mut r = ProbeResult::new("zero_shot_similarity", 0, labels.len());
    r.put("pearson", pearson(&pred, &gold), "constant predictions or labels");
    r.put("spearman", spearman(&pred, &gold), "constant predictions or labels");
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub seed: u64,
    pub test_fraction: f64,
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            seed: 0,
            test_fraction: 0.2,
            epochs: 300,
            lr: 0.5,
            l2: 1e-4,
        }
    }
}

/// Seeded shuffle split into (train, test) index lists.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction == 0.0 {
        return Err(Error::invalid(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split", &n.to_string()));
    let test = ((n as f64) * test_fraction).round() as usize;
    if test == 0 || test == n {
        return Err(Error::invalid(format!("{n} items cannot be split with test fraction {test_fraction}")));
    }
    let test_idx = order[..test].to_vec();
    let train_idx = order[test..].to_vec();
    Ok((train_idx, test_idx))
}

#[derive(Debug, Clone)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[&[f64]]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

fn check_rows(reps: &[Vec<f64>], labels: usize) -> Result<()> {
    if reps.len() != labels {
        return Err(Error::Shape(format!("{} representations for {labels} labels", reps.len())));
    }
    if let Some(d) = reps.first().map(Vec::len) {
        if d == 0 || reps.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("representations must share a positive dimension".into()));
        }
    }
    Ok(())
}

/// Multinomial logistic regression trained by full-batch gradient descent.
#[derive(Debug, Clone)]
pub struct LinearClassifier {
    classes: Vec<String>,
    weights: DMatrix<f64>,
    standardizer: Standardizer,
}

fn design(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows[0].len();
    DMatrix::from_fn(rows.len(), d + 1, |i, j| if j == d { 1.0 } else { rows[i][j] })
}

impl LinearClassifier {
    pub fn fit(rows: &[&[f64]], labels: &[&str], cfg: &ProbeConfig) -> Self {
        let mut classes: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        classes.sort();
        classes.dedup();
        let standardizer = Standardizer::fit(rows);
        let x = design(&rows.iter().map(|r| standardizer.apply(r)).collect::<Vec<_>>());
        let (n, d) = x.shape();
        let k = classes.len();
        let mut y = DMatrix::zeros(n, k);
        for (i, l) in labels.iter().enumerate() {
            let c = classes.binary_search_by(|c| c.as_str().cmp(l)).expect("label among classes");
            y[(i, c)] = 1.0;
        }
        let mut w = DMatrix::zeros(d, k);
        for _ in 0..cfg.epochs {
            let probs = softmax_rows(&x * &w);
            let mut grad = x.transpose() * (probs - &y) / n as f64;
            grad += &w * cfg.l2;
            w -= grad * cfg.lr;
        }
        LinearClassifier {
            classes,
            weights: w,
            standardizer,
        }
    }

    pub fn predict(&self, row: &[f64]) -> &str {
        let x = design(&[self.standardizer.apply(row)]);
        let scores = x * &self.weights;
        let best = (0..scores.ncols())
            .max_by(|&a, &b| scores[(0, a)].total_cmp(&scores[(0, b)]).then(b.cmp(&a)))
            .expect("at least one class");
        &self.classes[best]
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }
}

fn softmax_rows(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in m.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    m
}

/// Linear classifier on frozen representations, reporting accuracy, macro-F1
/// and the majority-class baseline. Test classes never seen in training are
/// counted and always scored as errors.
pub fn concept_probe(reps: &[Vec<f64>], labels: &[String], cfg: &ProbeConfig) -> Result<ProbeResult> {
    check_rows(reps, labels.len())?;
    let (train, test) = split_indices(reps.len(), cfg.test_fraction, cfg.seed)?;
    let rows: Vec<&[f64]> = train.iter().map(|&i| reps[i].as_slice()).collect();
    let ys: Vec<&str> = train.iter().map(|&i| labels[i].as_str()).collect();
    let clf = LinearClassifier::fit(&rows, &ys, cfg);
    let truth: Vec<&str> = test.iter().map(|&i| labels[i].as_str()).collect();
    let pred: Vec<&str> = test.iter().map(|&i| clf.predict(&reps[i])).collect();

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for y in &ys {
        *counts.entry(y).or_default() += 1;
    }
    let majority = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(c, _)| *c)
        .expect("non-empty training split");
    let baseline: Vec<&str> = vec![majority; truth.len()];
    let unseen = truth.iter().filter(|t| !counts.contains_key(*t)).count();

    let mut r = ProbeResult::new("concept_probe", train.len(), test.len());
    r.put("accuracy", accuracy(&truth, &pred), "empty test split");
    r.put("macro_f1", macro_f1(&truth, &pred), "empty test split");
    r.put("majority_baseline", accuracy(&truth, &baseline), "empty test split");
    r.metrics.insert("classes".into(), clf.classes().len() as f64);
    r.metrics.insert("unseen_test_items".into(), unseen as f64);
    Ok(r)
}

/// Least-squares fit with intercept; ridge when the normal matrix is singular.
pub fn fit_linear_regression(rows: &[Vec<f64>], y: &[f64]) -> DVector<f64> {
    let x = design(rows);
    let xt = x.transpose();
    let xtx = &xt * &x;
    let xty = &xt * DVector::from_column_slice(y);
    let d = xtx.nrows();
    if let Some(ch) = xtx.clone().cholesky() {
        let beta = ch.solve(&xty);
        let cond_ok = beta.iter().all(|v| v.is_finite());
        if cond_ok && xtx.clone().rank(1e-10 * xtx.norm()) == d {
            return beta;
        }
    }
    let lambda = 1e-3 * (xtx.trace() / d as f64).max(1e-12);
    let ridge = xtx + DMatrix::identity(d, d) * lambda;
    ridge.cholesky().expect("ridge system is positive definite").solve(&xty)
}

/// Linear regression of difficulty on frozen representations.
pub fn difficulty_probe(reps: &[Vec<f64>], difficulties: &[f64], cfg: &ProbeConfig) -> Result<ProbeResult> {
    check_rows(reps, difficulties.len())?;
    if reps.is_empty() {
        return Err(Error::invalid("no labeled questions"));
    }
    let (train, test) = split_indices(reps.len(), cfg.test_fraction, cfg.seed)?;
    let rows: Vec<Vec<f64>> = train.iter().map(|&i| reps[i].clone()).collect();
    let ys: Vec<f64> = train.iter().map(|&i| difficulties[i]).collect();
    let beta = fit_linear_regression(&rows, &ys);
    let d = reps[0].len();
    let predict = |r: &[f64]| r.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>() + beta[d];
    let truth: Vec<f64> = test.iter().map(|&i| difficulties[i]).collect();
    let pred: Vec<f64> = test.iter().map(|&i| predict(&reps[i])).collect();
    let mut r = ProbeResult::new("difficulty_probe", train.len(), test.len());
    r.put("mae", mae(&truth, &pred), "empty test split");
    r.put("rmse", rmse(&truth, &pred), "empty test split");
    r.put("pcc", pearson(&truth, &pred), "constant predictions or labels");
    r.put("doa", doa(&truth, &pred), "all test labels are equal");
    Ok(r)
}

/// One question for the rank-similarity analysis.
#[derive(Debug, Clone)]
pub struct RankItem {
    pub id: String,
    pub concepts: ConceptPath,
    pub rep: Vec<f64>,
    /// Representation of an augmented view, giving the rank-0 pair.
    pub view_rep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub pairs: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub levels: usize,
    pub rows: Vec<RankRow>,
}

impl RankReport {
    pub fn mean_at(&self, rank: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.rank == rank).map(|r| r.mean)
    }

    /// True when every rank `0..=L+1` is present and means strictly decrease.
    pub fn strictly_decreasing(&self) -> bool {
        let means: Option<Vec<f64>> = (0..=self.levels + 1).map(|r| self.mean_at(r)).collect();
        means.is_some_and(|m| m.windows(2).all(|w| w[0] > w[1]))
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("khd  pairs   mean     std\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:<4} {:<7} {:>7.4}  {:.4}", r.rank, r.pairs, r.mean, r.std);
        }
        s
    }
}

/// Mean and standard deviation of cosine per KH-distance over all pairs of
/// up to `max_anchors` sampled anchors with every other item; rank 0 pairs
/// each sampled anchor with its own view. Ranks without pairs are omitted.
pub fn rank_similarity_report(items: &[RankItem], levels: usize, max_anchors: usize, seed: u64) -> Result<RankReport> {
    let mut anchors: Vec<usize> = (0..items.len()).collect();
    if anchors.len() > max_anchors {
        anchors.shuffle(&mut rng::stream(seed, "rank-report", &items.len().to_string()));
        anchors.truncate(max_anchors);
        anchors.sort_unstable();
    }
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); levels + 2];
    for &a in &anchors {
        let anchor = &items[a];
        if let Some(view) = &anchor.view_rep {
            buckets[0].push(cosine(&anchor.rep, view));
        }
        for (b, other) in items.iter().enumerate() {
            if b == a || other.id == anchor.id {
                continue;
            }
            let rank = khd(&anchor.concepts, &other.concepts, levels)?;
            buckets[rank].push(cosine(&anchor.rep, &other.rep));
        }
    }
    let rows = buckets
        .into_iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(rank, b)| {
            let n = b.len() as f64;
            let mean = b.iter().sum::<f64>() / n;
            let var = b.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            RankRow {
                rank,
                pairs: b.len(),
                mean,
                std: var.sqrt(),
            }
        })
        .collect();
    Ok(RankReport { levels, rows })
}
