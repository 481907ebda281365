//! Independent reference implementations shared by the integration tests
//! and the acceptance run. None of these call the functions they check.

#![allow(dead_code)]

use std::collections::HashMap;

use quesco::augment::{
    ask_clause, rename_variable, scalable_occurrences, split_clauses, AugmentConfig, AugmentedQuestion, Strategy,
};
use quesco::corpus::{generate_synthetic, Concept, ConceptPath, GeneratorSpec, KnowledgeHierarchy, Question, Segment};
use quesco::eval::metrics::{doa, mae, macro_f1, pearson, rmse, spearman};
use quesco::formula::{index_sites, parse_formula, FormulaAst};
use quesco::khar::khd;
use quesco::loss::{info_nce, rince, Temperatures};
use quesco::model::{momentum_update, BankEntry, MemoryBank, ModelConfig, ParamStore, Vocab, DEFAULT_BANK_CAPACITY};
use quesco::rng::{stream, StreamRng};
use quesco::trainer::{batch_loss_grad, AnchorInput, TrainConfig, Trainer};
use rand::Rng;

// ---------------------------------------------------------------- loss

/// Ranking loss by plain summation of exponentials, no max subtraction.
pub fn rince_reference(sims: &[Vec<f64>], taus: &[f64]) -> f64 {
    let levels = sims.len() - 2;
    let mut total = 0.0;
    for i in 0..=levels {
        if sims[i].is_empty() {
            continue;
        }
        let num: f64 = sims[i].iter().map(|s| (s / taus[i]).exp()).sum();
        let mut den = 0.0;
        for j in i..sims.len() {
            for s in &sims[j] {
                den += (s / taus[j]).exp();
            }
        }
        total += -(num / den).ln();
    }
    total
}

pub fn info_nce_reference(pos: &[f64], neg: &[f64], tau: f64) -> f64 {
    let num: f64 = pos.iter().map(|s| (s / tau).exp()).sum();
    let den: f64 = num + neg.iter().map(|s| (s / tau).exp()).sum::<f64>();
    -(num / den).ln()
}

pub fn random_unit(rng: &mut StreamRng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

// ---------------------------------------------------------------- gradients

pub struct TinyProblem {
    pub cfg: ModelConfig,
    pub params: ParamStore,
    pub taus: Temperatures,
    pub ids: Vec<Vec<usize>>,
    /// Per anchor, per rank, key vectors.
    pub keys: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TinyProblem {
    pub fn anchors(&self) -> Vec<AnchorInput<'_>> {
        self.ids
            .iter()
            .zip(&self.keys)
            .map(|(ids, ranks)| AnchorInput {
                ids: ids.clone(),
                keys: ranks.iter().map(|set| set.iter().map(Vec::as_slice).collect()).collect(),
            })
            .collect()
    }

    pub fn loss_at(&self, params: &ParamStore) -> f64 {
        batch_loss_grad(params, &self.cfg, &self.taus, &self.anchors()).unwrap().loss
    }
}

/// Random model with V <= 20, d_e <= 8, d_proj <= 4, up to 4 anchors and
/// every rank 0..=4 of a 3-level hierarchy populated.
pub fn tiny_problem(seed: u64) -> TinyProblem {
    let mut rng = stream(seed, "tiny-problem", "");
    let cfg = ModelConfig {
        d_embed: rng.gen_range(2..=8),
        n_blocks: rng.gen_range(0..=2),
        d_ff: rng.gen_range(2..=6),
        d_hidden: rng.gen_range(2..=6),
        d_proj: rng.gen_range(2..=4),
        normalize: seed % 5 != 4,
        max_len: 16,
    };
    let vocab = rng.gen_range(4..=20);
    let mut params = ParamStore::init(&cfg, vocab, &mut rng);
    // Non-zero biases so their gradients are exercised away from zero.
    for (name, t) in params.tensors_mut() {
        if name.ends_with(".b1") || name.ends_with(".b2") {
            for v in t.iter_mut() {
                *v = rng.gen_range(-0.3..0.3);
            }
        }
    }
    let taus = Temperatures::new(vec![0.1, 0.1, 0.225, 0.35, 0.6]).unwrap();
    let batch = rng.gen_range(1..=4);
    let mut ids = Vec::new();
    let mut keys = Vec::new();
    for _ in 0..batch {
        let len = rng.gen_range(1..=6);
        ids.push((0..len).map(|_| rng.gen_range(0..vocab)).collect());
        let ranks: Vec<Vec<Vec<f64>>> = (0..5)
            .map(|_| {
                let n = rng.gen_range(1..=3);
                (0..n).map(|_| random_unit(&mut rng, cfg.d_proj)).collect()
            })
            .collect();
        keys.push(ranks);
    }
    TinyProblem {
        cfg,
        params,
        taus,
        ids,
        keys,
    }
}

/// Denominator floor of the relative error, so gradients that are zero up to
/// rounding do not divide by noise.
pub const REL_ERROR_FLOOR: f64 = 1e-3;
pub const FD_STEP: f64 = 1e-6;

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR)
}

/// Largest relative error between analytic and central-difference gradients,
/// with the name and index where it occurs.
pub fn max_gradient_error(p: &TinyProblem) -> (f64, String) {
    let analytic = batch_loss_grad(&p.params, &p.cfg, &p.taus, &p.anchors()).unwrap().grads;
    let grads: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|(n, d, _)| (n, d.to_vec()))
        .collect();
    let mut worst = (0.0, String::new());
    for (ti, (name, g)) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let mut plus = p.params.clone();
            plus.tensors_mut()[ti].1[i] += FD_STEP;
            let mut minus = p.params.clone();
            minus.tensors_mut()[ti].1[i] -= FD_STEP;
            let numeric = (p.loss_at(&plus) - p.loss_at(&minus)) / (2.0 * FD_STEP);
            let e = rel_error(g[i], numeric);
            if e > worst.0 {
                worst = (e, format!("{name}[{i}] analytic {} numeric {numeric}", g[i]));
            }
        }
    }
    worst
}

// ---------------------------------------------------------------- hierarchies

/// Random forest with every leaf at depth `levels`.
pub fn random_hierarchy(rng: &mut StreamRng) -> KnowledgeHierarchy {
    let levels = rng.gen_range(1..=4);
    let mut concepts = Vec::new();
    let mut frontier: Vec<Option<String>> = vec![None];
    let mut counter = 0;
    for level in 1..=levels {
        let mut next = Vec::new();
        for parent in &frontier {
            for _ in 0..rng.gen_range(1..=3) {
                counter += 1;
                let id = format!("k{counter}");
                concepts.push(Concept {
                    id: id.clone(),
                    level,
                    parent: parent.clone(),
                });
                next.push(Some(id));
            }
        }
        frontier = next;
    }
    KnowledgeHierarchy::new(levels, concepts).unwrap()
}

/// Leaf-to-root chains by parent pointers.
pub struct ParentIndex {
    pub levels: usize,
    parent: HashMap<String, Option<String>>,
    level: HashMap<String, usize>,
    pub leaves: Vec<String>,
}

impl ParentIndex {
    pub fn new(h: &KnowledgeHierarchy) -> Self {
        let parent = h.concepts().iter().map(|c| (c.id.clone(), c.parent.clone())).collect();
        let level = h.concepts().iter().map(|c| (c.id.clone(), c.level)).collect();
        let leaves = h
            .concepts()
            .iter()
            .filter(|c| c.level == h.levels())
            .map(|c| c.id.clone())
            .collect();
        ParentIndex {
            levels: h.levels(),
            parent,
            level,
            leaves,
        }
    }

    fn ancestors(&self, leaf: &str) -> Vec<String> {
        let mut out = vec![leaf.to_string()];
        while let Some(Some(p)) = self.parent.get(out.last().unwrap()) {
            out.push(p.clone());
        }
        out
    }

    /// Root-to-leaf path of a leaf.
    pub fn path(&self, leaf: &str) -> ConceptPath {
        let mut a = self.ancestors(leaf);
        a.reverse();
        ConceptPath(a)
    }

    /// `L + 1 - depth(lowest common ancestor)`, depth 0 when there is none.
    pub fn khd(&self, a: &str, b: &str) -> usize {
        let up_a = self.ancestors(a);
        let depth = self
            .ancestors(b)
            .into_iter()
            .find(|c| up_a.contains(c))
            .map(|c| self.level[&c])
            .unwrap_or(0);
        self.levels + 1 - depth
    }
}

// ---------------------------------------------------------------- metrics

/// Textbook single-pass Pearson formula.
pub fn pearson_reference(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Rank of each value: count below plus the mean position among equals.
pub fn rank_reference(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let below = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_reference(x: &[f64], y: &[f64]) -> f64 {
    pearson_reference(&rank_reference(x), &rank_reference(y))
}

/// Macro-F1 from an explicit confusion matrix `m[true][pred]`.
pub fn macro_f1_from_confusion(m: &[Vec<f64>]) -> f64 {
    let k = m.len();
    let mut sum = 0.0;
    for c in 0..k {
        let tp = m[c][c];
        let fp: f64 = (0..k).filter(|&r| r != c).map(|r| m[r][c]).sum();
        let fn_: f64 = (0..k).filter(|&p| p != c).map(|p| m[c][p]).sum();
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        sum += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    sum / k as f64
}

pub fn doa_reference(truth: &[f64], pred: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..truth.len() {
        for j in 0..truth.len() {
            if truth[i] > truth[j] {
                den += 1.0;
                num += match pred[i].partial_cmp(&pred[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    num / den
}

// ---------------------------------------------------------------- augmentation

fn formula_asts(q: &Question) -> Result<Vec<FormulaAst>, String> {
    q.formulas()
        .map(|f| parse_formula(f).map_err(|e| format!("{f:?} does not parse: {e}")))
        .collect()
}

fn texts(q: &Question) -> Vec<&str> {
    q.content
        .iter()
        .filter_map(|s| match s {
            Segment::Text(t) => Some(t.as_str()),
            Segment::Formula(_) => None,
        })
        .collect()
}

fn sorted<T: std::fmt::Debug>(v: &[T]) -> Vec<String> {
    let mut v: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    v.sort();
    v
}

fn variable_counts(ast: &FormulaAst) -> Vec<usize> {
    index_sites(ast).variables.values().map(Vec::len).collect()
}

fn ask_text(q: &Question) -> Option<Vec<Segment>> {
    let clauses = split_clauses(&q.content);
    ask_clause(&clauses).map(|i| clauses[i].clone())
}

/// Checks that hold for every augmented question, whatever fired.
pub fn check_common(orig: &Question, out: &AugmentedQuestion) -> Result<(), String> {
    let q = &out.question;
    if q.concepts != orig.concepts {
        return Err(format!("concept path changed to {:?}", q.concepts));
    }
    if q.id != orig.id || q.difficulty != orig.difficulty {
        return Err("id or difficulty changed".into());
    }
    formula_asts(q)?;
    if out.applied.is_empty() && q.content != orig.content {
        return Err("content changed with nothing applied".into());
    }
    Ok(())
}

/// Per-strategy invariant for a run where only `strategy` was enabled.
pub fn check_strategy(
    orig: &Question,
    out: &AugmentedQuestion,
    strategy: Strategy,
    cfg: &AugmentConfig,
) -> Result<(), String> {
    check_common(orig, out)?;
    let q = &out.question;
    let Some(applied) = out.applied.first() else {
        return Ok(());
    };
    if out.applied.len() != 1 || applied.strategy != strategy {
        return Err(format!("unexpected applied list {:?}", out.applied));
    }
    let before = formula_asts(orig)?;
    let after = formula_asts(q)?;
    let formulas_same = orig.formulas().eq(q.formulas());
    let text_same = texts(orig) == texts(q);
    let changed: Vec<usize> = (0..before.len().min(after.len()))
        .filter(|&i| before[i] != after[i])
        .collect();
    match strategy {
        Strategy::TextSwap => {
            let (i, j) = applied
                .site
                .strip_prefix("tokens ")
                .and_then(|s| s.split_once("<->"))
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                .ok_or("bad swap site")?;
            let mut expected = orig.content.clone();
            expected.swap(i, j);
            if q.content != expected || !orig.content[i].is_text() || !orig.content[j].is_text() || !formulas_same {
                return Err(format!("swap {i}<->{j} is not a swap of two text tokens"));
            }
        }
        Strategy::TextDelete => {
            let ok = q.content.len() + 1 == orig.content.len()
                && (0..orig.content.len()).any(|i| {
                    orig.content[i].is_text() && {
                        let mut v = orig.content.clone();
                        v.remove(i);
                        v == q.content
                    }
                });
            if !ok || !formulas_same {
                return Err("delete did not remove exactly one text token".into());
            }
        }
        Strategy::VariableRename => {
            let (from, to) = applied.site.split_once("->").ok_or("bad rename site")?;
            if !text_same || before.len() != after.len() || changed.is_empty() {
                return Err("rename touched text or no formula".into());
            }
            if texts(orig).contains(&to) {
                return Err(format!("rename target {to} already used in text"));
            }
            for (b, a) in before.iter().zip(&after) {
                if index_sites(b).variables.contains_key(to) || index_sites(b).functions.contains_key(to) {
                    return Err(format!("rename target {to} already used in a formula"));
                }
                let back = rename_variable(a, to, from).map_err(|e| e.to_string())?;
                if &back != b {
                    return Err(format!("rename {from}->{to} is not invertible"));
                }
            }
        }
        Strategy::VariableScale => {
            let (var, _) = applied.site.split_once('*').ok_or("bad scale site")?;
            if !text_same || before.len() != after.len() || changed.is_empty() {
                return Err("scale touched text or no formula".into());
            }
            for (b, a) in before.iter().zip(&after) {
                if variable_counts(b) != variable_counts(a) {
                    return Err("scale changed variable occurrences".into());
                }
                if index_sites(b).operators.iter().any(|(n, _)| !index_sites(a).operators.iter().any(|(m, _)| m == n)) {
                    return Err("scale removed an operator".into());
                }
                if scalable_occurrences(b, var) == 0 && b != a {
                    return Err(format!("formula without {var} changed"));
                }
            }
        }
        Strategy::OperatorSynonym => {
            if !text_same || changed.len() != 1 {
                return Err(format!("synonym changed {} formulas", changed.len()));
            }
            let (b, a) = (index_sites(&before[changed[0]]), index_sites(&after[changed[0]]));
            let swaps: Vec<(&String, &String)> = b
                .operators
                .iter()
                .zip(&a.operators)
                .filter(|(x, y)| x.0 != y.0 || x.1 != y.1)
                .map(|(x, y)| (&x.0, &y.0))
                .collect();
            let ok = b.operators.len() == a.operators.len()
                && b.variables == a.variables
                && b.numbers == a.numbers
                && swaps.len() == 1
                && cfg.synonym_table.get(swaps[0].0).is_some_and(|c| c.contains(swaps[0].1));
            if !ok {
                return Err(format!("synonym swaps {swaps:?} outside one class"));
            }
        }
        Strategy::NumberReplace => {
            if !text_same || changed.len() != 1 {
                return Err(format!("number replacement changed {} formulas", changed.len()));
            }
            let (b, a) = (index_sites(&before[changed[0]]), index_sites(&after[changed[0]]));
            let diffs = b.numbers.iter().zip(&a.numbers).filter(|(x, y)| x != y).count();
            let ok = b.numbers.len() == a.numbers.len()
                && diffs == 1
                && b.operators == a.operators
                && b.variables == a.variables;
            if !ok {
                return Err("number replacement changed more than one literal".into());
            }
        }
        Strategy::ClauseShuffle => {
            let (cb, ca) = (split_clauses(&orig.content), split_clauses(&q.content));
            if sorted(&cb) != sorted(&ca) || cb == ca || ask_text(orig) != ask_text(q) {
                return Err("shuffle is not a clause permutation keeping the ask clause".into());
            }
            if ask_clause(&cb) != ask_clause(&ca) {
                return Err("shuffle moved the ask clause".into());
            }
        }
        Strategy::ClauseInsert => {
            let (cb, ca) = (split_clauses(&orig.content), split_clauses(&q.content));
            let extra = (0..ca.len()).find(|&i| {
                let mut rest = ca.clone();
                let dup = rest.remove(i);
                rest == cb && cb.contains(&dup)
            });
            if ca.len() != cb.len() + 1 || extra.is_none() || ask_text(orig) != ask_text(q) {
                return Err("insert did not add one copy of an existing clause".into());
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion checks

/// Largest `|rince - info_nce|` over random two-rank problems with one
/// shared temperature.
pub fn reduction_max_error(configs: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..configs {
        let mut rng = stream(c, "reduction", "");
        let dim = rng.gen_range(2..=16);
        let tau = rng.gen_range(0.05..1.0);
        let q = random_unit(&mut rng, dim);
        let pos: Vec<Vec<f64>> = (0..rng.gen_range(1..=4)).map(|_| random_unit(&mut rng, dim)).collect();
        let neg: Vec<Vec<f64>> = (0..rng.gen_range(0..=32)).map(|_| random_unit(&mut rng, dim)).collect();
        let pos_refs: Vec<&[f64]> = pos.iter().map(Vec::as_slice).collect();
        let neg_refs: Vec<&[f64]> = neg.iter().map(Vec::as_slice).collect();
        let taus = Temperatures::uniform(tau, 2).unwrap();
        let r = rince(&q, &[pos_refs.clone(), neg_refs.clone()], &taus).unwrap().total;
        let i = info_nce(&q, &pos_refs, &neg_refs, tau).unwrap();
        worst = worst.max((r - i).abs());
    }
    worst
}

#[derive(Debug, Default)]
pub struct KhdCheck {
    pub pairs: usize,
    pub mismatches: usize,
    pub triples: usize,
    pub violations: usize,
}

/// Compare `khd` with the parent-pointer oracle and test the ultrametric
/// inequality on random leaf triples.
pub fn khd_oracle_check(hierarchies: u64, pairs_each: usize, triples_each: usize) -> KhdCheck {
    let mut out = KhdCheck::default();
    for h in 0..hierarchies {
        let mut rng = stream(h, "khd-oracle", "");
        let hier = random_hierarchy(&mut rng);
        let idx = ParentIndex::new(&hier);
        let levels = hier.levels();
        let pick = |rng: &mut StreamRng| idx.leaves[rng.gen_range(0..idx.leaves.len())].clone();
        let d = |a: &str, b: &str| khd(&idx.path(a), &idx.path(b), levels).unwrap();
        for _ in 0..pairs_each {
            let (a, b) = (pick(&mut rng), pick(&mut rng));
            out.pairs += 1;
            if d(&a, &b) != idx.khd(&a, &b) {
                out.mismatches += 1;
            }
        }
        for _ in 0..triples_each {
            let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            out.triples += 1;
            if d(&a, &c) > d(&a, &b).max(d(&b, &c)) {
                out.violations += 1;
            }
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct AugmentCheck {
    pub calls: usize,
    pub applied: usize,
    pub parse_failures: usize,
    pub concept_changes: usize,
    pub violations: Vec<String>,
}

/// `calls` augmentations over the synthetic corpus, cycling through each
/// single-strategy configuration and the default mixed configuration.
pub fn augmentation_check(calls: usize) -> AugmentCheck {
    let questions = generate_synthetic(&GeneratorSpec::default(), 7).unwrap().questions;
    let mixed = AugmentConfig::default();
    let singles: Vec<(Strategy, AugmentConfig)> = Strategy::ORDER
        .iter()
        .map(|&s| (s, AugmentConfig::default().with_p(1.0).only(&[s])))
        .collect();
    let mut out = AugmentCheck::default();
    for k in 0..calls {
        let q = &questions[k % questions.len()];
        let slot = k % (singles.len() + 1);
        let mut rng = stream(k as u64, "augment-suite", &q.id);
        let cfg = singles.get(slot).map(|(_, c)| c).unwrap_or(&mixed);
        let aug = match quesco::augment::augment(q, cfg, &mut rng) {
            Ok(a) => a,
            Err(e) => {
                out.violations.push(format!("{}: {e}", q.id));
                continue;
            }
        };
        out.calls += 1;
        out.applied += aug.applied.len();
        if aug.question.formulas().any(|f| parse_formula(f).is_err()) {
            out.parse_failures += 1;
        }
        if aug.question.concepts != q.concepts {
            out.concept_changes += 1;
        }
        let verdict = match singles.get(slot) {
            Some((s, c)) => check_strategy(q, &aug, *s, c),
            None => check_common(q, &aug),
        };
        if let Err(e) = verdict {
            out.violations.push(format!("{} call {k}: {e}", q.id));
        }
    }
    out
}

fn entry(source: &str, dim: usize, rng: &mut StreamRng) -> BankEntry {
    BankEntry {
        key: random_unit(rng, dim),
        concepts: ConceptPath::new(["a", "b", "c"]),
        source: source.to_string(),
    }
}

/// FIFO order, eviction and the default capacity.
pub fn bank_check() -> Result<(), String> {
    let mut rng = stream(0, "bank-check", "");
    let mut bank = MemoryBank::new(5, 3).map_err(|e| e.to_string())?;
    let mut model: Vec<String> = Vec::new();
    let mut counter = 0;
    for batch in [2, 1, 3, 4, 0, 7, 2] {
        let entries: Vec<BankEntry> = (0..batch)
            .map(|_| {
                counter += 1;
                entry(&format!("e{counter}"), 3, &mut rng)
            })
            .collect();
        model.extend(entries.iter().map(|e| e.source.clone()));
        bank.enqueue(entries).map_err(|e| e.to_string())?;
        let expected: Vec<&String> = model.iter().skip(model.len().saturating_sub(5)).collect();
        let got: Vec<&String> = bank.snapshot().into_iter().map(|e| &e.source).collect();
        if got != expected {
            return Err(format!("bank holds {got:?}, expected {expected:?}"));
        }
    }
    if DEFAULT_BANK_CAPACITY != 1600 || TrainConfig::default().bank_capacity != 1600 {
        return Err("default bank capacity is not 1600".into());
    }
    let vocab = Vocab::build(["x"]);
    let trainer = Trainer::new(TrainConfig::default(), vocab, 3).map_err(|e| e.to_string())?;
    if trainer.bank().capacity() != 1600 {
        return Err(format!("trainer bank capacity {}", trainer.bank().capacity()));
    }
    Ok(())
}

/// Elementwise momentum update for each `m`, against values computed here.
pub fn momentum_check(ms: &[f64]) -> Result<(), String> {
    let cfg = ModelConfig {
        d_embed: 6,
        n_blocks: 1,
        d_ff: 5,
        d_hidden: 4,
        d_proj: 3,
        normalize: true,
        max_len: 8,
    };
    for &m in ms {
        let query = ParamStore::init(&cfg, 9, &mut stream(1, "momentum", "query"));
        let key0 = ParamStore::init(&cfg, 9, &mut stream(2, "momentum", "key"));
        let mut key = key0.clone();
        momentum_update(&query, &mut key, m).map_err(|e| e.to_string())?;
        for (((name, k, _), (_, q, _)), (_, k0, _)) in key.tensors().into_iter().zip(query.tensors()).zip(key0.tensors()) {
            for i in 0..k.len() {
                let expected = m * k0[i] + (1.0 - m) * q[i];
                if k[i] != expected {
                    return Err(format!("m={m} {name}[{i}]: {} != {expected}", k[i]));
                }
            }
            if m == 0.0 && k != q {
                return Err(format!("m=0 did not copy {name}"));
            }
            if m == 1.0 && k != k0 {
                return Err(format!("m=1 changed {name}"));
            }
        }
    }
    Ok(())
}

pub fn mae_reference(t: &[f64], p: &[f64]) -> f64 {
    t.iter().zip(p).map(|(a, b)| (a - b).abs()).sum::<f64>() / t.len() as f64
}

pub fn rmse_reference(t: &[f64], p: &[f64]) -> f64 {
    (t.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / t.len() as f64).sqrt()
}

/// Absolute differences between each metric and its reference on fixed
/// hand datasets.
pub fn metric_oracle_errors() -> Vec<(&'static str, f64)> {
    let gold = [0.9, 0.1, 0.55, 0.3, 0.75, 0.2, 0.6];
    let pred = [0.82, 0.15, 0.4, 0.41, 0.7, 0.05, 0.66];
    let tied = [3.0, 1.0, 2.0, 2.0, 5.0, 1.0, 4.0, 2.0];
    let tied_pred = [2.5, 0.5, 2.5, 1.0, 4.0, 0.5, 4.5, 3.0];
    let diff_true = [0.2, 0.8, 0.5, 0.5, 0.9, 0.1];
    let diff_pred = [0.25, 0.6, 0.55, 0.4, 0.6, 0.3];
    let truth = ["a", "a", "b", "c", "b", "a", "c", "c", "b", "a"];
    let guess = ["a", "b", "b", "c", "a", "a", "b", "c", "b", "c"];
    let classes = ["a", "b", "c"];
    let mut confusion = vec![vec![0.0; 3]; 3];
    for (t, p) in truth.iter().zip(&guess) {
        let ti = classes.iter().position(|c| c == t).unwrap();
        let pi = classes.iter().position(|c| c == p).unwrap();
        confusion[ti][pi] += 1.0;
    }
    vec![
        ("pearson", (pearson(&gold, &pred).unwrap() - pearson_reference(&gold, &pred)).abs()),
        ("spearman", (spearman(&tied, &tied_pred).unwrap() - spearman_reference(&tied, &tied_pred)).abs()),
        ("macro_f1", (macro_f1(&truth, &guess).unwrap() - macro_f1_from_confusion(&confusion)).abs()),
        ("mae", (mae(&diff_true, &diff_pred).unwrap() - mae_reference(&diff_true, &diff_pred)).abs()),
        ("rmse", (rmse(&diff_true, &diff_pred).unwrap() - rmse_reference(&diff_true, &diff_pred)).abs()),
        ("doa", (doa(&diff_true, &diff_pred).unwrap() - doa_reference(&diff_true, &diff_pred)).abs()),
    ]
}
