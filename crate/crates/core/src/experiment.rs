//! Desk-scale end-to-end run: generate a synthetic corpus, hold out a share
//! of questions, pre-train on the rest, and evaluate frozen representations.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::augment::augment;
use crate::corpus::{generate_synthetic, GeneratorSpec, Question, SyntheticCorpus};
use crate::eval::{
    concept_probe, difficulty_probe, rank_similarity_report, split_indices, zero_shot_similarity, ProbeConfig,
    ProbeResult, RankItem, RankReport,
};
use crate::model::{encode, ModelConfig, ParamStore, Vocab};
use crate::trainer::{run_pretraining, RunOutput, StepRecord, TrainConfig, Trainer};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    pub corpus_seed: u64,
    /// Share of questions never seen in pre-training.
    pub holdout_fraction: f64,
    pub train: TrainConfig,
    pub probe: ProbeConfig,
    /// Anchors sampled for the rank-similarity table.
    pub report_anchors: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorSpec::default(),
            corpus_seed: 7,
            holdout_fraction: 0.2,
            train: TrainConfig {
                seed: 7,
                ..TrainConfig::default()
            },
            probe: ProbeConfig {
                seed: 7,
                ..ProbeConfig::default()
            },
            report_anchors: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub train_questions: usize,
    pub heldout_questions: usize,
    pub history: Vec<StepRecord>,
    /// Mean loss over the first and last tenth of steps.
    pub loss_first_tenth: f64,
    pub loss_last_tenth: f64,
    pub rank_report: RankReport,
    pub similarity: ProbeResult,
    pub concept_level1: ProbeResult,
    pub concept_level2: ProbeResult,
    pub difficulty: ProbeResult,
    pub train_seconds: f64,
    pub total_seconds: f64,
}

impl ExperimentResult {
    /// The metrics log exactly as the trainer writes it.
    pub fn metrics_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.history {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }
}

fn tenth_means(history: &[StepRecord]) -> (f64, f64) {
    let n = history.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let k = (n / 10).max(1);
    let mean = |rs: &[StepRecord]| rs.iter().map(|r| r.loss).sum::<f64>() / rs.len() as f64;
    (mean(&history[..k]), mean(&history[n - k..]))
}

/// Pre-projector representations of `questions`.
pub fn embed_all(questions: &[Question], params: &ParamStore, vocab: &Vocab, cfg: &ModelConfig) -> Result<Vec<Vec<f64>>> {
    questions
        .iter()
        .map(|q| encode(q, params, vocab, cfg).map(|e| e.rep.to_vec()))
        .collect()
}

/// Rank-similarity items for `questions`, each with one augmented view.
pub fn rank_items(questions: &[Question], trainer: &Trainer, seed: u64) -> Result<Vec<RankItem>> {
    let cfg = trainer.config();
    let params = trainer.query_params();
    let vocab = trainer.vocab();
    questions
        .iter()
        .map(|q| {
            let mut r = rng::stream(seed, "report-view", &q.id);
            let view = augment(q, &cfg.augment, &mut r)?;
            Ok(RankItem {
                id: q.id.clone(),
                concepts: q.concepts.clone(),
                rep: encode(q, params, vocab, &cfg.model)?.rep.to_vec(),
                view_rep: Some(encode(&view.question, params, vocab, &cfg.model)?.rep.to_vec()),
            })
        })
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&RunOutput>) -> Result<ExperimentResult> {
    let start = Instant::now();
    let SyntheticCorpus {
        hierarchy,
        questions,
        labels,
    } = generate_synthetic(&cfg.generator, cfg.corpus_seed)?;
    let (train_idx, held_idx) = split_indices(questions.len(), cfg.holdout_fraction, cfg.corpus_seed)?;
    let train: Vec<Question> = train_idx.iter().map(|&i| questions[i].clone()).collect();
    let held: Vec<Question> = held_idx.iter().map(|&i| questions[i].clone()).collect();

    let t0 = Instant::now();
    let trainer = run_pretraining(&train, &hierarchy, &cfg.train, None, out)?;
    let train_seconds = t0.elapsed().as_secs_f64();

    let model = &trainer.config().model;
    let reps = embed_all(&questions, trainer.query_params(), trainer.vocab(), model)?;
    let by_id: HashMap<String, Vec<f64>> = questions.iter().map(|q| q.id.clone()).zip(reps.iter().cloned()).collect();

    let items = rank_items(&held, &trainer, cfg.train.seed)?;
    let rank_report = rank_similarity_report(&items, hierarchy.levels(), cfg.report_anchors, cfg.train.seed)?;
    let similarity = zero_shot_similarity(&by_id, &labels)?;
    let level = |l: usize| -> Result<Vec<String>> {
        questions
            .iter()
            .map(|q| {
                q.concepts
                    .at_level(l)
                    .map(str::to_string)
                    .ok_or_else(|| Error::invalid(format!("question {} has no level-{l} concept", q.id)))
            })
            .collect()
    };
    let mut concept_level1 = concept_probe(&reps, &level(1)?, &cfg.probe)?;
    concept_level1.task = "concept_probe_level1".into();
    let mut concept_level2 = concept_probe(&reps, &level(2.min(hierarchy.levels()))?, &cfg.probe)?;
    concept_level2.task = "concept_probe_level2".into();
    let (diff_reps, diffs): (Vec<Vec<f64>>, Vec<f64>) = questions
        .iter()
        .zip(&reps)
        .filter_map(|(q, r)| q.difficulty.map(|d| (r.clone(), d)))
        .unzip();
    let difficulty = difficulty_probe(&diff_reps, &diffs, &cfg.probe)?;

    let history = trainer.history().to_vec();
    let (loss_first_tenth, loss_last_tenth) = tenth_means(&history);
    Ok(ExperimentResult {
        train_questions: train.len(),
        heldout_questions: held.len(),
        history,
        loss_first_tenth,
        loss_last_tenth,
        rank_report,
        similarity,
        concept_level1,
        concept_level2,
        difficulty,
        train_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}
