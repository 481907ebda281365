//! Pre-training loop.
//!
//! One step: augment each anchor, encode the views with the momentum encoder,
//! rank the memory bank plus the anchor's own view by KH-distance, apply the
//! ranking loss to the query encoding of the original question, take an AdamW
//! step, move the momentum encoder, and enqueue the views' keys. All
//! randomness is keyed by the seed and the step counter, so a run resumed
//! from a checkpoint follows the uninterrupted trajectory exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{augment, vocabulary_extras, AugmentConfig};
use crate::corpus::{KnowledgeHierarchy, Question};
use crate::khar::{partition, RankMember};
use crate::loss::{rince_sims_grad, similarities, LossReport, Temperatures};
use crate::model::{
    backward, forward, momentum_update, question_ids, tokenize, BankEntry, MemoryBank, ModelConfig, NamedTensor,
    ParamStore, Vocab, DEFAULT_BANK_CAPACITY,
};
use crate::{rng, Error, Result};

/// Learning rate of the full-scale setup.
pub const FULL_SCALE_LR: f64 = 5e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorPolicy {
    Abort,
    /// Drop the failing anchor from the step and count it.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub momentum: f64,
    pub bank_capacity: usize,
    pub temperatures: Temperatures,
    pub seed: u64,
    /// Write an intermediate checkpoint every this many steps; 0 disables.
    pub checkpoint_every: u64,
    pub on_error: ErrorPolicy,
    pub model: ModelConfig,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            steps: 2000,
            lr: 1e-3,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: 0.999,
            bank_capacity: DEFAULT_BANK_CAPACITY,
            temperatures: Temperatures::standard(),
            seed: 0,
            checkpoint_every: 0,
            on_error: ErrorPolicy::Abort,
            model: ModelConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.bank_capacity < self.batch_size {
            return bad(format!(
                "bank_capacity {} is smaller than batch_size {}",
                self.bank_capacity, self.batch_size
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr = {} must be positive", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.eps > 0.0) {
            return bad("weight_decay must be non-negative and eps positive".into());
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1)"));
            }
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return bad(format!("momentum = {} outside [0, 1]", self.momentum));
        }
        self.model.validate()?;
        self.augment.validate()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }
}

/// AdamW with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub t: u64,
    pub m: ParamStore,
    pub v: ParamStore,
}

impl AdamW {
    pub fn new(cfg: &TrainConfig, like: &ParamStore) -> Self {
        AdamW {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
            t: 0,
            m: like.zeros_like(),
            v: like.zeros_like(),
        }
    }

    /// `p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let g = grads.tensors();
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(g);
        for ((((_, p), (_, m)), (_, v)), (_, g, _)) in tensors {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] *= 1.0 - self.lr * self.weight_decay;
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub per_rank: Vec<f64>,
    pub skipped_ranks: Vec<usize>,
    pub bank_size: usize,
    pub anchors: usize,
    /// `id: reason` for anchors dropped under the skip policy.
    pub skipped_anchors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub config_hash: String,
    pub levels: usize,
    pub vocab: Vocab,
    pub step: u64,
    pub query: Vec<NamedTensor>,
    pub key: Vec<NamedTensor>,
    pub adam_t: u64,
    pub adam_m: Vec<NamedTensor>,
    pub adam_v: Vec<NamedTensor>,
    pub bank: MemoryBank,
    pub history: Vec<StepRecord>,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer(&mut w, self)?;
            w.flush()?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.config.hash() != ckpt.config_hash {
            return Err(Error::Config("checkpoint config hash does not match its config".into()));
        }
        Ok(ckpt)
    }

    /// Query encoder parameters.
    pub fn query_params(&self) -> Result<ParamStore> {
        ParamStore::from_named(&self.config.model, self.vocab.len(), &self.query)
    }
}

/// Training state: both encoders, optimizer, bank and history.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    levels: usize,
    vocab: Vocab,
    step: u64,
    query: ParamStore,
    key: ParamStore,
    opt: AdamW,
    bank: MemoryBank,
    history: Vec<StepRecord>,
}

/// Vocabulary over a corpus plus every symbol augmentation can introduce.
pub fn build_vocab(questions: &[Question], augment: &AugmentConfig) -> Result<Vocab> {
    let mut tokens = vocabulary_extras(augment);
    for q in questions {
        tokens.extend(tokenize(q)?);
    }
    Ok(Vocab::build(tokens))
}

/// One anchor of a batch: its token ids and the key vectors of each rank set.
pub struct AnchorInput<'a> {
    pub ids: Vec<usize>,
    pub keys: Vec<Vec<&'a [f64]>>,
}

pub struct BatchLoss {
    /// Mean of the per-anchor totals.
    pub loss: f64,
    pub reports: Vec<LossReport>,
    /// Gradient of `loss` with respect to the query parameters.
    pub grads: ParamStore,
}

/// Mean ranking loss over anchors and its gradient. Keys are constants.
pub fn batch_loss_grad(
    params: &ParamStore,
    model: &ModelConfig,
    taus: &Temperatures,
    anchors: &[AnchorInput<'_>],
) -> Result<BatchLoss> {
    if anchors.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let scale = 1.0 / anchors.len() as f64;
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let mut reports = Vec::with_capacity(anchors.len());
    for a in anchors {
        let fwd = forward(params, model, &a.ids)?;
        let query = fwd.key.as_slice().expect("contiguous");
        let sims = similarities(query, &a.keys)?;
        let (report, d_sims) = rince_sims_grad(&sims, taus)?;
        loss += report.total * scale;
        let mut d_query = Array1::<f64>::zeros(query.len());
        for (set, ds) in a.keys.iter().zip(&d_sims) {
            for (k, &g) in set.iter().zip(ds) {
                if g != 0.0 {
                    d_query.scaled_add(g * scale, &ArrayView1::from(*k));
                }
            }
        }
        backward(params, model, &fwd, d_query.view(), &mut grads);
        reports.push(report);
    }
    Ok(BatchLoss { loss, reports, grads })
}

struct Anchor<'a> {
    question: &'a Question,
    view_key: Array1<f64>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, vocab: Vocab, levels: usize) -> Result<Self> {
        cfg.validate()?;
        if cfg.temperatures.len() != levels + 2 {
            return Err(Error::Config(format!(
                "{} temperatures for a {levels}-level hierarchy, expected {}",
                cfg.temperatures.len(),
                levels + 2
            )));
        }
        let query = ParamStore::init(&cfg.model, vocab.len(), &mut rng::stream(cfg.seed, "init", "params"));
        let key = query.clone();
        let opt = AdamW::new(&cfg, &query);
        let bank = MemoryBank::with_norm_check(cfg.bank_capacity, cfg.model.d_proj, cfg.model.normalize)?;
        Ok(Trainer {
            cfg,
            levels,
            vocab,
            step: 0,
            query,
            key,
            opt,
            bank,
            history: Vec::new(),
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let cfg = ckpt.config;
        cfg.validate()?;
        let v = ckpt.vocab.len();
        let query = ParamStore::from_named(&cfg.model, v, &ckpt.query)?;
        let key = ParamStore::from_named(&cfg.model, v, &ckpt.key)?;
        let mut opt = AdamW::new(&cfg, &query);
        opt.t = ckpt.adam_t;
        opt.m = ParamStore::from_named(&cfg.model, v, &ckpt.adam_m)?;
        opt.v = ParamStore::from_named(&cfg.model, v, &ckpt.adam_v)?;
        Ok(Trainer {
            cfg,
            levels: ckpt.levels,
            vocab: ckpt.vocab,
            step: ckpt.step,
            query,
            key,
            opt,
            bank: ckpt.bank,
            history: ckpt.history,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.cfg.clone(),
            config_hash: self.cfg.hash(),
            levels: self.levels,
            vocab: self.vocab.clone(),
            step: self.step,
            query: self.query.to_named(),
            key: self.key.to_named(),
            adam_t: self.opt.t,
            adam_m: self.opt.m.to_named(),
            adam_v: self.opt.v.to_named(),
            bank: self.bank.clone(),
            history: self.history.clone(),
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn query_params(&self) -> &ParamStore {
        &self.query
    }

    pub fn key_params(&self) -> &ParamStore {
        &self.key
    }

    pub fn bank(&self) -> &MemoryBank {
        &self.bank
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    fn prepare_anchor<'a>(&self, q: &'a Question) -> Result<Anchor<'a>> {
        let key = format!("{}/{}", self.step, q.id);
        let mut r = rng::stream(self.cfg.seed, "augment", &key);
        let view = augment(q, &self.cfg.augment, &mut r)?;
        let ids = question_ids(&view.question, &self.vocab, &self.cfg.model)?;
        let fwd = forward(&self.key, &self.cfg.model, &ids)?;
        Ok(Anchor {
            question: q,
            view_key: fwd.key,
        })
    }

    /// One optimization step over a batch of distinct questions.
    pub fn step(&mut self, batch: &[&Question]) -> Result<StepRecord> {
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = batch.iter().find(|q| !seen.insert(q.id.as_str())) {
            return Err(Error::invalid(format!("question {} appears twice in a batch", dup.id)));
        }
        let mut anchors = Vec::with_capacity(batch.len());
        let mut skipped_anchors = Vec::new();
        for q in batch {
            match self.prepare_anchor(q) {
                Ok(a) => anchors.push(a),
                Err(e) if self.cfg.on_error == ErrorPolicy::Skip => skipped_anchors.push(format!("{}: {e}", q.id)),
                Err(e) => return Err(e),
            }
        }
        if anchors.is_empty() {
            return Err(Error::invalid(format!("step {}: no usable anchors", self.step)));
        }

        let bank = self.bank.snapshot();
        let candidates: Vec<(&str, &crate::corpus::ConceptPath)> =
            bank.iter().map(|e| (e.source.as_str(), &e.concepts)).collect();
        let mut inputs = Vec::with_capacity(anchors.len());
        for a in &anchors {
            let q = a.question;
            let part = partition(&q.id, &q.concepts, true, candidates.iter().copied(), self.levels)?;
            let keys = part
                .sets
                .iter()
                .map(|set| {
                    set.iter()
                        .map(|m| match m {
                            RankMember::Augmented => a.view_key.as_slice().expect("contiguous"),
                            RankMember::Candidate(i) => bank[*i].key.as_slice(),
                        })
                        .collect()
                })
                .collect();
            inputs.push(AnchorInput {
                ids: question_ids(q, &self.vocab, &self.cfg.model)?,
                keys,
            });
        }
        let batch_loss = batch_loss_grad(&self.query, &self.cfg.model, &self.cfg.temperatures, &inputs)?;
        let BatchLoss { loss, grads, .. } = batch_loss;
        let mut per_rank = vec![0.0; self.levels + 1];
        let mut skip_count = vec![0usize; self.levels + 1];
        for report in &batch_loss.reports {
            for (acc, l) in per_rank.iter_mut().zip(&report.per_rank) {
                *acc += l / inputs.len() as f64;
            }
            for &r in &report.skipped_ranks {
                skip_count[r] += 1;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("step {} loss {loss}", self.step)));
        }
        grads
            .check_finite()
            .map_err(|e| Error::NonFinite(format!("step {} gradient: {e}", self.step)))?;

        self.opt.step(&mut self.query, &grads);
        momentum_update(&self.query, &mut self.key, self.cfg.momentum)?;
        let entries = anchors
            .into_iter()
            .map(|a| BankEntry {
                key: a.view_key.to_vec(),
                concepts: a.question.concepts.clone(),
                source: a.question.id.clone(),
            })
            .collect();
        let anchor_count = batch.len() - skipped_anchors.len();
        self.bank.enqueue(entries)?;
        let record = StepRecord {
            step: self.step,
            loss,
            per_rank,
            skipped_ranks: (0..=self.levels).filter(|&r| skip_count[r] == anchor_count).collect(),
            bank_size: self.bank.len(),
            anchors: anchor_count,
            skipped_anchors,
        };
        self.step += 1;
        self.history.push(record.clone());
        Ok(record)
    }

    /// Batch for the current step: seeded per-epoch shuffles, remainder dropped.
    pub fn batch_indices(&self, corpus_len: usize) -> Result<Vec<usize>> {
        batch_indices(self.cfg.seed, self.step, self.cfg.batch_size, corpus_len)
    }
}

pub fn batch_indices(seed: u64, step: u64, batch_size: usize, corpus_len: usize) -> Result<Vec<usize>> {
    let per_epoch = (corpus_len / batch_size) as u64;
    if per_epoch == 0 {
        return Err(Error::Config(format!(
            "corpus of {corpus_len} questions is smaller than batch_size {batch_size}"
        )));
    }
    let epoch = step / per_epoch;
    let within = (step % per_epoch) as usize;
    let mut order: Vec<usize> = (0..corpus_len).collect();
    order.shuffle(&mut rng::stream(seed, "epoch", &epoch.to_string()));
    Ok(order[within * batch_size..(within + 1) * batch_size].to_vec())
}

/// Where a run writes its artifacts.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
}

impl RunOutput {
    pub fn metrics_path(&self) -> PathBuf {
        self.dir.join("metrics.jsonl")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.dir.join("checkpoint.json")
    }

    pub fn intermediate_checkpoint(&self, step: u64) -> PathBuf {
        self.dir.join(format!("checkpoint-{step:06}.json"))
    }
}

/// Train until `cfg.steps`, from scratch or from `resume`.
pub fn run_pretraining(
    corpus: &[Question],
    hierarchy: &KnowledgeHierarchy,
    cfg: &TrainConfig,
    resume: Option<Checkpoint>,
    out: Option<&RunOutput>,
) -> Result<Trainer> {
    let mut trainer = match resume {
        Some(ckpt) => {
            if ckpt.config_hash != cfg.hash() {
                return Err(Error::Config("checkpoint was written under a different config".into()));
            }
            Trainer::from_checkpoint(ckpt)?
        }
        None => Trainer::new(cfg.clone(), build_vocab(corpus, &cfg.augment)?, hierarchy.levels())?,
    };
    if trainer.levels != hierarchy.levels() {
        return Err(Error::Config("checkpoint hierarchy depth differs from the given hierarchy".into()));
    }
    let mut log = match out {
        Some(o) => {
            fs::create_dir_all(&o.dir)?;
            let mut w = BufWriter::new(File::create(o.metrics_path())?);
            for r in trainer.history() {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            Some(w)
        }
        None => None,
    };
    while trainer.step < cfg.steps {
        let idx = trainer.batch_indices(corpus.len())?;
        let batch: Vec<&Question> = idx.iter().map(|&i| &corpus[i]).collect();
        let record = trainer.step(&batch)?;
        if let Some(w) = log.as_mut() {
            serde_json::to_writer(&mut *w, &record)?;
            w.write_all(b"\n")?;
        }
        if let Some(o) = out {
            if cfg.checkpoint_every > 0 && trainer.step % cfg.checkpoint_every == 0 && trainer.step < cfg.steps {
                if let Some(w) = log.as_mut() {
                    w.flush()?;
                }
                trainer.checkpoint().save(o.intermediate_checkpoint(trainer.step))?;
            }
        }
    }
    if let Some(mut w) = log {
        w.flush()?;
    }
    if let Some(o) = out {
        trainer.checkpoint().save(o.checkpoint_path())?;
    }
    Ok(trainer)
}
