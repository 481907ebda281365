//! Question encoder, projector, momentum twin and memory bank.
//!
//! The encoder embeds tokens, optionally runs single-head self-attention
//! blocks, and mean-pools the last layer into the representation. The
//! projector maps that representation to the (optionally L2-normalized) key
//! space of the contrastive loss. Backward passes are written out by hand.

mod bank;
mod encoder;
mod params;

use std::collections::{BTreeSet, HashMap};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::corpus::{Question, Segment};
use crate::formula::symbol_tokens;
use crate::rng::StreamRng;
use crate::{Error, Result};

pub use bank::{BankEntry, MemoryBank, DEFAULT_BANK_CAPACITY, UNIT_NORM_TOLERANCE};
pub use encoder::{backward, forward, positional_encoding, Forward};
pub use params::{momentum_update, BlockParams, NamedTensor, ParamStore, ProjectorParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_embed: usize,
    /// Self-attention blocks, 0 to 2.
    pub n_blocks: usize,
    pub d_ff: usize,
    pub d_hidden: usize,
    pub d_proj: usize,
    /// L2-normalize projector outputs so similarities are cosines.
    pub normalize: bool,
    /// Longer token sequences are truncated.
    pub max_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_embed: 64,
            n_blocks: 1,
            d_ff: 64,
            d_hidden: 64,
            d_proj: 32,
            normalize: true,
            max_len: 96,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks > 2 {
            return Err(Error::Config(format!("n_blocks = {} exceeds 2", self.n_blocks)));
        }
        for (name, v) in [
            ("d_embed", self.d_embed),
            ("d_ff", self.d_ff),
            ("d_hidden", self.d_hidden),
            ("d_proj", self.d_proj),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";

/// Dense token index with `[PAD] = 0` and `[UNK] = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Every distinct token, sorted, after the two special tokens.
    pub fn build<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let distinct: BTreeSet<String> = tokens
            .into_iter()
            .map(Into::into)
            .filter(|t| t != PAD && t != UNK)
            .collect();
        let all = [PAD.to_string(), UNK.to_string()].into_iter().chain(distinct).collect();
        Vocab::from_tokens(all).expect("specials first, tokens distinct")
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(PAD) || tokens.get(1).map(String::as_str) != Some(UNK) {
            return Err(Error::invalid("vocabulary must start with [PAD], [UNK]"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(1)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

/// Whitespace text tokens and formula symbols, numbers split into digits.
pub fn tokenize(q: &Question) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for seg in &q.content {
        match seg {
            Segment::Text(t) => out.push(t.clone()),
            Segment::Formula(f) => out.extend(symbol_tokens(f)?),
        }
    }
    Ok(out)
}

/// Token ids of a question, truncated to `max_len`.
pub fn question_ids(q: &Question, vocab: &Vocab, cfg: &ModelConfig) -> Result<Vec<usize>> {
    let mut ids = vocab.ids(&tokenize(q)?);
    if ids.is_empty() {
        return Err(Error::invalid(format!("question {} has no tokens", q.id)));
    }
    ids.truncate(cfg.max_len);
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub rep: Array1<f64>,
    pub key: Array1<f64>,
}

pub fn encode(q: &Question, params: &ParamStore, vocab: &Vocab, cfg: &ModelConfig) -> Result<Encoded> {
    let f = forward(params, cfg, &question_ids(q, vocab, cfg)?)?;
    Ok(Encoded { rep: f.rep, key: f.key })
}

pub fn init_params(cfg: &ModelConfig, vocab: &Vocab, rng: &mut StreamRng) -> ParamStore {
    ParamStore::init(cfg, vocab.len(), rng)
}
