use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelConfig;
use crate::rng::StreamRng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Trainable tensors of one encoder plus its projector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub embedding: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub projector: ProjectorParams,
}

/// A flat tensor with its name and shape, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

fn uniform2(rows: usize, cols: usize, bound: f64, rng: &mut StreamRng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..=bound))
}

fn fan_in_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

impl ParamStore {
    /// Uniform `±1/sqrt(fan_in)` weights and zero biases.
    pub fn init(cfg: &ModelConfig, vocab_size: usize, rng: &mut StreamRng) -> Self {
        let d = cfg.d_embed;
        let embedding = uniform2(vocab_size, d, fan_in_bound(d), rng);
        let blocks = (0..cfg.n_blocks)
            .map(|_| BlockParams {
                wq: uniform2(d, d, fan_in_bound(d), rng),
                wk: uniform2(d, d, fan_in_bound(d), rng),
                wv: uniform2(d, d, fan_in_bound(d), rng),
                wo: uniform2(d, d, fan_in_bound(d), rng),
                w1: uniform2(d, cfg.d_ff, fan_in_bound(d), rng),
                b1: Array1::zeros(cfg.d_ff),
                w2: uniform2(cfg.d_ff, d, fan_in_bound(cfg.d_ff), rng),
                b2: Array1::zeros(d),
            })
            .collect();
        let projector = ProjectorParams {
            w1: uniform2(d, cfg.d_hidden, fan_in_bound(d), rng),
            b1: Array1::zeros(cfg.d_hidden),
            w2: uniform2(cfg.d_hidden, cfg.d_proj, fan_in_bound(cfg.d_hidden), rng),
            b2: Array1::zeros(cfg.d_proj),
        };
        ParamStore {
            embedding,
            blocks,
            projector,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for (_, t) in self.tensors_mut() {
            t.fill(value);
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn d_embed(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn d_proj(&self) -> usize {
        self.projector.w2.ncols()
    }

    /// Tensors in a fixed order with dotted names.
    pub fn tensors(&self) -> Vec<(String, &[f64], Vec<usize>)> {
        fn s2(a: &Array2<f64>) -> (&[f64], Vec<usize>) {
            (a.as_slice().expect("standard layout"), a.shape().to_vec())
        }
        fn s1(a: &Array1<f64>) -> (&[f64], Vec<usize>) {
            (a.as_slice().expect("standard layout"), a.shape().to_vec())
        }
        let mut items: Vec<(String, (&[f64], Vec<usize>))> = vec![("embedding".into(), s2(&self.embedding))];
        for (b, blk) in self.blocks.iter().enumerate() {
            items.push((format!("blocks.{b}.wq"), s2(&blk.wq)));
            items.push((format!("blocks.{b}.wk"), s2(&blk.wk)));
            items.push((format!("blocks.{b}.wv"), s2(&blk.wv)));
            items.push((format!("blocks.{b}.wo"), s2(&blk.wo)));
            items.push((format!("blocks.{b}.w1"), s2(&blk.w1)));
            items.push((format!("blocks.{b}.b1"), s1(&blk.b1)));
            items.push((format!("blocks.{b}.w2"), s2(&blk.w2)));
            items.push((format!("blocks.{b}.b2"), s1(&blk.b2)));
        }
        let p = &self.projector;
        items.push(("projector.w1".into(), s2(&p.w1)));
        items.push(("projector.b1".into(), s1(&p.b1)));
        items.push(("projector.w2".into(), s2(&p.w2)));
        items.push(("projector.b2".into(), s1(&p.b2)));
        items.into_iter().map(|(name, (data, shape))| (name, data, shape)).collect()
    }

    /// Mutable tensors in the same order as [`ParamStore::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        out.push(("embedding".into(), self.embedding.as_slice_mut().expect("standard layout")));
        for (b, blk) in self.blocks.iter_mut().enumerate() {
            let BlockParams {
                wq,
                wk,
                wv,
                wo,
                w1,
                b1,
                w2,
                b2,
            } = blk;
            for (n, t) in [("wq", wq), ("wk", wk), ("wv", wv), ("wo", wo), ("w1", w1), ("w2", w2)] {
                out.push((format!("blocks.{b}.{n}"), t.as_slice_mut().expect("standard layout")));
            }
            out.push((format!("blocks.{b}.b1"), b1.as_slice_mut().expect("standard layout")));
            out.push((format!("blocks.{b}.b2"), b2.as_slice_mut().expect("standard layout")));
        }
        let ProjectorParams { w1, b1, w2, b2 } = &mut self.projector;
        out.push(("projector.w1".into(), w1.as_slice_mut().expect("standard layout")));
        out.push(("projector.b1".into(), b1.as_slice_mut().expect("standard layout")));
        out.push(("projector.w2".into(), w2.as_slice_mut().expect("standard layout")));
        out.push(("projector.b2".into(), b2.as_slice_mut().expect("standard layout")));
        out.sort_by_key(|(name, _)| self_order(name));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, d, _)| d.len()).sum()
    }

    pub fn to_named(&self) -> Vec<NamedTensor> {
        self.tensors()
            .into_iter()
            .map(|(name, data, shape)| NamedTensor {
                name,
                shape,
                data: data.to_vec(),
            })
            .collect()
    }

    /// Rebuild from named tensors; every expected name must be present with its shape.
    pub fn from_named(cfg: &ModelConfig, vocab_size: usize, named: &[NamedTensor]) -> Result<Self> {
        let mut store = ParamStore::init(cfg, vocab_size, &mut crate::rng::stream(0, "shape", ""));
        if named.len() != store.tensors().len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                store.tensors().len(),
                named.len()
            )));
        }
        let shapes: Vec<Vec<usize>> = store.tensors().into_iter().map(|(_, _, s)| s).collect();
        for ((name, slot), shape) in store.tensors_mut().into_iter().zip(shapes) {
            let t = named
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Shape(format!("missing tensor {name}")))?;
            if t.shape != shape || t.data.len() != slot.len() {
                return Err(Error::Shape(format!(
                    "tensor {name}: expected shape {shape:?}, found {:?}",
                    t.shape
                )));
            }
            slot.copy_from_slice(&t.data);
        }
        Ok(store)
    }

    /// SHA-256 over names and little-endian values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, data, _) in self.tensors() {
            h.update(name.as_bytes());
            for v in data {
                h.update(v.to_le_bytes());
            }
        }
        format!("{:x}", h.finalize())
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, data, _) in self.tensors() {
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{name}[{i}]")));
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &ParamStore) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.0 == y.0 && x.2 == y.2)
    }
}

/// Sort key reproducing the order of [`ParamStore::tensors`].
fn self_order(name: &str) -> (usize, usize, usize) {
    const BLOCK: [&str; 8] = ["wq", "wk", "wv", "wo", "w1", "b1", "w2", "b2"];
    const PROJ: [&str; 4] = ["w1", "b1", "w2", "b2"];
    if name == "embedding" {
        return (0, 0, 0);
    }
    let parts: Vec<&str> = name.split('.').collect();
    match parts.as_slice() {
        ["blocks", b, n] => (
            1,
            b.parse().unwrap_or(0),
            BLOCK.iter().position(|x| x == n).unwrap_or(0),
        ),
        [_, n] => (2, 0, PROJ.iter().position(|x| x == n).unwrap_or(0)),
        _ => (3, 0, 0),
    }
}

/// `key <- m * key + (1 - m) * query`, elementwise.
pub fn momentum_update(query: &ParamStore, key: &mut ParamStore, m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::invalid(format!("momentum {m} outside [0, 1]")));
    }
    if !query.same_shape(key) {
        return Err(Error::Shape("query and key parameter shapes differ".into()));
    }
    let q = query.tensors();
    for ((_, k), (_, qd, _)) in key.tensors_mut().into_iter().zip(q) {
        for (kv, &qv) in k.iter_mut().zip(qd) {
            *kv = m * *kv + (1.0 - m) * qv;
        }
    }
    Ok(())
}
