//! InfoNCE and the ranking contrastive loss over rank partitions.
//!
//! Similarities are grouped by rank `0..=L+1`. For each non-empty rank `i <= L`
//!
//! ```text
//! l_i = -log( sum_{p in Q^i} exp(s_p / t_i) / sum_{j >= i} sum_{p in Q^j} exp(s_p / t_j) )
//! ```
//!
//! Every term in a denominator uses the temperature of its own rank. Rank
//! `L+1` only ever appears in denominators.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-rank temperatures `t_0 ..= t_{L+1}`, positive and non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Temperatures(Vec<f64>);

impl Temperatures {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 temperatures, got {}",
                taus.len()
            )));
        }
        for (i, &t) in taus.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("temperature {i} = {t} is not positive")));
            }
        }
        if let Some(i) = taus.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::Config(format!(
                "temperatures must be non-decreasing: t_{i} = {} > t_{} = {}",
                taus[i],
                i + 1,
                taus[i + 1]
            )));
        }
        Ok(Temperatures(taus))
    }

    /// `{0.1, 0.1, 0.225, 0.35, 0.6}` for a 3-level hierarchy.
    pub fn standard() -> Self {
        Temperatures(vec![0.1, 0.1, 0.225, 0.35, 0.6])
    }

    pub fn uniform(t: f64, ranks: usize) -> Result<Self> {
        Self::new(vec![t; ranks])
    }

    /// Number of ranks, `L + 2`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hierarchy depth `L` these temperatures cover.
    pub fn levels(&self) -> usize {
        self.0.len() - 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Temperatures {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Temperatures::new(v)
    }
}

impl From<Temperatures> for Vec<f64> {
    fn from(t: Temperatures) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    /// `l_0 ..= l_L`; skipped ranks hold 0.
    pub per_rank: Vec<f64>,
    pub skipped_ranks: Vec<usize>,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check_shapes(sims: &[Vec<f64>], taus: &Temperatures) -> Result<()> {
    if sims.len() != taus.len() {
        return Err(Error::Shape(format!(
            "{} rank sets but {} temperatures",
            sims.len(),
            taus.len()
        )));
    }
    for (i, set) in sims.iter().enumerate() {
        if let Some(s) = set.iter().find(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("similarity {s} in rank {i}")));
        }
    }
    if sims[..sims.len() - 1].iter().all(Vec::is_empty) {
        return Err(Error::UndefinedLoss("all rank sets 0..=L are empty".into()));
    }
    Ok(())
}

fn scaled<'a>(sims: &'a [Vec<f64>], taus: &'a [f64], from: usize) -> impl Iterator<Item = f64> + Clone + 'a {
    sims[from..]
        .iter()
        .zip(&taus[from..])
        .flat_map(|(set, &t)| set.iter().map(move |s| s / t))
}

/// Ranking loss from similarities already grouped by rank.
pub fn rince_from_sims(sims: &[Vec<f64>], taus: &Temperatures) -> Result<LossReport> {
    rince_with_grad(sims, taus, false).map(|(r, _)| r)
}

/// Loss together with `d total / d s` for every similarity, shaped like `sims`.
pub fn rince_sims_grad(sims: &[Vec<f64>], taus: &Temperatures) -> Result<(LossReport, Vec<Vec<f64>>)> {
    rince_with_grad(sims, taus, true)
}

fn rince_with_grad(sims: &[Vec<f64>], taus: &Temperatures, want_grad: bool) -> Result<(LossReport, Vec<Vec<f64>>)> {
    check_shapes(sims, taus)?;
    let t = taus.as_slice();
    let levels = sims.len() - 2;
    let mut grad: Vec<Vec<f64>> = sims.iter().map(|s| vec![0.0; if want_grad { s.len() } else { 0 }]).collect();
    let mut per_rank = vec![0.0; levels + 1];
    let mut skipped = Vec::new();
    let mut total = 0.0;
    for i in 0..=levels {
        if sims[i].is_empty() {
            skipped.push(i);
            continue;
        }
        let num = log_sum_exp(sims[i].iter().map(|s| s / t[i]));
        let den = log_sum_exp(scaled(sims, t, i));
        let l = den - num;
        per_rank[i] = l;
        total += l;
        if want_grad {
            for (g, s) in grad[i].iter_mut().zip(&sims[i]) {
                *g -= (s / t[i] - num).exp() / t[i];
            }
            for j in i..sims.len() {
                for (g, s) in grad[j].iter_mut().zip(&sims[j]) {
                    *g += (s / t[j] - den).exp() / t[j];
                }
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("ranking loss total".into()));
    }
    Ok((
        LossReport {
            total,
            per_rank,
            skipped_ranks: skipped,
        },
        grad,
    ))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ranking loss for one query against key vectors grouped by rank.
pub fn rince(query: &[f64], keys: &[Vec<&[f64]>], taus: &Temperatures) -> Result<LossReport> {
    let sims = similarities(query, keys)?;
    rince_from_sims(&sims, taus)
}

pub fn similarities(query: &[f64], keys: &[Vec<&[f64]>]) -> Result<Vec<Vec<f64>>> {
    keys.iter()
        .map(|set| {
            set.iter()
                .map(|k| {
                    if k.len() != query.len() {
                        Err(Error::Shape(format!(
                            "key of dim {} against query of dim {}",
                            k.len(),
                            query.len()
                        )))
                    } else {
                        Ok(dot(query, k))
                    }
                })
                .collect()
        })
        .collect()
}

/// Standard InfoNCE with a single temperature.
pub fn info_nce(query: &[f64], positives: &[&[f64]], negatives: &[&[f64]], tau: f64) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::UndefinedLoss("no positives".into()));
    }
    let taus = Temperatures::uniform(tau, 2)?;
    let keys = vec![positives.to_vec(), negatives.to_vec()];
    let sims = similarities(query, &keys)?;
    check_shapes(&sims, &taus)?;
    let num = log_sum_exp(sims[0].iter().map(|s| s / tau));
    let den = log_sum_exp(sims.iter().flatten().map(|s| s / tau));
    Ok(den - num)
}
