use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::corpus::ConceptPath;
use crate::{Error, Result};

pub const DEFAULT_BANK_CAPACITY: usize = 1600;

/// Allowed deviation of a stored key's norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub key: Vec<f64>,
    pub concepts: ConceptPath,
    pub source: String,
}

/// Fixed-capacity FIFO of momentum-encoded keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    capacity: usize,
    dim: usize,
    unit_norm: bool,
    entries: VecDeque<BankEntry>,
}

impl MemoryBank {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        Self::with_norm_check(capacity, dim, true)
    }

    /// A bank that accepts keys of any norm when `unit_norm` is false.
    pub fn with_norm_check(capacity: usize, dim: usize, unit_norm: bool) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(Error::invalid(format!(
                "bank capacity {capacity} and dimension {dim} must be positive"
            )));
        }
        Ok(MemoryBank {
            capacity,
            dim,
            unit_norm,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    fn check(&self, entry: &BankEntry) -> Result<()> {
        if entry.key.len() != self.dim {
            return Err(Error::Shape(format!(
                "bank key for {} has dim {}, expected {}",
                entry.source,
                entry.key.len(),
                self.dim
            )));
        }
        if let Some(v) = entry.key.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("bank key for {} holds {v}", entry.source)));
        }
        if self.unit_norm {
            let norm = entry.key.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::invalid(format!(
                    "bank key for {} has norm {norm}, expected 1",
                    entry.source
                )));
            }
        }
        Ok(())
    }

    /// Append entries, evicting the oldest beyond capacity. Nothing is added
    /// if any entry is rejected.
    pub fn enqueue(&mut self, entries: Vec<BankEntry>) -> Result<()> {
        for e in &entries {
            self.check(e)?;
        }
        for e in entries {
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
            }
            self.entries.push_back(e);
        }
        Ok(())
    }

    /// Entries oldest first.
    pub fn snapshot(&self) -> Vec<&BankEntry> {
        self.entries.iter().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BankEntry> {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, key: Vec<f64>) -> BankEntry {
        BankEntry {
            key,
            concepts: ConceptPath::new(["a"]),
            source: id.into(),
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut bank = MemoryBank::new(2, 2).unwrap();
        for id in ["a", "b", "c"] {
            bank.enqueue(vec![entry(id, vec![1.0, 0.0])]).unwrap();
        }
        let ids: Vec<&str> = bank.snapshot().iter().map(|e| e.source.as_str()).collect();
        assert_eq!(ids, vec!["b", "c"]);
    }

    #[test]
    fn rejects_bad_keys_atomically() {
        let mut bank = MemoryBank::new(4, 2).unwrap();
        let batch = vec![entry("a", vec![0.6, 0.8]), entry("b", vec![1.0, 1.0])];
        assert!(bank.enqueue(batch).is_err());
        assert!(bank.is_empty());
        assert!(bank.enqueue(vec![entry("c", vec![1.0])]).is_err());
        let mut loose = MemoryBank::with_norm_check(4, 2, false).unwrap();
        loose.enqueue(vec![entry("b", vec![1.0, 1.0])]).unwrap();
        assert_eq!(loose.len(), 1);
    }
}
