//! Contrastive pre-training of mathematical question representations.
//!
//! The pipeline is: questions with a concept path in a knowledge hierarchy are
//! augmented at content level (text, formula) and structure level, candidates
//! are ranked by knowledge-hierarchy distance, and a small encoder is trained
//! with a ranking contrastive loss against a momentum-encoded memory bank.
//! Frozen representations are then scored on similarity, concept and
//! difficulty probes.

pub mod augment;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod formula;
pub mod khar;
pub mod loss;
pub mod model;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
