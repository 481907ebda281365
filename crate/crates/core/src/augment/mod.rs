//! Two-level question augmentation.
//!
//! Content level runs first (text, then formula strategies), structure level
//! second. Every strategy draws one Bernoulli(p) decision in a fixed order,
//! whether or not it is enabled or applicable, so a given `(question, seed)`
//! always sees the same decisions. The concept path and difficulty label are
//! carried over unchanged.

mod formula_ops;
mod structure;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Question, Segment};
use crate::formula::{index_sites, is_function_name, parse_formula, render_formula, FormulaAst};
use crate::{Error, Result};

pub use formula_ops::{
    has_replacement, rename_variable, replace_number, replace_operator, sample_replacement,
    scalable_occurrences, scale_variable, NameCollision, ScaleFactor,
};
pub use structure::{ask_clause, split_clauses, structure_insert, structure_shuffle};
pub use text::{is_interrogative, text_delete, text_swap, INTERROGATIVE_MARKERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    TextSwap,
    TextDelete,
    VariableRename,
    VariableScale,
    OperatorSynonym,
    NumberReplace,
    ClauseShuffle,
    ClauseInsert,
}

impl Strategy {
    /// Application order.
    pub const ORDER: [Strategy; 8] = [
        Strategy::TextSwap,
        Strategy::TextDelete,
        Strategy::VariableRename,
        Strategy::VariableScale,
        Strategy::OperatorSynonym,
        Strategy::NumberReplace,
        Strategy::ClauseShuffle,
        Strategy::ClauseInsert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::TextSwap => "text_swap",
            Strategy::TextDelete => "text_delete",
            Strategy::VariableRename => "variable_rename",
            Strategy::VariableScale => "variable_scale",
            Strategy::OperatorSynonym => "operator_synonym",
            Strategy::NumberReplace => "number_replace",
            Strategy::ClauseShuffle => "clause_shuffle",
            Strategy::ClauseInsert => "clause_insert",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Operator synonym classes enabled by default.
pub const DEFAULT_SYNONYM_CLASSES: [&[&str]; 2] = [&["sin", "cos", "tan"], &["log", "ln"]];

pub fn synonym_table_from_classes(classes: &[&[&str]]) -> BTreeMap<String, Vec<String>> {
    let mut table = BTreeMap::new();
    for class in classes {
        for &member in class.iter() {
            let others = class
                .iter()
                .filter(|&&o| o != member)
                .map(|o| o.to_string())
                .collect();
            table.insert(member.to_string(), others);
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Per-strategy firing probability.
    pub p: f64,
    pub enabled: BTreeSet<Strategy>,
    pub scale_factors: Vec<ScaleFactor>,
    pub synonym_table: BTreeMap<String, Vec<String>>,
    pub identifier_pool: Vec<String>,
    /// Maximum relative change of a replaced number.
    pub number_jitter: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            p: 0.3,
            enabled: Strategy::ORDER.into_iter().collect(),
            scale_factors: vec![
                ScaleFactor::integer(2),
                ScaleFactor::integer(3),
                ScaleFactor::new(1, 2).expect("1/2 terminates"),
            ],
            synonym_table: synonym_table_from_classes(&DEFAULT_SYNONYM_CLASSES),
            identifier_pool: ["u", "v", "w", "a", "b", "c", "m", "n", "p", "q", "r", "k", "y", "z"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            number_jitter: 1.0,
        }
    }
}

impl AugmentConfig {
    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn only(mut self, strategies: &[Strategy]) -> Self {
        self.enabled = strategies.iter().copied().collect();
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: AugmentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1]", self.p));
        }
        if self.identifier_pool.is_empty() {
            return bad("identifier pool is empty".into());
        }
        for name in &self.identifier_pool {
            let valid = parse_formula(name)
                .map(|ast| matches!(ast.root, crate::formula::Node::Variable(ref v) if v == name))
                .unwrap_or(false);
            if !valid || is_function_name(name) {
                return bad(format!("{name:?} is not a renameable identifier"));
            }
        }
        if !(self.number_jitter > 0.0) {
            return bad(format!("number jitter {} must be positive", self.number_jitter));
        }
        for (name, class) in &self.synonym_table {
            let probe = operator_probe(name)
                .ok_or_else(|| Error::Config(format!("unknown operator {name:?} in synonym table")))?;
            for other in class {
                let mut node = probe.clone();
                if other == name || !node.set_operator_name(other) {
                    return bad(format!("{other:?} cannot stand in for {name:?}"));
                }
                let symmetric = self
                    .synonym_table
                    .get(other)
                    .is_some_and(|back| back.contains(name));
                if !symmetric {
                    return bad(format!("synonym table is not symmetric for {name:?} / {other:?}"));
                }
            }
        }
        Ok(())
    }
}

/// A node carrying operator `name`, for arity checks.
fn operator_probe(name: &str) -> Option<crate::formula::Node> {
    use crate::formula::{Node, Op, Rel};
    if let Some(op) = Op::from_name(name) {
        let args = vec![Node::var("x"); op.arity()];
        return Some(Node::Operator { op, args });
    }
    Rel::from_name(name).map(|rel| Node::relation(rel, Node::var("x"), Node::var("y")))
}

/// Formula symbols the augmenter can introduce, for vocabulary building.
pub fn vocabulary_extras(cfg: &AugmentConfig) -> Vec<String> {
    let mut sources: Vec<String> = cfg.identifier_pool.clone();
    for name in cfg.synonym_table.keys() {
        if let Some(node) = operator_probe(name) {
            sources.push(crate::formula::render_node(&node));
        }
    }
    for f in &cfg.scale_factors {
        sources.push(f.to_string());
    }
    sources.push("0123456789".into());
    let mut out = BTreeSet::new();
    for src in sources {
        if let Ok(tokens) = crate::formula::symbol_tokens(&src) {
            out.extend(tokens);
        }
    }
    out.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Applied {
    pub strategy: Strategy,
    pub site: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedQuestion {
    pub question: Question,
    pub applied: Vec<Applied>,
}

struct Formulas {
    asts: BTreeMap<usize, FormulaAst>,
    modified: BTreeSet<usize>,
}

impl Formulas {
    fn parse(tokens: &[Segment]) -> Result<Self> {
        let mut asts = BTreeMap::new();
        for (i, seg) in tokens.iter().enumerate() {
            if let Segment::Formula(src) = seg {
                asts.insert(i, parse_formula(src)?);
            }
        }
        Ok(Formulas {
            asts,
            modified: BTreeSet::new(),
        })
    }

    /// Variable names in order of first appearance.
    fn variables(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for ast in self.asts.values() {
            let idx = index_sites(ast);
            let mut firsts: Vec<(&Vec<usize>, &String)> = idx
                .variables
                .iter()
                .map(|(name, paths)| (&paths[0], name))
                .collect();
            firsts.sort();
            for (_, name) in firsts {
                if !seen.contains(name) {
                    seen.push(name.clone());
                }
            }
        }
        seen
    }

    fn identifiers_in_use(&self, tokens: &[Segment]) -> BTreeSet<String> {
        let mut used = BTreeSet::new();
        for ast in self.asts.values() {
            let idx = index_sites(ast);
            used.extend(idx.variables.into_keys());
            used.extend(idx.functions.into_keys());
        }
        for seg in tokens {
            if let Segment::Text(t) = seg {
                used.insert(t.clone());
            }
        }
        used
    }

    fn write_back(self, tokens: &mut [Segment]) {
        for i in self.modified {
            tokens[i] = Segment::Formula(render_formula(&self.asts[&i]));
        }
    }
}

fn rename<R: Rng + ?Sized>(
    tokens: &[Segment],
    formulas: &mut Formulas,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Option<String> {
    let vars = formulas.variables();
    if vars.is_empty() {
        return None;
    }
    let used = formulas.identifiers_in_use(tokens);
    let free: Vec<&String> = cfg.identifier_pool.iter().filter(|n| !used.contains(*n)).collect();
    let from = vars.choose(rng)?.clone();
    let to = (*free.choose(rng)?).clone();
    for (i, ast) in formulas.asts.iter_mut() {
        if index_sites(ast).variables.contains_key(&from) {
            *ast = rename_variable(ast, &from, &to).ok()?;
            formulas.modified.insert(*i);
        }
    }
    Some(format!("{from}->{to}"))
}

fn scale<R: Rng + ?Sized>(formulas: &mut Formulas, cfg: &AugmentConfig, rng: &mut R) -> Option<String> {
    let vars: Vec<String> = formulas
        .variables()
        .into_iter()
        .filter(|v| formulas.asts.values().any(|a| scalable_occurrences(a, v) > 0))
        .collect();
    let factors: Vec<ScaleFactor> = cfg.scale_factors.iter().copied().filter(|f| !f.is_one()).collect();
    if vars.is_empty() || factors.is_empty() {
        return None;
    }
    let var = vars.choose(rng)?.clone();
    let factor = *factors.choose(rng)?;
    for (i, ast) in formulas.asts.iter_mut() {
        if scalable_occurrences(ast, &var) > 0 {
            *ast = scale_variable(ast, &var, factor);
            formulas.modified.insert(*i);
        }
    }
    Some(format!("{var}*{factor}"))
}

fn synonym<R: Rng + ?Sized>(formulas: &mut Formulas, cfg: &AugmentConfig, rng: &mut R) -> Option<String> {
    let mut sites = Vec::new();
    for (i, ast) in &formulas.asts {
        for (name, path) in index_sites(ast).operators {
            if cfg.synonym_table.get(&name).is_some_and(|c| !c.is_empty()) {
                sites.push((*i, name, path));
            }
        }
    }
    let (seg, name, path) = sites.choose(rng)?.clone();
    let replacement = cfg.synonym_table[&name].choose(rng)?.clone();
    let ast = formulas.asts.get_mut(&seg)?;
    *ast = replace_operator(ast, &path, &replacement)?;
    formulas.modified.insert(seg);
    Some(format!("{name}->{replacement}"))
}

fn number<R: Rng + ?Sized>(formulas: &mut Formulas, cfg: &AugmentConfig, rng: &mut R) -> Option<String> {
    let mut sites = Vec::new();
    for (i, ast) in &formulas.asts {
        for (literal, path) in index_sites(ast).numbers {
            if has_replacement(&literal, cfg.number_jitter) {
                sites.push((*i, literal, path));
            }
        }
    }
    let (seg, literal, path) = sites.choose(rng)?.clone();
    let new = sample_replacement(&literal, cfg.number_jitter, rng)?;
    let ast = formulas.asts.get_mut(&seg)?;
    *ast = replace_number(ast, &path, &new)?;
    formulas.modified.insert(seg);
    Some(format!("{literal}->{new}"))
}

/// Augment one question. Fails only when a formula segment does not parse.
pub fn augment<R: Rng + ?Sized>(q: &Question, cfg: &AugmentConfig, rng: &mut R) -> Result<AugmentedQuestion> {
    // Surface parse errors regardless of which strategies fire.
    Formulas::parse(&q.content)?;

    let mut tokens = q.content.clone();
    let mut applied = Vec::new();
    let mut formulas: Option<Formulas> = None;
    for strategy in Strategy::ORDER {
        let fire = rng.gen::<f64>() < cfg.p && cfg.enabled.contains(&strategy);
        if matches!(strategy, Strategy::ClauseShuffle) {
            if let Some(f) = formulas.take() {
                f.write_back(&mut tokens);
            }
        }
        if !fire {
            continue;
        }
        let site = match strategy {
            Strategy::TextSwap => text::random_swap(&mut tokens, rng),
            Strategy::TextDelete => text::random_delete(&mut tokens, rng),
            Strategy::ClauseShuffle => structure::random_shuffle(&mut tokens, rng),
            Strategy::ClauseInsert => structure::random_insert(&mut tokens, rng),
            formula_strategy => {
                if formulas.is_none() {
                    formulas = Some(Formulas::parse(&tokens)?);
                }
                let f = formulas.as_mut().expect("parsed above");
                match formula_strategy {
                    Strategy::VariableRename => rename(&tokens, f, cfg, rng),
                    Strategy::VariableScale => scale(f, cfg, rng),
                    Strategy::OperatorSynonym => synonym(f, cfg, rng),
                    _ => number(f, cfg, rng),
                }
            }
        };
        if let Some(site) = site {
            applied.push(Applied { strategy, site });
        }
    }
    Ok(AugmentedQuestion {
        question: Question {
            content: tokens,
            ..q.clone()
        },
        applied,
    })
}
