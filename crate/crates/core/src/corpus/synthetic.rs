//! Synthetic corpus generator.
//!
//! Each level-1 concept owns an operator family (trigonometric, logarithmic,
//! polynomial, rational); level-2 concepts pick the outer operator within the
//! family and level-3 concepts the inner argument shape. Every concept also
//! contributes a keyword to the text, so the hierarchy is recoverable from
//! content. Formulas are built as trees and rendered canonically, so every
//! generated formula parses.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Concept, KnowledgeHierarchy, Question, Segment, SimilarityLabel};
use crate::formula::{render_node, Node, Op, Rel};
use crate::khar::khd_unchecked;
use crate::rng::{stream, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub levels: usize,
    /// Children per node at each level; `branching[0]` is the root count.
    pub branching: Vec<usize>,
    pub questions_per_leaf: usize,
    pub templates_per_leaf: usize,
    /// Labeled pairs drawn for each KH-distance `1..=L+1`.
    pub label_pairs_per_distance: usize,
    /// Half-width of the uniform noise added to difficulty and similarity.
    pub noise: f64,
    /// Scenario words drawn per question and placed in the ask clause.
    pub context_words: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            levels: 3,
            branching: vec![4, 3, 3],
            questions_per_leaf: 20,
            templates_per_leaf: 3,
            label_pairs_per_distance: 250,
            noise: 0.05,
            context_words: 2,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if self.branching.len() != self.levels {
            return bad(format!(
                "branching has {} entries for {} levels",
                self.branching.len(),
                self.levels
            ));
        }
        if let Some(b) = self.branching.iter().find(|&&b| b < 1) {
            return bad(format!("branching factor {b} < 1"));
        }
        if self.questions_per_leaf < 1 {
            return bad("questions per leaf must be at least 1".into());
        }
        if self.templates_per_leaf < 1 {
            return bad("templates per leaf must be at least 1".into());
        }
        if self.context_words > CONTEXT_WORDS.len() {
            return bad(format!(
                "context_words {} exceeds the pool of {}",
                self.context_words,
                CONTEXT_WORDS.len()
            ));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 0.5)", self.noise));
        }
        Ok(())
    }

    pub fn leaf_count(&self) -> usize {
        self.branching.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub hierarchy: KnowledgeHierarchy,
    pub questions: Vec<Question>,
    pub labels: Vec<SimilarityLabel>,
}

const LEVEL1_WORDS: [&str; 6] = ["function", "equation", "series", "geometry", "limit", "vector"];
const LEVEL2_WORDS: [&str; 12] = [
    "monotonic", "periodic", "extremum", "symmetric", "bounded", "convex", "parity", "tangent",
    "inverse", "composite", "piecewise", "implicit",
];
const CONTEXT_WORDS: [&str; 40] = [
    "train", "river", "garden", "factory", "ladder", "bridge", "market", "tank", "orchard", "rocket",
    "bicycle", "library", "harbor", "canal", "tower", "forest", "kitchen", "stadium", "island", "mine",
    "pendulum", "spring", "pool", "fence", "window", "clock", "battery", "farm", "road", "ship",
    "balloon", "crane", "pipe", "shadow", "satellite", "bakery", "wheel", "valley", "lamp", "festival",
];
const SYLLABLES: [&str; 12] = ["ba", "ke", "mi", "do", "lu", "sa", "re", "ti", "no", "pa", "vu", "zo"];

fn keyword(level: usize, index: usize) -> String {
    match level {
        1 if index < LEVEL1_WORDS.len() => LEVEL1_WORDS[index].to_string(),
        2 if index < LEVEL2_WORDS.len() => LEVEL2_WORDS[index].to_string(),
        _ => {
            // Distinct pseudo-words for deeper or overflowing levels.
            let n = SYLLABLES.len();
            let first = SYLLABLES[(index / n) % n];
            let second = SYLLABLES[index % n];
            format!("{first}{second}{}", if level > 2 { "ic" } else { "al" })
        }
    }
}

#[derive(Debug, Clone)]
struct ConceptInfo {
    id: String,
    keyword: String,
    /// Index among siblings.
    local: usize,
}

#[derive(Debug, Clone, Copy)]
enum ClauseKind {
    Definition,
    Bound,
    Property,
    Value,
}

#[derive(Debug, Clone)]
struct Template {
    variable: &'static str,
    clauses: Vec<ClauseKind>,
    bound: Rel,
}

pub fn generate_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = stream(seed, "synthetic", "corpus");

    // Breadth-first concept construction; ids encode the 1-based route.
    let mut concepts = Vec::new();
    let mut infos: Vec<Vec<ConceptInfo>> = Vec::new();
    let mut frontier: Vec<(Option<String>, String)> = vec![(None, String::new())];
    for level in 1..=spec.levels {
        let mut next = Vec::new();
        let mut level_infos = Vec::new();
        for (parent, prefix) in &frontier {
            for local in 0..spec.branching[level - 1] {
                let id = if prefix.is_empty() {
                    format!("c{}", local + 1)
                } else {
                    format!("{prefix}.{}", local + 1)
                };
                concepts.push(Concept {
                    id: id.clone(),
                    level,
                    parent: parent.clone(),
                });
                level_infos.push(ConceptInfo {
                    id: id.clone(),
                    keyword: keyword(level, level_infos.len()),
                    local,
                });
                next.push((Some(id.clone()), id));
            }
        }
        infos.push(level_infos);
        frontier = next;
    }
    let hierarchy = KnowledgeHierarchy::new(spec.levels, concepts)?;
    let lookup = |level: usize, id: &str| -> &ConceptInfo {
        infos[level - 1]
            .iter()
            .find(|c| c.id == id)
            .expect("concept generated above")
    };

    let mut questions = Vec::new();
    let mut raw_difficulty = Vec::new();
    let leaves: Vec<String> = infos[spec.levels - 1].iter().map(|c| c.id.clone()).collect();
    for leaf in &leaves {
        let path = hierarchy.path_to(leaf).expect("leaf exists");
        let chain: Vec<&ConceptInfo> = path
            .0
            .iter()
            .enumerate()
            .map(|(i, id)| lookup(i + 1, id))
            .collect();
        let templates: Vec<Template> = (0..spec.templates_per_leaf)
            .map(|_| random_template(&mut rng))
            .collect();
        for n in 0..spec.questions_per_leaf {
            let template = &templates[n % templates.len()];
            let (content, nodes) = instantiate(template, &chain, spec.context_words, &mut rng);
            let clauses = content.iter().filter(|s| s.is_clause_delimiter()).count();
            raw_difficulty.push((nodes + clauses) as f64);
            questions.push(Question {
                id: format!("q{:05}", questions.len() + 1),
                content,
                concepts: path.clone(),
                difficulty: None,
            });
        }
    }

    let lo = raw_difficulty.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw_difficulty.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (q, raw) in questions.iter_mut().zip(&raw_difficulty) {
        let base = if hi > lo { (raw - lo) / (hi - lo) } else { 0.5 };
        q.difficulty = Some((base + noise(&mut rng, spec.noise)).clamp(0.0, 1.0));
    }

    let labels = sample_labels(spec, &questions, &mut rng);
    Ok(SyntheticCorpus {
        hierarchy,
        questions,
        labels,
    })
}

fn noise(rng: &mut StreamRng, amplitude: f64) -> f64 {
    if amplitude > 0.0 {
        rng.gen_range(-amplitude..=amplitude)
    } else {
        0.0
    }
}

fn random_template(rng: &mut StreamRng) -> Template {
    let variable = *["x", "t", "x", "s"].choose(rng).unwrap();
    let mut extras = vec![ClauseKind::Bound, ClauseKind::Property, ClauseKind::Value];
    extras.shuffle(rng);
    let keep = rng.gen_range(1..=extras.len());
    let mut clauses = vec![ClauseKind::Definition];
    clauses.extend(extras.into_iter().take(keep));
    if rng.gen_bool(0.3) {
        clauses.swap(0, 1);
    }
    let bound = *[Rel::Gt, Rel::Geq, Rel::Lt, Rel::Leq].choose(rng).unwrap();
    Template {
        variable,
        clauses,
        bound,
    }
}

fn small_decimal(rng: &mut StreamRng) -> Node {
    if rng.gen_bool(0.4) {
        let whole = rng.gen_range(0..=4);
        let tenth = rng.gen_range(1..=9);
        Node::num(&format!("{whole}.{tenth}"))
    } else {
        Node::num(&rng.gen_range(1..=9).to_string())
    }
}

fn inner_shape(shape: usize, v: &str, rng: &mut StreamRng) -> Node {
    let a = Node::num(&rng.gen_range(2..=9).to_string());
    let scaled = Node::binary(Op::ImplicitMul, a, Node::var(v));
    match shape % 3 {
        0 => Node::binary(Op::Add, scaled, small_decimal(rng)),
        1 => Node::binary(Op::Sub, scaled, small_decimal(rng)),
        _ => Node::binary(
            Op::Add,
            Node::power(Node::var(v), Node::num("2")),
            scaled,
        ),
    }
}

fn outer_shape(family: usize, variant: usize, inner: Node, v: &str, rng: &mut StreamRng) -> Node {
    let group = |n: Node| Node::group(n);
    match family % 4 {
        0 => {
            let op = [Op::Sin, Op::Cos, Op::Tan][variant % 3];
            Node::unary(op, group(inner))
        }
        1 => {
            let op = [Op::Log, Op::Ln, Op::Exp][variant % 3];
            Node::unary(op, group(inner))
        }
        2 => {
            let exp = ["2", "3", "4"][variant % 3];
            Node::power(group(inner), Node::num(exp))
        }
        _ => match variant % 3 {
            0 => Node::fraction(Node::num(&rng.gen_range(1..=9).to_string()), inner),
            1 => Node::unary(Op::Sqrt, inner),
            _ => Node::fraction(inner, Node::var(v)),
        },
    }
}

fn text(words: &[&str], out: &mut Vec<Segment>) {
    out.extend(words.iter().map(|w| Segment::Text((*w).to_string())));
}

/// Returns the content and the total formula node count.
fn instantiate(
    template: &Template,
    chain: &[&ConceptInfo],
    context_words: usize,
    rng: &mut StreamRng,
) -> (Vec<Segment>, usize) {
    let v = template.variable;
    let top = chain[0];
    let mid = chain.get(1).copied().unwrap_or(top);
    let leaf = *chain.last().unwrap();
    let mut content = Vec::new();
    let mut nodes = 0;
    let mut formula = |node: Node, out: &mut Vec<Segment>| {
        nodes += node.size();
        out.push(Segment::Formula(render_node(&node)));
    };
    for clause in &template.clauses {
        match clause {
            ClauseKind::Definition => {
                let inner = inner_shape(leaf.local, v, rng);
                let outer = outer_shape(top.local, mid.local, inner, v, rng);
                text(&["given", "the", &top.keyword], &mut content);
                formula(
                    Node::relation(Rel::Eq, Node::apply("f", Node::var(v)), outer),
                    &mut content,
                );
            }
            ClauseKind::Bound => {
                text(&["where"], &mut content);
                formula(
                    Node::relation(template.bound, Node::var(v), small_decimal(rng)),
                    &mut content,
                );
            }
            ClauseKind::Property => {
                text(&["the", &mid.keyword, "property", "holds"], &mut content);
            }
            ClauseKind::Value => {
                text(&["and"], &mut content);
                formula(
                    Node::relation(
                        Rel::Eq,
                        Node::apply("f", small_decimal(rng)),
                        small_decimal(rng),
                    ),
                    &mut content,
                );
            }
        }
        text(&[","], &mut content);
    }
    text(&["find", "the", &leaf.keyword, "of", "f"], &mut content);
    if context_words > 0 {
        text(&["for", "the"], &mut content);
        let words: Vec<&str> = CONTEXT_WORDS.choose_multiple(rng, context_words).copied().collect();
        text(&words, &mut content);
        text(&["case"], &mut content);
    }
    text(&["."], &mut content);
    (content, nodes)
}

fn sample_labels(spec: &GeneratorSpec, questions: &[Question], rng: &mut StreamRng) -> Vec<SimilarityLabel> {
    let levels = spec.levels;
    let mut labels = Vec::new();
    if questions.len() < 2 {
        return labels;
    }
    for distance in 1..=levels + 1 {
        let gold = (levels + 1 - distance) as f64 / (levels + 1) as f64;
        for _ in 0..spec.label_pairs_per_distance {
            // Retry a few anchors; some distances may be impossible for tiny trees.
            for _attempt in 0..8 {
                let a = &questions[rng.gen_range(0..questions.len())];
                let pool: Vec<&Question> = questions
                    .iter()
                    .filter(|b| b.id != a.id && khd_unchecked(&a.concepts, &b.concepts, levels) == distance)
                    .collect();
                if let Some(b) = pool.choose(rng) {
                    labels.push(SimilarityLabel {
                        question_a: a.id.clone(),
                        question_b: b.id.clone(),
                        score: (gold + noise(rng, spec.noise)).clamp(0.0, 1.0),
                    });
                    break;
                }
            }
        }
    }
    labels
}
