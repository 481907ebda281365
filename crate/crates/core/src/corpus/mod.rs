//! Questions, the knowledge hierarchy, and their file formats.
//!
//! * hierarchy: JSON `{"levels": L, "concepts": [{"id", "level", "parent"}]}`
//! * corpus: JSONL `{"id", "content", "concepts": [root..leaf], "difficulty"?}`
//!   where formulas inside `content` are delimited by `$...$`
//! * similarity labels: JSONL `{"a", "b", "score"}`

mod synthetic;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use synthetic::{generate_synthetic, GeneratorSpec, SyntheticCorpus};

/// Clause-delimiting punctuation, split off text words as separate tokens.
pub const CLAUSE_DELIMITERS: [&str; 6] = ["。", "，", "；", ",", ";", "."];
/// Other punctuation that becomes a standalone token.
const STANDALONE_PUNCT: [char; 2] = ['?', '？'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub level: usize,
    #[serde(default)]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptPath(pub Vec<String>);

impl ConceptPath {
    pub fn new<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        ConceptPath(ids.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Concept at 1-based `level`.
    pub fn at_level(&self, level: usize) -> Option<&str> {
        level.checked_sub(1).and_then(|i| self.0.get(i)).map(String::as_str)
    }

    pub fn leaf(&self) -> Option<&str> {
        self.0.last().map(String::as_str)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HierarchyFile {
    levels: usize,
    concepts: Vec<Concept>,
}

/// A validated L-level concept tree (a forest of level-1 roots).
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeHierarchy {
    levels: usize,
    concepts: Vec<Concept>,
    index: HashMap<String, usize>,
    children: BTreeMap<String, Vec<String>>,
}

impl KnowledgeHierarchy {
    pub fn new(levels: usize, concepts: Vec<Concept>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Hierarchy(msg));
        if levels == 0 {
            return bad("levels must be at least 1".into());
        }
        let mut index = HashMap::with_capacity(concepts.len());
        for (i, c) in concepts.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return bad(format!("duplicate concept id {:?}", c.id));
            }
            if c.level == 0 || c.level > levels {
                return bad(format!(
                    "concept {:?} has level {} outside 1..={levels}",
                    c.id, c.level
                ));
            }
        }
        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for c in &concepts {
            match (&c.parent, c.level) {
                (None, 1) => {}
                (Some(_), 1) => return bad(format!("level-1 concept {:?} has a parent", c.id)),
                (None, _) => return bad(format!("concept {:?} is orphaned (no parent)", c.id)),
                (Some(p), level) => {
                    let Some(&pi) = index.get(p) else {
                        return bad(format!("concept {:?} has unknown parent {p:?}", c.id));
                    };
                    let parent_level = concepts[pi].level;
                    if parent_level + 1 != level {
                        return bad(format!(
                            "concept {:?} at level {level} has parent {p:?} at level {parent_level}",
                            c.id
                        ));
                    }
                    children.entry(p.clone()).or_default().push(c.id.clone());
                }
            }
        }
        for c in &concepts {
            if c.level < levels && !children.contains_key(&c.id) {
                return bad(format!(
                    "leaf concept {:?} is at level {} but leaves must be at level {levels}",
                    c.id, c.level
                ));
            }
        }
        Ok(KnowledgeHierarchy {
            levels,
            concepts,
            index,
            children,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.index.get(id).map(|&i| &self.concepts[i])
    }

    pub fn children(&self, id: &str) -> &[String] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.levels];
        for c in &self.concepts {
            sizes[c.level - 1] += 1;
        }
        sizes
    }

    pub fn concepts_at_level(&self, level: usize) -> impl Iterator<Item = &Concept> {
        self.concepts.iter().filter(move |c| c.level == level)
    }

    /// Root-to-leaf path ending at `leaf`.
    pub fn path_to(&self, leaf: &str) -> Option<ConceptPath> {
        let mut path = vec![leaf.to_string()];
        let mut current = self.concept(leaf)?;
        while let Some(parent) = &current.parent {
            path.push(parent.clone());
            current = self.concept(parent)?;
        }
        path.reverse();
        Some(ConceptPath(path))
    }

    pub fn validate_path(&self, path: &ConceptPath) -> Result<(), String> {
        if path.len() != self.levels {
            return Err(format!(
                "concept path has {} entries, expected {}",
                path.len(),
                self.levels
            ));
        }
        let mut parent: Option<&str> = None;
        for (i, id) in path.0.iter().enumerate() {
            let concept = self
                .concept(id)
                .ok_or_else(|| format!("unknown concept id {id:?}"))?;
            if concept.level != i + 1 {
                return Err(format!(
                    "concept {id:?} is at level {}, not {}",
                    concept.level,
                    i + 1
                ));
            }
            if concept.parent.as_deref() != parent {
                return Err(format!("concept {id:?} is not a child of {parent:?}"));
            }
            parent = Some(id);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = HierarchyFile {
            levels: self.levels,
            concepts: self.concepts.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HierarchyFile = serde_json::from_str(text)?;
        KnowledgeHierarchy::new(file.levels, file.concepts)
    }
}

pub fn load_hierarchy(path: impl AsRef<Path>) -> Result<KnowledgeHierarchy> {
    KnowledgeHierarchy::from_json(&fs::read_to_string(path)?)
}

pub fn save_hierarchy(hierarchy: &KnowledgeHierarchy, path: impl AsRef<Path>) -> Result<()> {
    let mut text = hierarchy.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    Text(String),
    Formula(String),
}

impl Segment {
    pub fn is_text(&self) -> bool {
        matches!(self, Segment::Text(_))
    }

    pub fn is_clause_delimiter(&self) -> bool {
        matches!(self, Segment::Text(t) if CLAUSE_DELIMITERS.contains(&t.as_str()))
    }
}

/// Split raw content into text tokens and `$...$` formula segments.
pub fn parse_content(content: &str) -> Result<Vec<Segment>, String> {
    let mut segments = Vec::new();
    let mut parts = content.split('$');
    let mut in_formula = false;
    let count = content.matches('$').count();
    if count % 2 == 1 {
        return Err("unbalanced `$` formula delimiter".into());
    }
    for part in parts.by_ref() {
        if in_formula {
            let formula = part.trim();
            if formula.is_empty() {
                return Err("empty formula segment".into());
            }
            segments.push(Segment::Formula(formula.to_string()));
        } else {
            for word in part.split_whitespace() {
                split_punctuation(word, &mut segments);
            }
        }
        in_formula = !in_formula;
    }
    Ok(segments)
}

fn split_punctuation(word: &str, out: &mut Vec<Segment>) {
    let mut current = String::new();
    for ch in word.chars() {
        let mut buf = [0u8; 4];
        let s: &str = ch.encode_utf8(&mut buf);
        if CLAUSE_DELIMITERS.contains(&s) || STANDALONE_PUNCT.contains(&ch) {
            if !current.is_empty() {
                out.push(Segment::Text(std::mem::take(&mut current)));
            }
            out.push(Segment::Text(s.to_string()));
        } else {
            current.push(ch);
        }
    }
    if !current.is_empty() {
        out.push(Segment::Text(current));
    }
}

pub fn render_content(segments: &[Segment]) -> String {
    let pieces: Vec<String> = segments
        .iter()
        .map(|s| match s {
            Segment::Text(t) => t.clone(),
            Segment::Formula(f) => format!("${f}$"),
        })
        .collect();
    pieces.join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub id: String,
    pub content: Vec<Segment>,
    pub concepts: ConceptPath,
    pub difficulty: Option<f64>,
}

impl Question {
    pub fn formulas(&self) -> impl Iterator<Item = &str> {
        self.content.iter().filter_map(|s| match s {
            Segment::Formula(f) => Some(f.as_str()),
            Segment::Text(_) => None,
        })
    }

    pub fn to_record(&self) -> QuestionRecord {
        QuestionRecord {
            id: self.id.clone(),
            content: render_content(&self.content),
            concepts: self.concepts.clone(),
            difficulty: self.difficulty,
        }
    }
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub content: String,
    pub concepts: ConceptPath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<f64>,
}

impl QuestionRecord {
    pub fn into_question(self) -> Result<Question, String> {
        let content = parse_content(&self.content)?;
        if content.is_empty() {
            return Err("content is empty".into());
        }
        if let Some(d) = self.difficulty {
            if !(0.0..=1.0).contains(&d) {
                return Err(format!("difficulty {d} outside [0, 1]"));
            }
        }
        Ok(Question {
            id: self.id,
            content,
            concepts: self.concepts,
            difficulty: self.difficulty,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityLabel {
    #[serde(rename = "a")]
    pub question_a: String,
    #[serde(rename = "b")]
    pub question_b: String,
    pub score: f64,
}

fn read_jsonl<T, F>(path: &Path, mut convert: F) -> Result<Vec<T>>
where
    F: FnMut(&str, usize) -> Result<T, String>,
{
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = convert(&line, i + 1).map_err(|message| Error::Corpus {
            line: i + 1,
            message,
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Read questions without checking them against a hierarchy.
pub fn read_questions(path: impl AsRef<Path>) -> Result<Vec<Question>> {
    let mut seen = HashSet::new();
    read_jsonl(path.as_ref(), |line, _| {
        let record: QuestionRecord =
            serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
        if !seen.insert(record.id.clone()) {
            return Err(format!("duplicate question id {:?}", record.id));
        }
        record.into_question()
    })
}

pub fn load_corpus(path: impl AsRef<Path>, hierarchy: &KnowledgeHierarchy) -> Result<Vec<Question>> {
    let mut seen = HashSet::new();
    read_jsonl(path.as_ref(), |line, _| {
        let record: QuestionRecord =
            serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
        if !seen.insert(record.id.clone()) {
            return Err(format!("duplicate question id {:?}", record.id));
        }
        hierarchy
            .validate_path(&record.concepts)
            .map_err(|e| format!("question {:?}: {e}", record.id))?;
        record.into_question()
    })
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_corpus(path: impl AsRef<Path>, questions: &[Question]) -> Result<()> {
    let records: Vec<QuestionRecord> = questions.iter().map(Question::to_record).collect();
    write_jsonl(path, &records)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<SimilarityLabel>> {
    read_jsonl(path.as_ref(), |line, _| {
        let label: SimilarityLabel =
            serde_json::from_str(line).map_err(|e| format!("malformed label: {e}"))?;
        if label.question_a == label.question_b {
            return Err(format!("label pairs {:?} with itself", label.question_a));
        }
        if !(0.0..=1.0).contains(&label.score) {
            return Err(format!("score {} outside [0, 1]", label.score));
        }
        Ok(label)
    })
}
