//! Command-line entry point for corpus generation, augmentation, pre-training,
//! embedding export and evaluation.

mod manifest;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quesco::augment::{augment, AugmentConfig, Applied};
use quesco::corpus::{
    generate_synthetic, load_corpus, load_hierarchy, load_labels, read_questions, save_hierarchy, write_corpus,
    write_jsonl, GeneratorSpec, Question, QuestionRecord,
};
use quesco::eval::{
    concept_probe, difficulty_probe, rank_similarity_report, zero_shot_similarity, ProbeConfig, ProbeResult,
    RankReport,
};
use quesco::experiment::rank_items;
use quesco::model::encode;
use quesco::rng::stream;
use quesco::trainer::{run_pretraining, Checkpoint, RunOutput, TrainConfig, Trainer, FULL_SCALE_LR};
use quesco::{Error, Result};
use serde::{Deserialize, Serialize};

use manifest::{beside, config_hash, RunManifest};

#[derive(Parser)]
#[command(name = "quesco", version, about = "Contrastive pre-training of math question representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic hierarchy, corpus and similarity labels.
    GenCorpus(GenCorpusArgs),
    /// Write one augmented view of every question.
    Augment(AugmentArgs),
    /// Pre-train the encoder and write checkpoints and a metrics log.
    Pretrain(PretrainArgs),
    /// Export pre-projector representations from a checkpoint.
    Embed(EmbedArgs),
    /// Zero-shot cosine similarity against gold scores.
    EvalSimilarity(EvalSimilarityArgs),
    /// Linear concept probe on frozen representations.
    EvalConcept(EvalConceptArgs),
    /// Linear difficulty regression on frozen representations.
    EvalDifficulty(EvalDifficultyArgs),
    /// Mean cosine similarity per KH-distance, as a table, JSON and SVG.
    Report(ReportArgs),
}

#[derive(Args, Serialize)]
struct GenCorpusArgs {
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Comma-separated children per level, roots first.
    #[arg(long, value_delimiter = ',', default_value = "4,3,3")]
    branching: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    per_leaf: usize,
    #[arg(long, default_value_t = 3)]
    templates_per_leaf: usize,
    #[arg(long, default_value_t = 250)]
    label_pairs: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AugmentArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// TOML augmentation settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the per-strategy firing probability.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PretrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    hierarchy: PathBuf,
    /// TOML training settings; unset keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Use the full-scale learning rate of 5e-5.
    #[arg(long)]
    full_scale_lr: bool,
    /// Skip L2 normalization of projector outputs.
    #[arg(long)]
    no_normalize: bool,
    /// Continue from a checkpoint written under the same settings.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EmbedArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalSimilarityArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// JSON result file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalConceptArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Hierarchy level of the predicted concept, 1 or 2.
    #[arg(long, default_value_t = 1)]
    level: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalDifficultyArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Anchors sampled for the table.
    #[arg(long, default_value_t = 1000)]
    anchors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct AugmentedRecord {
    #[serde(flatten)]
    record: QuestionRecord,
    applied: Vec<Applied>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord {
    id: String,
    rep: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenCorpus(a) => gen_corpus(&a),
        Command::Augment(a) => augment_corpus(&a),
        Command::Pretrain(a) => pretrain(&a),
        Command::Embed(a) => embed(&a),
        Command::EvalSimilarity(a) => eval_similarity(&a),
        Command::EvalConcept(a) => eval_concept(&a),
        Command::EvalDifficulty(a) => eval_difficulty(&a),
        Command::Report(a) => report(&a),
    }
}

fn gen_corpus(a: &GenCorpusArgs) -> Result<()> {
    let spec = GeneratorSpec {
        levels: a.levels,
        branching: a.branching.clone(),
        questions_per_leaf: a.per_leaf,
        templates_per_leaf: a.templates_per_leaf,
        label_pairs_per_distance: a.label_pairs,
        noise: a.noise,
        ..GeneratorSpec::default()
    };
    spec.validate()?;
    RunManifest::new("gen-corpus", config_hash(&spec), Some(a.seed), &[])?.write(&a.out.join("manifest.json"))?;
    let c = generate_synthetic(&spec, a.seed)?;
    save_hierarchy(&c.hierarchy, a.out.join("hierarchy.json"))?;
    write_corpus(a.out.join("corpus.jsonl"), &c.questions)?;
    write_jsonl(a.out.join("labels.jsonl"), &c.labels)?;
    println!(
        "{} concepts, {} questions, {} labeled pairs -> {}",
        c.hierarchy.concepts().len(),
        c.questions.len(),
        c.labels.len(),
        a.out.display()
    );
    Ok(())
}

fn augment_corpus(a: &AugmentArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => AugmentConfig::from_toml(&fs::read_to_string(p)?)?,
        None => AugmentConfig::default(),
    };
    if let Some(p) = a.p {
        cfg.p = p;
    }
    cfg.validate()?;
    let questions = read_questions(&a.corpus)?;
    let mut inputs = vec![a.corpus.as_path()];
    inputs.extend(a.config.as_deref());
    RunManifest::new("augment", config_hash(&cfg), Some(a.seed), &inputs)?.write(&beside(&a.out))?;
    let mut records = Vec::with_capacity(questions.len());
    for q in &questions {
        let view = augment(q, &cfg, &mut stream(a.seed, "augment", &q.id))?;
        records.push(AugmentedRecord {
            record: view.question.to_record(),
            applied: view.applied,
        });
    }
    write_jsonl(&a.out, &records)?;
    let fired: usize = records.iter().map(|r| r.applied.len()).sum();
    println!("{} questions, {fired} augmentations -> {}", records.len(), a.out.display());
    Ok(())
}

fn pretrain(a: &PretrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_toml(&fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if a.full_scale_lr {
        cfg.lr = FULL_SCALE_LR;
    }
    if a.no_normalize {
        cfg.model.normalize = false;
    }
    cfg.validate()?;
    let hierarchy = load_hierarchy(&a.hierarchy)?;
    let corpus = load_corpus(&a.corpus, &hierarchy)?;
    let resume = a.resume.as_ref().map(Checkpoint::load).transpose()?;
    let mut inputs = vec![a.corpus.as_path(), a.hierarchy.as_path()];
    inputs.extend(a.config.as_deref());
    inputs.extend(a.resume.as_deref());
    RunManifest::new("pretrain", cfg.hash(), Some(cfg.seed), &inputs)?.write(&a.out_dir.join("manifest.json"))?;
    fs::write(a.out_dir.join("config.toml"), cfg.to_toml()?)?;
    let out = RunOutput { dir: a.out_dir.clone() };
    let trainer = run_pretraining(&corpus, &hierarchy, &cfg, resume, Some(&out))?;
    let h = trainer.history();
    let tenth = (h.len() / 10).max(1);
    let mean = |rs: &[quesco::trainer::StepRecord]| rs.iter().map(|r| r.loss).sum::<f64>() / rs.len().max(1) as f64;
    println!(
        "{} steps; mean loss first tenth {:.4}, last tenth {:.4}; bank {} -> {}",
        trainer.step_count(),
        mean(&h[..tenth.min(h.len())]),
        mean(&h[h.len().saturating_sub(tenth)..]),
        trainer.bank().len(),
        out.checkpoint_path().display()
    );
    Ok(())
}

fn embed(a: &EmbedArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let params = ckpt.query_params()?;
    let questions = read_questions(&a.corpus)?;
    RunManifest::new(
        "embed",
        ckpt.config_hash.clone(),
        Some(ckpt.config.seed),
        &[&a.checkpoint, &a.corpus],
    )?
    .write(&beside(&a.out))?;
    let records = questions
        .iter()
        .map(|q| {
            Ok(EmbeddingRecord {
                id: q.id.clone(),
                rep: encode(q, &params, &ckpt.vocab, &ckpt.config.model)?.rep.to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_jsonl(&a.out, &records)?;
    println!("{} representations of dim {} -> {}", records.len(), params.d_embed(), a.out.display());
    Ok(())
}

fn read_embeddings(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: EmbeddingRecord = serde_json::from_str(line).map_err(|e| Error::Corpus {
            line: i + 1,
            message: format!("malformed embedding: {e}"),
        })?;
        if out.insert(r.id.clone(), r.rep).is_some() {
            return Err(Error::Corpus {
                line: i + 1,
                message: format!("duplicate embedding id {:?}", r.id),
            });
        }
    }
    Ok(out)
}

/// Representations in corpus order.
fn aligned(reps: &HashMap<String, Vec<f64>>, questions: &[Question]) -> Result<Vec<Vec<f64>>> {
    questions
        .iter()
        .map(|q| {
            reps.get(&q.id)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("no representation for question {}", q.id)))
        })
        .collect()
}

fn emit(result: &ProbeResult, out: &Path) -> Result<()> {
    fs::write(out, serde_json::to_string_pretty(result)? + "\n")?;
    print!("{}", result.to_table());
    Ok(())
}

fn eval_similarity(a: &EvalSimilarityArgs) -> Result<()> {
    let reps = read_embeddings(&a.embeddings)?;
    let labels = load_labels(&a.labels)?;
    RunManifest::new("eval-similarity", config_hash(a), None, &[&a.embeddings, &a.labels])?.write(&beside(&a.out))?;
    emit(&zero_shot_similarity(&reps, &labels)?, &a.out)
}

fn eval_concept(a: &EvalConceptArgs) -> Result<()> {
    if !(1..=2).contains(&a.level) {
        return Err(Error::invalid(format!("concept level {} is not 1 or 2", a.level)));
    }
    let reps = read_embeddings(&a.embeddings)?;
    let questions = read_questions(&a.corpus)?;
    let labels = questions
        .iter()
        .map(|q| {
            q.concepts
                .at_level(a.level)
                .map(str::to_string)
                .ok_or_else(|| Error::invalid(format!("question {} has no level-{} concept", q.id, a.level)))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = aligned(&reps, &questions)?;
    RunManifest::new("eval-concept", config_hash(a), Some(a.seed), &[&a.embeddings, &a.corpus])?
        .write(&beside(&a.out))?;
    let cfg = ProbeConfig {
        seed: a.seed,
        ..ProbeConfig::default()
    };
    let mut result = concept_probe(&rows, &labels, &cfg)?;
    result.task = format!("concept_probe_level{}", a.level);
    emit(&result, &a.out)
}

fn eval_difficulty(a: &EvalDifficultyArgs) -> Result<()> {
    let reps = read_embeddings(&a.embeddings)?;
    let questions: Vec<Question> = read_questions(&a.corpus)?
        .into_iter()
        .filter(|q| q.difficulty.is_some())
        .collect();
    if questions.is_empty() {
        return Err(Error::invalid("no question carries a difficulty label"));
    }
    let rows = aligned(&reps, &questions)?;
    let diffs: Vec<f64> = questions.iter().filter_map(|q| q.difficulty).collect();
    RunManifest::new("eval-difficulty", config_hash(a), Some(a.seed), &[&a.embeddings, &a.corpus])?
        .write(&beside(&a.out))?;
    let cfg = ProbeConfig {
        seed: a.seed,
        ..ProbeConfig::default()
    };
    emit(&difficulty_probe(&rows, &diffs, &cfg)?, &a.out)
}

fn report(a: &ReportArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let levels = ckpt.levels;
    let questions = read_questions(&a.corpus)?;
    RunManifest::new("report", config_hash(a), Some(a.seed), &[&a.checkpoint, &a.corpus])?
        .write(&a.out_dir.join("manifest.json"))?;
    let trainer = Trainer::from_checkpoint(ckpt)?;
    let items = rank_items(&questions, &trainer, a.seed)?;
    let report = rank_similarity_report(&items, levels, a.anchors, a.seed)?;
    let table = report.to_table();
    fs::write(a.out_dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(a.out_dir.join("report.txt"), &table)?;
    fs::write(a.out_dir.join("report.svg"), svg_chart(&report))?;
    print!("{table}");
    println!(
        "strictly decreasing over ranks 0..={}: {}",
        levels + 1,
        report.strictly_decreasing()
    );
    Ok(())
}

/// Bar chart of mean cosine per rank with one-standard-deviation whiskers.
fn svg_chart(report: &RankReport) -> String {
    let (w, h, pad) = (480.0, 320.0, 48.0);
    let plot_h = h - 2.0 * pad;
    let n = report.rows.len().max(1) as f64;
    let slot = (w - 2.0 * pad) / n;
    // Cosine lies in [-1, 1]; map it onto the plot height.
    let y = |v: f64| pad + (1.0 - (v.clamp(-1.0, 1.0) + 1.0) / 2.0) * plot_h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let zero = y(0.0);
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{zero}" x2="{}" y2="{zero}" stroke="black"/>"#,
        w - pad
    );
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{tick:.1}</text>"#,
            pad - 6.0,
            y(tick) + 4.0
        );
    }
    for (i, row) in report.rows.iter().enumerate() {
        let x = pad + slot * i as f64 + slot * 0.2;
        let bw = slot * 0.6;
        let top = y(row.mean).min(zero);
        let height = (y(row.mean) - zero).abs();
        let cx = x + bw / 2.0;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.1}" y="{top:.1}" width="{bw:.1}" height="{height:.1}" fill="#4a78b5"/>"##
        );
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
            y(row.mean + row.std),
            y(row.mean - row.std)
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            h - pad + 16.0,
            row.rank
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#,
            top - 4.0,
            row.mean
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">KH-distance rank</text>"#,
        w / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">mean cosine similarity by rank</text>"#,
        w / 2.0
    );
    s.push_str("</svg>\n");
    s
}
