//! `cxrgraph`: report labeling, corpus statistics, synthetic data and anatomy
//! graph training from the command line.
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 invalid rules or config,
//! 3 training diverged.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use cxr_core::anatomy::{KnowledgeGraphConfig, DEFAULT_KG_TOML, REGION_NAMES};
use cxr_core::corpus::{build_cooccurrence, build_distribution, DEFAULT_T_POS};
use cxr_core::dataset::{read_jsonl, write_jsonl, Dataset, ReportRecord, LABELS_FILE, REPORTS_FILE};
use cxr_core::explain::{
    attribute, explanation, render_overlay, AttributionTarget, DEFAULT_EDGE_THRESHOLD, DEFAULT_NODE_THRESHOLD,
};
use cxr_core::graph::Relation;
use cxr_core::labeler::{resolve_labels, DiseaseMention, Matcher, SoftLabelVector};
use cxr_core::network::checkpoint;
use cxr_core::network::metrics::rank_classes;
use cxr_core::network::train::write_history_csv;
use cxr_core::network::{forward, NotMentionedPolicy};
use cxr_core::pipeline::{self, GraphSpec, PipelineConfig};
use cxr_core::report::parse_report;
use cxr_core::rules::{RuleSet, DEFAULT_RULES_TOML};
use cxr_core::synth::{self, SynthConfig};
use cxr_core::{Disease, Error, Result};

use output::{Manifest, OutputDir, Source};

const MODEL_FILE: &str = "model.bin";
const GRAPH_FILE: &str = "graph.json";
const CONFIG_FILE: &str = "config.json";

#[derive(Parser)]
#[command(name = "cxrgraph", version, about = "Chest X-ray report labeling and anatomy graph learning")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Rules TOML (default: the shipped rules). Its checksum goes into every
    /// manifest.
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract soft disease labels from reports.
    Label(LabelArgs),
    /// Uncertainty distribution and co-occurrence counts of a label file.
    Stats(StatsArgs),
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Build the relation graphs of one study.
    Graph(GraphArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a trained model on one split.
    Eval(EvalArgs),
    /// Grid search over tau, alpha and beta on the validation split.
    Sweep(SweepArgs),
    /// Attribute one study's prediction to regions and edges.
    Explain(ExplainArgs),
}

#[derive(Args)]
struct OutArg {
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LabelArgs {
    /// JSONL of `{study_id, text}`, or a directory holding `reports.jsonl`
    /// or one `.txt` file per study.
    #[arg(long)]
    reports: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct StatsArgs {
    /// Label JSONL, or a dataset directory.
    #[arg(long)]
    labels: PathBuf,
    /// Probability at or above which a label counts as positive.
    #[arg(long, default_value_t = DEFAULT_T_POS)]
    t_pos: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic corpus TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    studies: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    study: String,
    #[arg(long, default_value_t = cxr_core::graph::DEFAULT_TAU)]
    tau: f64,
    /// Knowledge graph TOML (default: the shipped graph).
    #[arg(long)]
    kg: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

/// Overrides applied on top of the pipeline config.
#[derive(Args)]
struct Overrides {
    /// Pipeline TOML with `[model]`, `[train]` and `[graph]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Registered loss name: hard, expert or expert-literal.
    #[arg(long)]
    loss: Option<String>,
    /// Registered optimizer name: adam or sgd-momentum.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Negative,
    Exclude,
}

impl From<Policy> for NotMentionedPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Negative => NotMentionedPolicy::Negative,
            Policy::Exclude => NotMentionedPolicy::Exclude,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: Split,
    /// How not-mentioned labels count.
    #[arg(long, value_enum, default_value = "negative")]
    not_mentioned: Policy,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_delimiter = ',')]
    taus: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Probability,
    Logit,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    study: String,
    /// Disease name (default: the highest-scoring class).
    #[arg(long)]
    disease: Option<String>,
    #[arg(long, value_enum, default_value = "probability")]
    target: Target,
    #[arg(long, default_value_t = DEFAULT_NODE_THRESHOLD)]
    node_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_EDGE_THRESHOLD)]
    edge_threshold: f64,
    #[command(flatten)]
    out: OutArg,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    let result = load_rules(cli.rules.as_deref()).and_then(|(rules, src)| {
        let ctx = Ctx { rules, rules_src: src };
        match cli.command {
            Command::Label(a) => label(&ctx, a),
            Command::Stats(a) => stats(&ctx, a),
            Command::Synth(a) => synth_cmd(&ctx, a),
            Command::Graph(a) => graph_cmd(&ctx, a),
            Command::Train(a) => train_cmd(&ctx, a),
            Command::Eval(a) => eval_cmd(&ctx, a),
            Command::Sweep(a) => sweep_cmd(&ctx, a),
            Command::Explain(a) => explain_cmd(&ctx, a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidRules(_)
        | Error::ConfigAt { .. }
        | Error::InvalidKnowledgeGraph(_)
        | Error::InvalidFusion { .. }
        | Error::InvalidConfig(_)
        | Error::UnknownStrategy { .. }
        | Error::UnknownDisease(_)
        | Error::UnknownClass(_) => 2,
        Error::Diverged { .. } => 3,
        _ => 1,
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn load_rules(path: Option<&Path>) -> Result<(RuleSet, Source)> {
    match path {
        Some(p) => {
            let bytes = read_bytes(p)?;
            let text = String::from_utf8(bytes.clone()).map_err(|_| Error::InvalidRules("rules file is not UTF-8".into()))?;
            Ok((RuleSet::from_toml_str(&text)?, Source::new(Some(p), &bytes)))
        }
        None => Ok((RuleSet::default(), Source::new(None, DEFAULT_RULES_TOML.as_bytes()))),
    }
}

fn load_kg(path: Option<&Path>) -> Result<(KnowledgeGraphConfig, Source)> {
    match path {
        Some(p) => {
            let bytes = read_bytes(p)?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Error::InvalidKnowledgeGraph("file is not UTF-8".into()))?;
            Ok((KnowledgeGraphConfig::from_toml_str(&text)?, Source::new(Some(p), &bytes)))
        }
        None => Ok((KnowledgeGraphConfig::default(), Source::new(None, DEFAULT_KG_TOML.as_bytes()))),
    }
}

fn load_pipeline_config(o: &Overrides) -> Result<(PipelineConfig, Option<Source>)> {
    let (mut cfg, source) = match &o.config {
        Some(p) => {
            let bytes = read_bytes(p)?;
            let text = String::from_utf8_lossy(&bytes);
            (PipelineConfig::from_toml_str(&text)?, Some(Source::new(Some(p), &bytes)))
        }
        None => (PipelineConfig::default(), None),
    };
    if let Some(t) = o.tau {
        cfg.graph.tau = t;
    }
    if let Some(a) = o.alpha {
        cfg.model.alpha = a;
    }
    if let Some(b) = o.beta {
        cfg.model.beta = b;
    }
    if let Some(l) = &o.loss {
        cfg.train.loss = l.clone();
    }
    if let Some(name) = &o.optimizer {
        cfg.train.optimizer = name.clone();
    }
    if let Some(e) = o.epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = o.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    Ok((cfg, source))
}

struct Ctx {
    rules: RuleSet,
    rules_src: Source,
}

fn manifest(ctx: &Ctx, command: &str, out: &OutputDir) -> Manifest {
    Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: None,
        config: None,
        rules: ctx.rules_src.clone(),
        knowledge_graph: None,
        inputs: Vec::new(),
        outputs: out.files().to_vec(),
    }
}

fn finish(out: &mut OutputDir, mut m: Manifest) -> Result<()> {
    m.outputs = out.files().to_vec();
    m.outputs.push(output::MANIFEST_FILE.to_string());
    out.write_manifest(&m)
}

fn write_text(out: &mut OutputDir, name: &str, text: &str) -> Result<()> {
    let path = out.file(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn write_json_file<T: Serialize>(out: &mut OutputDir, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(out, name, &text)
}

fn csv_file(out: &mut OutputDir, name: &str) -> Result<fs::File> {
    let path = out.file(name);
    fs::File::create(&path).map_err(|e| Error::io(&path, e))
}

// ---------------------------------------------------------------------------
// label

fn read_reports(path: &Path) -> Result<Vec<ReportRecord>> {
    if !path.is_dir() {
        return read_jsonl(path);
    }
    let jsonl = path.join(REPORTS_FILE);
    if jsonl.exists() {
        return read_jsonl(&jsonl);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let study_id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok(ReportRecord { study_id, text })
        })
        .collect()
}

#[derive(Serialize)]
struct StudyMentions {
    study_id: String,
    mentions: Vec<DiseaseMention>,
}

fn label(ctx: &Ctx, a: LabelArgs) -> Result<()> {
    let reports = read_reports(&a.reports)?;
    let matcher = Matcher::new(&ctx.rules);
    let results: Vec<(SoftLabelVector, StudyMentions)> = reports
        .par_iter()
        .map(|r| {
            let report = parse_report(&r.text, &r.study_id)
                .map_err(|e| Error::format(&a.reports, format!("study {}: {e}", r.study_id)))?;
            let mentions = matcher.match_mentions(&report);
            Ok((
                resolve_labels(&r.study_id, &mentions),
                StudyMentions {
                    study_id: r.study_id.clone(),
                    mentions,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let (labels, mentions): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let mut out = OutputDir::create(&a.out.out)?;
    write_jsonl(&out.file(LABELS_FILE), &labels)?;
    write_jsonl(&out.file("mentions.jsonl"), &mentions)?;
    let positives: usize = labels
        .iter()
        .map(|v| v.labels.iter().filter(|e| e.probability == 1.0).count())
        .sum();
    let hedged = labels.iter().filter(|v| !v.is_certain_only()).count();
    println!(
        "labeled {} reports: {positives} certain positive labels, {hedged} studies with hedged labels",
        labels.len()
    );
    let mut m = manifest(ctx, "label", &out);
    m.inputs.push(a.reports.display().to_string());
    finish(&mut out, m)
}

// ---------------------------------------------------------------------------
// stats

fn stats(ctx: &Ctx, a: StatsArgs) -> Result<()> {
    let path = if a.labels.is_dir() { a.labels.join(LABELS_FILE) } else { a.labels.clone() };
    let labels: Vec<SoftLabelVector> = read_jsonl(&path)?;
    let mut out = OutputDir::create(&a.out.out)?;
    build_distribution(&labels).write_csv(csv_file(&mut out, "distribution.csv")?)?;
    build_cooccurrence(&labels, a.t_pos).write_csv(csv_file(&mut out, "cooccurrence.csv")?)?;
    let certain = labels.iter().filter(|v| v.is_certain_only()).count();
    println!("{} studies, {certain} with certain labels only", labels.len());
    let mut m = manifest(ctx, "stats", &out);
    m.inputs.push(path.display().to_string());
    finish(&mut out, m)
}

// ---------------------------------------------------------------------------
// synth

fn synth_cmd(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let (mut cfg, cfg_src) = match &a.config {
        Some(p) => {
            let bytes = read_bytes(p)?;
            (
                SynthConfig::from_toml_str(&String::from_utf8_lossy(&bytes))?,
                Some(Source::new(Some(p), &bytes)),
            )
        }
        None => (SynthConfig::default(), None),
    };
    if let Some(n) = a.studies {
        cfg.studies = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let corpus = synth::generate(&cfg, &ctx.rules)?;
    let mut out = OutputDir::create(&a.out.out)?;
    for name in [
        REPORTS_FILE,
        LABELS_FILE,
        cxr_core::dataset::REGIONS_FILE,
        cxr_core::dataset::FEATURES_FILE,
        cxr_core::dataset::SPLIT_FILE,
        synth::TRUTH_FILE,
    ] {
        out.file(name);
    }
    corpus.write(&a.out.out)?;
    println!(
        "{} studies: {} train, {} val, {} test",
        corpus.labels.len(),
        corpus.split.train.len(),
        corpus.split.val.len(),
        corpus.split.test.len()
    );
    let mut m = manifest(ctx, "synth", &out);
    m.seed = Some(cfg.seed);
    m.config = cfg_src;
    finish(&mut out, m)
}

// ---------------------------------------------------------------------------
// graph

#[derive(Serialize)]
struct GraphDump {
    study_id: String,
    tau: f64,
    regions: Vec<String>,
    boxes: Vec<[f64; 4]>,
    spatial: Vec<Vec<f64>>,
    semantic: Vec<Vec<f64>>,
    implicit: Vec<Vec<f64>>,
}

fn graph_cmd(ctx: &Ctx, a: GraphArgs) -> Result<()> {
    let (kg, kg_src) = load_kg(a.kg.as_deref())?;
    if !(0.0..=1.0).contains(&a.tau) {
        return Err(Error::InvalidConfig(format!("tau {} outside [0, 1]", a.tau)));
    }
    let ds = Dataset::load(&a.data)?;
    let semantic = cxr_core::graph::build_semantic_phase1(&kg);
    let g = ds.graph(&a.study, a.tau, &semantic)?;
    let rows = |r: Relation| g.adjacency(r).rows().into_iter().map(|x| x.to_vec()).collect();
    let dump = GraphDump {
        study_id: a.study.clone(),
        tau: a.tau,
        regions: g.regions.iter().map(|&r| REGION_NAMES[r].to_string()).collect(),
        boxes: g.boxes.iter().map(|b| b.as_array()).collect(),
        spatial: rows(Relation::Spatial),
        semantic: rows(Relation::Semantic),
        implicit: rows(Relation::Implicit),
    };
    let mut out = OutputDir::create(&a.out.out)?;
    write_json_file(&mut out, GRAPH_FILE, &dump)?;
    println!("study {}: {} regions", a.study, g.num_nodes());
    let mut m = manifest(ctx, "graph", &out);
    m.knowledge_graph = Some(kg_src);
    m.inputs.push(a.data.display().to_string());
    finish(&mut out, m)
}

// ---------------------------------------------------------------------------
// train / eval / sweep / explain

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let (cfg, cfg_src) = load_pipeline_config(&a.overrides)?;
    let (kg, kg_src) = load_kg(a.overrides.kg.as_deref())?;
    let ds = Dataset::load(&a.data)?;
    let outcome = pipeline::run(&ds, &kg, &cfg)?;

    let mut out = OutputDir::create(&a.out.out)?;
    checkpoint::save(&outcome.params, &out.file(MODEL_FILE))?;
    write_json_file(&mut out, GRAPH_FILE, &outcome.graph)?;
    write_json_file(&mut out, CONFIG_FILE, &cfg)?;
    write_history_csv(&outcome.history, csv_file(&mut out, "metrics.csv")?)?;
    if let Some(h) = &outcome.phase1_history {
        write_history_csv(h, csv_file(&mut out, "phase1_metrics.csv")?)?;
    }
    let best = &outcome.history[outcome.best_epoch.saturating_sub(1).min(outcome.history.len().saturating_sub(1))];
    println!(
        "best epoch {}: val mean AUC {:.4}, top-5 {:.4}, top-10 {:.4}",
        outcome.best_epoch, best.val_mean_auc, best.top5, best.top10
    );
    let mut m = manifest(ctx, "train", &out);
    m.seed = Some(cfg.train.seed);
    m.config = cfg_src;
    m.knowledge_graph = Some(kg_src);
    m.inputs.push(a.data.display().to_string());
    finish(&mut out, m)
}

fn load_model(dir: &Path) -> Result<(cxr_core::network::ModelParams, GraphSpec)> {
    let params = checkpoint::load(&dir.join(MODEL_FILE))?;
    let graph: GraphSpec = cxr_core::dataset::read_json(&dir.join(GRAPH_FILE))?;
    graph.matrix()?;
    Ok((params, graph))
}

#[derive(Serialize)]
struct ClassAuc {
    disease: Disease,
    auc: Option<f64>,
}

#[derive(Serialize)]
struct EvalSummary {
    split: String,
    studies: usize,
    mean_auc: f64,
    top5: f64,
    top10: f64,
    per_class: Vec<ClassAuc>,
}

fn eval_cmd(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let ds = Dataset::load(&a.data)?;
    let (params, graph) = load_model(&a.model)?;
    let (name, ids) = match a.split {
        Split::Train => ("train", &ds.split.train),
        Split::Val => ("val", &ds.split.val),
        Split::Test => ("test", &ds.split.test),
    };
    let r = pipeline::evaluate_split(&ds, &params, &graph, ids, a.not_mentioned.into())?;
    let summary = EvalSummary {
        split: name.to_string(),
        studies: ids.len(),
        mean_auc: r.mean_auc,
        top5: r.top5,
        top10: r.top10,
        per_class: Disease::ALL
            .iter()
            .map(|&d| ClassAuc {
                disease: d,
                auc: r.per_class_auc[d.index()],
            })
            .collect(),
    };
    let mut out = OutputDir::create(&a.out.out)?;
    write_json_file(&mut out, "eval.json", &summary)?;
    println!(
        "{name}: mean AUC {:.4}, top-5 {:.4}, top-10 {:.4} over {} studies",
        r.mean_auc,
        r.top5,
        r.top10,
        ids.len()
    );
    let mut m = manifest(ctx, "eval", &out);
    m.inputs.push(a.data.display().to_string());
    m.inputs.push(a.model.display().to_string());
    finish(&mut out, m)
}

fn sweep_cmd(ctx: &Ctx, a: SweepArgs) -> Result<()> {
    let (cfg, cfg_src) = load_pipeline_config(&a.overrides)?;
    let (kg, kg_src) = load_kg(a.overrides.kg.as_deref())?;
    let cells = pipeline::sweep_grid(&cfg, &a.taus, &a.alphas, &a.betas)?;
    let ds = Dataset::load(&a.data)?;
    let rows = pipeline::sweep(&ds, &kg, &cfg, &cells)?;
    let mut out = OutputDir::create(&a.out.out)?;
    pipeline::write_sweep_csv(&rows, csv_file(&mut out, "sweep.csv")?)?;
    if let Some(best) = rows.iter().max_by(|x, y| x.val_mean_auc.total_cmp(&y.val_mean_auc)) {
        println!(
            "{} cells; best tau {} alpha {} beta {}: val mean AUC {:.4}",
            rows.len(),
            best.tau,
            best.alpha,
            best.beta,
            best.val_mean_auc
        );
    }
    let mut m = manifest(ctx, "sweep", &out);
    m.seed = Some(cfg.train.seed);
    m.config = cfg_src;
    m.knowledge_graph = Some(kg_src);
    m.inputs.push(a.data.display().to_string());
    finish(&mut out, m)
}

fn explain_cmd(ctx: &Ctx, a: ExplainArgs) -> Result<()> {
    for (name, t) in [("node", a.node_threshold), ("edge", a.edge_threshold)] {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig(format!("{name} threshold {t} outside [0, 1]")));
        }
    }
    let ds = Dataset::load(&a.data)?;
    let (params, spec) = load_model(&a.model)?;
    let g = ds.graph(&a.study, spec.tau, &spec.matrix()?)?;
    let pred = forward(&params, &g)?;
    let class = match &a.disease {
        Some(name) => name.parse::<Disease>()?.index(),
        None => rank_classes(&pred.scores)[0],
    };
    let target = match a.target {
        Target::Probability => AttributionTarget::Probability,
        Target::Logit => AttributionTarget::Logit,
    };
    let att = attribute(&params, &g, &pred, class, target)?;
    let exp = explanation(&a.study, &g, &pred, &att, target, a.edge_threshold);
    let mut out = OutputDir::create(&a.out.out)?;
    write_json_file(&mut out, "explanation.json", &exp)?;
    write_text(
        &mut out,
        "overlay.svg",
        &render_overlay(&g, &att, a.node_threshold, a.edge_threshold),
    )?;
    println!(
        "{}: {} score {:.4}, top region {}",
        a.study,
        exp.disease.name(),
        exp.prediction,
        exp.top1_region
    );
    let mut m = manifest(ctx, "explain", &out);
    m.inputs.push(a.data.display().to_string());
    m.inputs.push(a.model.display().to_string());
    finish(&mut out, m)
}
