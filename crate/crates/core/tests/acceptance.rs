//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are pinned below.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cxr_core::anatomy::{KnowledgeGraphConfig, DEFAULT_LAYOUT, NUM_REGIONS};
use cxr_core::corpus::{build_cooccurrence, build_distribution, split_dataset, DEFAULT_T_POS};
use cxr_core::dataset::{Dataset, Sample};
use cxr_core::explain::{attribute, AttributionTarget};
use cxr_core::graph::{build_graph, build_implicit, build_semantic_phase1, build_spatial, AnatomicalRegion, Relation};
use cxr_core::labeler::{label_report, Matcher, SoftLabelVector};
use cxr_core::network::metrics::{auc, topk_accuracy};
use cxr_core::network::model::relu_preactivations;
use cxr_core::network::params::HeadWeight;
use cxr_core::network::{
    backward, create_loss, evaluate, forward, train, Aggregation, HeadActivation, ModelConfig, ModelParams,
    NotMentionedPolicy, OptimConfig, TrainConfig,
};
use cxr_core::pipeline::{self, PipelineConfig};
use cxr_core::report::parse_report;
use cxr_core::rules::RuleSet;
use cxr_core::synth::{generate, home_region, SynthConfig, SynthCorpus};
use cxr_core::{Disease, Severity, NUM_DISEASES};

// Pinned tolerances and budgets.
const GOLDEN_BUDGET: Duration = Duration::from_secs(1);
const LOSS_REDUCTION_TOL: f64 = 1e-12;
const GRADCHECK_INSTANCES: usize = 100;
const GRADCHECK_EPS: f64 = 1e-5;
const GRADCHECK_REL_TOL: f64 = 1e-4;
/// Denominator floor of the relative error, so parameters with (near) zero
/// gradient are compared absolutely.
const GRADCHECK_FLOOR: f64 = 1e-6;
/// Instances with a rectifier input this close to its kink are resampled.
const KINK_MARGIN: f64 = 1e-4;
const GRADCHECK_BUDGET: Duration = Duration::from_secs(60);
const TAU_GRID: [f64; 5] = [0.2, 0.3, 0.4, 0.5, 0.6];
const E2E_MIN_AUC: f64 = 0.95;
const E2E_BUDGET: Duration = Duration::from_secs(600);
const SOFT_MIN_WINS: usize = 7;
const LINEAR_TOL: f64 = 1e-10;
const PLANTED_MIN_SEEDS: usize = 9;
/// A seed passes when the region-summed attribution puts the signal region
/// on top for a strict majority of the 18 diseases.
const PLANTED_MIN_DISEASES: usize = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("labeler golden suite", golden_suite),
        ("report fragment fidelity", fragment_fidelity),
        ("soft loss reduces to hard loss", loss_reduction),
        ("gradient check", gradient_check),
        ("spatial graph limit and monotonicity", spatial_limit),
        ("metric oracles", metric_oracles),
        ("synthetic end-to-end", end_to_end),
        ("soft-label advantage", soft_label_advantage),
        ("explainer exactness", explainer_exactness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {verdict} {name}: {} [{:.1}s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// 1

type Triple = (Disease, Option<Severity>, f64);

fn parse_expected(field: &str) -> Vec<Triple> {
    field
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|m| {
            let parts: Vec<&str> = m.split('|').collect();
            assert_eq!(parts.len(), 3, "bad golden entry `{m}`");
            let sev = match parts[1] {
                "-" => None,
                s => Some(s.parse::<Severity>().unwrap()),
            };
            (parts[0].parse().unwrap(), sev, parts[2].parse().unwrap())
        })
        .collect()
}

fn golden_suite() -> Outcome {
    let text = include_str!("data/golden_sentences.tsv");
    let cases: Vec<(&str, Vec<Triple>)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (sentence, expected) = l.split_once('\t').unwrap_or((l, ""));
            (sentence, parse_expected(expected))
        })
        .collect();
    let start = Instant::now();
    let matcher = Matcher::new(&RuleSet::default());
    let mut mismatches = Vec::new();
    for (sentence, expected) in &cases {
        let report = parse_report(sentence, "golden").unwrap();
        let got: Vec<Triple> = matcher
            .match_mentions(&report)
            .iter()
            .map(|m| (m.disease, m.severity, m.probability))
            .collect();
        if report.sentences().count() != 1 || &got != expected {
            mismatches.push(format!("`{sentence}` -> {got:?}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = cases.len() >= 50 && mismatches.is_empty() && elapsed < GOLDEN_BUDGET;
    let mut detail = format!(
        "{}/{} sentences exact in {:.1} ms",
        cases.len() - mismatches.len(),
        cases.len(),
        elapsed.as_secs_f64() * 1e3
    );
    for m in mismatches.iter().take(5) {
        let _ = write!(detail, "; {m}");
    }
    outcome(pass, detail)
}

// ---------------------------------------------------------------------------
// 2

fn fragment_fidelity() -> Outcome {
    let report = "FINDINGS: Small effusion. Possible atelectasis at the left base. No pneumothorax.\n\
                  IMPRESSION: Mild cardiomegaly. Pneumonia cannot be excluded. Likely mild edema.";
    let v = label_report(&Matcher::new(&RuleSet::default()), report, "fragments").unwrap();
    let expected: [(Disease, f64, Option<Severity>); 6] = [
        (Disease::PleuralEffusion, 1.0, Some(Severity::Mild)),
        (Disease::Cardiomegaly, 1.0, Some(Severity::Mild)),
        (Disease::Edema, 0.7, Some(Severity::Mild)),
        (Disease::Atelectasis, 0.5, None),
        (Disease::Pneumonia, 0.3, None),
        (Disease::Pneumothorax, 0.0, None),
    ];
    let mut wrong = Vec::new();
    for d in Disease::ALL {
        let (p, sev) = expected
            .iter()
            .find(|e| e.0 == d)
            .map_or((0.1, None), |e| (e.1, e.2));
        let got = v.get(d);
        if got.probability != p || got.severity != sev {
            wrong.push(format!("{}: {} {:?}", d.name(), got.probability, got.severity));
        }
    }
    outcome(
        wrong.is_empty(),
        if wrong.is_empty() {
            "18/18 labels in the expected probability bucket and severity".to_string()
        } else {
            wrong.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 3

fn loss_reduction() -> Outcome {
    let hard = create_loss("hard").unwrap();
    let soft = create_loss("expert").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let mut labels = SoftLabelVector::unmentioned(&format!("c{case}"));
        for e in labels.labels.iter_mut() {
            e.probability = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        }
        let scores: Vec<f64> = (0..NUM_DISEASES).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect();
        let (th, ts) = (hard.target(&labels), soft.target(&labels));
        worst = worst.max((hard.value(&scores, &th) - soft.value(&scores, &ts)).abs());
        for (a, b) in hard.grad(&scores, &th).iter().zip(soft.grad(&scores, &ts)) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst < LOSS_REDUCTION_TOL,
        format!("max |soft - hard| over values and gradients = {worst:.2e} (tol {LOSS_REDUCTION_TOL:.0e})"),
    )
}

// ---------------------------------------------------------------------------
// 4

fn random_graph(rng: &mut ChaCha8Rng, k: usize, d: usize) -> cxr_core::graph::AnatomyGraph {
    let mut regions = sample(rng, NUM_REGIONS, k).into_vec();
    regions.sort_unstable();
    let nodes: Vec<AnatomicalRegion> = regions
        .iter()
        .map(|&r| AnatomicalRegion {
            region: r,
            bbox: DEFAULT_LAYOUT[r],
            feature: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    let mut semantic = Array2::zeros((NUM_REGIONS, NUM_REGIONS));
    for i in 0..NUM_REGIONS {
        for j in (i + 1)..NUM_REGIONS {
            let v = [0.0, 0.5, 1.0][rng.random_range(0..3)];
            semantic[[i, j]] = v;
            semantic[[j, i]] = v;
        }
    }
    let tau = [0.0, 0.1, 0.2, 0.4][rng.random_range(0..4)];
    build_graph(&nodes, tau, &semantic).unwrap()
}

/// Max relative error of one instance, or `None` when it sits near a kink.
fn gradcheck_instance(rng: &mut ChaCha8Rng) -> Option<f64> {
    let k = rng.random_range(2..=6);
    let d = rng.random_range(1..=4);
    let graph = random_graph(rng, k, d);
    let alpha = rng.random_range(0.0..0.5);
    let beta = rng.random_range(0.0..0.5);
    let cfg = ModelConfig {
        input_dim: d,
        hidden_dim: rng.random_range(2..=4),
        edge_dim: rng.random_range(1..=3),
        layers: 3,
        head_hidden: [0, 3][rng.random_range(0..2)],
        activation: if rng.random_bool(0.5) { HeadActivation::Sigmoid } else { HeadActivation::Softmax },
        aggregation: if rng.random_bool(0.5) { Aggregation::Sum } else { Aggregation::Mean },
        alpha,
        beta,
        ..ModelConfig::default()
    };
    let mut params = ModelParams::init(&cfg, rng.random()).unwrap();
    let n = params.len();
    for v in &mut params.data_mut()[..n - 2] {
        *v += rng.random_range(-0.2..0.2);
    }
    let pred = forward(&params, &graph).unwrap();
    if relu_preactivations(&pred).iter().any(|v| v.abs() < KINK_MARGIN) {
        return None;
    }
    let seed: Vec<f64> = (0..NUM_DISEASES).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut grads = params.zeros_like();
    backward(&params, &graph, &pred, &seed, &mut grads).unwrap();
    let objective = |p: &ModelParams| -> f64 {
        forward(p, &graph).unwrap().scores.iter().zip(&seed).map(|(a, b)| a * b).sum()
    };
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for i in 0..n {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + GRADCHECK_EPS;
        let up = objective(&probe);
        probe.data_mut()[i] = orig - GRADCHECK_EPS;
        let down = objective(&probe);
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * GRADCHECK_EPS);
        let analytic = grads.data()[i];
        let denom = analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Some(worst)
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start = Instant::now();
    let (mut done, mut resampled, mut worst) = (0, 0, 0.0f64);
    while done < GRADCHECK_INSTANCES {
        match gradcheck_instance(&mut rng) {
            Some(e) => {
                worst = worst.max(e);
                done += 1;
            }
            None => resampled += 1,
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < GRADCHECK_REL_TOL && elapsed < GRADCHECK_BUDGET,
        format!(
            "{done} instances (K<=6, d<=4, L=3, {resampled} resampled near a kink): max relative error {worst:.2e} (tol {GRADCHECK_REL_TOL:.0e})"
        ),
    )
}

// ---------------------------------------------------------------------------
// 5

fn spatial_limit() -> Outcome {
    let at_zero = build_spatial(&DEFAULT_LAYOUT, 0.0).unwrap();
    let limit = at_zero == build_implicit(NUM_REGIONS);
    let mut monotone = true;
    let mut prev = at_zero;
    let mut edges = Vec::new();
    for &tau in &TAU_GRID {
        let a = build_spatial(&DEFAULT_LAYOUT, tau).unwrap();
        monotone &= a.iter().zip(prev.iter()).all(|(x, y)| x <= y);
        edges.push(a.sum() as usize / 2);
        prev = a;
    }
    outcome(
        limit && monotone,
        format!("tau=0 equals implicit: {limit}; non-increasing over the grid: {monotone}; edges per tau {edges:?}"),
    )
}

// ---------------------------------------------------------------------------
// 6

fn metric_oracles() -> Outcome {
    let hand = auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]);
    let hand_ok = hand == Some(0.75);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let labels: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
    let scores: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
    let random = auc(&scores, &labels).unwrap();
    let sigma = (1001.0f64 / (12.0 * 500.0 * 500.0)).sqrt();
    let random_ok = (random - 0.5).abs() < 3.0 * sigma;

    let studies = 200;
    let scores: Vec<Vec<f64>> = (0..studies)
        .map(|_| (0..NUM_DISEASES).map(|_| rng.random()).collect())
        .collect();
    let targets: Vec<Vec<Option<bool>>> = (0..studies)
        .map(|_| {
            let mut t: Vec<Option<bool>> = (0..NUM_DISEASES).map(|_| Some(rng.random_bool(0.2))).collect();
            t[rng.random_range(0..NUM_DISEASES)] = Some(true);
            t
        })
        .collect();
    let topk_ok = [NUM_DISEASES, NUM_DISEASES + 7]
        .iter()
        .all(|&k| topk_accuracy(&scores, &targets, k) == 1.0);
    outcome(
        hand_ok && random_ok && topk_ok,
        format!(
            "hand case {hand:?}; random scores AUC {random:.4} (|x-0.5| < {:.4}); top-k at k>=C is 1.0: {topk_ok}",
            3.0 * sigma
        ),
    )
}

// ---------------------------------------------------------------------------
// 7

fn load(corpus: &SynthCorpus) -> (tempfile::TempDir, Dataset) {
    let dir = tempfile::tempdir().unwrap();
    corpus.write(dir.path()).unwrap();
    let ds = Dataset::load(dir.path()).unwrap();
    (dir, ds)
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let corpus = generate(&SynthConfig::default(), &RuleSet::default()).unwrap();
    let (_dir, ds) = load(&corpus);
    let cfg = PipelineConfig::default();
    let out = pipeline::run(&ds, &KnowledgeGraphConfig::default(), &cfg).unwrap();
    let report = pipeline::evaluate_split(&ds, &out.params, &out.graph, &ds.split.test, cfg.train.not_mentioned).unwrap();
    let elapsed = start.elapsed();
    outcome(
        report.mean_auc > E2E_MIN_AUC && elapsed < E2E_BUDGET && cfg.train.epochs <= 20,
        format!(
            "{} studies, {} epochs per phase: test mean AUC {:.4} (> {E2E_MIN_AUC}), top-5 {:.4}, in {:.0} s",
            corpus.labels.len(),
            cfg.train.epochs,
            report.mean_auc,
            report.top5,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 8

/// Corpus with many hedged mentions, where soft targets carry information
/// that hard targets throw away.
fn uncertain_corpus(seed: u64) -> SynthConfig {
    SynthConfig {
        studies: 800,
        signal: 6.5,
        uncertain_fraction: 0.7,
        certain_only_fraction: 0.3,
        seed: 100 + seed,
        ..SynthConfig::default()
    }
}

fn small_model() -> ModelConfig {
    ModelConfig {
        hidden_dim: 16,
        head_hidden: 16,
        ..ModelConfig::default()
    }
}

fn samples(ds: &Dataset) -> (Vec<Sample>, Vec<Sample>, Vec<Sample>) {
    let sem = build_semantic_phase1(&KnowledgeGraphConfig::default());
    let tau = cxr_core::graph::DEFAULT_TAU;
    (
        ds.samples(&ds.split.train, tau, &sem).unwrap(),
        ds.samples(&ds.split.val, tau, &sem).unwrap(),
        ds.samples(&ds.split.test, tau, &sem).unwrap(),
    )
}

fn soft_label_advantage() -> Outcome {
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10u64 {
        let corpus = generate(&uncertain_corpus(seed), &RuleSet::default()).unwrap();
        let (_dir, ds) = load(&corpus);
        let (tr, va, te) = samples(&ds);
        let mut aucs = [0.0; 2];
        for (slot, loss) in ["hard", "expert"].iter().enumerate() {
            let cfg = TrainConfig {
                loss: loss.to_string(),
                seed,
                optim: OptimConfig {
                    learning_rate: 3e-3,
                    ..OptimConfig::default()
                },
                ..TrainConfig::default()
            };
            let out = train(&tr, &va, &small_model(), &cfg).unwrap();
            aucs[slot] = evaluate(&out.params, &te, NotMentionedPolicy::Negative).unwrap().mean_auc;
        }
        wins += usize::from(aucs[1] > aucs[0]);
        pairs.push(format!("{:.3}/{:.3}", aucs[0], aucs[1]));
    }
    outcome(
        wins >= SOFT_MIN_WINS,
        format!("expert beats hard in {wins}/10 seeds (need {SOFT_MIN_WINS}); hard/expert test AUC {}", pairs.join(" ")),
    )
}

// ---------------------------------------------------------------------------
// 9

fn linear_exactness() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(2..=8);
        let d = rng.random_range(1..=5);
        let graph = random_graph(&mut rng, k, d);
        let cfg = ModelConfig {
            input_dim: d,
            layers: 0,
            head_hidden: 0,
            ..ModelConfig::default()
        };
        let mut params = ModelParams::init(&cfg, rng.random()).unwrap();
        let n = params.len();
        for v in &mut params.data_mut()[..n - 2] {
            *v += rng.random_range(-0.5..0.5);
        }
        let pred = forward(&params, &graph).unwrap();
        let w = params.fusion_weights();
        let layout = params.layout().clone();
        for c in 0..NUM_DISEASES {
            let att = attribute(&params, &graph, &pred, c, AttributionTarget::Logit).unwrap();
            let mut bias = 0.0;
            let mut logit = 0.0;
            for r in Relation::ALL {
                let wr = params.matrix(layout.head(r, HeadWeight::W1));
                let b = params.vector(layout.head(r, HeadWeight::B1))[c];
                bias += w[r.index()] * b;
                logit += w[r.index()] * pred.relation_logits(r)[c];
                for node in 0..k {
                    // Mean pooling then a linear head: node `node` adds w_r W_c . x / K.
                    let own: f64 = (0..d).map(|j| wr[[c, j]] * graph.features[[node, j]]).sum::<f64>() / k as f64;
                    worst = worst.max((att.node_scores[r.index()][node] - w[r.index()] * own).abs());
                }
            }
            let total: f64 = att.combined_nodes.iter().sum();
            worst = worst.max((bias + total - logit).abs());
        }
    }
    worst
}

/// Per seed: the per-pair top-1 hit share (reported only), the number of
/// pairs, and how many diseases have their signal region on top once node
/// scores are summed by region over the disease's positive test studies.
fn planted_seed(seed: u64) -> (f64, usize, usize) {
    let corpus = generate(
        &SynthConfig {
            studies: 800,
            seed: 200 + seed,
            ..SynthConfig::default()
        },
        &RuleSet::default(),
    )
    .unwrap();
    let (_dir, ds) = load(&corpus);
    let (tr, va, te) = samples(&ds);
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let params = train(&tr, &va, &small_model(), &cfg).unwrap().params;
    let (mut hits, mut total) = (0, 0);
    let mut sums = vec![[0.0f64; NUM_REGIONS]; NUM_DISEASES];
    for (id, sample) in ds.split.test.iter().zip(&te) {
        let truth = corpus.truth.iter().find(|t| &t.study_id == id).unwrap();
        let pred = forward(&params, &sample.graph).unwrap();
        for d in Disease::ALL {
            let home = home_region(d);
            if !truth.present[d.index()] || !sample.graph.regions.contains(&home) {
                continue;
            }
            let att = attribute(&params, &sample.graph, &pred, d.index(), AttributionTarget::Probability).unwrap();
            total += 1;
            hits += usize::from(sample.graph.regions[att.top1_node()] == home);
            for (k, &region) in sample.graph.regions.iter().enumerate() {
                sums[d.index()][region] += att.combined_nodes[k];
            }
        }
    }
    let placed = Disease::ALL
        .iter()
        .filter(|d| {
            let s = &sums[d.index()];
            let top = (0..NUM_REGIONS).fold(0, |b, r| if s[r] > s[b] { r } else { b });
            top == home_region(**d)
        })
        .count();
    (hits as f64 / total.max(1) as f64, total, placed)
}

fn explainer_exactness() -> Outcome {
    let worst = linear_exactness();
    let seeds: Vec<(f64, usize, usize)> = (0..10).map(planted_seed).collect();
    let good = seeds.iter().filter(|s| s.2 >= PLANTED_MIN_DISEASES).count();
    let listed: Vec<String> = seeds.iter().map(|(s, n, p)| format!("{p}/18,{s:.2}@{n}")).collect();
    outcome(
        worst < LINEAR_TOL && good >= PLANTED_MIN_SEEDS,
        format!(
            "depth-0 decomposition max error {worst:.2e} (tol {LINEAR_TOL:.0e}); signal region top-1 for >= {PLANTED_MIN_DISEASES}/18 diseases in {good}/10 seeds (need {PLANTED_MIN_SEEDS}); per seed diseases placed, per-pair top-1 share@pairs: {}",
            listed.join(" ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 10

fn label_bytes(corpus: &SynthCorpus, threads: usize) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let matcher = Matcher::new(&RuleSet::default());
        let labels: Vec<SoftLabelVector> = corpus
            .reports
            .par_iter()
            .map(|r| label_report(&matcher, &r.text, &r.study_id).unwrap())
            .collect();
        let mut jsonl = Vec::new();
        for v in &labels {
            serde_json::to_writer(&mut jsonl, v).unwrap();
            jsonl.push(b'\n');
        }
        let mut dist = Vec::new();
        build_distribution(&labels).write_csv(&mut dist).unwrap();
        let mut co = Vec::new();
        build_cooccurrence(&labels, DEFAULT_T_POS).write_csv(&mut co).unwrap();
        (jsonl, dist, co)
    })
}

fn train_bits(ds: &Dataset, threads: usize) -> Vec<u64> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let (tr, va, _) = samples(ds);
    let model = ModelConfig {
        hidden_dim: 8,
        head_hidden: 8,
        ..ModelConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 3,
        seed: 11,
        ..TrainConfig::default()
    };
    pool.install(|| train(&tr, &va, &model, &cfg))
        .unwrap()
        .params
        .data()
        .iter()
        .map(|v| v.to_bits())
        .collect()
}

fn determinism() -> Outcome {
    let cfg = SynthConfig {
        studies: 300,
        seed: 10,
        ..SynthConfig::default()
    };
    let a = generate(&cfg, &RuleSet::default()).unwrap();
    let b = generate(&cfg, &RuleSet::default()).unwrap();
    let corpus_same = a.reports == b.reports
        && a.labels == b.labels
        && a.regions == b.regions
        && a.features == b.features
        && a.split == b.split;
    let labels_same = label_bytes(&a, 1) == label_bytes(&a, 3);
    let split_same = split_dataset(&a.labels, 5).unwrap() == split_dataset(&a.labels, 5).unwrap();
    let (_dir, ds) = load(&a);
    let t1 = train_bits(&ds, 1);
    let train_same = t1 == train_bits(&ds, 3) && t1 == train_bits(&ds, 1);
    outcome(
        corpus_same && labels_same && split_same && train_same,
        format!(
            "synth corpus {corpus_same}, labels/stats bytes across 1 and 3 threads {labels_same}, split {split_same}, trained parameters bitwise across 1 and 3 threads {train_same}"
        ),
    )
}
