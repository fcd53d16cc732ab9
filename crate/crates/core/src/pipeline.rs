//! End-to-end training: graph construction, the semantic bootstrap, training
//! and validation sweeps.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::anatomy::{KnowledgeGraphConfig, NUM_REGIONS};
use crate::corpus::{build_cooccurrence, DEFAULT_T_POS};
use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::explain::region_top_diseases;
use crate::graph::{build_semantic_phase1, build_semantic_phase2, DEFAULT_TAU};
use crate::labeler::SoftLabelVector;
use crate::network::params::{check_fusion, ModelConfig, ModelParams};
use crate::network::train::{evaluate, train, EpochMetrics, EvalReport, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub tau: f64,
    /// Rebuild the semantic relation from a first model's attributions and
    /// retrain.
    pub bootstrap: bool,
    /// Training studies whose attributions feed the rebuilt relation.
    pub bootstrap_studies: usize,
    /// Co-occurrence counts must exceed this to link two diseases.
    pub cooccurrence_min: u64,
    /// Positive threshold for co-occurrence counting.
    pub t_pos: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            tau: DEFAULT_TAU,
            bootstrap: true,
            bootstrap_studies: 256,
            cooccurrence_min: 0,
            t_pos: DEFAULT_T_POS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub graph: GraphConfig,
}

impl PipelineConfig {
    /// Parses a TOML config; errors carry the offending line.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::config_at(text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        check_fusion(self.model.alpha, self.model.beta)?;
        if !(0.0..=1.0).contains(&self.graph.tau) {
            return Err(Error::InvalidConfig(format!("tau {} outside [0, 1]", self.graph.tau)));
        }
        if self.train.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        crate::network::loss::loss_registry().create(&self.train.loss, &())?;
        crate::network::optim::optimizer_registry().create(&self.train.optimizer, &self.train.optim)?;
        Ok(())
    }
}

/// Graph settings a trained model depends on; stored next to checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub tau: f64,
    /// Region-indexed semantic adjacency.
    pub semantic: Vec<Vec<f64>>,
}

impl GraphSpec {
    pub fn new(tau: f64, semantic: &Array2<f64>) -> Self {
        GraphSpec {
            tau,
            semantic: semantic.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn matrix(&self) -> Result<Array2<f64>> {
        let flat: Vec<f64> = self.semantic.iter().flatten().copied().collect();
        if self.semantic.len() != NUM_REGIONS || flat.len() != NUM_REGIONS * NUM_REGIONS {
            return Err(Error::DimensionMismatch(format!(
                "semantic matrix must be {NUM_REGIONS}x{NUM_REGIONS}"
            )));
        }
        Ok(Array2::from_shape_vec((NUM_REGIONS, NUM_REGIONS), flat).expect("checked shape"))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub params: ModelParams,
    pub graph: GraphSpec,
    pub history: Vec<EpochMetrics>,
    /// History of the first model when the bootstrap ran.
    pub phase1_history: Option<Vec<EpochMetrics>>,
    pub best_epoch: usize,
}

/// Semantic relation rebuilt from a trained model.
pub fn bootstrap_semantic(
    params: &ModelParams,
    train: &[Sample],
    labels: &[SoftLabelVector],
    cfg: &GraphConfig,
) -> Result<Array2<f64>> {
    let take = cfg.bootstrap_studies.min(train.len());
    let (top1, top2) = region_top_diseases(params, train[..take].iter().map(|s| &s.graph))?;
    let co = build_cooccurrence(labels, cfg.t_pos);
    build_semantic_phase2(&top1, &top2, &co, cfg.cooccurrence_min)
}

/// Trains on the dataset's train split, selecting on its val split.
pub fn run(ds: &Dataset, kg: &KnowledgeGraphConfig, cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let semantic = build_semantic_phase1(kg);
    let tr = ds.samples(&ds.split.train, cfg.graph.tau, &semantic)?;
    let va = ds.samples(&ds.split.val, cfg.graph.tau, &semantic)?;
    let first = train(&tr, &va, &cfg.model, &cfg.train)?;
    if !cfg.graph.bootstrap {
        return Ok(PipelineOutcome {
            params: first.params,
            graph: GraphSpec::new(cfg.graph.tau, &semantic),
            history: first.history,
            phase1_history: None,
            best_epoch: first.best_epoch,
        });
    }
    let train_labels: Vec<SoftLabelVector> = tr.iter().map(|s| s.labels.clone()).collect();
    let semantic2 = bootstrap_semantic(&first.params, &tr, &train_labels, &cfg.graph)?;
    let tr = ds.samples(&ds.split.train, cfg.graph.tau, &semantic2)?;
    let va = ds.samples(&ds.split.val, cfg.graph.tau, &semantic2)?;
    let second = train(&tr, &va, &cfg.model, &cfg.train)?;
    Ok(PipelineOutcome {
        params: second.params,
        graph: GraphSpec::new(cfg.graph.tau, &semantic2),
        history: second.history,
        phase1_history: Some(first.history),
        best_epoch: second.best_epoch,
    })
}

/// Evaluates a trained model on a list of studies.
pub fn evaluate_split(
    ds: &Dataset,
    params: &ModelParams,
    graph: &GraphSpec,
    ids: &[String],
    policy: crate::network::metrics::NotMentionedPolicy,
) -> Result<EvalReport> {
    let samples = ds.samples(ids, graph.tau, &graph.matrix()?)?;
    evaluate(params, &samples, policy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub val_mean_auc: f64,
    pub val_top5: f64,
    pub val_top10: f64,
    pub best_epoch: usize,
}

/// Grid of `(tau, alpha, beta)` cells. Cells with `alpha + beta > 1` (or a
/// negative weight) are dropped; an empty axis keeps the base value.
pub fn sweep_grid(base: &PipelineConfig, taus: &[f64], alphas: &[f64], betas: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let taus = if taus.is_empty() { vec![base.graph.tau] } else { taus.to_vec() };
    let alphas = if alphas.is_empty() { vec![base.model.alpha] } else { alphas.to_vec() };
    let betas = if betas.is_empty() { vec![base.model.beta] } else { betas.to_vec() };
    for &t in &taus {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig(format!("tau {t} outside [0, 1]")));
        }
    }
    let mut cells = Vec::new();
    for &t in &taus {
        for &a in &alphas {
            for &b in &betas {
                if check_fusion(a, b).is_ok() {
                    cells.push((t, a, b));
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidFusion {
            alpha: alphas[0],
            beta: betas[0],
        });
    }
    Ok(cells)
}

/// Trains one model per cell and reports validation metrics only.
pub fn sweep(
    ds: &Dataset,
    kg: &KnowledgeGraphConfig,
    base: &PipelineConfig,
    cells: &[(f64, f64, f64)],
) -> Result<Vec<SweepRow>> {
    cells
        .iter()
        .map(|&(tau, alpha, beta)| {
            let mut cfg = base.clone();
            cfg.graph.tau = tau;
            cfg.model.alpha = alpha;
            cfg.model.beta = beta;
            let out = run(ds, kg, &cfg)?;
            let r = evaluate_split(ds, &out.params, &out.graph, &ds.split.val, cfg.train.not_mentioned)?;
            Ok(SweepRow {
                tau,
                alpha,
                beta,
                val_mean_auc: r.mean_auc,
                val_top5: r.top5,
                val_top10: r.top10,
                best_epoch: out.best_epoch,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
