//! Mini-batch training, evaluation and the per-epoch history.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::create_loss;
use super::metrics::{eval_targets, mean_auc, per_class_auc, topk_accuracy, NotMentionedPolicy};
use super::model::{backward, forward};
use super::optim::{create_optimizer, OptimConfig};
use super::params::{ModelConfig, ModelParams};
use crate::dataset::Sample;
use crate::error::{Error, Result};

/// Studies per gradient work unit. Units are summed in index order, so the
/// reduction does not depend on the number of threads.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Registered loss name.
    pub loss: String,
    /// Registered optimizer name.
    pub optimizer: String,
    pub optim: OptimConfig,
    pub seed: u64,
    /// Learn `alpha` and `beta` instead of keeping them fixed.
    pub train_fusion: bool,
    pub not_mentioned: NotMentionedPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 64,
            loss: "expert".into(),
            optimizer: "adam".into(),
            optim: OptimConfig::default(),
            seed: 0,
            train_fusion: false,
            not_mentioned: NotMentionedPolicy::Negative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mean_auc: f64,
    pub top5: f64,
    pub top10: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation mean AUC (the last
    /// epoch when validation AUC is never defined).
    pub params: ModelParams,
    pub history: Vec<EpochMetrics>,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class_auc: Vec<Option<f64>>,
    pub mean_auc: f64,
    pub top5: f64,
    pub top10: f64,
}

pub fn write_history_csv<W: Write>(history: &[EpochMetrics], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for m in history {
        out.serialize(m)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Model config with the loss's head activation and the data's input width.
pub fn resolve_model_config(model: &ModelConfig, cfg: &TrainConfig, input_dim: usize) -> Result<ModelConfig> {
    let loss = create_loss(&cfg.loss)?;
    let mut m = model.clone();
    m.activation = loss.head_activation();
    if m.input_dim == 0 {
        m.input_dim = input_dim;
    }
    m.validate()?;
    Ok(m)
}

/// Fused scores for every sample, in order.
pub fn predict(params: &ModelParams, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
    samples
        .par_iter()
        .map(|s| forward(params, &s.graph).map(|p| p.scores))
        .collect()
}

pub fn evaluate(params: &ModelParams, samples: &[Sample], policy: NotMentionedPolicy) -> Result<EvalReport> {
    let scores = predict(params, samples)?;
    Ok(score_report(&scores, samples, policy))
}

pub fn score_report(scores: &[Vec<f64>], samples: &[Sample], policy: NotMentionedPolicy) -> EvalReport {
    let targets: Vec<Vec<Option<bool>>> = samples.iter().map(|s| eval_targets(&s.labels, policy)).collect();
    let per = per_class_auc(scores, &targets);
    EvalReport {
        mean_auc: mean_auc(&per),
        top5: topk_accuracy(scores, &targets, 5),
        top10: topk_accuracy(scores, &targets, 10),
        per_class_auc: per,
    }
}

/// Loss sum and gradient sum over a batch.
fn batch_gradient(
    params: &ModelParams,
    samples: &[Sample],
    batch: &[usize],
    targets: &[Vec<f64>],
    loss_name: &str,
) -> Result<(f64, ModelParams)> {
    let parts: Vec<(f64, ModelParams)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| -> Result<(f64, ModelParams)> {
            let loss = create_loss(loss_name)?;
            let mut grads = params.zeros_like();
            let mut total = 0.0;
            for &i in chunk {
                let pred = forward(params, &samples[i].graph)?;
                total += loss.value(&pred.scores, &targets[i]);
                let g = loss.grad(&pred.scores, &targets[i]);
                backward(params, &samples[i].graph, &pred, &g, &mut grads)?;
            }
            Ok((total, grads))
        })
        .collect::<Result<_>>()?;
    let mut iter = parts.into_iter();
    let (mut total, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        total += l;
        grads.add_assign(&g);
    }
    Ok((total, grads))
}

/// Trains from a seeded initialisation.
pub fn train(train: &[Sample], val: &[Sample], model: &ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::CorpusTooSmall { needed: 1, got: 0 });
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    let model = resolve_model_config(model, cfg, train[0].graph.feature_dim())?;
    let params = ModelParams::init(&model, cfg.seed)?;
    train_from(params, train, val, cfg)
}

/// Trains starting from the given parameters.
pub fn train_from(
    mut params: ModelParams,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let loss = create_loss(&cfg.loss)?;
    let mut opt = create_optimizer(&cfg.optimizer, &cfg.optim)?;
    let targets: Vec<Vec<f64>> = train.iter().map(|s| loss.target(&s.labels)).collect();
    let fusion = params.layout().entries[params.layout().fusion()].offset;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (l, mut grads) = batch_gradient(&params, train, batch, &targets, &cfg.loss)?;
            if !l.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += l;
            grads.scale(1.0 / batch.len() as f64);
            if !cfg.train_fusion {
                grads.data_mut()[fusion] = 0.0;
                grads.data_mut()[fusion + 1] = 0.0;
            }
            opt.step(params.data_mut(), grads.data());
            if cfg.train_fusion {
                params.project_fusion();
            }
        }
        let train_loss = epoch_loss / train.len() as f64;
        if !train_loss.is_finite() || params.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let report = evaluate(&params, val, cfg.not_mentioned)?;
        log::info!(
            "epoch {epoch}: loss {train_loss:.5} val auc {:.4} top5 {:.4}",
            report.mean_auc,
            report.top5
        );
        history.push(EpochMetrics {
            epoch,
            train_loss,
            val_mean_auc: report.mean_auc,
            top5: report.top5,
            top10: report.top10,
        });
        let better = match &best {
            None => !report.mean_auc.is_nan(),
            Some((b, _, _)) => report.mean_auc > *b,
        };
        if better {
            best = Some((report.mean_auc, epoch, params.clone()));
        }
    }
    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, cfg.epochs),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}
