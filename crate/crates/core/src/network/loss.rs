//! Training losses. Each loss fixes the head activation it expects and the
//! target vector it derives from a soft label vector.

use super::params::HeadActivation;
use super::registry::Registry;
use crate::labeler::SoftLabelVector;

/// Scores are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-7;

pub trait Loss: Send + Sync {
    fn name(&self) -> &'static str;
    fn head_activation(&self) -> HeadActivation;
    fn target(&self, labels: &SoftLabelVector) -> Vec<f64>;
    /// Loss of one study.
    fn value(&self, scores: &[f64], target: &[f64]) -> f64;
    /// `d value / d scores`.
    fn grad(&self, scores: &[f64], target: &[f64]) -> Vec<f64>;
}

fn clamp(s: f64) -> f64 {
    s.clamp(EPS, 1.0 - EPS)
}

/// Derivative of the clamp: zero where the score is outside the open range.
fn inside(s: f64) -> f64 {
    if s > EPS && s < 1.0 - EPS {
        1.0
    } else {
        0.0
    }
}

/// Binary cross-entropy on labels hardened to 0/1 (only 1.0 is positive).
pub struct HardBce;

impl Loss for HardBce {
    fn name(&self) -> &'static str {
        "hard"
    }

    fn head_activation(&self) -> HeadActivation {
        HeadActivation::Sigmoid
    }

    fn target(&self, labels: &SoftLabelVector) -> Vec<f64> {
        labels
            .probabilities()
            .iter()
            .map(|&p| if p >= 1.0 { 1.0 } else { 0.0 })
            .collect()
    }

    fn value(&self, scores: &[f64], target: &[f64]) -> f64 {
        let sum: f64 = scores
            .iter()
            .zip(target)
            .map(|(&s, &y)| {
                let s = clamp(s);
                if y >= 0.5 {
                    -s.ln()
                } else {
                    -(1.0 - s).ln()
                }
            })
            .sum();
        sum / scores.len() as f64
    }

    fn grad(&self, scores: &[f64], target: &[f64]) -> Vec<f64> {
        let n = scores.len() as f64;
        scores
            .iter()
            .zip(target)
            .map(|(&s, &y)| {
                let c = clamp(s);
                let g = if y >= 0.5 { -1.0 / c } else { 1.0 / (1.0 - c) };
                g * inside(s) / n
            })
            .collect()
    }
}

/// Cross-entropy against the soft probabilities, averaged over classes.
pub struct SoftBce;

impl Loss for SoftBce {
    fn name(&self) -> &'static str {
        "expert"
    }

    fn head_activation(&self) -> HeadActivation {
        HeadActivation::Sigmoid
    }

    fn target(&self, labels: &SoftLabelVector) -> Vec<f64> {
        labels.probabilities().to_vec()
    }

    fn value(&self, scores: &[f64], target: &[f64]) -> f64 {
        let sum: f64 = scores
            .iter()
            .zip(target)
            .map(|(&s, &p)| {
                let s = clamp(s);
                -(p * s.ln() + (1.0 - p) * (1.0 - s).ln())
            })
            .sum();
        sum / scores.len() as f64
    }

    fn grad(&self, scores: &[f64], target: &[f64]) -> Vec<f64> {
        let n = scores.len() as f64;
        scores
            .iter()
            .zip(target)
            .map(|(&s, &p)| {
                let c = clamp(s);
                (-p / c + (1.0 - p) / (1.0 - c)) * inside(s) / n
            })
            .collect()
    }
}

/// `-sum_c p_c log s_c` over a softmax head.
pub struct SoftLiteral;

impl Loss for SoftLiteral {
    fn name(&self) -> &'static str {
        "expert-literal"
    }

    fn head_activation(&self) -> HeadActivation {
        HeadActivation::Softmax
    }

    fn target(&self, labels: &SoftLabelVector) -> Vec<f64> {
        labels.probabilities().to_vec()
    }

    fn value(&self, scores: &[f64], target: &[f64]) -> f64 {
        scores
            .iter()
            .zip(target)
            .map(|(&s, &p)| -p * clamp(s).ln())
            .sum()
    }

    fn grad(&self, scores: &[f64], target: &[f64]) -> Vec<f64> {
        scores
            .iter()
            .zip(target)
            .map(|(&s, &p)| -p / clamp(s) * inside(s))
            .collect()
    }
}

pub type LossRegistry = Registry<dyn Loss, ()>;

/// Registry with `hard`, `expert` and `expert-literal`.
pub fn loss_registry() -> LossRegistry {
    let mut r = LossRegistry::new("loss");
    r.register("hard", |_| Box::new(HardBce) as Box<dyn Loss>)
        .register("expert", |_| Box::new(SoftBce) as Box<dyn Loss>)
        .register("expert-literal", |_| Box::new(SoftLiteral) as Box<dyn Loss>);
    r
}

pub fn create_loss(name: &str) -> crate::Result<Box<dyn Loss>> {
    loss_registry().create(name, &())
}
