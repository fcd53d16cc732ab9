//! Ranking metrics over multi-label predictions.

use serde::{Deserialize, Serialize};

use crate::labeler::SoftLabelVector;

/// How a not-mentioned label (0.1) counts at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NotMentionedPolicy {
    #[default]
    Negative,
    Exclude,
}

/// Binary evaluation targets for one study.
///
/// 1.0 is positive and 0.0 negative. Uncertain values (0.3 to 0.7) are left
/// out, as is 0.1 under [`NotMentionedPolicy::Exclude`].
pub fn eval_targets(labels: &SoftLabelVector, policy: NotMentionedPolicy) -> Vec<Option<bool>> {
    labels
        .probabilities()
        .iter()
        .map(|&p| {
            if p >= 1.0 {
                Some(true)
            } else if p <= 0.0 {
                Some(false)
            } else if (p - 0.1).abs() < 1e-9 {
                match policy {
                    NotMentionedPolicy::Negative => Some(false),
                    NotMentionedPolicy::Exclude => None,
                }
            } else {
                None
            }
        })
        .collect()
}

/// Mann-Whitney AUC with average ranks for ties; `None` when either class
/// is empty.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// AUC of every class over the studies where that class has a target.
pub fn per_class_auc(scores: &[Vec<f64>], targets: &[Vec<Option<bool>>]) -> Vec<Option<f64>> {
    assert_eq!(scores.len(), targets.len());
    let classes = scores.first().map_or(0, Vec::len);
    (0..classes)
        .map(|c| {
            let (s, l): (Vec<f64>, Vec<bool>) = scores
                .iter()
                .zip(targets)
                .filter_map(|(s, t)| t[c].map(|y| (s[c], y)))
                .unzip();
            auc(&s, &l)
        })
        .collect()
}

/// Mean over classes with a defined AUC; NaN when none is defined.
pub fn mean_auc(per_class: &[Option<f64>]) -> f64 {
    let v: Vec<f64> = per_class.iter().flatten().copied().collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Classes ordered by descending score; ties go to the lower class index.
pub fn rank_classes(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Mean of `|top-k ∩ positives| / min(k, #positives)` over studies with at
/// least one positive; NaN when there are none.
pub fn topk_accuracy(scores: &[Vec<f64>], targets: &[Vec<Option<bool>>], k: usize) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (s, t) in scores.iter().zip(targets) {
        let positives = t.iter().filter(|v| **v == Some(true)).count();
        if positives == 0 || k == 0 {
            continue;
        }
        let hits = rank_classes(s)
            .iter()
            .take(k)
            .filter(|&&c| t[c] == Some(true))
            .count();
        total += hits as f64 / k.min(positives) as f64;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        total / n as f64
    }
}
