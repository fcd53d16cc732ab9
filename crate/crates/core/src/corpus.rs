//! Corpus-level label statistics and reproducible dataset splits.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disease::{Disease, NUM_DISEASES};
use crate::error::{Error, Result};
use crate::labeler::SoftLabelVector;

/// Probability buckets counted in the distribution table.
pub const DISTRIBUTION_BUCKETS: [f64; 4] = [1.0, 0.7, 0.5, 0.3];

/// Default positive threshold for co-occurrence counting.
pub const DEFAULT_T_POS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncertaintyDistribution {
    /// `counts[disease][bucket]`, buckets ordered as [`DISTRIBUTION_BUCKETS`].
    pub counts: Vec<[u64; 4]>,
}

impl UncertaintyDistribution {
    pub fn row(&self, d: Disease) -> [u64; 4] {
        self.counts[d.index()]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["disease", "p1.0", "p0.7", "p0.5", "p0.3"])?;
        for d in Disease::ALL {
            let row = self.row(d);
            out.write_record(
                std::iter::once(d.name().to_string()).chain(row.iter().map(u64::to_string)),
            )?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    /// Row-major `NUM_DISEASES x NUM_DISEASES` study counts.
    pub counts: Vec<Vec<u64>>,
}

impl CooccurrenceMatrix {
    pub fn get(&self, a: Disease, b: Disease) -> u64 {
        self.counts[a.index()][b.index()]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(std::iter::once("disease").chain(Disease::ALL.iter().map(|d| d.name())))?;
        for d in Disease::ALL {
            out.write_record(
                std::iter::once(d.name().to_string())
                    .chain(self.counts[d.index()].iter().map(u64::to_string)),
            )?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

pub fn build_distribution(labels: &[SoftLabelVector]) -> UncertaintyDistribution {
    let mut counts = vec![[0u64; 4]; NUM_DISEASES];
    for v in labels {
        for e in &v.labels {
            if let Some(b) = DISTRIBUTION_BUCKETS.iter().position(|&p| p == e.probability) {
                counts[e.disease.index()][b] += 1;
            }
        }
    }
    UncertaintyDistribution { counts }
}

/// Counts studies in which both diseases have probability at least `t_pos`.
pub fn build_cooccurrence(labels: &[SoftLabelVector], t_pos: f64) -> CooccurrenceMatrix {
    let mut counts = vec![vec![0u64; NUM_DISEASES]; NUM_DISEASES];
    for v in labels {
        let positive: Vec<usize> = v
            .labels
            .iter()
            .filter(|e| e.probability >= t_pos)
            .map(|e| e.disease.index())
            .collect();
        for &i in &positive {
            for &j in &positive {
                counts[i][j] += 1;
            }
        }
    }
    CooccurrenceMatrix { counts }
}

/// Sizes of (train, val, test) for an 8:1:1 split of `n` studies.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let tenth = (n as f64 / 10.0).round() as usize;
    (n - 2 * tenth, tenth, tenth)
}

/// Seeded 8:1:1 split whose test set holds only certain-label studies.
///
/// The study list is permuted with a ChaCha8 Fisher-Yates shuffle seeded by
/// `seed`. Walking the permutation, the first certain-only studies fill the
/// test set; the remaining studies, still in permutation order, fill val and
/// then train.
pub fn split_dataset(labels: &[SoftLabelVector], seed: u64) -> Result<DatasetSplit> {
    let n = labels.len();
    if n < 10 {
        return Err(Error::CorpusTooSmall { needed: 10, got: n });
    }
    let (_, n_val, n_test) = split_sizes(n);
    let certain = labels.iter().filter(|v| v.is_certain_only()).count();
    if certain < n_test {
        return Err(Error::InsufficientCertainStudies {
            needed: n_test,
            available: certain,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut test = Vec::with_capacity(n_test);
    let mut rest = Vec::with_capacity(n - n_test);
    for &i in &order {
        if test.len() < n_test && labels[i].is_certain_only() {
            test.push(labels[i].study_id.clone());
        } else {
            rest.push(labels[i].study_id.clone());
        }
    }
    let train = rest.split_off(n_val);
    Ok(DatasetSplit {
        seed,
        train,
        val: rest,
        test,
    })
}
