//! On-disk dataset layout.
//!
//! A dataset directory holds:
//!
//! * `reports.jsonl`: `{"study_id", "text"}` per line
//! * `labels.jsonl`: one [`SoftLabelVector`] per line
//! * `regions.jsonl`: `{"study_id", "regions": [{"name", "bbox": [x, y, w, h], "feature_file_offset"}]}`
//! * `features.bin`: `RGNF`, `u32` rows, `u32` width, then `rows * width`
//!   little-endian `f32`; `feature_file_offset` is a row index
//! * `split.json`: a [`DatasetSplit`]

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::anatomy::{region_id, BBox, REGION_NAMES};
use crate::corpus::DatasetSplit;
use crate::error::{Error, Result};
use crate::graph::{build_graph, AnatomicalRegion, AnatomyGraph};
use crate::labeler::SoftLabelVector;

pub const REPORTS_FILE: &str = "reports.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const REGIONS_FILE: &str = "regions.jsonl";
pub const FEATURES_FILE: &str = "features.bin";
pub const SPLIT_FILE: &str = "split.json";

const FEATURE_MAGIC: &[u8; 4] = b"RGNF";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub study_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub name: String,
    pub bbox: [f64; 4],
    pub feature_file_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRegions {
    pub study_id: String,
    pub regions: Vec<RegionRecord>,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Row-major `rows x dim` region feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureTable {
    pub fn new(dim: usize) -> Self {
        FeatureTable {
            dim,
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Appends a row and returns its index.
    pub fn push(&mut self, row: &[f64]) -> Result<u64> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "feature row has width {}, table has {}",
                row.len(),
                self.dim
            )));
        }
        let idx = self.rows() as u64;
        self.data.extend(row.iter().map(|&v| v as f32));
        Ok(idx)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(FEATURE_MAGIC).map_err(io)?;
        w.write_all(&(self.rows() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.dim as u32).to_le_bytes()).map_err(io)?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 12 || &bytes[..4] != FEATURE_MAGIC {
            return Err(Error::format(path, "missing RGNF header"));
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let want = 12 + rows * dim * 4;
        if bytes.len() != want {
            return Err(Error::format(
                path,
                format!("expected {want} bytes for {rows}x{dim} features, found {}", bytes.len()),
            ));
        }
        let data = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FeatureTable { dim, data })
    }
}

/// One study ready for the network.
#[derive(Debug, Clone)]
pub struct Sample {
    pub graph: AnatomyGraph,
    pub labels: SoftLabelVector,
}

/// A loaded dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub labels: Vec<SoftLabelVector>,
    pub regions: Vec<StudyRegions>,
    pub features: FeatureTable,
    pub split: DatasetSplit,
    label_index: HashMap<String, usize>,
    region_index: HashMap<String, usize>,
}

impl Dataset {
    /// Loads labels, regions, features and the split; reports are not needed.
    pub fn load(dir: &Path) -> Result<Self> {
        let labels: Vec<SoftLabelVector> = read_jsonl(&dir.join(LABELS_FILE))?;
        let regions: Vec<StudyRegions> = read_jsonl(&dir.join(REGIONS_FILE))?;
        let features = FeatureTable::read(&dir.join(FEATURES_FILE))?;
        let split: DatasetSplit = read_json(&dir.join(SPLIT_FILE))?;
        Self::from_parts(dir, labels, regions, features, split)
    }

    pub fn from_parts(
        dir: &Path,
        labels: Vec<SoftLabelVector>,
        regions: Vec<StudyRegions>,
        features: FeatureTable,
        split: DatasetSplit,
    ) -> Result<Self> {
        let label_index: HashMap<String, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, v)| (v.study_id.clone(), i))
            .collect();
        let region_index: HashMap<String, usize> = regions
            .iter()
            .enumerate()
            .map(|(i, v)| (v.study_id.clone(), i))
            .collect();
        let rows = features.rows() as u64;
        let regions_path = dir.join(REGIONS_FILE);
        for s in &regions {
            for r in &s.regions {
                if r.feature_file_offset >= rows {
                    return Err(Error::format(
                        &regions_path,
                        format!(
                            "study {} region `{}` points at feature row {} of {rows}",
                            s.study_id, r.name, r.feature_file_offset
                        ),
                    ));
                }
            }
        }
        for id in split.train.iter().chain(&split.val).chain(&split.test) {
            if !label_index.contains_key(id) || !region_index.contains_key(id) {
                return Err(Error::format(
                    dir.join(SPLIT_FILE),
                    format!("study {id} lacks labels or regions"),
                ));
            }
        }
        Ok(Dataset {
            dir: dir.to_path_buf(),
            labels,
            regions,
            features,
            split,
            label_index,
            region_index,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.features.dim
    }

    pub fn labels_of(&self, study_id: &str) -> Option<&SoftLabelVector> {
        self.label_index.get(study_id).map(|&i| &self.labels[i])
    }

    /// Region nodes of a study in canonical region order.
    pub fn nodes(&self, study_id: &str) -> Result<Vec<AnatomicalRegion>> {
        let idx = *self
            .region_index
            .get(study_id)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown study {study_id}")))?;
        let mut nodes = Vec::with_capacity(REGION_NAMES.len());
        for r in &self.regions[idx].regions {
            let [x, y, w, h] = r.bbox;
            nodes.push(AnatomicalRegion {
                region: region_id(&r.name)?,
                bbox: BBox::new(x, y, w, h),
                feature: self
                    .features
                    .row(r.feature_file_offset as usize)
                    .iter()
                    .map(|&v| v as f64)
                    .collect(),
            });
        }
        nodes.sort_by_key(|n| n.region);
        Ok(nodes)
    }

    pub fn graph(&self, study_id: &str, tau: f64, semantic: &Array2<f64>) -> Result<AnatomyGraph> {
        build_graph(&self.nodes(study_id)?, tau, semantic)
    }

    pub fn samples(&self, ids: &[String], tau: f64, semantic: &Array2<f64>) -> Result<Vec<Sample>> {
        ids.iter()
            .map(|id| {
                let labels = self
                    .labels_of(id)
                    .ok_or_else(|| Error::InvalidConfig(format!("no labels for {id}")))?
                    .clone();
                Ok(Sample {
                    graph: self.graph(id, tau, semantic)?,
                    labels,
                })
            })
            .collect()
    }
}
