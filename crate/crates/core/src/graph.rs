//! Per-study anatomy graphs with spatial, semantic and implicit relations.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::anatomy::{iou, BBox, KnowledgeGraphConfig, NUM_REGIONS};
use crate::corpus::CooccurrenceMatrix;
use crate::disease::Disease;
use crate::error::{Error, Result};

/// Default spatial IOU threshold.
pub const DEFAULT_TAU: f64 = 0.5;

/// Width of the initial edge feature `[x_j, y_j, x_k, y_k]`.
pub const EDGE_FEATURE_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Spatial,
    Semantic,
    Implicit,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::Spatial, Relation::Semantic, Relation::Implicit];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::Spatial => "spatial",
            Relation::Semantic => "semantic",
            Relation::Implicit => "implicit",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spatial" | "sp" => Ok(Relation::Spatial),
            "semantic" | "se" => Ok(Relation::Semantic),
            "implicit" | "im" => Ok(Relation::Implicit),
            other => Err(Error::InvalidConfig(format!("unknown relation `{other}`"))),
        }
    }
}

/// One detected region of one study.
#[derive(Debug, Clone, PartialEq)]
pub struct AnatomicalRegion {
    /// Index into [`crate::anatomy::REGION_NAMES`].
    pub region: usize,
    pub bbox: BBox,
    pub feature: Vec<f64>,
}

/// Graph over the regions present in one study.
///
/// Adjacency matrices double as the initial dependency weights `e_jk`; the
/// trainable dependency parameters in the network multiply them.
#[derive(Debug, Clone, PartialEq)]
pub struct AnatomyGraph {
    pub regions: Vec<usize>,
    pub boxes: Vec<BBox>,
    /// `K x d_in` node features.
    pub features: Array2<f64>,
    /// Indexed by [`Relation::index`].
    pub adjacency: [Array2<f64>; 3],
    /// `(K*K) x 4` edge features; row `j*K + k` is the edge from `j` into `k`.
    pub edge_features: Array2<f64>,
}

impl AnatomyGraph {
    /// Assembles a graph from explicit adjacencies.
    pub fn with_adjacency(
        regions: Vec<usize>,
        boxes: Vec<BBox>,
        features: Array2<f64>,
        adjacency: [Array2<f64>; 3],
    ) -> Result<Self> {
        let k = regions.len();
        if k == 0 {
            return Err(Error::TooFewNodes { needed: 1, got: 0 });
        }
        if boxes.len() != k || features.nrows() != k {
            return Err(Error::DimensionMismatch(format!(
                "{k} regions, {} boxes, {} feature rows",
                boxes.len(),
                features.nrows()
            )));
        }
        for a in &adjacency {
            if a.dim() != (k, k) {
                return Err(Error::DimensionMismatch(format!(
                    "adjacency is {:?}, expected ({k}, {k})",
                    a.dim()
                )));
            }
        }
        let mut seen = [false; NUM_REGIONS];
        for &r in &regions {
            if r >= NUM_REGIONS {
                return Err(Error::UnknownRegion(format!("id {r}")));
            }
            if std::mem::replace(&mut seen[r], true) {
                return Err(Error::InvalidConfig(format!("region id {r} appears twice")));
            }
        }
        for b in &boxes {
            b.validate()?;
        }
        let edge_features = edge_features(&boxes);
        Ok(AnatomyGraph {
            regions,
            boxes,
            features,
            adjacency,
            edge_features,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.regions.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn adjacency(&self, r: Relation) -> ArrayView2<'_, f64> {
        self.adjacency[r.index()].view()
    }

    /// Initial dependency `e_jk` for a relation: the adjacency value.
    pub fn dependency(&self, r: Relation, j: usize, k: usize) -> f64 {
        self.adjacency[r.index()][[j, k]]
    }

    /// Same graph with nodes reordered so that new node `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let k = self.num_nodes();
        let features = Array2::from_shape_fn((k, self.feature_dim()), |(i, c)| {
            self.features[[perm[i], c]]
        });
        let adjacency = self
            .adjacency
            .clone()
            .map(|a| Array2::from_shape_fn((k, k), |(i, j)| a[[perm[i], perm[j]]]));
        Self::with_adjacency(
            perm.iter().map(|&i| self.regions[i]).collect(),
            perm.iter().map(|&i| self.boxes[i]).collect(),
            features,
            adjacency,
        )
    }
}

/// Edge features initialised from normalized region centers.
pub fn edge_features(boxes: &[BBox]) -> Array2<f64> {
    let k = boxes.len();
    let centers: Vec<(f64, f64)> = boxes.iter().map(BBox::center).collect();
    Array2::from_shape_fn((k * k, EDGE_FEATURE_DIM), |(row, c)| {
        let (j, kk) = (row / k, row % k);
        match c {
            0 => centers[j].0,
            1 => centers[j].1,
            2 => centers[kk].0,
            _ => centers[kk].1,
        }
    })
}

/// `E_ij = 1` iff `IOU(box_i, box_j) >= tau`, zero diagonal.
pub fn build_spatial(boxes: &[BBox], tau: f64) -> Result<Array2<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidConfig(format!("tau {tau} outside [0, 1]")));
    }
    let k = boxes.len();
    let mut a = Array2::zeros((k, k));
    for i in 0..k {
        for j in (i + 1)..k {
            if iou(&boxes[i], &boxes[j])? >= tau {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
        }
    }
    Ok(a)
}

/// All-ones off the diagonal.
pub fn build_implicit(k: usize) -> Array2<f64> {
    Array2::from_shape_fn((k, k), |(i, j)| if i == j { 0.0 } else { 1.0 })
}

/// Region-indexed (`NUM_REGIONS x NUM_REGIONS`) semantic adjacency from the
/// knowledge graph alone: two regions connect when they share a disease or
/// carry diseases linked by a co-occurrence edge.
pub fn build_semantic_phase1(kg: &KnowledgeGraphConfig) -> Array2<f64> {
    let per_region: Vec<Vec<Disease>> = (0..NUM_REGIONS).map(|r| kg.diseases_of(r)).collect();
    let mut a = Array2::zeros((NUM_REGIONS, NUM_REGIONS));
    for i in 0..NUM_REGIONS {
        for j in (i + 1)..NUM_REGIONS {
            let linked = per_region[i].iter().any(|&di| {
                per_region[j]
                    .iter()
                    .any(|&dj| di == dj || kg.cooccur(di, dj))
            });
            if linked {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
        }
    }
    a
}

/// Semantic adjacency rebuilt from each node's top-1 and top-2 diseases.
///
/// `A1_ij = 1` when the top-1 diseases of `i` and `j` are equal or co-occur
/// (co-occurrence count above `min_count`); `A2` likewise for top-2. The
/// result is `(A1 + A2) / 2` with a zero diagonal.
pub fn build_semantic_phase2(
    top1: &[Disease],
    top2: &[Disease],
    co: &CooccurrenceMatrix,
    min_count: u64,
) -> Result<Array2<f64>> {
    if top1.len() != top2.len() {
        return Err(Error::DimensionMismatch(format!(
            "top1 has {} nodes, top2 has {}",
            top1.len(),
            top2.len()
        )));
    }
    let k = top1.len();
    let related = |a: Disease, b: Disease| a == b || co.get(a, b) > min_count;
    Ok(Array2::from_shape_fn((k, k), |(i, j)| {
        if i == j {
            return 0.0;
        }
        let a1 = related(top1[i], top1[j]) as u8 as f64;
        let a2 = related(top2[i], top2[j]) as u8 as f64;
        (a1 + a2) / 2.0
    }))
}

/// Picks the rows/columns of a region-indexed matrix for the given regions.
pub fn restrict(region_matrix: &Array2<f64>, regions: &[usize]) -> Array2<f64> {
    let k = regions.len();
    Array2::from_shape_fn((k, k), |(i, j)| {
        if i == j {
            0.0
        } else {
            region_matrix[[regions[i], regions[j]]]
        }
    })
}

/// Builds a study graph over the regions present.
///
/// `semantic` is region-indexed (`NUM_REGIONS x NUM_REGIONS`) and is
/// restricted to the present regions.
pub fn build_graph(
    nodes: &[AnatomicalRegion],
    tau: f64,
    semantic: &Array2<f64>,
) -> Result<AnatomyGraph> {
    if nodes.len() < 2 {
        return Err(Error::TooFewNodes {
            needed: 2,
            got: nodes.len(),
        });
    }
    if semantic.dim() != (NUM_REGIONS, NUM_REGIONS) {
        return Err(Error::DimensionMismatch(format!(
            "semantic matrix is {:?}, expected region-indexed {NUM_REGIONS}x{NUM_REGIONS}",
            semantic.dim()
        )));
    }
    let d_in = nodes[0].feature.len();
    if let Some(bad) = nodes.iter().find(|n| n.feature.len() != d_in) {
        return Err(Error::DimensionMismatch(format!(
            "region {} has feature width {}, expected {d_in}",
            bad.region,
            bad.feature.len()
        )));
    }
    for n in nodes {
        let b = n.bbox;
        b.validate()?;
        if b.x < 0.0 || b.y < 0.0 || b.x + b.w > 1.0 + 1e-9 || b.y + b.h > 1.0 + 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "box {:?} of region {} leaves the unit square",
                b.as_array(),
                n.region
            )));
        }
    }
    let regions: Vec<usize> = nodes.iter().map(|n| n.region).collect();
    let boxes: Vec<BBox> = nodes.iter().map(|n| n.bbox).collect();
    let features = Array2::from_shape_fn((nodes.len(), d_in), |(i, c)| nodes[i].feature[c]);
    let adjacency = [
        build_spatial(&boxes, tau)?,
        restrict(semantic, &regions),
        build_implicit(nodes.len()),
    ];
    AnatomyGraph::with_adjacency(regions, boxes, features, adjacency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anatomy::{region_id, DEFAULT_LAYOUT};

    fn layout_nodes(skip: &[usize]) -> Vec<AnatomicalRegion> {
        DEFAULT_LAYOUT
            .iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(i, b)| AnatomicalRegion {
                region: i,
                bbox: *b,
                feature: vec![i as f64, 1.0],
            })
            .collect()
    }

    #[test]
    fn spatial_threshold_examples() {
        let boxes = [BBox::new(0.0, 0.0, 0.2, 0.2), BBox::new(0.1, 0.0, 0.2, 0.2)];
        assert_eq!(build_spatial(&boxes, 0.5).unwrap()[[0, 1]], 0.0);
        assert_eq!(build_spatial(&boxes, 0.3).unwrap()[[0, 1]], 1.0);
        assert_eq!(build_spatial(&boxes, 0.0).unwrap(), build_implicit(2));
        assert_eq!(build_spatial(&DEFAULT_LAYOUT, 1.0).unwrap(), Array2::<f64>::zeros((26, 26)));
        assert!(build_spatial(&boxes, 1.5).is_err());
    }

    #[test]
    fn semantic_phase1_examples() {
        let kg = KnowledgeGraphConfig::default();
        let a = build_semantic_phase1(&kg);
        let l = region_id("Left costophrenic sulcus").unwrap();
        let r = region_id("Right costophrenic sulcus").unwrap();
        assert_eq!(a[[l, r]], 1.0);
        // Cardiac (Cardiomegaly) and right hilum (Edema) via co-occurrence.
        let cardiac = region_id("Cardiac").unwrap();
        let hilar = region_id("Hilar of right lung").unwrap();
        assert!(kg.cooccur(Disease::Edema, Disease::Cardiomegaly));
        assert_eq!(a[[cardiac, hilar]], 1.0);
        // Clavicles carry only Fracture, which shares nothing with Cardiac.
        let clav = region_id("Right clavicle").unwrap();
        assert_eq!(a[[clav, cardiac]], 0.0);
        assert_eq!(a, a.t());
        assert!((0..NUM_REGIONS).all(|i| a[[i, i]] == 0.0));
    }

    #[test]
    fn semantic_phase2_examples() {
        use Disease::*;
        let co = CooccurrenceMatrix {
            counts: vec![vec![0; 18]; 18],
        };
        let a = build_semantic_phase2(&[Edema, Edema], &[Hernia, Fracture], &co, 0).unwrap();
        assert_eq!(a[[0, 1]], 0.5);
        let a = build_semantic_phase2(&[Edema, Edema], &[Hernia, Hernia], &co, 0).unwrap();
        assert_eq!(a[[0, 1]], 1.0);
        let a = build_semantic_phase2(&[Edema, Hernia], &[Fracture, Scoliosis], &co, 0).unwrap();
        assert_eq!(a, Array2::<f64>::zeros((2, 2)));
        let mut co2 = co.clone();
        co2.counts[Edema.index()][Hernia.index()] = 3;
        co2.counts[Hernia.index()][Edema.index()] = 3;
        let a = build_semantic_phase2(&[Edema, Hernia], &[Fracture, Scoliosis], &co2, 0).unwrap();
        assert_eq!(a[[0, 1]], 0.5);
        let a = build_semantic_phase2(&[Edema, Hernia], &[Fracture, Scoliosis], &co2, 3).unwrap();
        assert_eq!(a[[0, 1]], 0.0);
    }

    #[test]
    fn two_node_graph() {
        let nodes = layout_nodes(&(2..26).collect::<Vec<_>>());
        let sem = Array2::zeros((26, 26));
        let g = build_graph(&nodes, 0.5, &sem).unwrap();
        assert_eq!(g.adjacency(Relation::Implicit), build_implicit(2));
        let (c0, c1) = (nodes[0].bbox.center(), nodes[1].bbox.center());
        assert_eq!(g.edge_features.row(1).to_vec(), vec![c0.0, c0.1, c1.0, c1.1]);
        assert_eq!(g.edge_features.row(2).to_vec(), vec![c1.0, c1.1, c0.0, c0.1]);
    }

    #[test]
    fn missing_regions_shrink_consistently() {
        let kg = KnowledgeGraphConfig::default();
        let sem = build_semantic_phase1(&kg);
        let full = build_graph(&layout_nodes(&[]), 0.3, &sem).unwrap();
        let part = build_graph(&layout_nodes(&[5, 13]), 0.3, &sem).unwrap();
        assert_eq!(part.num_nodes(), 24);
        let keep: Vec<usize> = (0..26).filter(|i| *i != 5 && *i != 13).collect();
        for r in Relation::ALL {
            for (a, &i) in keep.iter().enumerate() {
                for (b, &j) in keep.iter().enumerate() {
                    assert_eq!(part.adjacency(r)[[a, b]], full.adjacency(r)[[i, j]]);
                }
            }
        }
        assert_eq!(part.edge_features.nrows(), 24 * 24);
    }

    #[test]
    fn build_graph_errors() {
        let sem = Array2::zeros((26, 26));
        assert!(matches!(
            build_graph(&layout_nodes(&(1..26).collect::<Vec<_>>()), 0.5, &sem),
            Err(Error::TooFewNodes { .. })
        ));
        let mut nodes = layout_nodes(&[]);
        nodes[3].feature.push(0.0);
        assert!(matches!(build_graph(&nodes, 0.5, &sem), Err(Error::DimensionMismatch(_))));
        let mut nodes = layout_nodes(&[]);
        nodes[3].bbox.w = 0.0;
        assert!(matches!(build_graph(&nodes, 0.5, &sem), Err(Error::DegenerateBox { .. })));
    }

    #[test]
    fn layout_adjacency_monotone_and_symmetric() {
        let mut prev: Option<Array2<f64>> = None;
        for tau in [0.0, 0.2, 0.3, 0.4, 0.5, 0.6, 1.0] {
            let a = build_spatial(&DEFAULT_LAYOUT, tau).unwrap();
            assert_eq!(a, a.t());
            if let Some(p) = &prev {
                assert!(a.iter().zip(p.iter()).all(|(x, y)| x <= y));
            }
            prev = Some(a);
        }
    }
}
