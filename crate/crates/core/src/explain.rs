//! Gradient-times-feature attributions over the final node and edge states.
//!
//! For class `c`, with `B = d target / d F^L` per relation, the node score is
//! `sum_d B[k, d] * F^L[k, d]`; the edge score is the same product taken over
//! `edge^L`. Combined scores add the three relations.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::anatomy::{NUM_REGIONS, REGION_NAMES};
use crate::disease::{Disease, NUM_DISEASES};
use crate::error::{Error, Result};
use crate::graph::{AnatomyGraph, Relation};
use crate::network::model::{backprop, forward, OutputSeed, Prediction};
use crate::network::params::ModelParams;

pub const DEFAULT_NODE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_EDGE_THRESHOLD: f64 = 0.5;

/// What is differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributionTarget {
    /// The fused class score.
    #[default]
    Probability,
    /// The fused class logit `sum_r w_r z_r[c]`.
    Logit,
}

#[derive(Debug, Clone)]
pub struct Attribution {
    pub class: usize,
    /// `K` raw node scores per relation.
    pub node_scores: Vec<Vec<f64>>,
    /// `K x K` raw edge scores per relation; `[j, k]` is the edge into `k`.
    pub edge_scores: Vec<Array2<f64>>,
    pub combined_nodes: Vec<f64>,
    pub combined_edges: Array2<f64>,
}

impl Attribution {
    pub fn normalized_nodes(&self) -> Vec<f64> {
        normalize(&self.combined_nodes)
    }

    pub fn normalized_edges(&self) -> Array2<f64> {
        let flat: Vec<f64> = self.combined_edges.iter().copied().collect();
        Array2::from_shape_vec(self.combined_edges.dim(), normalize(&flat)).expect("same shape")
    }

    /// Node with the largest absolute combined score (lowest index on ties).
    pub fn top1_node(&self) -> usize {
        argmax_abs(&self.combined_nodes)
    }
}

/// `|s| / max |s|`; all zeros when every score is zero.
pub fn normalize(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        vec![0.0; scores.len()]
    } else {
        scores.iter().map(|v| v.abs() / m).collect()
    }
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Attribution of class `class` for one prediction.
pub fn attribute(
    params: &ModelParams,
    graph: &AnatomyGraph,
    pred: &Prediction,
    class: usize,
    target: AttributionTarget,
) -> Result<Attribution> {
    let c = params.config().num_classes;
    if class >= c {
        return Err(Error::UnknownClass(class));
    }
    let sens = match target {
        AttributionTarget::Probability => {
            let mut onehot = vec![0.0; c];
            onehot[class] = 1.0;
            backprop(params, graph, pred, OutputSeed::Scores(&onehot), None)?
        }
        AttributionTarget::Logit => backprop(params, graph, pred, OutputSeed::Logit(class), None)?,
    };
    let k = graph.num_nodes();
    let mut node_scores = Vec::with_capacity(3);
    let mut edge_scores = Vec::with_capacity(3);
    let mut combined_nodes = vec![0.0; k];
    let mut combined_edges = Array2::zeros((k, k));
    for r in Relation::ALL {
        let f = pred.node_states(r);
        let b = &sens.nodes[r.index()];
        let nodes: Vec<f64> = (0..k).map(|i| (&b.row(i) * &f.row(i)).sum()).collect();
        let e = pred.edge_states(r);
        let g = &sens.edges[r.index()];
        let edges = Array2::from_shape_fn((k, k), |(j, kk)| {
            let row = j * k + kk;
            (&g.row(row) * &e.row(row)).sum()
        });
        for i in 0..k {
            combined_nodes[i] += nodes[i];
        }
        combined_edges += &edges;
        node_scores.push(nodes);
        edge_scores.push(edges);
    }
    Ok(Attribution {
        class,
        node_scores,
        edge_scores,
        combined_nodes,
        combined_edges,
    })
}

/// Combined node scores for every class: `result[class][node]`.
pub fn class_node_scores(params: &ModelParams, graph: &AnatomyGraph, target: AttributionTarget) -> Result<Vec<Vec<f64>>> {
    let pred = forward(params, graph)?;
    (0..params.config().num_classes)
        .map(|c| attribute(params, graph, &pred, c, target).map(|a| a.combined_nodes))
        .collect()
}

/// Top-1 and top-2 diseases of each node, by combined node score.
pub fn top_diseases_per_node(params: &ModelParams, graph: &AnatomyGraph) -> Result<Vec<(Disease, Disease)>> {
    let scores = class_node_scores(params, graph, AttributionTarget::Probability)?;
    Ok((0..graph.num_nodes())
        .map(|k| {
            let col: Vec<f64> = scores.iter().map(|s| s[k]).collect();
            top_two(&col)
        })
        .collect())
}

/// The two largest entries, lower index first on ties.
fn top_two(v: &[f64]) -> (Disease, Disease) {
    let order = crate::network::metrics::rank_classes(v);
    (Disease::from_index(order[0]).expect("class"), Disease::from_index(order[1]).expect("class"))
}

/// Region-level top-1/top-2 diseases from node scores summed over studies.
///
/// Regions never seen fall back to class order (Atelectasis, then the next
/// disease).
pub fn region_top_diseases<'a, I>(params: &ModelParams, graphs: I) -> Result<(Vec<Disease>, Vec<Disease>)>
where
    I: IntoIterator<Item = &'a AnatomyGraph>,
{
    let mut sums = vec![[0.0f64; NUM_DISEASES]; NUM_REGIONS];
    for g in graphs {
        let scores = class_node_scores(params, g, AttributionTarget::Probability)?;
        for (k, &region) in g.regions.iter().enumerate() {
            for c in 0..NUM_DISEASES {
                sums[region][c] += scores[c][k];
            }
        }
    }
    let (top1, top2) = sums.iter().map(|s| top_two(s)).unzip();
    Ok((top1, top2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeExplanation {
    pub region: String,
    pub score: f64,
    pub normalized: f64,
    /// Raw score per relation: spatial, semantic, implicit.
    pub per_relation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeExplanation {
    pub from: String,
    pub to: String,
    pub score: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub study_id: String,
    pub disease: Disease,
    pub target: AttributionTarget,
    pub prediction: f64,
    pub top1_region: String,
    pub nodes: Vec<NodeExplanation>,
    /// Edges whose normalized score exceeds the edge threshold.
    pub edges: Vec<EdgeExplanation>,
}

pub fn explanation(
    study_id: &str,
    graph: &AnatomyGraph,
    pred: &Prediction,
    att: &Attribution,
    target: AttributionTarget,
    edge_threshold: f64,
) -> Explanation {
    let k = graph.num_nodes();
    let nn = att.normalized_nodes();
    let ne = att.normalized_edges();
    let name = |i: usize| REGION_NAMES[graph.regions[i]].to_string();
    let nodes = (0..k)
        .map(|i| NodeExplanation {
            region: name(i),
            score: att.combined_nodes[i],
            normalized: nn[i],
            per_relation: [att.node_scores[0][i], att.node_scores[1][i], att.node_scores[2][i]],
        })
        .collect();
    let mut edges = Vec::new();
    for j in 0..k {
        for kk in 0..k {
            if j != kk && ne[[j, kk]] > edge_threshold {
                edges.push(EdgeExplanation {
                    from: name(j),
                    to: name(kk),
                    score: att.combined_edges[[j, kk]],
                    normalized: ne[[j, kk]],
                });
            }
        }
    }
    Explanation {
        study_id: study_id.to_string(),
        disease: Disease::from_index(att.class).expect("class"),
        target,
        prediction: pred.scores[att.class],
        top1_region: name(att.top1_node()),
        nodes,
        edges,
    }
}

/// SVG overlay on the unit image square: the top-1 node in red, nodes above
/// `node_threshold` in yellow, edges above `edge_threshold` as green lines
/// between box centers, other boxes in light gray.
pub fn render_overlay(graph: &AnatomyGraph, att: &Attribution, node_threshold: f64, edge_threshold: f64) -> String {
    const SIZE: f64 = 512.0;
    let k = graph.num_nodes();
    let nn = att.normalized_nodes();
    let ne = att.normalized_edges();
    let top = att.top1_node();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#000"/>"##);
    for j in 0..k {
        for kk in 0..k {
            if j != kk && ne[[j, kk]] > edge_threshold {
                let (x1, y1) = graph.boxes[j].center();
                let (x2, y2) = graph.boxes[kk].center();
                let _ = writeln!(
                    svg,
                    r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#00c000" stroke-width="2" data-from="{}" data-to="{}"/>"##,
                    x1 * SIZE,
                    y1 * SIZE,
                    x2 * SIZE,
                    y2 * SIZE,
                    REGION_NAMES[graph.regions[j]],
                    REGION_NAMES[graph.regions[kk]]
                );
            }
        }
    }
    for i in 0..k {
        let (color, width) = if i == top {
            ("#ff0000", 3)
        } else if nn[i] > node_threshold {
            ("#ffd700", 2)
        } else {
            ("#808080", 1)
        };
        let b = graph.boxes[i];
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="{color}" stroke-width="{width}" data-region="{}" data-score="{:.4}"/>"#,
            b.x * SIZE,
            b.y * SIZE,
            b.w * SIZE,
            b.h * SIZE,
            REGION_NAMES[graph.regions[i]],
            nn[i]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anatomy::DEFAULT_LAYOUT;
    use crate::graph::{build_graph, AnatomicalRegion};
    use crate::network::params::{HeadWeight, ModelConfig};

    fn graph(n: usize) -> AnatomyGraph {
        let nodes: Vec<AnatomicalRegion> = (0..n)
            .map(|i| AnatomicalRegion {
                region: i,
                bbox: DEFAULT_LAYOUT[i],
                feature: vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos(), 0.5],
            })
            .collect();
        build_graph(&nodes, 0.2, &Array2::from_elem((26, 26), 1.0)).unwrap()
    }

    #[test]
    fn linear_model_attributions_decompose_the_logit() {
        let cfg = ModelConfig {
            input_dim: 3,
            layers: 0,
            head_hidden: 0,
            ..ModelConfig::default()
        };
        let p = ModelParams::init(&cfg, 4).unwrap();
        let g = graph(6);
        let pred = forward(&p, &g).unwrap();
        let w = p.fusion_weights();
        for class in [0, 7, 17] {
            let a = attribute(&p, &g, &pred, class, AttributionTarget::Logit).unwrap();
            let mut bias = 0.0;
            let mut logit = 0.0;
            for r in Relation::ALL {
                bias += w[r.index()] * p.vector(p.layout().head(r, HeadWeight::B1))[class];
                logit += w[r.index()] * pred.relation_logits(r)[class];
            }
            let total: f64 = a.combined_nodes.iter().sum();
            assert!((total + bias - logit).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_and_top1() {
        assert_eq!(normalize(&[1.0, -4.0, 2.0]), vec![0.25, 1.0, 0.5]);
        assert_eq!(normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(argmax_abs(&[1.0, -4.0, 4.0]), 1);
    }

    #[test]
    fn overlay_marks_top_node_and_edges() {
        let cfg = ModelConfig {
            input_dim: 3,
            hidden_dim: 4,
            edge_dim: 2,
            layers: 2,
            head_hidden: 4,
            ..ModelConfig::default()
        };
        let p = ModelParams::init(&cfg, 1).unwrap();
        let g = graph(5);
        let pred = forward(&p, &g).unwrap();
        let a = attribute(&p, &g, &pred, 3, AttributionTarget::Probability).unwrap();
        let svg = render_overlay(&g, &a, 0.5, 0.5);
        assert_eq!(svg.matches("#ff0000").count(), 1);
        let top = REGION_NAMES[g.regions[a.top1_node()]];
        assert!(svg.contains(&format!("stroke=\"#ff0000\" stroke-width=\"3\" data-region=\"{top}\"")));
        let strong_edges = a.normalized_edges().iter().filter(|&&v| v > 0.5).count();
        assert_eq!(svg.matches("<line").count(), strong_edges);
        assert!(strong_edges >= 1);
        let e = explanation("s", &g, &pred, &a, AttributionTarget::Probability, 0.5);
        assert_eq!(e.nodes.len(), 5);
        assert_eq!(e.top1_region, top);
        assert!(attribute(&p, &g, &pred, 18, AttributionTarget::Logit).is_err());
    }

    #[test]
    fn top_diseases_are_distinct_per_node() {
        let cfg = ModelConfig {
            input_dim: 3,
            hidden_dim: 4,
            edge_dim: 2,
            layers: 1,
            head_hidden: 0,
            ..ModelConfig::default()
        };
        let p = ModelParams::init(&cfg, 2).unwrap();
        let g = graph(4);
        let tops = top_diseases_per_node(&p, &g).unwrap();
        assert_eq!(tops.len(), 4);
        assert!(tops.iter().all(|(a, b)| a != b));
        let (t1, t2) = region_top_diseases(&p, [&g, &g]).unwrap();
        assert_eq!(t1.len(), NUM_REGIONS);
        assert_eq!(t1[25], Disease::Atelectasis);
        assert_eq!(t2[25], Disease::BluntingOfCostophrenicAngle);
    }
}
