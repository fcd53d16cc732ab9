//! Forward and backward passes of the three-relation edge graph network.
//!
//! Per relation `r` and layer `l`, with `K` nodes:
//!
//! ```text
//! edge^l  = edge^{l-1} W4^T                       (K*K x p_l)
//! H       = F^{l-1} W2^T                          (K x d_l)
//! Agg_k   = n_k sum_j A_jk D[j,k] H_j
//! Eagg_k  = n_k sum_{j: A_jk > 0} edge^l_jk
//! F^l     = relu(F^{l-1} W1^T + Agg W3a^T + Eagg W3b^T),  W3 = [W3a | W3b]
//! ```
//!
//! `D` is the trainable region-by-region dependency matrix (initialised to
//! one, so the effective dependency starts at the adjacency value) and `n_k`
//! is one for sum aggregation or `1/deg(k)` for mean aggregation. The node
//! states are mean-pooled and passed through a per-relation head; the three
//! head outputs are fused as `alpha s_sp + beta s_se + (1-alpha-beta) s_im`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::params::{Aggregation, ConvWeight, HeadActivation, HeadWeight, ModelParams};
use crate::error::{Error, Result};
use crate::graph::{AnatomyGraph, Relation};

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    h: Array2<f64>,
    agg: Array2<f64>,
    edge_agg: Array2<f64>,
    pre: Array2<f64>,
    edge_in: Array2<f64>,
}

#[derive(Debug, Clone)]
struct RelationCache {
    /// `n_k * A_jk`, the dependency weight before the trainable multiplier.
    base: Array2<f64>,
    /// `base * D[j,k]`.
    weights: Array2<f64>,
    /// `n_k * [A_jk > 0]`.
    mask: Array2<f64>,
    layers: Vec<LayerCache>,
    nodes_out: Array2<f64>,
    edges_out: Array2<f64>,
    pooled: Array1<f64>,
    head_pre: Option<Array1<f64>>,
    head_hidden: Option<Array1<f64>>,
    logits: Array1<f64>,
    scores: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Fingerprint {
    params: u64,
    graph: u64,
}

impl Fingerprint {
    fn of(params: &ModelParams, graph: &AnatomyGraph) -> Fingerprint {
        Fingerprint {
            params: params.stamp(),
            graph: graph_hash(graph),
        }
    }
}

fn graph_hash(g: &AnatomyGraph) -> u64 {
    let mut h = DefaultHasher::new();
    g.regions.hash(&mut h);
    let mut feed = |a: &Array2<f64>| {
        a.dim().hash(&mut h);
        for v in a.iter() {
            v.to_bits().hash(&mut h);
        }
    };
    feed(&g.features);
    for a in &g.adjacency {
        feed(a);
    }
    feed(&g.edge_features);
    h.finish()
}

/// Output of a forward pass plus everything the backward pass needs.
///
/// A prediction is tied to the exact parameters and graph that produced it;
/// using it after either changes is rejected with [`Error::StaleCache`].
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Fused per-class scores.
    pub scores: Vec<f64>,
    relations: Vec<RelationCache>,
    fingerprint: Fingerprint,
}

impl Prediction {
    pub fn relation_scores(&self, r: Relation) -> &[f64] {
        self.relations[r.index()].scores.as_slice().expect("contiguous")
    }

    pub fn relation_logits(&self, r: Relation) -> &[f64] {
        self.relations[r.index()].logits.as_slice().expect("contiguous")
    }

    /// Final node states `F^L` (`K x d_L`).
    pub fn node_states(&self, r: Relation) -> ArrayView2<'_, f64> {
        self.relations[r.index()].nodes_out.view()
    }

    /// Final edge states `edge^L` (`K*K x p_L`).
    pub fn edge_states(&self, r: Relation) -> ArrayView2<'_, f64> {
        self.relations[r.index()].edges_out.view()
    }

    /// Checks that this prediction was computed from `params` and `graph`.
    pub fn check(&self, params: &ModelParams, graph: &AnatomyGraph) -> Result<()> {
        if self.fingerprint == Fingerprint::of(params, graph) {
            Ok(())
        } else {
            Err(Error::StaleCache)
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn activate(z: &Array1<f64>, act: HeadActivation) -> Array1<f64> {
    match act {
        HeadActivation::Sigmoid => z.mapv(sigmoid),
        HeadActivation::Softmax => {
            let m = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let e = z.mapv(|v| (v - m).exp());
            let s = e.sum();
            e / s
        }
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn check_graph(params: &ModelParams, graph: &AnatomyGraph) -> Result<()> {
    let want = params.config().input_dim;
    if graph.feature_dim() != want {
        return Err(Error::DimensionMismatch(format!(
            "graph features have width {}, model expects {want}",
            graph.feature_dim()
        )));
    }
    Ok(())
}

fn forward_relation(params: &ModelParams, graph: &AnatomyGraph, r: Relation) -> RelationCache {
    let cfg = params.config();
    let layout = params.layout();
    let k = graph.num_nodes();
    let a = graph.adjacency(r);
    let dep = params.matrix(layout.dependency(r));

    let mut base = Array2::zeros((k, k));
    let mut mask = Array2::zeros((k, k));
    for col in 0..k {
        let deg = (0..k).filter(|&j| a[[j, col]] != 0.0).count();
        let n = match cfg.aggregation {
            Aggregation::Sum => 1.0,
            Aggregation::Mean if deg > 0 => 1.0 / deg as f64,
            Aggregation::Mean => 1.0,
        };
        for j in 0..k {
            if a[[j, col]] != 0.0 {
                base[[j, col]] = n * a[[j, col]];
                mask[[j, col]] = n;
            }
        }
    }
    let weights = Array2::from_shape_fn((k, k), |(j, col)| {
        base[[j, col]] * dep[[graph.regions[j], graph.regions[col]]]
    });

    let mut nodes = graph.features.clone();
    let mut edges = graph.edge_features.clone();
    let mut layers = Vec::with_capacity(cfg.layers);
    for l in 1..=cfg.layers {
        let d = cfg.node_dim(l);
        let p = cfg.edge_width(l);
        let w1 = params.matrix(layout.conv(r, l, ConvWeight::W1));
        let w2 = params.matrix(layout.conv(r, l, ConvWeight::W2));
        let w3 = params.matrix(layout.conv(r, l, ConvWeight::W3));
        let w4 = params.matrix(layout.conv(r, l, ConvWeight::W4));

        let edge_out = edges.dot(&w4.t());
        let h = nodes.dot(&w2.t());
        let agg = weights.t().dot(&h);
        let mut edge_agg = Array2::zeros((k, p));
        for j in 0..k {
            for col in 0..k {
                let m = mask[[j, col]];
                if m != 0.0 {
                    let row = edge_out.row(j * k + col);
                    edge_agg.row_mut(col).scaled_add(m, &row);
                }
            }
        }
        let mut pre = nodes.dot(&w1.t());
        general_mat_mul(1.0, &agg, &w3.slice(s![.., ..d]).t(), 1.0, &mut pre);
        general_mat_mul(1.0, &edge_agg, &w3.slice(s![.., d..]).t(), 1.0, &mut pre);
        let next = pre.mapv(relu);
        layers.push(LayerCache {
            input: nodes,
            h,
            agg,
            edge_agg,
            pre,
            edge_in: edges,
        });
        nodes = next;
        edges = edge_out;
    }

    let pooled = nodes.mean_axis(Axis(0)).expect("at least one node");
    let (head_pre, head_hidden, logits) = if cfg.head_hidden > 0 {
        let w1 = params.matrix(layout.head(r, HeadWeight::W1));
        let b1 = params.vector(layout.head(r, HeadWeight::B1));
        let w2 = params.matrix(layout.head(r, HeadWeight::W2));
        let b2 = params.vector(layout.head(r, HeadWeight::B2));
        let hp = w1.dot(&pooled) + b1;
        let hh = hp.mapv(relu);
        let z = w2.dot(&hh) + b2;
        (Some(hp), Some(hh), z)
    } else {
        let w = params.matrix(layout.head(r, HeadWeight::W1));
        let b = params.vector(layout.head(r, HeadWeight::B1));
        (None, None, w.dot(&pooled) + b)
    };
    let scores = activate(&logits, cfg.activation);
    RelationCache {
        base,
        weights,
        mask,
        layers,
        nodes_out: nodes,
        edges_out: edges,
        pooled,
        head_pre,
        head_hidden,
        logits,
        scores,
    }
}

/// Runs the network on one study graph.
pub fn forward(params: &ModelParams, graph: &AnatomyGraph) -> Result<Prediction> {
    check_graph(params, graph)?;
    let relations: Vec<RelationCache> = Relation::ALL
        .iter()
        .map(|&r| forward_relation(params, graph, r))
        .collect();
    let w = params.fusion_weights();
    let c = params.config().num_classes;
    let scores = (0..c)
        .map(|i| (0..3).map(|r| w[r] * relations[r].scores[i]).sum())
        .collect();
    Ok(Prediction {
        scores,
        relations,
        fingerprint: Fingerprint::of(params, graph),
    })
}

/// What the backward pass starts from.
#[derive(Debug, Clone, Copy)]
pub enum OutputSeed<'a> {
    /// Gradient of a scalar with respect to the fused scores.
    Scores(&'a [f64]),
    /// Unit gradient on the fused logit `sum_r w_r z_r[c]` of one class.
    Logit(usize),
}

/// Gradients of the seeded scalar with respect to the final node and edge
/// states of each relation.
#[derive(Debug, Clone)]
pub struct Sensitivity {
    /// `K x d_L` per relation.
    pub nodes: Vec<Array2<f64>>,
    /// `K*K x p_L` per relation.
    pub edges: Vec<Array2<f64>>,
}

fn add_outer(
    grads: &mut ModelParams,
    entry: usize,
    a: &ArrayView2<'_, f64>,
    b: &ArrayView2<'_, f64>,
) {
    // grads[entry] += a^T b
    let mut m = grads.matrix_mut(entry);
    general_mat_mul(1.0, &a.t(), b, 1.0, &mut m);
}

/// Shared backward pass. When `grads` is given, parameter gradients are
/// accumulated into it.
pub fn backprop(
    params: &ModelParams,
    graph: &AnatomyGraph,
    pred: &Prediction,
    seed: OutputSeed<'_>,
    mut grads: Option<&mut ModelParams>,
) -> Result<Sensitivity> {
    pred.check(params, graph)?;
    let cfg = params.config();
    let layout = params.layout();
    let c = cfg.num_classes;
    let k = graph.num_nodes();
    match seed {
        OutputSeed::Scores(g) if g.len() != c => {
            return Err(Error::DimensionMismatch(format!(
                "score gradient has {} entries, expected {c}",
                g.len()
            )))
        }
        OutputSeed::Logit(cls) if cls >= c => return Err(Error::UnknownClass(cls)),
        _ => {}
    }
    if let Some(g) = grads.as_deref() {
        if g.layout() != layout {
            return Err(Error::DimensionMismatch("gradient layout differs".into()));
        }
    }
    let w = params.fusion_weights();

    if let Some(g) = grads.as_deref_mut() {
        let (sp, se, im) = (&pred.relations[0], &pred.relations[1], &pred.relations[2]);
        let (da, db) = match seed {
            OutputSeed::Scores(gs) => (0..c).fold((0.0, 0.0), |(a, b), i| {
                (
                    a + gs[i] * (sp.scores[i] - im.scores[i]),
                    b + gs[i] * (se.scores[i] - im.scores[i]),
                )
            }),
            OutputSeed::Logit(i) => (sp.logits[i] - im.logits[i], se.logits[i] - im.logits[i]),
        };
        let mut f = g.vector_mut(layout.fusion());
        f[0] += da;
        f[1] += db;
    }

    let mut node_sens = Vec::with_capacity(3);
    let mut edge_sens = Vec::with_capacity(3);
    for r in Relation::ALL {
        let rc = &pred.relations[r.index()];
        let wr = w[r.index()];
        let dz: Array1<f64> = match seed {
            OutputSeed::Scores(gs) => {
                let ds = Array1::from_iter(gs.iter().map(|v| v * wr));
                match cfg.activation {
                    HeadActivation::Sigmoid => {
                        Array1::from_shape_fn(c, |i| ds[i] * rc.scores[i] * (1.0 - rc.scores[i]))
                    }
                    HeadActivation::Softmax => {
                        let dot = ds.dot(&rc.scores);
                        Array1::from_shape_fn(c, |i| rc.scores[i] * (ds[i] - dot))
                    }
                }
            }
            OutputSeed::Logit(cls) => {
                let mut z = Array1::zeros(c);
                z[cls] = wr;
                z
            }
        };

        let dpooled: Array1<f64> = if cfg.head_hidden > 0 {
            let w1 = params.matrix(layout.head(r, HeadWeight::W1));
            let w2 = params.matrix(layout.head(r, HeadWeight::W2));
            let hh = rc.head_hidden.as_ref().expect("hidden head cache");
            let hp = rc.head_pre.as_ref().expect("hidden head cache");
            let dh = w2.t().dot(&dz) * hp.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            if let Some(g) = grads.as_deref_mut() {
                let dz2 = dz.view().insert_axis(Axis(0));
                let dh2 = dh.view().insert_axis(Axis(0));
                add_outer(g, layout.head(r, HeadWeight::W2), &dz2, &hh.view().insert_axis(Axis(0)));
                g.vector_mut(layout.head(r, HeadWeight::B2)).scaled_add(1.0, &dz);
                add_outer(g, layout.head(r, HeadWeight::W1), &dh2, &rc.pooled.view().insert_axis(Axis(0)));
                g.vector_mut(layout.head(r, HeadWeight::B1)).scaled_add(1.0, &dh);
            }
            w1.t().dot(&dh)
        } else {
            let wm = params.matrix(layout.head(r, HeadWeight::W1));
            if let Some(g) = grads.as_deref_mut() {
                let dz2 = dz.view().insert_axis(Axis(0));
                add_outer(g, layout.head(r, HeadWeight::W1), &dz2, &rc.pooled.view().insert_axis(Axis(0)));
                g.vector_mut(layout.head(r, HeadWeight::B1)).scaled_add(1.0, &dz);
            }
            wm.t().dot(&dz)
        };

        let d_out = cfg.output_dim();
        let mut g_f = Array2::from_shape_fn((k, d_out), |(_, i)| dpooled[i] / k as f64);
        node_sens.push(g_f.clone());
        let mut top_edge = Array2::zeros((k * k, cfg.edge_width(cfg.layers)));
        let mut g_edge_next: Option<Array2<f64>> = None;
        let dep_entry = layout.dependency(r);

        for l in (1..=cfg.layers).rev() {
            let lc = &rc.layers[l - 1];
            let d = cfg.node_dim(l);
            let p = cfg.edge_width(l);
            let w1 = params.matrix(layout.conv(r, l, ConvWeight::W1));
            let w2 = params.matrix(layout.conv(r, l, ConvWeight::W2));
            let w3 = params.matrix(layout.conv(r, l, ConvWeight::W3));
            let w4 = params.matrix(layout.conv(r, l, ConvWeight::W4));

            let g_pre = Array2::from_shape_fn(g_f.dim(), |(i, j)| {
                if lc.pre[[i, j]] > 0.0 {
                    g_f[[i, j]]
                } else {
                    0.0
                }
            });
            let g_agg = g_pre.dot(&w3.slice(s![.., ..d]));
            let g_eagg = g_pre.dot(&w3.slice(s![.., d..]));
            let g_h = rc.weights.dot(&g_agg);

            let mut g_edge = g_edge_next.take().unwrap_or_else(|| Array2::zeros((k * k, p)));
            for j in 0..k {
                for col in 0..k {
                    let m = rc.mask[[j, col]];
                    if m != 0.0 {
                        g_edge.row_mut(j * k + col).scaled_add(m, &g_eagg.row(col));
                    }
                }
            }
            if l == cfg.layers {
                top_edge = g_edge.clone();
            }

            if let Some(g) = grads.as_deref_mut() {
                add_outer(g, layout.conv(r, l, ConvWeight::W1), &g_pre.view(), &lc.input.view());
                {
                    let mut m = g.matrix_mut(layout.conv(r, l, ConvWeight::W3));
                    let mut left = m.slice_mut(s![.., ..d]);
                    general_mat_mul(1.0, &g_pre.t(), &lc.agg, 1.0, &mut left);
                    let mut right = m.slice_mut(s![.., d..]);
                    general_mat_mul(1.0, &g_pre.t(), &lc.edge_agg, 1.0, &mut right);
                }
                add_outer(g, layout.conv(r, l, ConvWeight::W2), &g_h.view(), &lc.input.view());
                add_outer(g, layout.conv(r, l, ConvWeight::W4), &g_edge.view(), &lc.edge_in.view());
                let g_w = lc.h.dot(&g_agg.t());
                let mut dd = g.matrix_mut(dep_entry);
                for j in 0..k {
                    for col in 0..k {
                        let b = rc.base[[j, col]];
                        if b != 0.0 {
                            dd[[graph.regions[j], graph.regions[col]]] += b * g_w[[j, col]];
                        }
                    }
                }
            }

            if l > 1 {
                g_edge_next = Some(g_edge.dot(&w4));
            }
            let mut next = g_pre.dot(&w1);
            general_mat_mul(1.0, &g_h, &w2, 1.0, &mut next);
            g_f = next;
        }
        edge_sens.push(top_edge);
    }
    Ok(Sensitivity {
        nodes: node_sens,
        edges: edge_sens,
    })
}

/// Accumulates `d(loss)/d(params)` into `grads` given `d(loss)/d(scores)`.
pub fn backward(
    params: &ModelParams,
    graph: &AnatomyGraph,
    pred: &Prediction,
    d_scores: &[f64],
    grads: &mut ModelParams,
) -> Result<()> {
    backprop(params, graph, pred, OutputSeed::Scores(d_scores), Some(grads)).map(|_| ())
}

/// Pre-activations of every ReLU in the network, for gradient checking.
pub fn relu_preactivations(pred: &Prediction) -> Vec<f64> {
    let mut out = Vec::new();
    for rc in &pred.relations {
        for lc in &rc.layers {
            out.extend(lc.pre.iter().copied());
        }
        if let Some(hp) = &rc.head_pre {
            out.extend(hp.iter().copied());
        }
    }
    out
}
