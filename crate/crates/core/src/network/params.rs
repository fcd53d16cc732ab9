use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anatomy::NUM_REGIONS;
use crate::disease::NUM_DISEASES;
use crate::error::{Error, Result};
use crate::graph::{Relation, EDGE_FEATURE_DIM};

/// Output nonlinearity of the three relation heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadActivation {
    /// Independent per-class sigmoid (multi-label).
    Sigmoid,
    /// One softmax across classes.
    Softmax,
}

/// How neighbor messages are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Plain sum over neighbors.
    Sum,
    /// Sum divided by the node's neighbor count.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Node feature width `d_in` (taken from the data when 0).
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub edge_dim: usize,
    pub layers: usize,
    /// Hidden width of each MLP head; 0 makes the head a single linear map.
    pub head_hidden: usize,
    pub num_classes: usize,
    pub activation: HeadActivation,
    pub aggregation: Aggregation,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 0,
            hidden_dim: 64,
            edge_dim: 8,
            layers: 3,
            head_hidden: 64,
            num_classes: NUM_DISEASES,
            activation: HeadActivation::Sigmoid,
            aggregation: Aggregation::Mean,
            alpha: 0.3,
            beta: 0.4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        check_fusion(self.alpha, self.beta)?;
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be set".into()));
        }
        if self.layers > 0 && (self.hidden_dim == 0 || self.edge_dim == 0) {
            return Err(Error::InvalidConfig(
                "hidden_dim and edge_dim must be positive".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("need at least two classes".into()));
        }
        Ok(())
    }

    /// Node feature width after layer `l` (layer 0 is the input).
    pub fn node_dim(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }

    /// Edge feature width after layer `l`.
    pub fn edge_width(&self, l: usize) -> usize {
        if l == 0 {
            EDGE_FEATURE_DIM
        } else {
            self.edge_dim
        }
    }

    pub fn output_dim(&self) -> usize {
        self.node_dim(self.layers)
    }
}

pub fn check_fusion(alpha: f64, beta: f64) -> Result<()> {
    let ok = alpha >= 0.0 && beta >= 0.0 && alpha + beta <= 1.0 + 1e-12;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidFusion { alpha, beta })
    }
}

/// Which weight inside a conv layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvWeight {
    /// Self transform, `d_l x d_{l-1}`.
    W1 = 0,
    /// Neighbor transform, `d_l x d_{l-1}`.
    W2 = 1,
    /// Message transform on `[e * W2 F_j, edge_jk]`, `d_l x (d_l + p_l)`.
    W3 = 2,
    /// Edge update, `p_l x p_{l-1}`.
    W4 = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadWeight {
    /// First matrix (the only one for a linear head).
    W1 = 0,
    B1 = 1,
    W2 = 2,
    B2 = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    /// Half-width of the uniform initialisation; 0 marks non-random entries.
    pub init_bound: f64,
}

/// Order and shape of every parameter inside the flat buffer.
///
/// Declared order: for each relation (spatial, semantic, implicit), for each
/// layer, `W1 W2 W3 W4`; then the three `26 x 26` dependency matrices; then
/// the three heads (`W1 b1 W2 b2`, or `W b` when linear); then `[alpha, beta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub config: ModelConfig,
    pub entries: Vec<Entry>,
    pub total: usize,
}

impl Layout {
    pub fn new(config: &ModelConfig) -> Layout {
        let mut entries = Vec::new();
        let mut offset = 0;
        // `he` widens the range for weights that feed a ReLU.
        let mut push = |name: String, rows: usize, cols: usize, fan_in: usize, he: bool| {
            let init_bound = match (fan_in, he) {
                (0, _) => 0.0,
                (f, true) => (6.0 / f as f64).sqrt(),
                (f, false) => 1.0 / (f as f64).sqrt(),
            };
            entries.push(Entry {
                name,
                rows,
                cols,
                offset,
                init_bound,
            });
            offset += rows * cols;
        };
        for r in Relation::ALL {
            for l in 1..=config.layers {
                let (d_prev, d) = (config.node_dim(l - 1), config.node_dim(l));
                let (p_prev, p) = (config.edge_width(l - 1), config.edge_width(l));
                push(format!("{r}.conv{l}.w1"), d, d_prev, d_prev, true);
                push(format!("{r}.conv{l}.w2"), d, d_prev, d_prev, true);
                push(format!("{r}.conv{l}.w3"), d, d + p, d + p, true);
                push(format!("{r}.conv{l}.w4"), p, p_prev, p_prev, false);
            }
        }
        for r in Relation::ALL {
            push(format!("{r}.dependency"), NUM_REGIONS, NUM_REGIONS, 0, false);
        }
        let d_out = config.output_dim();
        for r in Relation::ALL {
            if config.head_hidden > 0 {
                let h = config.head_hidden;
                push(format!("{r}.head.w1"), h, d_out, d_out, true);
                push(format!("{r}.head.b1"), h, 1, 0, false);
                push(format!("{r}.head.w2"), config.num_classes, h, h, false);
                push(format!("{r}.head.b2"), config.num_classes, 1, 0, false);
            } else {
                push(format!("{r}.head.w"), config.num_classes, d_out, d_out, false);
                push(format!("{r}.head.b"), config.num_classes, 1, 0, false);
            }
        }
        push("fusion".into(), 2, 1, 0, false);
        Layout {
            config: config.clone(),
            entries,
            total: offset,
        }
    }

    fn head_entries(&self) -> usize {
        if self.config.head_hidden > 0 {
            4
        } else {
            2
        }
    }

    pub fn conv(&self, r: Relation, layer: usize, w: ConvWeight) -> usize {
        debug_assert!(layer >= 1 && layer <= self.config.layers);
        (r.index() * self.config.layers + layer - 1) * 4 + w as usize
    }

    pub fn dependency(&self, r: Relation) -> usize {
        12 * self.config.layers + r.index()
    }

    /// For a linear head only `W1` (the matrix) and `B1` (the bias) exist.
    pub fn head(&self, r: Relation, w: HeadWeight) -> usize {
        12 * self.config.layers + 3 + r.index() * self.head_entries() + w as usize
    }

    pub fn fusion(&self) -> usize {
        self.entries.len() - 1
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// All trainable values of the network in one flat `f64` buffer.
///
/// Also used as the gradient container (same layout).
#[derive(Debug, Clone)]
pub struct ModelParams {
    layout: Arc<Layout>,
    data: Vec<f64>,
    /// Changes whenever `data` may have been mutated.
    stamp: u64,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.data == other.data
    }
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> ModelParams {
        let layout = Layout::new(config);
        let data = vec![0.0; layout.total];
        ModelParams {
            layout: Arc::new(layout),
            data,
            stamp: fresh_stamp(),
        }
    }

    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            layout: Arc::clone(&self.layout),
            data: vec![0.0; self.data.len()],
            stamp: fresh_stamp(),
        }
    }

    /// Seeded initialisation.
    ///
    /// Entries are visited in layout order; every weight matrix draws its
    /// values row-major from one ChaCha8 stream, uniform in `[-b, b)` with
    /// `b = sqrt(6/fan_in)` for weights feeding a ReLU and `1/sqrt(fan_in)`
    /// otherwise. Biases start at zero, dependency multipliers at one and
    /// the fusion entry at `[alpha, beta]`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
        config.validate()?;
        let mut p = ModelParams::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = Arc::clone(&p.layout);
        for (i, e) in layout.entries.iter().enumerate() {
            let slice = &mut p.data[e.offset..e.offset + e.rows * e.cols];
            if e.init_bound > 0.0 {
                let bound = e.init_bound;
                for v in slice.iter_mut() {
                    *v = rng.random_range(-bound..bound);
                }
            } else if layout.entries[i].name.ends_with("dependency") {
                slice.fill(1.0);
            }
        }
        let f = layout.fusion();
        let off = layout.entries[f].offset;
        p.data[off] = config.alpha;
        p.data[off + 1] = config.beta;
        Ok(p)
    }

    pub fn from_parts(config: &ModelConfig, data: Vec<f64>) -> Result<ModelParams> {
        let layout = Layout::new(config);
        if data.len() != layout.total {
            return Err(Error::DimensionMismatch(format!(
                "parameter buffer has {} values, layout needs {}",
                data.len(),
                layout.total
            )));
        }
        Ok(ModelParams {
            layout: Arc::new(layout),
            data,
            stamp: fresh_stamp(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.layout.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        self.stamp = fresh_stamp();
        &mut self.data
    }

    pub fn stamp(&self) -> u64 {
        self.stamp
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn matrix(&self, entry: usize) -> ArrayView2<'_, f64> {
        let e = &self.layout.entries[entry];
        ArrayView2::from_shape((e.rows, e.cols), &self.data[e.offset..e.offset + e.rows * e.cols])
            .expect("layout shape")
    }

    pub fn matrix_mut(&mut self, entry: usize) -> ArrayViewMut2<'_, f64> {
        self.stamp = fresh_stamp();
        let e = &self.layout.entries[entry];
        ArrayViewMut2::from_shape(
            (e.rows, e.cols),
            &mut self.data[e.offset..e.offset + e.rows * e.cols],
        )
        .expect("layout shape")
    }

    pub fn vector(&self, entry: usize) -> ArrayView1<'_, f64> {
        let e = &self.layout.entries[entry];
        ArrayView1::from(&self.data[e.offset..e.offset + e.rows * e.cols])
    }

    pub fn vector_mut(&mut self, entry: usize) -> ArrayViewMut1<'_, f64> {
        self.stamp = fresh_stamp();
        let e = &self.layout.entries[entry];
        ArrayViewMut1::from(&mut self.data[e.offset..e.offset + e.rows * e.cols])
    }

    pub fn alpha(&self) -> f64 {
        self.data[self.layout.entries[self.layout.fusion()].offset]
    }

    pub fn beta(&self) -> f64 {
        self.data[self.layout.entries[self.layout.fusion()].offset + 1]
    }

    pub fn set_fusion(&mut self, alpha: f64, beta: f64) -> Result<()> {
        check_fusion(alpha, beta)?;
        let off = self.layout.entries[self.layout.fusion()].offset;
        self.data_mut()[off] = alpha;
        self.data[off + 1] = beta;
        Ok(())
    }

    /// Relation weights `[alpha, beta, 1 - alpha - beta]`.
    pub fn fusion_weights(&self) -> [f64; 3] {
        let (a, b) = (self.alpha(), self.beta());
        [a, b, 1.0 - a - b]
    }

    /// Projects `[alpha, beta]` back onto `alpha, beta >= 0, alpha + beta <= 1`.
    pub fn project_fusion(&mut self) {
        let off = self.layout.entries[self.layout.fusion()].offset;
        let mut a = self.data[off].max(0.0);
        let mut b = self.data[off + 1].max(0.0);
        let s = a + b;
        if s > 1.0 {
            a /= s;
            b /= s;
        }
        self.data_mut()[off] = a;
        self.data[off + 1] = b;
    }

    /// `self += other`, element-wise.
    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.data_mut().iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.data_mut().iter_mut() {
            *a *= s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            input_dim: 5,
            hidden_dim: 4,
            edge_dim: 3,
            layers: 2,
            head_hidden: 6,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn layout_offsets_are_contiguous() {
        let layout = Layout::new(&small());
        let mut off = 0;
        for e in &layout.entries {
            assert_eq!(e.offset, off, "{}", e.name);
            off += e.rows * e.cols;
        }
        assert_eq!(off, layout.total);
        let w3 = &layout.entries[layout.conv(Relation::Semantic, 2, ConvWeight::W3)];
        assert_eq!(w3.name, "semantic.conv2.w3");
        assert_eq!((w3.rows, w3.cols), (4, 7));
        let w4 = &layout.entries[layout.conv(Relation::Spatial, 1, ConvWeight::W4)];
        assert_eq!((w4.rows, w4.cols), (3, 4));
        assert_eq!(layout.entries[layout.dependency(Relation::Implicit)].name, "implicit.dependency");
        assert_eq!(layout.entries[layout.head(Relation::Semantic, HeadWeight::B2)].name, "semantic.head.b2");
        assert_eq!(layout.entries[layout.fusion()].name, "fusion");
    }

    #[test]
    fn linear_head_layout() {
        let cfg = ModelConfig {
            head_hidden: 0,
            layers: 0,
            ..small()
        };
        let layout = Layout::new(&cfg);
        let w = &layout.entries[layout.head(Relation::Implicit, HeadWeight::W1)];
        assert_eq!(w.name, "implicit.head.w");
        assert_eq!((w.rows, w.cols), (NUM_DISEASES, 5));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ModelParams::init(&small(), 9).unwrap();
        let b = ModelParams::init(&small(), 9).unwrap();
        let c = ModelParams::init(&small(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let layout = a.layout();
        for (i, e) in layout.entries.iter().enumerate() {
            let m = a.matrix(i);
            if e.init_bound > 0.0 {
                assert!(m.iter().all(|v| v.abs() <= e.init_bound));
            }
        }
        assert!(a.matrix(layout.dependency(Relation::Spatial)).iter().all(|&v| v == 1.0));
        assert_eq!((a.alpha(), a.beta()), (0.3, 0.4));
    }

    #[test]
    fn fusion_checks() {
        let bad = ModelConfig {
            alpha: 0.7,
            beta: 0.4,
            ..small()
        };
        assert!(matches!(ModelParams::init(&bad, 0), Err(Error::InvalidFusion { .. })));
        let mut p = ModelParams::init(&small(), 0).unwrap();
        assert!(p.set_fusion(-0.1, 0.5).is_err());
        p.set_fusion(1.0, 0.0).unwrap();
        assert_eq!(p.fusion_weights(), [1.0, 0.0, 0.0]);
        let off = p.layout().entries[p.layout().fusion()].offset;
        p.data_mut()[off] = 0.9;
        p.data_mut()[off + 1] = 0.6;
        p.project_fusion();
        assert!((p.alpha() + p.beta() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stamps_track_mutation() {
        let mut p = ModelParams::init(&small(), 0).unwrap();
        let s = p.stamp();
        let q = p.clone();
        assert_eq!(q.stamp(), s);
        p.data_mut()[0] += 1.0;
        assert_ne!(p.stamp(), s);
    }
}
