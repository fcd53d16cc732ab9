//! Anatomical regions, bounding boxes and the anatomy/disease knowledge graph.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::disease::Disease;
use crate::error::{Error, Result};

pub const NUM_REGIONS: usize = 26;

/// Region names in canonical order; a region's index here is its id.
pub const REGION_NAMES: [&str; NUM_REGIONS] = [
    "Right lung",
    "Right upper lung",
    "Right mid lung",
    "Right lower lung",
    "Hilar of right lung",
    "Apical of right lung",
    "Right costophrenic sulcus",
    "Right hemidiaphragm",
    "Left lung",
    "Left upper lung",
    "Left mid lung",
    "Left lower lung",
    "Hilar of left lung",
    "Apical of left lung",
    "Left costophrenic sulcus",
    "Left hemidiaphragm",
    "Cardiac",
    "Cavoatrial",
    "Descending aorta",
    "Structure of carina",
    "Main Bronchus",
    "Right clavicle",
    "Left clavicle",
    "Mediastinum",
    "Aortic arch structure",
    "Superior vena cava structure",
];

pub fn region_index(name: &str) -> Option<usize> {
    let wanted = name.split_whitespace().collect::<Vec<_>>().join(" ");
    REGION_NAMES
        .iter()
        .position(|n| n.eq_ignore_ascii_case(&wanted))
}

pub fn region_id(name: &str) -> Result<usize> {
    region_index(name).ok_or_else(|| Error::UnknownRegion(name.to_string()))
}

/// Axis-aligned box `(x, y, w, h)` in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.h > 0.0) {
            return Err(Error::DegenerateBox { w: self.w, h: self.h });
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Location code `(center_x, center_y, h, w)`.
    pub fn location_code(&self) -> [f64; 4] {
        let (cx, cy) = self.center();
        [cx, cy, self.h, self.w]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Intersection over union of two boxes; 0 when they are disjoint.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return Ok(0.0);
    }
    let inter = iw * ih;
    Ok(inter / (a.area() + b.area() - inter))
}

const fn mirror(b: BBox) -> BBox {
    BBox::new(1.0 - b.x - b.w, b.y, b.w, b.h)
}

const R_LUNG: BBox = BBox::new(0.10, 0.12, 0.36, 0.70);
const R_UPPER: BBox = BBox::new(0.10, 0.12, 0.36, 0.24);
const R_MID: BBox = BBox::new(0.10, 0.35, 0.36, 0.24);
const R_LOWER: BBox = BBox::new(0.10, 0.58, 0.36, 0.24);
const R_HILAR: BBox = BBox::new(0.30, 0.36, 0.14, 0.16);
const R_APICAL: BBox = BBox::new(0.13, 0.10, 0.26, 0.12);
const R_CP: BBox = BBox::new(0.08, 0.73, 0.12, 0.12);
const R_DIAPH: BBox = BBox::new(0.08, 0.74, 0.38, 0.10);

/// Reference layout of a PA chest film (patient right on image left).
pub const DEFAULT_LAYOUT: [BBox; NUM_REGIONS] = [
    R_LUNG,
    R_UPPER,
    R_MID,
    R_LOWER,
    R_HILAR,
    R_APICAL,
    R_CP,
    R_DIAPH,
    mirror(R_LUNG),
    mirror(R_UPPER),
    mirror(R_MID),
    mirror(R_LOWER),
    mirror(R_HILAR),
    mirror(R_APICAL),
    mirror(R_CP),
    mirror(R_DIAPH),
    BBox::new(0.38, 0.46, 0.34, 0.30),
    BBox::new(0.38, 0.50, 0.10, 0.16),
    BBox::new(0.50, 0.30, 0.08, 0.46),
    BBox::new(0.45, 0.30, 0.10, 0.08),
    BBox::new(0.41, 0.27, 0.18, 0.14),
    BBox::new(0.12, 0.06, 0.34, 0.08),
    mirror(BBox::new(0.12, 0.06, 0.34, 0.08)),
    BBox::new(0.38, 0.10, 0.24, 0.60),
    BBox::new(0.48, 0.21, 0.12, 0.10),
    BBox::new(0.40, 0.15, 0.08, 0.24),
];

/// The shipped knowledge graph file.
pub const DEFAULT_KG_TOML: &str = include_str!("../config/kg.toml");

/// Region-to-disease and disease-to-disease edges used for semantic adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraphConfig {
    /// (region id, disease)
    pub anatomy_disease_edges: Vec<(usize, Disease)>,
    pub disease_cooccurrence_edges: Vec<(Disease, Disease)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKg {
    #[allow(dead_code)]
    version: Option<u32>,
    anatomy: BTreeMap<String, Vec<String>>,
    cooccurrence: RawCooccurrence,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCooccurrence {
    edges: Vec<(String, String)>,
}

impl KnowledgeGraphConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawKg =
            toml::from_str(text).map_err(|e| Error::InvalidKnowledgeGraph(e.to_string()))?;
        let mut anatomy_disease_edges = Vec::new();
        for (region, diseases) in &raw.anatomy {
            let r = region_id(region)?;
            for d in diseases {
                anatomy_disease_edges.push((r, d.parse::<Disease>()?));
            }
        }
        anatomy_disease_edges.sort();
        anatomy_disease_edges.dedup();
        let mut disease_cooccurrence_edges = Vec::new();
        for (a, b) in &raw.cooccurrence.edges {
            disease_cooccurrence_edges.push((a.parse::<Disease>()?, b.parse::<Disease>()?));
        }
        Ok(KnowledgeGraphConfig {
            anatomy_disease_edges,
            disease_cooccurrence_edges,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn diseases_of(&self, region: usize) -> Vec<Disease> {
        self.anatomy_disease_edges
            .iter()
            .filter(|(r, _)| *r == region)
            .map(|(_, d)| *d)
            .collect()
    }

    pub fn cooccur(&self, a: Disease, b: Disease) -> bool {
        self.disease_cooccurrence_edges
            .iter()
            .any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

impl Default for KnowledgeGraphConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_KG_TOML).expect("shipped knowledge graph is valid")
    }
}
