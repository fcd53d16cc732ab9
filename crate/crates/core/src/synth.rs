//! Synthetic corpus with a planted label-generating process.
//!
//! Each study draws a latent state per disease: not mentioned, negated,
//! positive, or hedged at rank 2-4. Hedged diseases are truly present with the
//! rank's probability, so the soft labels are calibrated. Reports are built
//! from rule-table phrases, and present diseases add a fixed direction to the
//! feature of their home region.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::anatomy::{region_id, BBox, DEFAULT_LAYOUT, NUM_REGIONS, REGION_NAMES};
use crate::corpus::{split_dataset, DatasetSplit};
use crate::dataset::{
    write_json, write_jsonl, FeatureTable, RegionRecord, ReportRecord, StudyRegions, FEATURES_FILE,
    LABELS_FILE, REGIONS_FILE, REPORTS_FILE, SPLIT_FILE,
};
use crate::disease::{Disease, Severity, NUM_DISEASES};
use crate::error::{Error, Result};
use crate::labeler::{label_report, Matcher, SoftLabelVector};
use crate::rules::{rank_probability, RuleSet, NEGATED_RANK, NOT_MENTIONED_RANK};

pub const TRUTH_FILE: &str = "truth.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub studies: usize,
    pub feature_dim: usize,
    /// Length of the planted direction added to a home region.
    pub signal: f64,
    /// Standard deviation of the feature noise.
    pub noise: f64,
    /// Chance that a disease is mentioned at all.
    pub mention_rate: f64,
    /// Among certain mentions, the share that are positive (rest negated).
    pub positive_fraction: f64,
    /// Among mentions in non-certain studies, the share that are hedged.
    pub uncertain_fraction: f64,
    /// Share of studies with no hedged mention at all.
    pub certain_only_fraction: f64,
    /// Chance that a positive mention carries a severity word.
    pub severity_rate: f64,
    pub missing_region_rate: f64,
    /// Uniform jitter applied to box corners.
    pub box_jitter: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            studies: 2000,
            feature_dim: 24,
            signal: 8.0,
            noise: 1.0,
            mention_rate: 0.25,
            positive_fraction: 0.5,
            uncertain_fraction: 0.4,
            certain_only_fraction: 0.35,
            severity_rate: 0.5,
            missing_region_rate: 0.01,
            box_jitter: 0.01,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::config_at(text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("mention_rate", self.mention_rate),
            ("positive_fraction", self.positive_fraction),
            ("uncertain_fraction", self.uncertain_fraction),
            ("certain_only_fraction", self.certain_only_fraction),
            ("severity_rate", self.severity_rate),
            ("missing_region_rate", self.missing_region_rate),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig("feature_dim must be positive".into()));
        }
        if !(0.0..0.05).contains(&self.box_jitter) {
            return Err(Error::InvalidConfig("box_jitter must lie in [0, 0.05)".into()));
        }
        Ok(())
    }
}

/// Region whose feature carries each disease's signal.
pub fn home_region(d: Disease) -> usize {
    use Disease::*;
    let name = match d {
        Atelectasis => "Left lower lung",
        BluntingOfCostophrenicAngle => "Left costophrenic sulcus",
        Calcification => "Aortic arch structure",
        Cardiomegaly => "Cardiac",
        Consolidation => "Right lower lung",
        Edema => "Hilar of right lung",
        Emphysema => "Right upper lung",
        Fracture => "Right clavicle",
        Granuloma => "Left upper lung",
        Hernia => "Left hemidiaphragm",
        LungOpacity => "Right mid lung",
        PleuralEffusion => "Right costophrenic sulcus",
        PleuralThickening => "Apical of left lung",
        Pneumonia => "Left mid lung",
        Pneumothorax => "Apical of right lung",
        Scoliosis => "Structure of carina",
        TortuosityOfThoracicAorta => "Descending aorta",
        VascularCongestion => "Superior vena cava structure",
    };
    region_id(name).expect("home region names are canonical")
}

/// Surface forms used in generated sentences; each is a rule-table keyword
/// or contains one.
pub fn surface_forms(d: Disease) -> &'static [&'static str] {
    use Disease::*;
    match d {
        Atelectasis => &["atelectasis", "collapse"],
        BluntingOfCostophrenicAngle => &["blunting of costophrenic angle"],
        Calcification => &["calcification"],
        Cardiomegaly => &["cardiomegaly", "cardiac enlargement", "enlarged heart"],
        Consolidation => &["consolidation"],
        Edema => &["edema", "pulmonary congestion", "vascular prominence"],
        Emphysema => &["emphysema"],
        Fracture => &["fracture"],
        Granuloma => &["granuloma"],
        Hernia => &["hiatal hernia"],
        LungOpacity => &["opacity", "infiltrate", "airspace disease"],
        PleuralEffusion => &["pleural effusion", "pleural fluid"],
        PleuralThickening => &["pleural thickening"],
        Pneumonia => &["pneumonia", "infection"],
        Pneumothorax => &["pneumothorax"],
        Scoliosis => &["scoliosis"],
        TortuosityOfThoracicAorta => &["tortuosity of the thoracic aorta"],
        VascularCongestion => &["vascular congestion"],
    }
}

/// Sentence templates by uncertainty rank; `{}` is the disease phrase.
pub fn templates(rank: u8) -> &'static [&'static str] {
    match rank {
        1 => &["{} is present.", "Positive for {}.", "There is {}."],
        2 => &["Likely {}.", "{} is probable.", "This may represent {}."],
        3 => &["Possible {}.", "There might be {}."],
        4 => &["{} cannot be excluded.", "{} is not excluded.", "Difficult to exclude {}."],
        6 => &["No {}.", "There is no {}.", "No evidence of {}."],
        _ => &[],
    }
}

const FILLERS: &[&str] = &[
    "Comparison is made to the prior radiograph.",
    "Lines and tubes are in standard position.",
    "The osseous structures are unremarkable.",
    "Lungs are otherwise clear.",
];

const SEVERITY_WORDS: &[(&str, Severity)] = &[
    ("mild", Severity::Mild),
    ("small", Severity::Mild),
    ("moderate", Severity::Moderate),
    ("mild to moderate", Severity::Moderate),
    ("severe", Severity::Severe),
    ("moderate to severe", Severity::Severe),
];

/// Latent truth of one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub study_id: String,
    /// Uncertainty rank written into the report, per disease.
    pub ranks: Vec<u8>,
    /// Severity written into the report, per disease.
    pub severities: Vec<Option<Severity>>,
    /// Whether the disease signal was planted, per disease.
    pub present: Vec<bool>,
}

impl TruthRecord {
    /// Soft label vector implied by the written ranks and severities.
    pub fn expected_labels(&self) -> SoftLabelVector {
        let mut v = SoftLabelVector::unmentioned(&self.study_id);
        for d in Disease::ALL {
            let e = &mut v.labels[d.index()];
            e.probability = rank_probability(self.ranks[d.index()]);
            e.severity = self.severities[d.index()];
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub reports: Vec<ReportRecord>,
    pub labels: Vec<SoftLabelVector>,
    pub regions: Vec<StudyRegions>,
    pub features: FeatureTable,
    pub split: DatasetSplit,
    pub truth: Vec<TruthRecord>,
}

impl SynthCorpus {
    /// Writes the dataset files plus `truth.jsonl`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(REPORTS_FILE), &self.reports)?;
        write_jsonl(&dir.join(LABELS_FILE), &self.labels)?;
        write_jsonl(&dir.join(REGIONS_FILE), &self.regions)?;
        self.features.write(&dir.join(FEATURES_FILE))?;
        write_json(&dir.join(SPLIT_FILE), &self.split)?;
        write_jsonl(&dir.join(TRUTH_FILE), &self.truth)
    }
}

/// Orthonormal directions when `dim >= NUM_DISEASES`, unit vectors otherwise.
fn directions(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(NUM_DISEASES);
    for _ in 0..NUM_DISEASES {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if dim >= NUM_DISEASES {
            for u in &out {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(u) {
                    *a -= dot * b;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        out.push(v.iter().map(|a| a / norm).collect());
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn jitter_box(b: BBox, j: f64, rng: &mut ChaCha8Rng) -> BBox {
    if j == 0.0 {
        return b;
    }
    let mut d = || rng.random_range(-j..=j);
    let x = (b.x + d()).clamp(0.0, 1.0);
    let y = (b.y + d()).clamp(0.0, 1.0);
    let w = (b.w + d()).clamp(0.01, 1.0 - x);
    let h = (b.h + d()).clamp(0.01, 1.0 - y);
    BBox::new(x, y, w, h)
}

/// Generates the corpus; labels come from running the labeler on the reports.
pub fn generate(cfg: &SynthConfig, rules: &RuleSet) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dirs = directions(cfg.feature_dim, &mut rng);
    let matcher = Matcher::new(rules);
    let hedged_ranks = [2u8, 3, 4];

    let mut reports = Vec::with_capacity(cfg.studies);
    let mut labels = Vec::with_capacity(cfg.studies);
    let mut regions = Vec::with_capacity(cfg.studies);
    let mut features = FeatureTable::new(cfg.feature_dim);
    let mut truth = Vec::with_capacity(cfg.studies);

    for s in 0..cfg.studies {
        let study_id = format!("s{s:05}");
        let certain_only = rng.random_bool(cfg.certain_only_fraction);
        let mut ranks = vec![NOT_MENTIONED_RANK; NUM_DISEASES];
        let mut severities = vec![None; NUM_DISEASES];
        let mut present = vec![false; NUM_DISEASES];
        let mut findings = Vec::new();
        let mut impression = Vec::new();

        for d in Disease::ALL {
            if !rng.random_bool(cfg.mention_rate) {
                continue;
            }
            let i = d.index();
            let rank = if !certain_only && rng.random_bool(cfg.uncertain_fraction) {
                *hedged_ranks.choose(&mut rng).unwrap()
            } else if rng.random_bool(cfg.positive_fraction) {
                1
            } else {
                NEGATED_RANK
            };
            ranks[i] = rank;
            present[i] = rng.random_bool(rank_probability(rank));
            let mut phrase = surface_forms(d).choose(&mut rng).unwrap().to_string();
            if rank != NEGATED_RANK && rng.random_bool(cfg.severity_rate) {
                let (word, sev) = *SEVERITY_WORDS.choose(&mut rng).unwrap();
                phrase = format!("{word} {phrase}");
                severities[i] = Some(sev);
            }
            let t = templates(rank).choose(&mut rng).unwrap();
            let sentence = capitalize(&t.replace("{}", &phrase));
            if rng.random_bool(0.5) {
                findings.push(sentence);
            } else {
                impression.push(sentence);
            }
        }
        findings.insert(0, FILLERS.choose(&mut rng).unwrap().to_string());
        if impression.is_empty() {
            impression.push(FILLERS.choose(&mut rng).unwrap().to_string());
        }
        let text = format!(
            "FINDINGS: {}\nIMPRESSION: {}\n",
            findings.join(" "),
            impression.join(" ")
        );
        labels.push(label_report(&matcher, &text, &study_id)?);
        reports.push(ReportRecord {
            study_id: study_id.clone(),
            text,
        });

        let mut recs = Vec::with_capacity(NUM_REGIONS);
        for r in 0..NUM_REGIONS {
            if rng.random_bool(cfg.missing_region_rate) && r != 0 && r != 8 {
                continue;
            }
            let bbox = jitter_box(DEFAULT_LAYOUT[r], cfg.box_jitter, &mut rng);
            let mut f: Vec<f64> = (0..cfg.feature_dim)
                .map(|_| cfg.noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            for d in Disease::ALL {
                if present[d.index()] && home_region(d) == r {
                    for (a, u) in f.iter_mut().zip(&dirs[d.index()]) {
                        *a += cfg.signal * u;
                    }
                }
            }
            recs.push(RegionRecord {
                name: REGION_NAMES[r].to_string(),
                bbox: bbox.as_array(),
                feature_file_offset: features.push(&f)?,
            });
        }
        regions.push(StudyRegions {
            study_id: study_id.clone(),
            regions: recs,
        });
        truth.push(TruthRecord {
            study_id,
            ranks,
            severities,
            present,
        });
    }
    let split = split_dataset(&labels, cfg.seed)?;
    Ok(SynthCorpus {
        reports,
        labels,
        regions,
        features,
        split,
        truth,
    })
}
