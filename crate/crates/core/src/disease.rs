//! The 18 disease classes and the three merged severity levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Number of disease classes.
pub const NUM_DISEASES: usize = 18;

/// Disease classes in their canonical (enum) order. This order is the class
/// index used by the network, the metrics and every tie-breaking rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Disease {
    Atelectasis,
    BluntingOfCostophrenicAngle,
    Calcification,
    Cardiomegaly,
    Consolidation,
    Edema,
    Emphysema,
    Fracture,
    Granuloma,
    Hernia,
    LungOpacity,
    PleuralEffusion,
    PleuralThickening,
    Pneumonia,
    Pneumothorax,
    Scoliosis,
    TortuosityOfThoracicAorta,
    VascularCongestion,
}

impl Disease {
    pub const ALL: [Disease; NUM_DISEASES] = [
        Disease::Atelectasis,
        Disease::BluntingOfCostophrenicAngle,
        Disease::Calcification,
        Disease::Cardiomegaly,
        Disease::Consolidation,
        Disease::Edema,
        Disease::Emphysema,
        Disease::Fracture,
        Disease::Granuloma,
        Disease::Hernia,
        Disease::LungOpacity,
        Disease::PleuralEffusion,
        Disease::PleuralThickening,
        Disease::Pneumonia,
        Disease::Pneumothorax,
        Disease::Scoliosis,
        Disease::TortuosityOfThoracicAorta,
        Disease::VascularCongestion,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Disease> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Disease::Atelectasis => "Atelectasis",
            Disease::BluntingOfCostophrenicAngle => "Blunting of costophrenic angle",
            Disease::Calcification => "Calcification",
            Disease::Cardiomegaly => "Cardiomegaly",
            Disease::Consolidation => "Consolidation",
            Disease::Edema => "Edema",
            Disease::Emphysema => "Emphysema",
            Disease::Fracture => "Fracture",
            Disease::Granuloma => "Granuloma",
            Disease::Hernia => "Hernia",
            Disease::LungOpacity => "Lung Opacity",
            Disease::PleuralEffusion => "Pleural Effusion",
            Disease::PleuralThickening => "Pleural Thickening",
            Disease::Pneumonia => "Pneumonia",
            Disease::Pneumothorax => "Pneumothorax",
            Disease::Scoliosis => "Scoliosis",
            Disease::TortuosityOfThoracicAorta => "Tortuosity of the thoracic aorta",
            Disease::VascularCongestion => "Vascular congestion",
        }
    }
}

impl fmt::Display for Disease {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn squash(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_ascii_lowercase()
}

impl FromStr for Disease {
    type Err = Error;

    /// Case- and whitespace-insensitive lookup by display name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = squash(s);
        Disease::ALL
            .iter()
            .copied()
            .find(|d| d.name().to_ascii_lowercase() == wanted)
            .ok_or_else(|| Error::UnknownDisease(s.to_string()))
    }
}

impl Serialize for Disease {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Disease {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Merged severity level attached to a disease mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Mild,
    Moderate,
    Severe,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Mild, Severity::Moderate, Severity::Severe];

    pub fn name(self) -> &'static str {
        match self {
            Severity::Mild => "mild",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mild" => Ok(Severity::Mild),
            "moderate" => Ok(Severity::Moderate),
            "severe" => Ok(Severity::Severe),
            other => Err(Error::InvalidRules(format!("unknown severity level `{other}`"))),
        }
    }
}
