//! Keyword, severity and uncertainty tables driving the labeler.
//!
//! The tables live in an editable TOML file; the default copy is compiled in.

use std::collections::{BTreeMap, HashSet};
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::disease::{Disease, Severity, NUM_DISEASES};
use crate::error::{Error, Result};
use crate::report::normalize;

/// The shipped rule file.
pub const DEFAULT_RULES_TOML: &str = include_str!("../config/rules.toml");

/// Label probability for each uncertainty rank 1..=6.
pub const RANK_PROBABILITIES: [f64; 6] = [1.0, 0.7, 0.5, 0.3, 0.1, 0.0];

/// Rank assigned to diseases that are never mentioned.
pub const NOT_MENTIONED_RANK: u8 = 5;
/// Rank assigned to negated mentions.
pub const NEGATED_RANK: u8 = 6;

pub fn rank_probability(rank: u8) -> f64 {
    RANK_PROBABILITIES[(rank - 1) as usize]
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyRank {
    pub rank: u8,
    pub probability: f64,
    pub phrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    /// Keyword phrases per disease, in disease enum order.
    pub disease_keywords: Vec<(Disease, Vec<String>)>,
    pub severity_map: Vec<(String, Severity)>,
    /// Exactly six entries, ranks 1..=6 in order.
    pub uncertainty_ranks: Vec<UncertaintyRank>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRules {
    #[allow(dead_code)]
    version: Option<u32>,
    diseases: BTreeMap<String, Spanned<Vec<Spanned<String>>>>,
    severity: BTreeMap<String, Spanned<Vec<Spanned<String>>>>,
    uncertainty: Vec<Spanned<RawRank>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRank {
    rank: Spanned<i64>,
    probability: Spanned<f64>,
    phrases: Vec<Spanned<String>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn at(text: &str, span: Range<usize>, message: impl Into<String>) -> Error {
    Error::ConfigAt {
        line: line_of(text, span.start),
        message: message.into(),
    }
}

fn check_phrase(
    text: &str,
    phrase: &Spanned<String>,
    seen: &mut HashSet<String>,
    table: &str,
) -> Result<String> {
    let value = phrase.get_ref();
    if value.trim().is_empty() {
        return Err(at(text, phrase.span(), format!("empty phrase in {table} table")));
    }
    if normalize(value) != *value {
        return Err(at(
            text,
            phrase.span(),
            format!("phrase `{value}` must be lowercase ASCII with single spaces"),
        ));
    }
    if !seen.insert(value.clone()) {
        return Err(at(
            text,
            phrase.span(),
            format!("duplicate phrase `{value}` in {table} table"),
        ));
    }
    Ok(value.clone())
}

impl RuleSet {
    /// Parses and validates a rule file. Errors carry the 1-based line.
    pub fn from_toml_str(text: &str) -> Result<RuleSet> {
        let raw: RawRules = toml::from_str(text).map_err(|e| Error::ConfigAt {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;

        let mut by_disease: BTreeMap<Disease, Vec<String>> = BTreeMap::new();
        let mut seen = HashSet::new();
        for (name, phrases) in &raw.diseases {
            let disease: Disease = name
                .parse()
                .map_err(|_| at(text, phrases.span(), format!("unknown disease `{name}`")))?;
            if by_disease.contains_key(&disease) {
                return Err(at(text, phrases.span(), format!("disease `{name}` listed twice")));
            }
            if phrases.get_ref().is_empty() {
                return Err(at(text, phrases.span(), format!("disease `{name}` has no keywords")));
            }
            let mut list = Vec::new();
            for p in phrases.get_ref() {
                list.push(check_phrase(text, p, &mut seen, "disease keyword")?);
            }
            by_disease.insert(disease, list);
        }
        if by_disease.len() != NUM_DISEASES {
            let missing: Vec<&str> = Disease::ALL
                .iter()
                .filter(|d| !by_disease.contains_key(d))
                .map(|d| d.name())
                .collect();
            return Err(Error::InvalidRules(format!(
                "diseases table is missing: {}",
                missing.join(", ")
            )));
        }

        let mut severity_map = Vec::new();
        let mut seen = HashSet::new();
        for (level, phrases) in &raw.severity {
            let severity: Severity = level.parse().map_err(|_| {
                at(text, phrases.span(), format!("unknown severity level `{level}`"))
            })?;
            for p in phrases.get_ref() {
                severity_map.push((check_phrase(text, p, &mut seen, "severity")?, severity));
            }
        }

        if raw.uncertainty.len() != RANK_PROBABILITIES.len() {
            return Err(Error::InvalidRules(format!(
                "expected 6 uncertainty ranks, found {}",
                raw.uncertainty.len()
            )));
        }
        let mut uncertainty_ranks = Vec::with_capacity(6);
        let mut seen = HashSet::new();
        for (i, entry) in raw.uncertainty.iter().enumerate() {
            let r = entry.get_ref();
            let expected_rank = i as i64 + 1;
            if *r.rank.get_ref() != expected_rank {
                return Err(at(
                    text,
                    r.rank.span(),
                    format!("expected rank {expected_rank}, found {}", r.rank.get_ref()),
                ));
            }
            let expected_p = RANK_PROBABILITIES[i];
            if *r.probability.get_ref() != expected_p {
                return Err(at(
                    text,
                    r.probability.span(),
                    format!(
                        "rank {expected_rank} must have probability {expected_p}, found {}",
                        r.probability.get_ref()
                    ),
                ));
            }
            if expected_rank == NOT_MENTIONED_RANK as i64 && !r.phrases.is_empty() {
                return Err(at(
                    text,
                    entry.span(),
                    "rank 5 (not mentioned) must have an empty phrase list",
                ));
            }
            let mut phrases = Vec::new();
            for p in &r.phrases {
                phrases.push(check_phrase(text, p, &mut seen, "uncertainty")?);
            }
            uncertainty_ranks.push(UncertaintyRank {
                rank: expected_rank as u8,
                probability: expected_p,
                phrases,
            });
        }

        Ok(RuleSet {
            disease_keywords: by_disease.into_iter().collect(),
            severity_map,
            uncertainty_ranks,
        })
    }

    pub fn from_path(path: &Path) -> Result<RuleSet> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn keywords(&self, disease: Disease) -> &[String] {
        &self.disease_keywords[disease.index()].1
    }

    pub fn rank(&self, rank: u8) -> &UncertaintyRank {
        &self.uncertainty_ranks[(rank - 1) as usize]
    }

    pub fn keyword_count(&self) -> usize {
        self.disease_keywords.iter().map(|(_, k)| k.len()).sum()
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet::from_toml_str(DEFAULT_RULES_TOML).expect("shipped rule file is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rules_load() {
        let rules = RuleSet::default();
        assert_eq!(rules.disease_keywords.len(), NUM_DISEASES);
        for (i, (d, kws)) in rules.disease_keywords.iter().enumerate() {
            assert_eq!(d.index(), i);
            assert!(!kws.is_empty());
        }
        assert_eq!(rules.keyword_count(), 62);
        let probs: Vec<f64> = rules.uncertainty_ranks.iter().map(|r| r.probability).collect();
        assert_eq!(probs, RANK_PROBABILITIES);
        assert!(rules.rank(5).phrases.is_empty());
        assert_eq!(rules.rank(6).phrases, ["no"]);
    }

    #[test]
    fn severity_groups() {
        let rules = RuleSet::default();
        let lookup = |p: &str| {
            rules
                .severity_map
                .iter()
                .find(|(q, _)| q == p)
                .map(|(_, s)| *s)
        };
        assert_eq!(lookup("mild to moderate"), Some(Severity::Moderate));
        assert_eq!(lookup("moderate to severe"), Some(Severity::Severe));
        assert_eq!(lookup("moderate to large"), Some(Severity::Severe));
        assert_eq!(lookup("trace"), Some(Severity::Mild));
    }

    fn replace(from: &str, to: &str) -> String {
        assert!(DEFAULT_RULES_TOML.contains(from));
        DEFAULT_RULES_TOML.replacen(from, to, 1)
    }

    fn err_line(text: &str) -> usize {
        match RuleSet::from_toml_str(text) {
            Err(Error::ConfigAt { line, .. }) => line,
            other => panic!("expected ConfigAt error, got {other:?}"),
        }
    }

    fn line_containing(text: &str, needle: &str) -> usize {
        text.lines().position(|l| l.contains(needle)).unwrap() + 1
    }

    #[test]
    fn syntax_error_reports_line() {
        // The parser fails on the token after the unclosed array.
        let text = replace("\"Fracture\" = [\"fracture\"]", "\"Fracture\" = [\"fracture\"");
        let open = line_containing(&text, "\"Fracture\"");
        assert!((open..=open + 1).contains(&err_line(&text)));
    }

    #[test]
    fn wrong_probability_reports_line() {
        let text = replace("probability = 0.7", "probability = 0.75");
        assert_eq!(err_line(&text), line_containing(&text, "0.75"));
    }

    #[test]
    fn duplicate_and_uppercase_phrases_rejected() {
        let dup = replace("\"Scoliosis\" = [\"scoliosis\"]", "\"Scoliosis\" = [\"scoliosis\", \"hernia\"]");
        assert_eq!(err_line(&dup), line_containing(&dup, "\"Scoliosis\""));
        let upper = replace("[\"hernia\"]", "[\"Hernia\"]");
        assert!(matches!(
            RuleSet::from_toml_str(&upper),
            Err(Error::ConfigAt { .. })
        ));
    }

    #[test]
    fn rank_five_must_be_empty() {
        let text = replace("probability = 0.1\nphrases = []", "probability = 0.1\nphrases = [\"unclear\"]");
        assert!(matches!(
            RuleSet::from_toml_str(&text),
            Err(Error::ConfigAt { .. })
        ));
    }

    #[test]
    fn missing_disease_rejected() {
        let text = replace("\"Scoliosis\" = [\"scoliosis\"]\n", "");
        match RuleSet::from_toml_str(&text) {
            Err(Error::InvalidRules(msg)) => assert!(msg.contains("Scoliosis")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
