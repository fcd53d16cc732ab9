//! Rule-based extraction of soft, severity-tagged disease labels.

use serde::{Deserialize, Serialize};

use crate::disease::{Disease, Severity, NUM_DISEASES};
use crate::error::Result;
use crate::report::{parse_report, RadiologyReport, Section, Sentence};
use crate::rules::{rank_probability, RuleSet, NEGATED_RANK, NOT_MENTIONED_RANK};

/// Extra negation cue applied on top of the rank-6 phrases.
const EXTRA_NEGATION_TOKENS: &[&str] = &["without"];

/// Largest number of unrelated tokens allowed between two consecutive words
/// of a hedging phrase ("cannot be excluded" against "not exclude").
const MAX_PHRASE_GAP: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseMention {
    pub disease: Disease,
    pub section: Section,
    pub sentence_index: usize,
    pub matched_keyword: String,
    pub severity: Option<Severity>,
    pub uncertainty_rank: u8,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub disease: Disease,
    pub probability: f64,
    pub severity: Option<Severity>,
}

/// One entry per disease, in disease enum order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabelVector {
    pub study_id: String,
    pub labels: Vec<LabelEntry>,
}

impl SoftLabelVector {
    /// Every disease at the "not mentioned" probability.
    pub fn unmentioned(study_id: &str) -> Self {
        SoftLabelVector {
            study_id: study_id.to_string(),
            labels: Disease::ALL
                .iter()
                .map(|&disease| LabelEntry {
                    disease,
                    probability: rank_probability(NOT_MENTIONED_RANK),
                    severity: None,
                })
                .collect(),
        }
    }

    pub fn probabilities(&self) -> [f64; NUM_DISEASES] {
        let mut out = [0.0; NUM_DISEASES];
        for e in &self.labels {
            out[e.disease.index()] = e.probability;
        }
        out
    }

    pub fn get(&self, disease: Disease) -> &LabelEntry {
        &self.labels[disease.index()]
    }

    /// True when no label carries a hedged probability (0.7, 0.5 or 0.3).
    pub fn is_certain_only(&self) -> bool {
        self.labels
            .iter()
            .all(|e| e.probability == 1.0 || e.probability == 0.1 || e.probability == 0.0)
    }
}

// ---------------------------------------------------------------------------
// Tokenizing helpers

#[derive(Debug, Clone)]
struct Token {
    text: String,
    start: usize,
    end: usize,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'\''
}

fn raw_tokens(text: &str) -> Vec<Token> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !is_word_byte(bytes[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && is_word_byte(bytes[i]) {
            i += 1;
        }
        out.push(Token {
            text: text[start..i].replace('\'', ""),
            start,
            end: i,
        });
    }
    out
}

/// Tokens with "cannot"/"can't" split into "can not" and "maybe" into "may be".
fn expanded_tokens(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for t in raw_tokens(text) {
        let parts: &[&str] = match t.text.as_str() {
            "cannot" | "cant" => &["can", "not"],
            "maybe" => &["may", "be"],
            _ => {
                out.push(t);
                continue;
            }
        };
        for p in parts {
            out.push(Token {
                text: (*p).to_string(),
                start: t.start,
                end: t.end,
            });
        }
    }
    out
}

fn stem(word: &str) -> &str {
    for suffix in ["ing", "ed", "es", "s", "e"] {
        if let Some(s) = word.strip_suffix(suffix) {
            if s.len() >= 3 {
                return s;
            }
        }
    }
    word
}

fn token_matches(sentence_token: &str, phrase_token: &str) -> bool {
    if phrase_token.len() <= 3 {
        return sentence_token == phrase_token;
    }
    sentence_token.starts_with(stem(phrase_token))
}

/// Whether `phrase` occurs in `tokens` as an ordered word sequence with at
/// most `MAX_PHRASE_GAP` filler words between consecutive phrase words.
fn phrase_occurs(tokens: &[Token], phrase: &[Token]) -> bool {
    fn from(tokens: &[Token], phrase: &[Token], pos: usize, first: bool) -> bool {
        let Some((head, rest)) = phrase.split_first() else {
            return true;
        };
        let window_end = if first {
            tokens.len()
        } else {
            (pos + MAX_PHRASE_GAP + 1).min(tokens.len())
        };
        (pos..window_end).any(|i| {
            token_matches(&tokens[i].text, &head.text) && from(tokens, rest, i + 1, false)
        })
    }
    !phrase.is_empty() && from(tokens, phrase, 0, true)
}

fn at_word_start(text: &str, pos: usize) -> bool {
    pos == 0 || !text.as_bytes()[pos - 1].is_ascii_alphanumeric()
}

fn at_word_end(text: &str, pos: usize) -> bool {
    pos == text.len() || !text.as_bytes()[pos].is_ascii_alphanumeric()
}

/// Whether a negation cue (`no` or `without`) precedes the keyword at
/// `keyword_position` inside the same comma-delimited clause.
pub fn negation_scope(sentence: &str, keyword_position: usize) -> bool {
    negated_by(sentence, keyword_position, &["no", "without"])
}

fn negated_by<S: AsRef<str>>(sentence: &str, keyword_position: usize, cues: &[S]) -> bool {
    let pos = keyword_position.min(sentence.len());
    let clause_start = sentence[..pos].rfind(',').map_or(0, |i| i + 1);
    raw_tokens(&sentence[clause_start..pos])
        .iter()
        .any(|t| cues.iter().any(|c| c.as_ref() == t.text))
}

// ---------------------------------------------------------------------------
// Matching

/// Precomputed lookup structures for one rule set.
#[derive(Debug, Clone)]
pub struct Matcher {
    /// (keyword, disease) sorted longest first.
    keywords: Vec<(String, Disease)>,
    /// (phrase, severity) sorted longest first.
    severities: Vec<(String, Severity)>,
    /// (rank, tokenized phrase) for ranks 2..=4.
    hedges: Vec<(u8, Vec<Token>)>,
    negation_cues: Vec<String>,
}

impl Matcher {
    pub fn new(rules: &RuleSet) -> Self {
        let mut keywords: Vec<(String, Disease)> = rules
            .disease_keywords
            .iter()
            .flat_map(|(d, kws)| kws.iter().map(move |k| (k.clone(), *d)))
            .collect();
        keywords.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));

        let mut severities = rules.severity_map.clone();
        severities.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));

        let hedges = rules
            .uncertainty_ranks
            .iter()
            .filter(|r| (2..=4).contains(&r.rank))
            .flat_map(|r| r.phrases.iter().map(move |p| (r.rank, expanded_tokens(p))))
            .collect();

        let mut negation_cues: Vec<String> = rules.rank(NEGATED_RANK).phrases.clone();
        negation_cues.extend(EXTRA_NEGATION_TOKENS.iter().map(|s| s.to_string()));

        Matcher {
            keywords,
            severities,
            hedges,
            negation_cues,
        }
    }

    /// Leftmost-longest keyword hits anchored at word starts, non-overlapping.
    fn keyword_hits<'a>(&'a self, text: &str) -> Vec<(usize, &'a str, Disease)> {
        let mut hits = Vec::new();
        let mut i = 0;
        while i < text.len() {
            if at_word_start(text, i) {
                if let Some((kw, d)) = self
                    .keywords
                    .iter()
                    .find(|(kw, _)| text[i..].starts_with(kw.as_str()))
                {
                    hits.push((i, kw.as_str(), *d));
                    i += kw.len();
                    continue;
                }
            }
            i += 1;
        }
        hits
    }

    fn severity_hits(&self, text: &str) -> Vec<(usize, usize, Severity)> {
        let mut hits = Vec::new();
        let mut i = 0;
        while i < text.len() {
            if at_word_start(text, i) {
                if let Some((p, s)) = self.severities.iter().find(|(p, _)| {
                    text[i..].starts_with(p.as_str()) && at_word_end(text, i + p.len())
                }) {
                    hits.push((i, i + p.len(), *s));
                    i += p.len();
                    continue;
                }
            }
            i += 1;
        }
        hits
    }

    /// Most uncertain hedging rank (2..=4) present in the sentence, if any.
    fn hedge_rank(&self, text: &str) -> Option<u8> {
        let tokens = expanded_tokens(text);
        self.hedges
            .iter()
            .filter(|(_, phrase)| phrase_occurs(&tokens, phrase))
            .map(|(rank, _)| *rank)
            .max()
    }

    fn nearest_severity(
        hits: &[(usize, usize, Severity)],
        kw_start: usize,
        kw_end: usize,
    ) -> Option<Severity> {
        hits.iter()
            .map(|&(s, e, sev)| {
                // Phrases before the keyword win ties.
                let (dist, after) = if e <= kw_start {
                    (kw_start - e, 0)
                } else {
                    (s.saturating_sub(kw_end), 1)
                };
                ((dist, after, s), sev)
            })
            .min_by_key(|(key, _)| *key)
            .map(|(_, sev)| sev)
    }

    pub fn sentence_mentions(&self, sentence: &Sentence) -> Vec<DiseaseMention> {
        let text = sentence.text.as_str();
        let hits = self.keyword_hits(text);
        if hits.is_empty() {
            return Vec::new();
        }
        let hedge = self.hedge_rank(text);
        let severities = self.severity_hits(text);
        let mut out: Vec<DiseaseMention> = Vec::new();
        for (pos, kw, disease) in hits {
            if out.iter().any(|m| m.disease == disease) {
                continue;
            }
            let rank = if negated_by(text, pos, &self.negation_cues) {
                NEGATED_RANK
            } else {
                hedge.unwrap_or(1)
            };
            out.push(DiseaseMention {
                disease,
                section: sentence.section,
                sentence_index: sentence.index,
                matched_keyword: kw.to_string(),
                severity: Self::nearest_severity(&severities, pos, pos + kw.len()),
                uncertainty_rank: rank,
                probability: rank_probability(rank),
            });
        }
        out
    }

    pub fn match_mentions(&self, report: &RadiologyReport) -> Vec<DiseaseMention> {
        report
            .sentences()
            .flat_map(|s| self.sentence_mentions(s))
            .collect()
    }
}

/// Finds every disease mention in a parsed report.
pub fn match_mentions(report: &RadiologyReport, rules: &RuleSet) -> Vec<DiseaseMention> {
    Matcher::new(rules).match_mentions(report)
}

/// Collapses mentions into one label per disease.
///
/// IMPRESSION mentions take precedence over FINDINGS; within the chosen
/// section the most probable mention wins, later sentences breaking ties.
pub fn resolve_labels(study_id: &str, mentions: &[DiseaseMention]) -> SoftLabelVector {
    let mut out = SoftLabelVector::unmentioned(study_id);
    for entry in out.labels.iter_mut() {
        let of_disease = || mentions.iter().filter(|m| m.disease == entry.disease);
        let section = if of_disease().any(|m| m.section == Section::Impression) {
            Section::Impression
        } else {
            Section::Findings
        };
        let winner = of_disease()
            .filter(|m| m.section == section)
            .max_by(|a, b| {
                a.probability
                    .total_cmp(&b.probability)
                    .then(a.sentence_index.cmp(&b.sentence_index))
            });
        if let Some(m) = winner {
            entry.probability = m.probability;
            entry.severity = m.severity;
        }
    }
    out
}

/// Certain positives stay 1.0; everything else becomes 0.0.
pub fn harden_labels(v: &SoftLabelVector) -> SoftLabelVector {
    let mut out = v.clone();
    for e in out.labels.iter_mut() {
        e.probability = if e.probability == 1.0 { 1.0 } else { 0.0 };
    }
    out
}

/// Parses and labels one report.
pub fn label_report(matcher: &Matcher, raw: &str, study_id: &str) -> Result<SoftLabelVector> {
    let report = parse_report(raw, study_id)?;
    Ok(resolve_labels(study_id, &matcher.match_mentions(&report)))
}
