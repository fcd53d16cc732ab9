//! Section segmentation and sentence splitting for radiology reports.
//!
//! Only the FINDINGS and IMPRESSION sections are kept. Any other all-caps
//! header that starts a line (INDICATION:, COMPARISON:, ...) opens a
//! section whose text is dropped.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Findings,
    Impression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub section: Section,
    /// Normalized text: lowercase ASCII, single spaces.
    pub text: String,
    /// Position within its section, contiguous from 0.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiologyReport {
    pub study_id: String,
    pub findings: Vec<Sentence>,
    pub impression: Vec<Sentence>,
    pub raw_text: String,
}

impl RadiologyReport {
    /// All sentences, findings first.
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.findings.iter().chain(self.impression.iter())
    }
}

/// Lowercases, maps non-ASCII characters to spaces and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let mapped: String = text
        .chars()
        .map(|c| if c.is_ascii() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HeaderKind {
    Known(Section),
    Other,
}

#[derive(Debug, Clone, Copy)]
struct Header {
    start: usize,
    end: usize,
    kind: HeaderKind,
}

fn inline_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(findings|impression)\s*:").unwrap())
}

fn bare_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^[ \t]*(findings|impression)[ \t]*$").unwrap())
}

fn other_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^[ \t]*([A-Z][A-Z /&-]{1,40}?)[ \t]*:").unwrap())
}

fn section_of(name: &str) -> Option<Section> {
    match name.to_ascii_lowercase().as_str() {
        "findings" => Some(Section::Findings),
        "impression" => Some(Section::Impression),
        _ => None,
    }
}

fn find_headers(raw: &str) -> Vec<Header> {
    let mut headers = Vec::new();
    for re in [inline_header_re(), bare_header_re()] {
        for caps in re.captures_iter(raw) {
            let whole = caps.get(0).unwrap();
            let section = section_of(&caps[1]).expect("regex only matches known names");
            headers.push(Header {
                start: caps.get(1).unwrap().start(),
                end: whole.end(),
                kind: HeaderKind::Known(section),
            });
        }
    }
    for caps in other_header_re().captures_iter(raw) {
        let name = caps.get(1).unwrap();
        if section_of(name.as_str().trim()).is_some() {
            continue;
        }
        headers.push(Header {
            start: name.start(),
            end: caps.get(0).unwrap().end(),
            kind: HeaderKind::Other,
        });
    }
    headers.sort_by_key(|h| (h.start, h.end));
    // Drop headers nested inside an earlier one.
    let mut kept: Vec<Header> = Vec::with_capacity(headers.len());
    for h in headers {
        if kept.last().is_some_and(|prev| h.start < prev.end) {
            continue;
        }
        kept.push(h);
    }
    kept
}

/// Splits a section's text into normalized sentences.
///
/// Breaks after `.`, `!`, `?` or `;` when followed by whitespace or the end
/// of the text, except after a one-letter token ending in `.` (initials).
/// Fragments without any alphanumeric character are dropped.
pub fn split_sentences(section_text: &str) -> Vec<String> {
    let text = normalize(section_text);
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..bytes.len() {
        let c = bytes[i];
        if !matches!(c, b'.' | b'!' | b'?' | b';') {
            continue;
        }
        let at_break = i + 1 == bytes.len() || bytes[i + 1] == b' ';
        if !at_break {
            continue;
        }
        if c == b'.' && i >= 1 && bytes[i - 1].is_ascii_alphabetic() {
            let single_letter = i == 1 || !bytes[i - 2].is_ascii_alphanumeric();
            if single_letter {
                continue;
            }
        }
        push_fragment(&mut out, &text[start..=i]);
        start = i + 1;
    }
    if start < text.len() {
        push_fragment(&mut out, &text[start..]);
    }
    out
}

fn push_fragment(out: &mut Vec<String>, fragment: &str) {
    let trimmed = fragment.trim();
    if trimmed.bytes().any(|b| b.is_ascii_alphanumeric()) {
        out.push(trimmed.to_string());
    }
}

fn to_sentences(section: Section, text: &str, sink: &mut Vec<Sentence>) {
    for s in split_sentences(text) {
        let index = sink.len();
        sink.push(Sentence {
            section,
            text: s,
            index,
        });
    }
}

/// Segments a raw report into FINDINGS and IMPRESSION sentences.
///
/// Text preceding the first header is discarded. A report with neither a
/// FINDINGS nor an IMPRESSION header is read entirely as FINDINGS.
pub fn parse_report(raw: &str, study_id: &str) -> Result<RadiologyReport> {
    if raw.trim().is_empty() {
        return Err(Error::EmptyReport);
    }
    let headers = find_headers(raw);
    let mut findings = Vec::new();
    let mut impression = Vec::new();

    let has_known = headers
        .iter()
        .any(|h| matches!(h.kind, HeaderKind::Known(_)));
    if !has_known {
        to_sentences(Section::Findings, raw, &mut findings);
    } else {
        for (i, h) in headers.iter().enumerate() {
            let body_end = headers.get(i + 1).map_or(raw.len(), |next| next.start);
            let body = &raw[h.end..body_end];
            match h.kind {
                HeaderKind::Known(Section::Findings) => {
                    to_sentences(Section::Findings, body, &mut findings)
                }
                HeaderKind::Known(Section::Impression) => {
                    to_sentences(Section::Impression, body, &mut impression)
                }
                HeaderKind::Other => {}
            }
        }
    }

    Ok(RadiologyReport {
        study_id: study_id.to_string(),
        findings,
        impression,
        raw_text: raw.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(v: &[Sentence]) -> Vec<&str> {
        v.iter().map(|s| s.text.as_str()).collect()
    }

    #[test]
    fn two_sections() {
        let r = parse_report("FINDINGS: Small effusion. IMPRESSION: Mild cardiomegaly.", "s1")
            .unwrap();
        assert_eq!(texts(&r.findings), ["small effusion."]);
        assert_eq!(texts(&r.impression), ["mild cardiomegaly."]);
        assert_eq!(r.impression[0].section, Section::Impression);
    }

    #[test]
    fn impression_only() {
        let r = parse_report("IMPRESSION: No pneumothorax.", "s").unwrap();
        assert!(r.findings.is_empty());
        assert_eq!(texts(&r.impression), ["no pneumothorax."]);
    }

    #[test]
    fn headerless_text_is_findings() {
        let r = parse_report("Lungs are clear. Heart normal.", "s").unwrap();
        assert_eq!(texts(&r.findings), ["lungs are clear.", "heart normal."]);
        assert!(r.impression.is_empty());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_report(" \n\t", "s"), Err(Error::EmptyReport)));
        assert!(matches!(parse_report("", "s"), Err(Error::EmptyReport)));
    }

    #[test]
    fn preamble_and_other_sections_are_dropped() {
        let raw = "EXAMINATION: CHEST PA\nINDICATION: cough, rule out pneumonia.\n\
                   findings:\nLungs are clear.\nCOMPARISON: None.\nImpression\nNo acute process.";
        let r = parse_report(raw, "s").unwrap();
        assert_eq!(texts(&r.findings), ["lungs are clear."]);
        assert_eq!(texts(&r.impression), ["no acute process."]);
    }

    #[test]
    fn header_casing_does_not_matter() {
        let r = parse_report("impression: a b c. Findings: d e f.", "s").unwrap();
        assert_eq!(texts(&r.impression), ["a b c."]);
        assert_eq!(texts(&r.findings), ["d e f."]);
    }

    #[test]
    fn raw_text_is_preserved() {
        let raw = "FINDINGS:  Café   effusion.\r\n";
        let r = parse_report(raw, "s").unwrap();
        assert_eq!(r.raw_text, raw);
        assert_eq!(texts(&r.findings), ["caf effusion."]);
    }

    #[test]
    fn indices_are_contiguous_per_section() {
        let r = parse_report("FINDINGS: a1. b2. c3. IMPRESSION: d4. e5.", "s").unwrap();
        for (i, s) in r.findings.iter().enumerate() {
            assert_eq!(s.index, i);
        }
        for (i, s) in r.impression.iter().enumerate() {
            assert_eq!(s.index, i);
        }
    }

    #[test]
    fn splitter_basics() {
        assert_eq!(
            split_sentences("Small effusion. Mild cardiomegaly."),
            ["small effusion.", "mild cardiomegaly."]
        );
        assert_eq!(
            split_sentences("no focal consolidation; no pneumothorax"),
            ["no focal consolidation;", "no pneumothorax"]
        );
        assert!(split_sentences("").is_empty());
    }

    #[test]
    fn splitter_guards_initials_and_decimals() {
        assert_eq!(
            split_sentences("Discussed with J. Smith at noon. Nodule 1.5 cm!"),
            ["discussed with j. smith at noon.", "nodule 1.5 cm!"]
        );
        assert_eq!(split_sentences("... . ;"), Vec::<String>::new());
    }
}
