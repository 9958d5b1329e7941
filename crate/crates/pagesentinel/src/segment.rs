//! Segments of interest: the unit of extraction, analysis, and reporting.

use crate::html::NodeLocator;
use serde::{Deserialize, Serialize};
use std::fmt;

/// The eight categories a segment of interest can belong to.
///
/// The wire strings (serde names) are stable identifiers used in reports,
/// manifests, and prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentType {
    #[serde(rename = "duplicate-element")]
    DuplicateElement,
    #[serde(rename = "form")]
    Form,
    #[serde(rename = "pop-up")]
    PopUp,
    #[serde(rename = "comment")]
    Comment,
    #[serde(rename = "issue")]
    Issue,
    #[serde(rename = "pixel-modification")]
    PixelModification,
    #[serde(rename = "email")]
    Email,
    #[serde(rename = "message")]
    Message,
}

impl SegmentType {
    pub const ALL: [SegmentType; 8] = [
        SegmentType::DuplicateElement,
        SegmentType::Form,
        SegmentType::PopUp,
        SegmentType::Comment,
        SegmentType::Issue,
        SegmentType::PixelModification,
        SegmentType::Email,
        SegmentType::Message,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SegmentType::DuplicateElement => "duplicate-element",
            SegmentType::Form => "form",
            SegmentType::PopUp => "pop-up",
            SegmentType::Comment => "comment",
            SegmentType::Issue => "issue",
            SegmentType::PixelModification => "pixel-modification",
            SegmentType::Email => "email",
            SegmentType::Message => "message",
        }
    }

    /// The label used in the analyzer prompt's type slot. The prompt spells
    /// multi-word types with spaces ("duplicate element"), unlike the
    /// hyphenated wire strings.
    pub fn prompt_label(&self) -> &'static str {
        match self {
            SegmentType::DuplicateElement => "duplicate element",
            SegmentType::PixelModification => "pixel modification",
            other => other.as_str(),
        }
    }

    /// Parses a segment-type label leniently: models write these strings
    /// with inconsistent hyphenation, spacing, and case.
    pub fn parse_lenient(label: &str) -> Option<SegmentType> {
        let folded: String = label
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match folded.as_str() {
            "duplicateelement" | "duplicatedelement" => Some(SegmentType::DuplicateElement),
            "form" => Some(SegmentType::Form),
            "popup" => Some(SegmentType::PopUp),
            "comment" => Some(SegmentType::Comment),
            "issue" => Some(SegmentType::Issue),
            "pixelmodification" => Some(SegmentType::PixelModification),
            "email" => Some(SegmentType::Email),
            "message" => Some(SegmentType::Message),
            _ => None,
        }
    }
}

impl fmt::Display for SegmentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a segment entered the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "pattern-matched")]
    PatternMatched,
    #[serde(rename = "llm-extracted")]
    LlmExtracted,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::PatternMatched => "pattern-matched",
            Provenance::LlmExtracted => "llm-extracted",
        })
    }
}

/// A segment of interest located in a specific page.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub segment_type: SegmentType,
    /// Node the segment anchors to, when it maps onto the parsed tree.
    /// Extractor-model pop-ups that cannot be matched back to a node carry
    /// no locator.
    pub locator: Option<NodeLocator>,
    /// Second node for pair-shaped segments: the other occurrence of a
    /// duplicated identifier, or the body paired with an email header.
    pub partner: Option<NodeLocator>,
    /// Serialized markup of the segment node itself.
    pub snippet: String,
    pub provenance: Provenance,
    /// Pattern matches are certain (1.0); extractor-model pop-ups carry the
    /// model's self-reported confidence in [0, 1].
    pub confidence: f64,
    /// Human-readable notes on why this segment was selected.
    pub evidence: Vec<String>,
}

impl Segment {
    /// External JSON form, used in reports and verdict files.
    pub fn to_record(&self) -> SegmentRecord {
        SegmentRecord {
            segment_type: self.segment_type,
            locator_path: self.locator.clone(),
            snippet: self.snippet.clone(),
            provenance: self.provenance,
            confidence: self.confidence,
            evidence: self.evidence.clone(),
        }
    }
}

/// Serialized form of a [`Segment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_type: SegmentType,
    pub locator_path: Option<NodeLocator>,
    pub snippet: String,
    pub provenance: Provenance,
    pub confidence: f64,
    pub evidence: Vec<String>,
}
