//! Step I: segment-of-interest extraction.
//!
//! Seven segment types are found by code pattern matching over the parsed
//! tree; pop-ups go through the extractor backend, because no fixed pattern
//! covers the ways an overlay can be built. Pattern extractors are pure
//! functions and individually invocable; `extract_all` is their union plus
//! the backend call.

use crate::backend::{Backend, BackendError};
use crate::html::{Dom, DomNode, Element, NodeLocator};
use crate::prompts::{self, TemplateError};
use crate::reply::strip_code_fence;
use crate::segment::{Provenance, Segment, SegmentType};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// `tag.class-token` selector used by the comment/issue/email registries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagClassSelector {
    pub tag: String,
    pub class_token: String,
}

impl TagClassSelector {
    pub fn new(tag: &str, class_token: &str) -> Self {
        TagClassSelector {
            tag: tag.to_string(),
            class_token: class_token.to_string(),
        }
    }

    fn matches(&self, el: &Element) -> bool {
        el.tag == self.tag && el.has_class_token(&self.class_token)
    }
}

impl std::fmt::Display for TagClassSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.tag, self.class_token)
    }
}

/// Site-structure vocabulary for the pattern extractors. Defaults cover the
/// supported sites; config can extend or replace any list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRegistry {
    #[serde(default = "default_comment_selectors")]
    pub comment_selectors: Vec<TagClassSelector>,
    #[serde(default = "default_issue_selectors")]
    pub issue_selectors: Vec<TagClassSelector>,
    #[serde(default = "default_email_header")]
    pub email_header_selector: TagClassSelector,
    #[serde(default = "default_email_body")]
    pub email_body_selector: TagClassSelector,
    #[serde(default = "default_message_container_id")]
    pub message_container_id: String,
    /// Attributes treated as unique identifiers for duplicate detection.
    #[serde(default = "default_identifier_attributes")]
    pub identifier_attributes: Vec<String>,
    /// Call tokens that mark a script as pixel-manipulating.
    #[serde(default = "default_pixel_tokens")]
    pub pixel_tokens: Vec<String>,
}

fn default_comment_selectors() -> Vec<TagClassSelector> {
    vec![
        TagClassSelector::new("div", "comment__body"),
        TagClassSelector::new("div", "note-body"),
    ]
}

fn default_issue_selectors() -> Vec<TagClassSelector> {
    vec![TagClassSelector::new("div", "description")]
}

fn default_email_header() -> TagClassSelector {
    TagClassSelector::new("div", "email-header")
}

fn default_email_body() -> TagClassSelector {
    TagClassSelector::new("div", "email-body")
}

fn default_message_container_id() -> String {
    "chat-history".to_string()
}

fn default_identifier_attributes() -> Vec<String> {
    ["id", "name", "data-testid", "testid"]
        .into_iter()
        .map(String::from)
        .collect()
}

fn default_pixel_tokens() -> Vec<String> {
    vec!["putImageData".to_string()]
}

impl Default for PatternRegistry {
    fn default() -> Self {
        PatternRegistry {
            comment_selectors: default_comment_selectors(),
            issue_selectors: default_issue_selectors(),
            email_header_selector: default_email_header(),
            email_body_selector: default_email_body(),
            message_container_id: default_message_container_id(),
            identifier_attributes: default_identifier_attributes(),
            pixel_tokens: default_pixel_tokens(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("{segment_type} extraction backend call failed: {source}")]
    Backend {
        segment_type: SegmentType,
        #[source]
        source: BackendError,
    },
    #[error("{segment_type} extractor reply rejected: {message}")]
    Schema {
        segment_type: SegmentType,
        message: String,
    },
    #[error("{segment_type} extraction failed: {source}")]
    Template {
        segment_type: SegmentType,
        #[source]
        source: TemplateError,
    },
}

/// Everything Step I produced for one page: the segments, plus any
/// backend-dependent extractor that failed. Pattern extraction never fails,
/// so a failure here only ever means missing pop-up coverage.
#[derive(Debug)]
pub struct Extraction {
    pub segments: Vec<Segment>,
    pub failures: Vec<ExtractError>,
}

/// Union of all per-type extractions, ordered by locator, deduplicated so
/// each node yields at most one segment per type.
pub fn extract_all(dom: &Dom, registry: &PatternRegistry, extractor: Option<ExtractorCall<'_>>) -> Extraction {
    let mut segments = Vec::new();
    segments.extend(extract_forms(dom));
    segments.extend(extract_comments(dom, registry));
    segments.extend(extract_issues(dom, registry));
    segments.extend(extract_pixel_modifications(dom, registry));
    segments.extend(extract_emails(dom, registry));
    segments.extend(extract_messages(dom, registry));
    segments.extend(extract_duplicate_elements(dom, registry));

    let mut failures = Vec::new();
    if let Some(call) = extractor {
        match extract_popups(dom, call.backend, call.template) {
            Ok(popups) => segments.extend(popups),
            Err(err) => failures.push(err),
        }
    }

    let mut seen: HashSet<(SegmentType, Option<NodeLocator>)> = HashSet::new();
    segments.retain(|s| seen.insert((s.segment_type, s.locator.clone())));
    segments.sort_by(|a, b| {
        let key = |s: &Segment| {
            (
                s.locator.is_none(),
                s.locator.clone(),
                s.segment_type,
                s.partner.clone(),
            )
        };
        key(a).cmp(&key(b))
    });
    Extraction { segments, failures }
}

/// Extractor backend plus the prompt template to drive it with.
#[derive(Clone, Copy)]
pub struct ExtractorCall<'a> {
    pub backend: &'a dyn Backend,
    pub template: &'a str,
}

fn pattern_segment(
    dom: &Dom,
    segment_type: SegmentType,
    locator: NodeLocator,
    evidence: Vec<String>,
) -> Segment {
    let snippet = dom
        .resolve(&locator)
        .map(|node| node.to_html())
        .unwrap_or_default();
    Segment {
        segment_type,
        locator: Some(locator),
        partner: None,
        snippet,
        provenance: Provenance::PatternMatched,
        confidence: 1.0,
        evidence,
    }
}

/// One segment per `form` element, nested forms included, document order.
pub fn extract_forms(dom: &Dom) -> Vec<Segment> {
    dom.walk()
        .filter_map(|(loc, node)| match node {
            DomNode::Element(el) if el.tag == "form" => Some(pattern_segment(
                dom,
                SegmentType::Form,
                loc,
                vec!["matched pattern: form element".to_string()],
            )),
            _ => None,
        })
        .collect()
}

fn extract_by_selectors(
    dom: &Dom,
    segment_type: SegmentType,
    selectors: &[TagClassSelector],
) -> Vec<Segment> {
    dom.walk()
        .filter_map(|(loc, node)| {
            let el = node.as_element()?;
            let sel = selectors.iter().find(|sel| sel.matches(el))?;
            Some(pattern_segment(
                dom,
                segment_type,
                loc,
                vec![format!("matched pattern: {sel}")],
            ))
        })
        .collect()
}

/// Comment bodies per the registry (`div.comment__body`, `div.note-body`).
pub fn extract_comments(dom: &Dom, registry: &PatternRegistry) -> Vec<Segment> {
    extract_by_selectors(dom, SegmentType::Comment, &registry.comment_selectors)
}

/// Issue descriptions per the registry (`div.description`).
pub fn extract_issues(dom: &Dom, registry: &PatternRegistry) -> Vec<Segment> {
    extract_by_selectors(dom, SegmentType::Issue, &registry.issue_selectors)
}

/// Scripts whose text mentions a pixel-manipulation call token. Lexical
/// scan only — a token inside a string literal still counts, which
/// over-approximates on purpose rather than parsing JavaScript.
pub fn extract_pixel_modifications(dom: &Dom, registry: &PatternRegistry) -> Vec<Segment> {
    dom.walk()
        .filter_map(|(loc, node)| {
            let el = node.as_element()?;
            if el.tag != "script" {
                return None;
            }
            let text = el.text_content();
            let token = registry.pixel_tokens.iter().find(|t| text.contains(*t))?;
            Some(pattern_segment(
                dom,
                SegmentType::PixelModification,
                loc,
                vec![format!("script text contains token \"{token}\"")],
            ))
        })
        .collect()
}

/// Pairs each `email-header` with the nearest following unclaimed
/// `email-body`; unpaired halves become standalone segments with an
/// evidence note saying which half is missing.
pub fn extract_emails(dom: &Dom, registry: &PatternRegistry) -> Vec<Segment> {
    let mut headers: Vec<(usize, NodeLocator)> = Vec::new();
    let mut bodies: Vec<(usize, NodeLocator, bool)> = Vec::new();
    for (order, (loc, node)) in dom.walk().enumerate() {
        if let DomNode::Element(el) = node {
            if registry.email_header_selector.matches(el) {
                headers.push((order, loc));
            } else if registry.email_body_selector.matches(el) {
                bodies.push((order, loc, false));
            }
        }
    }
    let mut segments = Vec::new();
    for (header_order, header_loc) in &headers {
        let partner = bodies
            .iter_mut()
            .find(|(body_order, _, claimed)| *body_order > *header_order && !*claimed);
        match partner {
            Some((_, body_loc, claimed)) => {
                *claimed = true;
                let mut segment = pattern_segment(
                    dom,
                    SegmentType::Email,
                    header_loc.clone(),
                    vec![format!(
                        "email-header paired with email-body at {body_loc}"
                    )],
                );
                segment.partner = Some(body_loc.clone());
                segments.push(segment);
            }
            None => segments.push(pattern_segment(
                dom,
                SegmentType::Email,
                header_loc.clone(),
                vec!["unpaired email-header (no following email-body)".to_string()],
            )),
        }
    }
    for (_, body_loc, claimed) in bodies {
        if !claimed {
            segments.push(pattern_segment(
                dom,
                SegmentType::Email,
                body_loc,
                vec!["unpaired email-body (no preceding email-header)".to_string()],
            ));
        }
    }
    segments
}

/// One segment per direct element child of the `#chat-history` container
/// (first such container in document order).
pub fn extract_messages(dom: &Dom, registry: &PatternRegistry) -> Vec<Segment> {
    let container = dom.find_element(|el| el.attr("id") == Some(registry.message_container_id.as_str()));
    let Some((container_loc, container)) = container else {
        return Vec::new();
    };
    container
        .children
        .iter()
        .enumerate()
        .filter_map(|(i, child)| {
            child.as_element()?;
            Some(pattern_segment(
                dom,
                SegmentType::Message,
                container_loc.child(i),
                vec![format!(
                    "direct child of #{}",
                    registry.message_container_id
                )],
            ))
        })
        .collect()
}

/// Groups elements by each identifier `(attribute, value)` pair; every
/// occurrence beyond the first in a group becomes one segment pointing at
/// the duplicate, with the first occurrence as `partner`. A node claimed as
/// a duplicate under one attribute is not reported again under another.
pub fn extract_duplicate_elements(dom: &Dom, registry: &PatternRegistry) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut claimed: HashSet<NodeLocator> = HashSet::new();
    for attr in &registry.identifier_attributes {
        // Document-order list of (value, locator) for this attribute.
        let mut groups: Vec<(String, Vec<NodeLocator>)> = Vec::new();
        for (loc, node) in dom.walk() {
            let Some(el) = node.as_element() else { continue };
            let Some(value) = el.attr(attr) else { continue };
            if value.is_empty() {
                continue;
            }
            match groups.iter_mut().find(|(v, _)| v == value) {
                Some((_, locs)) => locs.push(loc),
                None => groups.push((value.to_string(), vec![loc])),
            }
        }
        for (value, locs) in groups {
            if locs.len() < 2 {
                continue;
            }
            let original = &locs[0];
            for duplicate in &locs[1..] {
                if !claimed.insert(duplicate.clone()) {
                    continue;
                }
                let mut segment = pattern_segment(
                    dom,
                    SegmentType::DuplicateElement,
                    duplicate.clone(),
                    vec![format!(
                        "identifier {attr}=\"{value}\" duplicated; original at {original}"
                    )],
                );
                segment.partner = Some(original.clone());
                segments.push(segment);
            }
        }
    }
    segments
}

/// Reply schema of the extractor backend, field names fixed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractorReply {
    pub has_popup: bool,
    #[serde(default)]
    pub popups: Vec<PopupEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopupEntry {
    #[serde(rename = "type")]
    pub popup_type: String,
    pub confidence: f64,
    #[serde(default)]
    pub reason: String,
    #[serde(default)]
    pub evidence: PopupEvidence,
    pub html_snippet: String,
    #[serde(default)]
    pub blocking: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PopupEvidence {
    #[serde(default)]
    pub selectors: Vec<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub style_signals: Vec<String>,
}

/// Asks the extractor backend for pop-ups and maps each reported entry back
/// onto the tree by normalized-substring snippet matching.
pub fn extract_popups(
    dom: &Dom,
    backend: &dyn Backend,
    template: &str,
) -> Result<Vec<Segment>, ExtractError> {
    let schema_err = |message: String| ExtractError::Schema {
        segment_type: SegmentType::PopUp,
        message,
    };
    let page_markup = dom.to_html();
    let system = prompts::render_extractor_prompt(template, &page_markup).map_err(|source| {
        ExtractError::Template {
            segment_type: SegmentType::PopUp,
            source,
        }
    })?;
    let raw = backend
        .complete(&system, prompts::EXTRACTOR_USER_TURN)
        .map_err(|source| ExtractError::Backend {
            segment_type: SegmentType::PopUp,
            source,
        })?;
    let body = strip_code_fence(&raw);
    let reply: ExtractorReply = serde_json::from_str(body)
        .map_err(|e| schema_err(format!("reply is not valid extractor JSON: {e}")))?;
    if !reply.has_popup {
        return Ok(Vec::new());
    }
    if reply.popups.is_empty() {
        return Err(schema_err(
            "has_popup is true but popups[] is empty".to_string(),
        ));
    }
    let mut segments = Vec::new();
    for (i, entry) in reply.popups.iter().enumerate() {
        if !(0.0..=1.0).contains(&entry.confidence) {
            return Err(schema_err(format!(
                "popups[{i}].confidence {} outside [0, 1]",
                entry.confidence
            )));
        }
        let located = locate_snippet(dom, &entry.html_snippet);
        let (locator, snippet) = match located {
            Some(loc) => {
                let snippet = dom.resolve(&loc).map(|n| n.to_html()).unwrap_or_default();
                (Some(loc), snippet)
            }
            None => (None, entry.html_snippet.clone()),
        };
        let mut evidence = vec![format!("extractor type: {}", entry.popup_type)];
        if !entry.reason.is_empty() {
            evidence.push(format!("reason: {}", entry.reason));
        }
        for (label, items) in [
            ("selectors", &entry.evidence.selectors),
            ("keywords", &entry.evidence.keywords),
            ("attributes", &entry.evidence.attributes),
            ("style signals", &entry.evidence.style_signals),
        ] {
            if !items.is_empty() {
                evidence.push(format!("{label}: {}", items.join(", ")));
            }
        }
        if entry.blocking {
            evidence.push("blocking: true".to_string());
        }
        segments.push(Segment {
            segment_type: SegmentType::PopUp,
            locator,
            partner: None,
            snippet,
            provenance: Provenance::LlmExtracted,
            confidence: entry.confidence,
            evidence,
        });
    }
    Ok(segments)
}

/// Whitespace-insensitive snippet anchoring: the element whose serialized
/// form equals the snippet after whitespace normalization, or failing that
/// the smallest element containing it.
fn locate_snippet(dom: &Dom, snippet: &str) -> Option<NodeLocator> {
    let needle = normalize_ws(snippet);
    if needle.is_empty() {
        return None;
    }
    let mut containing: Option<(usize, NodeLocator)> = None;
    for (loc, node) in dom.walk() {
        if node.as_element().is_none() {
            continue;
        }
        let hay = normalize_ws(&node.to_html());
        if hay == needle {
            return Some(loc);
        }
        if hay.contains(&needle) {
            let size = hay.len();
            let better = match &containing {
                Some((best, _)) => size < *best,
                None => true,
            };
            if better {
                containing = Some((size, loc));
            }
        }
    }
    containing.map(|(_, loc)| loc)
}

pub(crate) fn normalize_ws(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending = false;
    for ch in s.chars() {
        if ch.is_whitespace() {
            pending = true;
        } else {
            if pending && !out.is_empty() {
                out.push(' ');
            }
            pending = false;
            out.push(ch);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::Dom;

    fn registry() -> PatternRegistry {
        PatternRegistry::default()
    }

    fn locators(segments: &[Segment]) -> Vec<String> {
        segments
            .iter()
            .map(|s| s.locator.as_ref().map(|l| l.to_string()).unwrap_or_default())
            .collect()
    }

    #[test]
    fn forms_are_found_in_document_order() {
        let dom = Dom::parse(
            "<div><form id=\"a\"></form></div><form id=\"b\"><input name=\"q\"></form>",
        );
        let segments = extract_forms(&dom);
        assert_eq!(segments.len(), 2);
        assert_eq!(locators(&segments), vec!["/0/0", "/1"]);
        assert_eq!(segments[0].snippet, "<form id=\"a\"></form>");
        assert!(segments.iter().all(|s| s.confidence == 1.0));
    }

    #[test]
    fn comment_matching_is_class_token_based() {
        let dom = Dom::parse(
            "<div class=\"comment__body break-text text-flow\">hit</div>\
             <div class=\"note-body\">hit</div>\
             <div class=\"comments-header\">miss</div>\
             <span class=\"comment__body\">wrong tag</span>",
        );
        let segments = extract_comments(&dom, &registry());
        assert_eq!(segments.len(), 2);
        assert_eq!(locators(&segments), vec!["/0", "/1"]);
    }

    #[test]
    fn issues_require_div_tag() {
        let dom = Dom::parse(
            "<div class=\"description\">i</div><span class=\"description\">no</span>",
        );
        let segments = extract_issues(&dom, &registry());
        assert_eq!(segments.len(), 1);
        assert_eq!(segments[0].segment_type, SegmentType::Issue);
    }

    #[test]
    fn pixel_scan_is_lexical() {
        let dom = Dom::parse(
            "<script>ctx.putImageData(buf,0,0);</script>\
             <script>var s = \"putImageData\";</script>\
             <script>plain();</script>",
        );
        let segments = extract_pixel_modifications(&dom, &registry());
        assert_eq!(segments.len(), 2);
    }

    #[test]
    fn emails_pair_header_with_nearest_following_body() {
        let dom = Dom::parse(
            "<div class=\"email-header\">h1</div><div class=\"email-body\">b1</div>\
             <div class=\"email-header\">h2</div><div class=\"email-body\">b2</div>",
        );
        let segments = extract_emails(&dom, &registry());
        assert_eq!(segments.len(), 2);
        assert_eq!(segments[0].locator.as_ref().unwrap().to_string(), "/0");
        assert_eq!(segments[0].partner.as_ref().unwrap().to_string(), "/1");
        assert_eq!(segments[1].locator.as_ref().unwrap().to_string(), "/2");
        assert_eq!(segments[1].partner.as_ref().unwrap().to_string(), "/3");
    }

    #[test]
    fn unpaired_email_halves_are_flagged() {
        let dom = Dom::parse("<div class=\"email-body\">orphan</div>");
        let segments = extract_emails(&dom, &registry());
        assert_eq!(segments.len(), 1);
        assert!(segments[0].evidence[0].contains("unpaired email-body"));

        let dom = Dom::parse("<div class=\"email-header\">orphan</div>");
        let segments = extract_emails(&dom, &registry());
        assert_eq!(segments.len(), 1);
        assert!(segments[0].evidence[0].contains("unpaired email-header"));
    }

    #[test]
    fn messages_are_direct_element_children_only() {
        let dom = Dom::parse(
            "<div id=\"chat-history\">text<div>m1<div>nested</div></div><p>m2</p></div>",
        );
        let segments = extract_messages(&dom, &registry());
        assert_eq!(segments.len(), 2);
        assert_eq!(locators(&segments), vec!["/0/1", "/0/2"]);
    }

    #[test]
    fn no_chat_container_means_no_messages() {
        let dom = Dom::parse("<div id=\"history\"><div>x</div></div>");
        assert!(extract_messages(&dom, &registry()).is_empty());
    }

    #[test]
    fn duplicates_grouped_per_attribute_value() {
        let dom = Dom::parse(
            "<input name=\"ssn\"><input name=\"ssn\"><input name=\"other\">\
             <div id=\"x\"></div><div id=\"x\"></div><div id=\"x\"></div>",
        );
        let segments = extract_duplicate_elements(&dom, &registry());
        // id=x: 2 extras (id scans first); name=ssn: 1 extra.
        assert_eq!(segments.len(), 3);
        assert_eq!(segments[0].locator.as_ref().unwrap().to_string(), "/4");
        assert_eq!(segments[0].partner.as_ref().unwrap().to_string(), "/3");
        assert_eq!(segments[1].locator.as_ref().unwrap().to_string(), "/5");
        assert_eq!(segments[1].partner.as_ref().unwrap().to_string(), "/3");
        assert!(segments[0].evidence[0].contains("id=\"x\""));
        assert_eq!(segments[2].locator.as_ref().unwrap().to_string(), "/1");
        assert_eq!(segments[2].partner.as_ref().unwrap().to_string(), "/0");
        assert!(segments[2].evidence[0].contains("name=\"ssn\""));
    }

    #[test]
    fn duplicate_node_claimed_once_across_attributes() {
        // Both id and name duplicated on the same pair: one segment only.
        let dom = Dom::parse("<input id=\"a\" name=\"b\"><input id=\"a\" name=\"b\">");
        let segments = extract_duplicate_elements(&dom, &registry());
        assert_eq!(segments.len(), 1);
        assert!(segments[0].evidence[0].contains("id=\"a\""));
    }

    #[test]
    fn unique_identifiers_yield_nothing() {
        let dom = Dom::parse("<input id=\"a\"><input id=\"b\"><input name=\"c\">");
        assert!(extract_duplicate_elements(&dom, &registry()).is_empty());
    }

    #[test]
    fn extract_all_merges_sorts_and_dedups() {
        let dom = Dom::parse(
            "<form id=\"f\"></form><div class=\"description\">i</div>\
             <div class=\"comment__body\">c</div>",
        );
        let out = extract_all(&dom, &registry(), None);
        assert!(out.failures.is_empty());
        let kinds: Vec<SegmentType> = out.segments.iter().map(|s| s.segment_type).collect();
        assert_eq!(
            kinds,
            vec![SegmentType::Form, SegmentType::Issue, SegmentType::Comment]
        );
        assert_eq!(locators(&out.segments), vec!["/0", "/1", "/2"]);
    }

    #[test]
    fn snippet_location_prefers_exact_then_smallest_container() {
        let dom = Dom::parse("<div><section><p>target text</p></section></div>");
        let exact = locate_snippet(&dom, "<p>target   text</p>").unwrap();
        assert_eq!(exact.to_string(), "/0/0/0");
        let contained = locate_snippet(&dom, "target text").unwrap();
        assert_eq!(contained.to_string(), "/0/0/0");
        assert!(locate_snippet(&dom, "<h1>absent</h1>").is_none());
    }
}
