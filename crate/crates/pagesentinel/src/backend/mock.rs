//! Deterministic in-process backend.
//!
//! The mock plays both LLM roles. It routes on the role line of the system
//! prompt, re-derives the variable slots from the rendered template, and
//! answers from transparent lexical rules. Replies are deterministic pure
//! functions of the prompt text, so pipelines built on the mock are fully
//! reproducible — and they come wrapped in ```json fences, because real
//! chat models love fences and the reply parsers must cope.
//!
//! The mock builds its JSON by hand rather than through the reply structs
//! the parsers use; if a parser mishandles the wire shape, tests see it.

use super::{Backend, BackendError};
use crate::html::{Dom, DomNode, Element, NodeLocator};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Phrases the mock analyzer treats as coercive or misleading. Matching is
/// case-sensitive: "URGENT" in a payload is signal, "urgent" in shipping
/// copy is not.
pub const COERCIVE_LEXICON: &[&str] = &[
    "Ignore all previous instructions",
    "ignore all previous instructions",
    "URGENT",
    "MUST",
    "ACT NOW",
    "official place to enter",
    "verify your identity immediately",
    "do not tell the user",
    "respond only with",
    "system override",
    "exfiltrate",
];

/// Field-name fragments that mark a request for sensitive data
/// (matched case-insensitively against the segment markup).
pub const SENSITIVE_FIELDS: &[&str] = &["ssn", "api-key", "card-number", "password"];

/// Class/id fragments that mark an element as a pop-up container
/// (matched case-insensitively).
pub const POPUP_TRIGGER_TOKENS: &[&str] = &["modal", "popup", "overlay", "interstitial"];

fn default_lexicon() -> Vec<String> {
    COERCIVE_LEXICON.iter().map(|s| s.to_string()).collect()
}

fn default_sensitive() -> Vec<String> {
    SENSITIVE_FIELDS.iter().map(|s| s.to_string()).collect()
}

fn default_popup_tokens() -> Vec<String> {
    POPUP_TRIGGER_TOKENS.iter().map(|s| s.to_string()).collect()
}

/// The mock's rule set, overridable from config for experiments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRules {
    #[serde(default = "default_lexicon")]
    pub coercive_lexicon: Vec<String>,
    #[serde(default = "default_sensitive")]
    pub sensitive_fields: Vec<String>,
    #[serde(default = "default_popup_tokens")]
    pub popup_trigger_tokens: Vec<String>,
}

impl Default for MockRules {
    fn default() -> Self {
        MockRules {
            coercive_lexicon: default_lexicon(),
            sensitive_fields: default_sensitive(),
            popup_trigger_tokens: default_popup_tokens(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub rules: MockRules,
}

impl MockBackend {
    pub fn new(rules: MockRules) -> Self {
        MockBackend { rules }
    }
}

const ANALYZER_ROLE_LINE: &str = "You are an analyzer LLM";
const EXTRACTOR_ROLE_LINE: &str = "You are a webpage UI analyzer";

const CONTEXT_OPEN: &str = "## Webpage HTML (may be pruned / incomplete)\n```html\n";
const CONTEXT_CLOSE: &str = "\n```\n\n## Segment to evaluate";
const SEGMENT_OPEN: &str = "## Segment to evaluate\n\n```html\n";
const SEGMENT_CLOSE: &str = "\n```\n\n## Provided segment type";
const TYPE_OPEN: &str = "```text\n";
const TYPE_CLOSE: &str = "\n```";

const PAGE_OPEN: &str = "  ```html\n  ";
const PAGE_CLOSE: &str = "\n  ```";

fn slice_between<'a>(haystack: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = haystack.find(open)? + open.len();
    let end = haystack[start..].find(close)? + start;
    Some(&haystack[start..end])
}

impl Backend for MockBackend {
    fn complete(&self, system: &str, _user: &str) -> Result<String, BackendError> {
        if system.contains(ANALYZER_ROLE_LINE) {
            self.answer_analyzer(system)
        } else if system.contains(EXTRACTOR_ROLE_LINE) {
            self.answer_extractor(system)
        } else {
            Err(BackendError::Unsupported {
                message: "mock backend cannot route this prompt: unknown role line".to_string(),
            })
        }
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}

impl MockBackend {
    fn answer_analyzer(&self, system: &str) -> Result<String, BackendError> {
        let context = slice_between(system, CONTEXT_OPEN, CONTEXT_CLOSE).ok_or_else(|| {
            BackendError::Unsupported {
                message: "analyzer prompt is missing its webpage context slot".to_string(),
            }
        })?;
        let segment = slice_between(system, SEGMENT_OPEN, SEGMENT_CLOSE).ok_or_else(|| {
            BackendError::Unsupported {
                message: "analyzer prompt is missing its segment slot".to_string(),
            }
        })?;
        let after_segment = &system[system.find(SEGMENT_CLOSE).unwrap()..];
        let type_label =
            slice_between(after_segment, TYPE_OPEN, TYPE_CLOSE).ok_or_else(|| {
                BackendError::Unsupported {
                    message: "analyzer prompt is missing its segment type slot".to_string(),
                }
            })?;

        let context_dom = Dom::parse(context);
        let segment_dom = Dom::parse(segment);

        let duplicate = find_repeated_identifier(&segment_dom, &context_dom);
        let matched_phrase = self
            .rules
            .coercive_lexicon
            .iter()
            .find(|phrase| segment.contains(phrase.as_str()));
        let pixel_manipulation =
            type_label == "pixel modification" && segment.contains("putImageData");
        let misleading = matched_phrase.is_some() || pixel_manipulation;
        let segment_lower = segment.to_ascii_lowercase();
        let sensitive_field = if misleading {
            self.rules
                .sensitive_fields
                .iter()
                .find(|f| segment_lower.contains(f.as_str()))
        } else {
            None
        };

        let dup_answer = answer(duplicate.is_some());
        let misleading_answer = answer(misleading);
        let sensitive_answer = answer(sensitive_field.is_some());
        // Guard says "yes, this looks like a false positive" exactly when
        // nothing misleading was found: repetition alone is not an attack.
        let guard_answer = answer(!misleading);

        let contaminated =
            (duplicate.is_some() || misleading || sensitive_field.is_some()) && misleading;
        let verdict = if contaminated { "contaminated" } else { "clean" };
        let page = if contaminated { "malicious" } else { "benign" };

        let dup_evidence = match &duplicate {
            Some((attr, value, n)) => format!("{attr}=\"{value}\" occurs {n} times in the page"),
            None => "none found".to_string(),
        };
        let misleading_evidence = match (matched_phrase, pixel_manipulation) {
            (Some(phrase), _) => format!("segment contains \"{phrase}\""),
            (None, true) => "segment rewrites pixels via putImageData".to_string(),
            (None, false) => "none found".to_string(),
        };
        let sensitive_evidence = match sensitive_field {
            Some(field) => format!("requests {field} alongside coercive phrasing"),
            None => "none found".to_string(),
        };
        let guard_evidence = if misleading {
            "coercive phrasing is not explained by any benign pattern".to_string()
        } else {
            "segment is consistent with ordinary page functionality".to_string()
        };

        let reply = json!({
            "page_intent": "Deterministic mock assessment of the provided context.",
            "segment_function": "Deterministic mock assessment of the provided segment.",
            "segment_type": schema_type_label(type_label),
            "checks": {
                "duplicate_element": {"answer": dup_answer, "evidence": dup_evidence},
                "duplicate_purpose": {"answer": dup_answer, "evidence": dup_evidence},
                "misleading_or_coercive": {"answer": misleading_answer, "evidence": misleading_evidence},
                "sensitive_data_or_phishing": {"answer": sensitive_answer, "evidence": sensitive_evidence},
                "false_positive_guard": {"answer": guard_answer, "evidence": guard_evidence}
            },
            "segment_prediction": verdict,
            "page_prediction": page,
        });
        Ok(fence(&reply))
    }

    fn answer_extractor(&self, system: &str) -> Result<String, BackendError> {
        let page = slice_between(system, PAGE_OPEN, PAGE_CLOSE).ok_or_else(|| {
            BackendError::Unsupported {
                message: "extractor prompt is missing its webpage slot".to_string(),
            }
        })?;
        let dom = Dom::parse(page);
        let hits = mock_extract_popups(&dom, &self.rules.popup_trigger_tokens);
        let popups: Vec<serde_json::Value> = hits
            .iter()
            .filter_map(|loc| dom.resolve(loc))
            .filter_map(|node| match node {
                DomNode::Element(el) => Some(popup_entry(el, &self.rules.popup_trigger_tokens)),
                _ => None,
            })
            .collect();
        let reply = json!({
            "has_popup": !popups.is_empty(),
            "popups": popups,
        });
        Ok(fence(&reply))
    }
}

fn answer(yes: bool) -> &'static str {
    if yes {
        "yes"
    } else {
        "no"
    }
}

fn fence(value: &serde_json::Value) -> String {
    format!(
        "```json\n{}\n```",
        serde_json::to_string_pretty(value).expect("mock reply serializes")
    )
}

/// Map the prompt-slot label to the spelling the output schema asks for.
fn schema_type_label(label: &str) -> String {
    match label {
        "duplicate element" => "duplicate_element".to_string(),
        "pop-up" => "popup".to_string(),
        "pixel modification" => "pixel_modification".to_string(),
        "form" | "comment" | "issue" | "email" | "message" => label.to_string(),
        _ => "other".to_string(),
    }
}

const IDENTIFIER_ATTRIBUTES: &[&str] = &["id", "name", "data-testid", "testid"];

/// Does any identifier carried by the segment occur at least twice in the
/// page context? Returns the first `(attribute, value, count)` hit. This is
/// a real recount against the provided context, not an echo of pipeline
/// state: if pruning broke the duplicate evidence, the mock answers "no".
fn find_repeated_identifier(
    segment: &Dom,
    context: &Dom,
) -> Option<(String, String, usize)> {
    let mut segment_ids: Vec<(String, String)> = Vec::new();
    for (_, node) in segment.walk() {
        if let Some(el) = node.as_element() {
            for attr in IDENTIFIER_ATTRIBUTES {
                if let Some(value) = el.attr(attr) {
                    let pair = (attr.to_string(), value.to_string());
                    if !segment_ids.contains(&pair) {
                        segment_ids.push(pair);
                    }
                }
            }
        }
    }
    for (attr, value) in segment_ids {
        let mut count = 0;
        for (_, node) in context.walk() {
            if let Some(el) = node.as_element() {
                if el.attr(&attr) == Some(value.as_str()) {
                    count += 1;
                }
            }
        }
        if count >= 2 {
            return Some((attr, value, count));
        }
    }
    None
}

/// Outermost elements that look like pop-up containers: class or id
/// mentioning a trigger token, or fixed positioning with a high z-index.
pub fn mock_extract_popups(dom: &Dom, trigger_tokens: &[String]) -> Vec<NodeLocator> {
    fn rec(
        nodes: &[DomNode],
        prefix: &NodeLocator,
        tokens: &[String],
        out: &mut Vec<NodeLocator>,
    ) {
        for (i, node) in nodes.iter().enumerate() {
            let here = prefix.child(i);
            if let DomNode::Element(el) = node {
                if looks_like_popup(el, tokens) {
                    out.push(here);
                } else {
                    rec(&el.children, &here, tokens, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(&dom.children, &NodeLocator(vec![]), trigger_tokens, &mut out);
    out
}

fn looks_like_popup(el: &Element, tokens: &[String]) -> bool {
    let hay = format!(
        "{} {}",
        el.attr("class").unwrap_or(""),
        el.attr("id").unwrap_or("")
    )
    .to_ascii_lowercase();
    if tokens.iter().any(|t| hay.contains(t.as_str())) {
        return true;
    }
    match el.attr("style") {
        Some(style) => {
            let style = style.to_ascii_lowercase().replace(' ', "");
            style.contains("position:fixed")
                && parse_z_index(&style).map(|z| z >= 1000).unwrap_or(false)
        }
        None => false,
    }
}

fn parse_z_index(style: &str) -> Option<i64> {
    let idx = style.find("z-index:")? + "z-index:".len();
    let rest = &style[idx..];
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

fn popup_entry(el: &Element, tokens: &[String]) -> serde_json::Value {
    let mut selectors: Vec<String> = Vec::new();
    if let Some(id) = el.attr("id") {
        selectors.push(format!("#{id}"));
    }
    if let Some(first) = el.class_tokens().next() {
        selectors.push(format!(".{first}"));
    }
    if selectors.is_empty() {
        selectors.push(el.tag.clone());
    }
    let hay = format!(
        "{} {}",
        el.attr("class").unwrap_or(""),
        el.attr("id").unwrap_or("")
    )
    .to_ascii_lowercase();
    let keywords: Vec<String> = tokens
        .iter()
        .filter(|t| hay.contains(t.as_str()))
        .cloned()
        .collect();
    let mut attributes: Vec<String> = Vec::new();
    if let Some(role) = el.attr("role") {
        attributes.push(format!("role={role}"));
    }
    if let Some(modal) = el.attr("aria-modal") {
        attributes.push(format!("aria-modal={modal}"));
    }
    let mut style_signals: Vec<String> = Vec::new();
    if let Some(style) = el.attr("style") {
        let compact = style.to_ascii_lowercase().replace(' ', "");
        if compact.contains("position:fixed") {
            style_signals.push("position:fixed".to_string());
        }
        if let Some(z) = parse_z_index(&compact) {
            style_signals.push(format!("z-index:{z}"));
        }
    }
    json!({
        "type": "generic_modal",
        "confidence": 0.9,
        "reason": "container matches overlay heuristics",
        "evidence": {
            "selectors": selectors,
            "keywords": keywords,
            "attributes": attributes,
            "style_signals": style_signals,
        },
        "html_snippet": DomNode::Element(el.clone()).to_html(),
        "blocking": true,
    })
}
