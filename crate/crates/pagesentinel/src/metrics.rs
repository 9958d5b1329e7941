//! Detection and localization metrics.
//!
//! Pages are scored against a corpus manifest: detection as FNR/FPR per
//! category plus overall accuracy, localization as the Jaccard coefficient
//! between the predicted contaminated-segment set and the injected ground
//! truth, and a per-type false-positive rate over segments that are
//! actually clean.
//!
//! Segment identity is `(segment_type, locator)`; segments that could not
//! be anchored to a node fall back to comparison by snippet hash. Rates
//! with an empty denominator are reported as absent and rendered "n/a" —
//! an empty run must not look like a perfect one.

use crate::analyze::PageVerdict;
use crate::corpus::{snippet_hash, CorpusManifest, GroundTruthSegment};
use crate::html::NodeLocator;
use crate::segment::{SegmentRecord, SegmentType};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use thiserror::Error;

/// Comparable form of one localized segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalizedSegment {
    pub segment_type: SegmentType,
    pub locator: Option<NodeLocator>,
    pub snippet_hash: String,
}

impl LocalizedSegment {
    pub fn from_ground_truth(gt: &GroundTruthSegment) -> Self {
        LocalizedSegment {
            segment_type: gt.segment_type,
            locator: Some(gt.locator_path.clone()),
            snippet_hash: gt.snippet_hash.clone(),
        }
    }

    pub fn from_record(record: &SegmentRecord) -> Self {
        LocalizedSegment {
            segment_type: record.segment_type,
            locator: record.locator_path.clone(),
            snippet_hash: snippet_hash(&record.snippet),
        }
    }

    /// Whether two segments denote the same thing: same type and locator,
    /// or — when either side has no locator — same type and snippet hash.
    fn denotes(&self, other: &LocalizedSegment) -> bool {
        if self.segment_type != other.segment_type {
            return false;
        }
        match (&self.locator, &other.locator) {
            (Some(a), Some(b)) => a == b,
            _ => self.snippet_hash == other.snippet_hash,
        }
    }
}

fn dedup(side: &[LocalizedSegment]) -> Vec<&LocalizedSegment> {
    let mut seen = HashSet::new();
    side.iter().filter(|s| seen.insert(*s)).collect()
}

/// Jaccard coefficient |S∩S'| / |S∪S'| over segment sets, with both-empty
/// defined as 1. The intersection is a one-to-one matching: locator-exact
/// pairs are matched first, then hash fallbacks among the remainder, so an
/// anchored prediction can never steal the match of an exact one.
pub fn jaccard(truth: &[LocalizedSegment], predicted: &[LocalizedSegment]) -> f64 {
    let truths = dedup(truth);
    let preds = dedup(predicted);
    if truths.is_empty() && preds.is_empty() {
        return 1.0;
    }
    let mut pred_used = vec![false; preds.len()];
    let mut matched = 0usize;
    let mut unmatched_truths = Vec::new();
    for t in &truths {
        let exact = (t.locator.is_some())
            .then(|| {
                preds.iter().enumerate().position(|(i, p)| {
                    !pred_used[i] && p.segment_type == t.segment_type && p.locator == t.locator
                })
            })
            .flatten();
        match exact {
            Some(i) => {
                pred_used[i] = true;
                matched += 1;
            }
            None => unmatched_truths.push(*t),
        }
    }
    for t in unmatched_truths {
        let fallback = preds
            .iter()
            .enumerate()
            .position(|(i, p)| !pred_used[i] && t.denotes(p) && (t.locator.is_none() || p.locator.is_none()));
        if let Some(i) = fallback {
            pred_used[i] = true;
            matched += 1;
        }
    }
    let union = truths.len() + preds.len() - matched;
    matched as f64 / union as f64
}

/// One scanned page, as written by `scan` and consumed by `eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageReport {
    /// Page path as named in the manifest.
    pub path: String,
    #[serde(flatten)]
    pub verdict: PageVerdict,
}

/// Detection rates for one category. A rate is absent when the category
/// has no page of the relevant label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRates {
    pub pages: usize,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_category: BTreeMap<String, CategoryRates>,
    /// (true positives + true negatives) / pages; absent on an empty run.
    pub acc: Option<f64>,
    /// One localization JC per page, in manifest order.
    pub jc_per_page: Vec<f64>,
    /// Arithmetic mean of `jc_per_page`.
    pub jc_avg: Option<f64>,
    /// Mean JC per category, and the mean of those means: the view that
    /// matches per-category reporting tables.
    pub jc_by_category: BTreeMap<String, f64>,
    pub jc_macro: Option<f64>,
    /// Fraction of actually-clean segments flagged contaminated, per type;
    /// types with no clean segments have no row.
    pub per_segment_type_fpr: BTreeMap<SegmentType, f64>,
    /// Denominators for `per_segment_type_fpr`.
    pub clean_segments_per_type: BTreeMap<SegmentType, usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("no verdict supplied for manifest page {path}")]
    MissingVerdict { path: String },
    #[error("verdict for {path} matches no manifest page")]
    UnknownPage { path: String },
    #[error("more than one verdict supplied for page {path}")]
    DuplicateVerdict { path: String },
    #[error("manifest lists page {path} more than once")]
    DuplicateEntry { path: String },
}

fn ratio(numerator: usize, denominator: usize) -> Option<f64> {
    (denominator > 0).then(|| numerator as f64 / denominator as f64)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Scores one verdict per manifest page (matched by path, any order) into
/// a [`MetricsReport`].
pub fn score(
    manifest: &CorpusManifest,
    reports: &[PageReport],
) -> Result<MetricsReport, ScoreError> {
    let mut by_path: HashMap<&str, &PageVerdict> = HashMap::new();
    for report in reports {
        if by_path.insert(report.path.as_str(), &report.verdict).is_some() {
            return Err(ScoreError::DuplicateVerdict {
                path: report.path.clone(),
            });
        }
    }
    let manifest_paths: HashSet<&str> =
        manifest.entries.iter().map(|e| e.path.as_str()).collect();
    if manifest_paths.len() != manifest.entries.len() {
        let mut seen = HashSet::new();
        for entry in &manifest.entries {
            if !seen.insert(entry.path.as_str()) {
                return Err(ScoreError::DuplicateEntry {
                    path: entry.path.clone(),
                });
            }
        }
    }
    if let Some(path) = by_path.keys().find(|p| !manifest_paths.contains(*p)) {
        return Err(ScoreError::UnknownPage {
            path: path.to_string(),
        });
    }

    struct CategoryTally {
        pages: usize,
        contaminated: usize,
        missed: usize,
        clean: usize,
        flagged: usize,
        jc: Vec<f64>,
    }
    let mut categories: BTreeMap<String, CategoryTally> = BTreeMap::new();
    let mut correct = 0usize;
    let mut jc_per_page = Vec::with_capacity(manifest.entries.len());
    let mut type_clean: BTreeMap<SegmentType, usize> = BTreeMap::new();
    let mut type_flagged: BTreeMap<SegmentType, usize> = BTreeMap::new();

    for entry in &manifest.entries {
        let verdict = by_path
            .get(entry.path.as_str())
            .ok_or_else(|| ScoreError::MissingVerdict {
                path: entry.path.clone(),
            })?;
        let truth: Vec<LocalizedSegment> = entry
            .injected()
            .map(LocalizedSegment::from_ground_truth)
            .collect();
        let actually_contaminated = !truth.is_empty();

        let tally = categories
            .entry(entry.category.clone())
            .or_insert_with(|| CategoryTally {
                pages: 0,
                contaminated: 0,
                missed: 0,
                clean: 0,
                flagged: 0,
                jc: Vec::new(),
            });
        tally.pages += 1;
        if actually_contaminated {
            tally.contaminated += 1;
            if !verdict.malicious {
                tally.missed += 1;
            }
        } else {
            tally.clean += 1;
            if verdict.malicious {
                tally.flagged += 1;
            }
        }
        if verdict.malicious == actually_contaminated {
            correct += 1;
        }

        let predicted: Vec<LocalizedSegment> = verdict
            .contaminated_segments()
            .into_iter()
            .map(LocalizedSegment::from_record)
            .collect();
        let jc = jaccard(&truth, &predicted);
        jc_per_page.push(jc);
        tally.jc.push(jc);

        // Segment-level FPR: over analyzed segments that are not injected.
        for sv in &verdict.verdicts {
            let segment = LocalizedSegment::from_record(&sv.segment);
            if truth.iter().any(|gt| gt.denotes(&segment)) {
                continue;
            }
            *type_clean.entry(segment.segment_type).or_insert(0) += 1;
            if sv.contaminated {
                *type_flagged.entry(segment.segment_type).or_insert(0) += 1;
            }
        }
    }

    let per_category: BTreeMap<String, CategoryRates> = categories
        .iter()
        .map(|(name, t)| {
            (
                name.clone(),
                CategoryRates {
                    pages: t.pages,
                    fnr: ratio(t.missed, t.contaminated),
                    fpr: ratio(t.flagged, t.clean),
                },
            )
        })
        .collect();
    let jc_by_category: BTreeMap<String, f64> = categories
        .iter()
        .filter_map(|(name, t)| mean(&t.jc).map(|m| (name.clone(), m)))
        .collect();
    let macro_values: Vec<f64> = jc_by_category.values().copied().collect();
    let per_segment_type_fpr: BTreeMap<SegmentType, f64> = type_clean
        .iter()
        .map(|(ty, total)| {
            let flagged = type_flagged.get(ty).copied().unwrap_or(0);
            (*ty, flagged as f64 / *total as f64)
        })
        .collect();

    Ok(MetricsReport {
        per_category,
        acc: ratio(correct, manifest.entries.len()),
        jc_avg: mean(&jc_per_page),
        jc_per_page,
        jc_by_category,
        jc_macro: mean(&macro_values),
        per_segment_type_fpr,
        clean_segments_per_type: type_clean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?} (expected text or json)")),
        }
    }
}

fn fmt_rate(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{r:.3}"),
        None => "n/a".to_string(),
    }
}

/// Renders a report. Text is the human table view; JSON is the canonical
/// machine output with stable key order. Both carry the same numbers.
pub fn emit_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut out =
                serde_json::to_string_pretty(report).expect("metrics report serializes");
            out.push('\n');
            out
        }
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "Detection");
            let _ = writeln!(out, "  {:<16} {:>6} {:>8} {:>8}", "category", "pages", "FNR", "FPR");
            for (name, rates) in &report.per_category {
                let _ = writeln!(
                    out,
                    "  {:<16} {:>6} {:>8} {:>8}",
                    name,
                    rates.pages,
                    fmt_rate(rates.fnr),
                    fmt_rate(rates.fpr),
                );
            }
            let pages: usize = report.per_category.values().map(|r| r.pages).sum();
            let _ = writeln!(
                out,
                "  overall accuracy: {} over {} pages",
                fmt_rate(report.acc),
                pages
            );
            let _ = writeln!(out);
            let _ = writeln!(out, "Localization");
            let _ = writeln!(out, "  {:<16} {:>8}", "category", "JC");
            for (name, jc) in &report.jc_by_category {
                let _ = writeln!(out, "  {:<16} {:>8}", name, fmt_rate(Some(*jc)));
            }
            let _ = writeln!(
                out,
                "  average JC: {} per page, {} per category",
                fmt_rate(report.jc_avg),
                fmt_rate(report.jc_macro)
            );
            let _ = writeln!(out);
            let _ = writeln!(out, "Segment-level FPR (clean segments)");
            if report.per_segment_type_fpr.is_empty() {
                let _ = writeln!(out, "  none analyzed");
            }
            for (ty, fpr) in &report.per_segment_type_fpr {
                let clean = report
                    .clean_segments_per_type
                    .get(ty)
                    .copied()
                    .unwrap_or(0);
                let _ = writeln!(
                    out,
                    "  {:<20} {:>8} over {} segments",
                    ty.as_str(),
                    fmt_rate(Some(*fpr)),
                    clean
                );
            }
            out
        }
    }
}
