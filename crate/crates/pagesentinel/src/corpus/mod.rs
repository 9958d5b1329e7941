//! Labeled corpus synthesis.
//!
//! Builds small, fully deterministic evaluation corpora: clean base pages
//! from five site-shaped templates, contaminated pages produced by five
//! attack injectors, and a manifest recording per-page ground truth. The
//! ground truth has two origins: `organic` segments the templates authored
//! themselves (forms, comments, emails, ...), and `injected` segments the
//! attack added. A page is labeled contaminated exactly when it carries at
//! least one injected segment.
//!
//! Ground truth is enumerated from template knowledge — direct walks over
//! structures the templates are known to emit — not by running the
//! extraction pipeline, so extraction tests compare two independent
//! answers.

pub mod inject;
pub mod templates;

use crate::extract::normalize_ws;
use crate::html::{Dom, NodeLocator};
use crate::segment::SegmentType;
use inject::{Attack, InjectError, InjectionSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Seed used by the default corpus when none is given.
pub const DEFAULT_SEED: u64 = 17;

/// Clean pages per template category in the default corpus.
pub const PAGES_PER_CATEGORY: usize = 4;

/// Contaminated pages per attack in the default corpus.
pub const PAGES_PER_ATTACK: usize = 4;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageLabel {
    Clean,
    Contaminated,
}

/// Whether a ground-truth segment was authored by the template or inserted
/// by an attack injector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentOrigin {
    Organic,
    Injected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthSegment {
    pub segment_type: SegmentType,
    pub locator_path: NodeLocator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<NodeLocator>,
    pub snippet_hash: String,
    pub origin: SegmentOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// File path relative to the corpus root.
    pub path: String,
    pub label: PageLabel,
    /// Clean-category name for clean pages, attack name for contaminated.
    pub category: String,
    pub ground_truth: Vec<GroundTruthSegment>,
}

impl ManifestEntry {
    pub fn injected(&self) -> impl Iterator<Item = &GroundTruthSegment> {
        self.ground_truth
            .iter()
            .filter(|gt| gt.origin == SegmentOrigin::Injected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<CorpusManifest, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CorpusError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest at {path} is not valid JSON: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown page category \"{name}\"")]
    UnknownCategory { name: String },
    #[error(transparent)]
    Inject(#[from] InjectError),
    #[error("manifest integrity: {page}: {message}")]
    ManifestIntegrity { page: String, message: String },
}

fn io_error(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Lowercase hex SHA-256 of the whitespace-normalized snippet. The hash,
/// not the markup, goes into the manifest so entries stay short and
/// serialization details can't drift the comparison.
pub fn snippet_hash(snippet: &str) -> String {
    let digest = Sha256::digest(normalize_ws(snippet).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn ground_truth(
    dom: &Dom,
    segment_type: SegmentType,
    locator: NodeLocator,
    partner: Option<NodeLocator>,
    origin: SegmentOrigin,
) -> GroundTruthSegment {
    let snippet = dom
        .resolve(&locator)
        .map(|node| node.to_html())
        .unwrap_or_default();
    GroundTruthSegment {
        segment_type,
        locator_path: locator,
        partner,
        snippet_hash: snippet_hash(&snippet),
        origin,
    }
}

/// Enumerates the segments of interest a template page carries on its own,
/// from the structures the templates are documented to emit: `form`
/// elements, `div.comment__body` comments, `div.description` issues,
/// scripts touching `putImageData`, `div.email-item` header/body pairs,
/// children of `#chat-history`, and `aria-modal` dialogs.
fn organic_ground_truth(dom: &Dom) -> Vec<GroundTruthSegment> {
    let mut out = Vec::new();
    let organic = SegmentOrigin::Organic;
    for (loc, node) in dom.walk() {
        let Some(el) = node.as_element() else { continue };
        if el.tag == "form" {
            out.push(ground_truth(dom, SegmentType::Form, loc, None, organic));
        } else if el.tag == "div" && el.has_class_token("comment__body") {
            out.push(ground_truth(dom, SegmentType::Comment, loc, None, organic));
        } else if el.tag == "div" && el.has_class_token("description") {
            out.push(ground_truth(dom, SegmentType::Issue, loc, None, organic));
        } else if el.tag == "script" && el.text_content().contains("putImageData") {
            out.push(ground_truth(
                dom,
                SegmentType::PixelModification,
                loc,
                None,
                organic,
            ));
        } else if el.tag == "div" && el.has_class_token("email-item") {
            if el.children.len() >= 2 {
                out.push(ground_truth(
                    dom,
                    SegmentType::Email,
                    loc.child(0),
                    Some(loc.child(1)),
                    organic,
                ));
            }
        } else if el.attr("id") == Some("chat-history") {
            for (i, child) in el.children.iter().enumerate() {
                if child.as_element().is_some() {
                    out.push(ground_truth(
                        dom,
                        SegmentType::Message,
                        loc.child(i),
                        None,
                        organic,
                    ));
                }
            }
        } else if el.attr("aria-modal") == Some("true") {
            out.push(ground_truth(dom, SegmentType::PopUp, loc, None, organic));
        }
    }
    out
}

/// One rendered clean page.
#[derive(Debug, Clone)]
pub struct BasePage {
    pub category: String,
    pub markup: String,
}

/// Renders `count` clean pages, cycling through the template categories,
/// all drawn from one seeded stream: same (count, seed) → same bytes.
pub fn generate_base_pages(count: usize, seed: u64) -> Vec<BasePage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let category = templates::CATEGORIES[i % templates::CATEGORIES.len()];
            let markup =
                templates::render_category(category, &mut rng).expect("built-in category");
            BasePage {
                category: category.to_string(),
                markup,
            }
        })
        .collect()
}

/// Renders one page of a named category, failing on unknown names.
pub fn render_page(category: &str, rng: &mut ChaCha8Rng) -> Result<String, CorpusError> {
    templates::render_category(category, rng).ok_or_else(|| CorpusError::UnknownCategory {
        name: category.to_string(),
    })
}

/// Base-page category each attack grafts onto. Pop-up alternates between
/// the two content-shaped categories; the rest need a specific structure.
pub fn attack_base_category(attack: Attack, index: usize) -> &'static str {
    match attack {
        Attack::Eia => "form-heavy",
        Attack::PopUp => {
            if index % 2 == 0 {
                "popup-bearing"
            } else {
                "content"
            }
        }
        Attack::Wasp => "threads",
        Attack::WebInject => "content",
        Attack::Vpi => "inbox",
    }
}

/// Builds the default 40-page corpus under `dir`: `clean/` with
/// [`PAGES_PER_CATEGORY`] pages per template, `attacks/` with
/// [`PAGES_PER_ATTACK`] pages per attack (payload_seed = page index), and
/// a validated `manifest.json`.
pub fn build_default_corpus(dir: &Path, seed: u64) -> Result<CorpusManifest, CorpusError> {
    let clean_dir = dir.join("clean");
    let attacks_dir = dir.join("attacks");
    fs::create_dir_all(&clean_dir).map_err(|e| io_error(&clean_dir, e))?;
    fs::create_dir_all(&attacks_dir).map_err(|e| io_error(&attacks_dir, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();

    for category in templates::CATEGORIES {
        for i in 0..PAGES_PER_CATEGORY {
            let markup = render_page(category, &mut rng)?;
            let dom = Dom::parse(&markup);
            let rel = format!("clean/{category}-{i}.html");
            let file = dir.join(&rel);
            fs::write(&file, &markup).map_err(|e| io_error(&file, e))?;
            entries.push(ManifestEntry {
                path: rel,
                label: PageLabel::Clean,
                category: category.to_string(),
                ground_truth: organic_ground_truth(&dom),
            });
        }
    }

    for attack in Attack::ALL {
        for i in 0..PAGES_PER_ATTACK {
            let category = attack_base_category(attack, i);
            let markup = render_page(category, &mut rng)?;
            let base = Dom::parse(&markup);
            let spec = InjectionSpec {
                attack,
                target: None,
                payload_seed: i as u64,
            };
            let (contaminated, injected) = inject::inject(&base, &spec)?;
            // Organic locators stay valid: injectors only append children,
            // never reorder or remove existing nodes.
            let mut ground_truth = organic_ground_truth(&base);
            ground_truth.extend(injected.into_iter().map(|seg| GroundTruthSegment {
                segment_type: seg.segment_type,
                locator_path: seg.locator,
                partner: seg.partner,
                snippet_hash: snippet_hash(&seg.snippet),
                origin: SegmentOrigin::Injected,
            }));
            let rel = format!("attacks/{attack}-{i}.html");
            let file = dir.join(&rel);
            fs::write(&file, contaminated.to_html()).map_err(|e| io_error(&file, e))?;
            entries.push(ManifestEntry {
                path: rel,
                label: PageLabel::Contaminated,
                category: attack.as_str().to_string(),
                ground_truth,
            });
        }
    }

    let manifest = CorpusManifest { entries };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Validates every entry against the files on disk and writes
/// `manifest.json` with stable field order. Fails without writing if any
/// page is missing, any locator does not resolve, any snippet hash
/// disagrees with the page, or a label contradicts the recorded origins.
pub fn write_manifest(dir: &Path, manifest: &CorpusManifest) -> Result<PathBuf, CorpusError> {
    validate_manifest(dir, manifest)?;
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

pub fn validate_manifest(dir: &Path, manifest: &CorpusManifest) -> Result<(), CorpusError> {
    for entry in &manifest.entries {
        let integrity = |message: String| CorpusError::ManifestIntegrity {
            page: entry.path.clone(),
            message,
        };
        let file = dir.join(&entry.path);
        let markup = fs::read_to_string(&file).map_err(|e| io_error(&file, e))?;
        let dom = Dom::parse(&markup);
        let mut any_injected = false;
        for gt in &entry.ground_truth {
            let node = dom.resolve(&gt.locator_path).ok_or_else(|| {
                integrity(format!(
                    "ground-truth locator {} does not resolve",
                    gt.locator_path
                ))
            })?;
            if snippet_hash(&node.to_html()) != gt.snippet_hash {
                return Err(integrity(format!(
                    "snippet hash mismatch at {}",
                    gt.locator_path
                )));
            }
            if let Some(partner) = &gt.partner {
                if dom.resolve(partner).is_none() {
                    return Err(integrity(format!(
                        "ground-truth partner {partner} does not resolve"
                    )));
                }
            }
            any_injected |= gt.origin == SegmentOrigin::Injected;
        }
        let expected = if any_injected {
            PageLabel::Contaminated
        } else {
            PageLabel::Clean
        };
        if entry.label != expected {
            return Err(integrity(format!(
                "label {:?} contradicts ground-truth origins",
                entry.label
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::COERCIVE_LEXICON;
    use crate::extract::{self, PatternRegistry};
    use std::collections::BTreeSet;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn base_pages_are_deterministic() {
        let first = generate_base_pages(10, 7);
        let second = generate_base_pages(10, 7);
        assert_eq!(first.len(), 10);
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.category, b.category);
            assert_eq!(a.markup, b.markup);
        }
        let other = generate_base_pages(10, 8);
        assert!(first.iter().zip(&other).any(|(a, b)| a.markup != b.markup));
    }

    #[test]
    fn clean_pages_never_use_the_coercive_lexicon() {
        let mut rng = rng(41);
        for category in templates::CATEGORIES {
            for _ in 0..3 {
                let markup = render_page(category, &mut rng).unwrap();
                for phrase in COERCIVE_LEXICON {
                    assert!(
                        !markup.contains(phrase),
                        "{category} page contains lexicon phrase {phrase:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn organic_ground_truth_matches_template_intent() {
        let mut rng = rng(5);
        let count = |gts: &[GroundTruthSegment], ty: SegmentType| {
            gts.iter().filter(|gt| gt.segment_type == ty).count()
        };

        let dom = Dom::parse(&render_page("form-heavy", &mut rng).unwrap());
        let gts = organic_ground_truth(&dom);
        assert_eq!(count(&gts, SegmentType::Form), 3);

        let dom = Dom::parse(&render_page("threads", &mut rng).unwrap());
        let gts = organic_ground_truth(&dom);
        assert_eq!(count(&gts, SegmentType::Comment), 7);
        assert_eq!(count(&gts, SegmentType::Issue), 1);

        let dom = Dom::parse(&render_page("inbox", &mut rng).unwrap());
        let gts = organic_ground_truth(&dom);
        assert_eq!(count(&gts, SegmentType::Email), 5);
        assert_eq!(count(&gts, SegmentType::Message), 6);
        assert_eq!(count(&gts, SegmentType::Form), 1);

        let dom = Dom::parse(&render_page("popup-bearing", &mut rng).unwrap());
        let gts = organic_ground_truth(&dom);
        assert_eq!(count(&gts, SegmentType::PopUp), 1);
        assert_eq!(count(&gts, SegmentType::Form), 0);

        let dom = Dom::parse(&render_page("content", &mut rng).unwrap());
        let gts = organic_ground_truth(&dom);
        assert!(gts.is_empty(), "content pages carry no segments: {gts:?}");
    }

    #[test]
    fn eia_records_one_form_and_one_duplicate() {
        let mut rng = rng(9);
        let base = Dom::parse(&render_page("form-heavy", &mut rng).unwrap());
        let spec = InjectionSpec {
            attack: Attack::Eia,
            target: None,
            payload_seed: 0,
        };
        let (dom, injected) = inject::inject(&base, &spec).unwrap();
        assert_eq!(injected.len(), 2);
        assert_eq!(injected[0].segment_type, SegmentType::Form);
        assert_eq!(injected[1].segment_type, SegmentType::DuplicateElement);
        assert_eq!(injected[0].locator, injected[1].locator);
        let original = injected[1].partner.as_ref().unwrap();
        let original_id = dom
            .resolve(original)
            .and_then(|n| n.as_element())
            .and_then(|el| el.attr("id"))
            .unwrap();
        assert_eq!(original_id, "checkout-form");
        let mirror = dom
            .resolve(&injected[0].locator)
            .and_then(|n| n.as_element())
            .unwrap();
        assert_eq!(mirror.attr("id"), Some("checkout-form"));
        assert!(injected[0].snippet.contains("official place to enter"));
    }

    #[test]
    fn webinject_yields_one_pixel_segment_on_every_category() {
        let mut rng = rng(13);
        for category in templates::CATEGORIES {
            let base = Dom::parse(&render_page(category, &mut rng).unwrap());
            let spec = InjectionSpec {
                attack: Attack::WebInject,
                target: None,
                payload_seed: 2,
            };
            let (_, injected) = inject::inject(&base, &spec).unwrap();
            assert_eq!(injected.len(), 1, "{category}");
            assert_eq!(injected[0].segment_type, SegmentType::PixelModification);
            assert!(injected[0].snippet.contains("putImageData"));
        }
    }

    #[test]
    fn wasp_alternates_comment_and_issue_by_seed_parity() {
        let mut rng = rng(21);
        let base = Dom::parse(&render_page("threads", &mut rng).unwrap());
        for seed in 0..4u64 {
            let spec = InjectionSpec {
                attack: Attack::Wasp,
                target: None,
                payload_seed: seed,
            };
            let (_, injected) = inject::inject(&base, &spec).unwrap();
            assert_eq!(injected.len(), 1);
            let expected = if seed % 2 == 0 {
                SegmentType::Comment
            } else {
                SegmentType::Issue
            };
            assert_eq!(injected[0].segment_type, expected, "seed {seed}");
        }
    }

    #[test]
    fn vpi_cycles_popup_email_message() {
        let mut rng = rng(23);
        let base = Dom::parse(&render_page("inbox", &mut rng).unwrap());
        let kinds: Vec<SegmentType> = (0..3u64)
            .map(|seed| {
                let spec = InjectionSpec {
                    attack: Attack::Vpi,
                    target: None,
                    payload_seed: seed,
                };
                inject::inject(&base, &spec).unwrap().1[0].segment_type
            })
            .collect();
        assert_eq!(
            kinds,
            vec![SegmentType::PopUp, SegmentType::Email, SegmentType::Message]
        );
    }

    #[test]
    fn injection_is_deterministic_and_label_sound() {
        for attack in Attack::ALL {
            let mut rng = rng(31);
            let base = Dom::parse(&render_page(attack_base_category(attack, 0), &mut rng).unwrap());
            let spec = InjectionSpec {
                attack,
                target: None,
                payload_seed: 0,
            };
            let (first, injected) = inject::inject(&base, &spec).unwrap();
            let (second, _) = inject::inject(&base, &spec).unwrap();
            assert_eq!(first.to_html(), second.to_html(), "{attack}");
            assert!(!injected.is_empty(), "{attack} must flip the label");
        }
    }

    #[test]
    fn incompatible_pages_are_rejected() {
        let mut rng = rng(37);
        let content = Dom::parse(&render_page("content", &mut rng).unwrap());
        let popup_page = Dom::parse(&render_page("popup-bearing", &mut rng).unwrap());
        for (attack, base, seed) in [
            (Attack::Wasp, &content, 0),
            (Attack::Vpi, &content, 1),
            (Attack::Eia, &popup_page, 0),
        ] {
            let spec = InjectionSpec {
                attack,
                target: None,
                payload_seed: seed,
            };
            match inject::inject(base, &spec) {
                Err(InjectError::IncompatibleTarget { attack: got, .. }) => {
                    assert_eq!(got, attack)
                }
                other => panic!("{attack} on wrong page: {other:?}"),
            }
        }
    }

    #[test]
    fn default_corpus_is_deterministic_with_expected_layout() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let manifest_a = build_default_corpus(dir_a.path(), DEFAULT_SEED).unwrap();
        let manifest_b = build_default_corpus(dir_b.path(), DEFAULT_SEED).unwrap();
        assert_eq!(manifest_a, manifest_b);
        let bytes_a = fs::read(dir_a.path().join(MANIFEST_FILE)).unwrap();
        let bytes_b = fs::read(dir_b.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(bytes_a, bytes_b);

        assert_eq!(manifest_a.entries.len(), 40);
        let clean = manifest_a
            .entries
            .iter()
            .filter(|e| e.label == PageLabel::Clean)
            .count();
        assert_eq!(clean, 20);
        for attack in Attack::ALL {
            let pages = manifest_a
                .entries
                .iter()
                .filter(|e| e.category == attack.as_str())
                .count();
            assert_eq!(pages, PAGES_PER_ATTACK, "{attack}");
        }
        for entry in &manifest_a.entries {
            let file = dir_a.path().join(&entry.path);
            let identical = fs::read(&file).unwrap()
                == fs::read(dir_b.path().join(&entry.path)).unwrap();
            assert!(identical, "{} differs between builds", entry.path);
        }
        let reloaded = CorpusManifest::load(&dir_a.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(reloaded, manifest_a);
    }

    /// Pattern extraction and the manifest agree exactly on every page
    /// (pop-ups excluded: they are not pattern-extracted).
    #[test]
    fn ground_truth_closure_over_default_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = build_default_corpus(dir.path(), DEFAULT_SEED).unwrap();
        let registry = PatternRegistry::default();
        for entry in &manifest.entries {
            let markup = fs::read_to_string(dir.path().join(&entry.path)).unwrap();
            let dom = Dom::parse(&markup);
            let extracted: BTreeSet<(SegmentType, String)> =
                extract::extract_all(&dom, &registry, None)
                    .segments
                    .into_iter()
                    .map(|s| (s.segment_type, s.locator.unwrap().to_string()))
                    .collect();
            let expected: BTreeSet<(SegmentType, String)> = entry
                .ground_truth
                .iter()
                .filter(|gt| gt.segment_type != SegmentType::PopUp)
                .map(|gt| (gt.segment_type, gt.locator_path.to_string()))
                .collect();
            assert_eq!(extracted, expected, "{}", entry.path);
        }
    }

    #[test]
    fn empty_manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = CorpusManifest::default();
        let path = write_manifest(dir.path(), &manifest).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"entries\": []"));
        assert_eq!(CorpusManifest::load(&path).unwrap(), manifest);
    }

    #[test]
    fn manifest_rejects_stale_locators_and_wrong_labels() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("page.html");
        fs::write(&file, "<body><form id=\"f\"></form></body>").unwrap();
        let dom = Dom::parse("<body><form id=\"f\"></form></body>");
        let good = organic_ground_truth(&dom);
        assert_eq!(good.len(), 1);

        let stale = CorpusManifest {
            entries: vec![ManifestEntry {
                path: "page.html".into(),
                label: PageLabel::Clean,
                category: "form-heavy".into(),
                ground_truth: vec![GroundTruthSegment {
                    locator_path: NodeLocator(vec![9, 9]),
                    ..good[0].clone()
                }],
            }],
        };
        match write_manifest(dir.path(), &stale) {
            Err(CorpusError::ManifestIntegrity { message, .. }) => {
                assert!(message.contains("does not resolve"), "{message}")
            }
            other => panic!("stale locator accepted: {other:?}"),
        }

        let mislabeled = CorpusManifest {
            entries: vec![ManifestEntry {
                path: "page.html".into(),
                label: PageLabel::Contaminated,
                category: "form-heavy".into(),
                ground_truth: good,
            }],
        };
        match write_manifest(dir.path(), &mislabeled) {
            Err(CorpusError::ManifestIntegrity { message, .. }) => {
                assert!(message.contains("label"), "{message}")
            }
            other => panic!("wrong label accepted: {other:?}"),
        }
        assert!(!dir.path().join(MANIFEST_FILE).exists());
    }
}
