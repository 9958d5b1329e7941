//! Context reduction: untargeted and targeted pruning.
//!
//! Untargeted pruning strips what no analyzer needs — scripts, styles,
//! comments, repeated boilerplate, attribute noise, runaway text — while
//! keeping every extracted segment intact. Targeted pruning then reduces
//! the page to the context relevant to one specific segment. The result is
//! the `{webpage_html}` slot of the analyzer prompt, typically several
//! times smaller than the original page.
//!
//! Both passes are pure functions over immutable trees. Nodes synthesized
//! by the pruner use the reserved `x-omitted` tag, which later passes never
//! count, dedup, or strip, keeping the whole procedure idempotent.

use crate::extract::{self, PatternRegistry};
use crate::html::{estimate_tokens, Dom, DomNode, Element, NodeLocator};
use crate::segment::{Segment, SegmentType};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Marker element tag for content the pruner removed.
pub const MARKER_TAG: &str = "x-omitted";

/// Attributes that survive untargeted pruning (plus any `aria-*`).
pub const ATTRIBUTE_KEEP_LIST: &[&str] = &[
    "id",
    "name",
    "class",
    "type",
    "role",
    "data-testid",
    "testid",
    "href",
    "action",
    "placeholder",
    "value",
];

/// Identifier attributes are never truncated: shortening them would blind
/// the duplicate-element check.
const UNTRUNCATABLE: &[&str] = &["id", "name", "data-testid", "testid"];

const NOISE_TAGS: &[&str] = &["script", "style", "svg", "noscript"];

const HEADING_TAGS: &[&str] = &["h1", "h2", "h3", "h4", "h5", "h6"];

/// Numeric pruning thresholds. The defaults are artifact choices, not
/// tuned constants; they exist to be adjusted per deployment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneThresholds {
    /// Kept attribute values longer than this many characters are truncated.
    #[serde(default = "default_attr_value_cap")]
    pub attr_value_cap: usize,
    /// Text nodes longer than this many characters are truncated.
    #[serde(default = "default_text_cap")]
    pub text_cap: usize,
    /// How many exemplars of a repeated sibling shape survive dedup.
    #[serde(default = "default_dedup_keep")]
    pub dedup_keep: usize,
}

fn default_attr_value_cap() -> usize {
    256
}

fn default_text_cap() -> usize {
    2000
}

fn default_dedup_keep() -> usize {
    2
}

impl Default for PruneThresholds {
    fn default() -> Self {
        PruneThresholds {
            attr_value_cap: default_attr_value_cap(),
            text_cap: default_text_cap(),
            dedup_keep: default_dedup_keep(),
        }
    }
}

/// Output of targeted pruning: the analyzer's webpage context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedContext {
    pub markup: String,
    pub tokens_before: usize,
    pub tokens_after: usize,
    /// Removal-rule name → how many nodes/attributes it affected.
    pub removed_counts: BTreeMap<String, usize>,
    /// Locators of the segment anchors *inside the pruned markup* (the
    /// target, plus its partner for pair-shaped segments). These resolve in
    /// `Dom::parse(&markup)`, not in the original tree.
    pub preserved_locators: Vec<NodeLocator>,
}

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("segment locator {} does not resolve in this tree", display_locator(.locator))]
    StaleLocator { locator: Option<NodeLocator> },
}

fn display_locator(locator: &Option<NodeLocator>) -> String {
    match locator {
        Some(loc) => loc.to_string(),
        None => "(none)".to_string(),
    }
}

/// Working tree: the parsed node data plus where each node came from.
/// `orig` is `None` for pruner-synthesized markers.
struct WorkNode {
    orig: Option<NodeLocator>,
    kind: WorkKind,
}

enum WorkKind {
    Element {
        tag: String,
        attrs: Vec<(String, String)>,
        children: Vec<WorkNode>,
    },
    Text(String),
    Comment(String),
}

impl WorkNode {
    fn from_dom_node(node: &DomNode, path: NodeLocator) -> WorkNode {
        let kind = match node {
            DomNode::Text(t) => WorkKind::Text(t.clone()),
            DomNode::Comment(c) => WorkKind::Comment(c.clone()),
            DomNode::Element(el) => WorkKind::Element {
                tag: el.tag.clone(),
                attrs: el.attrs.clone(),
                children: el
                    .children
                    .iter()
                    .enumerate()
                    .map(|(i, child)| WorkNode::from_dom_node(child, path.child(i)))
                    .collect(),
            },
        };
        WorkNode {
            orig: Some(path),
            kind,
        }
    }

    fn tag(&self) -> Option<&str> {
        match &self.kind {
            WorkKind::Element { tag, .. } => Some(tag.as_str()),
            _ => None,
        }
    }

    fn to_dom_node(&self) -> DomNode {
        match &self.kind {
            WorkKind::Text(t) => DomNode::Text(t.clone()),
            WorkKind::Comment(c) => DomNode::Comment(c.clone()),
            WorkKind::Element {
                tag,
                attrs,
                children,
            } => DomNode::Element(Element {
                tag: tag.clone(),
                attrs: attrs.clone(),
                children: children.iter().map(WorkNode::to_dom_node).collect(),
            }),
        }
    }

    fn serialized_len(&self) -> usize {
        self.to_dom_node().to_html().chars().count()
    }
}

fn build_work_tree(dom: &Dom) -> Vec<WorkNode> {
    dom.children
        .iter()
        .enumerate()
        .map(|(i, child)| WorkNode::from_dom_node(child, NodeLocator(vec![i])))
        .collect()
}

fn work_tree_to_dom(roots: &[WorkNode]) -> Dom {
    Dom {
        children: roots.iter().map(WorkNode::to_dom_node).collect(),
    }
}

/// Anchor arithmetic over original-tree paths.
struct Anchors(Vec<NodeLocator>);

impl Anchors {
    /// The node itself is an anchor.
    fn is_anchor(&self, node: &WorkNode) -> bool {
        matches!(&node.orig, Some(path) if self.0.contains(path))
    }

    /// The node lies inside some anchor's subtree (anchor included).
    fn within_anchor(&self, node: &WorkNode) -> bool {
        matches!(&node.orig, Some(path) if self.0.iter().any(|a| path.is_within(a)))
    }

    /// Some anchor lies inside this node's subtree (node included).
    fn contains_anchor(&self, node: &WorkNode) -> bool {
        matches!(&node.orig, Some(path) if self.0.iter().any(|a| a.is_within(path)))
    }

    /// Dedup/truncation must not touch this node.
    fn shields(&self, node: &WorkNode) -> bool {
        self.within_anchor(node) || self.contains_anchor(node)
    }
}

fn bump(counts: &mut BTreeMap<String, usize>, rule: &str, by: usize) {
    if by > 0 {
        *counts.entry(rule.to_string()).or_insert(0) += by;
    }
}

/// Rule 1: drop script/style/svg/noscript elements and comment nodes.
/// Anchored nodes survive — a pixel-modification segment *is* a script.
fn strip_noise(nodes: &mut Vec<WorkNode>, anchors: &Anchors, counts: &mut BTreeMap<String, usize>) {
    let mut removed = 0;
    nodes.retain(|node| match &node.kind {
        WorkKind::Comment(_) => {
            removed += 1;
            false
        }
        WorkKind::Element { tag, .. }
            if NOISE_TAGS.contains(&tag.as_str())
                && tag != MARKER_TAG
                && !anchors.is_anchor(node)
                && !anchors.contains_anchor(node) =>
        {
            removed += 1;
            false
        }
        _ => true,
    });
    bump(counts, "strip-noise", removed);
    for node in nodes {
        if let WorkKind::Element { children, .. } = &mut node.kind {
            strip_noise(children, anchors, counts);
        }
    }
}

/// Dedup key: tag plus the set of class tokens.
fn shape_key(node: &WorkNode) -> Option<(String, Vec<String>)> {
    match &node.kind {
        WorkKind::Element { tag, attrs, .. } => {
            if tag == MARKER_TAG {
                return None;
            }
            let mut classes: Vec<String> = attrs
                .iter()
                .find(|(k, _)| k == "class")
                .map(|(_, v)| v.split_ascii_whitespace().map(String::from).collect())
                .unwrap_or_default();
            classes.sort();
            classes.dedup();
            Some((tag.clone(), classes))
        }
        _ => None,
    }
}

/// Rule 2: among siblings with identical tag and class token set, keep the
/// first `dedup_keep` and replace the rest with one `<x-omitted count>`
/// marker per shape. Nodes that are — or contain — segment anchors always
/// survive. The marker is skipped when it would be longer than what it
/// replaces.
fn dedup_siblings(
    nodes: &mut Vec<WorkNode>,
    anchors: &Anchors,
    keep: usize,
    counts: &mut BTreeMap<String, usize>,
) {
    // shape key → (occurrences seen, omitted count, bytes removed, first removal index)
    let mut shapes: Vec<((String, Vec<String>), usize, usize, usize, Option<usize>)> = Vec::new();
    let mut drop_indices: Vec<usize> = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        let Some(key) = shape_key(node) else { continue };
        let entry = match shapes.iter_mut().find(|(k, ..)| *k == key) {
            Some(entry) => entry,
            None => {
                shapes.push((key, 0, 0, 0, None));
                shapes.last_mut().unwrap()
            }
        };
        entry.1 += 1;
        if entry.1 > keep && !anchors.shields(node) {
            drop_indices.push(i);
            entry.2 += 1;
            entry.3 += node.serialized_len();
            if entry.4.is_none() {
                entry.4 = Some(i);
            }
        }
    }
    if !drop_indices.is_empty() {
        let mut rebuilt: Vec<WorkNode> = Vec::with_capacity(nodes.len());
        for (i, node) in nodes.drain(..).enumerate() {
            if let Some(shape) = shapes.iter().find(|(.., first)| *first == Some(i)) {
                let marker = make_marker(shape.2);
                // Only worth inserting when it is smaller than the removal.
                if marker.serialized_len() <= shape.3 {
                    rebuilt.push(marker);
                }
            }
            if drop_indices.contains(&i) {
                bump(counts, "dedup-siblings", 1);
            } else {
                rebuilt.push(node);
            }
        }
        *nodes = rebuilt;
    }
    for node in nodes {
        if let WorkKind::Element { children, .. } = &mut node.kind {
            dedup_siblings(children, anchors, keep, counts);
        }
    }
}

fn make_marker(count: usize) -> WorkNode {
    WorkNode {
        orig: None,
        kind: WorkKind::Element {
            tag: MARKER_TAG.to_string(),
            attrs: vec![("count".to_string(), count.to_string())],
            children: Vec::new(),
        },
    }
}

fn truncate_chars(value: &str, cap: usize) -> String {
    let mut out: String = value.chars().take(cap).collect();
    out.push('\u{2026}');
    out
}

/// Rule 3: prune attributes to the keep-list, truncating overlong values.
fn prune_attributes(
    nodes: &mut Vec<WorkNode>,
    cap: usize,
    counts: &mut BTreeMap<String, usize>,
) {
    for node in nodes {
        if let WorkKind::Element {
            tag,
            attrs,
            children,
        } = &mut node.kind
        {
            if tag != MARKER_TAG {
                let before = attrs.len();
                attrs.retain(|(name, _)| {
                    ATTRIBUTE_KEEP_LIST.contains(&name.as_str()) || name.starts_with("aria-")
                });
                bump(counts, "drop-attributes", before - attrs.len());
                for (name, value) in attrs.iter_mut() {
                    if !UNTRUNCATABLE.contains(&name.as_str()) && value.chars().count() > cap {
                        *value = truncate_chars(value, cap);
                        bump(counts, "truncate-attributes", 1);
                    }
                }
            }
            prune_attributes(children, cap, counts);
        }
    }
}

/// Rule 4: truncate text nodes beyond the cap, except inside segments.
fn truncate_text(
    nodes: &mut Vec<WorkNode>,
    anchors: &Anchors,
    cap: usize,
    counts: &mut BTreeMap<String, usize>,
) {
    for node in nodes {
        let exempt = anchors.within_anchor(node);
        match &mut node.kind {
            WorkKind::Text(text) => {
                if !exempt && text.chars().count() > cap {
                    *text = truncate_chars(text, cap);
                    bump(counts, "truncate-text", 1);
                }
            }
            WorkKind::Element { children, .. } => truncate_text(children, anchors, cap, counts),
            WorkKind::Comment(_) => {}
        }
    }
}

fn untargeted_passes(
    roots: &mut Vec<WorkNode>,
    anchors: &Anchors,
    thresholds: &PruneThresholds,
    counts: &mut BTreeMap<String, usize>,
) {
    strip_noise(roots, anchors, counts);
    dedup_siblings(roots, anchors, thresholds.dedup_keep, counts);
    prune_attributes(roots, thresholds.attr_value_cap, counts);
    truncate_text(roots, anchors, thresholds.text_cap, counts);
}

/// Locators of every pattern-extractable segment node (targets and
/// partners): the exemption set untargeted pruning must not disturb.
/// Backend-extracted pop-ups cannot be re-derived here; callers pass the
/// segment under analysis explicitly where it matters.
fn pattern_anchor_locators(dom: &Dom, registry: &PatternRegistry) -> Vec<NodeLocator> {
    let mut anchors = Vec::new();
    let mut push = |segments: Vec<Segment>| {
        for s in segments {
            anchors.extend(s.locator);
            anchors.extend(s.partner);
        }
    };
    push(extract::extract_forms(dom));
    push(extract::extract_comments(dom, registry));
    push(extract::extract_issues(dom, registry));
    push(extract::extract_pixel_modifications(dom, registry));
    push(extract::extract_emails(dom, registry));
    push(extract::extract_messages(dom, registry));
    push(extract::extract_duplicate_elements(dom, registry));
    anchors.sort();
    anchors.dedup();
    anchors
}

/// Untargeted pruning with the default registry and thresholds.
pub fn prune_untargeted(dom: &Dom) -> Dom {
    prune_untargeted_with_stats(dom, &PatternRegistry::default(), &PruneThresholds::default()).0
}

/// Untargeted pruning; returns the pruned tree and per-rule removal counts.
pub fn prune_untargeted_with_stats(
    dom: &Dom,
    registry: &PatternRegistry,
    thresholds: &PruneThresholds,
) -> (Dom, BTreeMap<String, usize>) {
    let anchors = Anchors(pattern_anchor_locators(dom, registry));
    let mut roots = build_work_tree(dom);
    let mut counts = BTreeMap::new();
    untargeted_passes(&mut roots, &anchors, thresholds, &mut counts);
    (work_tree_to_dom(&roots), counts)
}

/// Targeted pruning: untargeted pass first (segments exempt), then the
/// type-conditional retention policy for `segment`, then serialization.
///
/// Takes the *original* tree — segment locators address it — and returns
/// the analyzer context with the anchors' locations in the pruned markup.
pub fn prune_targeted(
    dom: &Dom,
    segment: &Segment,
    registry: &PatternRegistry,
    thresholds: &PruneThresholds,
) -> Result<PrunedContext, PruneError> {
    let target = segment
        .locator
        .clone()
        .ok_or(PruneError::StaleLocator { locator: None })?;
    if dom.resolve(&target).is_none() {
        return Err(PruneError::StaleLocator {
            locator: Some(target),
        });
    }
    if let Some(partner) = &segment.partner {
        if dom.resolve(partner).is_none() {
            return Err(PruneError::StaleLocator {
                locator: Some(partner.clone()),
            });
        }
    }
    let tokens_before = estimate_tokens(&dom.to_html());

    let mut wanted = vec![target.clone()];
    wanted.extend(segment.partner.clone());

    let mut exempt = pattern_anchor_locators(dom, registry);
    exempt.extend(wanted.iter().cloned());
    exempt.sort();
    exempt.dedup();
    let exempt = Anchors(exempt);
    let preserved_anchors = Anchors(wanted.clone());

    let mut roots = build_work_tree(dom);
    let mut counts = BTreeMap::new();
    untargeted_passes(&mut roots, &exempt, thresholds, &mut counts);

    if segment.segment_type == SegmentType::Comment {
        retain_comment_context(&mut roots, &target, registry, &preserved_anchors, &mut counts);
    } else {
        drop_comment_subtrees(&mut roots, registry, &preserved_anchors, &mut counts);
    }

    let pruned = work_tree_to_dom(&roots);
    let markup = pruned.to_html();
    let tokens_after = estimate_tokens(&markup);
    let preserved_locators = locate_in_work_tree(&roots, &wanted);

    Ok(PrunedContext {
        markup,
        tokens_before,
        tokens_after,
        removed_counts: counts,
        preserved_locators,
    })
}

/// New locators (in the pruned tree) of the nodes whose original locators
/// are listed in `wanted`, in `wanted` order.
fn locate_in_work_tree(roots: &[WorkNode], wanted: &[NodeLocator]) -> Vec<NodeLocator> {
    fn rec(
        nodes: &[WorkNode],
        prefix: &NodeLocator,
        wanted: &[NodeLocator],
        found: &mut Vec<(usize, NodeLocator)>,
    ) {
        for (i, node) in nodes.iter().enumerate() {
            let here = prefix.child(i);
            if let Some(orig) = &node.orig {
                if let Some(w) = wanted.iter().position(|w| w == orig) {
                    found.push((w, here.clone()));
                }
            }
            if let WorkKind::Element { children, .. } = &node.kind {
                rec(children, &here, wanted, found);
            }
        }
    }
    let mut found = Vec::new();
    rec(roots, &NodeLocator(vec![]), wanted, &mut found);
    found.sort();
    found.into_iter().map(|(_, loc)| loc).collect()
}

/// Policy for non-comment segments: comment threads are noise; drop every
/// comment-selector subtree that does not itself shelter an anchor.
fn drop_comment_subtrees(
    nodes: &mut Vec<WorkNode>,
    registry: &PatternRegistry,
    anchors: &Anchors,
    counts: &mut BTreeMap<String, usize>,
) {
    let mut removed = 0;
    nodes.retain(|node| {
        if is_comment_element(node, registry) && !anchors.shields(node) {
            removed += 1;
            false
        } else {
            true
        }
    });
    bump(counts, "drop-comment-threads", removed);
    for node in nodes {
        if let WorkKind::Element { children, .. } = &mut node.kind {
            drop_comment_subtrees(children, registry, anchors, counts);
        }
    }
}

fn is_comment_element(node: &WorkNode, registry: &PatternRegistry) -> bool {
    match &node.kind {
        WorkKind::Element { tag, attrs, .. } => {
            registry.comment_selectors.iter().any(|sel| {
                sel.tag == *tag
                    && attrs
                        .iter()
                        .find(|(k, _)| k == "class")
                        .map(|(_, v)| v.split_ascii_whitespace().any(|t| t == sel.class_token))
                        .unwrap_or(false)
            })
        }
        _ => false,
    }
}

/// Policy for comment segments: keep the main post, the target's ancestor
/// chain (with each ancestor's own comment body, so the reply chain reads
/// top to bottom), the target's siblings, titles and headings; drop every
/// unrelated branch.
fn retain_comment_context(
    roots: &mut Vec<WorkNode>,
    target: &NodeLocator,
    registry: &PatternRegistry,
    anchors: &Anchors,
    counts: &mut BTreeMap<String, usize>,
) {
    let target_parent = target.parent();
    let chain: Vec<NodeLocator> = (0..target.0.len())
        .map(|n| NodeLocator(target.0[..n].to_vec()))
        .collect();

    // Full-keep roots: keep the entire subtree. Ancestors of the target are
    // *not* full-keep roots — they survive as shells exactly when something
    // beneath them is kept, which the recursion below arranges.
    let keeps_whole = |node: &WorkNode| -> bool {
        if anchors.within_anchor(node) {
            return true;
        }
        let Some(path) = &node.orig else { return false };
        if path.parent() == target_parent {
            return true;
        }
        if let Some(tag) = node.tag() {
            if tag == "title" || HEADING_TAGS.contains(&tag) {
                return true;
            }
            // Main post: the issue/description container.
            if let WorkKind::Element { attrs, .. } = &node.kind {
                let class_token_match = |sel: &crate::extract::TagClassSelector| {
                    sel.tag == tag
                        && attrs
                            .iter()
                            .find(|(k, _)| k == "class")
                            .map(|(_, v)| v.split_ascii_whitespace().any(|t| t == sel.class_token))
                            .unwrap_or(false)
                };
                if registry.issue_selectors.iter().any(class_token_match) {
                    return true;
                }
                // Ancestor comments' own bodies keep the reply chain
                // readable top to bottom.
                if registry.comment_selectors.iter().any(class_token_match)
                    && path
                        .parent()
                        .map(|p| chain.contains(&p))
                        .unwrap_or(false)
                {
                    return true;
                }
            }
        }
        false
    };

    fn filter(
        nodes: Vec<WorkNode>,
        keeps_whole: &dyn Fn(&WorkNode) -> bool,
        dropped: &mut usize,
    ) -> Vec<WorkNode> {
        let mut out = Vec::new();
        for mut node in nodes {
            if keeps_whole(&node) {
                out.push(node);
                continue;
            }
            match &mut node.kind {
                WorkKind::Element { children, .. } => {
                    let inner = filter(std::mem::take(children), keeps_whole, dropped);
                    if inner.is_empty() {
                        *dropped += 1;
                    } else {
                        *children = inner;
                        out.push(node);
                    }
                }
                // Loose text and comments outside kept subtrees are noise.
                _ => *dropped += 1,
            }
        }
        out
    }

    let mut dropped = 0;
    *roots = filter(std::mem::take(roots), &keeps_whole, &mut dropped);
    bump(counts, "drop-branches", dropped);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract;
    use crate::segment::{Provenance, SegmentType};

    fn thresholds() -> PruneThresholds {
        PruneThresholds::default()
    }

    fn registry() -> PatternRegistry {
        PatternRegistry::default()
    }

    fn form_segment(dom: &Dom) -> Segment {
        extract::extract_forms(dom).remove(0)
    }

    #[test]
    fn rule1_strips_scripts_styles_and_comments() {
        let dom = Dom::parse(
            "<div><script>var x=1;</script><style>.a{}</style><svg><g></g></svg>\
             <noscript>n</noscript><!-- note --><p>keep</p></div>",
        );
        let pruned = prune_untargeted(&dom);
        let html = pruned.to_html();
        assert_eq!(html, "<div><p>keep</p></div>");
    }

    #[test]
    fn rule1_spares_pixel_segment_scripts() {
        let dom = Dom::parse(
            "<div><script>ctx.putImageData(b,0,0);</script><script>analytics();</script></div>",
        );
        let pruned = prune_untargeted(&dom);
        let html = pruned.to_html();
        assert!(html.contains("putImageData"));
        assert!(!html.contains("analytics"));
    }

    #[test]
    fn rule2_dedups_repeated_siblings_with_marker() {
        let items: String = (0..50).map(|_| "<li class=\"row\">item text</li>".to_string()).collect();
        let dom = Dom::parse(&format!("<ul>{items}</ul>"));
        let (pruned, counts) = prune_untargeted_with_stats(&dom, &registry(), &thresholds());
        let html = pruned.to_html();
        assert_eq!(html.matches("<li class=\"row\">").count(), 2);
        assert!(html.contains("<x-omitted count=\"48\"></x-omitted>"));
        assert_eq!(counts["dedup-siblings"], 48);
    }

    #[test]
    fn rule2_spares_siblings_sheltering_segments() {
        // Five identically shaped cards, each containing an email pair:
        // none may be deduplicated away.
        let card = "<div class=\"card\"><div class=\"email-header\">h</div>\
                    <div class=\"email-body\">b</div></div>";
        let dom = Dom::parse(&format!("<main>{}</main>", card.repeat(5)));
        let pruned = prune_untargeted(&dom);
        assert_eq!(pruned.to_html().matches("email-header").count(), 5);
    }

    #[test]
    fn rule3_prunes_attributes_to_keep_list() {
        let dom = Dom::parse(
            "<div style=\"color:red\" onclick=\"x()\" data-x=\"1\" id=\"a\" class=\"b\" \
             aria-label=\"ok\" role=\"main\">t</div>",
        );
        let (pruned, counts) = prune_untargeted_with_stats(&dom, &registry(), &thresholds());
        assert_eq!(
            pruned.to_html(),
            "<div id=\"a\" class=\"b\" aria-label=\"ok\" role=\"main\">t</div>"
        );
        assert_eq!(counts["drop-attributes"], 3);
    }

    #[test]
    fn rule3_truncates_long_values_but_never_identifiers() {
        let long = "v".repeat(400);
        let dom = Dom::parse(&format!("<a href=\"{long}\" id=\"{long}\">x</a>"));
        let (pruned, counts) = prune_untargeted_with_stats(&dom, &registry(), &thresholds());
        let el = pruned.children[0].as_element().unwrap();
        assert_eq!(el.attr("href").unwrap().chars().count(), 257);
        assert!(el.attr("href").unwrap().ends_with('\u{2026}'));
        assert_eq!(el.attr("id").unwrap().chars().count(), 400);
        assert_eq!(counts["truncate-attributes"], 1);
    }

    #[test]
    fn rule4_truncates_long_text_outside_segments() {
        let long = "t".repeat(5000);
        let dom = Dom::parse(&format!("<p>{long}</p><form>{long}</form>"));
        let (pruned, counts) = prune_untargeted_with_stats(&dom, &registry(), &thresholds());
        let p_text = match &pruned.children[0].as_element().unwrap().children[0] {
            DomNode::Text(t) => t.chars().count(),
            other => panic!("unexpected node {other:?}"),
        };
        assert_eq!(p_text, 2001);
        // The form is a segment: its text is untouched.
        let form_text = match &pruned.children[1].as_element().unwrap().children[0] {
            DomNode::Text(t) => t.chars().count(),
            other => panic!("unexpected node {other:?}"),
        };
        assert_eq!(form_text, 5000);
        assert_eq!(counts["truncate-text"], 1);
    }

    #[test]
    fn untargeted_is_idempotent() {
        let items: String = (0..10).map(|_| "<li class=\"r\">x</li>".to_string()).collect();
        let dom = Dom::parse(&format!(
            "<div onclick=\"f()\"><script>s()</script><ul>{items}</ul><p>{}</p></div>",
            "y".repeat(3000)
        ));
        let once = prune_untargeted(&dom);
        let twice = prune_untargeted(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn tokens_never_grow() {
        let dom = Dom::parse(
            "<div class=\"a\"><script>x</script><p>hello</p><p>hello</p><p>hello</p></div>",
        );
        let before = estimate_tokens(&dom.to_html());
        let pruned = prune_untargeted(&dom);
        assert!(estimate_tokens(&pruned.to_html()) <= before);
    }

    #[test]
    fn targeted_reports_stats_and_preserved_locators() {
        let dom = Dom::parse(
            "<html><head><title>Shop</title></head><body>\
             <script>boilerplate()</script>\
             <form id=\"checkout\"><input name=\"card-number\"></form>\
             <div class=\"comment__body\">a comment</div>\
             </body></html>",
        );
        let segment = form_segment(&dom);
        let ctx = prune_targeted(&dom, &segment, &registry(), &thresholds()).unwrap();
        assert!(ctx.tokens_after <= ctx.tokens_before);
        assert!(ctx.markup.contains("<title>Shop</title>"));
        assert!(ctx.markup.contains("checkout"));
        // Non-comment segment: comment subtrees dropped.
        assert!(!ctx.markup.contains("comment__body"));
        assert_eq!(ctx.preserved_locators.len(), 1);
        let reparsed = Dom::parse(&ctx.markup);
        let node = reparsed.resolve(&ctx.preserved_locators[0]).unwrap();
        assert_eq!(node.as_element().unwrap().tag, "form");
    }

    #[test]
    fn targeted_comment_retention_keeps_reply_chain_and_main_post() {
        let dom = Dom::parse(
            "<html><head><title>Thread</title></head><body>\
             <h1>Topic</h1>\
             <div class=\"description\">main post</div>\
             <div class=\"thread\">\
               <div class=\"card\"><div class=\"comment__body\">parent</div>\
                 <div class=\"replies\">\
                   <div class=\"card\"><div class=\"comment__body\">target reply</div></div>\
                 </div>\
               </div>\
               <div class=\"card\"><div class=\"comment__body\">unrelated thread</div></div>\
             </div>\
             </body></html>",
        );
        let comments = extract::extract_comments(&dom, &registry());
        let target = comments
            .iter()
            .find(|s| s.snippet.contains("target reply"))
            .unwrap();
        let ctx = prune_targeted(&dom, target, &registry(), &thresholds()).unwrap();
        assert!(ctx.markup.contains("main post"));
        assert!(ctx.markup.contains("Topic"));
        assert!(ctx.markup.contains("parent"));
        assert!(ctx.markup.contains("target reply"));
        assert!(!ctx.markup.contains("unrelated thread"));
        let reparsed = Dom::parse(&ctx.markup);
        assert!(reparsed.resolve(&ctx.preserved_locators[0]).is_some());
    }

    #[test]
    fn targeted_duplicate_keeps_both_occurrences() {
        let dom = Dom::parse(
            "<body><div><input name=\"ssn\" id=\"orig\"></div>\
             <div><input name=\"ssn\" id=\"dup\"></div></body>",
        );
        let segment = extract::extract_duplicate_elements(&dom, &registry()).remove(0);
        let ctx = prune_targeted(&dom, &segment, &registry(), &thresholds()).unwrap();
        assert_eq!(ctx.markup.matches("name=\"ssn\"").count(), 2);
        assert_eq!(ctx.preserved_locators.len(), 2);
        let reparsed = Dom::parse(&ctx.markup);
        for loc in &ctx.preserved_locators {
            assert!(reparsed.resolve(loc).is_some());
        }
    }

    #[test]
    fn stale_and_missing_locators_error() {
        let dom = Dom::parse("<form></form>");
        let mut segment = form_segment(&dom);
        segment.locator = Some(NodeLocator(vec![9, 9]));
        assert!(matches!(
            prune_targeted(&dom, &segment, &registry(), &thresholds()),
            Err(PruneError::StaleLocator { .. })
        ));
        let popup = Segment {
            segment_type: SegmentType::PopUp,
            locator: None,
            partner: None,
            snippet: "<div></div>".to_string(),
            provenance: Provenance::LlmExtracted,
            confidence: 0.5,
            evidence: vec!["e".to_string()],
        };
        assert!(matches!(
            prune_targeted(&dom, &popup, &registry(), &thresholds()),
            Err(PruneError::StaleLocator { locator: None })
        ));
    }
}
