//! Permissive HTML document model.
//!
//! The parser accepts arbitrary real-world markup and always produces a
//! tree: unclosed tags are auto-closed per content-model rules, stray close
//! tags are ignored, and junk byte sequences degrade to text. The only
//! fallible entry point is [`Dom::parse_bytes`], which rejects input that is
//! not valid UTF-8.
//!
//! Serialization is the inverse of parsing in the sense that for any `dom`
//! obtained from [`Dom::parse`], `Dom::parse(&dom.to_html()) == dom`.

mod parser;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Tags that never take children and are serialized without a close tag.
pub const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

/// Tags whose content is raw text: never parsed as markup, never
/// entity-decoded, terminated only by a matching close tag.
pub const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style", "xmp", "iframe", "noembed", "noframes"];

/// Tags whose content is text with entity decoding but no child markup.
pub const RCDATA_ELEMENTS: &[&str] = &["title", "textarea"];

/// Input bytes could not be decoded as text.
#[derive(Debug, Error)]
#[error("input is not valid UTF-8 (invalid byte at offset {offset})")]
pub struct DecodeError {
    pub offset: usize,
}

/// An element node: lowercase tag name, attributes in source order
/// (duplicates dropped, first occurrence wins), and child nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub tag: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<DomNode>,
}

impl Element {
    pub fn new(tag: &str) -> Self {
        Element {
            tag: tag.to_ascii_lowercase(),
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    /// First value for `name` (attribute names are stored lowercase).
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    /// Sets or replaces an attribute, preserving its position if present.
    pub fn set_attr(&mut self, name: &str, value: &str) {
        let name = name.to_ascii_lowercase();
        match self.attrs.iter_mut().find(|(k, _)| *k == name) {
            Some((_, v)) => *v = value.to_string(),
            None => self.attrs.push((name, value.to_string())),
        }
    }

    /// Whitespace-separated tokens of the `class` attribute.
    pub fn class_tokens(&self) -> impl Iterator<Item = &str> {
        self.attr("class").unwrap_or("").split_ascii_whitespace()
    }

    pub fn has_class_token(&self, token: &str) -> bool {
        self.class_tokens().any(|t| t == token)
    }

    pub fn is_void(&self) -> bool {
        VOID_ELEMENTS.contains(&self.tag.as_str())
    }

    pub fn is_raw_text(&self) -> bool {
        RAW_TEXT_ELEMENTS.contains(&self.tag.as_str())
    }

    /// Concatenated text of all descendant text nodes, unnormalized.
    pub fn text_content(&self) -> String {
        let mut out = String::new();
        fn rec(el: &Element, out: &mut String) {
            for child in &el.children {
                match child {
                    DomNode::Text(t) => out.push_str(t),
                    DomNode::Element(e) => rec(e, out),
                    DomNode::Comment(_) => {}
                }
            }
        }
        rec(self, &mut out);
        out
    }
}

/// A node in the parsed tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomNode {
    Element(Element),
    /// Entity-decoded character data.  Adjacent runs are always coalesced
    /// into a single node.
    Text(String),
    /// Comment contents without the `<!--`/`-->` delimiters.
    Comment(String),
}

impl DomNode {
    pub fn as_element(&self) -> Option<&Element> {
        match self {
            DomNode::Element(el) => Some(el),
            _ => None,
        }
    }

    pub fn as_element_mut(&mut self) -> Option<&mut Element> {
        match self {
            DomNode::Element(el) => Some(el),
            _ => None,
        }
    }

    pub fn is_element_named(&self, tag: &str) -> bool {
        matches!(self, DomNode::Element(el) if el.tag == tag)
    }

    /// Serializes this node and its subtree back to markup.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        serialize_node(self, &mut out);
        out
    }
}

/// Path of child indices addressing a node from the document root.
///
/// Index `i` selects `children[i]` at each level, counting text and comment
/// nodes as children.  Paths are only meaningful against the exact tree they
/// were derived from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeLocator(pub Vec<usize>);

impl NodeLocator {
    pub fn child(&self, index: usize) -> NodeLocator {
        let mut path = self.0.clone();
        path.push(index);
        NodeLocator(path)
    }

    pub fn parent(&self) -> Option<NodeLocator> {
        if self.0.is_empty() {
            return None;
        }
        Some(NodeLocator(self.0[..self.0.len() - 1].to_vec()))
    }

    /// True if `self` addresses `other` or one of its descendants.
    pub fn is_within(&self, other: &NodeLocator) -> bool {
        self.0.len() >= other.0.len() && self.0[..other.0.len()] == other.0[..]
    }
}

impl fmt::Display for NodeLocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "/");
        }
        for idx in &self.0 {
            write!(f, "/{idx}")?;
        }
        Ok(())
    }
}

/// A parsed document: a forest of top-level nodes.
///
/// No `html`/`head`/`body` scaffolding is synthesized; a fragment like
/// `<p>hi` parses to a single `p` element at the top level.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dom {
    pub children: Vec<DomNode>,
}

impl Dom {
    /// Parses markup.  Never fails: malformed input is recovered into the
    /// closest well-formed tree.
    pub fn parse(input: &str) -> Dom {
        parser::parse_document(input)
    }

    /// Parses raw bytes, rejecting non-UTF-8 input.
    pub fn parse_bytes(input: &[u8]) -> Result<Dom, DecodeError> {
        match std::str::from_utf8(input) {
            Ok(s) => Ok(Dom::parse(s)),
            Err(e) => Err(DecodeError {
                offset: e.valid_up_to(),
            }),
        }
    }

    /// Serializes the whole document.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        for child in &self.children {
            serialize_node(child, &mut out);
        }
        out
    }

    /// Looks up the node addressed by `locator`, if the path is still valid.
    pub fn resolve(&self, locator: &NodeLocator) -> Option<&DomNode> {
        let (&first, rest) = locator.0.split_first()?;
        let mut node = self.children.get(first)?;
        for &idx in rest {
            node = node.as_element()?.children.get(idx)?;
        }
        Some(node)
    }

    pub fn resolve_mut(&mut self, locator: &NodeLocator) -> Option<&mut DomNode> {
        let (&first, rest) = locator.0.split_first()?;
        let mut node = self.children.get_mut(first)?;
        for &idx in rest {
            node = node.as_element_mut()?.children.get_mut(idx)?;
        }
        Some(node)
    }

    /// Pre-order traversal of every node with its locator.
    pub fn walk(&self) -> Walk<'_> {
        let mut stack = Vec::new();
        for (i, child) in self.children.iter().enumerate().rev() {
            stack.push((NodeLocator(vec![i]), child));
        }
        Walk { stack }
    }

    /// Locator of the first element (document order) satisfying `pred`.
    pub fn find_element<F>(&self, mut pred: F) -> Option<(NodeLocator, &Element)>
    where
        F: FnMut(&Element) -> bool,
    {
        self.walk().find_map(|(loc, node)| match node {
            DomNode::Element(el) if pred(el) => Some((loc, el)),
            _ => None,
        })
    }

    /// Appends `node` as the last child of the element at `parent`, returning
    /// the new node's locator.  Returns `None` if `parent` does not resolve
    /// to an element.
    pub fn append_child(&mut self, parent: &NodeLocator, node: DomNode) -> Option<NodeLocator> {
        let el = self.resolve_mut(parent)?.as_element_mut()?;
        el.children.push(node);
        Some(parent.child(el.children.len() - 1))
    }

    /// Concatenated user-visible text: character data outside of
    /// script/style/noscript/template subtrees, with whitespace runs
    /// collapsed to single spaces and `<` escaped as `&lt;`.
    ///
    /// The output never contains a literal `<`, so it can be embedded in
    /// markup or prompts without reintroducing tag structure.
    pub fn visible_text(&self) -> String {
        const INVISIBLE: &[&str] = &["script", "style", "noscript", "template"];
        const BLOCK: &[&str] = &[
            "address", "article", "aside", "blockquote", "body", "br", "dd", "div", "dl", "dt",
            "fieldset", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header",
            "hr", "html", "li", "main", "nav", "ol", "option", "p", "pre", "section", "table",
            "td", "th", "title", "tr", "ul",
        ];
        let mut out = String::new();
        let mut pending_space = false;
        fn emit(text: &str, out: &mut String, pending_space: &mut bool) {
            for ch in text.chars() {
                if ch.is_whitespace() {
                    *pending_space = true;
                } else {
                    if *pending_space && !out.is_empty() {
                        out.push(' ');
                    }
                    *pending_space = false;
                    if ch == '<' {
                        out.push_str("&lt;");
                    } else {
                        out.push(ch);
                    }
                }
            }
        }
        fn rec(nodes: &[DomNode], out: &mut String, pending_space: &mut bool) {
            for node in nodes {
                match node {
                    DomNode::Text(t) => emit(t, out, pending_space),
                    DomNode::Element(el) => {
                        if INVISIBLE.contains(&el.tag.as_str()) {
                            continue;
                        }
                        let block = BLOCK.contains(&el.tag.as_str());
                        if block {
                            *pending_space = true;
                        }
                        rec(&el.children, out, pending_space);
                        if block {
                            *pending_space = true;
                        }
                    }
                    DomNode::Comment(_) => {}
                }
            }
        }
        rec(&self.children, &mut out, &mut pending_space);
        out
    }
}

/// Iterator returned by [`Dom::walk`].
pub struct Walk<'a> {
    stack: Vec<(NodeLocator, &'a DomNode)>,
}

impl<'a> Iterator for Walk<'a> {
    type Item = (NodeLocator, &'a DomNode);

    fn next(&mut self) -> Option<Self::Item> {
        let (loc, node) = self.stack.pop()?;
        if let DomNode::Element(el) = node {
            for (i, child) in el.children.iter().enumerate().rev() {
                self.stack.push((loc.child(i), child));
            }
        }
        Some((loc, node))
    }
}

/// Crude provider-agnostic token estimate: one token per four characters,
/// rounded up.  Used for pruning budgets and reports, not billing.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

fn escape_text(text: &str, out: &mut String) {
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(ch),
        }
    }
}

fn escape_attr(text: &str, out: &mut String) {
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
}

fn serialize_node(node: &DomNode, out: &mut String) {
    match node {
        DomNode::Text(t) => escape_text(t, out),
        DomNode::Comment(c) => {
            out.push_str("<!--");
            out.push_str(c);
            out.push_str("-->");
        }
        DomNode::Element(el) => {
            out.push('<');
            out.push_str(&el.tag);
            for (name, value) in &el.attrs {
                out.push(' ');
                out.push_str(name);
                out.push_str("=\"");
                escape_attr(value, out);
                out.push('"');
            }
            out.push('>');
            if el.is_void() {
                return;
            }
            if el.is_raw_text() {
                // Raw-text contents round-trip verbatim; the parser
                // guarantees they never contain a terminating close tag.
                for child in &el.children {
                    if let DomNode::Text(t) = child {
                        out.push_str(t);
                    }
                }
            } else {
                for child in &el.children {
                    serialize_node(child, out);
                }
            }
            out.push_str("</");
            out.push_str(&el.tag);
            out.push('>');
        }
    }
}
