//! Tokenizer and tree builder.
//!
//! One forward pass over the input. Malformed markup never fails: the
//! builder recovers with the usual content-model rules (auto-closing `p`,
//! `li`, `option`, table parts, ...), stray close tags are ignored, and a
//! `<` that does not begin a tag is literal text. Character references are
//! decoded conservatively: only `&name;` forms from a small safe table and
//! terminated numeric references; everything else stays literal, which keeps
//! decoding unambiguous and round-trip stable.

use super::{Dom, DomNode, Element, RAW_TEXT_ELEMENTS, RCDATA_ELEMENTS};
use std::borrow::Cow;

/// Start tags that implicitly close an open `p` element.
const CLOSES_P: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "details",
    "div",
    "dl",
    "fieldset",
    "figcaption",
    "figure",
    "footer",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hgroup",
    "hr",
    "main",
    "menu",
    "nav",
    "ol",
    "p",
    "pre",
    "section",
    "table",
    "ul",
];

/// Scope boundaries past which an open `p` is no longer auto-closed.
const P_SCOPE_STOP: &[&str] = &["button", "table", "td", "th", "caption", "template"];

/// Scope boundaries for `li` auto-closing: a structural container between
/// the new `li` and the open one means the two legitimately nest.
const LIST_ITEM_STOP: &[&str] = &[
    "ul", "ol", "table", "td", "th", "caption", "button", "div", "section", "article", "aside",
    "nav", "form", "template",
];

const DEFINITION_STOP: &[&str] = &[
    "dl", "table", "td", "th", "button", "div", "section", "article", "template",
];

const TABLE_STOP: &[&str] = &["table", "template"];

const ROW_STOP: &[&str] = &["tr", "table", "template"];

const HEADINGS: &[&str] = &["h1", "h2", "h3", "h4", "h5", "h6"];

pub(super) fn parse_document(input: &str) -> Dom {
    let normalized: Cow<'_, str> = if input.contains('\r') {
        Cow::Owned(input.replace("\r\n", "\n").replace('\r', "\n"))
    } else {
        Cow::Borrowed(input)
    };
    Parser {
        src: &normalized,
        pos: 0,
        builder: Builder::default(),
    }
    .run()
}

#[derive(Default)]
struct Builder {
    roots: Vec<DomNode>,
    stack: Vec<Element>,
}

impl Builder {
    fn append_node(&mut self, node: DomNode) {
        let children = match self.stack.last_mut() {
            Some(el) => &mut el.children,
            None => &mut self.roots,
        };
        if let DomNode::Text(t) = &node {
            if let Some(DomNode::Text(prev)) = children.last_mut() {
                prev.push_str(t);
                return;
            }
        }
        children.push(node);
    }

    fn append_text(&mut self, text: String) {
        if !text.is_empty() {
            self.append_node(DomNode::Text(text));
        }
    }

    fn open(&mut self, el: Element) {
        self.stack.push(el);
    }

    /// Closes the innermost open element, attaching it to its parent.
    fn close_one(&mut self) {
        if let Some(el) = self.stack.pop() {
            self.append_node(DomNode::Element(el));
        }
    }

    /// Pops open elements until the one at `index` (inclusive) is closed.
    fn close_through(&mut self, index: usize) {
        while self.stack.len() > index {
            self.close_one();
        }
    }

    /// Innermost open element matching one of `names`, scanning outward but
    /// not past any element in `stop`.
    fn open_index(&self, names: &[&str], stop: &[&str]) -> Option<usize> {
        for (i, el) in self.stack.iter().enumerate().rev() {
            if names.contains(&el.tag.as_str()) {
                return Some(i);
            }
            if stop.contains(&el.tag.as_str()) {
                return None;
            }
        }
        None
    }

    fn top_is_any(&self, names: &[&str]) -> bool {
        matches!(self.stack.last(), Some(el) if names.contains(&el.tag.as_str()))
    }

    /// Implicit closes required before inserting a start tag `name`.
    fn auto_close_before(&mut self, name: &str) {
        if CLOSES_P.contains(&name) {
            if let Some(i) = self.open_index(&["p"], P_SCOPE_STOP) {
                self.close_through(i);
            }
        }
        match name {
            "li" => {
                if let Some(i) = self.open_index(&["li"], LIST_ITEM_STOP) {
                    self.close_through(i);
                }
            }
            "dt" | "dd" => {
                if let Some(i) = self.open_index(&["dt", "dd"], DEFINITION_STOP) {
                    self.close_through(i);
                }
            }
            "option" => {
                if self.top_is_any(&["option"]) {
                    self.close_one();
                }
            }
            "optgroup" => {
                if self.top_is_any(&["option"]) {
                    self.close_one();
                }
                if self.top_is_any(&["optgroup"]) {
                    self.close_one();
                }
            }
            "tr" => {
                if let Some(i) = self.open_index(&["tr"], TABLE_STOP) {
                    self.close_through(i);
                }
            }
            "td" | "th" => {
                if let Some(i) = self.open_index(&["td", "th"], ROW_STOP) {
                    self.close_through(i);
                }
            }
            "thead" | "tbody" | "tfoot" => {
                if let Some(i) = self.open_index(&["thead", "tbody", "tfoot"], TABLE_STOP) {
                    self.close_through(i);
                }
            }
            _ if HEADINGS.contains(&name) => {
                if self.top_is_any(HEADINGS) {
                    self.close_one();
                }
            }
            _ => {}
        }
    }

    fn handle_end_tag(&mut self, name: &str) {
        // Close through the nearest matching open element, implicitly
        // closing anything opened inside it. No match: stray tag, ignored.
        if let Some(i) = self.stack.iter().rposition(|el| el.tag == name) {
            self.close_through(i);
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    builder: Builder,
}

impl<'a> Parser<'a> {
    fn run(mut self) -> Dom {
        while self.pos < self.src.len() {
            match self.find_from("<", self.pos) {
                None => {
                    let text = decode_entities(&self.src[self.pos..]);
                    self.builder.append_text(text);
                    self.pos = self.src.len();
                }
                Some(lt) => {
                    if lt > self.pos {
                        let text = decode_entities(&self.src[self.pos..lt]);
                        self.builder.append_text(text);
                        self.pos = lt;
                    }
                    self.lex_markup();
                }
            }
        }
        while !self.builder.stack.is_empty() {
            self.builder.close_one();
        }
        Dom {
            children: self.builder.roots,
        }
    }

    fn bytes(&self) -> &[u8] {
        self.src.as_bytes()
    }

    fn find_from(&self, pat: &str, from: usize) -> Option<usize> {
        self.src[from..].find(pat).map(|i| from + i)
    }

    /// Dispatches on the character after a `<` at `self.pos`.
    fn lex_markup(&mut self) {
        match self.bytes().get(self.pos + 1) {
            None => {
                self.builder.append_text("<".to_string());
                self.pos += 1;
            }
            Some(b'!') => self.lex_declaration(),
            Some(b'/') => self.lex_end_tag(),
            Some(b'?') => self.lex_bogus_comment(self.pos + 1),
            Some(c) if c.is_ascii_alphabetic() => self.lex_start_tag(),
            Some(_) => {
                // `<` followed by anything else is literal text.
                self.builder.append_text("<".to_string());
                self.pos += 1;
            }
        }
    }

    fn lex_declaration(&mut self) {
        let rest = &self.src[self.pos..];
        if rest.starts_with("<!--") {
            let body = self.pos + 4;
            // Abruptly closed comments: `<!-->` and `<!--->`.
            if self.src[body..].starts_with('>') {
                self.builder.append_node(DomNode::Comment(String::new()));
                self.pos = body + 1;
                return;
            }
            if self.src[body..].starts_with("->") {
                self.builder.append_node(DomNode::Comment(String::new()));
                self.pos = body + 2;
                return;
            }
            match self.find_from("-->", body) {
                Some(end) => {
                    self.builder
                        .append_node(DomNode::Comment(self.src[body..end].to_string()));
                    self.pos = end + 3;
                }
                None => {
                    self.builder
                        .append_node(DomNode::Comment(self.src[body..].to_string()));
                    self.pos = self.src.len();
                }
            }
        } else if rest.len() >= 9 && rest[..9].eq_ignore_ascii_case("<!doctype") {
            // Doctype carries no tree content; skip it.
            self.pos = match self.find_from(">", self.pos) {
                Some(gt) => gt + 1,
                None => self.src.len(),
            };
        } else {
            self.lex_bogus_comment(self.pos + 2);
        }
    }

    /// Everything from `start` up to the next `>` becomes a comment node.
    fn lex_bogus_comment(&mut self, start: usize) {
        match self.find_from(">", start) {
            Some(gt) => {
                self.builder
                    .append_node(DomNode::Comment(self.src[start..gt].to_string()));
                self.pos = gt + 1;
            }
            None => {
                self.builder
                    .append_node(DomNode::Comment(self.src[start..].to_string()));
                self.pos = self.src.len();
            }
        }
    }

    fn lex_end_tag(&mut self) {
        match self.bytes().get(self.pos + 2) {
            None => {
                self.builder.append_text("</".to_string());
                self.pos += 2;
            }
            Some(b'>') => {
                // `</>` produces nothing.
                self.pos += 3;
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let name_start = self.pos + 2;
                let name_end = self.scan_name(name_start);
                let name = self.src[name_start..name_end].to_ascii_lowercase();
                // Anything between the name and `>` is discarded; end tags
                // carry no attributes in the tree.
                self.pos = match self.find_from(">", name_end) {
                    Some(gt) => gt + 1,
                    None => self.src.len(),
                };
                self.builder.handle_end_tag(&name);
            }
            Some(_) => {
                // `</` followed by a non-letter: bogus comment.
                self.lex_bogus_comment(self.pos + 2);
            }
        }
    }

    /// Scans a tag or attribute name starting at `from`; returns the end.
    fn scan_name(&self, from: usize) -> usize {
        let bytes = self.bytes();
        let mut i = from;
        while i < bytes.len() && !matches!(bytes[i], b'\t' | b'\n' | b'\x0C' | b' ' | b'/' | b'>' | b'=') {
            i += 1;
        }
        i
    }

    fn skip_whitespace(&self, from: usize) -> usize {
        let bytes = self.bytes();
        let mut i = from;
        while i < bytes.len() && matches!(bytes[i], b'\t' | b'\n' | b'\x0C' | b' ') {
            i += 1;
        }
        i
    }

    fn lex_start_tag(&mut self) {
        let name_start = self.pos + 1;
        let name_end = self.scan_name(name_start);
        let tag = self.src[name_start..name_end].to_ascii_lowercase();
        let mut attrs: Vec<(String, String)> = Vec::new();
        let bytes = self.bytes();
        let mut i = name_end;
        loop {
            i = self.skip_whitespace(i);
            match bytes.get(i) {
                // EOF inside a tag discards the whole tag.
                None => {
                    self.pos = self.src.len();
                    return;
                }
                Some(b'>') => {
                    i += 1;
                    break;
                }
                Some(b'/') => {
                    // `/>` on a non-void element does not actually close it;
                    // the slash is ignored either way, matching browsers.
                    i += 1;
                }
                Some(_) => {
                    let attr_start = i;
                    let mut attr_end = self.scan_name(i);
                    if attr_end == attr_start {
                        // Guaranteed progress on junk like a leading `=`.
                        attr_end += char_width(bytes[attr_start]);
                    }
                    let name = self.src[attr_start..attr_end].to_ascii_lowercase();
                    i = self.skip_whitespace(attr_end);
                    let mut value = String::new();
                    if bytes.get(i) == Some(&b'=') {
                        i = self.skip_whitespace(i + 1);
                        match bytes.get(i) {
                            None => {
                                self.pos = self.src.len();
                                return;
                            }
                            Some(&q @ (b'"' | b'\'')) => {
                                let val_start = i + 1;
                                match self.find_byte(q, val_start) {
                                    Some(end) => {
                                        value = decode_entities(&self.src[val_start..end]);
                                        i = end + 1;
                                    }
                                    None => {
                                        self.pos = self.src.len();
                                        return;
                                    }
                                }
                            }
                            Some(b'>') => {}
                            Some(_) => {
                                let val_start = i;
                                while i < bytes.len()
                                    && !matches!(bytes[i], b'\t' | b'\n' | b'\x0C' | b' ' | b'>')
                                {
                                    i += 1;
                                }
                                value = decode_entities(&self.src[val_start..i]);
                            }
                        }
                    }
                    // First occurrence of an attribute name wins.
                    if !attrs.iter().any(|(n, _)| *n == name) {
                        attrs.push((name, value));
                    }
                }
            }
        }
        self.pos = i;
        self.insert_element(tag, attrs);
    }

    fn find_byte(&self, needle: u8, from: usize) -> Option<usize> {
        self.bytes()[from..]
            .iter()
            .position(|&b| b == needle)
            .map(|i| from + i)
    }

    fn insert_element(&mut self, tag: String, attrs: Vec<(String, String)>) {
        self.builder.auto_close_before(&tag);
        let mut el = Element {
            tag,
            attrs,
            children: Vec::new(),
        };
        if el.is_void() {
            self.builder.append_node(DomNode::Element(el));
        } else if RAW_TEXT_ELEMENTS.contains(&el.tag.as_str()) {
            let (text_end, resume) = self.scan_raw_end(&el.tag, self.pos);
            if text_end > self.pos {
                el.children
                    .push(DomNode::Text(self.src[self.pos..text_end].to_string()));
            }
            self.pos = resume;
            self.builder.append_node(DomNode::Element(el));
        } else if RCDATA_ELEMENTS.contains(&el.tag.as_str()) {
            let (text_end, resume) = self.scan_raw_end(&el.tag, self.pos);
            if text_end > self.pos {
                el.children.push(DomNode::Text(decode_entities(
                    &self.src[self.pos..text_end],
                )));
            }
            self.pos = resume;
            self.builder.append_node(DomNode::Element(el));
        } else {
            self.builder.open(el);
        }
    }

    /// Finds the close tag terminating a raw-text or RCDATA element.
    ///
    /// Returns `(text_end, resume_pos)`. A `</name` not followed by
    /// whitespace, `/`, or `>` is ordinary text (e.g. `</scriptx`), and an
    /// unterminated element swallows the rest of the input.
    fn scan_raw_end(&self, name: &str, from: usize) -> (usize, usize) {
        let bytes = self.bytes();
        let name_len = name.len();
        let mut i = from;
        loop {
            let lt = match self.find_byte(b'<', i) {
                Some(p) => p,
                None => return (bytes.len(), bytes.len()),
            };
            let candidate_ok = bytes.get(lt + 1) == Some(&b'/')
                && lt + 2 + name_len <= bytes.len()
                && self.src[lt + 2..lt + 2 + name_len].eq_ignore_ascii_case(name)
                && matches!(
                    bytes.get(lt + 2 + name_len),
                    Some(b'\t' | b'\n' | b'\x0C' | b' ' | b'/' | b'>')
                );
            if candidate_ok {
                let resume = match self.find_byte(b'>', lt + 2 + name_len) {
                    Some(gt) => gt + 1,
                    None => bytes.len(),
                };
                return (lt, resume);
            }
            i = lt + 1;
        }
    }
}

fn char_width(b: u8) -> usize {
    if b < 0x80 {
        1
    } else if b >= 0xF0 {
        4
    } else if b >= 0xE0 {
        3
    } else {
        2
    }
}

/// Decodes terminated character references; anything else stays literal.
fn decode_entities(raw: &str) -> String {
    if !raw.contains('&') {
        return raw.to_string();
    }
    const NAMED: &[(&str, char)] = &[
        ("amp;", '&'),
        ("lt;", '<'),
        ("gt;", '>'),
        ("quot;", '"'),
        ("apos;", '\''),
        ("nbsp;", '\u{a0}'),
    ];
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let tail = &rest[1..];
        if let Some(stripped) = tail.strip_prefix('#') {
            if let Some((ch, consumed)) = decode_numeric(stripped) {
                out.push(ch);
                rest = &rest[2 + consumed..];
                continue;
            }
        } else if let Some((name, ch)) = NAMED.iter().find(|(name, _)| {
            // Compare as bytes: slicing `tail` at name.len() could split a
            // multi-byte character that happens to follow the ampersand.
            tail.len() >= name.len()
                && tail.as_bytes()[..name.len()].eq_ignore_ascii_case(name.as_bytes())
        }) {
            out.push(*ch);
            rest = &rest[1 + name.len()..];
            continue;
        }
        out.push('&');
        rest = &rest[1..];
    }
    out.push_str(rest);
    out
}

/// Parses the digits-and-semicolon tail of `&#...;`, returning the decoded
/// character and the number of bytes consumed after `&#`.
fn decode_numeric(tail: &str) -> Option<(char, usize)> {
    let bytes = tail.as_bytes();
    let (digits_start, radix): (usize, u32) = match bytes.first() {
        Some(b'x') | Some(b'X') => (1, 16),
        _ => (0, 10),
    };
    let mut end = digits_start;
    while end < bytes.len() && (bytes[end] as char).is_digit(radix) {
        end += 1;
    }
    if end == digits_start || bytes.get(end) != Some(&b';') {
        return None;
    }
    let value = u32::from_str_radix(&tail[digits_start..end], radix).unwrap_or(u32::MAX);
    let ch = match value {
        0 | 0xD800..=0xDFFF => '\u{FFFD}',
        v => char::from_u32(v).unwrap_or('\u{FFFD}'),
    };
    Some((ch, end + 1))
}
