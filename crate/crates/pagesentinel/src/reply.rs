//! Reply-text utilities shared by the extractor and analyzer parsers.

/// Strips one optional surrounding Markdown code fence (with or without an
/// info string like `json`) and outer whitespace. Anything that is not a
/// single complete fence is returned trimmed and otherwise untouched; the
/// JSON parser downstream produces the real error.
pub fn strip_code_fence(reply: &str) -> &str {
    let trimmed = reply.trim();
    if let Some(rest) = trimmed.strip_prefix("```") {
        if let Some(newline) = rest.find('\n') {
            let body = rest[newline + 1..].trim_end();
            if let Some(body) = body.strip_suffix("```") {
                return body.trim();
            }
        }
    }
    trimmed
}

/// Parses JSON, tolerating the trailing commas chat models like to emit
/// (the analyzer's own output example ends a field list with one). Strict
/// parsing is tried first; on failure, commas that directly precede a
/// closing brace or bracket are removed — outside string literals only —
/// and parsing is retried. The original error is kept if both fail.
pub fn parse_json_lenient(text: &str) -> Result<serde_json::Value, serde_json::Error> {
    serde_json::from_str(text).or_else(|strict_err| {
        serde_json::from_str(&strip_trailing_commas(text)).map_err(|_| strict_err)
    })
}

fn strip_trailing_commas(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.char_indices().peekable();
    let mut in_string = false;
    let mut escaped = false;
    while let Some((i, c)) = chars.next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            ',' => {
                let next_significant = text[i + 1..].chars().find(|c| !c.is_whitespace());
                if !matches!(next_significant, Some('}') | Some(']')) {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfenced_text_is_only_trimmed() {
        assert_eq!(strip_code_fence("  {\"a\":1}\n"), "{\"a\":1}");
    }

    #[test]
    fn json_fence_is_stripped() {
        assert_eq!(strip_code_fence("```json\n{\"a\":1}\n```"), "{\"a\":1}");
        assert_eq!(strip_code_fence("```\n{\"a\":1}\n```\n"), "{\"a\":1}");
    }

    #[test]
    fn incomplete_fence_is_left_alone() {
        assert_eq!(strip_code_fence("```json\n{\"a\":1}"), "```json\n{\"a\":1}");
    }

    #[test]
    fn fence_markers_inside_body_are_untouched() {
        let s = "{\"a\":\"```\"}";
        assert_eq!(strip_code_fence(s), s);
    }

    #[test]
    fn lenient_parse_accepts_trailing_commas() {
        let value = parse_json_lenient("{\"a\": [1, 2,], \"b\": \"x\",\n}").unwrap();
        assert_eq!(value["a"][1], 2);
        assert_eq!(value["b"], "x");
    }

    #[test]
    fn lenient_parse_never_edits_string_contents() {
        let value = parse_json_lenient("{\"a\": \"x,} ,]\",}").unwrap();
        assert_eq!(value["a"], "x,} ,]");
    }

    #[test]
    fn lenient_parse_reports_the_strict_error_for_real_garbage() {
        assert!(parse_json_lenient("not json at all").is_err());
    }
}
