//! System-prompt templates and placeholder substitution.
//!
//! The two templates are fixed resource files embedded at compile time.
//! Rendering is plain literal substitution — no escaping, no templating
//! language — so a rendered prompt is the template byte-for-byte with the
//! placeholder spans replaced. Custom template files may be supplied
//! through the config as long as they carry the same placeholders.

use thiserror::Error;

/// Extractor system prompt. Placeholder: `{webpage_html}`.
pub const EXTRACTOR_TEMPLATE: &str = include_str!("prompts/extractor_system.txt");

/// Analyzer system prompt. Placeholders: `{webpage_html}`,
/// `{code_snippet}`, `{segment_type}`.
pub const ANALYZER_TEMPLATE: &str = include_str!("prompts/analyzer_system.txt");

/// Fixed user turns: all page- and segment-specific content lives in the
/// system prompt, so the user message just asks for the answer. Keeping
/// them constant makes request fingerprints depend only on the system text.
pub const EXTRACTOR_USER_TURN: &str =
    "Analyze the webpage HTML in the system prompt and return only the JSON object.";
pub const ANALYZER_USER_TURN: &str =
    "Evaluate the segment against the webpage context in the system prompt and return only the JSON object.";

/// A template is missing one of its required placeholders, so rendering it
/// would silently drop an input.
#[derive(Debug, Error)]
#[error("prompt template is missing required placeholder {placeholder}")]
pub struct TemplateError {
    pub placeholder: &'static str,
}

fn substitute(
    template: &str,
    pairs: &[(&'static str, &str)],
) -> Result<String, TemplateError> {
    let mut out = template.to_string();
    for (placeholder, value) in pairs {
        if !out.contains(placeholder) {
            return Err(TemplateError { placeholder });
        }
        out = out.replace(placeholder, value);
    }
    Ok(out)
}

/// Renders the extractor prompt for a serialized page.
pub fn render_extractor_prompt(
    template: &str,
    webpage_html: &str,
) -> Result<String, TemplateError> {
    substitute(template, &[("{webpage_html}", webpage_html)])
}

/// Renders the analyzer prompt for one (context, segment) pair.
pub fn render_analyzer_prompt(
    template: &str,
    webpage_html: &str,
    code_snippet: &str,
    segment_type: &str,
) -> Result<String, TemplateError> {
    substitute(
        template,
        &[
            ("{webpage_html}", webpage_html),
            ("{code_snippet}", code_snippet),
            ("{segment_type}", segment_type),
        ],
    )
}
