//! Two-step detection and localization of prompt-injection content in
//! webpages.
//!
//! Step one extracts segments of interest from a parsed page: structural
//! pattern matches (forms, comments, issues, emails, chat messages,
//! duplicated identifiers, pixel-manipulating scripts) plus pop-ups found by
//! an extractor model. Step two prunes the page down to the context that
//! matters for each segment and asks an analyzer model a fixed set of
//! alignment questions about it. A page is flagged malicious exactly when at
//! least one segment is judged contaminated, and the contaminated segments
//! are the localization.
//!
//! Everything model-facing goes through [`backend::Backend`], which has a
//! deterministic offline implementation, an HTTP client, and a
//! record/replay cassette wrapper.

pub mod analyze;
pub mod backend;
pub mod config;
pub mod corpus;
pub mod extract;
pub mod html;
pub mod metrics;
pub mod prompts;
pub mod prune;
pub mod reply;
pub mod segment;
