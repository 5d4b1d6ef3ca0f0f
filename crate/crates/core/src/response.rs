//! Decomposition of raw model output into reasoning segment and final
//! answer.
//!
//! Reasoning models wrap their chain of thought in delimiters
//! (`<think>`...`</think>` by default) followed by the final answer.
//! The parser distinguishes three shapes:
//!
//! - both delimiters present, in order: reasoning is the delimited span
//!   (possibly empty or whitespace-only, which is *present but empty*);
//! - no opening delimiter: reasoning is absent and the whole text is
//!   the final answer;
//! - opening delimiter without a closing one: the completion is
//!   malformed (usually truncation) and is surfaced as an error rather
//!   than silently classified.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_OPEN_DELIM: &str = "<think>";
pub const DEFAULT_CLOSE_DELIM: &str = "</think>";

/// Default minimum count of non-whitespace reasoning characters for a
/// completion to count as having substantive reasoning. Small enough to
/// accept one real sentence, large enough to reject whitespace and
/// one-word artifacts.
pub const DEFAULT_MIN_REASONING_CHARS: usize = 20;

/// A model output split into parts. `raw` is byte-preserved;
/// `reasoning` is `None` when no delimiter pair was found and
/// `Some("")`/`Some(" ")` when the block exists but is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub raw: String,
    pub reasoning: Option<String>,
    pub final_text: String,
}

impl Completion {
    /// Wrap text that carries no reasoning block at all.
    pub fn bare(text: impl Into<String>) -> Self {
        let text = text.into();
        Completion {
            raw: text.clone(),
            reasoning: None,
            final_text: text,
        }
    }
}

/// Split `raw` on the first `open_delim`..`close_delim` pair.
///
/// Only the first pair is honored; later occurrences of either
/// delimiter belong to the final answer. Text before the opening
/// delimiter (rare; some chat stacks prepend metadata) is preserved in
/// `raw` but belongs to neither part. The final answer is the text
/// after the closing delimiter with leading whitespace trimmed.
pub fn parse_completion(raw: &str, open_delim: &str, close_delim: &str) -> Result<Completion> {
    assert!(
        !open_delim.is_empty() && !close_delim.is_empty(),
        "delimiters must be non-empty"
    );
    let Some(open_at) = raw.find(open_delim) else {
        // No reasoning block; the close delimiter alone (a block the
        // prompt opened, not the completion) does not start one.
        return Ok(Completion {
            raw: raw.to_string(),
            reasoning: None,
            final_text: raw.to_string(),
        });
    };
    let after_open = open_at + open_delim.len();
    let Some(close_rel) = raw[after_open..].find(close_delim) else {
        return Err(Error::MalformedCompletion {
            raw: raw.to_string(),
        });
    };
    let close_at = after_open + close_rel;
    let reasoning = raw[after_open..close_at].to_string();
    let final_text = raw[close_at + close_delim.len()..]
        .trim_start()
        .to_string();
    Ok(Completion {
        raw: raw.to_string(),
        reasoning: Some(reasoning),
        final_text,
    })
}

/// True iff reasoning is present and holds at least `min_chars`
/// non-whitespace characters. Absent or empty reasoning is never
/// substantive, regardless of the final answer.
pub fn has_substantive_reasoning(completion: &Completion, min_chars: usize) -> bool {
    match &completion.reasoning {
        None => false,
        Some(r) => r.chars().filter(|c| !c.is_whitespace()).count() >= min_chars,
    }
}
