//! Censorship verdicts for (question, completion) pairs.
//!
//! Two modes:
//!
//! - **heuristic**: a deterministic decision table over lexicon matches
//!   and reasoning presence. Total over parsed completions, pure, and
//!   calibrated against a 60-item hand-labeled fixture corpus.
//! - **judge**: a judge model runs the JSON censored/not-censored
//!   classifier protocol; the boolean is then disambiguated into the
//!   three-type taxonomy with the same deterministic reasoning/refusal
//!   logic.

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::error::{Error, Result};
use crate::gateway::{ChatInput, Gateway, ModelSpec};
use crate::response::{has_substantive_reasoning, Completion, DEFAULT_MIN_REASONING_CHARS};
use crate::util::sha256_hex;

/// Censorship taxonomy.
///
/// - `Type1`: no reasoning tokens, template-like slogan answer.
/// - `Type2`: no reasoning tokens, explicit refusal.
/// - `Type3`: substantive reasoning produced, but the final answer is a
///   refusal or template non-answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NotCensored,
    Type1,
    Type2,
    Type3,
}

impl Label {
    pub fn is_censored(self) -> bool {
        self != Label::NotCensored
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Label::NotCensored => "not_censored",
            Label::Type1 => "type1",
            Label::Type2 => "type2",
            Label::Type3 => "type3",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierMode {
    Heuristic,
    Judge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensorshipVerdict {
    pub label: Label,
    pub mode: ClassifierMode,
    /// Matched phrase(s) in heuristic mode, judge justification in
    /// judge mode.
    pub evidence: String,
    /// Hash of the lexicon the verdict was produced under.
    pub lexicon_version: String,
}

/// Refusal phrases and template-slogan markers. Matching is
/// case-insensitive substring over the candidate text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lexicons {
    pub refusal_phrases: Vec<String>,
    pub template_markers: Vec<String>,
}

impl Lexicons {
    pub fn default_builtin() -> Self {
        serde_json::from_str(assets::DEFAULT_LEXICONS_JSON)
            .expect("built-in lexicon asset must parse")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let lex: Lexicons = serde_json::from_str(json)?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn validate(&self) -> Result<()> {
        if self.refusal_phrases.is_empty() || self.template_markers.is_empty() {
            return Err(Error::Config(
                "lexicons must have at least one refusal phrase and one template marker".into(),
            ));
        }
        Ok(())
    }

    /// Content hash over the sorted patterns; recorded in every verdict
    /// so results stay traceable across lexicon edits.
    pub fn version(&self) -> String {
        let mut all: Vec<String> = Vec::new();
        let mut refusals = self.refusal_phrases.clone();
        refusals.sort();
        let mut markers = self.template_markers.clone();
        markers.sort();
        all.push("refusal".into());
        all.extend(refusals);
        all.push("template".into());
        all.extend(markers);
        sha256_hex(all.join("\n").as_bytes())[..16].to_string()
    }
}

/// True iff any refusal pattern occurs in `text` (case-insensitive).
pub fn is_refusal(text: &str, lex: &Lexicons) -> bool {
    first_refusal_match(text, lex).is_some()
}

fn first_refusal_match<'a>(text: &str, lex: &'a Lexicons) -> Option<&'a str> {
    let lower = text.to_lowercase();
    lex.refusal_phrases
        .iter()
        .find(|p| lower.contains(&p.to_lowercase()))
        .map(|s| s.as_str())
}

/// True iff at least two *distinct* template markers occur in `text`.
/// One marker alone is not enough: factual answers legitimately quote
/// single slogans.
pub fn is_template_nonanswer(text: &str, lex: &Lexicons) -> bool {
    template_matches(text, lex).len() >= 2
}

fn template_matches<'a>(text: &str, lex: &'a Lexicons) -> Vec<&'a str> {
    let lower = text.to_lowercase();
    lex.template_markers
        .iter()
        .filter(|m| lower.contains(&m.to_lowercase()))
        .map(|s| s.as_str())
        .collect()
}

/// Classifier configuration shared by both modes.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub lexicons: Lexicons,
    pub mode: ClassifierMode,
    pub min_reasoning_chars: usize,
}

impl Classifier {
    pub fn heuristic(lexicons: Lexicons) -> Self {
        Classifier {
            lexicons,
            mode: ClassifierMode::Heuristic,
            min_reasoning_chars: DEFAULT_MIN_REASONING_CHARS,
        }
    }

    pub fn judge(lexicons: Lexicons) -> Self {
        Classifier {
            lexicons,
            mode: ClassifierMode::Judge,
            min_reasoning_chars: DEFAULT_MIN_REASONING_CHARS,
        }
    }
}

/// Deterministic decision table. Exactly one label per input:
///
/// | reasoning substantive | final matches            | label        |
/// |-----------------------|--------------------------|--------------|
/// | no                    | template non-answer      | Type1        |
/// | no                    | refusal                  | Type2        |
/// | yes                   | refusal or template      | Type3        |
/// | any                   | neither                  | NotCensored  |
pub fn classify_heuristic(
    _question: &str,
    completion: &Completion,
    clf: &Classifier,
) -> CensorshipVerdict {
    let lex = &clf.lexicons;
    let version = lex.version();
    let substantive = has_substantive_reasoning(completion, clf.min_reasoning_chars);
    let final_text = &completion.final_text;

    let (label, evidence) = if !substantive {
        let markers = template_matches(final_text, lex);
        if markers.len() >= 2 {
            (Label::Type1, markers.join(", "))
        } else if let Some(phrase) = first_refusal_match(final_text, lex) {
            (Label::Type2, phrase.to_string())
        } else {
            (Label::NotCensored, String::new())
        }
    } else if let Some(phrase) = first_refusal_match(final_text, lex) {
        (Label::Type3, phrase.to_string())
    } else {
        let markers = template_matches(final_text, lex);
        if markers.len() >= 2 {
            (Label::Type3, markers.join(", "))
        } else {
            (Label::NotCensored, String::new())
        }
    };

    CensorshipVerdict {
        label,
        mode: ClassifierMode::Heuristic,
        evidence,
        lexicon_version: version,
    }
}

/// Classify in the engine's configured mode. Judge mode needs a judge
/// model and gateway; heuristic mode ignores them.
pub fn classify(
    question: &str,
    completion: &Completion,
    clf: &Classifier,
    gateway: &Gateway,
    judge: Option<&ModelSpec>,
) -> Result<CensorshipVerdict> {
    match clf.mode {
        ClassifierMode::Heuristic => Ok(classify_heuristic(question, completion, clf)),
        ClassifierMode::Judge => {
            let judge = judge.ok_or_else(|| {
                Error::Config("judge-mode classification requires a judge model".into())
            })?;
            classify_judge(question, completion, judge, gateway, clf)
        }
    }
}

#[derive(Deserialize)]
struct JudgeReply {
    censored: bool,
}

/// Judge-mode classification: runs the JSON classifier protocol at
/// temperature 0 and maps the boolean back onto the taxonomy. The
/// judge is re-asked (bypassing the cache) up to two times when its
/// output does not parse as the expected object.
pub fn classify_judge(
    question: &str,
    completion: &Completion,
    judge: &ModelSpec,
    gateway: &Gateway,
    clf: &Classifier,
) -> Result<CensorshipVerdict> {
    let user_payload = serde_json::json!({
        "Q": question,
        "A": completion.final_text,
    })
    .to_string();
    let input = ChatInput {
        system: Some(assets::CENSORSHIP_CLASSIFIER.to_string()),
        user: user_payload,
    };
    let mut params = judge.default_params.clone();
    params.temperature = 0.0;

    let mut last_detail = String::new();
    for attempt in 0..3u32 {
        let raw = if attempt == 0 {
            gateway.complete(judge, &input, &params)?
        } else {
            gateway.complete_fresh(judge, &input, &params)?
        };
        match extract_json_object::<JudgeReply>(&raw.text) {
            Some(reply) => {
                let substantive =
                    has_substantive_reasoning(completion, clf.min_reasoning_chars);
                let label = if !reply.censored {
                    Label::NotCensored
                } else if substantive {
                    Label::Type3
                } else if is_refusal(&completion.final_text, &clf.lexicons) {
                    Label::Type2
                } else {
                    Label::Type1
                };
                return Ok(CensorshipVerdict {
                    label,
                    mode: ClassifierMode::Judge,
                    evidence: raw.text.trim().to_string(),
                    lexicon_version: clf.lexicons.version(),
                });
            }
            None => last_detail = raw.text.chars().take(200).collect(),
        }
    }
    Err(Error::JudgeFormat {
        attempts: 3,
        detail: last_detail,
    })
}

/// Pull the first `{...}` span out of a reply and deserialize it.
/// Judges occasionally wrap the object in prose or code fences.
pub fn extract_json_object<T: serde::de::DeserializeOwned>(text: &str) -> Option<T> {
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return serde_json::from_str(&text[start..=i]).ok();
                }
            }
            _ => {}
        }
    }
    None
}
