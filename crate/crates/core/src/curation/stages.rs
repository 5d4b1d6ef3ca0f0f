//! The individual pipeline stages.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::assets;
use crate::classifier::{classify, is_refusal, Classifier, Label, Lexicons};
use crate::error::{Error, Result};
use crate::gateway::{ChatInput, Gateway, GenerationParams, ModelSpec};
use crate::journal::JournalWriter;
use crate::response::parse_completion;
use crate::util::{parallel_map, token_count};

use super::{CategorySet, CuratedRecord, Prompt, Source, StageReport};

/// Near-duplicate similarity threshold over token 3-shingles
/// (overlap coefficient: |A∩B| / min(|A|,|B|)).
pub const NEAR_DUP_THRESHOLD: f64 = 0.9;

pub const UNCATEGORIZED: &str = "uncategorized";

/// Records a judged stage could not classify; preserved for review.
#[derive(Debug, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub stage: String,
    pub prompt: Prompt,
    pub reason: String,
}

// ---------------------------------------------------------------------------
// Length filtering
// ---------------------------------------------------------------------------

/// Inclusive token bounds per source. Tokens are whitespace-delimited
/// units. LLM-generated prompts have no upper bound.
#[derive(Debug, Clone)]
pub struct LengthBounds {
    pub min_tokens: usize,
    pub max_tokens_twitter: usize,
    pub max_tokens_reddit: usize,
    pub max_tokens_llm: Option<usize>,
}

impl Default for LengthBounds {
    fn default() -> Self {
        LengthBounds {
            min_tokens: 5,
            max_tokens_twitter: 90,
            max_tokens_reddit: 300,
            max_tokens_llm: None,
        }
    }
}

impl LengthBounds {
    fn max_for(&self, source: Source) -> usize {
        match source {
            Source::Twitter => self.max_tokens_twitter,
            Source::Reddit => self.max_tokens_reddit,
            Source::Llm => self.max_tokens_llm.unwrap_or(usize::MAX),
        }
    }
}

pub fn filter_length(prompts: Vec<Prompt>, bounds: &LengthBounds) -> (Vec<Prompt>, StageReport) {
    let in_count = prompts.len();
    let mut kept = Vec::with_capacity(in_count);
    let mut removed = Vec::new();
    for p in prompts {
        let n = token_count(&p.text);
        if n >= bounds.min_tokens && n <= bounds.max_for(p.source) {
            kept.push(p);
        } else {
            removed.push(p.id);
        }
    }
    let report = StageReport::new("length", in_count, removed);
    (kept, report)
}

// ---------------------------------------------------------------------------
// Keyword filtering
// ---------------------------------------------------------------------------

/// Keyword matcher: case-insensitive, word-boundary aware, so "CCP"
/// never fires inside "occupy". Keywords should begin and end with
/// word characters.
#[derive(Debug, Clone)]
pub struct KeywordList {
    keywords: Vec<String>,
    matcher: Regex,
}

impl KeywordList {
    pub fn new(keywords: Vec<String>) -> Result<Self> {
        if keywords.is_empty() {
            return Err(Error::Config("keyword list must be non-empty".into()));
        }
        let pattern = format!(
            r"(?i)\b(?:{})\b",
            keywords
                .iter()
                .map(|k| regex::escape(k))
                .collect::<Vec<_>>()
                .join("|")
        );
        let matcher = Regex::new(&pattern)
            .map_err(|e| Error::Config(format!("keyword pattern failed to compile: {e}")))?;
        Ok(KeywordList { keywords, matcher })
    }

    /// Parse a keyword file: one entry per line, '#' lines ignored.
    pub fn from_lines(text: &str) -> Result<Self> {
        let keywords: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        Self::new(keywords)
    }

    pub fn default_builtin() -> Self {
        Self::from_lines(assets::DEFAULT_KEYWORDS).expect("built-in keyword asset must parse")
    }

    pub fn matches(&self, text: &str) -> bool {
        self.matcher.is_match(text)
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }
}

pub fn filter_keywords(prompts: Vec<Prompt>, keywords: &KeywordList) -> (Vec<Prompt>, StageReport) {
    let in_count = prompts.len();
    let mut kept = Vec::with_capacity(in_count);
    let mut removed = Vec::new();
    for p in prompts {
        if keywords.matches(&p.text) {
            kept.push(p);
        } else {
            removed.push(p.id);
        }
    }
    let report = StageReport::new("keywords", in_count, removed);
    (kept, report)
}

// ---------------------------------------------------------------------------
// Judged yes/no filtering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JudgedCriterion {
    ChinaRelated,
    EnglishLanguage,
    IsQuestion,
    IsClear,
}

impl JudgedCriterion {
    pub fn stage_name(self) -> &'static str {
        match self {
            JudgedCriterion::ChinaRelated => "china_related",
            JudgedCriterion::EnglishLanguage => "language",
            JudgedCriterion::IsQuestion => "question",
            JudgedCriterion::IsClear => "clarity",
        }
    }

    fn template(self) -> &'static str {
        match self {
            JudgedCriterion::ChinaRelated => assets::FILTER_CHINA_RELATED,
            JudgedCriterion::EnglishLanguage => assets::FILTER_ENGLISH,
            JudgedCriterion::IsQuestion => assets::FILTER_QUESTION,
            JudgedCriterion::IsClear => assets::FILTER_CLARITY,
        }
    }
}

fn parse_yes_no(text: &str) -> Option<bool> {
    let t = text.trim().trim_end_matches(['.', '!']).trim();
    match t.to_ascii_uppercase().as_str() {
        "YES" => Some(true),
        "NO" => Some(false),
        _ => None,
    }
}

fn judge_params(judge: &ModelSpec) -> GenerationParams {
    GenerationParams {
        temperature: 0.0,
        ..judge.default_params.clone()
    }
}

enum Fate {
    Retain,
    Remove,
    NeedsReview(String),
}

/// Keep prompts the judge answers YES for. Prompts with non-conforming
/// judge output (or exhausted retries) go to the needs-review sidecar
/// and leave the retained set without being lost.
pub fn judged_filter(
    prompts: Vec<Prompt>,
    criterion: JudgedCriterion,
    gateway: &Gateway,
    judge: &ModelSpec,
    concurrency: usize,
    sidecar: &JournalWriter,
) -> Result<(Vec<Prompt>, StageReport)> {
    let params = judge_params(judge);
    let fates = parallel_map(&prompts, concurrency.max(1), |_, p| {
        let input = ChatInput::user(assets::fill(criterion.template(), &[("prompt", &p.text)]));
        match gateway.complete(judge, &input, &params) {
            Err(e) => Fate::NeedsReview(e.to_string()),
            Ok(raw) => match parse_yes_no(&raw.text) {
                Some(true) => Fate::Retain,
                Some(false) => Fate::Remove,
                None => Fate::NeedsReview(format!(
                    "non-conforming judge output: {}",
                    raw.text.chars().take(120).collect::<String>()
                )),
            },
        }
    });
    collect_fates(prompts, fates, criterion.stage_name(), sidecar)
}

fn collect_fates(
    prompts: Vec<Prompt>,
    fates: Vec<Fate>,
    stage_name: &str,
    sidecar: &JournalWriter,
) -> Result<(Vec<Prompt>, StageReport)> {
    let in_count = prompts.len();
    let mut kept = Vec::with_capacity(in_count);
    let mut removed = Vec::new();
    for (p, fate) in prompts.into_iter().zip(fates) {
        match fate {
            Fate::Retain => kept.push(p),
            Fate::Remove => removed.push(p.id),
            Fate::NeedsReview(reason) => {
                removed.push(p.id.clone());
                sidecar.write_line(&SidecarEntry {
                    stage: stage_name.to_string(),
                    prompt: p,
                    reason,
                })?;
            }
        }
    }
    let report = StageReport::new(stage_name, in_count, removed);
    Ok((kept, report))
}

// ---------------------------------------------------------------------------
// Link stripping
// ---------------------------------------------------------------------------

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap())
}

/// Remove URL spans in place. Prompts keep their ids even when the
/// text is rewritten; prompts left empty are removed.
pub fn strip_links(prompts: Vec<Prompt>) -> (Vec<Prompt>, StageReport) {
    let in_count = prompts.len();
    let mut kept = Vec::with_capacity(in_count);
    let mut removed = Vec::new();
    for mut p in prompts {
        if url_regex().is_match(&p.text) {
            let stripped = url_regex().replace_all(&p.text, "");
            let cleaned = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
            if cleaned.is_empty() {
                removed.push(p.id);
                continue;
            }
            p.text = cleaned;
        }
        kept.push(p);
    }
    let report = StageReport::new("links", in_count, removed);
    (kept, report)
}

// ---------------------------------------------------------------------------
// Deduplication
// ---------------------------------------------------------------------------

fn shingle_hash(window: &[&str]) -> u64 {
    // FNV-1a over the joined window.
    let mut h: u64 = 0xcbf29ce484222325;
    for (i, token) in window.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(0x100000001b3);
        }
        for b in token.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// Token 3-shingle set over lowercased whitespace tokens. Texts with
/// fewer than three tokens fall back to a single whole-text shingle.
pub(crate) fn shingle_set(text: &str) -> HashSet<u64> {
    let tokens: Vec<String> = text
        .split_whitespace()
        .map(|t| t.to_lowercase())
        .collect();
    if tokens.is_empty() {
        return HashSet::new();
    }
    let k = tokens.len().min(3);
    let refs: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
    refs.windows(k).map(shingle_hash).collect()
}

pub(crate) fn overlap_similarity(a: &HashSet<u64>, b: &HashSet<u64>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / a.len().min(b.len()) as f64
}

/// Remove exact duplicates (by normalized-text id) and near-duplicates
/// (shingle overlap >= [`NEAR_DUP_THRESHOLD`]), keeping the earliest
/// occurrence. Idempotent.
pub fn dedup(prompts: Vec<Prompt>) -> (Vec<Prompt>, StageReport) {
    let in_count = prompts.len();
    let mut kept: Vec<Prompt> = Vec::new();
    let mut kept_shingles: Vec<HashSet<u64>> = Vec::new();
    let mut index: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut removed = Vec::new();

    for p in prompts {
        if !seen_ids.insert(p.id.clone()) {
            removed.push(p.id);
            continue;
        }
        let sh = shingle_set(&p.text);
        let mut candidates: HashSet<usize> = HashSet::new();
        for s in &sh {
            if let Some(hits) = index.get(s) {
                candidates.extend(hits);
            }
        }
        let near_dup = candidates
            .iter()
            .any(|&c| overlap_similarity(&sh, &kept_shingles[c]) >= NEAR_DUP_THRESHOLD);
        if near_dup {
            removed.push(p.id);
            continue;
        }
        let slot = kept.len();
        for &s in &sh {
            index.entry(s).or_default().push(slot);
        }
        kept_shingles.push(sh);
        kept.push(p);
    }
    let report = StageReport::new("dedup", in_count, removed);
    (kept, report)
}

// ---------------------------------------------------------------------------
// Categorization
// ---------------------------------------------------------------------------

/// Assign each prompt one category from the closed list. The judge is
/// re-asked once on a non-list answer; a second miss lands the prompt
/// in "uncategorized". Prompts already categorized are left alone
/// unless `recategorize` is set. Removes nothing.
pub fn categorize(
    prompts: Vec<Prompt>,
    categories: &CategorySet,
    gateway: &Gateway,
    judge: &ModelSpec,
    concurrency: usize,
    recategorize: bool,
) -> Result<(Vec<Prompt>, StageReport)> {
    categories.validate()?;
    let names = categories.names();
    let listing = names.join("\n");
    let params = judge_params(judge);
    let in_count = prompts.len();

    let assigned = parallel_map(&prompts, concurrency.max(1), |_, p| {
        if p.category.is_some() && !recategorize {
            return p.category.clone();
        }
        let input = ChatInput::user(assets::fill(
            assets::CATEGORIZE,
            &[("categories", listing.as_str()), ("prompt", &p.text)],
        ));
        let mut answer = None;
        for attempt in 0..2 {
            let result = if attempt == 0 {
                gateway.complete(judge, &input, &params)
            } else {
                gateway.complete_fresh(judge, &input, &params)
            };
            if let Ok(raw) = result {
                let reply = raw.text.trim();
                if let Some(hit) = names.iter().find(|n| n.eq_ignore_ascii_case(reply)) {
                    answer = Some(hit.to_string());
                    break;
                }
            }
        }
        Some(answer.unwrap_or_else(|| UNCATEGORIZED.to_string()))
    });

    let kept: Vec<Prompt> = prompts
        .into_iter()
        .zip(assigned)
        .map(|(mut p, category)| {
            p.category = category;
            p
        })
        .collect();
    let report = StageReport::new("categorize", in_count, Vec::new());
    Ok((kept, report))
}

// ---------------------------------------------------------------------------
// Global / local censorship checks
// ---------------------------------------------------------------------------

/// Remove prompts refused by *any* reference-pool model: those are
/// globally censored, not locally. ANY-semantics makes retention
/// monotonically shrink as the pool grows.
pub fn check_global_censorship(
    prompts: Vec<Prompt>,
    reference_pool: &[ModelSpec],
    gateway: &Gateway,
    lexicons: &Lexicons,
    concurrency: usize,
    sidecar: &JournalWriter,
) -> Result<(Vec<Prompt>, StageReport)> {
    if reference_pool.is_empty() {
        return Err(Error::Config("reference pool must be non-empty".into()));
    }
    let fates = parallel_map(&prompts, concurrency.max(1), |_, p| {
        for model in reference_pool {
            let input = ChatInput::user(p.text.clone());
            match gateway.complete(model, &input, &model.default_params) {
                Err(e) => return Fate::NeedsReview(format!("{}: {e}", model.id)),
                Ok(raw) => {
                    let completion = match parse_completion(&raw.text, "<think>", "</think>") {
                        Ok(c) => c,
                        Err(e) => {
                            return Fate::NeedsReview(format!("{}: {e}", model.id));
                        }
                    };
                    if is_refusal(&completion.final_text, lexicons) {
                        return Fate::Remove;
                    }
                }
            }
        }
        Fate::Retain
    });
    collect_fates(prompts, fates, "global", sidecar)
}

/// Keep prompts whose target completion classifies as Type 1 or
/// Type 2; the qualifying verdict and completion are stored on the
/// record.
#[allow(clippy::too_many_arguments)]
pub fn check_local_censorship(
    prompts: Vec<Prompt>,
    target: &ModelSpec,
    gateway: &Gateway,
    classifier: &Classifier,
    verdict_judge: Option<&ModelSpec>,
    concurrency: usize,
    sidecar: &JournalWriter,
) -> Result<(Vec<CuratedRecord>, StageReport)> {
    enum LocalFate {
        Censored(CuratedRecord),
        NotCensored,
        NeedsReview(String),
    }

    let fates = parallel_map(&prompts, concurrency.max(1), |_, p| {
        let input = ChatInput::user(p.text.clone());
        let raw = match gateway.complete(target, &input, &target.default_params) {
            Ok(raw) => raw,
            Err(e) => return LocalFate::NeedsReview(e.to_string()),
        };
        let completion = match parse_completion(&raw.text, "<think>", "</think>") {
            Ok(c) => c,
            Err(e) => return LocalFate::NeedsReview(e.to_string()),
        };
        let verdict = match classify(&p.text, &completion, classifier, gateway, verdict_judge) {
            Ok(v) => v,
            Err(e) => return LocalFate::NeedsReview(e.to_string()),
        };
        match verdict.label {
            Label::Type1 | Label::Type2 => {
                LocalFate::Censored(CuratedRecord::new(p.clone(), verdict, raw.text))
            }
            _ => LocalFate::NotCensored,
        }
    });

    let in_count = prompts.len();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (p, fate) in prompts.into_iter().zip(fates) {
        match fate {
            LocalFate::Censored(record) => kept.push(record),
            LocalFate::NotCensored => removed.push(p.id),
            LocalFate::NeedsReview(reason) => {
                removed.push(p.id.clone());
                sidecar.write_line(&SidecarEntry {
                    stage: "local".to_string(),
                    prompt: p,
                    reason,
                })?;
            }
        }
    }
    let report = StageReport::new("local", in_count, removed);
    Ok((kept, report))
}
