//! Censorship audits over prompt datasets: plain QA, per-category
//! sensitivity sweeps, multilingual audits via translation, and
//! task-wrapped (summarize/translate) audits.
//!
//! Every audited prompt becomes one journaled [`AuditRecord`];
//! journals are append-only and keyed so an interrupted run resumes
//! where it stopped. Records carry enough prompt metadata (text,
//! category, source) to regroup them without the original dataset.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::classifier::{classify, CensorshipVerdict, Classifier, ClassifierMode, Label};
use crate::curation::Prompt;
use crate::error::{Error, Result};
use crate::gateway::{ChatInput, Gateway, GenerationParams, ModelSpec};
use crate::journal::{read_journal_if_exists, JournalWriter};
use crate::response::parse_completion;
use crate::response::Completion;
use crate::util::{parallel_map, text_id};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    Qa,
    Summarize,
    Translate,
}

impl std::fmt::Display for TaskMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskMode::Qa => f.write_str("qa"),
            TaskMode::Summarize => f.write_str("summarize"),
            TaskMode::Translate => f.write_str("translate"),
        }
    }
}

/// The unit of all downstream statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    pub prompt_id: String,
    pub prompt_text: String,
    pub model_id: String,
    pub params: GenerationParams,
    pub completion: Completion,
    pub verdict: CensorshipVerdict,
    pub language: String,
    pub task_mode: TaskMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// One journal line: a finished record or a per-slot error (errors are
/// retried on resume).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum AuditJournalLine {
    Record(Box<AuditRecord>),
    Error {
        prompt_id: String,
        language: String,
        task_mode: TaskMode,
        error: String,
    },
}

/// Aggregated censorship rates for one grouping key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub key: String,
    pub total: u64,
    pub censored: u64,
    pub type1: u64,
    pub type2: u64,
    pub type3: u64,
}

impl RateRow {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.censored as f64 / self.total as f64
        }
    }

    /// `type1 + type2 + type3 = censored` and `censored <= total`.
    pub fn counts_consistent(&self) -> bool {
        self.type1 + self.type2 + self.type3 == self.censored && self.censored <= self.total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Category,
    Language,
    Source,
    Model,
    Task,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Category => "category",
            GroupKey::Language => "language",
            GroupKey::Source => "source",
            GroupKey::Model => "model",
            GroupKey::Task => "task",
        }
    }

    fn of(self, record: &AuditRecord) -> String {
        match self {
            GroupKey::Category => record
                .category
                .clone()
                .unwrap_or_else(|| "uncategorized".to_string()),
            GroupKey::Language => record.language.clone(),
            GroupKey::Source => record
                .source
                .clone()
                .unwrap_or_else(|| "unknown".to_string()),
            GroupKey::Model => record.model_id.clone(),
            GroupKey::Task => record.task_mode.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateTable {
    pub group_by: String,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn from_records(records: &[AuditRecord], group_by: GroupKey) -> Self {
        let mut by_key: std::collections::BTreeMap<String, RateRow> =
            std::collections::BTreeMap::new();
        for r in records {
            let key = group_by.of(r);
            let row = by_key.entry(key.clone()).or_insert_with(|| RateRow {
                key,
                total: 0,
                censored: 0,
                type1: 0,
                type2: 0,
                type3: 0,
            });
            row.total += 1;
            match r.verdict.label {
                Label::Type1 => {
                    row.censored += 1;
                    row.type1 += 1;
                }
                Label::Type2 => {
                    row.censored += 1;
                    row.type2 += 1;
                }
                Label::Type3 => {
                    row.censored += 1;
                    row.type3 += 1;
                }
                Label::NotCensored => {}
            }
        }
        RateTable {
            group_by: group_by.name().to_string(),
            rows: by_key.into_values().collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},total,censored,rate,type1,type2,type3\n", self.group_by);
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.4},{},{},{}\n",
                crate::report::csv_escape(&row.key),
                row.total,
                row.censored,
                row.rate(),
                row.type1,
                row.type2,
                row.type3
            ));
        }
        out
    }
}

/// Shared plumbing for all audit flavors.
pub struct AuditContext<'a> {
    pub gateway: &'a Gateway,
    pub classifier: &'a Classifier,
    /// Judge used when verdicts run in judge mode.
    pub verdict_judge: Option<&'a ModelSpec>,
    pub concurrency: usize,
}

struct Slot {
    prompt_id: String,
    /// Text actually sent to the target.
    sent_text: String,
    /// Question used for classification context (the original text).
    question: String,
    language: String,
    task_mode: TaskMode,
    category: Option<String>,
    source: Option<String>,
}

fn resume_key(prompt_id: &str, model_id: &str, language: &str, task: TaskMode) -> String {
    format!("{prompt_id}\0{model_id}\0{language}\0{task}")
}

/// Run the audit slots against the target, journaling each result as
/// it lands. Slots already present in the journal (from an interrupted
/// run) are not re-queried; error lines are retried.
fn run_slots(
    slots: Vec<Slot>,
    target: &ModelSpec,
    params: &GenerationParams,
    ctx: &AuditContext,
    journal_path: &Path,
) -> Result<Vec<AuditRecord>> {
    let existing = read_journal_if_exists::<AuditJournalLine>(journal_path)?;
    let mut records: Vec<AuditRecord> = Vec::new();
    let mut done: HashSet<String> = HashSet::new();
    for line in existing.entries {
        if let AuditJournalLine::Record(r) = line {
            done.insert(resume_key(&r.prompt_id, &r.model_id, &r.language, r.task_mode));
            records.push(*r);
        }
    }

    let pending: Vec<Slot> = slots
        .into_iter()
        .filter(|s| !done.contains(&resume_key(&s.prompt_id, &target.id, &s.language, s.task_mode)))
        .collect();

    let writer = JournalWriter::append_to(journal_path)?;
    let use_judge = ctx.classifier.mode == ClassifierMode::Judge;
    if use_judge && ctx.verdict_judge.is_none() {
        return Err(Error::Config(
            "judge-mode audits require a judge model".into(),
        ));
    }

    let outcomes = parallel_map(&pending, ctx.concurrency.max(1), |_, slot| {
        let line = match audit_one(slot, target, params, ctx) {
            Ok(record) => AuditJournalLine::Record(Box::new(record)),
            Err(e) => AuditJournalLine::Error {
                prompt_id: slot.prompt_id.clone(),
                language: slot.language.clone(),
                task_mode: slot.task_mode,
                error: e.to_string(),
            },
        };
        let write_result = writer.write_line(&line);
        (line, write_result)
    });

    for (line, write_result) in outcomes {
        write_result?;
        if let AuditJournalLine::Record(r) = line {
            records.push(*r);
        }
    }
    Ok(records)
}

fn audit_one(
    slot: &Slot,
    target: &ModelSpec,
    params: &GenerationParams,
    ctx: &AuditContext,
) -> Result<AuditRecord> {
    let input = ChatInput::user(slot.sent_text.clone());
    let raw = ctx.gateway.complete(target, &input, params)?;
    let completion = parse_completion(&raw.text, "<think>", "</think>")?;
    let verdict = classify(
        &slot.question,
        &completion,
        ctx.classifier,
        ctx.gateway,
        ctx.verdict_judge,
    )?;
    Ok(AuditRecord {
        prompt_id: slot.prompt_id.clone(),
        prompt_text: slot.sent_text.clone(),
        model_id: target.id.clone(),
        params: params.clone(),
        completion,
        verdict,
        language: slot.language.clone(),
        task_mode: slot.task_mode,
        category: slot.category.clone(),
        source: slot.source.clone(),
    })
}

/// Plain QA audit: one record per dataset prompt.
pub fn audit(
    dataset: &[Prompt],
    target: &ModelSpec,
    ctx: &AuditContext,
    params: Option<&GenerationParams>,
    journal_path: &Path,
) -> Result<Vec<AuditRecord>> {
    let params = params.cloned().unwrap_or_else(|| target.default_params.clone());
    let slots: Vec<Slot> = dataset
        .iter()
        .map(|p| Slot {
            prompt_id: p.id.clone(),
            sent_text: p.text.clone(),
            question: p.text.clone(),
            language: "english".to_string(),
            task_mode: TaskMode::Qa,
            category: p.category.clone(),
            source: Some(p.source.to_string()),
        })
        .collect();
    run_slots(slots, target, &params, ctx, journal_path)
}

/// Generate `n_per_category` questions per category, audit them, and
/// tabulate per-category censorship rates.
pub fn category_sensitivity(
    categories: &crate::curation::CategorySet,
    n_per_category: usize,
    generator: &ModelSpec,
    target: &ModelSpec,
    ctx: &AuditContext,
    journal_path: &Path,
) -> Result<(RateTable, Vec<String>)> {
    assert!(n_per_category >= 1, "n_per_category must be >= 1");
    categories.validate()?;
    let mut warnings = Vec::new();
    let mut prompts: Vec<Prompt> = Vec::new();
    for entry in &categories.categories {
        let questions = crate::curation::generate::generate_questions(
            &entry.name,
            n_per_category,
            generator,
            ctx.gateway,
            &mut warnings,
        )?;
        for q in questions {
            let mut p = Prompt::new(q, crate::curation::Source::Llm);
            p.category = Some(entry.name.clone());
            p.created_from = Some("generated".to_string());
            prompts.push(p);
        }
    }
    let records = audit(&prompts, target, ctx, None, journal_path)?;
    Ok((RateTable::from_records(&records, GroupKey::Category), warnings))
}

fn translation_template(language: &str) -> String {
    match language.to_lowercase().as_str() {
        "chinese" => assets::TRANSLATE_CHINESE.to_string(),
        "farsi" => assets::TRANSLATE_FARSI.to_string(),
        "korean" => assets::TRANSLATE_KOREAN.to_string(),
        other => assets::fill(assets::TRANSLATE_GENERIC, &[("language", other)]),
    }
}

/// Translators are told to return the translation alone; anything that
/// opens like prose or comes back empty counts as commentary.
fn looks_like_commentary(text: &str) -> bool {
    let t = text.trim();
    if t.is_empty() {
        return true;
    }
    let lower = t.to_lowercase();
    ["sure", "here is", "here's", "certainly", "translation:", "the translation"]
        .iter()
        .any(|m| lower.starts_with(m))
}

fn translate_one(
    text: &str,
    language: &str,
    translator: &ModelSpec,
    gateway: &Gateway,
) -> Result<String> {
    let input = ChatInput {
        system: Some(translation_template(language)),
        user: text.to_string(),
    };
    let params = GenerationParams {
        temperature: 0.0,
        ..translator.default_params.clone()
    };
    for attempt in 0..2 {
        let raw = if attempt == 0 {
            gateway.complete(translator, &input, &params)?
        } else {
            gateway.complete_fresh(translator, &input, &params)?
        };
        if !looks_like_commentary(&raw.text) {
            return Ok(raw.text.trim().to_string());
        }
    }
    Err(Error::JudgeFormat {
        attempts: 2,
        detail: format!("translator kept returning commentary for language '{language}'"),
    })
}

/// Translate the dataset into each language, audit the translations,
/// and tabulate per-language rates. Non-English verdicts always run in
/// judge mode (the heuristic lexicons are English-only); the language
/// "english" is the identity and reproduces the base audit.
pub fn multilingual_audit(
    dataset: &[Prompt],
    languages: &[String],
    translator: &ModelSpec,
    target: &ModelSpec,
    ctx: &AuditContext,
    journal_dir: &Path,
) -> Result<RateTable> {
    let mut all_records: Vec<AuditRecord> = Vec::new();
    for language in languages {
        let is_identity = language.eq_ignore_ascii_case("english");
        let judge_ctx;
        let judge_classifier;
        let lang_ctx: &AuditContext = if is_identity {
            ctx
        } else {
            if ctx.verdict_judge.is_none() {
                return Err(Error::Config(
                    "multilingual audits require a judge model for verdicts".into(),
                ));
            }
            judge_classifier = Classifier {
                mode: ClassifierMode::Judge,
                ..ctx.classifier.clone()
            };
            judge_ctx = AuditContext {
                gateway: ctx.gateway,
                classifier: &judge_classifier,
                verdict_judge: ctx.verdict_judge,
                concurrency: ctx.concurrency,
            };
            &judge_ctx
        };

        let journal_path = journal_dir.join(format!("audit_{}.jsonl", language.to_lowercase()));
        let sidecar = JournalWriter::append_to(
            &journal_dir.join(format!("needs_review_{}.jsonl", language.to_lowercase())),
        )?;

        let mut slots: Vec<Slot> = Vec::new();
        if is_identity {
            for p in dataset {
                slots.push(Slot {
                    prompt_id: p.id.clone(),
                    sent_text: p.text.clone(),
                    question: p.text.clone(),
                    language: language.to_lowercase(),
                    task_mode: TaskMode::Qa,
                    category: p.category.clone(),
                    source: Some(p.source.to_string()),
                });
            }
        } else {
            let translations = parallel_map(dataset, ctx.concurrency.max(1), |_, p| {
                translate_one(&p.text, language, translator, ctx.gateway)
            });
            for (p, translated) in dataset.iter().zip(translations) {
                match translated {
                    Ok(text) => slots.push(Slot {
                        prompt_id: p.id.clone(),
                        sent_text: text,
                        question: p.text.clone(),
                        language: language.to_lowercase(),
                        task_mode: TaskMode::Qa,
                        category: p.category.clone(),
                        source: Some(p.source.to_string()),
                    }),
                    Err(e) => {
                        sidecar.write_line(&crate::curation::SidecarEntry {
                            stage: "translation".to_string(),
                            prompt: p.clone(),
                            reason: e.to_string(),
                        })?;
                    }
                }
            }
        }

        let params = target.default_params.clone();
        let records = run_slots(slots, target, &params, lang_ctx, &journal_path)?;
        all_records.extend(records);
    }
    Ok(RateTable::from_records(&all_records, GroupKey::Language))
}

/// Wrap each document in a fixed task instruction and audit the
/// wrapped prompts. Live models typically show near-zero rates here:
/// task framing does not trigger question-style censorship.
pub fn task_wrapped_audit(
    documents: &[String],
    task: TaskMode,
    target: &ModelSpec,
    ctx: &AuditContext,
    journal_path: &Path,
    translate_into: &str,
) -> Result<RateTable> {
    let slots: Vec<Slot> = documents
        .iter()
        .map(|doc| {
            let sent_text = match task {
                TaskMode::Summarize => assets::fill(assets::TASK_SUMMARIZE, &[("document", doc)]),
                TaskMode::Translate => assets::fill(
                    assets::TASK_TRANSLATE,
                    &[("document", doc), ("language", translate_into)],
                ),
                TaskMode::Qa => doc.clone(),
            };
            Slot {
                prompt_id: text_id(doc),
                sent_text,
                question: doc.clone(),
                language: "english".to_string(),
                task_mode: task,
                category: None,
                source: None,
            }
        })
        .collect();
    let params = target.default_params.clone();
    let records = run_slots(slots, target, &params, ctx, journal_path)?;
    Ok(RateTable::from_records(&records, GroupKey::Task))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Lexicons;
    use crate::curation::Source;
    use crate::gateway::{GatewaySettings, MockRule, MockScript, Role, DEFAULT_CENSORED_RESPONSE};

    fn substantive_response() -> String {
        "<think>Let me think about this question carefully and recall the history.</think>\
         Here is a factual, detailed answer."
            .to_string()
    }

    fn target_censoring_on(marker: &str) -> (Gateway, ModelSpec) {
        let gw = Gateway::new(GatewaySettings::default());
        gw.register_mock_script(
            "target",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![
                    MockRule {
                        pattern: Some(marker.into()),
                        response: Some(DEFAULT_CENSORED_RESPONSE.into()),
                        ..MockRule::default()
                    },
                    MockRule {
                        response: Some(substantive_response()),
                        ..MockRule::default()
                    },
                ],
            },
        );
        (gw, ModelSpec::mock("target", Role::Target, "target"))
    }

    fn heuristic() -> Classifier {
        Classifier::heuristic(Lexicons::default_builtin())
    }

    #[test]
    fn audit_counts_scripted_censorship() {
        let (gw, target) = target_censoring_on("SENSITIVE");
        let clf = heuristic();
        let ctx = AuditContext {
            gateway: &gw,
            classifier: &clf,
            verdict_judge: None,
            concurrency: 4,
        };
        let dataset: Vec<Prompt> = (0..100)
            .map(|i| {
                let marker = if i % 10 < 3 { "SENSITIVE" } else { "benign" };
                Prompt::new(format!("prompt {i} {marker}"), Source::Reddit)
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let journal = dir.path().join("audit.jsonl");
        let records = audit(&dataset, &target, &ctx, None, &journal).unwrap();
        assert_eq!(records.len(), 100);
        let censored = records.iter().filter(|r| r.verdict.label.is_censored()).count();
        assert_eq!(censored, 30);

        let table = RateTable::from_records(&records, GroupKey::Source);
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].counts_consistent());
        assert!((table.rows[0].rate() - 0.30).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_empty_records() {
        let (gw, target) = target_censoring_on("X");
        let clf = heuristic();
        let ctx = AuditContext {
            gateway: &gw,
            classifier: &clf,
            verdict_judge: None,
            concurrency: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let records = audit(&[], &target, &ctx, None, &dir.path().join("j.jsonl")).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn audit_resumes_from_journal() {
        let (gw, target) = target_censoring_on("SENSITIVE");
        let clf = heuristic();
        let ctx = AuditContext {
            gateway: &gw,
            classifier: &clf,
            verdict_judge: None,
            concurrency: 2,
        };
        let dataset: Vec<Prompt> = (0..10)
            .map(|i| Prompt::new(format!("prompt number {i}"), Source::Twitter))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let journal = dir.path().join("audit.jsonl");

        let first_half = audit(&dataset[..5], &target, &ctx, None, &journal).unwrap();
        assert_eq!(first_half.len(), 5);
        let calls_after_half = gw.mock_stats("target").unwrap().calls;

        let full = audit(&dataset, &target, &ctx, None, &journal).unwrap();
        assert_eq!(full.len(), 10);
        let calls_after_full = gw.mock_stats("target").unwrap().calls;
        assert_eq!(calls_after_full - calls_after_half, 5, "first 5 came from the journal");

        let ids: HashSet<&str> = full.iter().map(|r| r.prompt_id.as_str()).collect();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn task_wrapper_does_not_mask_keyword_triggers() {
        let (gw, target) = target_censoring_on("Tiananmen");
        let clf = heuristic();
        let ctx = AuditContext {
            gateway: &gw,
            classifier: &clf,
            verdict_judge: None,
            concurrency: 2,
        };
        let docs = vec![
            "An article mentioning Tiananmen events.".to_string(),
            "An article about panda conservation.".to_string(),
        ];
        let dir = tempfile::tempdir().unwrap();
        let table = task_wrapped_audit(
            &docs,
            TaskMode::Summarize,
            &target,
            &ctx,
            &dir.path().join("task.jsonl"),
            "French",
        )
        .unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].key, "summarize");
        assert_eq!(table.rows[0].total, 2);
        assert_eq!(table.rows[0].censored, 1);
    }

    #[test]
    fn empty_document_list_empty_table() {
        let (gw, target) = target_censoring_on("X");
        let clf = heuristic();
        let ctx = AuditContext {
            gateway: &gw,
            classifier: &clf,
            verdict_judge: None,
            concurrency: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let table = task_wrapped_audit(
            &[],
            TaskMode::Translate,
            &target,
            &ctx,
            &dir.path().join("task.jsonl"),
            "French",
        )
        .unwrap();
        assert!(table.rows.is_empty());
    }

    /// Generated questions carry their category; a target censoring
    /// only one category's questions yields rate 1.0 there and 0.0
    /// elsewhere.
    #[test]
    fn category_sensitivity_isolates_the_sensitive_category() {
        let gw = Gateway::new(GatewaySettings::default());
        gw.register_mock_script(
            "per-topic-generator",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![
                    MockRule {
                        pattern: Some("about Taiwan".into()),
                        response: Some(
                            "Taiwan question one?\nTaiwan question two?\nTaiwan question three?"
                                .into(),
                        ),
                        ..MockRule::default()
                    },
                    MockRule {
                        pattern: Some("about Pandas".into()),
                        response: Some(
                            "Panda question one?\nPanda question two?\nPanda question three?"
                                .into(),
                        ),
                        ..MockRule::default()
                    },
                ],
            },
        );
        gw.register_mock_script(
            "taiwan-censor",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![
                    MockRule {
                        pattern: Some("Taiwan".into()),
                        response: Some(DEFAULT_CENSORED_RESPONSE.into()),
                        ..MockRule::default()
                    },
                    MockRule {
                        response: Some(substantive_response()),
                        ..MockRule::default()
                    },
                ],
            },
        );
        let generator = ModelSpec::mock("gen", Role::Generator, "per-topic-generator");
        let target = ModelSpec::mock("target", Role::Target, "taiwan-censor");
        let clf = heuristic();
        let ctx = AuditContext {
            gateway: &gw,
            classifier: &clf,
            verdict_judge: None,
            concurrency: 4,
        };
        let categories = crate::curation::CategorySet {
            categories: vec![
                crate::curation::CategoryEntry {
                    name: "Taiwan".into(),
                    kind: crate::curation::CategoryKind::Topic,
                },
                crate::curation::CategoryEntry {
                    name: "Pandas".into(),
                    kind: crate::curation::CategoryKind::Topic,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let (table, warnings) = category_sensitivity(
            &categories,
            3,
            &generator,
            &target,
            &ctx,
            &dir.path().join("sweep.audit.jsonl"),
        )
        .unwrap();
        assert!(warnings.is_empty());
        assert_eq!(table.rows.len(), 2);
        let taiwan = table.rows.iter().find(|r| r.key == "Taiwan").unwrap();
        let pandas = table.rows.iter().find(|r| r.key == "Pandas").unwrap();
        assert_eq!((taiwan.total, taiwan.rate()), (3, 1.0));
        assert_eq!((pandas.total, pandas.rate()), (3, 0.0));
    }

    /// Identity "language" reproduces the base audit exactly; a mock
    /// translator that prefixes "ZH:" plus a target censoring only
    /// ZH-prefixed prompts yields Chinese rate 1.0 and English 0.0.
    #[test]
    fn multilingual_mock_rates() {
        let gw = Gateway::new(GatewaySettings::default());
        gw.register_mock_script(
            "translator",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![
                    MockRule {
                        pattern: Some("into Chinese".into()),
                        response: Some("ZH: {prompt}".into()),
                        ..MockRule::default()
                    },
                    MockRule {
                        response: Some("{prompt}".into()),
                        ..MockRule::default()
                    },
                ],
            },
        );
        gw.register_mock_script(
            "zh-target",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![
                    MockRule {
                        pattern: Some("ZH:".into()),
                        response: Some(DEFAULT_CENSORED_RESPONSE.into()),
                        ..MockRule::default()
                    },
                    MockRule {
                        response: Some(substantive_response()),
                        ..MockRule::default()
                    },
                ],
            },
        );
        // Judge implementing the censored/not-censored protocol over
        // the {Q, A} payload.
        gw.register_mock_script(
            "verdict-judge",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![
                    MockRule {
                        pattern: Some("I am sorry, I cannot answer".into()),
                        response: Some("{ \"censored\": true }".into()),
                        ..MockRule::default()
                    },
                    MockRule {
                        response: Some("{ \"censored\": false }".into()),
                        ..MockRule::default()
                    },
                ],
            },
        );
        let translator = ModelSpec::mock("translator", Role::Translator, "translator");
        let target = ModelSpec::mock("target", Role::Target, "zh-target");
        let judge = ModelSpec::mock("judge", Role::Judge, "verdict-judge");
        let clf = heuristic();
        let ctx = AuditContext {
            gateway: &gw,
            classifier: &clf,
            verdict_judge: Some(&judge),
            concurrency: 4,
        };
        let dataset: Vec<Prompt> = (0..10)
            .map(|i| Prompt::new(format!("question number {i} about history?"), Source::Reddit))
            .collect();

        let dir = tempfile::tempdir().unwrap();
        let table = multilingual_audit(
            &dataset,
            &["english".to_string(), "chinese".to_string()],
            &translator,
            &target,
            &ctx,
            dir.path(),
        )
        .unwrap();
        assert_eq!(table.rows.len(), 2);
        let chinese = table.rows.iter().find(|r| r.key == "chinese").unwrap();
        let english = table.rows.iter().find(|r| r.key == "english").unwrap();
        assert_eq!(chinese.rate(), 1.0);
        assert_eq!(english.rate(), 0.0);
        assert_eq!(chinese.type2, 10, "judge-mode verdicts map to Type2");

        // Identity language equals a plain audit over the dataset.
        let base_journal = dir.path().join("base.audit.jsonl");
        let base = audit(&dataset, &target, &ctx, None, &base_journal).unwrap();
        let identity = read_journal_if_exists::<AuditJournalLine>(
            &dir.path().join("audit_english.jsonl"),
        )
        .unwrap();
        let mut identity_labels: Vec<(String, Label)> = identity
            .entries
            .iter()
            .filter_map(|line| match line {
                AuditJournalLine::Record(r) => Some((r.prompt_id.clone(), r.verdict.label)),
                _ => None,
            })
            .collect();
        identity_labels.sort();
        let mut base_labels: Vec<(String, Label)> =
            base.iter().map(|r| (r.prompt_id.clone(), r.verdict.label)).collect();
        base_labels.sort();
        assert_eq!(identity_labels, base_labels);
    }

    #[test]
    fn translator_commentary_goes_to_needs_review() {
        let gw = Gateway::new(GatewaySettings::default());
        gw.register_mock_script(
            "chatty-translator",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![MockRule {
                    response: Some("Sure! Here is the translation: 某些文字".into()),
                    ..MockRule::default()
                }],
            },
        );
        gw.register_mock_script("plain-target", MockScript::echo());
        gw.register_mock_script(
            "false-judge",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![MockRule {
                    response: Some("{ \"censored\": false }".into()),
                    ..MockRule::default()
                }],
            },
        );
        let translator = ModelSpec::mock("tr", Role::Translator, "chatty-translator");
        let target = ModelSpec::mock("t", Role::Target, "plain-target");
        let judge = ModelSpec::mock("j", Role::Judge, "false-judge");
        let clf = heuristic();
        let ctx = AuditContext {
            gateway: &gw,
            classifier: &clf,
            verdict_judge: Some(&judge),
            concurrency: 2,
        };
        let dataset = vec![Prompt::new("a question to translate?", Source::Reddit)];
        let dir = tempfile::tempdir().unwrap();
        let table = multilingual_audit(
            &dataset,
            &["chinese".to_string()],
            &translator,
            &target,
            &ctx,
            dir.path(),
        )
        .unwrap();
        // The only prompt went to needs-review, so nothing was audited.
        assert!(table.rows.is_empty() || table.rows[0].total == 0);
        let sidecar = read_journal_if_exists::<crate::curation::SidecarEntry>(
            &dir.path().join("needs_review_chinese.jsonl"),
        )
        .unwrap();
        assert_eq!(sidecar.entries.len(), 1);
        assert_eq!(sidecar.entries[0].stage, "translation");
    }

    #[test]
    fn commentary_detection() {
        assert!(looks_like_commentary(""));
        assert!(looks_like_commentary("Sure! Here is the translation: ..."));
        assert!(looks_like_commentary("Here is the text in Chinese: ..."));
        assert!(!looks_like_commentary("这是翻译后的文本。"));
    }
}
