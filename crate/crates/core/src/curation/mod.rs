//! Curation of local-censorship prompt datasets.
//!
//! Raw candidates (social-media dumps read from local files, or
//! LLM-generated questions) pass through a configurable chain of
//! filtering stages, then a global-censorship check against a
//! reference pool and a local-censorship check against the target
//! model. Every stage emits a [`StageReport`]; prompts a judged stage
//! cannot classify land in a needs-review sidecar instead of being
//! silently dropped; intermediate snapshots make the pipeline
//! resumable from any stage.

pub mod generate;
mod stages;

pub use generate::{generate_llm_prompts, GeneratedPrompts};
pub use stages::{
    check_global_censorship, check_local_censorship, categorize, dedup, filter_keywords,
    filter_length, judged_filter, strip_links, JudgedCriterion, KeywordList, LengthBounds,
    SidecarEntry,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{CensorshipVerdict, Classifier};
use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelSpec};
use crate::journal::{read_journal, write_journal, JournalWriter};
use crate::util::{text_id, token_count};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Reddit,
    Twitter,
    Llm,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Reddit => f.write_str("reddit"),
            Source::Twitter => f.write_str("twitter"),
            Source::Llm => f.write_str("llm"),
        }
    }
}

/// One candidate question. The id is a stable hash of the
/// whitespace-normalized text, assigned at ingestion and preserved by
/// rewriting stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub text: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_from: Option<String>,
}

impl Prompt {
    pub fn new(text: impl Into<String>, source: Source) -> Self {
        let text = text.into();
        Prompt {
            id: text_id(&text),
            text,
            source,
            language: None,
            category: None,
            created_from: None,
        }
    }
}

/// Ingestion record: one JSON object per line with at least
/// `text` and `source`.
#[derive(Debug, Deserialize)]
struct CorpusLine {
    text: String,
    source: Source,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    category: Option<String>,
    #[serde(default)]
    created_from: Option<String>,
}

/// Read a line-delimited corpus file, assigning stable ids.
pub fn load_corpus(path: &Path) -> Result<Vec<Prompt>> {
    let contents = read_journal::<CorpusLine>(path)?;
    if contents.corrupt_lines > 0 {
        return Err(Error::Journal(format!(
            "{} corrupt line(s) in corpus {}",
            contents.corrupt_lines,
            path.display()
        )));
    }
    Ok(contents
        .entries
        .into_iter()
        .map(|line| {
            let mut p = Prompt::new(line.text, line.source);
            p.language = line.language;
            p.category = line.category;
            p.created_from = line.created_from;
            p
        })
        .collect())
}

/// Per-stage accounting: `out_count = in_count - removed_ids.len()`
/// and the output id-set is always contained in the input id-set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub stage_name: String,
    pub in_count: usize,
    pub out_count: usize,
    pub removed_ids: Vec<String>,
}

impl StageReport {
    pub fn new(stage_name: &str, in_count: usize, removed_ids: Vec<String>) -> Self {
        let report = StageReport {
            stage_name: stage_name.to_string(),
            in_count,
            out_count: in_count - removed_ids.len(),
            removed_ids,
        };
        debug_assert!(report.arithmetic_holds());
        report
    }

    pub fn arithmetic_holds(&self) -> bool {
        self.in_count >= self.removed_ids.len()
            && self.out_count == self.in_count - self.removed_ids.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryKind {
    Individual,
    Incident,
    #[default]
    Topic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryEntry {
    pub name: String,
    #[serde(default)]
    pub kind: CategoryKind,
}

/// Closed list of category/subcategory names used for generation,
/// categorization, and sensitivity sweeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategorySet {
    pub categories: Vec<CategoryEntry>,
}

impl CategorySet {
    pub fn default_builtin() -> Self {
        serde_json::from_str(crate::assets::DEFAULT_CATEGORIES_JSON)
            .expect("built-in category asset must parse")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let set: CategorySet = serde_json::from_str(json)?;
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::Config("category set must be non-empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.categories {
            if !seen.insert(&c.name) {
                return Err(Error::Config(format!("duplicate category name: {}", c.name)));
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.categories.iter().map(|c| c.name.as_str()).collect()
    }
}

/// Final dataset record: the prompt, the verdict that qualified it,
/// and the censored completion it produced (which doubles as the
/// training response for distillation corpora).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuratedRecord {
    pub prompt: Prompt,
    pub verdict: CensorshipVerdict,
    pub completion_raw: String,
    pub token_count: usize,
}

impl CuratedRecord {
    pub fn new(prompt: Prompt, verdict: CensorshipVerdict, completion_raw: String) -> Self {
        let token_count = token_count(&prompt.text);
        CuratedRecord {
            prompt,
            verdict,
            completion_raw,
            token_count,
        }
    }
}

/// Pipeline stage names, in the canonical filtering order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    Length,
    Keywords,
    ChinaRelated,
    Language,
    Question,
    Clarity,
    Dedup,
    Links,
    Categorize,
    Global,
    Local,
}

impl StageName {
    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Length => "length",
            StageName::Keywords => "keywords",
            StageName::ChinaRelated => "china_related",
            StageName::Language => "language",
            StageName::Question => "question",
            StageName::Clarity => "clarity",
            StageName::Dedup => "dedup",
            StageName::Links => "links",
            StageName::Categorize => "categorize",
            StageName::Global => "global",
            StageName::Local => "local",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "length" => StageName::Length,
            "keywords" => StageName::Keywords,
            "china_related" => StageName::ChinaRelated,
            "language" => StageName::Language,
            "question" => StageName::Question,
            "clarity" => StageName::Clarity,
            "dedup" => StageName::Dedup,
            "links" => StageName::Links,
            "categorize" => StageName::Categorize,
            "global" => StageName::Global,
            "local" => StageName::Local,
            other => return Err(Error::Config(format!("unknown stage name: {other}"))),
        })
    }

    pub fn default_order() -> Vec<StageName> {
        vec![
            StageName::Length,
            StageName::Keywords,
            StageName::ChinaRelated,
            StageName::Language,
            StageName::Question,
            StageName::Clarity,
            StageName::Dedup,
            StageName::Links,
            StageName::Categorize,
            StageName::Global,
            StageName::Local,
        ]
    }
}

/// Everything the judged/model-backed stages need.
pub struct PipelineContext<'a> {
    pub gateway: &'a Gateway,
    pub judge: &'a ModelSpec,
    pub target: &'a ModelSpec,
    pub reference_pool: &'a [ModelSpec],
    pub classifier: &'a Classifier,
    /// Judge used for verdicts when the classifier runs in judge mode.
    pub verdict_judge: Option<&'a ModelSpec>,
    pub concurrency: usize,
}

/// Static pipeline settings (the model-independent part of the
/// curation config).
#[derive(Debug, Clone)]
pub struct CurationSettings {
    pub workdir: PathBuf,
    pub stages: Vec<StageName>,
    pub keywords: KeywordList,
    pub categories: CategorySet,
    pub length_bounds: LengthBounds,
    pub recategorize: bool,
}

/// Output of a full pipeline run.
pub struct PipelineOutcome {
    pub records: Vec<CuratedRecord>,
    pub reports: Vec<StageReport>,
}

fn snapshot_path(workdir: &Path, index: usize, stage: StageName) -> PathBuf {
    workdir
        .join("stages")
        .join(format!("{index:02}_{}.jsonl", stage.as_str()))
}

fn sidecar_writer(workdir: &Path, stage: StageName) -> Result<JournalWriter> {
    let path = workdir.join("sidecars").join(format!("{}.jsonl", stage.as_str()));
    JournalWriter::append_to(&path)
}

#[derive(Serialize, Deserialize)]
struct ReportLine {
    stage_index: usize,
    report: StageReport,
}

/// Run the configured stages in order over `input`, snapshotting after
/// each stage. `from_stage` resumes from a previous run's snapshot.
///
/// The `local` stage, when present, must be last: it converts prompts
/// into verdict-carrying records.
pub fn run_pipeline(
    input: Vec<Prompt>,
    settings: &CurationSettings,
    ctx: &PipelineContext,
    from_stage: Option<StageName>,
) -> Result<PipelineOutcome> {
    let stages = &settings.stages;
    if stages.is_empty() {
        return Err(Error::Config("pipeline has no stages configured".into()));
    }
    if let Some(pos) = stages.iter().position(|s| *s == StageName::Local) {
        if pos != stages.len() - 1 {
            return Err(Error::Config(
                "the 'local' stage must be the last stage when configured".into(),
            ));
        }
    }

    let start_index = match from_stage {
        None => 0,
        Some(stage) => stages
            .iter()
            .position(|s| *s == stage)
            .ok_or_else(|| Error::Config(format!("stage '{}' not in configured order", stage.as_str())))?,
    };

    // Reports from a previous partial run, for stages we skip.
    let reports_path = settings.workdir.join("reports.jsonl");
    let mut reports_by_index: BTreeMap<usize, StageReport> = BTreeMap::new();
    if start_index > 0 {
        let previous = crate::journal::read_journal_if_exists::<ReportLine>(&reports_path)?;
        for line in previous.entries {
            if line.stage_index < start_index {
                reports_by_index.insert(line.stage_index, line.report);
            }
        }
        if reports_by_index.len() != start_index {
            return Err(Error::Resume(format!(
                "reports for stages before '{}' are incomplete; re-run from an earlier stage",
                stages[start_index].as_str()
            )));
        }
    }

    let mut prompts = if start_index == 0 {
        input
    } else {
        let prev = stages[start_index - 1];
        let path = snapshot_path(&settings.workdir, start_index - 1, prev);
        if !path.exists() {
            return Err(Error::Resume(format!(
                "missing intermediate snapshot {} (run the earlier stages first)",
                path.display()
            )));
        }
        read_journal::<Prompt>(&path)?.entries
    };

    let mut records: Vec<CuratedRecord> = Vec::new();
    for (index, stage) in stages.iter().enumerate().skip(start_index) {
        let stage = *stage;
        let report = match stage {
            StageName::Length => {
                let (kept, report) = filter_length(prompts, &settings.length_bounds);
                prompts = kept;
                report
            }
            StageName::Keywords => {
                let (kept, report) = filter_keywords(prompts, &settings.keywords);
                prompts = kept;
                report
            }
            StageName::ChinaRelated | StageName::Language | StageName::Question
            | StageName::Clarity => {
                let criterion = match stage {
                    StageName::ChinaRelated => JudgedCriterion::ChinaRelated,
                    StageName::Language => JudgedCriterion::EnglishLanguage,
                    StageName::Question => JudgedCriterion::IsQuestion,
                    _ => JudgedCriterion::IsClear,
                };
                let sidecar = sidecar_writer(&settings.workdir, stage)?;
                let (kept, report) = judged_filter(
                    prompts,
                    criterion,
                    ctx.gateway,
                    ctx.judge,
                    ctx.concurrency,
                    &sidecar,
                )?;
                prompts = kept;
                report
            }
            StageName::Dedup => {
                let (kept, report) = dedup(prompts);
                prompts = kept;
                report
            }
            StageName::Links => {
                let (kept, report) = strip_links(prompts);
                prompts = kept;
                report
            }
            StageName::Categorize => {
                let (kept, report) = categorize(
                    prompts,
                    &settings.categories,
                    ctx.gateway,
                    ctx.judge,
                    ctx.concurrency,
                    settings.recategorize,
                )?;
                prompts = kept;
                report
            }
            StageName::Global => {
                let sidecar = sidecar_writer(&settings.workdir, stage)?;
                let (kept, report) = check_global_censorship(
                    prompts,
                    ctx.reference_pool,
                    ctx.gateway,
                    &ctx.classifier.lexicons,
                    ctx.concurrency,
                    &sidecar,
                )?;
                prompts = kept;
                report
            }
            StageName::Local => {
                let sidecar = sidecar_writer(&settings.workdir, stage)?;
                let (kept, report) = check_local_censorship(
                    prompts,
                    ctx.target,
                    ctx.gateway,
                    ctx.classifier,
                    ctx.verdict_judge,
                    ctx.concurrency,
                    &sidecar,
                )?;
                records = kept;
                prompts = records.iter().map(|r| r.prompt.clone()).collect();
                report
            }
        };

        write_journal(&snapshot_path(&settings.workdir, index, stage), &prompts)?;
        reports_by_index.insert(index, report);
        let lines: Vec<ReportLine> = reports_by_index
            .iter()
            .map(|(i, r)| ReportLine {
                stage_index: *i,
                report: r.clone(),
            })
            .collect();
        write_journal(&reports_path, &lines)?;
    }

    // Pipelines configured without a final 'local' stage produce
    // verdict-less records only when the caller asks for prompts; keep
    // the contract simple by requiring 'local' for dataset emission.
    if !stages.contains(&StageName::Local) {
        return Err(Error::Config(
            "pipeline must end with the 'local' stage to emit a curated dataset".into(),
        ));
    }

    Ok(PipelineOutcome {
        records,
        reports: reports_by_index.into_values().collect(),
    })
}
