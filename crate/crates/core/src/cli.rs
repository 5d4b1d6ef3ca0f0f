//! Command-line entrypoint: `curate`, `audit`, `sweep-categories`,
//! `audit-multilingual`, `audit-task`, `jailbreak`, `inject`,
//! `compare`, `report`.
//!
//! Every run writes its outputs (journals, datasets, tables) plus one
//! run manifest under the `--out` directory and nothing anywhere else.
//! Logs go to stderr; data goes to files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::audit::{
    audit, category_sensitivity, multilingual_audit, task_wrapped_audit, AuditContext, GroupKey,
    RateTable, TaskMode,
};
use crate::classifier::ClassifierMode;
use crate::config::LoadedConfig;
use crate::curation::{
    load_corpus, run_pipeline, CuratedRecord, CurationSettings, PipelineContext, Prompt, StageName,
};
use crate::distill::{inject, make_eval_splits, InjectionPlan, Strategy, TrainingSample};
use crate::error::{Error, Result};
use crate::gateway::Role;
use crate::jailbreak::bypass_campaign;
use crate::journal::{file_sha256, read_journal, write_journal};
use crate::judge::{aggregate, compare_batch, derive_seed, ComparisonItem, Dimension};
use crate::report::render_report;

#[derive(Parser)]
#[command(
    name = "blindspot",
    version,
    about = "Audit, measure, and bypass model-specific refusal behavior in reasoning LLMs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the dataset curation pipeline over a raw prompt corpus.
    Curate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Resume from this stage using the previous run's snapshots.
        #[arg(long)]
        from_stage: Option<String>,
        /// Overwrite categories already present on input prompts.
        #[arg(long)]
        recategorize: bool,
    },
    /// Audit a dataset against the target model.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Journal name stem (default "audit").
        #[arg(long)]
        name: Option<String>,
    },
    /// Generate questions per category and measure per-category rates.
    SweepCategories {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_per_category: Option<usize>,
    },
    /// Translate the dataset per language, audit the translations.
    AuditMultilingual {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Languages to audit (repeatable); defaults from config.
        #[arg(long)]
        language: Vec<String>,
    },
    /// Wrap documents in a task instruction and audit the results.
    AuditTask {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSONL of {"text": ...} documents.
        #[arg(long)]
        documents: PathBuf,
        /// "summarize" or "translate".
        #[arg(long)]
        task: String,
    },
    /// Run the reasoning-trigger jailbreak over a dataset.
    Jailbreak {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Maximum iterations per prompt (overrides config).
        #[arg(long)]
        k: Option<u32>,
        /// Reasoning trigger phrase (overrides config).
        #[arg(long)]
        trigger: Option<String>,
    },
    /// Build a censorship-injected distillation corpus.
    Inject {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Base SFT corpus (JSONL with prompt/response fields).
        #[arg(long)]
        base: PathBuf,
        /// Censored pool (curated dataset JSONL).
        #[arg(long)]
        pool: PathBuf,
        /// "random", "diverse", or "refusal".
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also emit evaluation splits held out from this topic.
        #[arg(long)]
        splits_topic: Option<String>,
        #[arg(long, default_value_t = 200)]
        holdout: usize,
        #[arg(long, default_value_t = 10)]
        other_categories: usize,
        #[arg(long, default_value_t = 20)]
        per_category: usize,
        /// Out-of-distribution set reference recorded in the splits.
        #[arg(long)]
        ood_ref: Option<String>,
    },
    /// Judge two answer journals pairwise.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Audit journal with model A's answers.
        #[arg(long)]
        a: PathBuf,
        /// Audit journal with model B's answers.
        #[arg(long)]
        b: PathBuf,
        /// Audit journal with reference answers (alignment only).
        #[arg(long)]
        reference: Option<PathBuf>,
        /// "factuality" or "alignment".
        #[arg(long)]
        dimension: String,
        /// Compare only a seeded sample of this many paired prompts.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Render tables and figure data from a journal directory.
    Report {
        #[arg(long)]
        journals: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Provenance record emitted once per run; enough to reproduce it.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub root_seed: u64,
    pub input_hashes: BTreeMap<String, String>,
    pub output_paths: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

struct ManifestBuilder {
    manifest: RunManifest,
    out_dir: PathBuf,
    name: String,
}

impl ManifestBuilder {
    fn start(command: &str, out_dir: &Path, config_hash: &str, root_seed: u64) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(ManifestBuilder {
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_hash: config_hash.to_string(),
                root_seed,
                input_hashes: BTreeMap::new(),
                output_paths: Vec::new(),
                started_unix: now_unix(),
                finished_unix: 0,
            },
            out_dir: out_dir.to_path_buf(),
            name: command.to_string(),
        })
    }

    fn record_input(&mut self, path: &Path) -> Result<()> {
        let name = path.display().to_string();
        self.manifest.input_hashes.insert(name, file_sha256(path)?);
        Ok(())
    }

    fn record_output(&mut self, path: &Path) {
        self.manifest.output_paths.push(path.display().to_string());
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.finished_unix = now_unix();
        let path = self.out_dir.join(format!("manifest_{}.json", self.name));
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }
}

/// Load a dataset that may be either a raw corpus ({text, source})
/// or a curated dataset (records with verdicts).
fn load_prompt_set(path: &Path) -> Result<Vec<Prompt>> {
    let first_line = {
        let contents = std::fs::read_to_string(path)?;
        contents
            .lines()
            .find(|l| !l.trim().is_empty())
            .map(str::to_string)
    };
    let Some(first_line) = first_line else {
        return Ok(Vec::new());
    };
    if serde_json::from_str::<CuratedRecord>(&first_line).is_ok() {
        let contents = read_journal::<CuratedRecord>(path)?;
        if contents.corrupt_lines > 0 {
            return Err(Error::Journal(format!(
                "{} corrupt line(s) in curated dataset {}",
                contents.corrupt_lines,
                path.display()
            )));
        }
        Ok(contents.entries.into_iter().map(|r| r.prompt).collect())
    } else {
        load_corpus(path)
    }
}

fn load_curated(path: &Path) -> Result<Vec<CuratedRecord>> {
    let contents = read_journal::<CuratedRecord>(path)?;
    if contents.corrupt_lines > 0 {
        return Err(Error::Journal(format!(
            "{} corrupt line(s) in curated dataset {}",
            contents.corrupt_lines,
            path.display()
        )));
    }
    Ok(contents.entries)
}

#[derive(Deserialize)]
struct DocumentLine {
    text: String,
}

#[derive(Deserialize)]
struct TrainingLine {
    prompt: String,
    response: String,
}

fn load_training(path: &Path) -> Result<Vec<TrainingSample>> {
    let contents = read_journal::<TrainingLine>(path)?;
    if contents.corrupt_lines > 0 {
        return Err(Error::Journal(format!(
            "{} corrupt line(s) in training corpus {}",
            contents.corrupt_lines,
            path.display()
        )));
    }
    Ok(contents
        .entries
        .into_iter()
        .map(|l| TrainingSample {
            prompt: l.prompt,
            response: l.response,
            origin: crate::distill::Origin::Base,
            strategy_tag: None,
            source_prompt_id: None,
        })
        .collect())
}

/// Extract (prompt_id -> (question, final answer, source)) from an
/// audit journal.
type AnswerMap = BTreeMap<String, (String, String, Option<String>)>;

fn answers_from_journal(path: &Path) -> Result<AnswerMap> {
    let contents = read_journal::<crate::audit::AuditJournalLine>(path)?;
    let mut map = BTreeMap::new();
    for line in contents.entries {
        if let crate::audit::AuditJournalLine::Record(r) = line {
            map.insert(
                r.prompt_id.clone(),
                (r.prompt_text, r.completion.final_text, r.source),
            );
        }
    }
    Ok(map)
}

/// Seeded sample of `n` comparison items, stratified evenly across
/// sources when every item carries one (mirrors equal-per-source
/// draws), falling back to a plain seeded sample otherwise.
fn sample_items(
    mut items: Vec<(ComparisonItem, Option<String>)>,
    n: usize,
    seed: u64,
) -> Vec<ComparisonItem> {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let all_sourced = items.iter().all(|(_, s)| s.is_some());
    let mut picked: Vec<ComparisonItem> = if all_sourced && !items.is_empty() {
        let mut by_source: BTreeMap<String, Vec<ComparisonItem>> = BTreeMap::new();
        for (item, source) in items {
            by_source.entry(source.unwrap()).or_default().push(item);
        }
        let quota = (n / by_source.len()).max(1);
        let mut picked = Vec::new();
        for group in by_source.values_mut() {
            group.shuffle(&mut rng);
            picked.extend(group.drain(..group.len().min(quota)));
        }
        picked
    } else {
        items.shuffle(&mut rng);
        items.truncate(n);
        items.into_iter().map(|(item, _)| item).collect()
    };
    picked.truncate(n);
    picked.sort_by(|x, y| x.prompt_id.cmp(&y.prompt_id));
    picked
}

fn write_rate_tables(
    table_specs: &[(GroupKey, &RateTable)],
    out: &Path,
    manifest: &mut ManifestBuilder,
) -> Result<()> {
    for (key, table) in table_specs {
        let path = out.join(format!("rates_by_{}.csv", key.name()));
        std::fs::write(&path, table.to_csv())?;
        manifest.record_output(&path);
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Curate {
            config,
            out,
            from_stage,
            recategorize,
        } => cmd_curate(&config, &out, from_stage.as_deref(), recategorize),
        Command::Audit {
            config,
            out,
            dataset,
            name,
        } => cmd_audit(&config, &out, &dataset, name.as_deref().unwrap_or("audit")),
        Command::SweepCategories {
            config,
            out,
            n_per_category,
        } => cmd_sweep(&config, &out, n_per_category),
        Command::AuditMultilingual {
            config,
            out,
            dataset,
            language,
        } => cmd_multilingual(&config, &out, &dataset, &language),
        Command::AuditTask {
            config,
            out,
            documents,
            task,
        } => cmd_task(&config, &out, &documents, &task),
        Command::Jailbreak {
            config,
            out,
            dataset,
            k,
            trigger,
        } => cmd_jailbreak(&config, &out, &dataset, k, trigger),
        Command::Inject {
            config,
            out,
            base,
            pool,
            strategy,
            n,
            seed,
            splits_topic,
            holdout,
            other_categories,
            per_category,
            ood_ref,
        } => cmd_inject(InjectArgs {
            config,
            out,
            base,
            pool,
            strategy,
            n,
            seed,
            splits_topic,
            holdout,
            other_categories,
            per_category,
            ood_ref,
        }),
        Command::Compare {
            config,
            out,
            a,
            b,
            reference,
            dimension,
            sample,
        } => cmd_compare(&config, &out, &a, &b, reference.as_deref(), &dimension, sample),
        Command::Report { journals, out } => cmd_report(&journals, &out),
    }
}

fn cmd_curate(
    config_path: &Path,
    out: &Path,
    from_stage: Option<&str>,
    recategorize: bool,
) -> Result<()> {
    let loaded = LoadedConfig::load(config_path)?;
    let curation = loaded
        .config
        .curation
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [curation] section".into()))?;
    let mut manifest =
        ManifestBuilder::start("curate", out, &loaded.config_hash, loaded.config.root_seed)?;

    let input_path = loaded.resolve(&curation.input);
    manifest.record_input(&input_path)?;
    let corpus = load_corpus(&input_path)?;
    eprintln!("curate: loaded {} prompts from {}", corpus.len(), input_path.display());

    let gateway = loaded.build_gateway()?;
    let classifier = loaded.classifier()?;
    let reference_pool: Vec<_> = loaded
        .models_by_role(Role::Reference)
        .into_iter()
        .cloned()
        .collect();
    let judge = loaded.model_by_role(Role::Judge)?;
    let verdict_judge = match classifier.mode {
        ClassifierMode::Judge => Some(judge),
        ClassifierMode::Heuristic => None,
    };
    let ctx = PipelineContext {
        gateway: &gateway,
        judge,
        target: loaded.model_by_role(Role::Target)?,
        reference_pool: &reference_pool,
        classifier: &classifier,
        verdict_judge,
        concurrency: loaded.concurrency(),
    };
    let settings = CurationSettings {
        workdir: out.join("work"),
        stages: loaded.stages()?,
        keywords: loaded.keywords()?,
        categories: loaded.categories()?,
        length_bounds: loaded.length_bounds(),
        recategorize: recategorize || curation.recategorize,
    };
    let from = from_stage.map(StageName::parse).transpose()?;

    let outcome = run_pipeline(corpus, &settings, &ctx, from)?;
    for report in &outcome.reports {
        eprintln!(
            "  stage {:<14} in={:<6} out={:<6} removed={}",
            report.stage_name,
            report.in_count,
            report.out_count,
            report.removed_ids.len()
        );
    }

    let dataset_path = out.join("curated.curated.jsonl");
    write_journal(&dataset_path, &outcome.records)?;
    manifest.record_output(&dataset_path);
    let reports_path = out.join("stage_reports.json");
    std::fs::write(&reports_path, serde_json::to_string_pretty(&outcome.reports)?)?;
    manifest.record_output(&reports_path);
    eprintln!(
        "curate: {} records written to {}",
        outcome.records.len(),
        dataset_path.display()
    );
    manifest.finish()
}

fn audit_context<'a>(
    loaded: &'a LoadedConfig,
    gateway: &'a crate::gateway::Gateway,
    classifier: &'a crate::classifier::Classifier,
) -> AuditContext<'a> {
    let verdict_judge = loaded.model_by_role(Role::Judge).ok();
    AuditContext {
        gateway,
        classifier,
        verdict_judge,
        concurrency: loaded.concurrency(),
    }
}

fn cmd_audit(config_path: &Path, out: &Path, dataset: &Path, name: &str) -> Result<()> {
    let loaded = LoadedConfig::load(config_path)?;
    let mut manifest =
        ManifestBuilder::start("audit", out, &loaded.config_hash, loaded.config.root_seed)?;
    manifest.record_input(dataset)?;
    let prompts = load_prompt_set(dataset)?;
    let gateway = loaded.build_gateway()?;
    let classifier = loaded.classifier()?;
    let ctx = audit_context(&loaded, &gateway, &classifier);
    let target = loaded.model_by_role(Role::Target)?;

    let journal = out.join(format!("{name}.audit.jsonl"));
    let records = audit(&prompts, target, &ctx, None, &journal)?;
    manifest.record_output(&journal);

    let by_source = RateTable::from_records(&records, GroupKey::Source);
    let by_category = RateTable::from_records(&records, GroupKey::Category);
    write_rate_tables(
        &[(GroupKey::Source, &by_source), (GroupKey::Category, &by_category)],
        out,
        &mut manifest,
    )?;
    let censored: u64 = by_source.rows.iter().map(|r| r.censored).sum();
    eprintln!(
        "audit: {} records, {} censored ({}%)",
        records.len(),
        censored,
        if records.is_empty() {
            0.0
        } else {
            censored as f64 / records.len() as f64 * 100.0
        }
    );
    manifest.finish()
}

fn cmd_sweep(config_path: &Path, out: &Path, n_per_category: Option<usize>) -> Result<()> {
    let loaded = LoadedConfig::load(config_path)?;
    let mut manifest = ManifestBuilder::start(
        "sweep-categories",
        out,
        &loaded.config_hash,
        loaded.config.root_seed,
    )?;
    let n = n_per_category
        .or(loaded.config.audit.n_per_category)
        .unwrap_or(30);
    let gateway = loaded.build_gateway()?;
    let classifier = loaded.classifier()?;
    let ctx = audit_context(&loaded, &gateway, &classifier);
    let categories = loaded.categories()?;
    let generator = loaded.model_by_role(Role::Generator)?;
    let target = loaded.model_by_role(Role::Target)?;

    let journal = out.join("sweep.audit.jsonl");
    let (table, warnings) =
        category_sensitivity(&categories, n, generator, target, &ctx, &journal)?;
    manifest.record_output(&journal);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    write_rate_tables(&[(GroupKey::Category, &table)], out, &mut manifest)?;
    eprintln!(
        "sweep-categories: {} categories x {} questions audited",
        table.rows.len(),
        n
    );
    manifest.finish()
}

fn cmd_multilingual(
    config_path: &Path,
    out: &Path,
    dataset: &Path,
    languages: &[String],
) -> Result<()> {
    let loaded = LoadedConfig::load(config_path)?;
    let mut manifest = ManifestBuilder::start(
        "audit-multilingual",
        out,
        &loaded.config_hash,
        loaded.config.root_seed,
    )?;
    manifest.record_input(dataset)?;
    let prompts = load_prompt_set(dataset)?;
    let languages: Vec<String> = if !languages.is_empty() {
        languages.to_vec()
    } else {
        loaded.config.audit.languages.clone().unwrap_or_else(|| {
            vec![
                "english".to_string(),
                "chinese".to_string(),
                "korean".to_string(),
                "farsi".to_string(),
            ]
        })
    };
    let gateway = loaded.build_gateway()?;
    let classifier = loaded.classifier()?;
    let ctx = audit_context(&loaded, &gateway, &classifier);
    let translator = loaded.model_by_role(Role::Translator)?;
    let target = loaded.model_by_role(Role::Target)?;

    let table = multilingual_audit(&prompts, &languages, translator, target, &ctx, out)?;
    for language in &languages {
        manifest.record_output(&out.join(format!("audit_{}.jsonl", language.to_lowercase())));
    }
    let path = out.join("rates_by_language.csv");
    std::fs::write(&path, table.to_csv())?;
    manifest.record_output(&path);
    for row in &table.rows {
        eprintln!(
            "audit-multilingual: {:<10} rate={:.2}%",
            row.key,
            row.rate() * 100.0
        );
    }
    manifest.finish()
}

fn cmd_task(config_path: &Path, out: &Path, documents: &Path, task: &str) -> Result<()> {
    let loaded = LoadedConfig::load(config_path)?;
    let mut manifest =
        ManifestBuilder::start("audit-task", out, &loaded.config_hash, loaded.config.root_seed)?;
    manifest.record_input(documents)?;
    let task = match task {
        "summarize" => TaskMode::Summarize,
        "translate" => TaskMode::Translate,
        other => {
            return Err(Error::Config(format!(
                "unknown task '{other}' (expected summarize or translate)"
            )))
        }
    };
    let contents = read_journal::<DocumentLine>(documents)?;
    if contents.corrupt_lines > 0 {
        return Err(Error::Journal(format!(
            "{} corrupt line(s) in documents file",
            contents.corrupt_lines
        )));
    }
    let docs: Vec<String> = contents.entries.into_iter().map(|d| d.text).collect();
    let gateway = loaded.build_gateway()?;
    let classifier = loaded.classifier()?;
    let ctx = audit_context(&loaded, &gateway, &classifier);
    let target = loaded.model_by_role(Role::Target)?;
    let into = loaded
        .config
        .audit
        .task_translate_into
        .clone()
        .unwrap_or_else(|| "French".to_string());

    let journal = out.join("task.audit.jsonl");
    let table = task_wrapped_audit(&docs, task, target, &ctx, &journal, &into)?;
    manifest.record_output(&journal);
    let path = out.join("rates_by_task.csv");
    std::fs::write(&path, table.to_csv())?;
    manifest.record_output(&path);
    for row in &table.rows {
        eprintln!("audit-task: {:<12} rate={:.2}%", row.key, row.rate() * 100.0);
    }
    manifest.finish()
}

fn cmd_jailbreak(
    config_path: &Path,
    out: &Path,
    dataset: &Path,
    k: Option<u32>,
    trigger: Option<String>,
) -> Result<()> {
    let loaded = LoadedConfig::load(config_path)?;
    let mut manifest =
        ManifestBuilder::start("jailbreak", out, &loaded.config_hash, loaded.config.root_seed)?;
    manifest.record_input(dataset)?;
    let prompts = load_prompt_set(dataset)?;
    let mut cfg = loaded.jailbreak_config();
    if let Some(k) = k {
        cfg.max_iterations = k;
    }
    if let Some(trigger) = trigger {
        cfg.trigger = trigger;
    }
    let gateway = loaded.build_gateway()?;
    let classifier = loaded.classifier()?;
    let verdict_judge = loaded.model_by_role(Role::Judge).ok();
    let target = loaded.model_by_role(Role::Target)?;

    let journal = out.join("campaign.bypass.jsonl");
    let (_outcomes, summary) = bypass_campaign(
        &prompts,
        target,
        &cfg,
        &classifier,
        &gateway,
        verdict_judge,
        loaded.concurrency(),
        &journal,
    )?;
    manifest.record_output(&journal);

    let summary_path = out.join("bypass_summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    manifest.record_output(&summary_path);
    let histogram_path = out.join("bypass_histogram.csv");
    std::fs::write(&histogram_path, summary.histogram_csv())?;
    manifest.record_output(&histogram_path);

    eprintln!(
        "jailbreak: total={} clean_bypassed={} rate={:.2}% residual(t2={} t3={}) failed={}",
        summary.total,
        summary.clean_bypassed,
        summary.bypass_rate * 100.0,
        summary.residual_type2,
        summary.residual_type3,
        summary.failed
    );
    manifest.finish()
}

struct InjectArgs {
    config: PathBuf,
    out: PathBuf,
    base: PathBuf,
    pool: PathBuf,
    strategy: String,
    n: usize,
    seed: Option<u64>,
    splits_topic: Option<String>,
    holdout: usize,
    other_categories: usize,
    per_category: usize,
    ood_ref: Option<String>,
}

fn cmd_inject(args: InjectArgs) -> Result<()> {
    let loaded = LoadedConfig::load(&args.config)?;
    let mut manifest = ManifestBuilder::start(
        "inject",
        &args.out,
        &loaded.config_hash,
        loaded.config.root_seed,
    )?;
    manifest.record_input(&args.base)?;
    manifest.record_input(&args.pool)?;

    let strategy = match args.strategy.as_str() {
        "random" => Strategy::Random,
        "diverse" => Strategy::Diverse,
        "refusal" => Strategy::Refusal,
        other => {
            return Err(Error::Config(format!(
                "unknown strategy '{other}' (expected random, diverse, or refusal)"
            )))
        }
    };
    let base = load_training(&args.base)?;
    let pool = load_curated(&args.pool)?;
    let seed = args
        .seed
        .unwrap_or_else(|| derive_seed(loaded.config.root_seed, "inject"));
    let plan = InjectionPlan::new(strategy, args.n, seed);

    let judge_pair;
    let judge_opt = if strategy == Strategy::Diverse {
        let gateway = loaded.build_gateway()?;
        let judge = loaded.model_by_role(Role::Judge)?.clone();
        judge_pair = (judge, gateway);
        Some((&judge_pair.0, &judge_pair.1))
    } else {
        None
    };

    let (corpus, completed_plan) = inject(&base, &pool, &plan, judge_opt)?;
    let corpus_path = args.out.join("corpus.jsonl");
    write_journal(&corpus_path, &corpus)?;
    manifest.record_output(&corpus_path);
    let plan_path = args.out.join("injection_plan.json");
    std::fs::write(&plan_path, serde_json::to_string_pretty(&completed_plan)?)?;
    manifest.record_output(&plan_path);
    eprintln!(
        "inject: corpus of {} samples ({} base + {} injected, strategy={}, seed={})",
        corpus.len(),
        base.len(),
        completed_plan.selected_ids.len(),
        strategy,
        seed
    );

    if let Some(topic) = &args.splits_topic {
        let splits = make_eval_splits(
            &pool,
            topic,
            args.holdout,
            args.other_categories,
            args.per_category,
            &completed_plan.selected_ids,
            derive_seed(seed, "splits"),
            args.ood_ref.clone(),
        )?;
        let same_path = args.out.join("split_same_topic.jsonl");
        write_journal(&same_path, &splits.same_topic)?;
        manifest.record_output(&same_path);
        let diff_path = args.out.join("split_different_category.jsonl");
        write_journal(&diff_path, &splits.different_category)?;
        manifest.record_output(&diff_path);
        if let Some(ood) = &splits.ood_ref {
            eprintln!("inject: out-of-distribution reference: {ood}");
        }
        eprintln!(
            "inject: splits written ({} same-topic, {} different-category)",
            splits.same_topic.len(),
            splits.different_category.len()
        );
    }
    manifest.finish()
}

fn cmd_compare(
    config_path: &Path,
    out: &Path,
    a: &Path,
    b: &Path,
    reference: Option<&Path>,
    dimension: &str,
    sample: Option<usize>,
) -> Result<()> {
    let loaded = LoadedConfig::load(config_path)?;
    let mut manifest =
        ManifestBuilder::start("compare", out, &loaded.config_hash, loaded.config.root_seed)?;
    manifest.record_input(a)?;
    manifest.record_input(b)?;
    let dimension = match dimension {
        "factuality" => Dimension::Factuality,
        "alignment" => Dimension::Alignment,
        other => {
            return Err(Error::Config(format!(
                "unknown dimension '{other}' (expected factuality or alignment)"
            )))
        }
    };
    let answers_a = answers_from_journal(a)?;
    let answers_b = answers_from_journal(b)?;
    let references = match reference {
        Some(path) => {
            manifest.record_input(path)?;
            Some(answers_from_journal(path)?)
        }
        None => None,
    };
    if dimension == Dimension::Alignment && references.is_none() {
        return Err(Error::Config(
            "alignment comparisons need --reference".into(),
        ));
    }

    let paired: Vec<(ComparisonItem, Option<String>)> = answers_a
        .iter()
        .filter_map(|(id, (question, answer_a, source))| {
            let (_, answer_b, _) = answers_b.get(id)?;
            let reference = match &references {
                Some(refs) => Some(refs.get(id)?.1.clone()),
                None => None,
            };
            Some((
                ComparisonItem {
                    prompt_id: id.clone(),
                    question: question.clone(),
                    answer_a: answer_a.clone(),
                    answer_b: answer_b.clone(),
                    reference,
                },
                source.clone(),
            ))
        })
        .collect();
    eprintln!("compare: {} paired prompts", paired.len());

    let items: Vec<ComparisonItem> = match sample {
        Some(n) => sample_items(
            paired,
            n,
            derive_seed(loaded.config.root_seed, "compare-sample"),
        ),
        None => paired.into_iter().map(|(item, _)| item).collect(),
    };

    let gateway = loaded.build_gateway()?;
    let judge = loaded.model_by_role(Role::Judge)?;
    let journal = out.join("verdicts.jsonl");
    let (verdicts, errors) = compare_batch(
        &items,
        dimension,
        judge,
        &gateway,
        loaded.config.root_seed,
        loaded.concurrency(),
        &journal,
    )?;
    manifest.record_output(&journal);

    let summaries = aggregate(&verdicts);
    let summary_path = out.join("comparison_summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summaries)?)?;
    manifest.record_output(&summary_path);
    for s in &summaries {
        eprintln!(
            "compare[{}]: A {:.2}% vs B {:.2}% over {} (first-presented wins {:.1}%, errors={errors})",
            s.dimension,
            s.win_rate_a * 100.0,
            s.win_rate_b * 100.0,
            s.total,
            s.first_presented_win_rate * 100.0
        );
    }
    manifest.finish()
}

fn cmd_report(journals: &Path, out: &Path) -> Result<()> {
    let mut manifest = ManifestBuilder::start("report", out, "none", 0)?;
    let report = render_report(journals, out)?;
    for (name, hash) in &report.input_hashes {
        manifest.manifest.input_hashes.insert(name.clone(), hash.clone());
    }
    manifest.record_output(&out.join("summary.txt"));
    for path in report.table_files.iter().chain(report.figure_files.iter()) {
        manifest.record_output(path);
    }
    eprintln!(
        "report: {} tables, {} figure files, {} inputs",
        report.table_files.len(),
        report.figure_files.len(),
        report.input_hashes.len()
    );
    manifest.finish()
}
