//! Journals in, tables and figure data out.
//!
//! The renderer scans a journal directory (`*.audit.jsonl`,
//! `*.curated.jsonl`, `*.bypass.jsonl`), skips (and counts) corrupt
//! lines, and emits a human-readable summary plus machine-readable
//! CSVs. Output is a pure function of the input journal bytes:
//! regenerating from unchanged journals is byte-identical, and every
//! emitted file traces back to the input hashes listed in the summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audit::{AuditJournalLine, AuditRecord, GroupKey, RateTable};
use crate::curation::CuratedRecord;
use crate::error::Result;
use crate::jailbreak::{CampaignJournalLine, CampaignSummary};
use crate::journal::{file_sha256, read_journal};

pub fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

// ---------------------------------------------------------------------------
// Dataset statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceStatsRow {
    pub source: String,
    pub count: u64,
    /// Share of the whole dataset, in percent.
    pub proportion: f64,
    pub mean_tokens: f64,
    /// Population standard deviation.
    pub sd_tokens: f64,
    /// Type 1 share among this source's censored records, in percent.
    pub type1_share: f64,
    pub type2_share: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStatistics {
    pub rows: Vec<SourceStatsRow>,
    pub total: u64,
}

fn mean_and_population_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

fn stats_row(source: &str, records: &[&CuratedRecord], dataset_total: u64) -> SourceStatsRow {
    let tokens: Vec<f64> = records.iter().map(|r| r.token_count as f64).collect();
    let (mean, sd) = mean_and_population_sd(&tokens);
    let censored = records
        .iter()
        .filter(|r| r.verdict.label.is_censored())
        .count() as f64;
    let type1 = records
        .iter()
        .filter(|r| r.verdict.label == crate::classifier::Label::Type1)
        .count() as f64;
    let type2 = records
        .iter()
        .filter(|r| r.verdict.label == crate::classifier::Label::Type2)
        .count() as f64;
    SourceStatsRow {
        source: source.to_string(),
        count: records.len() as u64,
        proportion: if dataset_total == 0 {
            0.0
        } else {
            records.len() as f64 / dataset_total as f64 * 100.0
        },
        mean_tokens: mean,
        sd_tokens: sd,
        type1_share: if censored == 0.0 { 0.0 } else { type1 / censored * 100.0 },
        type2_share: if censored == 0.0 { 0.0 } else { type2 / censored * 100.0 },
    }
}

/// Per-source proportions, token-length spread, and Type 1 / Type 2
/// shares, with an "all" row at the end. Order-independent.
pub fn dataset_statistics(records: &[CuratedRecord]) -> DatasetStatistics {
    let total = records.len() as u64;
    let mut by_source: BTreeMap<String, Vec<&CuratedRecord>> = BTreeMap::new();
    for r in records {
        by_source.entry(r.prompt.source.to_string()).or_default().push(r);
    }
    let mut rows: Vec<SourceStatsRow> = by_source
        .iter()
        .map(|(source, rs)| stats_row(source, rs, total))
        .collect();
    let all: Vec<&CuratedRecord> = records.iter().collect();
    rows.push(stats_row("all", &all, total));
    DatasetStatistics { rows, total }
}

impl DatasetStatistics {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("source,count,proportion,mean_tokens,sd_tokens,type1_share,type2_share\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.1},{:.1},{:.1},{:.1},{:.1}",
                csv_escape(&r.source),
                r.count,
                r.proportion,
                r.mean_tokens,
                r.sd_tokens,
                r.type1_share,
                r.type2_share
            );
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Figure data
// ---------------------------------------------------------------------------

/// Named CSV of per-key counts and rates for external plotting.
pub fn distribution_export(records: &[AuditRecord], group_by: GroupKey) -> (String, String) {
    let table = RateTable::from_records(records, group_by);
    let name = format!("distribution_{}", group_by.name());
    (name, table.to_csv())
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub title: String,
    /// Input journal file names mapped to their content hashes.
    pub input_hashes: BTreeMap<String, String>,
    /// Corrupt-line counts per input (skipped + parsed = total).
    pub skipped_lines: BTreeMap<String, usize>,
    pub table_files: Vec<PathBuf>,
    pub figure_files: Vec<PathBuf>,
}

struct LoadedJournals {
    audit_records: Vec<AuditRecord>,
    curated_records: Vec<CuratedRecord>,
    campaigns: Vec<(String, CampaignSummary)>,
    input_hashes: BTreeMap<String, String>,
    skipped_lines: BTreeMap<String, usize>,
}

fn load_journals(journals_dir: &Path) -> Result<LoadedJournals> {
    let mut loaded = LoadedJournals {
        audit_records: Vec::new(),
        curated_records: Vec::new(),
        campaigns: Vec::new(),
        input_hashes: BTreeMap::new(),
        skipped_lines: BTreeMap::new(),
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(journals_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();

    for path in paths {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if name.ends_with(".audit.jsonl") {
            let contents = read_journal::<AuditJournalLine>(&path)?;
            loaded.skipped_lines.insert(name.clone(), contents.corrupt_lines);
            loaded.input_hashes.insert(name, file_sha256(&path)?);
            for line in contents.entries {
                if let AuditJournalLine::Record(r) = line {
                    loaded.audit_records.push(*r);
                }
            }
        } else if name.ends_with(".curated.jsonl") {
            let contents = read_journal::<CuratedRecord>(&path)?;
            loaded.skipped_lines.insert(name.clone(), contents.corrupt_lines);
            loaded.input_hashes.insert(name, file_sha256(&path)?);
            loaded.curated_records.extend(contents.entries);
        } else if name.ends_with(".bypass.jsonl") {
            let contents = read_journal::<CampaignJournalLine>(&path)?;
            loaded.skipped_lines.insert(name.clone(), contents.corrupt_lines);
            loaded.input_hashes.insert(name.clone(), file_sha256(&path)?);
            let mut outcomes = Vec::new();
            let mut errors = 0u64;
            for line in contents.entries {
                match line {
                    CampaignJournalLine::Outcome(o) => outcomes.push(o),
                    CampaignJournalLine::Error { .. } => errors += 1,
                }
            }
            loaded
                .campaigns
                .push((name, CampaignSummary::from_outcomes(&outcomes, errors)));
        }
    }
    Ok(loaded)
}

/// Render everything found in `journals_dir` into `out_dir`:
/// `summary.txt`, `tables/*.csv`, `figures/*.csv`.
pub fn render_report(journals_dir: &Path, out_dir: &Path) -> Result<Report> {
    let loaded = load_journals(journals_dir)?;
    let tables_dir = out_dir.join("tables");
    let figures_dir = out_dir.join("figures");
    std::fs::create_dir_all(&tables_dir)?;
    std::fs::create_dir_all(&figures_dir)?;

    let mut table_files = Vec::new();
    let mut figure_files = Vec::new();
    let mut summary = String::new();
    summary.push_str("censorship audit report\n");
    summary.push_str("=======================\n\n");

    if loaded.input_hashes.is_empty() {
        summary.push_str("no inputs: the journal directory contains no recognized journals\n");
        summary.push_str("(expected *.audit.jsonl, *.curated.jsonl, or *.bypass.jsonl)\n");
    } else {
        summary.push_str("inputs:\n");
        for (name, hash) in &loaded.input_hashes {
            let skipped = loaded.skipped_lines.get(name).copied().unwrap_or(0);
            let _ = writeln!(summary, "  {name}  sha256={hash}  skipped_lines={skipped}");
        }
        summary.push('\n');
    }

    if !loaded.curated_records.is_empty() {
        let stats = dataset_statistics(&loaded.curated_records);
        let path = tables_dir.join("dataset_statistics.csv");
        std::fs::write(&path, stats.to_csv())?;
        table_files.push(path);

        summary.push_str("curated dataset:\n");
        let _ = writeln!(
            summary,
            "  {:<10} {:>7} {:>7} {:>16} {:>8} {:>8}",
            "source", "count", "prop%", "tokens(mean±sd)", "type1%", "type2%"
        );
        for row in &stats.rows {
            let _ = writeln!(
                summary,
                "  {:<10} {:>7} {:>7.1} {:>10.1} ± {:>4.1} {:>8.1} {:>8.1}",
                row.source,
                row.count,
                row.proportion,
                row.mean_tokens,
                row.sd_tokens,
                row.type1_share,
                row.type2_share
            );
        }
        summary.push('\n');
    }

    if !loaded.audit_records.is_empty() {
        summary.push_str("censorship rates:\n");
        for key in [
            GroupKey::Language,
            GroupKey::Source,
            GroupKey::Category,
            GroupKey::Model,
            GroupKey::Task,
        ] {
            let table = RateTable::from_records(&loaded.audit_records, key);
            let path = tables_dir.join(format!("rates_by_{}.csv", key.name()));
            std::fs::write(&path, table.to_csv())?;
            table_files.push(path);

            let (figure_name, figure_csv) = distribution_export(&loaded.audit_records, key);
            let figure_path = figures_dir.join(format!("{figure_name}.csv"));
            std::fs::write(&figure_path, figure_csv)?;
            figure_files.push(figure_path);

            let _ = writeln!(summary, "  by {}:", key.name());
            for row in &table.rows {
                let _ = writeln!(
                    summary,
                    "    {:<28} total={:<6} censored={:<6} rate={:>7.2}% (t1={} t2={} t3={})",
                    row.key,
                    row.total,
                    row.censored,
                    row.rate() * 100.0,
                    row.type1,
                    row.type2,
                    row.type3
                );
            }
        }
        summary.push('\n');
    }

    for (name, campaign) in &loaded.campaigns {
        let stem = name.trim_end_matches(".bypass.jsonl");
        let _ = writeln!(summary, "jailbreak campaign ({stem}):");
        let _ = writeln!(
            summary,
            "  total={} clean_bypassed={} rate={:.2}% residual(t1={} t2={} t3={}) failed={} errors={}",
            campaign.total,
            campaign.clean_bypassed,
            campaign.bypass_rate * 100.0,
            campaign.residual_type1,
            campaign.residual_type2,
            campaign.residual_type3,
            campaign.failed,
            campaign.errors
        );
        let figure_path = figures_dir.join(format!("{stem}_bypass_histogram.csv"));
        std::fs::write(&figure_path, campaign.histogram_csv())?;
        figure_files.push(figure_path);
        summary.push('\n');
    }

    summary.push_str("notes:\n");
    summary.push_str("  token-length spread is population standard deviation.\n");
    std::fs::write(out_dir.join("summary.txt"), &summary)?;

    Ok(Report {
        title: "censorship audit report".to_string(),
        input_hashes: loaded.input_hashes,
        skipped_lines: loaded.skipped_lines,
        table_files,
        figure_files,
    })
}
