//! Append-only line-delimited JSON journals.
//!
//! Journals are the durable record of every audit, jailbreak, and
//! comparison run: one JSON object per line, appended as results are
//! produced, safe to re-read after an interrupted run.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;
use crate::util::sha256_hex;

/// Serializing writer shared between worker threads. Each line is
/// flushed on write so an interrupted run loses at most the line in
/// progress.
pub struct JournalWriter {
    inner: Mutex<BufWriter<File>>,
}

impl JournalWriter {
    /// Open for appending, creating the file (and parent dirs) if needed.
    pub fn append_to(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn write_line<T: Serialize>(&self, value: &T) -> Result<()> {
        let line = serde_json::to_string(value)?;
        let mut w = self.inner.lock().unwrap();
        writeln!(w, "{line}")?;
        w.flush()?;
        Ok(())
    }
}

/// Parsed journal contents plus corrupt-line accounting.
pub struct JournalContents<T> {
    pub entries: Vec<T>,
    pub corrupt_lines: usize,
    pub total_lines: usize,
}

/// Read a journal, skipping (and counting) lines that fail to parse.
/// `skipped + parsed = total` always holds.
pub fn read_journal<T: DeserializeOwned>(path: &Path) -> Result<JournalContents<T>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut entries = Vec::new();
    let mut corrupt = 0usize;
    let mut total = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match serde_json::from_str::<T>(&line) {
            Ok(v) => entries.push(v),
            Err(_) => corrupt += 1,
        }
    }
    Ok(JournalContents {
        entries,
        corrupt_lines: corrupt,
        total_lines: total,
    })
}

/// Read a journal if the file exists; absent files read as empty.
pub fn read_journal_if_exists<T: DeserializeOwned>(path: &Path) -> Result<JournalContents<T>> {
    if path.exists() {
        read_journal(path)
    } else {
        Ok(JournalContents {
            entries: Vec::new(),
            corrupt_lines: 0,
            total_lines: 0,
        })
    }
}

/// Write a full collection as a journal in one pass (used for stage
/// snapshots and dataset exports).
pub fn write_journal<T: Serialize>(path: &Path, entries: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    for e in entries {
        writeln!(w, "{}", serde_json::to_string(e)?)?;
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 of a file's bytes, for traceability records.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(sha256_hex(&bytes))
}
