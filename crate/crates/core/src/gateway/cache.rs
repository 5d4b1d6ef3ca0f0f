//! On-disk completion cache: an append-only JSONL journal keyed by
//! content hash. Crash-safe (a torn tail line is skipped on load),
//! diff-friendly, and re-playable; later entries for the same key win,
//! which is how forced re-asks overwrite stale judge output.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    model_id: String,
    text: String,
}

pub struct CompletionCache {
    entries: RwLock<HashMap<String, String>>,
    writer: Mutex<BufWriter<File>>,
}

impl CompletionCache {
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("completions.jsonl");
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for line in reader.lines() {
                let line = line?;
                if let Ok(parsed) = serde_json::from_str::<CacheLine>(&line) {
                    entries.insert(parsed.key, parsed.text);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(CompletionCache {
            entries: RwLock::new(entries),
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.read().unwrap().get(key).cloned()
    }

    pub fn put(&self, key: &str, model_id: &str, text: &str) -> Result<()> {
        let line = serde_json::to_string(&CacheLine {
            key: key.to_string(),
            model_id: model_id.to_string(),
            text: text.to_string(),
        })?;
        {
            let mut w = self.writer.lock().unwrap();
            writeln!(w, "{line}")?;
            w.flush()?;
        }
        self.entries
            .write()
            .unwrap()
            .insert(key.to_string(), text.to_string());
        Ok(())
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }
}
