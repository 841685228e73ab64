use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SchedulerError;

#[derive(Debug, Serialize, Deserialize)]
struct JournalLine {
    id: String,
}

/// JSONL log of item ids whose outcome has been produced.
#[derive(Debug)]
pub struct ProgressJournal {
    path: PathBuf,
    done: HashSet<String>,
    out: BufWriter<File>,
}

impl ProgressJournal {
    pub fn path_for(cache_dir: &Path, provider_id: &str, label: &str) -> PathBuf {
        cache_dir.join(format!("{provider_id}.{label}.progress.jsonl"))
    }

    /// Opens the journal. With `resume` existing ids are kept, otherwise the
    /// file is started afresh.
    pub fn open(path: PathBuf, resume: bool) -> Result<Self, SchedulerError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| SchedulerError::io(parent, e))?;
        }
        let mut done = HashSet::new();
        let mut torn = false;
        if resume {
            if let Ok(text) = fs::read_to_string(&path) {
                torn = !text.is_empty() && !text.ends_with('\n');
                for line in text.lines() {
                    match serde_json::from_str::<JournalLine>(line) {
                        Ok(l) => {
                            done.insert(l.id);
                        }
                        Err(_) if line.trim().is_empty() => {}
                        Err(e) => log::warn!("{}: ignoring journal line: {e}", path.display()),
                    }
                }
            }
        }
        let mut opts = OpenOptions::new();
        opts.create(true);
        if resume {
            opts.append(true);
        } else {
            opts.write(true).truncate(true);
        }
        let file = opts.open(&path).map_err(|e| SchedulerError::io(&path, e))?;
        let mut journal = Self {
            path,
            done,
            out: BufWriter::new(file),
        };
        if torn {
            let p = journal.path.clone();
            journal
                .out
                .write_all(b"\n")
                .map_err(|e| SchedulerError::io(&p, e))?;
        }
        Ok(journal)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, id: &str) -> bool {
        self.done.contains(id)
    }

    pub fn completed(&self) -> usize {
        self.done.len()
    }

    /// Records `id`; already present ids are not written again.
    pub fn record(&mut self, id: &str) -> Result<(), SchedulerError> {
        if !self.done.insert(id.to_string()) {
            return Ok(());
        }
        let line = serde_json::to_string(&JournalLine { id: id.to_string() })
            .expect("journal line serializes");
        let path = self.path.clone();
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| SchedulerError::io(&path, e))
    }
}
