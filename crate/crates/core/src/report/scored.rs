use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::corpus::Label;
use crate::metrics::ScoredExample;
use crate::output::Stamp;

/// One classified example in a scores file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRow {
    pub id: String,
    pub dataset: String,
    pub provider: String,
    pub text: String,
    pub gold_label: Label,
    pub groups: BTreeSet<String>,
    pub score: f64,
    pub threshold: f64,
    pub flagged: bool,
    #[serde(default)]
    pub model_version: Option<String>,
}

impl ScoredRow {
    pub fn to_scored_example(&self) -> ScoredExample {
        ScoredExample {
            id: self.id.clone(),
            gold_label: self.gold_label,
            score: self.score,
            groups: self.groups.clone(),
        }
    }
}

/// Header line of every JSONL artifact.
#[derive(Debug, Serialize, Deserialize)]
struct JsonlHeader {
    modaudit: String,
    manifest: String,
    seed: u64,
}

pub(crate) fn write_jsonl_header<W: Write>(stamp: &Stamp, mut w: W) -> std::io::Result<()> {
    let h = JsonlHeader {
        modaudit: stamp.tool_version.clone(),
        manifest: stamp.manifest_digest.clone(),
        seed: stamp.seed,
    };
    writeln!(w, "{}", serde_json::to_string(&h).expect("header serializes"))
}

fn is_header(line: &str) -> bool {
    serde_json::from_str::<JsonlHeader>(line).is_ok()
}

pub fn scored_path(out_dir: &Path, provider: &str, dataset: &str) -> PathBuf {
    out_dir.join("scores").join(format!("{provider}__{dataset}.jsonl"))
}

pub fn write_scored(path: &Path, rows: &[ScoredRow], stamp: &Stamp) -> Result<(), ReportError> {
    let mut buf = Vec::new();
    write_jsonl_header(stamp, &mut buf).expect("write to memory");
    for r in rows {
        serde_json::to_writer(&mut buf, r).expect("row serializes");
        buf.push(b'\n');
    }
    super::commands::write_file(path, &buf)
}

pub fn read_scored(path: &Path) -> Result<Vec<ScoredRow>, ReportError> {
    let f = std::fs::File::open(path).map_err(|e| ReportError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| ReportError::io(path, e))?;
        if line.trim().is_empty() || (i == 0 && is_header(&line)) {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| ReportError::BadScores {
            path: path.to_path_buf(),
            line: i + 1,
            detail: e.to_string(),
        })?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_skips_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = scored_path(dir.path(), "mock", "mini");
        let row = ScoredRow {
            id: "a".into(),
            dataset: "mini".into(),
            provider: "mock".into(),
            text: "t".into(),
            gold_label: Label::Hate,
            groups: BTreeSet::from(["asian".to_string()]),
            score: 0.25,
            threshold: 0.5,
            flagged: false,
            model_version: None,
        };
        write_scored(&path, std::slice::from_ref(&row), &Stamp::new("d", 1)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"modaudit\""));
        assert_eq!(read_scored(&path).unwrap(), vec![row]);
    }

    #[test]
    fn bad_line_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        std::fs::write(&path, "{\"id\":1}\n").unwrap();
        assert!(matches!(read_scored(&path), Err(ReportError::BadScores { line: 1, .. })));
    }
}
