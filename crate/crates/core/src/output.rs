//! Provenance stamp and number formatting shared by every report writer.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// Identifies the run that produced an output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub tool_version: String,
    /// SHA-256 of the manifest bytes the run was configured from.
    pub manifest_digest: String,
    pub seed: u64,
}

impl Stamp {
    pub fn new(manifest_digest: impl Into<String>, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            manifest_digest: manifest_digest.into(),
            seed,
        }
    }

    /// `# modaudit <version> manifest=<digest> seed=<seed>`, the first line
    /// of every CSV file.
    pub fn comment_line(&self) -> String {
        format!(
            "# modaudit {} manifest={} seed={}",
            self.tool_version, self.manifest_digest, self.seed
        )
    }

    pub fn write_comment<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.comment_line())
    }
}

/// Four decimal places.
pub fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

/// Four decimal places, or an empty cell for an undefined value.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt4).unwrap_or_default()
}

/// CSV reader that skips the stamp comment.
pub fn csv_reader<R: io::Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r)
}
