use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PsaError;

const BUILTIN_TABLE: &str = include_str!("../../assets/token_table.csv");

/// A marginalized identity token and its dominant counterpart, stored in
/// lowercase canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenPair {
    pub group: String,
    pub marginalized: String,
    pub dominant: String,
}

impl TokenPair {
    pub fn new(group: &str, marginalized: &str, dominant: &str) -> Self {
        Self {
            group: group.trim().to_lowercase(),
            marginalized: marginalized.trim().to_lowercase(),
            dominant: dominant.trim().to_lowercase(),
        }
    }
}

/// The bundled 34-pair table covering the eight default groups.
pub fn builtin_token_table() -> Vec<TokenPair> {
    parse_token_table(BUILTIN_TABLE.as_bytes()).expect("bundled token table is valid")
}

pub fn load_token_table(path: &Path) -> Result<Vec<TokenPair>, PsaError> {
    let bytes = std::fs::read(path).map_err(|source| PsaError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_token_table(&bytes)
}

/// Parses CSV with a `group,marginalized,dominant` header. A marginalized
/// token may appear only once in the whole table.
pub fn parse_token_table(bytes: &[u8]) -> Result<Vec<TokenPair>, PsaError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| PsaError::Table {
            line: 1,
            detail: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PsaError::Table {
                line: 1,
                detail: format!("missing column `{name}`"),
            })
    };
    let (g, m, d) = (col("group")?, col("marginalized")?, col("dominant")?);

    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| PsaError::Table {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            detail: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        if field(g).is_empty() || field(m).is_empty() || field(d).is_empty() {
            return Err(PsaError::EmptyToken { line });
        }
        let pair = TokenPair::new(field(g), field(m), field(d));
        if !seen.insert(pair.marginalized.clone()) {
            return Err(PsaError::DuplicatePair {
                line,
                token: pair.marginalized,
            });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}
