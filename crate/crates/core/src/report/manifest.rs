use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::explain::{DEFAULT_EXACT_CAP, DEFAULT_MASK, DEFAULT_PERMUTATIONS, DEFAULT_SIM_THRESHOLD, DEFAULT_TOP_K};
use crate::metrics::DEFAULT_PINNED_REPEATS;
use crate::providers::{MockLexicon, DEFAULT_THRESHOLD};

/// Largest exact-mode cap accepted; 2^20 coalitions per sentence.
pub const MAX_EXACT_CAP: usize = 20;

/// A corpus file given either as a bare path or as `{ name, path }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    Path(PathBuf),
    Named { name: String, path: PathBuf },
}

impl DatasetSpec {
    pub fn path(&self) -> &Path {
        match self {
            DatasetSpec::Path(p) | DatasetSpec::Named { path: p, .. } => p,
        }
    }

    /// Explicit name, else the file stem.
    pub fn name(&self) -> String {
        match self {
            DatasetSpec::Named { name, .. } => name.clone(),
            DatasetSpec::Path(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
        }
    }

    fn with_path(&self, path: PathBuf) -> Self {
        match self {
            DatasetSpec::Path(_) => DatasetSpec::Path(path),
            DatasetSpec::Named { name, .. } => DatasetSpec::Named {
                name: name.clone(),
                path,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiments {
    #[serde(default = "yes")]
    pub metrics: bool,
    #[serde(default = "yes")]
    pub psa: bool,
    #[serde(default = "yes")]
    pub shap: bool,
}

impl Default for Experiments {
    fn default() -> Self {
        Self {
            metrics: true,
            psa: true,
            shap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapSettings {
    #[serde(default = "default_mask")]
    pub mask_token: String,
    #[serde(default = "default_exact_cap")]
    pub exact_cap: usize,
    #[serde(default = "default_permutations")]
    pub n_samples: usize,
    #[serde(default = "default_sim")]
    pub sim_threshold: f64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Fraction of each misclassification stratum put on coding sheets.
    #[serde(default = "default_coding_rate")]
    pub coding_rate: f64,
    /// WordPiece vocabulary; the bundled one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    /// `token v1 ... vd` embeddings; the bundled ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
}

impl Default for ShapSettings {
    fn default() -> Self {
        Self {
            mask_token: default_mask(),
            exact_cap: DEFAULT_EXACT_CAP,
            n_samples: DEFAULT_PERMUTATIONS,
            sim_threshold: DEFAULT_SIM_THRESHOLD,
            top_k: DEFAULT_TOP_K,
            coding_rate: default_coding_rate(),
            vocab: None,
            embeddings: None,
        }
    }
}

/// Run configuration, read from a single TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditManifest {
    pub providers: Vec<String>,
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    /// Overrides every provider's published rate, in queries per second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Retries after the first attempt for transient failures.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_repeats")]
    pub pinned_repeats: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_registry: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_registry: Option<PathBuf>,
    /// Categories feeding each provider's verdict; all advertised ones when
    /// a provider is not listed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mappings: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub experiments: Experiments,
    #[serde(default = "default_mock")]
    pub mock: MockLexicon,
    #[serde(default)]
    pub shap: ShapSettings,
}

fn yes() -> bool {
    true
}
fn default_mask() -> String {
    DEFAULT_MASK.into()
}
fn default_exact_cap() -> usize {
    DEFAULT_EXACT_CAP
}
fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}
fn default_sim() -> f64 {
    DEFAULT_SIM_THRESHOLD
}
fn default_top_k() -> usize {
    DEFAULT_TOP_K
}
fn default_coding_rate() -> f64 {
    0.05
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_output_dir() -> PathBuf {
    "modaudit-out".into()
}
fn default_cache_dir() -> PathBuf {
    ".modaudit-cache".into()
}
fn default_max_retries() -> u32 {
    4
}
fn default_concurrency() -> usize {
    1
}
fn default_repeats() -> usize {
    DEFAULT_PINNED_REPEATS
}
fn default_mock() -> MockLexicon {
    MockLexicon::new(0.25)
}

/// Command-line values that replace manifest fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Replaces the provider list.
    pub providers: Vec<String>,
    /// Each entry is a dataset name to keep, or a corpus path to add.
    pub datasets: Vec<String>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub rate: Option<f64>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub max_retries: Option<u32>,
    /// Use only the offline mock provider.
    pub mock: bool,
}

impl AuditManifest {
    pub fn from_toml_str(src: &str) -> Result<Self, ReportError> {
        toml::from_str(src).map_err(|e| ReportError::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let src = std::fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
        Self::from_toml_str(&src)
    }

    /// Applies command-line overrides. Paths given on the command line are
    /// taken relative to the working directory, so they are made absolute.
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ReportError> {
        let cwd = std::env::current_dir().map_err(|e| ReportError::io(Path::new("."), e))?;
        if o.mock {
            self.providers = vec!["mock".into()];
        }
        if !o.providers.is_empty() {
            self.providers = o.providers.clone();
        }
        if !o.datasets.is_empty() {
            let (paths, names): (Vec<&String>, Vec<&String>) =
                o.datasets.iter().partition(|d| Path::new(d).is_file());
            if !names.is_empty() {
                let before = self.datasets.clone();
                self.datasets.retain(|d| names.iter().any(|n| **n == d.name()));
                if let Some(n) = names.iter().find(|n| !before.iter().any(|d| d.name() == ***n)) {
                    return Err(ReportError::Manifest(format!(
                        "dataset `{n}` is neither a manifest dataset nor an existing file"
                    )));
                }
            } else {
                self.datasets.clear();
            }
            self.datasets
                .extend(paths.into_iter().map(|p| DatasetSpec::Path(cwd.join(p))));
        }
        if let Some(t) = o.threshold {
            self.threshold = t;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.rate {
            self.rate = Some(r);
        }
        if let Some(d) = &o.cache_dir {
            self.cache_dir = cwd.join(d);
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = cwd.join(d);
        }
        if let Some(m) = o.max_retries {
            self.max_retries = m;
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, so formatting and comments in
    /// the source file do not affect it.
    pub fn digest(&self) -> String {
        crate::sha256_hex(toml::to_string(self).expect("manifest serializes"))
    }

    /// Makes every relative path relative to `base` instead.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        self.datasets = self.datasets.iter().map(|d| d.with_path(fix(d.path()))).collect();
        self.output_dir = fix(&self.output_dir);
        self.cache_dir = fix(&self.cache_dir);
        for p in [
            &mut self.token_table,
            &mut self.provider_registry,
            &mut self.group_registry,
            &mut self.shap.vocab,
            &mut self.shap.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            *p = fix(p);
        }
    }

    /// Range checks and existence of every input path.
    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |msg: String| Err(ReportError::Manifest(msg));
        if self.providers.is_empty() {
            return bad("no providers configured".into());
        }
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} is outside [0, 1]", self.threshold));
        }
        if let Some(r) = self.rate {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("rate {r} must be a positive number"));
            }
        }
        if self.concurrency == 0 || self.pinned_repeats == 0 {
            return bad("concurrency and pinned_repeats must be at least 1".into());
        }
        let s = &self.shap;
        if s.exact_cap > MAX_EXACT_CAP {
            return bad(format!("shap.exact_cap {} exceeds {MAX_EXACT_CAP}", s.exact_cap));
        }
        if s.n_samples == 0 || s.top_k == 0 {
            return bad("shap.n_samples and shap.top_k must be at least 1".into());
        }
        if !(s.sim_threshold > 0.0 && s.sim_threshold <= 1.0) {
            return bad(format!("shap.sim_threshold {} is outside (0, 1]", s.sim_threshold));
        }
        if !(s.coding_rate > 0.0 && s.coding_rate <= 1.0) {
            return bad(format!("shap.coding_rate {} is outside (0, 1]", s.coding_rate));
        }
        let mut names: Vec<String> = self.datasets.iter().map(DatasetSpec::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("dataset name `{}` used twice", w[0]));
        }
        let inputs = self
            .datasets
            .iter()
            .map(DatasetSpec::path)
            .chain(self.token_table.as_deref())
            .chain(self.provider_registry.as_deref())
            .chain(self.group_registry.as_deref())
            .chain(s.vocab.as_deref())
            .chain(s.embeddings.as_deref());
        for p in inputs {
            if !p.is_file() {
                return bad(format!("input file {} does not exist", p.display()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
providers = ["mock"]
datasets = ["data/mini.jsonl", { name = "other", path = "x/y.csv" }]
"#;

    #[test]
    fn defaults_fill_in() {
        let m = AuditManifest::from_toml_str(MINIMAL).unwrap();
        assert_eq!(m.threshold, 0.5);
        assert_eq!(m.max_retries, 4);
        assert_eq!(m.pinned_repeats, 20);
        assert_eq!(m.shap.exact_cap, 12);
        assert_eq!(m.shap.coding_rate, 0.05);
        assert!(m.experiments.psa);
        assert_eq!(m.datasets[0].name(), "mini");
        assert_eq!(m.datasets[1].name(), "other");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(AuditManifest::from_toml_str("providers=[]\ndatasets=[]\ntreshold=0.3\n").is_err());
    }

    #[test]
    fn digest_ignores_formatting_but_not_values() {
        let a = AuditManifest::from_toml_str(MINIMAL).unwrap();
        let b = AuditManifest::from_toml_str(&format!("# comment\n{MINIMAL}\n\n")).unwrap();
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.apply(&Overrides {
            seed: Some(9),
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let mut m = AuditManifest::from_toml_str(MINIMAL).unwrap();
        m.resolve_paths(Path::new("/base"));
        assert_eq!(m.datasets[0].path(), Path::new("/base/data/mini.jsonl"));
        assert_eq!(m.output_dir, Path::new("/base/modaudit-out"));
        assert!(matches!(m.validate(), Err(ReportError::Manifest(msg)) if msg.contains("does not exist")));
    }

    #[test]
    fn overrides() {
        let mut m = AuditManifest::from_toml_str(MINIMAL).unwrap();
        m.apply(&Overrides {
            providers: vec!["openai".into()],
            datasets: vec!["other".into()],
            threshold: Some(0.7),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(m.providers, vec!["openai"]);
        assert_eq!(m.datasets.len(), 1);
        assert_eq!(m.threshold, 0.7);
        let mut m = AuditManifest::from_toml_str(MINIMAL).unwrap();
        assert!(m
            .apply(&Overrides {
                datasets: vec!["nope".into()],
                ..Default::default()
            })
            .is_err());
        let mut m = AuditManifest::from_toml_str(MINIMAL).unwrap();
        m.apply(&Overrides {
            mock: true,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(m.providers, vec!["mock"]);
    }

    #[test]
    fn range_checks() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.jsonl"), "").unwrap();
        let src = "providers=[\"mock\"]\ndatasets=[\"c.jsonl\"]\n";
        let mut m = AuditManifest::from_toml_str(src).unwrap();
        m.resolve_paths(dir.path());
        m.validate().unwrap();
        for edit in [
            |m: &mut AuditManifest| m.threshold = 1.5,
            |m: &mut AuditManifest| m.shap.exact_cap = 30,
            |m: &mut AuditManifest| m.shap.coding_rate = 0.0,
            |m: &mut AuditManifest| m.rate = Some(-1.0),
            |m: &mut AuditManifest| m.providers.clear(),
        ] {
            let mut bad = m.clone();
            edit(&mut bad);
            assert!(bad.validate().is_err());
        }
    }
}
