use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::manifest::{AuditManifest, Overrides};
use super::{Audit, CommandSummary, ReportError, EXIT_CONFIG};

const DEFAULT_MANIFEST: &str = "modaudit.toml";

#[derive(Debug, Parser)]
#[command(name = "modaudit", version, about = "Black-box audit of text moderation classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Audit manifest (TOML). Defaults to ./modaudit.toml; without one, the
    /// run is configured from --provider/--mock and --dataset alone.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Provider id to audit; repeat for several. Replaces the manifest list.
    #[arg(long, global = true)]
    pub provider: Vec<String>,
    /// Dataset name from the manifest, or a corpus file path; repeatable.
    #[arg(long, global = true)]
    pub dataset: Vec<String>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Queries per second for every provider.
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Continue an interrupted query run from its progress journal.
    #[arg(long, global = true)]
    pub resume: bool,
    /// Use the offline lexicon mock instead of remote providers.
    #[arg(long, global = true)]
    pub mock: bool,
    /// Retries after the first attempt for transient failures.
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Score every dataset with every provider (cached, resumable).
    Query,
    /// Aggregate and per-group metrics with pinned AUC.
    Metrics,
    /// Perturbation sensitivity analysis.
    Psa,
    /// Shapley explanations of misclassifications and coding sheets.
    Shap,
    /// Query plus every enabled experiment, with an index of all outputs.
    Report,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            providers: self.provider.clone(),
            datasets: self.dataset.clone(),
            threshold: self.threshold,
            seed: self.seed,
            rate: self.rate,
            cache_dir: self.cache_dir.clone(),
            output_dir: self.out.clone(),
            max_retries: self.max_retries,
            mock: self.mock,
        }
    }

    fn audit(&self) -> Result<Audit, ReportError> {
        let overrides = self.overrides();
        let path = self.manifest.clone().unwrap_or_else(|| DEFAULT_MANIFEST.into());
        if self.manifest.is_some() || path.is_file() {
            return Audit::from_manifest_file(&path, &overrides, self.resume);
        }
        let mut m = AuditManifest::from_toml_str("providers = []\ndatasets = []\n")?;
        m.apply(&overrides)?;
        let digest = m.digest();
        let cwd = std::env::current_dir().map_err(|e| ReportError::io(&path, e))?;
        m.resolve_paths(&cwd);
        Audit::new(m, digest, self.resume)
    }

    pub fn execute(&self) -> Result<CommandSummary, ReportError> {
        let audit = self.audit()?;
        match self.command {
            Command::Query => audit.cmd_query(),
            Command::Metrics => audit.cmd_metrics(),
            Command::Psa => audit.cmd_psa(),
            Command::Shap => audit.cmd_shap(),
            Command::Report => audit.cmd_report(),
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 1 when some items failed, 2 on configuration errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.execute() {
        Ok(summary) => {
            for f in &summary.files {
                log::debug!("wrote {}", f.display());
            }
            if summary.item_failures > 0 {
                eprintln!("modaudit: {} item(s) failed", summary.item_failures);
            }
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("modaudit: error: {e}");
            EXIT_CONFIG
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_after_subcommand() {
        let cli = Cli::try_parse_from([
            "modaudit", "query", "--mock", "--dataset", "x.jsonl", "--seed", "3", "--max-retries", "2",
        ])
        .unwrap();
        assert_eq!(cli.command, Command::Query);
        let o = cli.overrides();
        assert!(o.mock);
        assert_eq!(o.seed, Some(3));
        assert_eq!(o.max_retries, Some(2));
    }

    #[test]
    fn bad_usage_is_exit_2() {
        assert_eq!(run(["modaudit", "frobnicate"]), 2);
        assert_eq!(run(["modaudit", "query", "--threshold", "abc"]), 2);
    }

    #[test]
    fn missing_manifest_is_config_error() {
        assert_eq!(run(["modaudit", "query", "--manifest", "/nonexistent/m.toml"]), 2);
    }
}
