use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::{AuditManifest, DatasetSpec, Overrides};
use super::plot::render_ctf_svg;
use super::scored::{read_scored, scored_path, write_jsonl_header, write_scored, ScoredRow};
use super::{ReportError, EXIT_OK, EXIT_PARTIAL};
use crate::corpus::{load_corpus, Corpus, CorpusFormat, GroupRegistry};
use crate::explain::coding::{write_coding_sheet, CodingRow};
use crate::explain::{
    annotate_top_tokens, cluster_tokens, explain_text, global_attributions, render_heatmap_svg,
    sample_misclassifications, AttributionRecord, Embeddings, ErrorKind, ExplainError, ReviewCandidate,
    ShapConfig, TextScorer, TokenAttribution, TokenCluster, WordPiece,
};
use crate::metrics::{
    equality_of_odds_gaps, pinned_auc, write_metrics_csv, write_pinned_csv, MetricsError, MetricsReport,
    PinnedRow, ScoredExample, AGGREGATE,
};
use crate::output::{fmt4, Stamp};
use crate::providers::{
    to_verdict, CategoryMapping, Credentials, EnvCredentials, MockTransport, ProviderRegistry, ProviderSpec,
    WireFormat,
};
use crate::psa::{
    builtin_token_table, ctf_scores, generate_counterfactuals, load_token_table, CtfResult, LabelSlice, PsaError,
    ScoredPair,
};
use crate::scheduler::{run_jobs, Clock, ProviderClient, QueryJob, RetryPolicy, SystemClock, Transport};

/// Attribution tokens shown per coding-sheet row.
const CODING_TOP_TOKENS: usize = 3;

/// What a command did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandSummary {
    /// Items that failed terminally (queries, verdicts, attributions).
    pub item_failures: usize,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl CommandSummary {
    pub fn merge(&mut self, other: CommandSummary) {
        self.item_failures += other.item_failures;
        self.files.extend(other.files);
        self.warnings.extend(other.warnings);
    }

    pub fn exit_code(&self) -> i32 {
        if self.item_failures > 0 {
            EXIT_PARTIAL
        } else {
            EXIT_OK
        }
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| ReportError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| ReportError::io(path, e))
}

/// Scores texts through a provider client for Shapley games.
pub struct VerdictScorer<'a> {
    pub client: &'a ProviderClient<'a>,
    pub mapping: CategoryMapping,
    pub threshold: f64,
}

impl TextScorer for VerdictScorer<'_> {
    fn score(&self, text: &str) -> Result<f64, ExplainError> {
        let resp = self
            .client
            .query(text)
            .map_err(|e| ExplainError::Scoring(e.to_string()))?;
        to_verdict(&resp, &self.mapping, self.threshold)
            .map(|v| v.score)
            .map_err(|e| ExplainError::Scoring(e.to_string()))
    }
}

/// A configured audit run.
pub struct Audit {
    manifest: AuditManifest,
    stamp: Stamp,
    providers: ProviderRegistry,
    groups: GroupRegistry,
    creds: Box<dyn Credentials + Send + Sync>,
    clock: Box<dyn Clock>,
    resume: bool,
}

impl Audit {
    /// Reads a manifest file, applies overrides and resolves relative paths
    /// against the manifest's directory.
    pub fn from_manifest_file(path: &Path, overrides: &Overrides, resume: bool) -> Result<Self, ReportError> {
        let mut m = AuditManifest::load(path)?;
        m.apply(overrides)?;
        let digest = m.digest();
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        m.resolve_paths(base);
        Self::new(m, digest, resume)
    }

    /// `manifest` must already have absolute or working-directory paths.
    pub fn new(manifest: AuditManifest, digest: String, resume: bool) -> Result<Self, ReportError> {
        manifest.validate()?;
        let providers = match &manifest.provider_registry {
            Some(p) => ProviderRegistry::load(p)?,
            None => ProviderRegistry::builtin(),
        };
        let groups = match &manifest.group_registry {
            Some(p) => GroupRegistry::load(p)?,
            None => GroupRegistry::builtin(),
        };
        for id in &manifest.providers {
            let spec = providers.get(id)?;
            if let Some(cats) = manifest.mappings.get(id) {
                mapping_from(spec, cats).validate(spec)?;
            }
        }
        if let Some(unknown) = manifest.mappings.keys().find(|k| !manifest.providers.contains(k)) {
            log::warn!("mapping for `{unknown}` ignored: provider not selected");
        }
        let stamp = Stamp::new(digest, manifest.seed);
        Ok(Self {
            manifest,
            stamp,
            providers,
            groups,
            creds: Box::new(EnvCredentials),
            clock: Box::new(SystemClock::new()),
            resume,
        })
    }

    pub fn with_credentials(mut self, creds: impl Credentials + Send + Sync + 'static) -> Self {
        self.creds = Box::new(creds);
        self
    }

    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn manifest(&self) -> &AuditManifest {
        &self.manifest
    }

    pub fn stamp(&self) -> &Stamp {
        &self.stamp
    }

    pub fn out_dir(&self) -> &Path {
        &self.manifest.output_dir
    }

    fn specs(&self) -> Result<Vec<ProviderSpec>, ReportError> {
        self.manifest
            .providers
            .iter()
            .map(|id| Ok(self.providers.get(id)?.clone()))
            .collect()
    }

    fn mapping(&self, spec: &ProviderSpec) -> CategoryMapping {
        match self.manifest.mappings.get(&spec.id) {
            Some(cats) => mapping_from(spec, cats),
            None => CategoryMapping::all(spec),
        }
    }

    fn check_credentials(&self, spec: &ProviderSpec) -> Result<(), ReportError> {
        match &spec.auth_env_var {
            Some(var) if self.creds.get(var).is_none() => Err(ReportError::MissingCredential {
                provider: spec.id.clone(),
                var: var.clone(),
            }),
            _ => Ok(()),
        }
    }

    fn transport(&self, spec: &ProviderSpec) -> Result<Box<dyn Transport>, ReportError> {
        self.check_credentials(spec)?;
        if spec.wire == WireFormat::Mock {
            return Ok(Box::new(MockTransport::new(self.manifest.mock.clone())));
        }
        #[cfg(feature = "http")]
        {
            Ok(Box::new(crate::scheduler::HttpTransport::new(std::time::Duration::from_secs(30))))
        }
        #[cfg(not(feature = "http"))]
        {
            Err(ReportError::NoHttp(spec.id.clone()))
        }
    }

    fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.manifest.max_retries + 1,
            ..RetryPolicy::default()
        }
    }

    fn client<'a>(&'a self, spec: &ProviderSpec, transport: &'a dyn Transport) -> Result<ProviderClient<'a>, ReportError> {
        Ok(ProviderClient::new(
            spec.clone(),
            &self.manifest.cache_dir,
            self.manifest.rate,
            self.retry(),
            &*self.clock,
            transport,
            &*self.creds,
        )?)
    }

    fn load(&self, d: &DatasetSpec) -> Result<Corpus, ReportError> {
        Ok(load_corpus(d.path(), CorpusFormat::from_path(d.path()), &self.groups)?)
    }

    fn scores_for(&self, provider: &str, d: &DatasetSpec) -> Result<Vec<ScoredRow>, ReportError> {
        let path = scored_path(self.out_dir(), provider, &d.name());
        if !path.is_file() {
            return Err(ReportError::MissingScores {
                provider: provider.into(),
                dataset: d.name(),
            });
        }
        read_scored(&path)
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.out_dir().join(rel)
    }

    fn write_csv(
        &self,
        rel: &str,
        summary: &mut CommandSummary,
        f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>,
    ) -> Result<(), ReportError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        let path = self.out(rel);
        write_file(&path, &buf)?;
        summary.files.push(path);
        Ok(())
    }

    /// Queries every (provider, dataset) pair and writes scored JSONL.
    /// Cached texts are never sent again.
    pub fn cmd_query(&self) -> Result<CommandSummary, ReportError> {
        let mut summary = CommandSummary::default();
        let specs = self.specs()?;
        let transports = specs.iter().map(|s| self.transport(s)).collect::<Result<Vec<_>, _>>()?;
        for d in &self.manifest.datasets {
            let corpus = self.load(d)?;
            let items: Vec<(String, String)> = corpus
                .examples()
                .iter()
                .map(|e| (e.id.clone(), e.text.clone()))
                .collect();
            let jobs: Vec<(QueryJob, &dyn Transport)> = specs
                .iter()
                .zip(&transports)
                .map(|(spec, t)| {
                    let mut job = QueryJob::new(spec.clone(), d.name(), items.clone(), &self.manifest.cache_dir);
                    job.rate_override = self.manifest.rate;
                    job.retry = self.retry();
                    job.resume = self.resume;
                    job.concurrency = self.manifest.concurrency;
                    (job, &**t)
                })
                .collect();
            let results = run_jobs(&jobs, &*self.clock, &*self.creds)?;
            let by_id: HashMap<&str, _> = corpus.examples().iter().map(|e| (e.id.as_str(), e)).collect();
            for ((outcomes, stats), spec) in results.into_iter().zip(&specs) {
                let mapping = self.mapping(spec);
                let mut rows = Vec::new();
                let mut errors: Vec<(String, String)> = Vec::new();
                for o in outcomes {
                    let ex = by_id[o.id.as_str()];
                    let verdict = o
                        .result
                        .map_err(|e| e.to_string())
                        .and_then(|r| {
                            to_verdict(&r, &mapping, self.manifest.threshold)
                                .map(|v| (v, r.model_version))
                                .map_err(|e| e.to_string())
                        });
                    match verdict {
                        Ok((v, model_version)) => rows.push(ScoredRow {
                            id: ex.id.clone(),
                            dataset: d.name(),
                            provider: spec.id.clone(),
                            text: ex.text.clone(),
                            gold_label: ex.gold_label,
                            groups: ex.groups.clone(),
                            score: v.score,
                            threshold: v.threshold,
                            flagged: v.is_flagged,
                            model_version,
                        }),
                        Err(e) => errors.push((o.id, e)),
                    }
                }
                log::info!(
                    "{}/{}: {} scored, {} failed ({} calls, {} cache hits, {} retries, {} resumed)",
                    spec.id,
                    d.name(),
                    rows.len(),
                    errors.len(),
                    stats.transport_calls,
                    stats.cache_hits,
                    stats.retries,
                    stats.resumed
                );
                let path = scored_path(self.out_dir(), &spec.id, &d.name());
                write_scored(&path, &rows, &self.stamp)?;
                summary.files.push(path.clone());
                let err_path = path.with_extension("errors.csv");
                if errors.is_empty() {
                    let _ = std::fs::remove_file(&err_path);
                } else {
                    for (id, e) in errors.iter().take(5) {
                        log::error!("{}/{}: item {id}: {e}", spec.id, d.name());
                    }
                    summary.item_failures += errors.len();
                    summary.warn(format!(
                        "{}/{}: {} items failed, see {}",
                        spec.id,
                        d.name(),
                        errors.len(),
                        err_path.display()
                    ));
                    let mut buf = Vec::new();
                    self.stamp.write_comment(&mut buf).map_err(|e| ReportError::io(&err_path, e))?;
                    let mut w = csv::Writer::from_writer(&mut buf);
                    w.write_record(["id", "error"])?;
                    for (id, e) in &errors {
                        w.write_record([id, e])?;
                    }
                    drop(w);
                    write_file(&err_path, &buf)?;
                    summary.files.push(err_path);
                }
            }
        }
        Ok(summary)
    }

    /// Aggregate and per-group metrics from the scored files.
    pub fn cmd_metrics(&self) -> Result<CommandSummary, ReportError> {
        let mut summary = CommandSummary::default();
        let threshold = self.manifest.threshold;
        let mut aggregates = Vec::new();
        let mut pinned_rows = Vec::new();
        let mut skipped: Vec<[String; 4]> = Vec::new();
        for provider in &self.manifest.providers {
            for d in &self.manifest.datasets {
                let dataset = d.name();
                let mut skip = |slice: &str, reason: &str| {
                    skipped.push([provider.clone(), dataset.clone(), slice.into(), reason.into()])
                };
                let scored: Vec<ScoredExample> = self
                    .scores_for(provider, d)?
                    .iter()
                    .map(ScoredRow::to_scored_example)
                    .collect();
                if scored.is_empty() {
                    skip(AGGREGATE, "no scored examples");
                    continue;
                }
                let agg = MetricsReport::compute(&scored, provider, &dataset, AGGREGATE, threshold)?;
                if agg.auc.is_none() {
                    skip(AGGREGATE, "single gold class; AUC undefined");
                }
                let mut reports = vec![agg.clone()];
                for g in self.groups.ids() {
                    let slice: Vec<ScoredExample> =
                        scored.iter().filter(|s| s.groups.contains(g)).cloned().collect();
                    if slice.is_empty() {
                        skip(g, "group absent from dataset");
                        continue;
                    }
                    let r = MetricsReport::compute(&slice, provider, &dataset, g, threshold)?;
                    if r.auc.is_none() {
                        skip(g, "single gold class; AUC undefined");
                    }
                    reports.push(r);
                }
                let gaps = equality_of_odds_gaps(&reports)?;
                for r in reports.into_iter().skip(1) {
                    let pinned = match pinned_auc(&scored, &r.slice, self.manifest.pinned_repeats, self.manifest.seed) {
                        Ok(p) => Some(p),
                        Err(MetricsError::OneClassOnly(_)) => None,
                        Err(e) => return Err(e.into()),
                    };
                    let gap = gaps[&r.slice];
                    pinned_rows.push(PinnedRow { report: r, pinned, gap });
                }
                aggregates.push(agg);
            }
        }
        self.write_csv("metrics/aggregate.csv", &mut summary, |b| {
            write_metrics_csv(&aggregates, &self.stamp, b)
        })?;
        self.write_csv("metrics/groups.csv", &mut summary, |b| {
            write_pinned_csv(&pinned_rows, &self.stamp, b)
        })?;
        self.write_csv("metrics/skipped.csv", &mut summary, |b| {
            self.stamp.write_comment(&mut *b)?;
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["provider", "dataset", "slice", "reason"])?;
            for s in &skipped {
                w.write_record(s)?;
            }
            w.flush()?;
            Ok(())
        })?;
        Ok(summary)
    }

    /// Counterfactual token fairness per group and gold-label slice.
    pub fn cmd_psa(&self) -> Result<CommandSummary, ReportError> {
        let mut summary = CommandSummary::default();
        let table = match &self.manifest.token_table {
            Some(p) => load_token_table(p)?,
            None => builtin_token_table(),
        };
        let corpora = self
            .manifest
            .datasets
            .iter()
            .map(|d| Ok((d.name(), self.load(d)?)))
            .collect::<Result<Vec<_>, ReportError>>()?;
        let mut results: Vec<CtfResult> = Vec::new();
        let mut pair_lines = Vec::new();
        write_jsonl_header(&self.stamp, &mut pair_lines).expect("write to memory");
        let mut any_pairs = false;
        for spec in self.specs()? {
            let transport = self.transport(&spec)?;
            let client = self.client(&spec, &*transport)?;
            let scorer = VerdictScorer {
                client: &client,
                mapping: self.mapping(&spec),
                threshold: self.manifest.threshold,
            };
            let mut scored = Vec::new();
            for (name, corpus) in &corpora {
                let set = generate_counterfactuals(corpus, &table);
                if !set.exclusions.is_empty() {
                    log::info!("{name}: {} sentences excluded (several groups)", set.exclusions.len());
                }
                any_pairs |= !set.pairs.is_empty();
                for pair in set.pairs {
                    let both = scorer
                        .score(&pair.marginalized_text)
                        .and_then(|m| Ok((m, scorer.score(&pair.dominant_text)?)));
                    let (m, d) = match both {
                        Ok(x) => x,
                        Err(e) => {
                            log::error!("{}: pair {}: {e}", spec.id, pair.pair_id);
                            summary.item_failures += 1;
                            continue;
                        }
                    };
                    let sp = ScoredPair {
                        pair,
                        marginalized_score: m,
                        dominant_score: d,
                    };
                    serde_json::to_writer(
                        &mut pair_lines,
                        &PairLine {
                            provider: &spec.id,
                            dataset: name,
                            pair_id: &sp.pair.pair_id,
                            group: &sp.pair.group,
                            label_slice: LabelSlice::of(sp.pair.gold_label).as_str(),
                            marginalized_text: &sp.pair.marginalized_text,
                            dominant_text: &sp.pair.dominant_text,
                            marginalized_score: m,
                            dominant_score: d,
                            ctf: sp.ctf(),
                        },
                    )
                    .expect("pair serializes");
                    pair_lines.push(b'\n');
                    scored.push(sp);
                }
            }
            let groups: BTreeSet<&str> = scored.iter().map(|p| p.pair.group.as_str()).collect();
            let mut mine = Vec::new();
            for g in groups {
                for slice in [LabelSlice::Toxic, LabelSlice::NonToxic] {
                    match ctf_scores(&scored, g, slice, &spec.id) {
                        Ok(r) => mine.push(r),
                        Err(PsaError::EmptySlice { .. }) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            let svg = render_ctf_svg(&spec.id, &mine, &self.stamp);
            let path = self.out(&format!("psa/ctf_{}.svg", spec.id));
            write_file(&path, svg.as_bytes())?;
            summary.files.push(path);
            results.extend(mine);
        }
        if !any_pairs {
            summary.warn("no counterfactual matches: no sentence contains a token-table entry".into());
        }
        self.write_csv("psa/ctf.csv", &mut summary, |b| {
            self.stamp.write_comment(&mut *b)?;
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["provider", "group", "label_slice", "n", "mean_ctf", "ci_low", "ci_high", "seed"])?;
            let full = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            for r in &results {
                w.write_record([
                    r.provider_id.clone(),
                    r.group.clone(),
                    r.label_slice.as_str().into(),
                    r.n.to_string(),
                    r.mean_ctf.to_string(),
                    full(r.ci_low()),
                    full(r.ci_high()),
                    self.manifest.seed.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        let path = self.out("psa/pairs.jsonl");
        write_file(&path, &pair_lines)?;
        summary.files.push(path);
        Ok(summary)
    }

    /// Shapley attributions of every misclassified example, global token
    /// rankings for false positives and false negatives, and coding sheets.
    pub fn cmd_shap(&self) -> Result<CommandSummary, ReportError> {
        let mut summary = CommandSummary::default();
        let s = &self.manifest.shap;
        let wp = match &s.vocab {
            Some(p) => WordPiece::load(p)?,
            None => WordPiece::builtin(),
        };
        let emb = match &s.embeddings {
            Some(p) => Embeddings::load(p)?,
            None => Embeddings::builtin(),
        };
        let cfg = ShapConfig {
            mask_token: s.mask_token.clone(),
            exact_cap: s.exact_cap,
            n_samples: s.n_samples,
            seed: self.manifest.seed,
        };
        let mut dump = Vec::new();
        write_jsonl_header(&self.stamp, &mut dump).expect("write to memory");
        let mut global: BTreeMap<ErrorKind, Vec<(String, usize, TokenCluster)>> = BTreeMap::new();
        let mut sheets: BTreeMap<ErrorKind, Vec<CodingRow>> = BTreeMap::new();
        for spec in self.specs()? {
            let mut candidates = Vec::new();
            for d in &self.manifest.datasets {
                candidates.extend(self.scores_for(&spec.id, d)?.into_iter().map(|r| ReviewCandidate {
                    id: r.id,
                    dataset: r.dataset,
                    provider: r.provider,
                    text: r.text,
                    score: r.score,
                    gold_label: r.gold_label,
                    flagged: r.flagged,
                }));
            }
            let transport = self.transport(&spec)?;
            let client = self.client(&spec, &*transport)?;
            let scorer = VerdictScorer {
                client: &client,
                mapping: self.mapping(&spec),
                threshold: self.manifest.threshold,
            };
            let mut atts: BTreeMap<ErrorKind, Vec<TokenAttribution>> = BTreeMap::new();
            for c in &candidates {
                let Some(kind) = c.error_kind() else { continue };
                let seq = wp.tokenize(&c.id, &c.text);
                if seq.is_empty() {
                    continue;
                }
                match explain_text(&scorer, &spec.id, &c.text, &seq, &cfg) {
                    Ok(a) => {
                        serde_json::to_writer(&mut dump, &AttributionRecord::from(&a)).expect("record serializes");
                        dump.push(b'\n');
                        atts.entry(kind).or_default().push(a);
                    }
                    Err(ExplainError::Scoring(e)) => {
                        log::error!("{}: cannot explain {}: {e}", spec.id, c.id);
                        summary.item_failures += 1;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            for kind in [ErrorKind::Fp, ErrorKind::Fn] {
                let mine = atts.get(&kind).map(Vec::as_slice).unwrap_or_default();
                let clusters = cluster_tokens(mine, &emb, s.sim_threshold)?;
                let ranked = global_attributions(&clusters, kind, s.top_k);
                log::info!("{} {}: {} attributions, {} clusters", spec.id, kind.as_str(), mine.len(), clusters.len());
                global
                    .entry(kind)
                    .or_default()
                    .extend(ranked.into_iter().enumerate().map(|(i, c)| (spec.id.clone(), i + 1, c)));
            }
            let mut sampled = sample_misclassifications(&candidates, s.coding_rate, self.manifest.seed)?;
            let all: Vec<TokenAttribution> = atts.into_values().flatten().collect();
            for (kind, rows) in [(ErrorKind::Fp, &mut sampled.fp), (ErrorKind::Fn, &mut sampled.fn_)] {
                annotate_top_tokens(rows, &all, CODING_TOP_TOKENS);
                for row in rows.iter() {
                    if let Some(a) = all.iter().find(|a| a.source_id == row.id) {
                        let path = self.out(&format!(
                            "shap/heatmaps/{}/{}_{}.svg",
                            spec.id,
                            kind.as_str(),
                            file_safe(&row.id)
                        ));
                        write_file(&path, render_heatmap_svg(a).as_bytes())?;
                        summary.files.push(path);
                    }
                }
                sheets.entry(kind).or_default().append(rows);
            }
        }
        let path = self.out("shap/attributions.jsonl");
        write_file(&path, &dump)?;
        summary.files.push(path);
        for kind in [ErrorKind::Fp, ErrorKind::Fn] {
            let rows = global.remove(&kind).unwrap_or_default();
            self.write_csv(&format!("shap/global_{}.csv", kind.as_str()), &mut summary, |b| {
                self.stamp.write_comment(&mut *b)?;
                let mut w = csv::Writer::from_writer(b);
                w.write_record([
                    "provider",
                    "rank",
                    "representative",
                    "members",
                    "mean_shap",
                    "mean_abs_shap",
                    "occurrences",
                ])?;
                for (provider, rank, c) in &rows {
                    w.write_record([
                        provider.clone(),
                        rank.to_string(),
                        c.representative.clone(),
                        c.members.iter().cloned().collect::<Vec<_>>().join(" "),
                        fmt4(c.mean_shap),
                        fmt4(c.mean_abs_shap),
                        c.occurrences.to_string(),
                    ])?;
                }
                w.flush()?;
                Ok(())
            })?;
            let rows = sheets.remove(&kind).unwrap_or_default();
            self.write_csv(&format!("shap/coding_{}.csv", kind.as_str()), &mut summary, |b| {
                write_coding_sheet(&rows, &self.stamp, b)
            })?;
        }
        Ok(summary)
    }

    /// Runs query and every enabled experiment, then indexes the outputs.
    pub fn cmd_report(&self) -> Result<CommandSummary, ReportError> {
        let mut summary = self.cmd_query()?;
        let exp = self.manifest.experiments;
        if exp.metrics {
            summary.merge(self.cmd_metrics()?);
        }
        if exp.psa {
            summary.merge(self.cmd_psa()?);
        }
        if exp.shap {
            summary.merge(self.cmd_shap()?);
        }
        let path = self.write_index()?;
        summary.files.push(path);
        Ok(summary)
    }

    /// `index.json` listing every file under the output directory with its
    /// digest, sorted by relative path.
    pub fn write_index(&self) -> Result<PathBuf, ReportError> {
        #[derive(Serialize)]
        struct Entry {
            path: String,
            sha256: String,
            bytes: u64,
        }
        #[derive(Serialize)]
        struct Index<'a> {
            tool_version: &'a str,
            manifest_digest: &'a str,
            seed: u64,
            threshold: f64,
            providers: &'a [String],
            datasets: Vec<String>,
            files: Vec<Entry>,
        }
        let index_path = self.out("index.json");
        let mut files = Vec::new();
        collect_files(self.out_dir(), &mut files)?;
        files.sort();
        let mut entries = Vec::new();
        for f in files.into_iter().filter(|f| *f != index_path) {
            let bytes = std::fs::read(&f).map_err(|e| ReportError::io(&f, e))?;
            let rel = f.strip_prefix(self.out_dir()).expect("under out dir");
            entries.push(Entry {
                path: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
                sha256: crate::sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        let index = Index {
            tool_version: &self.stamp.tool_version,
            manifest_digest: &self.stamp.manifest_digest,
            seed: self.stamp.seed,
            threshold: self.manifest.threshold,
            providers: &self.manifest.providers,
            datasets: self.manifest.datasets.iter().map(DatasetSpec::name).collect(),
            files: entries,
        };
        let mut buf = serde_json::to_vec_pretty(&index).expect("index serializes");
        buf.write_all(b"\n").expect("write to memory");
        write_file(&index_path, &buf)?;
        Ok(index_path)
    }
}

#[derive(Serialize)]
struct PairLine<'a> {
    provider: &'a str,
    dataset: &'a str,
    pair_id: &'a str,
    group: &'a str,
    label_slice: &'a str,
    marginalized_text: &'a str,
    dominant_text: &'a str,
    marginalized_score: f64,
    dominant_score: f64,
    ctf: f64,
}

fn mapping_from(spec: &ProviderSpec, cats: &[String]) -> CategoryMapping {
    CategoryMapping {
        provider_id: spec.id.clone(),
        selected_categories: cats.to_vec(),
        combiner: Default::default(),
    }
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir).map_err(|e| ReportError::io(dir, e))? {
        let path = entry.map_err(|e| ReportError::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn audit(dir: &Path, extra: &str) -> Audit {
        let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/mini_corpus.jsonl");
        let src = format!(
            "providers = [\"mock\"]\ndatasets = [\"{corpus}\"]\noutput_dir = \"out\"\ncache_dir = \"cache\"\n{extra}"
        );
        let path = dir.join("m.toml");
        std::fs::write(&path, src).unwrap();
        Audit::from_manifest_file(&path, &Overrides::default(), false).unwrap()
    }

    #[test]
    fn query_then_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let a = audit(dir.path(), "");
        let s = a.cmd_query().unwrap();
        assert_eq!(s.item_failures, 0);
        let rows = read_scored(&scored_path(a.out_dir(), "mock", "mini_corpus")).unwrap();
        assert_eq!(rows.len(), 64);
        a.cmd_metrics().unwrap();
        let agg = std::fs::read_to_string(a.out_dir().join("metrics/aggregate.csv")).unwrap();
        assert_eq!(agg.lines().count(), 3);
    }

    #[test]
    fn metrics_without_scores_fails() {
        let dir = tempfile::tempdir().unwrap();
        let a = audit(dir.path(), "");
        assert!(matches!(a.cmd_metrics(), Err(ReportError::MissingScores { .. })));
    }

    #[test]
    fn missing_credential_names_variable() {
        let dir = tempfile::tempdir().unwrap();
        let a = audit(dir.path(), "").with_credentials(BTreeMap::<String, String>::new());
        let mut m = a.manifest().clone();
        m.providers = vec!["openai".into()];
        let a = Audit::new(m, "d".into(), false)
            .unwrap()
            .with_credentials(BTreeMap::<String, String>::new());
        let err = a.cmd_query().unwrap_err();
        assert!(err.to_string().contains("MODAUDIT_OPENAI_KEY"), "{err}");
    }

    #[test]
    fn neutral_mock_has_zero_ctf() {
        let dir = tempfile::tempdir().unwrap();
        let a = audit(dir.path(), "");
        a.cmd_psa().unwrap();
        let csv = std::fs::read_to_string(a.out_dir().join("psa/ctf.csv")).unwrap();
        let mut rdr = crate::output::csv_reader(csv.as_bytes());
        let mut n = 0;
        for r in rdr.records() {
            assert_eq!(r.unwrap()[4].parse::<f64>().unwrap(), 0.0);
            n += 1;
        }
        assert!(n > 0);
    }

    #[test]
    fn file_names_are_safe() {
        assert_eq!(file_safe("a/b c#1"), "a_b_c_1");
    }
}
