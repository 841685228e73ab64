//! Offline acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Run with `cargo test --test acceptance`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::convert::Infallible;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modaudit::corpus::{Corpus, GroupRegistry, Label, LabeledExample};
use modaudit::explain::{
    cohens_kappa, exact_shapley_values, sampled_shapley_values, shap_exact, FpCode, WordPiece,
};
use modaudit::metrics::{pinned_auc, roc_auc, threshold_metrics, ConfusionCounts, ScoredExample};
use modaudit::output::{csv_reader, fmt_opt};
use modaudit::providers::{MockLexicon, MockTransport, ProviderResponse, ProviderSpec, WireRequest};
use modaudit::psa::{
    builtin_token_table, ctf_scores, generate_counterfactuals, replace_token, LabelSlice, ScoredPair,
};
use modaudit::report::{Audit, Overrides};
use modaudit::scheduler::{
    max_issues_per_window, run_job, Clock, QueryJob, SimClock, Transport, TransportError,
    TransportResponse,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))
}

fn scored(id: usize, hate: bool, score: f64, groups: &[&str]) -> ScoredExample {
    ScoredExample {
        id: format!("x{id}"),
        gold_label: Label::from(hate),
        score,
        groups: groups.iter().map(|g| g.to_string()).collect(),
    }
}

// Scores on a coarse grid so that ties are common.
fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Vec<ScoredExample> {
    let grid = rng.random_range(3..=20);
    let mut v: Vec<ScoredExample> = (0..n)
        .map(|i| {
            let score = rng.random_range(0..=grid) as f64 / grid as f64;
            scored(i, rng.random_bool(0.4), score, &[])
        })
        .collect();
    v[0].gold_label = Label::Hate;
    v[1].gold_label = Label::NonHate;
    v
}

fn brute_force_auc(xs: &[ScoredExample]) -> f64 {
    let pos: Vec<f64> = xs.iter().filter(|x| x.gold_label.is_hate()).map(|x| x.score).collect();
    let neg: Vec<f64> = xs.iter().filter(|x| !x.gold_label.is_hate()).map(|x| x.score).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn auc_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(2..=200);
        let xs = random_instance(&mut rng, n);
        let fast = roc_auc(&xs).map_err(|e| e.to_string())?;
        worst = worst.max((fast - brute_force_auc(&xs)).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    within_time(start, Duration::from_secs(5))?;
    Ok(format!("500 instances, max deviation {worst:e}"))
}

fn pinned_auc_noop() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Group equal to the whole dataset.
    for trial in 0..20 {
        let mut xs = random_instance(&mut rng, 120);
        xs.iter_mut().for_each(|x| {
            x.groups.insert("all".into());
        });
        let agg = roc_auc(&xs).unwrap();
        let p = pinned_auc(&xs, "all", 20, trial).map_err(|e| e.to_string())?;
        ensure(p.mean_auc == agg, || {
            format!("trial {trial}: pinned {} != aggregate {agg}", p.mean_auc)
        })?;
    }
    // Group drawn from the same distribution as the rest: the dataset is
    // four copies of one base sample and the group is one of the copies.
    let mut hits = 0;
    for trial in 0..100u64 {
        let base = random_instance(&mut rng, 60);
        let mut xs = Vec::new();
        for copy in 0..4 {
            for (i, b) in base.iter().enumerate() {
                let groups: &[&str] = if copy == 0 { &["g"] } else { &[] };
                xs.push(scored(copy * 1000 + i, b.gold_label.is_hate(), b.score, groups));
            }
        }
        let agg = roc_auc(&xs).unwrap();
        let p = pinned_auc(&xs, "g", 20, trial).map_err(|e| e.to_string())?;
        if (p.mean_auc - agg).abs() <= 3.0 * p.std_error {
            hits += 1;
        }
    }
    ensure(hits >= 95, || format!("only {hits}/100 trials within 3 SE"))?;
    Ok(format!("full-dataset group exact; {hits}/100 trials within 3 SE"))
}

/// Random game on `n` players where the last player is a dummy and players
/// 0 and 1 are interchangeable.
fn fuzzed_game(rng: &mut ChaCha8Rng, n: usize) -> impl Fn(u64) -> f64 {
    let table: Vec<f64> = (0..1u64 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
    move |mask: u64| {
        let mut m = mask & !(1 << (n - 1));
        if (m & 0b11).count_ones() == 1 {
            m = (m & !0b11) | 0b01;
        }
        table[m as usize]
    }
}

fn shapley_axioms() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut eff, mut dummy, mut sym): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..200 {
        let n = rng.random_range(3..=10);
        let v = fuzzed_game(&mut rng, n);
        let phi = exact_shapley_values(n, |m| Ok::<_, Infallible>(v(m))).unwrap();
        let total: f64 = phi.iter().sum();
        eff = eff.max((total - (v((1 << n) - 1) - v(0))).abs());
        dummy = dummy.max(phi[n - 1].abs());
        sym = sym.max((phi[0] - phi[1]).abs());
    }
    ensure(eff <= 1e-9, || format!("efficiency off by {eff:e}"))?;
    ensure(dummy <= 1e-12, || format!("dummy value {dummy:e}"))?;
    ensure(sym <= 1e-12, || format!("symmetric players differ by {sym:e}"))?;

    let lex = MockLexicon::new(0.2)
        .with_weight("gay", 0.3)
        .with_weight("love", -0.05)
        .with_weight("night", 0.1);
    let text = "my gay friends and I love the long summer night";
    let seq = WordPiece::builtin().tokenize("additive", text);
    let att = shap_exact(&lex, "mock", text, &seq, "[MASK]", 12).map_err(|e| e.to_string())?;
    let mut additive: f64 = 0.0;
    for (tok, phi) in att.tokens.iter().zip(&att.shapley) {
        additive = additive.max((phi - lex.weight(tok)).abs());
    }
    ensure(additive <= 1e-12, || format!("additive oracle off by {additive:e}"))?;
    within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "efficiency {eff:.1e}, dummy {dummy:.1e}, symmetry {sym:.1e}, additive {additive:.1e}"
    ))
}

fn sampled_convergence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut within, mut total) = (0, 0);
    for instance in 0..50u64 {
        let table: Vec<f64> = (0..256).map(|_| rng.random_range(0.0..1.0)).collect();
        let v = |m: u64| table[m as usize];
        let exact = exact_shapley_values(8, |m| Ok::<_, Infallible>(v(m))).unwrap();
        let bits = |members: &[bool]| {
            members.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i))
        };
        let est = sampled_shapley_values(8, 1000, instance, |m| Ok::<_, Infallible>(v(bits(m)))).unwrap();
        for ((v, se), x) in est.values.iter().zip(&est.std_errors).zip(&exact) {
            total += 1;
            if (v - x).abs() <= 3.0 * se + 1e-12 {
                within += 1;
            }
        }
    }
    let share = within as f64 / total as f64;
    ensure(share >= 0.99, || format!("{within}/{total} estimates within 3 SE"))?;
    Ok(format!("{within}/{total} token estimates within 3 SE"))
}

fn ctf_arithmetic() -> Check {
    let example = LabeledExample {
        id: "e1".into(),
        text: "Being Asian is fun".into(),
        gold_label: Label::NonHate,
        annotator_labels: vec![],
        groups: ["asian".to_string()].into(),
        dataset: "fixture".into(),
    };
    let corpus = Corpus::from_examples(vec![example], &GroupRegistry::builtin()).map_err(|e| e.to_string())?;
    let set = generate_counterfactuals(&corpus, &builtin_token_table());
    let responses: HashMap<&str, f64> = [("being asian is fun", 0.21), ("being white is fun", 0.33)].into();
    let pairs: Vec<ScoredPair> = set
        .pairs
        .iter()
        .map(|p| ScoredPair {
            pair: p.clone(),
            marginalized_score: responses[p.marginalized_text.to_lowercase().as_str()],
            dominant_score: responses[p.dominant_text.to_lowercase().as_str()],
        })
        .collect();
    ensure(pairs.len() == 1, || format!("{} pairs generated", pairs.len()))?;
    let r = ctf_scores(&pairs, "asian", LabelSlice::NonToxic, "fixture").map_err(|e| e.to_string())?;
    ensure((r.mean_ctf - 0.12).abs() < 1e-12, || format!("ctf {}", r.mean_ctf))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let words = ["we", "all", "like", "the", "food", "at", "parties", "and", "music", "today"];
    let table = builtin_token_table();
    for i in 0..1000 {
        let tp = &table[rng.random_range(0..table.len())];
        let mut sentence: Vec<&str> = (0..rng.random_range(2..8)).map(|_| words[rng.random_range(0..words.len())]).collect();
        let at = rng.random_range(0..=sentence.len());
        sentence.insert(at, &tp.marginalized);
        let text = sentence.join(" ");
        let (dominant, k) = replace_token(&text, &tp.marginalized, &tp.dominant);
        let (back, k2) = replace_token(&dominant, &tp.dominant, &tp.marginalized);
        ensure(k >= 1 && k == k2 && back == text, || format!("pair {i}: `{text}` -> `{dominant}` -> `{back}`"))?;

        let marg: f64 = rng.random_range(0.0..1.0);
        let dom: f64 = rng.random_range(0.0..1.0);
        let mut pair = set.pairs[0].clone();
        pair.marginalized_text = text;
        pair.dominant_text = dominant;
        let fwd = ScoredPair { pair: pair.clone(), marginalized_score: marg, dominant_score: dom };
        let rev = ScoredPair { pair, marginalized_score: dom, dominant_score: marg };
        ensure(fwd.ctf() == -rev.ctf(), || format!("pair {i}: ctf not antisymmetric"))?;
    }
    Ok(format!("ctf {:+.12}; 1000 fuzzed pairs antisymmetric and involutive", r.mean_ctf))
}

fn csv_rows(path: &Path) -> Result<Vec<csv::StringRecord>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    csv_reader(text.as_bytes())
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())
}

fn bias_audit(out: &Path) -> Result<(Duration, Vec<u8>), String> {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("manifests/bias_injection.toml");
    let overrides = Overrides {
        output_dir: Some(out.join("out")),
        cache_dir: Some(out.join("cache")),
        ..Overrides::default()
    };
    let start = Instant::now();
    let audit = Audit::from_manifest_file(&manifest, &overrides, false).map_err(|e| e.to_string())?;
    let summary = audit.cmd_report().map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(summary.exit_code() == 0, || format!("exit code {}", summary.exit_code()))?;
    let index = std::fs::read(out.join("out/index.json")).map_err(|e| e.to_string())?;
    Ok((took, index))
}

fn bias_injection() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (took, first_index) = bias_audit(dir.path())?;
    ensure(took < Duration::from_secs(60), || format!("took {took:.2?}"))?;
    let out = dir.path().join("out");

    let agg = csv_rows(&out.join("metrics/aggregate.csv"))?;
    let agg_fpr: f64 = agg[0][7].parse().map_err(|_| "aggregate FPR missing".to_string())?;
    let groups = csv_rows(&out.join("metrics/groups.csv"))?;
    let lgbt = groups
        .iter()
        .find(|r| &r[2] == "lgbtqia")
        .ok_or("no lgbtqia row in groups.csv")?;
    let group_fpr: f64 = lgbt[7].parse().map_err(|_| "lgbtqia FPR missing".to_string())?;
    let gap: f64 = lgbt[13].parse().map_err(|_| "lgbtqia gap missing".to_string())?;
    ensure(group_fpr > agg_fpr && gap > 0.0, || {
        format!("lgbtqia FPR {group_fpr} vs aggregate {agg_fpr}, gap {gap}")
    })?;

    let ctf = csv_rows(&out.join("psa/ctf.csv"))?;
    let lgbt_ctf: Vec<f64> = ctf
        .iter()
        .filter(|r| &r[1] == "lgbtqia")
        .map(|r| r[4].parse().unwrap())
        .collect();
    ensure(!lgbt_ctf.is_empty(), || "no lgbtqia CTF rows".into())?;
    for c in &lgbt_ctf {
        ensure((c + 0.3).abs() <= 1e-12, || format!("lgbtqia mean_ctf {c}"))?;
    }

    let global = csv_rows(&out.join("shap/global_fp.csv"))?;
    let top = global.iter().find(|r| &r[1] == "1").ok_or("empty FP global table")?;
    let members: BTreeSet<&str> = top[3].split(|c: char| !c.is_alphanumeric()).collect();
    ensure(members.contains("gay"), || format!("top FP cluster is {}", &top[3]))?;

    // Same seed, fresh cache: every artifact hashes the same.
    std::fs::remove_dir_all(dir.path().join("cache")).map_err(|e| e.to_string())?;
    let (_, second_index) = bias_audit(dir.path())?;
    ensure(first_index == second_index, || "rerun produced different artifacts".into())?;
    Ok(format!(
        "FPR {group_fpr:.4} vs {agg_fpr:.4}; ctf {lgbt_ctf:?}; top FP cluster {{{}}}; {took:.2?}",
        &top[3]
    ))
}

fn items(n: usize) -> Vec<(String, String)> {
    (0..n).map(|i| (format!("i{i:03}"), format!("queued sentence number {i}"))).collect()
}

fn rate_limited_run(rate: f64) -> Result<(usize, Duration), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clock = SimClock::new();
    let transport = MockTransport::new(MockLexicon::new(0.2));
    let mut job = QueryJob::new(ProviderSpec::mock(), "limit", items(100), dir.path());
    job.rate_override = Some(rate);
    let creds: BTreeMap<String, String> = BTreeMap::new();
    let mut run = run_job(&job, &clock, &transport, &creds).map_err(|e| e.to_string())?;
    let done = run.by_ref().filter(|o| o.result.is_ok()).count();
    ensure(done == 100, || format!("{done}/100 items succeeded"))?;
    Ok((max_issues_per_window(&run.client().issue_times()), clock.now()))
}

fn rate_limiter() -> Check {
    let (slow_max, slow_elapsed) = rate_limited_run(1.0)?;
    ensure(slow_max <= 1, || format!("{slow_max} issues in one window at 1 q/s"))?;
    ensure(slow_elapsed >= Duration::from_secs(99), || format!("finished at {slow_elapsed:?}"))?;
    let (fast_max, _) = rate_limited_run(25.0)?;
    ensure(fast_max <= 25, || format!("{fast_max} issues in one window at 25 q/s"))?;
    Ok(format!(
        "1 q/s: max {slow_max}/window, {:.0} s simulated; 25 q/s: max {fast_max}/window",
        slow_elapsed.as_secs_f64()
    ))
}

/// Mock transport whose first attempt for every seventh sentence fails
/// transiently.
struct Flaky {
    inner: MockTransport,
    attempts: Mutex<HashMap<String, usize>>,
    calls: Mutex<usize>,
}

impl Flaky {
    fn new() -> Self {
        Self {
            inner: MockTransport::new(MockLexicon::new(0.2).with_weight("7", 0.1)),
            attempts: Mutex::default(),
            calls: Mutex::default(),
        }
    }

    fn is_flaky(text: &str) -> bool {
        text.rsplit(' ').next().and_then(|n| n.parse::<usize>().ok()).is_some_and(|n| n % 7 == 0)
    }

    fn calls(&self) -> usize {
        *self.calls.lock().unwrap()
    }
}

impl Transport for Flaky {
    fn send(&self, req: &WireRequest) -> Result<TransportResponse, TransportError> {
        *self.calls.lock().unwrap() += 1;
        let text = req.mock_text().unwrap_or_default();
        let mut attempts = self.attempts.lock().unwrap();
        let n = attempts.entry(text.clone()).or_default();
        *n += 1;
        if Self::is_flaky(&text) && *n == 1 {
            return Err(TransportError::Transient("scripted failure".into()));
        }
        drop(attempts);
        self.inner.send(req)
    }
}

fn scores_only(outcomes: Vec<(String, ProviderResponse)>) -> Vec<(String, BTreeMap<String, f64>)> {
    outcomes.into_iter().map(|(id, r)| (id, r.category_scores)).collect()
}

fn collect(run: impl Iterator<Item = modaudit::scheduler::ItemOutcome>) -> Result<Vec<(String, ProviderResponse)>, String> {
    run.map(|o| o.result.map(|r| (o.id.clone(), r)).map_err(|e| format!("{}: {e}", o.id)))
        .collect()
}

fn resume() -> Check {
    let creds: BTreeMap<String, String> = BTreeMap::new();
    let all = items(100);

    let reference = {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let clock = SimClock::new();
        let t = Flaky::new();
        let job = QueryJob::new(ProviderSpec::mock(), "resume", all.clone(), dir.path());
        let run = run_job(&job, &clock, &t, &creds).map_err(|e| e.to_string())?;
        scores_only(collect(run)?)
    };

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clock = SimClock::new();
    let mut job = QueryJob::new(ProviderSpec::mock(), "resume", all.clone(), dir.path());
    {
        let t = Flaky::new();
        let mut run = run_job(&job, &clock, &t, &creds).map_err(|e| e.to_string())?;
        let first: Vec<_> = run.by_ref().take(40).collect();
        ensure(first.iter().all(|o| o.result.is_ok()), || "interrupted run had failures".into())?;
        // The run is dropped here, as if the process had been killed.
    }
    job.resume = true;
    let t = Flaky::new();
    let mut run = run_job(&job, &clock, &t, &creds).map_err(|e| e.to_string())?;
    let resumed = scores_only(collect(run.by_ref())?);
    let stats = run.stats();
    let scripted = all[40..].iter().filter(|(_, text)| Flaky::is_flaky(text)).count();
    ensure(stats.resumed == 40, || format!("journal held {} items", stats.resumed))?;
    ensure(t.calls() == 60 + scripted, || {
        format!("{} transport calls, expected 60 + {scripted} retries", t.calls())
    })?;
    ensure(resumed == reference, || "resumed outputs differ from an uninterrupted run".into())?;
    Ok(format!("60 calls + {scripted} scripted retries after resume; outputs identical"))
}

fn kappa() -> Check {
    let (a, b) = (FpCode::Cs, FpCode::Sos);
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for (x, y, k) in [(a, a, 20), (a, b, 5), (b, a, 10), (b, b, 15)] {
        c1.extend(std::iter::repeat_n(x, k));
        c2.extend(std::iter::repeat_n(y, k));
    }
    let k = cohens_kappa(&c1, &c2, &[]).map_err(|e| e.to_string())?;
    let value = k.value.ok_or("kappa undefined")?;
    ensure((value - 0.40).abs() <= 1e-12, || format!("kappa {value}"))?;

    let perfect = cohens_kappa(&c1, &c1, &[]).map_err(|e| e.to_string())?;
    ensure(perfect.value == Some(1.0), || format!("perfect agreement gave {:?}", perfect.value))?;

    // Seven extra rows where at least one coder is unsure.
    let (u, n) = (FpCode::Unsure, FpCode::Np);
    let mut d1 = c1.clone();
    let mut d2 = c2.clone();
    d1.extend([u, u, u, a, b, n, u]);
    d2.extend([u, a, n, u, u, u, b]);
    let ex = cohens_kappa(&d1, &d2, &[u]).map_err(|e| e.to_string())?;
    ensure(ex.excluded == 7 && ex.n == 50, || format!("excluded {}, kept {}", ex.excluded, ex.n))?;
    ensure(ex.value == k.value, || "exclusion changed kappa of the kept rows".into())?;
    Ok(format!("kappa {value:.12}; perfect 1.0; {} UNSURE rows excluded", ex.excluded))
}

fn metric_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut undefined = 0;
    for i in 0..1000 {
        let mut draw = |zero_prob: f64| {
            if rng.random_bool(zero_prob) {
                0
            } else {
                rng.random_range(0..500u64)
            }
        };
        let c = ConfusionCounts { tp: draw(0.15), fp: draw(0.15), tn: draw(0.15), fn_: draw(0.15) };
        let m = threshold_metrics(&c);
        let cells = [m.acc, m.f1, m.tpr, m.fpr, m.fnr];
        let defined = [
            c.total() > 0,
            2 * c.tp + c.fp + c.fn_ > 0,
            c.positives() > 0,
            c.negatives() > 0,
            c.positives() > 0,
        ];
        for (cell, ok) in cells.iter().zip(defined) {
            ensure(cell.is_some() == ok, || format!("matrix {i} {c:?}: {cell:?}"))?;
            if !ok {
                undefined += 1;
                ensure(fmt_opt(*cell).is_empty(), || format!("matrix {i}: undefined cell printed"))?;
            }
        }
        if let (Some(tpr), Some(fnr)) = (m.tpr, m.fnr) {
            ensure((tpr + fnr - 1.0).abs() <= 1e-12, || format!("matrix {i}: tpr+fnr = {}", tpr + fnr))?;
        }
        if let Some(acc) = m.acc {
            let n = c.total() as f64;
            let pos = c.positives() as f64 / n * m.tpr.unwrap_or(0.0);
            let neg = c.negatives() as f64 / n * m.fpr.map_or(0.0, |f| 1.0 - f);
            ensure((acc - (pos + neg)).abs() <= 1e-12, || format!("matrix {i}: acc decomposition"))?;
        }
    }
    Ok(format!("1000 matrices; {undefined} undefined cells left empty"))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 roc-auc oracle", auc_oracle),
        ("2 pinned auc no-op", pinned_auc_noop),
        ("3 shapley axioms", shapley_axioms),
        ("4 sampled shapley convergence", sampled_convergence),
        ("5 ctf arithmetic", ctf_arithmetic),
        ("6 bias injection end to end", bias_injection),
        ("7 rate limiter", rate_limiter),
        ("8 resume", resume),
        ("9 cohen's kappa", kappa),
        ("10 metric identities", metric_identities),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("PASS  {name:<32} {took:>9.2?}  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<32} {took:>9.2?}  {detail}");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
