//! Scores the mini corpus with a biased mock and prints the aggregate
//! metrics plus per-group pinned AUC and equality-of-odds gaps.

use std::path::Path;

use modaudit::corpus::{load_corpus, CorpusFormat, GroupRegistry};
use modaudit::metrics::{
    equality_of_odds_gaps, pinned_auc, write_metrics_csv, MetricsReport, ScoredExample, AGGREGATE,
};
use modaudit::output::Stamp;
use modaudit::providers::MockLexicon;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let groups = GroupRegistry::builtin();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/mini_corpus.jsonl");
    let corpus = load_corpus(&path, CorpusFormat::Jsonl, &groups)?;
    let mut mock = MockLexicon::new(0.25).with_weight("gay", 0.3).with_weight("dumb", 0.28);
    for w in ["vermin", "scum", "filth", "parasites", "subhuman"] {
        mock = mock.with_weight(w, 0.4);
    }
    let scored: Vec<ScoredExample> = corpus
        .examples()
        .iter()
        .map(|e| ScoredExample {
            id: e.id.clone(),
            gold_label: e.gold_label,
            score: mock.score(&e.text),
            groups: e.groups.clone(),
        })
        .collect();

    let mut reports = vec![MetricsReport::compute(&scored, "mock", "mini", AGGREGATE, 0.5)?];
    for g in groups.ids() {
        let slice: Vec<_> = scored.iter().filter(|s| s.groups.contains(g)).cloned().collect();
        reports.push(MetricsReport::compute(&slice, "mock", "mini", g, 0.5)?);
    }
    write_metrics_csv(&reports, &Stamp::new("example", 1), std::io::stdout())?;

    let gaps = equality_of_odds_gaps(&reports)?;
    println!("\ngroup        pinned AUC (SE)      FPR gap   FNR gap");
    for g in groups.ids() {
        let p = pinned_auc(&scored, g, 20, 1)?;
        let gap = gaps[g];
        println!(
            "{:<12} {:.4} ({:.4})      {:+.4}   {:+.4}",
            g,
            p.mean_auc,
            p.std_error,
            gap.fpr_gap.unwrap_or(f64::NAN),
            gap.fnr_gap.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
