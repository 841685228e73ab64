//! Generates counterfactual pairs from the mini corpus and reports mean
//! counterfactual token fairness per group and gold-label slice.

use std::path::Path;

use modaudit::corpus::{load_corpus, CorpusFormat, GroupRegistry};
use modaudit::psa::{builtin_token_table, ctf_scores, generate_counterfactuals, replace_token, LabelSlice, ScoredPair};
use modaudit::providers::MockLexicon;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (swapped, n) = replace_token("Being Asian is fun", "asian", "white");
    println!("{swapped:?} ({n} replacement)");

    let groups = GroupRegistry::builtin();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/mini_corpus.jsonl");
    let corpus = load_corpus(&path, CorpusFormat::Jsonl, &groups)?;
    let table = builtin_token_table();
    let set = generate_counterfactuals(&corpus, &table);
    println!("{} pairs, {} sentences excluded", set.pairs.len(), set.exclusions.len());
    for p in set.pairs.iter().take(3) {
        println!("  {} | {:?} -> {:?}", p.pair_id, p.marginalized_text, p.dominant_text);
    }

    let mock = MockLexicon::new(0.25).with_weight("gay", 0.3);
    let scored: Vec<ScoredPair> = set
        .pairs
        .into_iter()
        .map(|pair| ScoredPair {
            marginalized_score: mock.raw_score(&pair.marginalized_text),
            dominant_score: mock.raw_score(&pair.dominant_text),
            pair,
        })
        .collect();
    println!("\ngroup        slice      n   mean CTF   95% CI");
    for g in groups.ids() {
        for slice in [LabelSlice::Toxic, LabelSlice::NonToxic] {
            if let Ok(r) = ctf_scores(&scored, g, slice, "mock") {
                let ci = r.ci.map(|(lo, hi)| format!("[{lo:+.3}, {hi:+.3}]")).unwrap_or_default();
                println!("{:<12} {:<10} {:<3} {:+.4}    {ci}", g, slice.as_str(), r.n, r.mean_ctf);
            }
        }
    }
    Ok(())
}
