//! Pools per-sentence attributions of false positives into clusters of
//! similar tokens, samples a coding sheet and computes coder agreement.

use modaudit::corpus::Label;
use modaudit::explain::coding::{stratum_sample_size, FnCode, FpCode};
use modaudit::explain::{
    cluster_tokens, cohens_kappa, explain_text, global_attributions, sample_misclassifications, Embeddings,
    ErrorKind, ReviewCandidate, ShapConfig, WordPiece,
};
use modaudit::providers::MockLexicon;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wp = WordPiece::builtin();
    let emb = Embeddings::builtin();
    let mock = MockLexicon::new(0.3).with_weight("gay", 0.3).with_weight("lesbian", 0.25).with_weight("women", 0.2);
    let false_positives = [
        "Being gay is great",
        "My lesbian aunt is a doctor",
        "The gay choir performed at the concert",
        "women deserve equal pay",
    ];
    let cfg = ShapConfig::default();
    let atts = false_positives
        .iter()
        .enumerate()
        .map(|(i, t)| explain_text(&mock, "mock", t, &wp.tokenize(&format!("fp{i}"), t), &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let clusters = cluster_tokens(&atts, &emb, 0.9)?;
    println!("top false-positive clusters:");
    for c in global_attributions(&clusters, ErrorKind::Fp, 5) {
        println!("  {:<10} {:+.4}  {:?}", c.representative, c.mean_shap, c.members);
    }

    let candidates: Vec<ReviewCandidate> = (0..100)
        .map(|i| ReviewCandidate {
            id: format!("x{i}"),
            dataset: if i < 60 { "a" } else { "b" }.into(),
            provider: "mock".into(),
            text: format!("sentence {i}"),
            score: 0.7,
            gold_label: Label::NonHate,
            flagged: true,
        })
        .collect();
    let sheets = sample_misclassifications(&candidates, 0.05, 42)?;
    println!(
        "\ncoding sheet rows: {} (= {} + {})",
        sheets.fp.len(),
        stratum_sample_size(60, 0.05),
        stratum_sample_size(40, 0.05)
    );

    let a = [FpCode::Sos, FpCode::Cs, FpCode::Unsure, FpCode::De, FpCode::Sos];
    let b = [FpCode::Sos, FpCode::De, FpCode::Cs, FpCode::De, FpCode::Sos];
    let k = cohens_kappa(&a, &b, &[FpCode::Unsure])?;
    println!("kappa {:.3} over {} items ({} excluded)", k.value.unwrap_or(f64::NAN), k.n, k.excluded);
    println!("FN codebook: {}", FnCode::ALL.iter().map(|c| c.code()).collect::<Vec<_>>().join(" "));
    Ok(())
}
