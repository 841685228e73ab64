//! Tokenizes sentences and explains a mock classifier's scores with exact
//! and permutation-sampled Shapley values, writing an SVG heat map.

use modaudit::explain::{
    explain_text, merge_subwords, render_heatmap_svg, shap_exact, shap_sampled, ShapConfig, WordPiece,
};
use modaudit::providers::MockLexicon;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wp = WordPiece::builtin();
    let mock = MockLexicon::new(0.1).with_weight("kill", 0.2).with_weight("love", -0.1).with_weight("gay", 0.3);

    let text = "an unfavorable day";
    println!("{text:?} -> {:?}", wp.tokenize("t0", text).tokens);

    let text = "kill all them";
    let seq = wp.tokenize("t1", text);
    let exact = shap_exact(&mock, "mock", text, &seq, "[MASK]", 12)?;
    println!("\nexact on {text:?}");
    for (t, v) in exact.tokens.iter().zip(&exact.shapley) {
        println!("  {t:<8} {v:+.4}");
    }
    println!("  base {:.4} full {:.4}", exact.base_value, exact.full_value);

    let text = "my gay friends and I love the long summer night at home with our family";
    let seq = wp.tokenize("t2", text);
    let sampled = shap_sampled(&mock, "mock", text, &seq, "[MASK]", 500, 11)?;
    println!("\nsampled ({} tokens, 500 permutations)", seq.len());
    for ((t, v), se) in sampled.tokens.iter().zip(&sampled.shapley).zip(&sampled.std_errors) {
        println!("  {t:<8} {v:+.4} ± {se:.4}");
    }

    let att = explain_text(&mock, "mock", "Being gay is great", &wp.tokenize("t3", "Being gay is great"), &ShapConfig::default())?;
    println!("\nwords: {:?}", merge_subwords(&att.tokens, &att.shapley));
    let out = std::env::temp_dir().join("modaudit_heatmap.svg");
    std::fs::write(&out, render_heatmap_svg(&att))?;
    println!("heat map written to {}", out.display());
    Ok(())
}
