//! Prints the built-in provider registry as TOML, builds a request for each
//! provider and maps a sample response to a scalar verdict.

use std::collections::BTreeMap;

use modaudit::providers::{
    decode_response, encode_request, to_verdict, CategoryMapping, ProviderRegistry, WireFormat,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = ProviderRegistry::builtin();
    println!("{}", toml::to_string(&registry)?);

    // Dummy keys so request building succeeds; nothing is sent.
    let creds: BTreeMap<String, String> = registry
        .specs()
        .iter()
        .filter_map(|s| s.auth_env_var.clone())
        .map(|v| (v, "example-key".to_string()))
        .collect();
    for spec in registry.specs() {
        let req = encode_request(spec, "Being gay is great", &creds)?;
        println!("{:<12} {}", spec.id, req.loggable());
    }

    let openai = registry.get("openai")?;
    assert_eq!(openai.wire, WireFormat::OpenAi);
    let body = br#"{"id":"x","model":"omni-moderation","results":[{"flagged":false,
        "categories":{},"category_scores":{"harassment":0.02,"harassment/threatening":0.001,
        "hate":0.61,"hate/threatening":0.03,"self-harm":0.0}}]}"#;
    let resp = decode_response(openai, body)?;
    println!("decoded scores: {:?}", resp.category_scores);
    let mapping = CategoryMapping::new("openai", &["hate", "hate_threatening"]);
    let verdict = to_verdict(&resp, &mapping, 0.5)?;
    println!("verdict: score {:.2}, flagged {}", verdict.score, verdict.is_flagged);
    Ok(())
}
