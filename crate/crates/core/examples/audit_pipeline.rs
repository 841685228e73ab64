//! Runs the whole audit on the bundled bias-injection manifest through the
//! library API and prints where the artifacts went.

use std::path::Path;

use modaudit::report::{Audit, Overrides};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("manifests/bias_injection.toml");
    let out = tempfile::tempdir()?;
    let overrides = Overrides {
        output_dir: Some(out.path().join("out")),
        cache_dir: Some(out.path().join("cache")),
        ..Default::default()
    };
    let audit = Audit::from_manifest_file(&manifest, &overrides, false)?;
    let summary = audit.cmd_report()?;
    println!("manifest digest {}", audit.stamp().manifest_digest);
    for f in &summary.files {
        println!("  {}", f.strip_prefix(audit.out_dir()).unwrap_or(f).display());
    }
    println!("item failures: {}", summary.item_failures);
    let fp = std::fs::read_to_string(audit.out_dir().join("shap/global_fp.csv"))?;
    println!("\n{fp}");
    Ok(())
}
