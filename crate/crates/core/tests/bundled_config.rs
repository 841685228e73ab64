//! The configuration files shipped with the crate stay loadable and in step
//! with the built-in defaults.

use std::path::PathBuf;

use modaudit::corpus::GroupRegistry;
use modaudit::providers::ProviderRegistry;
use modaudit::report::{Audit, AuditManifest, Overrides};

fn manifests() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("manifests")
}

#[test]
fn provider_registry_file_matches_builtin() {
    let file = ProviderRegistry::load(&manifests().join("providers.toml")).unwrap();
    assert_eq!(file, ProviderRegistry::builtin());
}

#[test]
fn group_registry_file_matches_builtin() {
    let file = GroupRegistry::load(&manifests().join("groups.toml")).unwrap();
    assert_eq!(file, GroupRegistry::builtin());
}

#[test]
fn shipped_manifests_validate() {
    for name in ["bias_injection.toml", "commercial.toml"] {
        let path = manifests().join(name);
        AuditManifest::load(&path).unwrap();
        Audit::from_manifest_file(&path, &Overrides::default(), false)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn commercial_mappings_select_advertised_categories() {
    let m = AuditManifest::load(&manifests().join("commercial.toml")).unwrap();
    let reg = ProviderRegistry::builtin();
    for (id, cats) in &m.mappings {
        let spec = reg.get(id).unwrap();
        for c in cats {
            assert!(spec.has_category(c), "{id} lacks {c}");
        }
    }
}
