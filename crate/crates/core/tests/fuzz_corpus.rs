//! Replays the checked-in fuzz corpus through the same entry points the fuzz targets use.

use std::path::PathBuf;

use extauction::experiments::{config_hash, config_to_string, parse_config};
use extauction::instance::{instance_from_str, instance_hash, instance_to_string, parse_instance};

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {}", dir.display());
    files.into_iter().map(|p| (p.clone(), std::fs::read_to_string(&p).unwrap())).collect()
}

#[test]
fn instance_json_seeds() {
    let results: Vec<bool> = corpus("instance_json").iter().map(|(_, text)| instance_from_str(text).is_ok()).collect();
    assert!(results.contains(&true) && results.contains(&false));
}

#[test]
fn instance_roundtrip_seeds() {
    for (path, text) in corpus("instance_roundtrip") {
        let profile = parse_instance(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let back = parse_instance(&instance_to_string(&profile)).unwrap();
        assert_eq!(profile, back);
        assert_eq!(instance_hash(&profile), instance_hash(&back));
    }
}

#[test]
fn experiment_config_seeds() {
    let mut accepted = 0;
    for (_, text) in corpus("experiment_config") {
        if let Ok(config) = parse_config(&text) {
            accepted += 1;
            let again = parse_config(&config_to_string(&config)).unwrap();
            assert_eq!(config_hash(&config), config_hash(&again));
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn hostile_documents_are_rejected() {
    let deep = "[".repeat(10_000);
    let many: String = format!(
        r#"{{"schema":1,"n":65,"agents":[{}]}}"#,
        vec![r#"{"model":"additive","t":1,"w":{"kind":"constant","value":1}}"#; 65].join(",")
    );
    for text in [deep.as_str(), many.as_str(), r#"{"schema":1,"n":11,"agents":[]}"#, "\u{0}"] {
        assert!(instance_from_str(text).is_err());
        assert!(parse_config(text).is_err());
    }
}
