//! Replays the checked-in fuzz seeds through the fuzz-target properties on
//! stable Rust.

use std::path::{Path, PathBuf};

use snr_sentry::config::{parse_algorithm_line, parse_config};
use snr_sentry::experiment::MatrixSpec;
use snr_sentry::textio::{format_matrix, format_vector, parse_matrix, parse_vector};
use snr_sentry::TuningRule;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let text = String::from_utf8_lossy(&std::fs::read(&path).unwrap()).into_owned();
            (path, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn parse_matrix_seeds() {
    let mut accepted = 0;
    for (path, text) in seeds("parse_matrix") {
        if let Ok(m) = parse_matrix(&text) {
            assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m, "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted > 0);
}

#[test]
fn parse_vector_seeds() {
    for (path, text) in seeds("parse_vector") {
        if let Ok(v) = parse_vector(&text) {
            assert_eq!(parse_vector(&format_vector(&v)).unwrap(), v, "{}", path.display());
        }
    }
}

#[test]
fn rule_parse_seeds() {
    let mut accepted = 0;
    for (path, text) in seeds("rule_parse") {
        if let Ok(rule) = text.parse::<TuningRule>() {
            let canonical = rule.to_string();
            let again: TuningRule = canonical.parse().unwrap();
            assert_eq!(again.to_string(), canonical, "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted > 0);
}

#[test]
fn config_parse_seeds() {
    for (path, text) in seeds("config_parse") {
        if let Ok(config) = parse_config(&text, Some(1)) {
            config.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}

#[test]
fn matrix_spec_parse_seeds() {
    for (path, text) in seeds("matrix_spec_parse") {
        if let Ok(spec) = text.parse::<MatrixSpec>() {
            assert_eq!(spec.to_string().parse::<MatrixSpec>().unwrap(), spec, "{}", path.display());
        }
        let _ = parse_algorithm_line(&text);
    }
}
