//! Sweep configuration files.
//!
//! Flat text: one `key = value` per line, `#` starts a comment.
//!
//! ```text
//! matrix      = erc:32          # erc:<n> | rand:<n>x<p>[:fixed] | file:<path>
//! k           = 3
//! beta_mag    = 1.0
//! sigma_grid  = 1e-2, 1e-4, 1e-6
//! trials      = 10000
//! seed        = 7
//! l0_max_card = 4               # optional
//! fresh_matrix = false          # optional, random matrices only
//! algo        = l0 ebic:1*pow:0.5
//! algo        = omp_k           # repeat `algo` for each algorithm
//! ```
//!
//! JSON uses the same keys, with `sigma_grid` as an array of numbers and
//! `algo` as an array of `"<tag> [rule]"` strings.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiment::{AlgorithmSpec, ExperimentConfig, MatrixSpec, DEFAULT_TRIALS};
use crate::solvers::Algorithm;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    matrix: Option<String>,
    k: Option<usize>,
    beta_mag: Option<f64>,
    sigma_grid: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    l0_max_card: Option<usize>,
    fresh_matrix: Option<bool>,
    #[serde(default)]
    algo: Vec<String>,
}

/// `<tag> [rule]`, e.g. `l1_penalty l1_candes*pow:0.3`.
pub fn parse_algorithm_line(text: &str) -> Result<AlgorithmSpec> {
    let mut parts = text.split_whitespace();
    let algorithm: Algorithm = parts
        .next()
        .ok_or_else(|| Error::invalid("empty algorithm entry"))?
        .parse()?;
    let rule = parts.next().map(str::parse).transpose()?;
    if parts.next().is_some() {
        return Err(Error::invalid(format!("trailing text in algorithm entry {text:?}")));
    }
    AlgorithmSpec::new(algorithm, rule)
}

/// Comma-separated positive reals.
pub fn parse_sigma_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| Error::invalid(format!("malformed sigma^2 value {t:?}")))
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(line, format!("malformed value {value:?} for {key}")))
}

fn parse_text(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    let mut seen = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lno = i + 1;
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(lno, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key != "algo" {
            if let Some(prev) = seen.insert(key.to_string(), lno) {
                return Err(Error::parse(lno, format!("{key} already set on line {prev}")));
            }
        }
        match key {
            "matrix" => raw.matrix = Some(value.to_string()),
            "k" => raw.k = Some(parse_value(key, value, lno)?),
            "beta_mag" => raw.beta_mag = Some(parse_value(key, value, lno)?),
            "sigma_grid" => {
                raw.sigma_grid = Some(parse_sigma_grid(value).map_err(|e| Error::parse(lno, e.to_string()))?)
            }
            "trials" => raw.trials = Some(parse_value(key, value, lno)?),
            "seed" => raw.seed = Some(parse_value(key, value, lno)?),
            "l0_max_card" => raw.l0_max_card = Some(parse_value(key, value, lno)?),
            "fresh_matrix" => raw.fresh_matrix = Some(parse_value(key, value, lno)?),
            "algo" => raw.algo.push(value.to_string()),
            other => return Err(Error::parse(lno, format!("unknown key {other:?}"))),
        }
    }
    Ok(raw)
}

/// Parses either format; text starting with `{` is read as JSON.
/// `default_seed` fills in a missing `seed`.
pub fn parse_config(text: &str, default_seed: Option<u64>) -> Result<ExperimentConfig> {
    let raw = if text.trim_start().starts_with('{') {
        serde_json::from_str::<RawConfig>(text).map_err(|e| Error::parse(e.line(), e.to_string()))?
    } else {
        parse_text(text)?
    };
    let missing = |key: &str| Error::invalid(format!("config lacks required key {key:?}"));
    let mut matrix: MatrixSpec = raw.matrix.as_deref().ok_or_else(|| missing("matrix"))?.parse()?;
    if let Some(fresh) = raw.fresh_matrix {
        match &mut matrix {
            MatrixSpec::RandomGaussian { fresh_per_trial, .. } => *fresh_per_trial = fresh,
            _ => return Err(Error::invalid("fresh_matrix applies to random matrices only")),
        }
    }
    let algorithms = raw
        .algo
        .iter()
        .map(|a| parse_algorithm_line(a))
        .collect::<Result<Vec<_>>>()?;
    let config = ExperimentConfig {
        matrix,
        k_star: raw.k.ok_or_else(|| missing("k"))?,
        beta_magnitude: raw.beta_mag.unwrap_or(1.0),
        sigma_sq_grid: raw.sigma_grid.ok_or_else(|| missing("sigma_grid"))?,
        algorithms,
        trials: raw.trials.unwrap_or(DEFAULT_TRIALS),
        master_seed: raw.seed.or(default_seed).ok_or_else(|| missing("seed"))?,
        l0_max_card: raw.l0_max_card,
    };
    config.validate()?;
    Ok(config)
}
