//! Plain-text run configuration files: one `key = value` per line, `#`
//! comments. Covers every policy field plus the dataset path; sweep grids
//! add comma-separated `deltas`, `k_mins`, and `seeds`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::{ConfidenceMethod, Mode, PolicyConfig};

/// Parsed configuration file contents.
#[derive(Clone, Debug, PartialEq)]
pub struct FileConfig {
    pub policy: PolicyConfig,
    pub dataset: Option<PathBuf>,
    pub deltas: Option<Vec<f64>>,
    pub k_mins: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<FileConfig> {
    let mut policy = PolicyConfig::default();
    let mut dataset = None;
    let mut deltas = None;
    let mut k_mins = None;
    let mut seeds = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let bad = |msg: String| Error::Parse { line: lineno, msg };
        match key {
            "mode" => policy.mode = Mode::from_str(value)?,
            "confidence_method" => policy.confidence_method = ConfidenceMethod::from_str(value)?,
            "dataset" => dataset = Some(PathBuf::from(value)),
            "delta" => policy.delta = parse_scalar(value).map_err(bad)?,
            "k_min" => policy.k_min = parse_scalar(value).map_err(bad)?,
            "alpha_explore" => policy.alpha_explore = parse_scalar(value).map_err(bad)?,
            "lambda_l" => policy.lambda_l = parse_scalar(value).map_err(bad)?,
            "lambda_r" => policy.lambda_r = parse_scalar(value).map_err(bad)?,
            "mc_samples" => policy.mc_samples = parse_scalar(value).map_err(bad)?,
            "seed" => policy.seed = parse_scalar(value).map_err(bad)?,
            "variance_floor" => policy.variance_floor = parse_scalar(value).map_err(bad)?,
            "deltas" => deltas = Some(parse_list(value).map_err(bad)?),
            "k_mins" => k_mins = Some(parse_list(value).map_err(bad)?),
            "seeds" => seeds = Some(parse_list(value).map_err(bad)?),
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown configuration key '{other}'"),
                })
            }
        }
    }
    Ok(FileConfig {
        policy,
        dataset,
        deltas,
        k_mins,
        seeds,
    })
}

fn parse_scalar<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse '{value}'"))
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| format!("cannot parse '{v}'")))
        .collect()
}
