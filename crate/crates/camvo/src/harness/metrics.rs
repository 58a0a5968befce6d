//! Run metrics and the per-round log format.
//!
//! The log is a plain CSV with one row per round:
//! `t,subset_bitmask,cost,predicted,true,reward_bits,cum_cost,cum_acc`.
//! `true` and `cum_acc` stay empty when the dataset has no ground truth.
//! Reward bits are indexed by global arm id.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RoundRecord;

pub const LOG_HEADER: &str = "t,subset_bitmask,cost,predicted,true,reward_bits,cum_cost,cum_acc";

/// Precision/recall/F1 for one label. `undefined` flags empty denominators
/// that were reported as 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub undefined: bool,
}

/// Mean agreement of predictions with ground truth; None unless every round
/// carries a true label.
pub fn accuracy(records: &[RoundRecord]) -> Option<f64> {
    if records.is_empty() || records.iter().any(|r| r.true_label.is_none()) {
        return None;
    }
    let hits = records
        .iter()
        .filter(|r| r.true_label == Some(r.predicted))
        .count();
    Some(hits as f64 / records.len() as f64)
}

/// Per-label precision, recall, and F1 over the full label alphabet.
pub fn per_label_metrics(records: &[RoundRecord], num_labels: u32) -> Option<Vec<LabelMetrics>> {
    if records.is_empty() || records.iter().any(|r| r.true_label.is_none()) {
        return None;
    }
    let pairs: Vec<(u32, u32)> = records
        .iter()
        .map(|r| (r.predicted, r.true_label.expect("checked above")))
        .collect();
    Some(per_label_from_pairs(&pairs, num_labels))
}

/// Metrics from raw (predicted, true) pairs.
pub fn per_label_from_pairs(pairs: &[(u32, u32)], num_labels: u32) -> Vec<LabelMetrics> {
    let m = num_labels as usize;
    let mut tp = vec![0u64; m];
    let mut fp = vec![0u64; m];
    let mut fal_n = vec![0u64; m];
    for &(pred, truth) in pairs {
        if pred == truth {
            tp[pred as usize] += 1;
        } else {
            fp[pred as usize] += 1;
            fal_n[truth as usize] += 1;
        }
    }
    (0..m)
        .map(|label| {
            let mut undefined = false;
            let mut ratio = |num: u64, den: u64| {
                if den == 0 {
                    undefined = true;
                    0.0
                } else {
                    num as f64 / den as f64
                }
            };
            let precision = ratio(tp[label], tp[label] + fp[label]);
            let recall = ratio(tp[label], tp[label] + fal_n[label]);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                undefined = true;
                0.0
            };
            LabelMetrics {
                label: label as u32,
                precision,
                recall,
                f1,
                undefined,
            }
        })
        .collect()
}

/// Currency per million tokens, against a per-instance token basis.
pub fn cost_per_million_tokens(total_cost: f64, token_basis: f64) -> f64 {
    if token_basis > 0.0 {
        total_cost / token_basis * 1e6
    } else {
        0.0
    }
}

fn fmt_opt_u32(v: Option<u32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Reward bitmask over global arm ids.
fn reward_bits(record: &RoundRecord) -> u64 {
    record
        .decision
        .arms
        .iter()
        .zip(&record.rewards)
        .fold(0u64, |m, (&arm, &r)| if r > 0 { m | (1 << arm) } else { m })
}

/// Serialize the per-round log; stable byte-for-byte given equal records.
pub fn write_round_log<W: Write>(mut out: W, records: &[RoundRecord]) -> Result<()> {
    out.write_all(LOG_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for r in records {
        let line = format!(
            "{},{},{},{},{},{},{},{}\n",
            r.t,
            r.decision.bitmask(),
            r.decision.cost,
            r.predicted,
            fmt_opt_u32(r.true_label),
            reward_bits(r),
            r.cumulative_cost,
            fmt_opt_f64(r.cumulative_accuracy),
        );
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn round_log_to_string(records: &[RoundRecord]) -> String {
    let mut buf = Vec::new();
    write_round_log(&mut buf, records).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("log is valid utf-8")
}

/// One parsed log row (the subset of fields metrics recomputation needs).
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub t: usize,
    pub subset_bitmask: u64,
    pub cost: f64,
    pub predicted: u32,
    pub true_label: Option<u32>,
    pub reward_bits: u64,
    pub cum_cost: f64,
    pub cum_acc: Option<f64>,
}

/// Parse a per-round log written by [`write_round_log`].
pub fn read_round_log(path: &Path) -> Result<Vec<LogRow>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if lineno == 1 {
            if line.trim() != LOG_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected log header '{line}'"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 8 columns, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| Error::Parse {
            line: lineno,
            msg: format!("bad {what} field"),
        };
        rows.push(LogRow {
            t: fields[0].parse().map_err(|_| parse_err("t"))?,
            subset_bitmask: fields[1].parse().map_err(|_| parse_err("subset_bitmask"))?,
            cost: fields[2].parse().map_err(|_| parse_err("cost"))?,
            predicted: fields[3].parse().map_err(|_| parse_err("predicted"))?,
            true_label: if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse().map_err(|_| parse_err("true"))?)
            },
            reward_bits: fields[5].parse().map_err(|_| parse_err("reward_bits"))?,
            cum_cost: fields[6].parse().map_err(|_| parse_err("cum_cost"))?,
            cum_acc: if fields[7].is_empty() {
                None
            } else {
                Some(fields[7].parse().map_err(|_| parse_err("cum_acc"))?)
            },
        });
    }
    Ok(rows)
}
