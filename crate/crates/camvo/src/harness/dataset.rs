//! Dataset file format, loading, and deterministic shuffling.
//!
//! A dataset is UTF-8 JSON lines: one header object followed by one record
//! per instance. The header carries the shared shape and the arm roster:
//!
//! ```text
//! {"d":5,"k":2,"m":4,"arms":[{"name":"a","rho":5e-8},{"name":"b","rho":1.1e-6}]}
//! {"id":"r0","embedding":[...d reals...],"tokens":[3,4],"votes":[1,1],"label":1}
//! ```
//!
//! Replay requires every record to carry all K votes. Token counts are
//! normally per-arm data; when a record omits them the loader falls back to
//! ceil(chars/4) of the record text (or id), identical across arms, and the
//! run summary flags that the fallback was used.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::types::{ArmSpec, DatasetShape, Instance};

/// Arm entry in the dataset header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmHeaderSpec {
    pub name: String,
    /// Cost per input token.
    pub rho: f64,
}

/// First line of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub d: usize,
    pub k: usize,
    pub m: u32,
    pub arms: Vec<ArmHeaderSpec>,
}

impl DatasetHeader {
    pub fn shape(&self) -> DatasetShape {
        DatasetShape {
            d: self.d,
            k: self.k,
            m: self.m,
        }
    }

    pub fn arm_specs(&self) -> Vec<ArmSpec> {
        self.arms
            .iter()
            .enumerate()
            .map(|(i, a)| ArmSpec {
                arm_id: i as u32,
                name: a.name.clone(),
                cost_per_token: a.rho,
            })
            .collect()
    }
}

/// One instance line on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub embedding: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tokens: Option<Vec<u64>>,
    /// Per-arm votes; entries may be null in malformed files, which the
    /// loader reports by arm index.
    pub votes: Option<Vec<Option<u32>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
}

/// A loaded dataset.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub instances: Vec<Instance>,
    /// True when any record used the character-count token fallback.
    pub token_fallback_used: bool,
}

/// Parse and validate a dataset file.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    load_dataset_from(reader)
}

/// Parse and validate a dataset from any line-oriented reader.
pub fn load_dataset_from<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate();
    let header: DatasetHeader = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(Error::Parse {
                line: 1,
                msg: "empty dataset: missing header record".into(),
            });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        break serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: format!("bad header: {e}"),
        })?;
    };
    if header.arms.len() != header.k {
        return Err(Error::DimensionMismatch {
            what: "header arm list".into(),
            expected: header.k,
            got: header.arms.len(),
        });
    }
    if header.m < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 labels, got M = {}",
            header.m
        )));
    }

    let mut instances = Vec::new();
    let mut token_fallback_used = false;
    let mut label_presence: Option<bool> = None;
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let rec: DatasetRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("bad record: {e}"),
        })?;
        if rec.embedding.len() != header.d {
            return Err(Error::DimensionMismatch {
                what: format!("embedding of instance {} (line {lineno})", rec.id),
                expected: header.d,
                got: rec.embedding.len(),
            });
        }
        let votes_raw = rec.votes.ok_or_else(|| Error::MissingVote {
            instance: rec.id.clone(),
            arm: 0,
        })?;
        if votes_raw.len() != header.k {
            return Err(Error::MissingVote {
                instance: rec.id.clone(),
                arm: votes_raw.len().min(header.k.saturating_sub(1)),
            });
        }
        let mut votes = Vec::with_capacity(header.k);
        for (arm, v) in votes_raw.iter().enumerate() {
            match v {
                Some(label) if *label < header.m => votes.push(*label),
                Some(label) => {
                    return Err(Error::LabelOutOfRange {
                        instance: rec.id.clone(),
                        label: *label,
                        m: header.m,
                    })
                }
                None => {
                    return Err(Error::MissingVote {
                        instance: rec.id.clone(),
                        arm,
                    })
                }
            }
        }
        let tokens = match rec.tokens {
            Some(t) => {
                if t.len() != header.k {
                    return Err(Error::DimensionMismatch {
                        what: format!("token counts of instance {} (line {lineno})", rec.id),
                        expected: header.k,
                        got: t.len(),
                    });
                }
                if t.contains(&0) {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("instance {}: token counts must be >= 1", rec.id),
                    });
                }
                t
            }
            None => {
                token_fallback_used = true;
                let chars = rec
                    .text
                    .as_deref()
                    .unwrap_or(rec.id.as_str())
                    .chars()
                    .count();
                vec![(chars as u64).div_ceil(4).max(1); header.k]
            }
        };
        if let Some(y) = rec.label {
            if y >= header.m {
                return Err(Error::LabelOutOfRange {
                    instance: rec.id.clone(),
                    label: y,
                    m: header.m,
                });
            }
        }
        match label_presence {
            None => label_presence = Some(rec.label.is_some()),
            Some(expected) if expected != rec.label.is_some() => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!(
                        "instance {}: true labels must be present on all records or none",
                        rec.id
                    ),
                });
            }
            _ => {}
        }
        instances.push(Instance {
            instance_id: rec.id,
            embedding: rec.embedding,
            token_counts: tokens,
            cached_labels: Some(votes),
            true_label: rec.label,
        });
    }
    Ok(Dataset {
        header,
        instances,
        token_fallback_used,
    })
}

/// Write a dataset file; the exact inverse of [`load_dataset`] for files we
/// produce ourselves.
pub fn write_dataset<W: Write>(
    mut out: W,
    header: &DatasetHeader,
    records: &[DatasetRecord],
) -> Result<()> {
    let mut line = serde_json::to_string(header).expect("header serializes");
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for rec in records {
        let mut line = serde_json::to_string(rec).expect("record serializes");
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Fisher-Yates permutation from a dedicated stream of the run seed, so all
/// modes sharing a seed see the identical ordering.
pub fn shuffle(instances: &mut [Instance], seed: u64) {
    let mut r = rng::stream(seed, &[rng::purpose::SHUFFLE]);
    let n = instances.len();
    if n < 2 {
        return;
    }
    for i in (1..n).rev() {
        let j = rng::below(&mut r, (i + 1) as u64) as usize;
        instances.swap(i, j);
    }
}
