//! JSONL corpus ingestion and the deterministic train/test split.
//!
//! One record per line with exactly the fields
//! `{"id","domain","lang","text","style"}`. Blank lines are skipped.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::profile::StyleProfile;

pub const DOMAINS: [&str; 5] = ["law", "literature", "wikipedia", "medicine", "education"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub domain: String,
    pub lang: String,
    pub text: String,
    pub style: String,
}

pub fn parse_corpus(reader: impl BufRead, path: &str) -> Result<Vec<CorpusRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_string(),
            line: lineno,
            message,
        };
        let rec: CorpusRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if rec.id.is_empty() {
            return Err(err("empty id".into()));
        }
        if rec.text.trim().is_empty() {
            return Err(err(format!("record {:?} has empty text", rec.id)));
        }
        if rec.style.is_empty() || rec.lang.is_empty() || rec.domain.is_empty() {
            return Err(err(format!("record {:?} has an empty field", rec.id)));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(err(format!("duplicate id {:?}", rec.id)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_corpus(BufReader::new(file), &path.display().to_string())
}

pub fn write_corpus(path: impl AsRef<Path>, records: &[CorpusRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reject records whose style is not a profile label.
pub fn check_labels(records: &[CorpusRecord], profile: &StyleProfile) -> Result<()> {
    for r in records {
        if !profile.has_label(&r.style) {
            return Err(Error::validation(format!(
                "record {:?} has style {:?}, not in profile labels {:?}",
                r.id, r.style, profile.labels
            )));
        }
    }
    Ok(())
}

/// Sort key of a record id under `seed`: SHA-256 of the seed's
/// little-endian bytes followed by the id.
pub fn split_key(seed: u64, id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize().into()
}

/// Number of training records out of `n` under an 8:2 split, rounded to
/// the nearest integer.
pub fn train_count(n: usize) -> usize {
    (4 * n + 2) / 5
}

/// 8:2 split: records sorted by [`split_key`]; the first [`train_count`]
/// form the training set. Both halves keep the input order.
pub fn split_train_test(records: &[CorpusRecord], seed: u64) -> (Vec<CorpusRecord>, Vec<CorpusRecord>) {
    let mut keyed: Vec<(usize, [u8; 32])> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (i, split_key(seed, &r.id)))
        .collect();
    keyed.sort_by_key(|a| a.1);
    let mut in_train = vec![false; records.len()];
    for (i, _) in keyed.iter().take(train_count(records.len())) {
        in_train[*i] = true;
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (r, t) in records.iter().zip(in_train) {
        if t {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    (train, test)
}
