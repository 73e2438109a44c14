//! File formats for the pipeline: accounts JSONL, feature/prior/score
//! CSVs, and edge/label TSVs.
//!
//! Readers report errors with the path and 1-based line number.
//! Writers emit floats with Rust's shortest round-trip formatting, so a
//! value passed through a file parses back to the identical bits; byte
//! output is a pure function of the data.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{validate_account_id, AccountRecord, FeatureVector, Label, FEATURE_COUNT};
use crate::graph::EdgeObservation;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Skips blank lines; a line whose first character is '#' is a comment.
fn is_skippable(line: &str) -> bool {
    let trimmed = line.trim();
    trimmed.is_empty() || trimmed.starts_with('#')
}

/// One account record per line as a JSON object. Blank lines are
/// tolerated; anything else must parse as a record.
pub fn read_accounts_jsonl(path: &Path) -> Result<Vec<AccountRecord>> {
    let content = read_file(path)?;
    let mut records = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: AccountRecord = serde_json::from_str(line)
            .map_err(|e| parse_err(path, i + 1, format!("bad account record: {e}")))?;
        validate_account_id(&record.account_id).map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_accounts_jsonl(path: &Path, records: &[AccountRecord]) -> Result<()> {
    let mut out = String::new();
    for record in records {
        validate_account_id(&record.account_id)?;
        out.push_str(&serde_json::to_string(record).expect("record serialization is infallible"));
        out.push('\n');
    }
    write_file(path, &out)
}

fn features_header() -> String {
    let mut h = String::from("account_id");
    for i in 0..FEATURE_COUNT {
        h.push_str(&format!(",f{i}"));
    }
    h
}

/// Header `account_id,f0..f17`, then one row per vector. Values use
/// shortest round-trip float formatting.
pub fn write_features_csv(path: &Path, vectors: &[FeatureVector]) -> Result<()> {
    let mut out = features_header();
    out.push('\n');
    for v in vectors {
        validate_account_id(&v.account_id)?;
        out.push_str(&v.account_id);
        for x in &v.values {
            out.push(',');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>> {
    let content = read_file(path)?;
    let mut lines = content.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing header"))?;
    if header.1 != features_header() {
        return Err(parse_err(
            path,
            1,
            format!("expected header '{}'", features_header()),
        ));
    }
    let mut vectors = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FEATURE_COUNT + 1 {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {} columns, got {}", FEATURE_COUNT + 1, fields.len()),
            ));
        }
        let mut values = [0.0; FEATURE_COUNT];
        for (j, raw) in fields[1..].iter().enumerate() {
            values[j] = raw
                .parse::<f64>()
                .map_err(|_| parse_err(path, i + 1, format!("bad float '{raw}' in column f{j}")))?;
        }
        vectors.push(FeatureVector {
            account_id: fields[0].to_string(),
            values,
        });
    }
    Ok(vectors)
}

/// Tab-separated `u v mutual_friend_count`, one edge per line.
pub fn write_edges_tsv(path: &Path, observations: &[EdgeObservation]) -> Result<()> {
    let mut out = String::from("# u\tv\tmutual_friend_count\n");
    for obs in observations {
        validate_account_id(&obs.u)?;
        validate_account_id(&obs.v)?;
        out.push_str(&format!("{}\t{}\t{}\n", obs.u, obs.v, obs.mutual_friend_count));
    }
    write_file(path, &out)
}

pub fn read_edges_tsv(path: &Path) -> Result<Vec<EdgeObservation>> {
    let content = read_file(path)?;
    let mut observations = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if is_skippable(line) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected 3 tab-separated columns, got {}", fields.len()),
            ));
        }
        let count = fields[2].parse::<u64>().map_err(|_| {
            parse_err(path, i + 1, format!("bad mutual-friend count '{}'", fields[2]))
        })?;
        observations.push(EdgeObservation {
            u: fields[0].to_string(),
            v: fields[1].to_string(),
            mutual_friend_count: count,
        });
    }
    Ok(observations)
}

/// Tab-separated `account_id label` with label one of benign/sybil/unknown.
pub fn write_labels_tsv(path: &Path, labels: &BTreeMap<String, Label>) -> Result<()> {
    let mut out = String::from("# account_id\tlabel\n");
    for (id, label) in labels {
        validate_account_id(id)?;
        out.push_str(&format!("{id}\t{}\n", label.as_str()));
    }
    write_file(path, &out)
}

pub fn read_labels_tsv(path: &Path) -> Result<BTreeMap<String, Label>> {
    let content = read_file(path)?;
    let mut labels = BTreeMap::new();
    for (i, line) in content.lines().enumerate() {
        if is_skippable(line) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected 2 tab-separated columns, got {}", fields.len()),
            ));
        }
        let label: Label = fields[1]
            .parse()
            .map_err(|e: Error| parse_err(path, i + 1, e.to_string()))?;
        if labels.insert(fields[0].to_string(), label).is_some() {
            return Err(parse_err(
                path,
                i + 1,
                format!("duplicate label for '{}'", fields[0]),
            ));
        }
    }
    Ok(labels)
}

/// CSV `account_id,sybil_probability` with round-trip float formatting.
pub fn write_priors_csv(path: &Path, priors: &BTreeMap<String, f64>) -> Result<()> {
    let mut out = String::from("account_id,sybil_probability\n");
    for (id, p) in priors {
        validate_account_id(id)?;
        out.push_str(&format!("{id},{p}\n"));
    }
    write_file(path, &out)
}

pub fn read_priors_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let content = read_file(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, "account_id,sybil_probability")) => {}
        _ => return Err(parse_err(path, 1, "expected header 'account_id,sybil_probability'")),
    }
    let mut priors = BTreeMap::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, raw)) = line.split_once(',') else {
            return Err(parse_err(path, i + 1, "expected 2 comma-separated columns"));
        };
        let p = raw
            .parse::<f64>()
            .map_err(|_| parse_err(path, i + 1, format!("bad probability '{raw}'")))?;
        if priors.insert(id.to_string(), p).is_some() {
            return Err(parse_err(path, i + 1, format!("duplicate prior for '{id}'")));
        }
    }
    Ok(priors)
}

/// Whether a walk score is a converged propagation value or an
/// initialization passed through because the node cannot reach a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFlag {
    Ok,
    Unreachable,
}

impl fmt::Display for ScoreFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreFlag::Ok => "ok",
            ScoreFlag::Unreachable => "unreachable",
        })
    }
}

impl std::str::FromStr for ScoreFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(ScoreFlag::Ok),
            "unreachable" => Ok(ScoreFlag::Unreachable),
            other => Err(Error::MalformedData(format!("unknown score flag '{other}'"))),
        }
    }
}

/// One scored account in a walk output.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub account_id: String,
    pub score: f64,
    /// Iterations the walk ran; identical on every row of one run.
    pub iterations: usize,
    pub flag: ScoreFlag,
}

/// CSV `account_id,score,iterations,flag`.
pub fn write_scores_csv(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut out = String::from("account_id,score,iterations,flag\n");
    for row in rows {
        validate_account_id(&row.account_id)?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.account_id, row.score, row.iterations, row.flag
        ));
    }
    write_file(path, &out)
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    let content = read_file(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, "account_id,score,iterations,flag")) => {}
        _ => {
            return Err(parse_err(
                path,
                1,
                "expected header 'account_id,score,iterations,flag'",
            ))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected 4 columns, got {}", fields.len()),
            ));
        }
        rows.push(ScoreRow {
            account_id: fields[0].to_string(),
            score: fields[1]
                .parse::<f64>()
                .map_err(|_| parse_err(path, i + 1, format!("bad score '{}'", fields[1])))?,
            iterations: fields[2]
                .parse::<usize>()
                .map_err(|_| parse_err(path, i + 1, format!("bad iteration count '{}'", fields[2])))?,
            flag: fields[3]
                .parse::<ScoreFlag>()
                .map_err(|e| parse_err(path, i + 1, e.to_string()))?,
        });
    }
    Ok(rows)
}
