//! Account feature extraction, normalization, and entropy-based ranking.
//!
//! Every account is summarized by a fixed 18-dimensional count vector.
//! The index order below is canonical: models, feature CSVs, and ranking
//! output all refer to features by these indices.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of features per account. Fixed by the feature table.
pub const FEATURE_COUNT: usize = 18;

/// Canonical feature names, in index order. `f0` .. `f17` in CSV headers
/// map to these positions.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "active_days",
    "friend_count",
    "group_count",
    "post_count",
    "wall_post_count",
    "tagged_in_post_count",
    "reaction_count",
    "comment_count",
    "likes_received",
    "comments_received",
    "shares_received",
    "tags_in_own_posts",
    "users_tagged_in_posts",
    "pages_tagged_in_posts",
    "shared_post_count",
    "users_tagged_in_comments",
    "tagged_in_comments_count",
    "pages_tagged_in_comments",
];

/// Ground-truth status of an account.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Sybil,
    #[default]
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Sybil => "sybil",
            Label::Unknown => "unknown",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benign" => Ok(Label::Benign),
            "sybil" => Ok(Label::Sybil),
            "unknown" => Ok(Label::Unknown),
            other => Err(Error::MalformedData(format!("unknown label '{other}'"))),
        }
    }
}

/// Raw per-account activity counts, the ingestion unit.
///
/// Count fields may be absent (privacy-hidden); absent counts are imputed
/// as 0 during extraction. Unknown JSON fields are rejected so that a
/// misspelled field cannot silently become an imputed zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AccountRecord {
    pub account_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_days: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friend_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_post_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tagged_in_post_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likes_received: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comments_received: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shares_received: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags_in_own_posts: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users_tagged_in_posts: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pages_tagged_in_posts: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_post_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users_tagged_in_comments: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tagged_in_comments_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pages_tagged_in_comments: Option<u64>,
    #[serde(default)]
    pub label: Label,
}

impl AccountRecord {
    /// Builds a record from a counts array in canonical index order,
    /// the inverse of `extract_features` (every field present).
    pub fn from_counts(account_id: String, counts: [u64; FEATURE_COUNT], label: Label) -> Self {
        AccountRecord {
            account_id,
            active_days: Some(counts[0]),
            friend_count: Some(counts[1]),
            group_count: Some(counts[2]),
            post_count: Some(counts[3]),
            wall_post_count: Some(counts[4]),
            tagged_in_post_count: Some(counts[5]),
            reaction_count: Some(counts[6]),
            comment_count: Some(counts[7]),
            likes_received: Some(counts[8]),
            comments_received: Some(counts[9]),
            shares_received: Some(counts[10]),
            tags_in_own_posts: Some(counts[11]),
            users_tagged_in_posts: Some(counts[12]),
            pages_tagged_in_posts: Some(counts[13]),
            shared_post_count: Some(counts[14]),
            users_tagged_in_comments: Some(counts[15]),
            tagged_in_comments_count: Some(counts[16]),
            pages_tagged_in_comments: Some(counts[17]),
            label,
        }
    }
}

/// Fixed-order numeric feature vector for one account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub account_id: String,
    pub values: [f64; FEATURE_COUNT],
}

/// Per-feature mean and standard deviation, fitted on a training split.
///
/// Stored standard deviations are strictly positive: zero-variance
/// features are recorded with std = 1 so normalization passes them
/// through after centering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub means: [f64; FEATURE_COUNT],
    pub stds: [f64; FEATURE_COUNT],
}

impl NormalizationStats {
    /// Identity transform: mean 0, std 1 for every feature.
    pub fn identity() -> Self {
        NormalizationStats {
            means: [0.0; FEATURE_COUNT],
            stds: [1.0; FEATURE_COUNT],
        }
    }
}

/// Characters an account id may not contain, so that ids embed safely in
/// the CSV/TSV formats the pipeline emits.
const FORBIDDEN_ID_CHARS: [char; 4] = [',', '\t', '\n', '\r'];

pub(crate) fn validate_account_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::MalformedRecord("empty account_id".into()));
    }
    if id.contains(FORBIDDEN_ID_CHARS) {
        return Err(Error::MalformedRecord(format!(
            "account_id '{}' contains a delimiter character",
            id.escape_default()
        )));
    }
    Ok(())
}

/// Converts a raw record into its 18-vector in canonical index order.
/// Missing count fields impute to 0.
pub fn extract_features(record: &AccountRecord) -> Result<FeatureVector> {
    validate_account_id(&record.account_id)?;
    let c = |v: Option<u64>| v.unwrap_or(0) as f64;
    let values = [
        c(record.active_days),
        c(record.friend_count),
        c(record.group_count),
        c(record.post_count),
        c(record.wall_post_count),
        c(record.tagged_in_post_count),
        c(record.reaction_count),
        c(record.comment_count),
        c(record.likes_received),
        c(record.comments_received),
        c(record.shares_received),
        c(record.tags_in_own_posts),
        c(record.users_tagged_in_posts),
        c(record.pages_tagged_in_posts),
        c(record.shared_post_count),
        c(record.users_tagged_in_comments),
        c(record.tagged_in_comments_count),
        c(record.pages_tagged_in_comments),
    ];
    Ok(FeatureVector {
        account_id: record.account_id.clone(),
        values,
    })
}

/// Extracts a whole corpus, checking account_id uniqueness.
pub fn extract_all(records: &[AccountRecord]) -> Result<Vec<FeatureVector>> {
    if records.is_empty() {
        return Err(Error::EmptyDataset("no account records".into()));
    }
    let mut seen = HashSet::with_capacity(records.len());
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let v = extract_features(r)?;
        if !seen.insert(v.account_id.clone()) {
            return Err(Error::MalformedRecord(format!(
                "duplicate account_id '{}'",
                v.account_id
            )));
        }
        out.push(v);
    }
    Ok(out)
}

/// Fits per-feature mean and population standard deviation.
/// Zero-variance features are recorded with std = 1.
pub fn fit_normalization(vectors: &[FeatureVector]) -> Result<NormalizationStats> {
    if vectors.is_empty() {
        return Err(Error::EmptyDataset("cannot fit normalization on zero vectors".into()));
    }
    let n = vectors.len() as f64;
    let mut means = [0.0; FEATURE_COUNT];
    for v in vectors {
        for (m, x) in means.iter_mut().zip(v.values.iter()) {
            *m += x;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut stds = [0.0; FEATURE_COUNT];
    for v in vectors {
        for i in 0..FEATURE_COUNT {
            let d = v.values[i] - means[i];
            stds[i] += d * d;
        }
    }
    for s in stds.iter_mut() {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Ok(NormalizationStats { means, stds })
}

/// Z-scores a vector: entry i becomes (x_i - mean_i) / std_i.
pub fn normalize(vector: &FeatureVector, stats: &NormalizationStats) -> FeatureVector {
    let mut values = [0.0; FEATURE_COUNT];
    for i in 0..FEATURE_COUNT {
        values[i] = (vector.values[i] - stats.means[i]) / stats.stds[i];
    }
    FeatureVector {
        account_id: vector.account_id.clone(),
        values,
    }
}

/// Inverse of [`normalize`]: entry i becomes x_i * std_i + mean_i.
pub fn denormalize(vector: &FeatureVector, stats: &NormalizationStats) -> FeatureVector {
    let mut values = [0.0; FEATURE_COUNT];
    for i in 0..FEATURE_COUNT {
        values[i] = vector.values[i] * stats.stds[i] + stats.means[i];
    }
    FeatureVector {
        account_id: vector.account_id.clone(),
        values,
    }
}

/// Shannon entropy in bits of a benign/sybil split given class counts.
fn entropy_bits(n_benign: usize, n_sybil: usize) -> f64 {
    let n = (n_benign + n_sybil) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &c in &[n_benign, n_sybil] {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

fn median_of(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite feature values"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Ranks features by information gain of the label after a binary split
/// at each feature's median (values ≤ median go left). Result is sorted
/// descending by gain, ties broken by feature index.
///
/// This is a report-only diagnostic; no features are eliminated.
pub fn rank_features_by_entropy(
    vectors: &[FeatureVector],
    labels: &[Label],
) -> Result<Vec<(usize, f64)>> {
    if vectors.is_empty() {
        return Err(Error::EmptyDataset("no vectors to rank".into()));
    }
    if vectors.len() != labels.len() {
        return Err(Error::MalformedData(format!(
            "{} vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    let n_sybil = labels.iter().filter(|&&l| l == Label::Sybil).count();
    let n_benign = labels.iter().filter(|&&l| l == Label::Benign).count();
    if n_sybil + n_benign != labels.len() {
        return Err(Error::MalformedData(
            "entropy ranking requires every label to be benign or sybil".into(),
        ));
    }
    if n_sybil == 0 || n_benign == 0 {
        return Err(Error::DegenerateLabels(
            "entropy ranking requires at least one sample per class".into(),
        ));
    }

    let h_total = entropy_bits(n_benign, n_sybil);
    let n = vectors.len() as f64;
    let mut gains: Vec<(usize, f64)> = (0..FEATURE_COUNT)
        .map(|f| {
            let med = median_of(vectors.iter().map(|v| v.values[f]).collect());
            let (mut lb, mut ls, mut rb, mut rs) = (0usize, 0usize, 0usize, 0usize);
            for (v, &l) in vectors.iter().zip(labels.iter()) {
                let left = v.values[f] <= med;
                match (left, l) {
                    (true, Label::Benign) => lb += 1,
                    (true, Label::Sybil) => ls += 1,
                    (false, Label::Benign) => rb += 1,
                    (false, Label::Sybil) => rs += 1,
                    _ => unreachable!("labels validated above"),
                }
            }
            let cond = (lb + ls) as f64 / n * entropy_bits(lb, ls)
                + (rb + rs) as f64 / n * entropy_bits(rb, rs);
            // Guard against negative-zero noise from the subtraction.
            let gain = (h_total - cond).max(0.0);
            (f, gain)
        })
        .collect();
    gains.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(gains)
}
