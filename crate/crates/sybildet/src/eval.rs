//! k-fold cross-validation harness and per-class metrics.
//!
//! Evaluation is binary with "fake" (sybil) as the positive class. All
//! reported metrics are derived from stored integer confusion counts,
//! so every number in a report can be recomputed exactly. Ratios with a
//! zero denominator are reported as 0.
//!
//! `run_experiment` reproduces the comparative setup: the same folds
//! are scored by an SVM alone and by the full walk pipeline, so the two
//! reports differ only in how held-out accounts were scored.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_all, fit_normalization, normalize, AccountRecord, Label};
use crate::graph::{build_graph_with_nodes, EdgeObservation, WeightMode};
use crate::propagation::{initialize_scores, sybilwalk, SeedMode, WalkConfig};
use crate::svm::{train, TrainConfig};
use crate::synthgen::SynthOutput;

/// Binary prediction for one account.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictedClass {
    Fake,
    Real,
}

/// Confusion counts with fake as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    pub false_negative: u64,
}

fn metrics_from(tp: u64, fp: u64, fn_count: u64) -> ClassMetrics {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_count);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ClassMetrics { precision, recall, f1 }
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn fake_metrics(&self) -> ClassMetrics {
        metrics_from(self.true_positive, self.false_positive, self.false_negative)
    }

    /// Real-class metrics reuse the same counts with the roles swapped:
    /// a fake-class false negative is a real-class false positive and
    /// vice versa.
    pub fn real_metrics(&self) -> ClassMetrics {
        metrics_from(self.true_negative, self.false_negative, self.false_positive)
    }

    pub fn absorb(&mut self, other: &Confusion) {
        self.true_positive += other.true_positive;
        self.false_positive += other.false_positive;
        self.true_negative += other.true_negative;
        self.false_negative += other.false_negative;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub confusion: Confusion,
    pub fake: ClassMetrics,
    pub real: ClassMetrics,
}

impl FoldReport {
    fn new(fold: usize, confusion: Confusion) -> Self {
        FoldReport {
            fold,
            confusion,
            fake: confusion.fake_metrics(),
            real: confusion.real_metrics(),
        }
    }
}

/// Evaluation result. The headline metrics pool the confusion counts of
/// every fold (each account is scored exactly once, as a held-out
/// node); the per-fold mean and best fake F1 are reported alongside
/// because single-fold reporting can flatter a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub confusion: Confusion,
    pub fake: ClassMetrics,
    pub real: ClassMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_fake_f1_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_fake_f1_best: Option<f64>,
    pub folds: Vec<FoldReport>,
}

impl EvalReport {
    fn from_confusion(threshold: f64, confusion: Confusion) -> Self {
        EvalReport {
            threshold,
            confusion,
            fake: confusion.fake_metrics(),
            real: confusion.real_metrics(),
            fold_fake_f1_mean: None,
            fold_fake_f1_best: None,
            folds: Vec::new(),
        }
    }

    fn from_folds(threshold: f64, folds: Vec<FoldReport>) -> Self {
        let mut pooled = Confusion::default();
        for fold in &folds {
            pooled.absorb(&fold.confusion);
        }
        let mut report = EvalReport::from_confusion(threshold, pooled);
        if !folds.is_empty() {
            let f1s: Vec<f64> = folds.iter().map(|f| f.fake.f1).collect();
            report.fold_fake_f1_mean = Some(f1s.iter().sum::<f64>() / f1s.len() as f64);
            report.fold_fake_f1_best = f1s.iter().copied().reduce(f64::max);
        }
        report.folds = folds;
        report
    }

    /// Aligned-column text rendering of the report.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "threshold {:.2}   samples {}   confusion TP={} FP={} TN={} FN={}\n\n",
            self.threshold,
            self.confusion.total(),
            self.confusion.true_positive,
            self.confusion.false_positive,
            self.confusion.true_negative,
            self.confusion.false_negative,
        ));
        out.push_str("class  precision  recall      f1\n");
        for (name, m) in [("fake", &self.fake), ("real", &self.real)] {
            out.push_str(&format!(
                "{name:<5}  {:>9.4}  {:>6.4}  {:>6.4}\n",
                m.precision, m.recall, m.f1
            ));
        }
        if !self.folds.is_empty() {
            out.push_str("\nfold  fake_p  fake_r  fake_f1  real_f1\n");
            for f in &self.folds {
                out.push_str(&format!(
                    "{:>4}  {:>6.4}  {:>6.4}  {:>7.4}  {:>7.4}\n",
                    f.fold, f.fake.precision, f.fake.recall, f.fake.f1, f.real.f1
                ));
            }
            out.push_str(&format!(
                "\nfake F1 mean over folds {:.4}, best fold {:.4}\n",
                self.fold_fake_f1_mean.unwrap_or(0.0),
                self.fold_fake_f1_best.unwrap_or(0.0),
            ));
        }
        out
    }
}

/// Splits ids into k disjoint folds whose sizes differ by at most one.
///
/// When `strata` is given, ids are grouped by label first and each
/// group is dealt round-robin with a cursor shared across groups, so
/// both the overall fold sizes and the per-label counts stay balanced.
/// Deterministic: ids are sorted before the seeded shuffle, so the
/// split depends only on the id set, strata, k, and seed.
pub fn kfold_split(
    ids: &[String],
    strata: Option<&BTreeMap<String, Label>>,
    k: usize,
    rng_seed: u64,
) -> Result<Vec<Vec<String>>> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if k > ids.len() {
        return Err(Error::Config(format!(
            "k = {k} exceeds the {} available ids",
            ids.len()
        )));
    }
    let mut sorted: Vec<&String> = ids.iter().collect();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::MalformedData("duplicate id in fold input".into()));
    }

    let mut groups: BTreeMap<Label, Vec<&String>> = BTreeMap::new();
    for id in sorted {
        let stratum = strata
            .map(|m| m.get(id).copied().unwrap_or(Label::Unknown))
            .unwrap_or(Label::Unknown);
        groups.entry(stratum).or_default().push(id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for group in groups.values_mut() {
        group.shuffle(&mut rng);
        for id in group.iter() {
            folds[cursor].push((*id).clone());
            cursor = (cursor + 1) % k;
        }
    }
    Ok(folds)
}

/// Thresholds a sybil score: fake iff score >= threshold (ties fake).
pub fn score_to_label(score: f64, threshold: f64) -> PredictedClass {
    if score >= threshold {
        PredictedClass::Fake
    } else {
        PredictedClass::Real
    }
}

fn confusion_of(
    predicted: &BTreeMap<String, PredictedClass>,
    truth: &BTreeMap<String, Label>,
) -> Result<Confusion> {
    let mut confusion = Confusion::default();
    for (id, &p) in predicted {
        let Some(&t) = truth.get(id) else { continue };
        let is_sybil = match t {
            Label::Sybil => true,
            Label::Benign => false,
            Label::Unknown => {
                return Err(Error::MalformedData(format!(
                    "ground truth for '{id}' is unknown"
                )))
            }
        };
        match (p, is_sybil) {
            (PredictedClass::Fake, true) => confusion.true_positive += 1,
            (PredictedClass::Fake, false) => confusion.false_positive += 1,
            (PredictedClass::Real, true) => confusion.false_negative += 1,
            (PredictedClass::Real, false) => confusion.true_negative += 1,
        }
    }
    if confusion.total() == 0 {
        return Err(Error::NoData(
            "no predicted id has a ground-truth label".into(),
        ));
    }
    Ok(confusion)
}

/// Scores predictions against ground truth over the id intersection.
/// `threshold` is recorded in the report for provenance.
pub fn evaluate(
    predicted: &BTreeMap<String, PredictedClass>,
    truth: &BTreeMap<String, Label>,
    threshold: f64,
) -> Result<EvalReport> {
    validate_threshold(threshold)?;
    Ok(EvalReport::from_confusion(threshold, confusion_of(predicted, truth)?))
}

fn validate_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!(
            "threshold must be in (0, 1), got {threshold}"
        )));
    }
    Ok(())
}

/// One dataset: account records, edge observations, the exposed label
/// subset, and full ground truth.
///
/// File-based pipeline runs train on `labels` (what a deployment would
/// actually have). Cross-validation ignores `labels` and folds over
/// `ground_truth`, hiding each held-out fold's truth entirely.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub accounts: Vec<AccountRecord>,
    pub observations: Vec<EdgeObservation>,
    pub labels: BTreeMap<String, Label>,
    pub ground_truth: BTreeMap<String, Label>,
}

impl From<SynthOutput> for Dataset {
    fn from(out: SynthOutput) -> Self {
        Dataset {
            accounts: out.accounts,
            observations: out.observations,
            labels: out.labels,
            ground_truth: out.ground_truth,
        }
    }
}

/// How held-out accounts are scored in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineVariant {
    /// Sigmoid SVM scores used directly.
    SvmOnly,
    /// SVM scores seed the random walk.
    Hybrid,
    /// The walk from flat 0.5 scores; isolates the graph's contribution.
    UniformPriorHybrid,
}

/// Experiment knobs. `walk.seed_mode` is overridden per variant, so only
/// its epsilon and iteration cap matter here.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub kfold_seed: u64,
    pub train: TrainConfig,
    pub walk: WalkConfig,
    pub threshold: f64,
    pub weight_mode: WeightMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 5,
            kfold_seed: 42,
            train: TrainConfig::default(),
            walk: WalkConfig::default(),
            threshold: 0.5,
            weight_mode: WeightMode::Floored,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(
                "cross-validation needs k >= 2 so every fold has training data".into(),
            ));
        }
        validate_threshold(self.threshold)?;
        self.train.validate()?;
        self.walk.validate()
    }
}

/// Per-fold held-out scores: (fold's test ids, score per id).
type FoldScores = Vec<(Vec<String>, BTreeMap<String, f64>)>;

/// Trains on k-1 folds and scores each held-out fold per the variant.
/// Every ground-truth account is scored exactly once.
fn run_folds(
    dataset: &Dataset,
    variant: PipelineVariant,
    config: &ExperimentConfig,
) -> Result<FoldScores> {
    config.validate()?;
    let raw_vectors = extract_all(&dataset.accounts)?;
    let index_of: BTreeMap<&str, usize> = raw_vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (v.account_id.as_str(), i))
        .collect();

    for id in dataset.ground_truth.keys() {
        if !index_of.contains_key(id.as_str()) {
            return Err(Error::MalformedData(format!(
                "ground-truth id '{id}' has no account record"
            )));
        }
    }
    for obs in &dataset.observations {
        for end in [&obs.u, &obs.v] {
            if !index_of.contains_key(end.as_str()) {
                return Err(Error::MalformedData(format!(
                    "edge endpoint '{end}' has no account record"
                )));
            }
        }
    }

    let fold_ids: Vec<String> = dataset.ground_truth.keys().cloned().collect();
    let folds = kfold_split(
        &fold_ids,
        Some(&dataset.ground_truth),
        config.k,
        config.kfold_seed,
    )?;
    let all_ids: Vec<String> = raw_vectors.iter().map(|v| v.account_id.clone()).collect();

    let mut result = Vec::with_capacity(folds.len());
    for fold in &folds {
        let test: BTreeSet<&str> = fold.iter().map(String::as_str).collect();

        let mut train_raw = Vec::new();
        let mut train_labels = Vec::new();
        for (id, &label) in &dataset.ground_truth {
            if !test.contains(id.as_str()) {
                train_raw.push(raw_vectors[index_of[id.as_str()]].clone());
                train_labels.push(label);
            }
        }
        let stats = fit_normalization(&train_raw)?;
        let train_normed: Vec<_> = train_raw.iter().map(|v| normalize(v, &stats)).collect();
        let model = train(&train_normed, &train_labels, &config.train)?.with_normalization(stats);

        let priors: BTreeMap<String, f64> = raw_vectors
            .iter()
            .map(|v| (v.account_id.clone(), model.score_raw(v)))
            .collect();

        let scores: BTreeMap<String, f64> = match variant {
            PipelineVariant::SvmOnly => fold
                .iter()
                .map(|id| (id.clone(), priors[id]))
                .collect(),
            PipelineVariant::Hybrid | PipelineVariant::UniformPriorHybrid => {
                let train_label_map: BTreeMap<String, Label> = dataset
                    .ground_truth
                    .iter()
                    .filter(|(id, _)| !test.contains(id.as_str()))
                    .map(|(id, &l)| (id.clone(), l))
                    .collect();
                let graph = build_graph_with_nodes(
                    &dataset.observations,
                    &train_label_map,
                    &all_ids,
                    config.weight_mode,
                )?;
                let seed_mode = match variant {
                    PipelineVariant::UniformPriorHybrid => SeedMode::Uniform,
                    _ => SeedMode::Svm,
                };
                let prior_lookup: HashMap<String, f64> =
                    priors.iter().map(|(k, &v)| (k.clone(), v)).collect();
                let init = initialize_scores(&graph, &prior_lookup, seed_mode)?;
                let walk_config = WalkConfig { seed_mode, ..config.walk.clone() };
                let walked = sybilwalk(&graph, &init, &walk_config)?;
                fold.iter()
                    .map(|id| {
                        let u = graph.user_index(id).ok_or_else(|| {
                            Error::Invariant(format!("account '{id}' missing from graph"))
                        })?;
                        Ok((id.clone(), walked.scores[u]))
                    })
                    .collect::<Result<_>>()?
            }
        };
        result.push((fold.clone(), scores));
    }
    Ok(result)
}

/// Cross-validated evaluation of one pipeline variant.
pub fn run_experiment(
    dataset: &Dataset,
    variant: PipelineVariant,
    config: &ExperimentConfig,
) -> Result<EvalReport> {
    let fold_scores = run_folds(dataset, variant, config)?;
    let mut folds = Vec::with_capacity(fold_scores.len());
    for (i, (_, scores)) in fold_scores.iter().enumerate() {
        let predicted: BTreeMap<String, PredictedClass> = scores
            .iter()
            .map(|(id, &s)| (id.clone(), score_to_label(s, config.threshold)))
            .collect();
        folds.push(FoldReport::new(i, confusion_of(&predicted, &dataset.ground_truth)?));
    }
    Ok(EvalReport::from_folds(config.threshold, folds))
}
