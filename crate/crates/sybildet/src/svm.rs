//! Linear soft-margin SVM trained on the primal hinge objective, plus
//! sigmoid normalization of decision values into Sybil probabilities.
//!
//! The decision hyperplane is `w·x - b = 0`. Training uses the raw label
//! convention sybil = -1, benign = +1, so the trained hyperplane places
//! benign points on the positive side. The Sybil probability therefore
//! applies the sigmoid to the *oriented* decision value (see
//! [`sybil_probability`]); the orientation is stored in the model rather
//! than implied by sign conventions in code.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Label, NormalizationStats, FEATURE_COUNT};

/// Raw training labels per class. Fixed at training time and serialized
/// with the model so the probability orientation is explicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelConvention {
    pub sybil: f64,
    pub benign: f64,
}

impl Default for LabelConvention {
    fn default() -> Self {
        LabelConvention {
            sybil: -1.0,
            benign: 1.0,
        }
    }
}

impl LabelConvention {
    fn raw_label(&self, label: Label) -> Result<f64> {
        match label {
            Label::Sybil => Ok(self.sybil),
            Label::Benign => Ok(self.benign),
            Label::Unknown => Err(Error::MalformedData(
                "training labels must be benign or sybil".into(),
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sybil != -1.0 || self.benign != 1.0 {
            return Err(Error::ModelFormat(format!(
                "unsupported label convention (sybil={}, benign={})",
                self.sybil, self.benign
            )));
        }
        Ok(())
    }
}

/// Trained hyperplane with the normalization statistics of its training
/// split. Decision inputs must be normalized with `normalization`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub normalization: NormalizationStats,
    pub label_convention: LabelConvention,
}

impl LinearModel {
    /// Attaches the normalization stats the training vectors were scaled
    /// with. `train` itself consumes already-normalized vectors.
    pub fn with_normalization(mut self, stats: NormalizationStats) -> Self {
        self.normalization = stats;
        self
    }

    /// Sybil probability of a *raw* (unnormalized) feature vector:
    /// normalizes with the model's stored stats, then applies
    /// [`sybil_probability`].
    pub fn score_raw(&self, raw: &FeatureVector) -> f64 {
        let normed = crate::features::normalize(raw, &self.normalization);
        sybil_probability(self, &normed)
    }
}

/// Training hyperparameters.
///
/// `sybil_cost` / `benign_cost` are optional per-class multipliers on the
/// hinge term (both 1.0 by default, i.e. no class reweighting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Soft-margin cost C in 0.5*||w||^2 + C * sum(hinge).
    pub c: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
    pub rng_seed: u64,
    pub sybil_cost: f64,
    pub benign_cost: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            max_epochs: 200,
            tolerance: 1e-4,
            rng_seed: 0,
            sybil_cost: 1.0,
            benign_cost: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("train.c must be positive, got {}", self.c)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("train.max_epochs must be at least 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "train.tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.sybil_cost > 0.0 && self.benign_cost > 0.0) {
            return Err(Error::Config("per-class costs must be positive".into()));
        }
        Ok(())
    }
}

fn dot(w: &[f64; FEATURE_COUNT], x: &[f64; FEATURE_COUNT]) -> f64 {
    let mut s = 0.0;
    for i in 0..FEATURE_COUNT {
        s += w[i] * x[i];
    }
    s
}

/// Full primal objective 0.5*||w||^2 + sum_i cost_i * hinge_i.
fn objective(
    w: &[f64; FEATURE_COUNT],
    b: f64,
    xs: &[[f64; FEATURE_COUNT]],
    ys: &[f64],
    costs: &[f64],
) -> f64 {
    let mut obj = 0.5 * dot(w, w);
    for i in 0..xs.len() {
        let margin = 1.0 - ys[i] * (dot(w, &xs[i]) - b);
        if margin > 0.0 {
            obj += costs[i] * margin;
        }
    }
    obj
}

/// Training objective of a model on a labeled set, using the model's
/// label convention and the config's per-sample costs.
pub fn hinge_objective(
    model: &LinearModel,
    vectors: &[FeatureVector],
    labels: &[Label],
    config: &TrainConfig,
) -> Result<f64> {
    let (xs, ys, costs) = prepare(vectors, labels, config, &model.label_convention)?;
    Ok(objective(&model.weights, model.bias, &xs, &ys, &costs))
}

fn prepare(
    vectors: &[FeatureVector],
    labels: &[Label],
    config: &TrainConfig,
    convention: &LabelConvention,
) -> Result<(Vec<[f64; FEATURE_COUNT]>, Vec<f64>, Vec<f64>)> {
    if vectors.is_empty() {
        return Err(Error::EmptyDataset("no training vectors".into()));
    }
    if vectors.len() != labels.len() {
        return Err(Error::MalformedData(format!(
            "{} vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    let mut xs = Vec::with_capacity(vectors.len());
    let mut ys = Vec::with_capacity(vectors.len());
    let mut costs = Vec::with_capacity(vectors.len());
    for (v, &l) in vectors.iter().zip(labels.iter()) {
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::MalformedData(format!(
                "non-finite feature value for account '{}'",
                v.account_id
            )));
        }
        xs.push(v.values);
        ys.push(convention.raw_label(l)?);
        costs.push(
            config.c
                * match l {
                    Label::Sybil => config.sybil_cost,
                    Label::Benign => config.benign_cost,
                    Label::Unknown => unreachable!(),
                },
        );
    }
    Ok((xs, ys, costs))
}

/// Trains a linear soft-margin SVM by deterministic subgradient descent
/// on the primal hinge objective.
///
/// Three phases, all tracking the best iterate seen:
/// 1. stochastic subgradient epochs with seeded shuffling and a decayed
///    step size, for fast global progress;
/// 2. a batch-subgradient polish with an adaptive step length, which
///    tightens the iterate near the hinge kinks;
/// 3. an active-set landing that solves for the exact minimizer implied
///    by the points near the kinks, adopted only when it lowers the
///    objective (needed for the separable large-C regime, where the
///    optimum sits exactly on the kinks and subgradient steps orbit it).
///
/// The returned model carries identity normalization stats; attach the
/// real ones with [`LinearModel::with_normalization`].
pub fn train(
    vectors: &[FeatureVector],
    labels: &[Label],
    config: &TrainConfig,
) -> Result<LinearModel> {
    config.validate()?;
    let convention = LabelConvention::default();
    let (xs, ys, costs) = prepare(vectors, labels, config, &convention)?;
    let n = xs.len();
    let n_sybil = ys.iter().filter(|&&y| y == convention.sybil).count();
    if n_sybil == 0 || n_sybil == n {
        return Err(Error::DegenerateLabels(
            "training requires both benign and sybil samples".into(),
        ));
    }

    let mut w = [0.0f64; FEATURE_COUNT];
    let mut b = 0.0f64;
    let mut best_w = w;
    let mut best_b = b;
    let mut best_obj = objective(&w, b, &xs, &ys, &costs);

    // ||w*|| <= sqrt(2 * F(0)) since 0.5*||w*||^2 <= F(w*) <= F(0).
    let total_cost: f64 = costs.iter().sum();
    let w_ball = (2.0 * total_cost).sqrt();
    let r2 = xs
        .iter()
        .map(|x| dot(x, x) + 1.0)
        .fold(0.0f64, f64::max)
        .max(1.0);
    let b_bound = 1.0 + r2.sqrt() * w_ball;

    // Phase 1: stochastic subgradient. Step offset keeps the first
    // hinge-driven moves at feature scale even for large C.
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let t_off = total_cost * r2;
    let mut t = 0.0f64;
    let mut stagnant = 0usize;
    let mut last_obj = best_obj;
    for _epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1.0;
            let eta = 1.0 / (t + t_off);
            let active = 1.0 - ys[i] * (dot(&w, &xs[i]) - b) > 0.0;
            let shrink = 1.0 - eta;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if active {
                let step = eta * n as f64 * costs[i] * ys[i];
                for j in 0..FEATURE_COUNT {
                    w[j] += step * xs[i][j];
                }
                b -= step;
            }
            let norm = dot(&w, &w).sqrt();
            if norm > w_ball {
                let scale = w_ball / norm;
                for wj in w.iter_mut() {
                    *wj *= scale;
                }
            }
            b = b.clamp(-b_bound, b_bound);
        }
        let obj = objective(&w, b, &xs, &ys, &costs);
        if obj < best_obj {
            best_obj = obj;
            best_w = w;
            best_b = b;
        }
        if (last_obj - obj).abs() <= config.tolerance * (1.0 + obj.abs()) {
            stagnant += 1;
            if stagnant >= 10 {
                break;
            }
        } else {
            stagnant = 0;
        }
        last_obj = obj;
    }

    // Phase 2: batch-subgradient polish from the best point, normalized
    // directions with multiplicative step adaptation.
    w = best_w;
    b = best_b;
    let mut cur_obj = best_obj;
    let mut step = 1.0f64;
    for _ in 0..4000 {
        let mut gw = w;
        let mut gb = 0.0f64;
        for i in 0..n {
            if 1.0 - ys[i] * (dot(&w, &xs[i]) - b) > 0.0 {
                let coeff = costs[i] * ys[i];
                for j in 0..FEATURE_COUNT {
                    gw[j] -= coeff * xs[i][j];
                }
                gb += coeff;
            }
        }
        let gnorm = (dot(&gw, &gw) + gb * gb).sqrt();
        if gnorm == 0.0 {
            break;
        }
        let mut cand_w = w;
        for j in 0..FEATURE_COUNT {
            cand_w[j] -= step * gw[j] / gnorm;
        }
        let cand_b = b - step * gb / gnorm;
        let cand_obj = objective(&cand_w, cand_b, &xs, &ys, &costs);
        if cand_obj < cur_obj {
            w = cand_w;
            b = cand_b;
            cur_obj = cand_obj;
            step *= 1.3;
            if cur_obj < best_obj {
                best_obj = cur_obj;
                best_w = w;
                best_b = b;
            }
        } else {
            step *= 0.5;
        }
        if step < 1e-14 * (1.0 + dot(&w, &w).sqrt() + b.abs()) {
            break;
        }
    }

    // Phase 3: active-set landing. Subgradient steps orbit hinge kinks
    // without ever sitting on them, which leaves a visible objective gap
    // exactly in the separable large-C regime where the optimum has
    // several margins at 1. Solving the stationarity system for the
    // near-active set lands on the kink directly. Bands widen because
    // the orbit radius is not known in advance; candidates are adopted
    // only when they lower the objective, so the phase is a pure
    // refinement and cannot regress any input.
    for _ in 0..3 {
        let mut improved = false;
        for band in [1e-2, 5e-2, 0.25] {
            let Some((cand_w, cand_b)) = kink_polish(&best_w, best_b, &xs, &ys, &costs, band)
            else {
                continue;
            };
            let cand_obj = objective(&cand_w, cand_b, &xs, &ys, &costs);
            if cand_obj < best_obj {
                best_obj = cand_obj;
                best_w = cand_w;
                best_b = cand_b;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    Ok(LinearModel {
        weights: best_w,
        bias: best_b,
        normalization: NormalizationStats::identity(),
        label_convention: convention,
    })
}

/// Gaussian elimination with row pivoting, columns kept in order so a
/// rank deficiency names its column: Err(col) means column col is
/// linearly dependent on the earlier ones (tiny pivot).
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> std::result::Result<Vec<f64>, usize> {
    let k = rhs.len();
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot_row][col].abs() <= 1e-12 * scale {
            return Err(col);
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in (col + 1)..k {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for j in col..k {
                m[row][j] -= f * m[col][j];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut sol = vec![0.0f64; k];
    for row in (0..k).rev() {
        let mut v = rhs[row];
        for j in (row + 1)..k {
            v -= m[row][j] * sol[j];
        }
        sol[row] = v / m[row][row];
    }
    Ok(sol)
}

/// Sample partition during the active-set solve: margin comfortably
/// above 1 (no hinge contribution), pinned to the kink (margin == 1,
/// dual weight in [0, cost]), or violated (full cost contribution).
#[derive(Clone, Copy, PartialEq)]
enum MarginState {
    Free,
    Active,
    Violated,
}

/// Attempts to land (w, b) exactly on the nearby kink-stationary point:
/// w = sum over active of alpha_i y_i x_i + sum over violated of
/// cost_i y_i x_i with margin equations y_i(w·x_i - b) = 1 on the active
/// set and the bias condition sum(alpha y) + sum(cost y) = 0. The band
/// sets the initial margin window around 1 treated as active. Classic
/// active-set iteration: negative alpha drops the point, alpha above its
/// cost moves it to violated, mispredicted margins re-enter. None when
/// the system is degenerate or the set does not settle; the caller
/// re-checks the objective either way.
fn kink_polish(
    w: &[f64; FEATURE_COUNT],
    b: f64,
    xs: &[[f64; FEATURE_COUNT]],
    ys: &[f64],
    costs: &[f64],
    band: f64,
) -> Option<([f64; FEATURE_COUNT], f64)> {
    const SLACK: f64 = 1e-9;
    let n = xs.len();
    let mut state: Vec<MarginState> = (0..n)
        .map(|i| {
            let m = ys[i] * (dot(w, &xs[i]) - b);
            if m < 1.0 - band {
                MarginState::Violated
            } else if m <= 1.0 + band {
                MarginState::Active
            } else {
                MarginState::Free
            }
        })
        .collect();

    for _ in 0..60 {
        // Closest-to-kink first, so rank-deficiency drops (which keep
        // the earliest independent columns) retain the likeliest support
        // vectors.
        let mut active: Vec<usize> =
            (0..n).filter(|&i| state[i] == MarginState::Active).collect();
        active.sort_by(|&p, &q| {
            let dp = (ys[p] * (dot(w, &xs[p]) - b) - 1.0).abs();
            let dq = (ys[q] * (dot(w, &xs[q]) - b) - 1.0).abs();
            dp.total_cmp(&dq).then(p.cmp(&q))
        });
        let k = active.len();
        if k == 0 || k > 64 {
            return None;
        }
        // Fixed contribution of the violated set to w and to the bias
        // stationarity condition.
        let mut w_fixed = [0.0f64; FEATURE_COUNT];
        let mut y_fixed = 0.0f64;
        for i in (0..n).filter(|&i| state[i] == MarginState::Violated) {
            for j in 0..FEATURE_COUNT {
                w_fixed[j] += costs[i] * ys[i] * xs[i][j];
            }
            y_fixed += costs[i] * ys[i];
        }
        let mut m = vec![vec![0.0f64; k + 1]; k + 1];
        let mut rhs = vec![0.0f64; k + 1];
        for (r, &i) in active.iter().enumerate() {
            for (c, &j) in active.iter().enumerate() {
                m[r][c] = ys[i] * ys[j] * dot(&xs[i], &xs[j]);
            }
            m[r][k] = -ys[i];
            rhs[r] = 1.0 - ys[i] * dot(&w_fixed, &xs[i]);
        }
        for (c, &j) in active.iter().enumerate() {
            m[k][c] = ys[j];
        }
        rhs[k] = -y_fixed;
        let sol = match solve_dense(m, rhs) {
            Ok(sol) => sol,
            // A dependent alpha column means that point's margin row is
            // redundant given the others; the solution without it pins
            // its margin anyway. A dependent bias column is fatal.
            Err(col) if col < k => {
                state[active[col]] = MarginState::Free;
                continue;
            }
            Err(_) => return None,
        };

        if let Some((pos, _)) = active
            .iter()
            .enumerate()
            .filter(|&(c, _)| sol[c] < -SLACK)
            .min_by(|a, b| sol[a.0].total_cmp(&sol[b.0]))
        {
            state[active[pos]] = MarginState::Free;
            continue;
        }
        if let Some((_, &i)) = active
            .iter()
            .enumerate()
            .find(|&(c, &i)| sol[c] > costs[i] + SLACK)
        {
            state[i] = MarginState::Violated;
            continue;
        }

        let mut cand_w = w_fixed;
        for (c, &i) in active.iter().enumerate() {
            for j in 0..FEATURE_COUNT {
                cand_w[j] += sol[c] * ys[i] * xs[i][j];
            }
        }
        let cand_b = sol[k];

        // Re-admit only the single worst misprediction per round; mass
        // re-adds cycle against the one-at-a-time drops above.
        let mut worst: Option<(f64, usize)> = None;
        for i in 0..n {
            let margin = ys[i] * (dot(&cand_w, &xs[i]) - cand_b);
            let off = match state[i] {
                MarginState::Free => 1.0 - SLACK - margin,
                MarginState::Violated => margin - 1.0 - SLACK,
                MarginState::Active => continue,
            };
            if off > 0.0 && worst.map_or(true, |(best_off, _)| off > best_off) {
                worst = Some((off, i));
            }
        }
        match worst {
            Some((_, i)) => state[i] = MarginState::Active,
            None => return Some((cand_w, cand_b)),
        }
    }
    None
}

/// Raw decision value z = w·x - b. The input must be normalized with the
/// model's stats.
pub fn decision_value(model: &LinearModel, vector: &FeatureVector) -> f64 {
    dot(&model.weights, &vector.values) - model.bias
}

/// Largest |z| for which 1/(1 + e^-z) is still strictly inside (0,1) in
/// f64 (just under 53*ln 2); past it the sigmoid saturates to exactly 0
/// or 1, which would break the open-interval guarantee.
const SIGMOID_CLAMP: f64 = 36.7;

fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

/// Probability that the account is a Sybil: the sigmoid of the oriented
/// decision value.
///
/// Training places benign (+1) points on the positive side of z, and the
/// convention maps sybil to raw label -1, so the Sybil-is-more-likely
/// direction is -z. Multiplying by the stored sybil raw label performs
/// that orientation without a hidden sign flip.
pub fn sybil_probability(model: &LinearModel, vector: &FeatureVector) -> f64 {
    let oriented = model.label_convention.sybil * decision_value(model, vector);
    sigmoid(oriented)
}

/// On-disk model document. Version-gated so format changes are explicit.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    weights: [f64; FEATURE_COUNT],
    bias: f64,
    means: [f64; FEATURE_COUNT],
    stds: [f64; FEATURE_COUNT],
    label_convention: LabelConvention,
}

const MODEL_VERSION: u32 = 1;

pub fn save_model(model: &LinearModel, path: &std::path::Path) -> Result<()> {
    let file = ModelFile {
        version: MODEL_VERSION,
        weights: model.weights,
        bias: model.bias,
        means: model.normalization.means,
        stds: model.normalization.stds,
        label_convention: model.label_convention,
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::ModelFormat(format!("serialize: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &std::path::Path) -> Result<LinearModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
    if file.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported model version {} (expected {MODEL_VERSION})",
            file.version
        )));
    }
    file.label_convention.validate()?;
    if file.weights.iter().any(|x| !x.is_finite()) || !file.bias.is_finite() {
        return Err(Error::ModelFormat("non-finite weights or bias".into()));
    }
    if file.means.iter().any(|x| !x.is_finite()) {
        return Err(Error::ModelFormat("non-finite normalization means".into()));
    }
    if file.stds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::ModelFormat(
            "normalization stds must be finite and positive".into(),
        ));
    }
    Ok(LinearModel {
        weights: file.weights,
        bias: file.bias,
        normalization: NormalizationStats {
            means: file.means,
            stds: file.stds,
        },
        label_convention: file.label_convention,
    })
}
