//! Run configuration assembled from defaults, a config file, and
//! dotted-key overrides.
//!
//! Every knob has a dotted name (`train.c`, `walk.epsilon`, ...). A
//! config file sets them with `key = value` lines; command-line flags
//! of the same dotted name override the file; `--seed` then fills the
//! seed keys that nothing set explicitly. One unknown or unparsable key
//! aborts the run, naming the key.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use sybildet::error::{Error, Result};
use sybildet::eval::ExperimentConfig;
use sybildet::graph::WeightMode;
use sybildet::propagation::{SeedMode, WalkConfig};
use sybildet::svm::TrainConfig;
use sybildet::synthgen::SynthConfig;

/// File locations for every pipeline artifact.
#[derive(Debug, Clone)]
pub struct Paths {
    pub accounts: PathBuf,
    pub features: PathBuf,
    pub edges: PathBuf,
    pub labels: PathBuf,
    pub ground_truth: PathBuf,
    pub model: PathBuf,
    pub priors: PathBuf,
    pub scores: PathBuf,
    pub report: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            accounts: "accounts.jsonl".into(),
            features: "features.csv".into(),
            edges: "edges.tsv".into(),
            labels: "labels.tsv".into(),
            ground_truth: "ground_truth.tsv".into(),
            model: "model.json".into(),
            priors: "priors.csv".into(),
            scores: "scores.csv".into(),
            report: "report.json".into(),
        }
    }
}

/// Complete configuration for one command invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub paths: Paths,
    pub train: TrainConfig,
    pub walk: WalkConfig,
    pub synth: SynthConfig,
    pub weight_mode: WeightMode,
    pub k: usize,
    pub kfold_seed: u64,
    pub threshold: f64,
    /// Keys set by file or flag; `--seed` skips these.
    explicit: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::new()
    }
}

impl RunConfig {
    pub fn new() -> Self {
        RunConfig {
            paths: Paths::default(),
            train: TrainConfig::default(),
            walk: WalkConfig::default(),
            synth: SynthConfig::default(),
            weight_mode: WeightMode::Floored,
            k: 5,
            kfold_seed: 42,
            threshold: 0.5,
            explicit: BTreeSet::new(),
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            k: self.k,
            kfold_seed: self.kfold_seed,
            train: self.train.clone(),
            walk: self.walk.clone(),
            threshold: self.threshold,
            weight_mode: self.weight_mode,
        }
    }

    /// Applies `key = value` lines from a config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let content = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        for (i, line) in content.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    msg: format!("expected 'key = value', got '{trimmed}'"),
                });
            };
            self.apply(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Sets one dotted key. Later calls win, so flag overrides must be
    /// applied after the config file.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "paths.accounts" => self.paths.accounts = value.into(),
            "paths.features" => self.paths.features = value.into(),
            "paths.edges" => self.paths.edges = value.into(),
            "paths.labels" => self.paths.labels = value.into(),
            "paths.ground_truth" => self.paths.ground_truth = value.into(),
            "paths.model" => self.paths.model = value.into(),
            "paths.priors" => self.paths.priors = value.into(),
            "paths.scores" => self.paths.scores = value.into(),
            "paths.report" => self.paths.report = value.into(),
            "train.c" => self.train.c = parse_f64(key, value)?,
            "train.max_epochs" => self.train.max_epochs = parse_usize(key, value)?,
            "train.tolerance" => self.train.tolerance = parse_f64(key, value)?,
            "train.rng_seed" => self.train.rng_seed = parse_u64(key, value)?,
            "train.sybil_cost" => self.train.sybil_cost = parse_f64(key, value)?,
            "train.benign_cost" => self.train.benign_cost = parse_f64(key, value)?,
            "walk.epsilon" => self.walk.epsilon = parse_f64(key, value)?,
            "walk.max_iterations" => self.walk.max_iterations = parse_usize(key, value)?,
            "walk.seed_mode" => {
                self.walk.seed_mode = match value {
                    "svm" => SeedMode::Svm,
                    "uniform" => SeedMode::Uniform,
                    other => {
                        return Err(Error::Config(format!(
                            "config key '{key}': expected svm or uniform, got '{other}'"
                        )))
                    }
                }
            }
            "graph.weight_mode" => {
                self.weight_mode = match value {
                    "floored" => WeightMode::Floored,
                    "strict" => WeightMode::Strict,
                    other => {
                        return Err(Error::Config(format!(
                            "config key '{key}': expected floored or strict, got '{other}'"
                        )))
                    }
                }
            }
            "synth.n_benign" => self.synth.n_benign = parse_usize(key, value)?,
            "synth.n_sybil" => self.synth.n_sybil = parse_usize(key, value)?,
            "synth.intra_edge_prob" => self.synth.intra_edge_prob = parse_f64(key, value)?,
            "synth.attack_edges" => self.synth.attack_edges = parse_usize(key, value)?,
            "synth.label_fraction" => self.synth.label_fraction = parse_f64(key, value)?,
            "synth.mutual_friend_scale" => {
                self.synth.mutual_friend_scale = parse_u64(key, value)?
            }
            "synth.feature_noise" => self.synth.feature_noise = parse_f64(key, value)?,
            "synth.rng_seed" => self.synth.rng_seed = parse_u64(key, value)?,
            "eval.k" => self.k = parse_usize(key, value)?,
            "eval.kfold_seed" => self.kfold_seed = parse_u64(key, value)?,
            "eval.threshold" => self.threshold = parse_f64(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// Fills the three seed keys from one master seed, keeping any that
    /// were set explicitly.
    pub fn apply_master_seed(&mut self, seed: u64) {
        if !self.explicit.contains("train.rng_seed") {
            self.train.rng_seed = seed;
        }
        if !self.explicit.contains("synth.rng_seed") {
            self.synth.rng_seed = seed;
        }
        if !self.explicit.contains("eval.kfold_seed") {
            self.kfold_seed = seed;
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("config key '{key}': cannot parse '{value}' as a real")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value.parse::<u64>().map_err(|_| {
        Error::Config(format!(
            "config key '{key}': cannot parse '{value}' as a nonnegative integer"
        ))
    })
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| {
        Error::Config(format!(
            "config key '{key}': cannot parse '{value}' as a nonnegative integer"
        ))
    })
}

/// The dotted keys in the order they appear in `apply`.
#[cfg(test)]
const CONFIG_KEYS: &[&str] = &[
    "paths.accounts",
    "paths.features",
    "paths.edges",
    "paths.labels",
    "paths.ground_truth",
    "paths.model",
    "paths.priors",
    "paths.scores",
    "paths.report",
    "train.c",
    "train.max_epochs",
    "train.tolerance",
    "train.rng_seed",
    "train.sybil_cost",
    "train.benign_cost",
    "walk.epsilon",
    "walk.max_iterations",
    "walk.seed_mode",
    "graph.weight_mode",
    "synth.n_benign",
    "synth.n_sybil",
    "synth.intra_edge_prob",
    "synth.attack_edges",
    "synth.label_fraction",
    "synth.mutual_friend_scale",
    "synth.feature_noise",
    "synth.rng_seed",
    "eval.k",
    "eval.kfold_seed",
    "eval.threshold",
];

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_match_component_defaults() {
        let cfg = RunConfig::new();
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.walk, WalkConfig::default());
        assert_eq!(cfg.synth, SynthConfig::default());
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.threshold, 0.5);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut cfg = RunConfig::new();
        let err = cfg.apply("train.gamma", "3").unwrap_err();
        assert!(err.to_string().contains("train.gamma"), "{err}");
    }

    #[test]
    fn bad_value_names_key_and_value() {
        let mut cfg = RunConfig::new();
        let err = cfg.apply("walk.epsilon", "tiny").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("walk.epsilon") && msg.contains("tiny"), "{msg}");
    }

    #[test]
    fn file_lines_apply_in_order_with_line_numbers() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "# comment").unwrap();
        writeln!(f).unwrap();
        writeln!(f, "train.c = 10").unwrap();
        writeln!(f, "train.c = 20").unwrap();
        writeln!(f, "walk.seed_mode = uniform").unwrap();
        drop(f);

        let mut cfg = RunConfig::new();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.train.c, 20.0, "later lines win");
        assert_eq!(cfg.walk.seed_mode, SeedMode::Uniform);

        fs::write(&path, "walk.oops = 1\n").unwrap();
        let mut cfg = RunConfig::new();
        match cfg.apply_file(&path).unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 1);
                assert!(msg.contains("walk.oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn master_seed_respects_explicit_keys() {
        let mut cfg = RunConfig::new();
        cfg.apply("synth.rng_seed", "7").unwrap();
        cfg.apply_master_seed(999);
        assert_eq!(cfg.synth.rng_seed, 7, "explicit key kept");
        assert_eq!(cfg.train.rng_seed, 999);
        assert_eq!(cfg.kfold_seed, 999);
    }

    #[test]
    fn every_listed_key_is_settable() {
        let mut cfg = RunConfig::new();
        for key in CONFIG_KEYS {
            let value = match *key {
                k if k.starts_with("paths.") => "some/path",
                "walk.seed_mode" => "uniform",
                "graph.weight_mode" => "strict",
                "synth.intra_edge_prob" | "synth.label_fraction" | "eval.threshold" => "0.5",
                _ => "1",
            };
            cfg.apply(key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
