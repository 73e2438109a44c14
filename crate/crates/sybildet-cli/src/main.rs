//! Command-line front end for the detection pipeline.
//!
//! Exit codes: 0 success, 2 input or config error, 3 data degeneracy
//! (e.g. single-class training labels), 4 internal invariant violation.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use sybildet::error::Error;

use crate::config::RunConfig;

/// Declares one Option<String> flag per dotted config key and the
/// apply() that forwards set values into the RunConfig.
macro_rules! overrides {
    ($($field:ident => $key:literal),+ $(,)?) => {
        #[derive(Debug, clap::Args)]
        struct Overrides {
            $(
                #[arg(long = $key, global = true, value_name = "VALUE",
                      help_heading = "Config overrides (same keys as the config file)")]
                $field: Option<String>,
            )+
        }

        impl Overrides {
            fn apply(&self, cfg: &mut RunConfig) -> sybildet::error::Result<()> {
                $(
                    if let Some(value) = &self.$field {
                        cfg.apply($key, value)?;
                    }
                )+
                Ok(())
            }
        }
    };
}

overrides! {
    paths_accounts => "paths.accounts",
    paths_features => "paths.features",
    paths_edges => "paths.edges",
    paths_labels => "paths.labels",
    paths_ground_truth => "paths.ground_truth",
    paths_model => "paths.model",
    paths_priors => "paths.priors",
    paths_scores => "paths.scores",
    paths_report => "paths.report",
    train_c => "train.c",
    train_max_epochs => "train.max_epochs",
    train_tolerance => "train.tolerance",
    train_rng_seed => "train.rng_seed",
    train_sybil_cost => "train.sybil_cost",
    train_benign_cost => "train.benign_cost",
    walk_epsilon => "walk.epsilon",
    walk_max_iterations => "walk.max_iterations",
    walk_seed_mode => "walk.seed_mode",
    graph_weight_mode => "graph.weight_mode",
    synth_n_benign => "synth.n_benign",
    synth_n_sybil => "synth.n_sybil",
    synth_intra_edge_prob => "synth.intra_edge_prob",
    synth_attack_edges => "synth.attack_edges",
    synth_label_fraction => "synth.label_fraction",
    synth_mutual_friend_scale => "synth.mutual_friend_scale",
    synth_feature_noise => "synth.feature_noise",
    synth_rng_seed => "synth.rng_seed",
    eval_k => "eval.k",
    eval_kfold_seed => "eval.kfold_seed",
    eval_threshold => "eval.threshold",
}

#[derive(Parser)]
#[command(
    name = "sybildet",
    version,
    about = "Fake-account detection: SVM priors propagated by a random walk over the social graph",
    after_help = "Config file lines are `key = value` with the same dotted keys as the override \
                  flags. Precedence: defaults, then config file, then flags; --seed fills \
                  train.rng_seed, synth.rng_seed, and eval.kfold_seed unless set explicitly."
)]
struct Cli {
    /// Config file with `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed for any seed key not set explicitly.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Progress notes on stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract feature vectors from account records.
    Extract {
        /// Account records JSONL (default: paths.accounts).
        accounts: Option<PathBuf>,
        /// Output features CSV (default: paths.features).
        features: Option<PathBuf>,
    },
    /// Train the SVM on labeled feature rows.
    Train {
        /// Features CSV (default: paths.features).
        features: Option<PathBuf>,
        /// Labels TSV (default: paths.labels).
        labels: Option<PathBuf>,
        /// Output model JSON (default: paths.model).
        model: Option<PathBuf>,
    },
    /// Score accounts with a trained model.
    Score {
        /// Model JSON (default: paths.model).
        model: Option<PathBuf>,
        /// Features CSV (default: paths.features).
        features: Option<PathBuf>,
        /// Output priors CSV (default: paths.priors).
        priors: Option<PathBuf>,
    },
    /// Propagate scores over the social graph.
    Walk {
        /// Edges TSV (default: paths.edges).
        edges: Option<PathBuf>,
        /// Labels TSV (default: paths.labels).
        labels: Option<PathBuf>,
        /// Priors CSV (default: paths.priors).
        priors: Option<PathBuf>,
        /// Output scores CSV (default: paths.scores).
        scores: Option<PathBuf>,
    },
    /// Generate a synthetic two-region dataset.
    Synth,
    /// Run extract, train, score, and walk end to end, plus a run report.
    Pipeline,
    /// Cross-validated comparison: svm_only vs hybrid vs uniform_prior_hybrid.
    Eval,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DegenerateLabels(_)
        | Error::IsolatedNode(_)
        | Error::UnreachableNode(_)
        | Error::NonabsorbingWalk(_)
        | Error::NoData(_) => 3,
        Error::Invariant(_) => 4,
        _ => 2,
    }
}

fn run(cli: &Cli) -> sybildet::error::Result<()> {
    let mut cfg = RunConfig::new();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    cli.overrides.apply(&mut cfg)?;
    if let Some(seed) = cli.seed {
        cfg.apply_master_seed(seed);
    }

    match &cli.command {
        Command::Extract { accounts, features } => {
            set_path(&mut cfg.paths.accounts, accounts);
            set_path(&mut cfg.paths.features, features);
            commands::cmd_extract(&cfg, cli.verbose)
        }
        Command::Train { features, labels, model } => {
            set_path(&mut cfg.paths.features, features);
            set_path(&mut cfg.paths.labels, labels);
            set_path(&mut cfg.paths.model, model);
            commands::cmd_train(&cfg, cli.verbose)
        }
        Command::Score { model, features, priors } => {
            set_path(&mut cfg.paths.model, model);
            set_path(&mut cfg.paths.features, features);
            set_path(&mut cfg.paths.priors, priors);
            commands::cmd_score(&cfg, cli.verbose)
        }
        Command::Walk { edges, labels, priors, scores } => {
            set_path(&mut cfg.paths.edges, edges);
            set_path(&mut cfg.paths.labels, labels);
            set_path(&mut cfg.paths.priors, priors);
            set_path(&mut cfg.paths.scores, scores);
            commands::cmd_walk(&cfg, cli.verbose)
        }
        Command::Synth => commands::cmd_synth(&cfg, cli.verbose),
        Command::Pipeline => commands::cmd_pipeline(&cfg, cli.verbose),
        Command::Eval => commands::cmd_eval(&cfg, cli.verbose),
    }
}

fn set_path(slot: &mut PathBuf, value: &Option<PathBuf>) {
    if let Some(path) = value {
        *slot = path.clone();
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
