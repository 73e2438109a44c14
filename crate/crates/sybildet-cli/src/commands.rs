//! Command implementations. Each reads and writes only through the
//! paths in the run config, so `pipeline` is literally the stage
//! commands run back to back and produces the same bytes they would.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use sybildet::error::{Error, Result};
use sybildet::eval::{run_experiment, Dataset, PipelineVariant};
use sybildet::features::{extract_all, fit_normalization, normalize, FeatureVector, Label};
use sybildet::graph::{build_graph_with_nodes, unreachable_users};
use sybildet::io::{
    read_accounts_jsonl, read_edges_tsv, read_features_csv, read_labels_tsv, read_priors_csv,
    read_scores_csv, write_accounts_jsonl, write_edges_tsv, write_features_csv, write_labels_tsv,
    write_priors_csv, write_scores_csv, ScoreFlag, ScoreRow,
};
use sybildet::propagation::{initialize_scores, sybilwalk};
use sybildet::svm::{load_model, save_model, train};
use sybildet::synthgen::generate;

use crate::config::RunConfig;

fn note(verbose: bool, msg: impl AsRef<str>) {
    if verbose {
        eprintln!("{}", msg.as_ref());
    }
}

fn write_text(path: &std::path::Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn cmd_extract(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let records = read_accounts_jsonl(&cfg.paths.accounts)?;
    let vectors = extract_all(&records)?;
    write_features_csv(&cfg.paths.features, &vectors)?;
    note(verbose, format!("extracted {} feature vectors", vectors.len()));
    Ok(())
}

/// Indexes feature rows by account id, rejecting duplicates.
fn index_vectors(vectors: &[FeatureVector]) -> Result<BTreeMap<&str, &FeatureVector>> {
    let mut index = BTreeMap::new();
    for v in vectors {
        if index.insert(v.account_id.as_str(), v).is_some() {
            return Err(Error::MalformedRecord(format!(
                "duplicate account_id '{}' in features",
                v.account_id
            )));
        }
    }
    Ok(index)
}

pub fn cmd_train(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let vectors = read_features_csv(&cfg.paths.features)?;
    let labels = read_labels_tsv(&cfg.paths.labels)?;
    let index = index_vectors(&vectors)?;

    let mut train_raw = Vec::new();
    let mut train_labels = Vec::new();
    for (id, &label) in &labels {
        if label == Label::Unknown {
            continue;
        }
        let Some(&vector) = index.get(id.as_str()) else {
            return Err(Error::MalformedData(format!(
                "labeled id '{id}' has no feature row"
            )));
        };
        train_raw.push(vector.clone());
        train_labels.push(label);
    }
    if train_raw.is_empty() {
        return Err(Error::DegenerateLabels("no labeled feature rows".into()));
    }

    let stats = fit_normalization(&train_raw)?;
    let normed: Vec<_> = train_raw.iter().map(|v| normalize(v, &stats)).collect();
    let model = train(&normed, &train_labels, &cfg.train)?.with_normalization(stats);
    save_model(&model, &cfg.paths.model)?;
    let sybils = train_labels.iter().filter(|&&l| l == Label::Sybil).count();
    note(
        verbose,
        format!(
            "trained on {} samples ({} benign, {} sybil)",
            train_labels.len(),
            train_labels.len() - sybils,
            sybils
        ),
    );
    Ok(())
}

pub fn cmd_score(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let model = load_model(&cfg.paths.model)?;
    let vectors = read_features_csv(&cfg.paths.features)?;
    index_vectors(&vectors)?;
    let priors: BTreeMap<String, f64> = vectors
        .iter()
        .map(|v| (v.account_id.clone(), model.score_raw(v)))
        .collect();
    write_priors_csv(&cfg.paths.priors, &priors)?;
    note(verbose, format!("scored {} accounts", priors.len()));
    Ok(())
}

pub fn cmd_walk(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let observations = read_edges_tsv(&cfg.paths.edges)?;
    let labels = read_labels_tsv(&cfg.paths.labels)?;
    let priors = read_priors_csv(&cfg.paths.priors)?;

    let extra: Vec<String> = priors.keys().cloned().collect();
    let graph = build_graph_with_nodes(&observations, &labels, &extra, cfg.weight_mode)?;
    let prior_lookup: HashMap<String, f64> = priors.into_iter().collect();
    let init = initialize_scores(&graph, &prior_lookup, cfg.walk.seed_mode)?;
    let walked = sybilwalk(&graph, &init, &cfg.walk)?;

    let stranded: BTreeSet<usize> = unreachable_users(&graph).into_iter().collect();
    let rows: Vec<ScoreRow> = (0..graph.num_users())
        .map(|u| ScoreRow {
            account_id: graph.user_id(u).to_string(),
            score: walked.scores[u],
            iterations: walked.iteration_count,
            flag: if stranded.contains(&u) {
                ScoreFlag::Unreachable
            } else {
                ScoreFlag::Ok
            },
        })
        .collect();
    write_scores_csv(&cfg.paths.scores, &rows)?;
    note(
        verbose,
        format!(
            "walk stopped after {} iterations (residual {:.3e}); {} unreachable of {} users",
            walked.iteration_count,
            walked.final_residual,
            stranded.len(),
            graph.num_users()
        ),
    );
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let out = generate(&cfg.synth)?;
    write_accounts_jsonl(&cfg.paths.accounts, &out.accounts)?;
    write_edges_tsv(&cfg.paths.edges, &out.observations)?;
    write_labels_tsv(&cfg.paths.labels, &out.labels)?;
    write_labels_tsv(&cfg.paths.ground_truth, &out.ground_truth)?;
    note(
        verbose,
        format!(
            "generated {} accounts, {} edges, {} exposed labels",
            out.accounts.len(),
            out.observations.len(),
            out.labels.len()
        ),
    );
    Ok(())
}

pub fn cmd_pipeline(cfg: &RunConfig, verbose: bool) -> Result<()> {
    cmd_extract(cfg, verbose)?;
    cmd_train(cfg, verbose)?;
    cmd_score(cfg, verbose)?;
    cmd_walk(cfg, verbose)?;

    let labels = read_labels_tsv(&cfg.paths.labels)?;
    let rows = read_scores_csv(&cfg.paths.scores)?;
    let flagged = rows.iter().filter(|r| r.score >= cfg.threshold).count();
    let unreachable = rows
        .iter()
        .filter(|r| r.flag == ScoreFlag::Unreachable)
        .count();
    let report = serde_json::json!({
        "accounts": rows.len(),
        "labels": {
            "benign": labels.values().filter(|&&l| l == Label::Benign).count(),
            "sybil": labels.values().filter(|&&l| l == Label::Sybil).count(),
        },
        "walk": {
            "iterations": rows.first().map(|r| r.iterations).unwrap_or(0),
            "unreachable": unreachable,
        },
        "threshold": cfg.threshold,
        "flagged_fake": flagged,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_text(&cfg.paths.report, &text)?;
    note(
        verbose,
        format!("flagged {flagged} of {} accounts as fake", rows.len()),
    );
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, verbose: bool) -> Result<()> {
    let dataset = Dataset {
        accounts: read_accounts_jsonl(&cfg.paths.accounts)?,
        observations: read_edges_tsv(&cfg.paths.edges)?,
        labels: read_labels_tsv(&cfg.paths.labels)?,
        ground_truth: read_labels_tsv(&cfg.paths.ground_truth)?,
    };
    let experiment = cfg.experiment_config();

    let mut combined = serde_json::Map::new();
    for (name, variant) in [
        ("svm_only", PipelineVariant::SvmOnly),
        ("hybrid", PipelineVariant::Hybrid),
        ("uniform_prior_hybrid", PipelineVariant::UniformPriorHybrid),
    ] {
        note(verbose, format!("running {name}"));
        let report = run_experiment(&dataset, variant, &experiment)?;
        println!("== {name} ==");
        println!("{}", report.render_table());
        combined.insert(
            name.to_string(),
            serde_json::to_value(&report).expect("report serializes"),
        );
    }

    let fake_f1 = |name: &str| {
        combined[name]
            .get("fake")
            .and_then(|f| f.get("f1"))
            .and_then(|v| v.as_f64())
            .unwrap_or(0.0)
    };
    println!(
        "fake F1: hybrid {:.4} vs svm_only {:.4}",
        fake_f1("hybrid"),
        fake_f1("svm_only")
    );

    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(combined))
        .expect("report serializes");
    text.push('\n');
    write_text(&cfg.paths.report, &text)
}
