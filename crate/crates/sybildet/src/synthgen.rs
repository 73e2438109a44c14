//! Synthetic two-region social graphs with controlled attack edges.
//!
//! The generator builds a benign region and a sybil region, each an
//! Erdős–Rényi graph over its own accounts, then connects them with an
//! exact number of cross-region attack edges. Mutual-friend counts are
//! high inside regions and 0 or 1 on attack edges, so attack edges end
//! up with the smallest weights after graph normalization. Account
//! features are drawn per class from overdispersed count distributions
//! centered on [`CLASS_MEANS`].
//!
//! Everything is drawn from one seeded stream in a fixed order, so a
//! config (including its `rng_seed`) maps to exactly one output.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::features::{AccountRecord, Label, FEATURE_COUNT};
use crate::graph::EdgeObservation;

/// Per-feature mean counts for (benign, sybil) accounts, in canonical
/// feature index order (see `features::FEATURE_NAMES`).
///
/// The values are invented but the directions are deliberate: sybil
/// accounts have short histories, few friends, and little engagement
/// coming back at them, while they join many groups, share heavily,
/// and tag many users and pages to push content.
pub const CLASS_MEANS: [(f64, f64); FEATURE_COUNT] = [
    (900.0, 60.0),  // active_days
    (280.0, 95.0),  // friend_count
    (12.0, 48.0),   // group_count
    (120.0, 210.0), // post_count
    (45.0, 8.0),    // wall_post_count
    (30.0, 4.0),    // tagged_in_post_count
    (400.0, 120.0), // reaction_count
    (150.0, 35.0),  // comment_count
    (350.0, 40.0),  // likes_received
    (90.0, 12.0),   // comments_received
    (25.0, 3.0),    // shares_received
    (20.0, 70.0),   // tags_in_own_posts
    (15.0, 85.0),   // users_tagged_in_posts
    (4.0, 30.0),    // pages_tagged_in_posts
    (35.0, 160.0),  // shared_post_count
    (10.0, 45.0),   // users_tagged_in_comments
    (25.0, 3.0),    // tagged_in_comments_count
    (2.0, 18.0),    // pages_tagged_in_comments
];

/// Generator parameters. `Default` is the 400-node reference setup used
/// by the end-to-end experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Accounts in the benign region. Must be >= 1.
    pub n_benign: usize,
    /// Accounts in the sybil region. Must be >= 1.
    pub n_sybil: usize,
    /// Edge probability inside each region, in (0, 1].
    pub intra_edge_prob: f64,
    /// Exact number of benign-sybil edges. At most n_benign * n_sybil.
    pub attack_edges: usize,
    /// Fraction of each region exposed in the labels map, in (0, 1].
    /// At least one account per region is always labeled.
    pub label_fraction: f64,
    /// Mean mutual-friend count on intra-region edges (minimum count 1).
    pub mutual_friend_scale: u64,
    /// Dispersion of feature counts around their class means. 0 draws
    /// plain Poisson counts; larger values spread each class out and
    /// make the classes overlap more.
    pub feature_noise: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_benign: 200,
            n_sybil: 200,
            intra_edge_prob: 0.05,
            attack_edges: 20,
            label_fraction: 0.2,
            mutual_friend_scale: 20,
            feature_noise: 4.0,
            rng_seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_benign == 0 || self.n_sybil == 0 {
            return Err(Error::Config("region sizes must be >= 1".into()));
        }
        if !(self.intra_edge_prob > 0.0 && self.intra_edge_prob <= 1.0) {
            return Err(Error::Config(format!(
                "intra_edge_prob must be in (0, 1], got {}",
                self.intra_edge_prob
            )));
        }
        let max_attack = self
            .n_benign
            .checked_mul(self.n_sybil)
            .ok_or_else(|| Error::Config("region sizes overflow the pair count".into()))?;
        if self.attack_edges > max_attack {
            return Err(Error::Config(format!(
                "attack_edges = {} exceeds the {} possible cross pairs",
                self.attack_edges, max_attack
            )));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "label_fraction must be in (0, 1], got {}",
                self.label_fraction
            )));
        }
        if self.mutual_friend_scale == 0 {
            return Err(Error::Config("mutual_friend_scale must be >= 1".into()));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(Error::Config(format!(
                "feature_noise must be a finite nonnegative real, got {}",
                self.feature_noise
            )));
        }
        Ok(())
    }
}

/// One generated dataset.
///
/// `accounts` carry `Label::Unknown`: the true class of every account
/// lives in `ground_truth`, and `labels` is the exposed subset that a
/// pipeline is allowed to train on. Keeping truth out of the records
/// makes leaking it into a model a deliberate act rather than an
/// accident.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub accounts: Vec<AccountRecord>,
    pub observations: Vec<EdgeObservation>,
    pub labels: BTreeMap<String, Label>,
    pub ground_truth: BTreeMap<String, Label>,
}

/// Zero-padded ids: benign accounts sort before sybil accounts, and
/// within a region lexicographic order equals numeric order.
fn region_ids(prefix: char, n: usize) -> Vec<String> {
    let width = (n - 1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// Count draw with class mean `mean` and dispersion `noise`: a Poisson
/// whose rate is itself Gamma-distributed, so the variance is
/// mean * (1 + mean * noise). noise = 0 degenerates to plain Poisson.
fn draw_count(rng: &mut ChaCha8Rng, mean: f64, noise: f64) -> u64 {
    let lambda = if noise == 0.0 {
        mean
    } else {
        let shape = 1.0 / noise;
        let scale = mean * noise;
        Gamma::new(shape, scale)
            .expect("gamma parameters are positive by config validation")
            .sample(rng)
    };
    // Tiny rates can underflow to 0.0 for shape < 1; Poisson requires > 0.
    let lambda = lambda.max(1e-12);
    Poisson::new(lambda)
        .expect("rate is positive and finite")
        .sample(rng) as u64
}

/// Generates accounts, edges, and label maps for one config.
///
/// Draw order is fixed: benign intra edges (count drawn as each pair is
/// accepted), sybil intra edges, attack pair selection, attack counts in
/// sorted pair order, features in account order, then the two label
/// subsets. Reordering any of these would silently change every seed's
/// output, so don't.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let benign_ids = region_ids('b', config.n_benign);
    let sybil_ids = region_ids('s', config.n_sybil);

    let mut observations = Vec::new();
    for ids in [&benign_ids, &sybil_ids] {
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                if rng.gen_bool(config.intra_edge_prob) {
                    let count = 1 + draw_count(&mut rng, config.mutual_friend_scale as f64, 0.0);
                    observations.push(EdgeObservation {
                        u: ids[i].clone(),
                        v: ids[j].clone(),
                        mutual_friend_count: count,
                    });
                }
            }
        }
    }

    // Floyd's sampling: exactly attack_edges distinct cross pairs,
    // uniform over the n_benign x n_sybil grid.
    let total_pairs = config.n_benign * config.n_sybil;
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    for k in (total_pairs - config.attack_edges)..total_pairs {
        let t = rng.gen_range(0..=k);
        if !chosen.insert(t) {
            chosen.insert(k);
        }
    }
    for pair in &chosen {
        let count = u64::from(rng.gen_bool(0.5));
        observations.push(EdgeObservation {
            u: benign_ids[pair / config.n_sybil].clone(),
            v: sybil_ids[pair % config.n_sybil].clone(),
            mutual_friend_count: count,
        });
    }

    let mut accounts = Vec::with_capacity(config.n_benign + config.n_sybil);
    let mut ground_truth = BTreeMap::new();
    for (ids, class) in [(&benign_ids, Label::Benign), (&sybil_ids, Label::Sybil)] {
        for id in ids.iter() {
            let counts: [u64; FEATURE_COUNT] = std::array::from_fn(|f| {
                let (benign_mean, sybil_mean) = CLASS_MEANS[f];
                let mean = match class {
                    Label::Sybil => sybil_mean,
                    _ => benign_mean,
                };
                draw_count(&mut rng, mean, config.feature_noise)
            });
            accounts.push(AccountRecord::from_counts(id.clone(), counts, Label::Unknown));
            ground_truth.insert(id.clone(), class);
        }
    }

    let mut labels = BTreeMap::new();
    for (ids, class) in [(&benign_ids, Label::Benign), (&sybil_ids, Label::Sybil)] {
        let exposed = ((config.label_fraction * ids.len() as f64).round() as usize)
            .clamp(1, ids.len());
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.shuffle(&mut rng);
        for &i in order.iter().take(exposed) {
            labels.insert(ids[i].clone(), class);
        }
    }

    Ok(SynthOutput {
        accounts,
        observations,
        labels,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, connected_components, WeightMode};
    use crate::propagation::exact_hitting_probabilities;
    use proptest::prelude::*;

    fn is_cross(obs: &EdgeObservation) -> bool {
        obs.u.starts_with('b') != obs.v.starts_with('b')
    }

    #[test]
    fn intra_prob_one_yields_two_cliques() {
        let config = SynthConfig {
            n_benign: 5,
            n_sybil: 5,
            intra_edge_prob: 1.0,
            attack_edges: 0,
            label_fraction: 0.4,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        assert_eq!(out.observations.len(), 20, "two K5 regions have 10 edges each");
        assert!(out.observations.iter().all(|o| !is_cross(o)));

        let g = build_graph(&out.observations, &out.labels, WeightMode::Floored).unwrap();
        let components = connected_components(&g);
        assert_eq!(components.len(), 2);
        assert!(components.iter().all(|c| c.len() == 5));

        assert_eq!(out.labels.len(), 4, "40% of each 5-account region");
        assert_eq!(out.labels.values().filter(|&&l| l == Label::Benign).count(), 2);
        assert_eq!(out.labels.values().filter(|&&l| l == Label::Sybil).count(), 2);
    }

    #[test]
    fn no_attack_edges_means_no_mixed_component() {
        for seed in 0..5 {
            let config = SynthConfig {
                n_benign: 30,
                n_sybil: 25,
                intra_edge_prob: 0.3,
                attack_edges: 0,
                rng_seed: seed,
                ..SynthConfig::default()
            };
            let out = generate(&config).unwrap();
            let g = build_graph(&out.observations, &out.labels, WeightMode::Floored).unwrap();
            for component in connected_components(&g) {
                let benign = component.iter().filter(|&&u| g.user_id(u).starts_with('b')).count();
                assert!(
                    benign == 0 || benign == component.len(),
                    "component mixes regions without attack edges (seed {seed})"
                );
            }
        }
    }

    #[test]
    fn attack_edge_count_is_exact() {
        let config = SynthConfig {
            n_benign: 40,
            n_sybil: 30,
            intra_edge_prob: 0.1,
            attack_edges: 57,
            rng_seed: 7,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        let cross: Vec<_> = out.observations.iter().filter(|o| is_cross(o)).collect();
        assert_eq!(cross.len(), 57);

        let mut pairs = BTreeSet::new();
        for obs in &out.observations {
            assert_ne!(obs.u, obs.v, "self loop emitted");
            let key = if obs.u < obs.v {
                (obs.u.clone(), obs.v.clone())
            } else {
                (obs.v.clone(), obs.u.clone())
            };
            assert!(pairs.insert(key), "duplicate pair {} - {}", obs.u, obs.v);
        }
    }

    #[test]
    fn counts_are_high_intra_and_binary_on_attack_edges() {
        let config = SynthConfig {
            attack_edges: 60,
            rng_seed: 3,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        let mut saw_zero = false;
        let mut saw_one = false;
        for obs in &out.observations {
            if is_cross(obs) {
                assert!(obs.mutual_friend_count <= 1);
                saw_zero |= obs.mutual_friend_count == 0;
                saw_one |= obs.mutual_friend_count == 1;
            } else {
                assert!(obs.mutual_friend_count >= 1);
            }
        }
        assert!(saw_zero && saw_one, "60 Bernoulli draws should hit both values");
        let intra: Vec<f64> = out
            .observations
            .iter()
            .filter(|o| !is_cross(o))
            .map(|o| o.mutual_friend_count as f64)
            .collect();
        let mean = intra.iter().sum::<f64>() / intra.len() as f64;
        assert!(
            (mean - 21.0).abs() < 2.0,
            "intra counts average near scale + 1, got {mean}"
        );
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let config = SynthConfig::default();
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a, b);
        // Serialized form is identical too, which is what the CLI emits.
        assert_eq!(
            serde_json::to_string(&a.accounts).unwrap(),
            serde_json::to_string(&b.accounts).unwrap()
        );

        let other = generate(&SynthConfig {
            rng_seed: 43,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_ne!(a, other, "different seeds should differ somewhere");
    }

    #[test]
    fn full_labels_without_attack_edges_give_exact_class_scores() {
        let config = SynthConfig {
            n_benign: 12,
            n_sybil: 12,
            intra_edge_prob: 0.5,
            attack_edges: 0,
            label_fraction: 1.0,
            rng_seed: 9,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        assert_eq!(out.labels.len(), 24, "label_fraction 1 labels everyone");
        let g = build_graph(&out.observations, &out.labels, WeightMode::Floored).unwrap();
        let exact = exact_hitting_probabilities(&g).unwrap();
        for (u, &p) in exact.user_scores(&g).iter().enumerate() {
            let user = g.user_id(u);
            if user.starts_with('b') {
                assert_eq!(p, 0.0, "benign '{user}' never reaches the sybil label node");
            } else {
                assert!((p - 1.0).abs() <= 1e-12, "sybil '{user}' scored {p}");
            }
        }
    }

    #[test]
    fn labels_agree_with_ground_truth_and_sizes() {
        let config = SynthConfig {
            n_benign: 50,
            n_sybil: 20,
            label_fraction: 0.3,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        assert_eq!(out.ground_truth.len(), 70);
        assert_eq!(out.accounts.len(), 70);
        assert_eq!(out.labels.values().filter(|&&l| l == Label::Benign).count(), 15);
        assert_eq!(out.labels.values().filter(|&&l| l == Label::Sybil).count(), 6);
        for (id, label) in &out.labels {
            assert_eq!(out.ground_truth[id], *label);
        }
        for account in &out.accounts {
            assert_eq!(account.label, Label::Unknown, "records must not leak truth");
        }
        assert_eq!(out.accounts[0].account_id, "b00");
        assert_eq!(out.accounts[49].account_id, "b49");
        assert_eq!(out.accounts[50].account_id, "s00");
    }

    #[test]
    fn tiny_label_fraction_still_labels_one_per_region() {
        let config = SynthConfig {
            n_benign: 8,
            n_sybil: 8,
            label_fraction: 0.01,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        assert_eq!(out.labels.values().filter(|&&l| l == Label::Benign).count(), 1);
        assert_eq!(out.labels.values().filter(|&&l| l == Label::Sybil).count(), 1);
    }

    #[test]
    fn noiseless_features_sit_near_class_means() {
        let config = SynthConfig {
            feature_noise: 0.0,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        let mean_of = |prefix: char, idx: usize| {
            let vals: Vec<f64> = out
                .accounts
                .iter()
                .filter(|a| a.account_id.starts_with(prefix))
                .map(|a| crate::features::extract_features(a).unwrap().values[idx])
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        // friend_count: benign 280 vs sybil 95; group_count: 12 vs 48.
        assert!(mean_of('b', 1) > 2.0 * mean_of('s', 1));
        assert!(mean_of('s', 2) > 2.0 * mean_of('b', 2));
        // Poisson means over 200 accounts are tight: within a few std errors.
        assert!((mean_of('b', 0) - 900.0).abs() < 10.0);
        assert!((mean_of('s', 0) - 60.0).abs() < 4.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = SynthConfig::default();
        let cases = [
            SynthConfig { n_benign: 0, ..base.clone() },
            SynthConfig { n_sybil: 0, ..base.clone() },
            SynthConfig { intra_edge_prob: 0.0, ..base.clone() },
            SynthConfig { intra_edge_prob: 1.5, ..base.clone() },
            SynthConfig { intra_edge_prob: f64::NAN, ..base.clone() },
            SynthConfig { n_benign: 3, n_sybil: 3, attack_edges: 10, ..base.clone() },
            SynthConfig { label_fraction: 0.0, ..base.clone() },
            SynthConfig { label_fraction: 1.1, ..base.clone() },
            SynthConfig { mutual_friend_scale: 0, ..base.clone() },
            SynthConfig { feature_noise: -0.5, ..base.clone() },
            SynthConfig { feature_noise: f64::INFINITY, ..base.clone() },
        ];
        for (i, config) in cases.iter().enumerate() {
            assert!(
                matches!(generate(config), Err(Error::Config(_))),
                "case {i} should fail config validation"
            );
        }
    }

    #[test]
    fn saturated_attack_edges_connect_every_cross_pair() {
        let config = SynthConfig {
            n_benign: 4,
            n_sybil: 3,
            intra_edge_prob: 0.5,
            attack_edges: 12,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        assert_eq!(out.observations.iter().filter(|o| is_cross(o)).count(), 12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Any valid config produces observations that build_graph accepts
        /// (which validates no self-loops, symmetry, and weight bounds) with
        /// the exact requested number of attack edges.
        #[test]
        fn output_always_satisfies_graph_preconditions(
            n_benign in 1usize..12,
            n_sybil in 1usize..12,
            intra_edge_prob in 0.05f64..=1.0,
            attack_frac in 0.0f64..=1.0,
            label_fraction in 0.05f64..=1.0,
            rng_seed in 0u64..1000,
        ) {
            let attack_edges = (attack_frac * (n_benign * n_sybil) as f64).floor() as usize;
            let config = SynthConfig {
                n_benign,
                n_sybil,
                intra_edge_prob,
                attack_edges,
                label_fraction,
                mutual_friend_scale: 5,
                feature_noise: 1.0,
                rng_seed,
            };
            let out = generate(&config).unwrap();
            prop_assert_eq!(
                out.observations.iter().filter(|o| is_cross(o)).count(),
                attack_edges
            );
            let all_ids: Vec<String> = out.ground_truth.keys().cloned().collect();
            let g = crate::graph::build_graph_with_nodes(
                &out.observations,
                &out.labels,
                &all_ids,
                WeightMode::Floored,
            ).unwrap();
            prop_assert_eq!(g.num_users(), n_benign + n_sybil);
        }
    }
}
