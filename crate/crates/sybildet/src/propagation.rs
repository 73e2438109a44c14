//! Random-walk score propagation: each user's score converges to the
//! probability that a weighted walk from that node reaches the Sybil
//! label node before the benign one.
//!
//! The engine is a synchronous Jacobi iteration of the neighbor-average
//! recurrence with the label nodes held at 0 and 1. Two independent
//! reference implementations live here as well: a dense linear solve of
//! the absorbing-chain hitting system and a Monte Carlo walker. The
//! iterative engine must agree with both; the tests enforce it.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{unreachable_users, LabeledSocialGraph};

/// Scores indexed like graph nodes (users first, then l_b, then l_s).
/// Boundary entries are exactly 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub iteration_count: usize,
    /// Squared residual of the last completed iteration (0 when no
    /// iteration ran).
    pub final_residual: f64,
}

impl ScoreVector {
    pub fn user_scores<'a>(&'a self, graph: &LabeledSocialGraph) -> &'a [f64] {
        &self.scores[..graph.num_users()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedMode {
    /// Start from per-account classifier probabilities.
    Svm,
    /// Start every user at 0.5 (ablation baseline).
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Stop when the squared residual sum over user nodes drops below
    /// this (absolute, not per-node).
    pub epsilon: f64,
    pub max_iterations: usize,
    pub seed_mode: SeedMode,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            epsilon: 1e-8,
            max_iterations: 1000,
            seed_mode: SeedMode::Svm,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "walk.epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("walk.max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Builds the starting score vector. In svm mode every user node takes
/// its prior; uniform mode ignores priors and starts everyone at 0.5.
pub fn initialize_scores(
    graph: &LabeledSocialGraph,
    priors: &HashMap<String, f64>,
    mode: SeedMode,
) -> Result<ScoreVector> {
    let n = graph.num_users();
    let mut scores = vec![0.5; n + 2];
    if mode == SeedMode::Svm {
        for u in 0..n {
            let id = graph.user_id(u);
            let p = *priors
                .get(id)
                .ok_or_else(|| Error::MissingPrior(id.to_string()))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::MalformedPrior(format!(
                    "prior {p} for '{id}' outside [0,1]"
                )));
            }
            scores[u] = p;
        }
    }
    scores[graph.benign_label_node()] = 0.0;
    scores[graph.sybil_label_node()] = 1.0;
    Ok(ScoreVector {
        scores,
        iteration_count: 0,
        final_residual: 0.0,
    })
}

/// Synchronous iteration of p_u <- sum over neighbors v of
/// P(u -> v) * p_v, label nodes pinned at 0 and 1, until the squared
/// residual drops below epsilon or the iteration budget runs out.
///
/// Users with no path to a label node (isolated ones included) are not
/// iterated: the recurrence either diverges from any fixed point or is
/// undefined for them, so they keep their initial score. Callers flag
/// them via [`unreachable_users`].
pub fn sybilwalk(
    graph: &LabeledSocialGraph,
    init: &ScoreVector,
    config: &WalkConfig,
) -> Result<ScoreVector> {
    config.validate()?;
    let n = graph.num_users();
    if init.scores.len() != n + 2 {
        return Err(Error::Invariant(format!(
            "score vector length {} does not match graph ({} nodes)",
            init.scores.len(),
            n + 2
        )));
    }
    if init.scores[graph.benign_label_node()] != 0.0
        || init.scores[graph.sybil_label_node()] != 1.0
    {
        return Err(Error::Invariant("boundary scores not fixed at 0 and 1".into()));
    }
    for u in 0..n {
        if !(0.0..=1.0).contains(&init.scores[u]) {
            return Err(Error::MalformedPrior(format!(
                "initial score {} for '{}' outside [0,1]",
                init.scores[u],
                graph.user_id(u)
            )));
        }
    }

    let mut excluded = vec![false; n];
    for u in unreachable_users(graph) {
        excluded[u] = true;
    }
    let active: Vec<usize> = (0..n).filter(|&u| !excluded[u]).collect();

    let mut cur = init.scores.clone();
    if active.is_empty() {
        return Ok(ScoreVector {
            scores: cur,
            iteration_count: 0,
            final_residual: 0.0,
        });
    }
    let mut next = cur.clone();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for t in 1..=config.max_iterations {
        for &u in &active {
            let mut s = 0.0;
            for &(v, w) in graph.neighbors(u) {
                s += w * cur[v];
            }
            // Convex combination of values in [0,1]; the clamp only
            // absorbs last-ulp rounding.
            next[u] = (s / graph.degree_weight(u)).clamp(0.0, 1.0);
        }
        let mut r = 0.0;
        for &u in &active {
            let d = next[u] - cur[u];
            r += d * d;
        }
        std::mem::swap(&mut cur, &mut next);
        iterations = t;
        residual = r;
        if r < config.epsilon {
            break;
        }
    }
    Ok(ScoreVector {
        scores: cur,
        iteration_count: iterations,
        final_residual: residual,
    })
}

/// Solves the dense linear system `(I - Q) p = r` by Gaussian
/// elimination with partial pivoting. `a` is consumed.
fn solve_dense(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-12 {
            return Err(Error::Invariant(
                "singular hitting-probability system".into(),
            ));
        }
        a.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in (row + 1)..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Reference #1: exact absorbing-chain hitting probabilities toward the
/// Sybil label node, by direct linear solve. Intended for test-scale
/// graphs (dense elimination).
pub fn exact_hitting_probabilities(graph: &LabeledSocialGraph) -> Result<ScoreVector> {
    if let Some(&u) = unreachable_users(graph).first() {
        return Err(Error::UnreachableNode(graph.user_id(u).to_string()));
    }
    let n = graph.num_users();
    let ls = graph.sybil_label_node();
    let mut a = vec![vec![0.0f64; n]; n];
    let mut rhs = vec![0.0f64; n];
    for u in 0..n {
        a[u][u] = 1.0;
        let deg = graph.degree_weight(u);
        for &(v, w) in graph.neighbors(u) {
            let p = w / deg;
            if v < n {
                a[u][v] -= p;
            } else if v == ls {
                rhs[u] += p;
            }
        }
    }
    let mut scores = solve_dense(a, rhs)?;
    for s in scores.iter_mut() {
        *s = s.clamp(0.0, 1.0);
    }
    scores.push(0.0);
    scores.push(1.0);
    Ok(ScoreVector {
        scores,
        iteration_count: 0,
        final_residual: 0.0,
    })
}

/// Hard cap on a single walk's length; hitting it means the absorption
/// precondition was violated.
const WALK_STEP_CAP: usize = 1_000_000;

/// splitmix64-style finalizer decorrelating (base, node, walk) triples
/// into per-walk RNG seeds.
fn derive_seed(base: u64, node: u64, walk: u64) -> u64 {
    let mut z = base
        ^ node.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ walk.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reference #2: per-node Monte Carlo estimate of the probability of
/// absorbing at l_s, from `walks_per_node` independent weighted walks.
/// Fully deterministic given `rng_seed`: each walk derives its own seed
/// from (rng_seed, node, walk index).
pub fn monte_carlo_scores(
    graph: &LabeledSocialGraph,
    walks_per_node: usize,
    rng_seed: u64,
) -> Result<ScoreVector> {
    monte_carlo_with_cap(graph, walks_per_node, rng_seed, WALK_STEP_CAP)
}

fn monte_carlo_with_cap(
    graph: &LabeledSocialGraph,
    walks_per_node: usize,
    rng_seed: u64,
    step_cap: usize,
) -> Result<ScoreVector> {
    if walks_per_node == 0 {
        return Err(Error::Config("walks_per_node must be positive".into()));
    }
    if let Some(&u) = unreachable_users(graph).first() {
        return Err(Error::UnreachableNode(graph.user_id(u).to_string()));
    }
    let n = graph.num_users();
    let lb = graph.benign_label_node();
    let ls = graph.sybil_label_node();
    let mut scores = vec![0.0; n + 2];
    for u in 0..n {
        let mut hits = 0u64;
        for walk in 0..walks_per_node {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, u as u64, walk as u64));
            let mut x = u;
            let mut absorbed = None;
            for _ in 0..step_cap {
                let neighbors = graph.neighbors(x);
                let mut r = rng.gen::<f64>() * graph.degree_weight(x);
                let mut chosen = neighbors[neighbors.len() - 1].0;
                for &(v, w) in neighbors {
                    if r < w {
                        chosen = v;
                        break;
                    }
                    r -= w;
                }
                if chosen == ls {
                    absorbed = Some(true);
                    break;
                }
                if chosen == lb {
                    absorbed = Some(false);
                    break;
                }
                x = chosen;
            }
            match absorbed {
                Some(true) => hits += 1,
                Some(false) => {}
                None => {
                    return Err(Error::NonabsorbingWalk(format!(
                        "walk from '{}' not absorbed within {step_cap} steps",
                        graph.user_id(u)
                    )))
                }
            }
        }
        scores[u] = hits as f64 / walks_per_node as f64;
    }
    scores[ls] = 1.0;
    Ok(ScoreVector {
        scores,
        iteration_count: 0,
        final_residual: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Label;
    use crate::graph::{build_graph, EdgeObservation, WeightMode};
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn obs(u: &str, v: &str, count: u64) -> EdgeObservation {
        EdgeObservation {
            u: u.into(),
            v: v.into(),
            mutual_friend_count: count,
        }
    }

    fn labels(pairs: &[(&str, Label)]) -> BTreeMap<String, Label> {
        pairs.iter().map(|(id, l)| (id.to_string(), *l)).collect()
    }

    fn priors(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(id, p)| (id.to_string(), *p)).collect()
    }

    /// Single user wired to both label nodes: hitting probability 1/2.
    fn both_labels_graph() -> LabeledSocialGraph {
        LabeledSocialGraph::from_parts(vec!["a".into()], &[], &["a".into()], &["a".into()])
            .unwrap()
    }

    /// a(benign) -- b(sybil): the classic 1/3, 2/3 chain.
    fn two_node_chain() -> LabeledSocialGraph {
        build_graph(
            &[obs("a", "b", 1)],
            &labels(&[("a", Label::Benign), ("b", Label::Sybil)]),
            WeightMode::Floored,
        )
        .unwrap()
    }

    #[test]
    fn uniform_initialization_sets_half_everywhere() {
        let g = two_node_chain();
        let init = initialize_scores(&g, &HashMap::new(), SeedMode::Uniform).unwrap();
        assert_eq!(init.scores[0], 0.5);
        assert_eq!(init.scores[1], 0.5);
        assert_eq!(init.scores[g.benign_label_node()], 0.0);
        assert_eq!(init.scores[g.sybil_label_node()], 1.0);
    }

    #[test]
    fn svm_initialization_passes_priors_through() {
        let g = two_node_chain();
        let init =
            initialize_scores(&g, &priors(&[("a", 0.9), ("b", 0.1)]), SeedMode::Svm)
                .unwrap();
        assert_eq!(init.scores[g.user_index("a").unwrap()], 0.9);
        assert_eq!(init.scores[g.user_index("b").unwrap()], 0.1);
    }

    #[test]
    fn missing_prior_is_a_coverage_error() {
        let g = two_node_chain();
        let err = initialize_scores(&g, &priors(&[("a", 0.9)]), SeedMode::Svm).unwrap_err();
        assert!(matches!(err, Error::MissingPrior(id) if id == "b"));
    }

    #[test]
    fn out_of_range_prior_is_malformed() {
        let g = two_node_chain();
        for bad in [1.5, -0.1, f64::NAN] {
            let err =
                initialize_scores(&g, &priors(&[("a", bad), ("b", 0.5)]), SeedMode::Svm)
                    .unwrap_err();
            assert!(matches!(err, Error::MalformedPrior(_)));
        }
    }

    #[test]
    fn symmetric_boundary_node_converges_to_half() {
        let g = both_labels_graph();
        let init = initialize_scores(&g, &HashMap::new(), SeedMode::Uniform).unwrap();
        let out = sybilwalk(&g, &init, &WalkConfig::default()).unwrap();
        assert!((out.scores[0] - 0.5).abs() <= 1e-9);
        let exact = exact_hitting_probabilities(&g).unwrap();
        assert!((exact.scores[0] - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn two_node_chain_matches_hand_solution() {
        let g = two_node_chain();
        let a = g.user_index("a").unwrap();
        let b = g.user_index("b").unwrap();
        let exact = exact_hitting_probabilities(&g).unwrap();
        assert!((exact.scores[a] - 1.0 / 3.0).abs() <= 1e-12);
        assert!((exact.scores[b] - 2.0 / 3.0).abs() <= 1e-12);

        let init = initialize_scores(&g, &HashMap::new(), SeedMode::Uniform).unwrap();
        // Stop-time error tracks the residual, ~2^-t here, so the 1e-6
        // agreement needs a residual threshold a few orders tighter.
        let cfg = WalkConfig {
            epsilon: 1e-13,
            ..Default::default()
        };
        let out = sybilwalk(&g, &init, &cfg).unwrap();
        assert!((out.scores[a] - 1.0 / 3.0).abs() <= 1e-6);
        assert!((out.scores[b] - 2.0 / 3.0).abs() <= 1e-6);
    }

    #[test]
    fn star_center_hits_sybil_side_one_third_of_the_time() {
        // Center with three leaves, two benign-labeled and one
        // sybil-labeled; the bounce off each leaf preserves the
        // one-step 1/3 ratio at the center.
        let g = build_graph(
            &[obs("c", "x1", 1), obs("c", "x2", 1), obs("c", "x3", 1)],
            &labels(&[
                ("x1", Label::Benign),
                ("x2", Label::Benign),
                ("x3", Label::Sybil),
            ]),
            WeightMode::Floored,
        )
        .unwrap();
        let c = g.user_index("c").unwrap();
        let exact = exact_hitting_probabilities(&g).unwrap();
        assert!((exact.scores[c] - 1.0 / 3.0).abs() <= 1e-12);

        let init = initialize_scores(&g, &HashMap::new(), SeedMode::Uniform).unwrap();
        let cfg = WalkConfig {
            epsilon: 1e-13,
            ..Default::default()
        };
        let out = sybilwalk(&g, &init, &cfg).unwrap();
        assert!((out.scores[c] - 1.0 / 3.0).abs() <= 1e-6);
    }

    #[test]
    fn exact_solution_is_a_fixed_point() {
        let g = two_node_chain();
        let exact = exact_hitting_probabilities(&g).unwrap();
        let cfg = WalkConfig {
            epsilon: 1e-300,
            max_iterations: 1,
            seed_mode: SeedMode::Svm,
        };
        let out = sybilwalk(&g, &exact, &cfg).unwrap();
        for u in 0..g.num_users() {
            assert!((out.scores[u] - exact.scores[u]).abs() <= 1e-12);
        }
        assert!(out.final_residual <= 1e-12);
    }

    #[test]
    fn iteration_budget_is_respected() {
        let g = two_node_chain();
        let init = initialize_scores(&g, &HashMap::new(), SeedMode::Uniform).unwrap();
        let cfg = WalkConfig {
            epsilon: 1e-300,
            max_iterations: 3,
            seed_mode: SeedMode::Uniform,
        };
        let out = sybilwalk(&g, &init, &cfg).unwrap();
        assert_eq!(out.iteration_count, 3);
    }

    fn random_labeled_graph(
        seed: u64,
        n: usize,
        edge_prob: f64,
        label_prob: f64,
    ) -> LabeledSocialGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut observations = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(edge_prob) {
                    observations.push(obs(
                        &format!("n{i:03}"),
                        &format!("n{j:03}"),
                        rng.gen_range(1..20),
                    ));
                }
            }
        }
        let mut label_map = BTreeMap::new();
        for i in 0..n {
            if rng.gen_bool(label_prob) {
                label_map.insert(
                    format!("n{i:03}"),
                    if rng.gen_bool(0.5) { Label::Benign } else { Label::Sybil },
                );
            }
        }
        build_graph(&observations, &label_map, WeightMode::Floored).unwrap()
    }

    #[test]
    fn iteration_matches_exact_oracle_on_random_graphs() {
        let mut tested = 0;
        for seed in 0..12u64 {
            let g = random_labeled_graph(seed, 40, 0.2, 0.4);
            if !unreachable_users(&g).is_empty() {
                continue;
            }
            let exact = exact_hitting_probabilities(&g).unwrap();
            let init = initialize_scores(&g, &HashMap::new(), SeedMode::Uniform).unwrap();
            let cfg = WalkConfig {
                epsilon: 1e-14,
                max_iterations: 10_000,
                seed_mode: SeedMode::Uniform,
            };
            let out = sybilwalk(&g, &init, &cfg).unwrap();
            let max_abs = (0..g.num_users())
                .map(|u| (out.scores[u] - exact.scores[u]).abs())
                .fold(0.0f64, f64::max);
            assert!(max_abs <= 1e-6, "seed {seed}: max abs diff {max_abs}");
            tested += 1;
        }
        assert!(tested >= 5, "only {tested} graphs met the reachability precondition");
    }

    #[test]
    fn two_region_graph_converges_fast_and_matches_oracle() {
        // 200-account generated graph: the default epsilon stops within a
        // few hundred iterations, and the converged scores (tight epsilon)
        // agree with the linear-system oracle to 1e-6.
        let out = crate::synthgen::generate(&crate::synthgen::SynthConfig {
            n_benign: 100,
            n_sybil: 100,
            rng_seed: 42,
            ..crate::synthgen::SynthConfig::default()
        })
        .unwrap();
        let ids: Vec<String> = out.ground_truth.keys().cloned().collect();
        let g = crate::graph::build_graph_with_nodes(
            &out.observations,
            &out.labels,
            &ids,
            WeightMode::Floored,
        )
        .unwrap();
        assert!(unreachable_users(&g).is_empty());
        let exact = exact_hitting_probabilities(&g).unwrap();
        let init = initialize_scores(&g, &HashMap::new(), SeedMode::Uniform).unwrap();

        let default_eps = sybilwalk(&g, &init, &WalkConfig::default()).unwrap();
        assert_eq!(WalkConfig::default().epsilon, 1e-8);
        assert!(
            default_eps.iteration_count <= 500,
            "took {} iterations",
            default_eps.iteration_count
        );

        let tight = WalkConfig {
            epsilon: 1e-13,
            max_iterations: 10_000,
            seed_mode: SeedMode::Uniform,
        };
        let converged = sybilwalk(&g, &init, &tight).unwrap();
        let max_abs = (0..g.num_users())
            .map(|u| (converged.scores[u] - exact.scores[u]).abs())
            .fold(0.0f64, f64::max);
        assert!(max_abs <= 1e-6, "max abs diff {max_abs}");
    }

    #[test]
    fn initialization_does_not_change_the_limit() {
        let g = random_labeled_graph(7, 40, 0.2, 0.4);
        assert!(unreachable_users(&g).is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let prior_map: HashMap<String, f64> = g
            .user_ids()
            .iter()
            .map(|id| (id.clone(), rng.gen_range(0.0..1.0)))
            .collect();
        let cfg = WalkConfig {
            epsilon: 1e-10,
            max_iterations: 10_000,
            seed_mode: SeedMode::Svm,
        };
        let from_svm = sybilwalk(
            &g,
            &initialize_scores(&g, &prior_map, SeedMode::Svm).unwrap(),
            &cfg,
        )
        .unwrap();
        let from_uniform = sybilwalk(
            &g,
            &initialize_scores(&g, &prior_map, SeedMode::Uniform).unwrap(),
            &cfg,
        )
        .unwrap();
        for u in 0..g.num_users() {
            assert!(
                (from_svm.scores[u] - from_uniform.scores[u]).abs() <= 1e-5,
                "node {u} differs by initialization"
            );
        }
    }

    #[test]
    fn mirror_automorphism_scores_sum_to_one() {
        // Square a1-a2-b2-b1-a1 with a1 benign and b1 sybil; swapping
        // a_i with b_i and l_b with l_s preserves the graph.
        let g = build_graph(
            &[
                obs("a1", "a2", 1),
                obs("b1", "b2", 1),
                obs("a1", "b1", 1),
                obs("a2", "b2", 1),
            ],
            &labels(&[("a1", Label::Benign), ("b1", Label::Sybil)]),
            WeightMode::Floored,
        )
        .unwrap();
        let idx = |s: &str| g.user_index(s).unwrap();
        let exact = exact_hitting_probabilities(&g).unwrap();
        assert!((exact.scores[idx("a1")] + exact.scores[idx("b1")] - 1.0).abs() <= 1e-9);
        assert!((exact.scores[idx("a2")] + exact.scores[idx("b2")] - 1.0).abs() <= 1e-9);

        let init = initialize_scores(&g, &HashMap::new(), SeedMode::Uniform).unwrap();
        let cfg = WalkConfig {
            epsilon: 1e-10,
            ..Default::default()
        };
        let out = sybilwalk(&g, &init, &cfg).unwrap();
        assert!((out.scores[idx("a1")] + out.scores[idx("b1")] - 1.0).abs() <= 1e-9);
        assert!((out.scores[idx("a2")] + out.scores[idx("b2")] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn unreachable_component_keeps_initial_scores() {
        let g = build_graph(
            &[obs("a", "b", 1), obs("x", "y", 1)],
            &labels(&[("a", Label::Benign), ("b", Label::Sybil)]),
            WeightMode::Floored,
        )
        .unwrap();
        let prior_map = priors(&[("a", 0.2), ("b", 0.8), ("x", 0.77), ("y", 0.13)]);
        let init = initialize_scores(&g, &prior_map, SeedMode::Svm).unwrap();
        let out = sybilwalk(&g, &init, &WalkConfig::default()).unwrap();
        assert_eq!(out.scores[g.user_index("x").unwrap()], 0.77);
        assert_eq!(out.scores[g.user_index("y").unwrap()], 0.13);
        let a = g.user_index("a").unwrap();
        assert!((out.scores[a] - 1.0 / 3.0).abs() <= 1e-4);
    }

    #[test]
    fn exact_oracle_rejects_unreachable_nodes() {
        let g = build_graph(
            &[obs("x", "y", 1)],
            &labels(&[("a", Label::Benign)]),
            WeightMode::Floored,
        )
        .unwrap();
        assert!(matches!(
            exact_hitting_probabilities(&g).unwrap_err(),
            Error::UnreachableNode(_)
        ));
        assert!(matches!(
            monte_carlo_scores(&g, 10, 0).unwrap_err(),
            Error::UnreachableNode(_)
        ));
    }

    #[test]
    fn graph_without_users_is_trivially_converged() {
        let g = build_graph(&[], &BTreeMap::new(), WeightMode::Floored).unwrap();
        let init = initialize_scores(&g, &HashMap::new(), SeedMode::Uniform).unwrap();
        let out = sybilwalk(&g, &init, &WalkConfig::default()).unwrap();
        assert_eq!(out.iteration_count, 0);
        assert_eq!(out.scores, vec![0.0, 1.0]);
    }

    #[test]
    fn monte_carlo_estimates_the_chain_probability() {
        let g = two_node_chain();
        let mc = monte_carlo_scores(&g, 100_000, 5).unwrap();
        let a = g.user_index("a").unwrap();
        assert!((mc.scores[a] - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn monte_carlo_immediate_absorption_is_exact() {
        let g = LabeledSocialGraph::from_parts(
            vec!["s".into()],
            &[],
            &[],
            &["s".into()],
        )
        .unwrap();
        let mc = monte_carlo_scores(&g, 1000, 3).unwrap();
        assert_eq!(mc.scores[0], 1.0);
    }

    #[test]
    fn monte_carlo_is_deterministic_per_seed() {
        let g = two_node_chain();
        let m1 = monte_carlo_scores(&g, 2000, 11).unwrap();
        let m2 = monte_carlo_scores(&g, 2000, 11).unwrap();
        assert_eq!(m1.scores, m2.scores);
        let m3 = monte_carlo_scores(&g, 2000, 12).unwrap();
        assert_ne!(m1.scores, m3.scores);
    }

    #[test]
    fn monte_carlo_agrees_with_exact_within_four_standard_errors() {
        let g = random_labeled_graph(3, 50, 0.15, 0.4);
        assert!(unreachable_users(&g).is_empty());
        let walks = 20_000;
        let exact = exact_hitting_probabilities(&g).unwrap();
        let mc = monte_carlo_scores(&g, walks, 17).unwrap();
        for u in 0..g.num_users() {
            let p = exact.scores[u];
            let se = (p * (1.0 - p) / walks as f64).sqrt();
            // The floor covers the Poisson regime where p*walks is tiny
            // and the normal approximation understates spread.
            let bound = (4.0 * se).max(8.0 / walks as f64);
            let diff = (mc.scores[u] - p).abs();
            assert!(
                diff <= bound,
                "node {u}: exact {p}, mc {}, diff {diff} > bound {bound}",
                mc.scores[u]
            );
        }
    }

    #[test]
    fn walk_exceeding_step_cap_is_reported() {
        // Long unlabeled chain ending in a sybil: a capped walk from the
        // far end cannot absorb.
        let mut observations = Vec::new();
        for i in 0..30 {
            observations.push(obs(&format!("p{i:02}"), &format!("p{:02}", i + 1), 1));
        }
        let g = build_graph(
            &observations,
            &labels(&[("p30", Label::Sybil)]),
            WeightMode::Floored,
        )
        .unwrap();
        let err = monte_carlo_with_cap(&g, 5, 0, 3).unwrap_err();
        assert!(matches!(err, Error::NonabsorbingWalk(_)));
    }

    #[test]
    fn zero_walks_is_a_config_error() {
        let g = two_node_chain();
        assert!(matches!(
            monte_carlo_scores(&g, 0, 0).unwrap_err(),
            Error::Config(_)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scores_stay_in_unit_interval(seed in 0u64..500, prior_seed in 0u64..500) {
            let g = random_labeled_graph(seed, 25, 0.15, 0.3);
            let mut rng = ChaCha8Rng::seed_from_u64(prior_seed);
            let prior_map: HashMap<String, f64> = g
                .user_ids()
                .iter()
                .map(|id| (id.clone(), rng.gen_range(0.0..1.0)))
                .collect();
            let init = initialize_scores(&g, &prior_map, SeedMode::Svm).unwrap();
            let out = sybilwalk(&g, &init, &WalkConfig::default()).unwrap();
            for (u, &s) in out.scores.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(&s), "node {} score {}", u, s);
            }
            prop_assert_eq!(out.scores[g.benign_label_node()], 0.0);
            prop_assert_eq!(out.scores[g.sybil_label_node()], 1.0);
        }

        #[test]
        fn one_iteration_obeys_the_neighbor_extremes(seed in 0u64..200) {
            let g = random_labeled_graph(seed, 20, 0.2, 0.4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            let prior_map: HashMap<String, f64> = g
                .user_ids()
                .iter()
                .map(|id| (id.clone(), rng.gen_range(0.0..1.0)))
                .collect();
            let init = initialize_scores(&g, &prior_map, SeedMode::Svm).unwrap();
            let cfg = WalkConfig { epsilon: 1e-300, max_iterations: 1, seed_mode: SeedMode::Svm };
            let out = sybilwalk(&g, &init, &cfg).unwrap();
            let excluded: Vec<usize> = unreachable_users(&g);
            for u in 0..g.num_users() {
                if excluded.contains(&u) {
                    continue;
                }
                let lo = g
                    .neighbors(u)
                    .iter()
                    .map(|&(v, _)| init.scores[v])
                    .fold(f64::INFINITY, f64::min);
                let hi = g
                    .neighbors(u)
                    .iter()
                    .map(|&(v, _)| init.scores[v])
                    .fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out.scores[u] >= lo - 1e-12 && out.scores[u] <= hi + 1e-12);
            }
        }
    }
}
