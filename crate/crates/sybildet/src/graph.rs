//! Label-augmented social graph: the undirected weighted user graph plus
//! two distinguished label nodes, l_b and l_s, wired to known-benign and
//! known-Sybil users with weight-1 edges.
//!
//! User-user weights are mutual-friend counts normalized by the global
//! maximum count M. Node indices are canonical: user nodes take
//! 0..n_users in sorted-id order, then l_b, then l_s, so identically
//! specified graphs are identical regardless of input order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Label;

/// One observed relationship with its mutual-friend count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeObservation {
    pub u: String,
    pub v: String,
    pub mutual_friend_count: u64,
}

/// How zero-mutual-friend edges are weighted when M >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Zero-count edges get the floor weight 1/(M+1), below any
    /// positive-count weight but still walkable. Default: deleting an
    /// observed relationship from the walk loses real signal.
    Floored,
    /// Weights are exactly count/M; zero-count edges drop out of the
    /// graph entirely (a zero-weight edge is invisible to the walk).
    Strict,
}

impl Default for WeightMode {
    fn default() -> Self {
        WeightMode::Floored
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSocialGraph {
    user_ids: Vec<String>,
    id_index: HashMap<String, usize>,
    /// Adjacency per node index (users, then l_b, then l_s); neighbor
    /// lists sorted by index. Symmetric: (u, v, w) appears in both lists.
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Cached sum of incident weights per node, label edges included.
    degree_weights: Vec<f64>,
    /// Per-user label used for label edges (Unknown = no label edge).
    labels: Vec<Label>,
    weight_mode: WeightMode,
    /// Global maximum mutual-friend count M the weights were scaled by.
    max_mutual: u64,
}

impl LabeledSocialGraph {
    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    /// Total node count including both label nodes.
    pub fn num_nodes(&self) -> usize {
        self.user_ids.len() + 2
    }

    pub fn benign_label_node(&self) -> usize {
        self.user_ids.len()
    }

    pub fn sybil_label_node(&self) -> usize {
        self.user_ids.len() + 1
    }

    pub fn is_label_node(&self, node: usize) -> bool {
        node >= self.user_ids.len()
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn user_id(&self, index: usize) -> &str {
        &self.user_ids[index]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn label_of(&self, user: usize) -> Label {
        self.labels[user]
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn degree_weight(&self, node: usize) -> f64 {
        self.degree_weights[node]
    }

    pub fn max_mutual_friends(&self) -> u64 {
        self.max_mutual
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.weight_mode
    }

    /// Checks every structural invariant; violations are internal errors.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        let lb = self.benign_label_node();
        let ls = self.sybil_label_node();
        if self.adjacency.len() != n || self.degree_weights.len() != n {
            return Err(Error::Invariant("adjacency arity mismatch".into()));
        }
        for u in 0..n {
            let mut recomputed = 0.0;
            for (k, &(v, w)) in self.adjacency[u].iter().enumerate() {
                if v == u {
                    return Err(Error::Invariant(format!("self-loop at node {u}")));
                }
                if k > 0 && self.adjacency[u][k - 1].0 == v {
                    return Err(Error::Invariant(format!(
                        "duplicate edge ({u},{v})"
                    )));
                }
                if !(w > 0.0 && w <= 1.0) {
                    return Err(Error::Invariant(format!(
                        "edge weight {w} outside (0,1] at ({u},{v})"
                    )));
                }
                let user_user = !self.is_label_node(u) && !self.is_label_node(v);
                if !user_user && w != 1.0 {
                    return Err(Error::Invariant(format!(
                        "label edge ({u},{v}) has weight {w}, expected 1"
                    )));
                }
                if (u == lb && v == ls) || (u == ls && v == lb) {
                    return Err(Error::Invariant("label nodes are adjacent".into()));
                }
                let back = self.adjacency[v]
                    .iter()
                    .find(|&&(t, _)| t == u)
                    .map(|&(_, wb)| wb);
                if back != Some(w) {
                    return Err(Error::Invariant(format!(
                        "asymmetric edge ({u},{v})"
                    )));
                }
                recomputed += w;
            }
            if (recomputed - self.degree_weights[u]).abs() > 1e-12 {
                return Err(Error::Invariant(format!(
                    "degree weight cache off at node {u}: {} vs {}",
                    self.degree_weights[u], recomputed
                )));
            }
        }
        Ok(())
    }

    /// Builds a graph directly from user ids, weighted user-user edges,
    /// and explicit label-node memberships. Unlike [`build_graph`] this
    /// can wire a user to both label nodes, which the oracle tests and
    /// hand-built boundary cases need. Weights must lie in (0,1].
    pub fn from_parts(
        user_ids: Vec<String>,
        edges: &[(String, String, f64)],
        benign_labeled: &[String],
        sybil_labeled: &[String],
    ) -> Result<Self> {
        let mut sorted = user_ids;
        sorted.sort();
        sorted.dedup();
        let id_index: HashMap<String, usize> = sorted
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let n = sorted.len();
        let lb = n;
        let ls = n + 1;
        let mut adjacency = vec![Vec::new(); n + 2];
        let push = |adj: &mut Vec<Vec<(usize, f64)>>, a: usize, b: usize, w: f64| {
            adj[a].push((b, w));
            adj[b].push((a, w));
        };
        let lookup = |id: &str| -> Result<usize> {
            id_index
                .get(id)
                .copied()
                .ok_or_else(|| Error::MalformedEdge(format!("unknown node '{id}'")))
        };
        for (a, b, w) in edges {
            let (ai, bi) = (lookup(a)?, lookup(b)?);
            if ai == bi {
                return Err(Error::MalformedEdge(format!("self-loop at '{a}'")));
            }
            if !(*w > 0.0 && *w <= 1.0) {
                return Err(Error::MalformedEdge(format!(
                    "edge ('{a}','{b}') weight {w} outside (0,1]"
                )));
            }
            push(&mut adjacency, ai, bi, *w);
        }
        let mut labels = vec![Label::Unknown; n];
        let benign_set: BTreeSet<usize> =
            benign_labeled.iter().map(|id| lookup(id)).collect::<Result<_>>()?;
        let sybil_set: BTreeSet<usize> =
            sybil_labeled.iter().map(|id| lookup(id)).collect::<Result<_>>()?;
        for &i in &benign_set {
            // A node in both sets keeps edges to both label nodes but an
            // ambiguous stored label.
            labels[i] = if sybil_set.contains(&i) { Label::Unknown } else { Label::Benign };
            push(&mut adjacency, i, lb, 1.0);
        }
        for &i in &sybil_set {
            if !benign_set.contains(&i) {
                labels[i] = Label::Sybil;
            }
            push(&mut adjacency, i, ls, 1.0);
        }
        let graph = finalize(sorted, id_index, adjacency, labels, WeightMode::Floored, 0);
        graph.validate()?;
        Ok(graph)
    }
}

fn finalize(
    user_ids: Vec<String>,
    id_index: HashMap<String, usize>,
    mut adjacency: Vec<Vec<(usize, f64)>>,
    labels: Vec<Label>,
    weight_mode: WeightMode,
    max_mutual: u64,
) -> LabeledSocialGraph {
    for list in adjacency.iter_mut() {
        list.sort_by_key(|&(v, _)| v);
    }
    let degree_weights = adjacency
        .iter()
        .map(|list| list.iter().map(|&(_, w)| w).sum())
        .collect();
    LabeledSocialGraph {
        user_ids,
        id_index,
        adjacency,
        degree_weights,
        labels,
        weight_mode,
        max_mutual,
    }
}

/// Builds the label-augmented graph from edge observations and a label
/// map, normalizing weights by the global maximum mutual-friend count.
///
/// Node set: every observation endpoint plus every key of `labels`.
/// Duplicate (u,v) observations merge by maximum count. With M = 0 every
/// edge gets weight 1 (the counts carry no information, the edges do).
pub fn build_graph(
    observations: &[EdgeObservation],
    labels: &BTreeMap<String, Label>,
    mode: WeightMode,
) -> Result<LabeledSocialGraph> {
    build_graph_with_nodes(observations, labels, &[], mode)
}

/// [`build_graph`] with extra node ids forced into the node set even if
/// they appear in no observation or label (accounts with no recorded
/// relationships still need scores).
pub fn build_graph_with_nodes(
    observations: &[EdgeObservation],
    labels: &BTreeMap<String, Label>,
    extra_nodes: &[String],
    mode: WeightMode,
) -> Result<LabeledSocialGraph> {
    let mut ids: BTreeSet<String> = BTreeSet::new();
    for obs in observations {
        if obs.u == obs.v {
            return Err(Error::MalformedEdge(format!(
                "self-loop at '{}'",
                obs.u
            )));
        }
        if obs.u.is_empty() || obs.v.is_empty() {
            return Err(Error::MalformedEdge("empty endpoint id".into()));
        }
        ids.insert(obs.u.clone());
        ids.insert(obs.v.clone());
    }
    for id in labels.keys() {
        ids.insert(id.clone());
    }
    for id in extra_nodes {
        ids.insert(id.clone());
    }
    let user_ids: Vec<String> = ids.into_iter().collect();
    let id_index: HashMap<String, usize> = user_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    let n = user_ids.len();

    // Merge duplicates by max count under an order-free canonical key.
    let mut merged: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for obs in observations {
        let a = id_index[&obs.u];
        let b = id_index[&obs.v];
        let key = (a.min(b), a.max(b));
        let entry = merged.entry(key).or_insert(0);
        *entry = (*entry).max(obs.mutual_friend_count);
    }
    let max_mutual = merged.values().copied().max().unwrap_or(0);

    let mut adjacency = vec![Vec::new(); n + 2];
    for (&(a, b), &count) in &merged {
        let weight = if max_mutual == 0 {
            1.0
        } else if count == 0 {
            match mode {
                WeightMode::Floored => 1.0 / (max_mutual as f64 + 1.0),
                WeightMode::Strict => continue,
            }
        } else {
            count as f64 / max_mutual as f64
        };
        adjacency[a].push((b, weight));
        adjacency[b].push((a, weight));
    }

    let mut node_labels = vec![Label::Unknown; n];
    for (id, &label) in labels {
        let i = id_index[id];
        node_labels[i] = label;
        let target = match label {
            Label::Benign => n,
            Label::Sybil => n + 1,
            Label::Unknown => continue,
        };
        adjacency[i].push((target, 1.0));
        adjacency[target].push((i, 1.0));
    }

    let graph = finalize(user_ids, id_index, adjacency, node_labels, mode, max_mutual);
    graph.validate()?;
    Ok(graph)
}

/// Probability that the weighted walk at `u` steps to `v`:
/// w_uv / degree_weights\[u\]. Zero for a non-neighbor.
pub fn transition_probability(
    graph: &LabeledSocialGraph,
    u: usize,
    v: usize,
) -> Result<f64> {
    let deg = graph.degree_weight(u);
    if deg <= 0.0 {
        let name = if graph.is_label_node(u) {
            if u == graph.benign_label_node() { "l_b" } else { "l_s" }.to_string()
        } else {
            graph.user_id(u).to_string()
        };
        return Err(Error::IsolatedNode(name));
    }
    let w = graph
        .neighbors(u)
        .iter()
        .find(|&&(t, _)| t == v)
        .map(|&(_, w)| w)
        .unwrap_or(0.0);
    Ok(w / deg)
}

/// Partition of the user nodes by user-user edges only (label edges and
/// label nodes excluded). Components are sorted by smallest member, with
/// members sorted.
pub fn connected_components(graph: &LabeledSocialGraph) -> Vec<Vec<usize>> {
    let n = graph.num_users();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut members = Vec::new();
        while let Some(u) = stack.pop() {
            members.push(u);
            for &(v, _) in graph.neighbors(u) {
                if v < n && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// User nodes with no path to either label node (label edges included in
/// the traversal). The walk is undefined for them; callers fall back to
/// the prior and flag them.
pub fn unreachable_users(graph: &LabeledSocialGraph) -> Vec<usize> {
    let n = graph.num_users();
    let mut seen = vec![false; graph.num_nodes()];
    let mut stack = vec![graph.benign_label_node(), graph.sybil_label_node()];
    seen[graph.benign_label_node()] = true;
    seen[graph.sybil_label_node()] = true;
    while let Some(u) = stack.pop() {
        for &(v, _) in graph.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    (0..n).filter(|&u| !seen[u]).collect()
}
