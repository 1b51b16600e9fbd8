//! Monotonic local optima networks built from ILS run logs, and the metrics
//! reported on them.

pub mod export;

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encodings::Encoding;
use crate::evaluate::Fitness;
use crate::hash::hex_id;
use crate::sampler::{aggregate_counters, RunLog, RunStatistics};

/// Slack allowed on edge fitness monotonicity.
pub const MONOTONE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuartileClass {
    Low,
    Mid,
    High,
}

impl QuartileClass {
    pub fn of(fitness: f64, q: &Quartiles) -> QuartileClass {
        if fitness < q.q1 {
            QuartileClass::Low
        } else if fitness >= q.q3 {
            QuartileClass::High
        } else {
            QuartileClass::Mid
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuartileClass::Low => "low",
            QuartileClass::Mid => "mid",
            QuartileClass::High => "high",
        }
    }

    /// Fill colour: very pale, light and dark purple.
    pub fn color(self) -> &'static str {
        match self {
            QuartileClass::Low => "#ece2f0",
            QuartileClass::Mid => "#b19cd9",
            QuartileClass::High => "#54278f",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LonNode {
    #[serde(with = "hex_id")]
    pub id: u64,
    pub fitness: Fitness,
    #[serde(with = "hex_id")]
    pub phenotype_hash: u64,
    #[serde(with = "hex_id")]
    pub design_hash: u64,
    pub runs: BTreeSet<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quartile_class: Option<QuartileClass>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LonEdge {
    #[serde(with = "hex_id")]
    pub src: u64,
    #[serde(with = "hex_id")]
    pub dst: u64,
    pub weight: u64,
}

impl LonEdge {
    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub encoding: Encoding,
    pub config_digest: String,
}

/// Per-run figures kept alongside the network so that run-level
/// distributions survive without the raw logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: u32,
    pub chain_length: usize,
    pub max_fitness: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lon {
    pub schema: u32,
    pub provenance: Provenance,
    pub nodes: Vec<LonNode>,
    pub edges: Vec<LonEdge>,
    pub runs: Vec<RunSummary>,
    pub run_statistics: RunStatistics,
}

#[derive(Debug, Error, PartialEq)]
pub enum LonError {
    #[error("no run logs given")]
    EmptyInput,
    #[error("run {run_id} references missing entry in transition {src} -> {dst}")]
    DanglingTransition { run_id: u32, src: usize, dst: usize },
    #[error("run logs mix encodings {0} and {1}")]
    MixedEncodings(Encoding, Encoding),
    #[error("edge references unknown node {0:016x}")]
    UnknownNode(u64),
    #[error("no pair of distinct nodes is connected by a directed path")]
    NoReachablePairs,
    #[error("unsupported LON schema {0}")]
    SchemaMismatch(u32),
}

/// Merge run logs into one network. Nodes are identified by genotype hash
/// and keep the attributes of their first occurrence; repeated transitions
/// accumulate edge weight.
pub fn build_lon(logs: &[RunLog]) -> Result<Lon, LonError> {
    let first = logs.first().ok_or(LonError::EmptyInput)?;
    if let Some(other) = logs.iter().find(|l| l.encoding != first.encoding) {
        return Err(LonError::MixedEncodings(first.encoding, other.encoding));
    }

    let mut nodes: Vec<LonNode> = Vec::new();
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut edges: Vec<LonEdge> = Vec::new();
    let mut edge_index: HashMap<(u64, u64), usize> = HashMap::new();

    for log in logs {
        for &(src, dst) in &log.transitions {
            if src >= log.entries.len() || dst >= log.entries.len() {
                return Err(LonError::DanglingTransition {
                    run_id: log.run_id,
                    src,
                    dst,
                });
            }
        }
        for e in &log.entries {
            let i = *node_index.entry(e.genotype_hash).or_insert_with(|| {
                nodes.push(LonNode {
                    id: e.genotype_hash,
                    fitness: e.fitness,
                    phenotype_hash: e.phenotype_hash,
                    design_hash: e.design_hash,
                    runs: BTreeSet::new(),
                    quartile_class: None,
                });
                nodes.len() - 1
            });
            nodes[i].runs.insert(log.run_id);
        }
        for &(src, dst) in &log.transitions {
            let key = (log.entries[src].genotype_hash, log.entries[dst].genotype_hash);
            match edge_index.get(&key) {
                Some(&i) => edges[i].weight += 1,
                None => {
                    edge_index.insert(key, edges.len());
                    edges.push(LonEdge {
                        src: key.0,
                        dst: key.1,
                        weight: 1,
                    });
                }
            }
        }
    }

    let runs = logs
        .iter()
        .map(|l| RunSummary {
            run_id: l.run_id,
            chain_length: l.entries.len(),
            max_fitness: l.max_fitness().unwrap_or(f64::NAN),
            evaluations: l.counters.evaluations,
        })
        .collect();
    let sets: Vec<_> = logs.iter().map(|l| &l.counters.unique_designs).collect();
    let run_statistics = aggregate_counters(logs.iter().map(|l| &l.counters), &sets);

    Ok(Lon {
        schema: crate::SCHEMA_VERSION,
        provenance: Provenance {
            encoding: first.encoding,
            config_digest: String::new(),
        },
        nodes,
        edges,
        runs,
        run_statistics,
    })
}

impl Lon {
    pub fn from_json(text: &str) -> Result<Lon, LonFileError> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let schema = v.get("schema").and_then(|s| s.as_u64()).unwrap_or(0) as u32;
        if schema != crate::SCHEMA_VERSION {
            return Err(LonFileError::Lon(LonError::SchemaMismatch(schema)));
        }
        let lon: Lon = serde_json::from_value(v)?;
        lon.check_edges()?;
        Ok(lon)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("LON serialises")
    }

    pub fn node_positions(&self) -> HashMap<u64, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect()
    }

    fn check_edges(&self) -> Result<(), LonError> {
        let pos = self.node_positions();
        for e in &self.edges {
            for id in [e.src, e.dst] {
                if !pos.contains_key(&id) {
                    return Err(LonError::UnknownNode(id));
                }
            }
        }
        Ok(())
    }

    /// Edges as `(src, dst)` node positions.
    pub fn indexed_edges(&self) -> Vec<(usize, usize)> {
        let pos = self.node_positions();
        self.edges.iter().map(|e| (pos[&e.src], pos[&e.dst])).collect()
    }

    /// Every edge whose fitness drops by more than [`MONOTONE_TOLERANCE`].
    pub fn monotonicity_violations(&self) -> Vec<&LonEdge> {
        let pos = self.node_positions();
        self.edges
            .iter()
            .filter(|e| {
                let fs = self.nodes[pos[&e.src]].fitness.value;
                let fd = self.nodes[pos[&e.dst]].fitness.value;
                fd < fs - MONOTONE_TOLERANCE
            })
            .collect()
    }

    /// Node ids seen in more than one run.
    pub fn shared_nodes(&self) -> Vec<u64> {
        self.nodes.iter().filter(|n| n.runs.len() > 1).map(|n| n.id).collect()
    }

    /// Distributions compared across encodings, keyed by metric name.
    pub fn metric_samples(&self) -> Vec<(&'static str, Vec<f64>)> {
        vec![
            ("fitness", self.nodes.iter().map(|n| n.fitness.value).collect()),
            ("max_fitness", self.runs.iter().map(|r| r.max_fitness).collect()),
            ("evaluations", self.runs.iter().map(|r| r.evaluations as f64).collect()),
            ("fitness_delta", fitness_deltas(self)),
            (
                "chain_length",
                self.runs.iter().map(|r| r.chain_length as f64).collect(),
            ),
        ]
    }
}

#[derive(Debug, Error)]
pub enum LonFileError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Lon(#[from] LonError),
}

/// Component label per node of an `n`-node graph, ignoring edge direction.
/// Labels are assigned in order of each component's lowest node index.
pub fn component_labels(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if label[w] == usize::MAX {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

fn group_by_label(labels: &[usize]) -> Vec<Vec<usize>> {
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups
}

/// Weakly connected components as lists of node ids.
pub fn weakly_connected_components(lon: &Lon) -> Vec<Vec<u64>> {
    let labels = component_labels(lon.nodes.len(), &lon.indexed_edges());
    group_by_label(&labels)
        .into_iter()
        .map(|g| g.into_iter().map(|i| lon.nodes[i].id).collect())
        .collect()
}

/// Mean unweighted directed shortest-path length over ordered pairs of
/// distinct nodes with a path between them. Self-loops are ignored.
pub fn mean_directed_distance(n: usize, edges: &[(usize, usize)]) -> Option<f64> {
    let mut out = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a != b {
            out[a].push(b);
        }
    }
    let mut total = 0u64;
    let mut pairs = 0u64;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in &out[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    total += dist[w] as u64;
                    pairs += 1;
                    queue.push_back(w);
                }
            }
        }
    }
    (pairs > 0).then(|| total as f64 / pairs as f64)
}

pub fn average_path_length(lon: &Lon) -> Result<f64, LonError> {
    mean_directed_distance(lon.nodes.len(), &lon.indexed_edges()).ok_or(LonError::NoReachablePairs)
}

/// Sum of in- and out-degrees over nodes, divided by node count. A self-loop
/// adds one to each, so this equals `2|E| / |V|`.
pub fn mean_degree(lon: &Lon) -> f64 {
    if lon.nodes.is_empty() {
        return 0.0;
    }
    let pos = lon.node_positions();
    let mut degree = vec![0usize; lon.nodes.len()];
    for e in &lon.edges {
        degree[pos[&e.src]] += 1;
        degree[pos[&e.dst]] += 1;
    }
    degree.iter().sum::<usize>() as f64 / lon.nodes.len() as f64
}

/// Percentage of nodes whose evaluation hit the kill-switch.
pub fn infeasible_pct(lon: &Lon) -> f64 {
    if lon.nodes.is_empty() {
        return 0.0;
    }
    let killed = lon.nodes.iter().filter(|n| n.fitness.killed).count();
    100.0 * killed as f64 / lon.nodes.len() as f64
}

/// Number of distinct accepted local optima per run.
pub fn chain_lengths(logs: &[RunLog]) -> Vec<usize> {
    logs.iter().map(|l| l.entries.len()).collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Median fitness gain along edges, one value per component that has edges.
pub fn fitness_deltas(lon: &Lon) -> Vec<f64> {
    let edges = lon.indexed_edges();
    let labels = component_labels(lon.nodes.len(), &edges);
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut per_component: Vec<Vec<f64>> = vec![Vec::new(); count];
    for &(s, d) in &edges {
        let delta = (lon.nodes[d].fitness.value - lon.nodes[s].fitness.value).max(0.0);
        per_component[labels[s]].push(delta);
    }
    per_component.iter().filter_map(|d| median(d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of sorted data: position `(n - 1) * p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        q1: quantile_sorted(&v, 0.25),
        q3: quantile_sorted(&v, 0.75),
    })
}

/// Pool node fitness over all given networks, compute Q1/Q3 and label every
/// node. Returns `None` when there are no nodes at all.
pub fn classify_quartiles(lons: &mut [Lon]) -> Option<Quartiles> {
    let pooled: Vec<f64> = lons
        .iter()
        .flat_map(|l| l.nodes.iter().map(|n| n.fitness.value))
        .collect();
    let q = quartiles(&pooled)?;
    for node in lons.iter_mut().flat_map(|l| l.nodes.iter_mut()) {
        node.quartile_class = Some(QuartileClass::of(node.fitness.value, &q));
    }
    Some(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonSummary {
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    /// `None` when no two distinct nodes are connected.
    pub path_length: Option<f64>,
    pub degree: f64,
    pub infeasible: f64,
}

pub fn lon_summary(lon: &Lon) -> LonSummary {
    LonSummary {
        nodes: lon.nodes.len(),
        edges: lon.edges.len(),
        components: weakly_connected_components(lon).len(),
        path_length: average_path_length(lon).ok(),
        degree: mean_degree(lon),
        infeasible: infeasible_pct(lon),
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn single_chain() {
        let lon = build_lon(&[chain3()]).unwrap();
        assert_eq!(lon.nodes.len(), 3);
        assert_eq!(lon.edges.len(), 2);
        let s = lon_summary(&lon);
        assert_eq!(s.components, 1);
        assert!((s.path_length.unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((s.degree - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.infeasible, 0.0);
        assert!(lon.monotonicity_violations().is_empty());
    }

    #[test]
    fn shared_node_merges_runs() {
        let a = chain3();
        let b = log(
            1,
            vec![entry(0, 0xb, 2.0, false), entry(1, 0xd, 4.0, false)],
            vec![(0, 1)],
        );
        let lon = build_lon(&[a, b]).unwrap();
        assert_eq!(lon.nodes.len(), 4);
        let shared = lon.nodes.iter().find(|n| n.id == 0xb).unwrap();
        assert_eq!(shared.runs, BTreeSet::from([0, 1]));
        assert_eq!(lon.shared_nodes(), vec![0xb]);
        assert_eq!(weakly_connected_components(&lon).len(), 1);
    }

    #[test]
    fn repeated_transition_aggregates_weight() {
        let l = log(
            0,
            vec![entry(0, 1, 1.0, false), entry(1, 2, 1.0, false)],
            vec![(0, 1), (1, 0), (0, 1)],
        );
        let lon = build_lon(&[l]).unwrap();
        assert_eq!(lon.edges.len(), 2);
        assert_eq!(lon.edges[0].weight, 2);
    }

    #[test]
    fn dangling_and_empty_inputs() {
        assert_eq!(build_lon(&[]), Err(LonError::EmptyInput));
        let l = log(4, vec![entry(0, 1, 1.0, false)], vec![(0, 3)]);
        assert_eq!(
            build_lon(&[l]),
            Err(LonError::DanglingTransition {
                run_id: 4,
                src: 0,
                dst: 3
            })
        );
    }

    #[test]
    fn isolated_nodes() {
        let l = log(0, vec![entry(0, 1, 1.0, false), entry(1, 2, 1.0, false)], vec![]);
        let lon = build_lon(&[l]).unwrap();
        assert_eq!(average_path_length(&lon), Err(LonError::NoReachablePairs));
        assert_eq!(lon_summary(&lon).components, 2);
        assert_eq!(lon_summary(&lon).path_length, None);
    }

    #[test]
    fn self_loop_degree_and_delta() {
        let l = log(0, vec![entry(0, 1, 3.0, false)], vec![(0, 0)]);
        let lon = build_lon(&[l]).unwrap();
        assert_eq!(mean_degree(&lon), 2.0);
        assert_eq!(fitness_deltas(&lon), vec![0.0]);
    }

    #[test]
    fn deltas_median_per_component() {
        let l = log(
            0,
            vec![
                entry(0, 1, 0.0, false),
                entry(1, 2, 0.0, false),
                entry(2, 3, 2.0, false),
                entry(3, 4, 6.0, false),
            ],
            vec![(0, 1), (1, 2), (2, 3)],
        );
        let other = log(1, vec![entry(0, 9, 1.0, false)], vec![]);
        let lon = build_lon(&[l, other]).unwrap();
        assert_eq!(fitness_deltas(&lon), vec![2.0]);
    }

    #[test]
    fn infeasible_percentages() {
        let l = log(
            0,
            vec![
                entry(0, 1, 5.0, true),
                entry(1, 2, 6.0, false),
                entry(2, 3, 5.0, true),
                entry(3, 4, 7.0, false),
            ],
            vec![],
        );
        assert_eq!(infeasible_pct(&build_lon(&[l]).unwrap()), 50.0);
        let all = log(0, vec![entry(0, 1, 5.0, true)], vec![]);
        assert_eq!(infeasible_pct(&build_lon(&[all]).unwrap()), 100.0);
    }

    #[test]
    fn chain_lengths_per_run() {
        assert_eq!(
            chain_lengths(&[chain3(), log(1, vec![entry(0, 5, 1.0, false)], vec![])]),
            vec![3, 1]
        );
    }

    #[test]
    fn quartile_oracle_values() {
        let q = quartiles(&[30.0, 0.0, 20.0, 10.0]).unwrap();
        assert_eq!(q, Quartiles { q1: 7.5, q3: 22.5 });
        assert_eq!(QuartileClass::of(7.4, &q), QuartileClass::Low);
        assert_eq!(QuartileClass::of(7.5, &q), QuartileClass::Mid);
        assert_eq!(QuartileClass::of(22.5, &q), QuartileClass::High);
    }

    #[test]
    fn equal_fitness_is_all_high() {
        let l = log(0, vec![entry(0, 1, 4.0, false), entry(1, 2, 4.0, false)], vec![(0, 1)]);
        let mut lons = vec![build_lon(&[l]).unwrap()];
        let q = classify_quartiles(&mut lons).unwrap();
        assert_eq!(q.q1, q.q3);
        assert!(lons[0]
            .nodes
            .iter()
            .all(|n| n.quartile_class == Some(QuartileClass::High)));
    }

    #[test]
    fn json_round_trip_and_schema_check() {
        let lon = build_lon(&[chain3()]).unwrap();
        let back = Lon::from_json(&lon.to_json()).unwrap();
        assert_eq!(back, lon);
        let bumped = lon.to_json().replacen("\"schema\": 1", "\"schema\": 9", 1);
        assert!(matches!(
            Lon::from_json(&bumped),
            Err(LonFileError::Lon(LonError::SchemaMismatch(9)))
        ));
    }
}
