//! Temporal random walks over dynamic graphs.
//!
//! A walker at node `v` holding time `t` may only traverse incident edges
//! with timestamp `t' >= t`, so walk timestamps never decrease. The edge
//! choice follows an exponential time-decay distribution: closer-in-time
//! edges are proportionally more likely, `P(e) ∝ exp(t - t')`.

pub mod io;

use crate::connectome::DynamicGraph;
use crate::rng::{hash_str, stream_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("invalid walk config: {0}")]
    InvalidConfig(String),
    #[error("start node {node} out of range (R = {node_count})")]
    UnknownNode { node: u32, node_count: usize },
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a walk's clock starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StartTimePolicy {
    /// Start at snapshot 0, maximizing the reachable temporal span.
    #[default]
    Earliest,
    /// Draw the start time uniformly from the start node's incident edge
    /// timestamps, improving coverage of late snapshots.
    UniformIncident,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub l_max: usize,
    pub walks_per_node: usize,
    pub min_length: usize,
    pub start_time_policy: StartTimePolicy,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            l_max: 20,
            walks_per_node: 30,
            min_length: 2,
            start_time_policy: StartTimePolicy::Earliest,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        if self.min_length < 2 {
            return Err(WalkError::InvalidConfig(
                "min_length must be >= 2 (a single node carries no transition)".into(),
            ));
        }
        if self.min_length > self.l_max {
            return Err(WalkError::InvalidConfig(format!(
                "min_length {} exceeds l_max {}",
                self.min_length, self.l_max
            )));
        }
        if self.walks_per_node == 0 {
            return Err(WalkError::InvalidConfig("walks_per_node must be >= 1".into()));
        }
        Ok(())
    }
}

/// Time-ordered node sequence. `times[i]` is the timestamp of the edge taken
/// from `nodes[i]` to `nodes[i + 1]`, so `times.len() == nodes.len() - 1` and
/// the sequence is non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalWalk {
    pub graph_id: String,
    pub nodes: Vec<u32>,
    pub times: Vec<u32>,
}

impl TemporalWalk {
    /// Check the walk against its source graph: length bounds, monotone
    /// times, and that every step is a real edge.
    pub fn check(&self, graph: &DynamicGraph, l_max: usize) -> bool {
        if self.nodes.len() < 2 || self.nodes.len() > l_max {
            return false;
        }
        if self.times.len() != self.nodes.len() - 1 {
            return false;
        }
        if self.times.windows(2).any(|w| w[0] > w[1]) {
            return false;
        }
        self.nodes
            .windows(2)
            .zip(&self.times)
            .all(|(pair, &t)| graph.has_edge(pair[0], pair[1], t))
    }
}

/// One incident temporal edge as seen from a fixed node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Incidence {
    pub time: u32,
    pub neighbor: u32,
}

/// Per-node incidence lists sorted by `(time, neighbor)`, for O(log E)
/// temporal-neighborhood queries.
#[derive(Debug, Clone)]
pub struct TemporalAdjacency {
    lists: Vec<Vec<Incidence>>,
}

impl TemporalAdjacency {
    pub fn from_graph(graph: &DynamicGraph) -> Self {
        let mut lists = vec![Vec::new(); graph.node_count()];
        for e in graph.edges() {
            lists[e.u as usize].push(Incidence { time: e.t, neighbor: e.v });
            lists[e.v as usize].push(Incidence { time: e.t, neighbor: e.u });
        }
        for list in &mut lists {
            list.sort_unstable();
        }
        TemporalAdjacency { lists }
    }

    pub fn node_count(&self) -> usize {
        self.lists.len()
    }

    /// Incident edges of `v` with timestamp `>= t`; empty when none remain.
    pub fn temporal_neighborhood(&self, v: u32, t: u32) -> &[Incidence] {
        let list = &self.lists[v as usize];
        let from = list.partition_point(|inc| inc.time < t);
        &list[from..]
    }

    /// All incident edges of `v` regardless of time.
    pub fn incident(&self, v: u32) -> &[Incidence] {
        &self.lists[v as usize]
    }
}

/// Transition distribution over a temporal neighborhood at current time `t`:
/// `P(e) = exp(t - t') / Σ exp(t - t'')`. Computed with max-subtraction
/// (equivalently, relative to the closest-in-time edge) so large time gaps
/// cannot underflow the whole distribution.
pub fn transition_probs(neighborhood: &[Incidence], t: u32) -> Vec<f64> {
    assert!(
        !neighborhood.is_empty(),
        "transition_probs requires a non-empty neighborhood"
    );
    let nearest = neighborhood.iter().map(|inc| inc.time).min().unwrap();
    debug_assert!(nearest >= t);
    let mut weights: Vec<f64> = neighborhood
        .iter()
        .map(|inc| (f64::from(nearest) - f64::from(inc.time)).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    weights
}

/// Walk rejection reasons; not errors, the sampler counts them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// The start node has no incident edges at or after its start time.
    NoIncidentEdges,
    /// The walk dead-ended before reaching `min_length` nodes.
    TooShort { len: usize },
}

/// Sample one temporal walk from `start`.
pub fn sample_walk(
    graph: &DynamicGraph,
    adjacency: &TemporalAdjacency,
    start: u32,
    cfg: &WalkConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Result<TemporalWalk, Rejection>, WalkError> {
    cfg.validate()?;
    if start as usize >= graph.node_count() {
        return Err(WalkError::UnknownNode {
            node: start,
            node_count: graph.node_count(),
        });
    }
    let start_time = match cfg.start_time_policy {
        StartTimePolicy::Earliest => 0,
        StartTimePolicy::UniformIncident => {
            let incident = adjacency.incident(start);
            if incident.is_empty() {
                return Ok(Err(Rejection::NoIncidentEdges));
            }
            incident[rng.gen_range(0..incident.len())].time
        }
    };

    let mut nodes = vec![start];
    let mut times = Vec::new();
    let mut current = start;
    let mut now = start_time;
    while nodes.len() < cfg.l_max {
        let neighborhood = adjacency.temporal_neighborhood(current, now);
        if neighborhood.is_empty() {
            break; // dead end
        }
        let chosen = sample_transition(neighborhood, now, rng);
        let inc = neighborhood[chosen];
        nodes.push(inc.neighbor);
        times.push(inc.time);
        current = inc.neighbor;
        now = inc.time;
    }
    if nodes.len() < cfg.min_length {
        let reason = if times.is_empty() {
            Rejection::NoIncidentEdges
        } else {
            Rejection::TooShort { len: nodes.len() }
        };
        return Ok(Err(reason));
    }
    Ok(Ok(TemporalWalk {
        graph_id: graph.graph_id().to_string(),
        nodes,
        times,
    }))
}

/// Draw one edge index from a temporal neighborhood under the time-decay
/// distribution.
pub fn sample_transition(neighborhood: &[Incidence], t: u32, rng: &mut ChaCha8Rng) -> usize {
    let probs = transition_probs(neighborhood, t);
    draw_index(&probs, rng)
}

fn draw_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

/// Attempt/rejection counters for one sampling run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SamplerStats {
    pub attempts: usize,
    pub emitted: usize,
    pub rejected_no_edges: usize,
    pub rejected_too_short: usize,
    /// Emitted walks per graph, in input order.
    pub per_graph: Vec<(String, usize)>,
    /// Graphs with zero edges, for which no walks were attempted.
    pub empty_graphs: Vec<String>,
}

/// Sample `walks_per_node` walks per node per graph. The RNG stream of each
/// walk is derived from `(seed, graph_id, node, walk index)`, so the result
/// is independent of scheduling and identical across runs.
pub fn sample_corpus(
    graphs: &[DynamicGraph],
    cfg: &WalkConfig,
) -> Result<(Vec<TemporalWalk>, SamplerStats), WalkError> {
    cfg.validate()?;
    let per_graph: Vec<(Vec<TemporalWalk>, SamplerStats)> = graphs
        .par_iter()
        .map(|graph| sample_one_graph(graph, cfg))
        .collect::<Result<_, _>>()?;

    let mut walks = Vec::new();
    let mut stats = SamplerStats::default();
    for ((graph_walks, mut graph_stats), graph) in per_graph.into_iter().zip(graphs) {
        stats.attempts += graph_stats.attempts;
        stats.emitted += graph_stats.emitted;
        stats.rejected_no_edges += graph_stats.rejected_no_edges;
        stats.rejected_too_short += graph_stats.rejected_too_short;
        stats.per_graph.push((graph.graph_id().to_string(), graph_walks.len()));
        stats.empty_graphs.append(&mut graph_stats.empty_graphs);
        walks.extend(graph_walks);
    }
    Ok((walks, stats))
}

fn sample_one_graph(
    graph: &DynamicGraph,
    cfg: &WalkConfig,
) -> Result<(Vec<TemporalWalk>, SamplerStats), WalkError> {
    let mut stats = SamplerStats::default();
    if graph.edges().is_empty() {
        stats.empty_graphs.push(graph.graph_id().to_string());
        return Ok((Vec::new(), stats));
    }
    let adjacency = TemporalAdjacency::from_graph(graph);
    let graph_key = hash_str(graph.graph_id());
    let mut walks = Vec::new();
    for node in 0..graph.node_count() as u32 {
        for walk_idx in 0..cfg.walks_per_node as u64 {
            let mut rng = stream_rng(cfg.seed, &[graph_key, u64::from(node), walk_idx]);
            stats.attempts += 1;
            match sample_walk(graph, &adjacency, node, cfg, &mut rng)? {
                Ok(walk) => {
                    stats.emitted += 1;
                    walks.push(walk);
                }
                Err(Rejection::NoIncidentEdges) => stats.rejected_no_edges += 1,
                Err(Rejection::TooShort { .. }) => stats.rejected_too_short += 1,
            }
        }
    }
    Ok((walks, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::TemporalEdge;

    fn graph(id: &str, nodes: usize, snapshots: usize, edges: &[(u32, u32, u32)]) -> DynamicGraph {
        let edges = edges
            .iter()
            .map(|&(u, v, t)| TemporalEdge { u, v, t })
            .collect();
        DynamicGraph::new(id, nodes, snapshots, edges).unwrap()
    }

    fn random_graph(id: &str, nodes: usize, snapshots: usize, density: f64, seed: u64) -> DynamicGraph {
        let mut rng = stream_rng(seed, &[hash_str(id)]);
        let mut edges = Vec::new();
        for t in 0..snapshots as u32 {
            for u in 0..nodes as u32 {
                for v in (u + 1)..nodes as u32 {
                    if rng.gen::<f64>() < density {
                        edges.push(TemporalEdge { u, v, t });
                    }
                }
            }
        }
        DynamicGraph::new(id, nodes, snapshots, edges).unwrap()
    }

    #[test]
    fn neighborhood_filters_by_time() {
        let g = graph("g", 4, 5, &[(0, 1, 1), (0, 2, 3), (1, 2, 2)]);
        let adj = TemporalAdjacency::from_graph(&g);
        let nbh = adj.temporal_neighborhood(0, 2);
        assert_eq!(nbh, &[Incidence { time: 3, neighbor: 2 }]);
        assert!(adj.temporal_neighborhood(3, 0).is_empty());
        assert_eq!(adj.temporal_neighborhood(0, 0).len(), 2);
    }

    #[test]
    fn neighborhood_matches_exhaustive_scan() {
        let g = random_graph("scan", 9, 6, 0.3, 42);
        let adj = TemporalAdjacency::from_graph(&g);
        for v in 0..9u32 {
            for t in 0..6u32 {
                let mut expected: Vec<Incidence> = g
                    .edges()
                    .iter()
                    .filter(|e| e.t >= t && (e.u == v || e.v == v))
                    .map(|e| Incidence {
                        time: e.t,
                        neighbor: if e.u == v { e.v } else { e.u },
                    })
                    .collect();
                expected.sort_unstable();
                assert_eq!(adj.temporal_neighborhood(v, t), expected.as_slice());
            }
        }
    }

    #[test]
    fn transition_probs_match_closed_form() {
        // Single edge: probability 1.
        let single = [Incidence { time: 4, neighbor: 1 }];
        assert_eq!(transition_probs(&single, 2), vec![1.0]);

        // Two edges at t' = t and t' = t + 1.
        let two = [
            Incidence { time: 5, neighbor: 1 },
            Incidence { time: 6, neighbor: 2 },
        ];
        let probs = transition_probs(&two, 5);
        let e1 = (-1.0f64).exp();
        assert!((probs[0] - 1.0 / (1.0 + e1)).abs() < 1e-12);
        assert!((probs[1] - e1 / (1.0 + e1)).abs() < 1e-12);
        assert!((probs[0] - 0.7311).abs() < 5e-5);
        assert!((probs[1] - 0.2689).abs() < 5e-5);

        // Equal timestamps: uniform.
        let equal = [
            Incidence { time: 3, neighbor: 1 },
            Incidence { time: 3, neighbor: 2 },
            Incidence { time: 3, neighbor: 4 },
        ];
        for p in transition_probs(&equal, 1) {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn probs_sum_to_one_under_large_gaps() {
        let nbh = [
            Incidence { time: 1000, neighbor: 1 },
            Incidence { time: 2000, neighbor: 2 },
        ];
        let probs = transition_probs(&nbh, 0);
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(probs[0] > 0.999);
    }

    #[test]
    fn path_graph_walks_are_valid_and_first_step_is_forced() {
        // The arrival edge stays admissible (t' >= t), so after 0 -> 1 the
        // walk may bounce back within the same snapshot; only the first step
        // is forced. Every outcome must still be a valid temporal walk.
        let g = graph("path", 3, 2, &[(0, 1, 0), (1, 2, 1)]);
        let adj = TemporalAdjacency::from_graph(&g);
        let cfg = WalkConfig { l_max: 5, ..WalkConfig::default() };
        let mut reached_end = 0;
        for s in 0..200u64 {
            let mut rng = stream_rng(s, &[0]);
            let walk = sample_walk(&g, &adj, 0, &cfg, &mut rng).unwrap().unwrap();
            assert_eq!(&walk.nodes[..2], &[0, 1]);
            assert_eq!(walk.times[0], 0);
            assert!(walk.check(&g, cfg.l_max));
            if walk.nodes.contains(&2) {
                reached_end += 1;
            }
        }
        // From node 1 at time 0 the decay weights are 1 (back) and e^-1
        // (forward), so forward moves happen often across 200 seeds.
        assert!(reached_end > 40, "only {reached_end} walks reached node 2");
    }

    #[test]
    fn once_ahead_in_time_earlier_edges_are_unreachable() {
        let g = graph("fwd", 3, 3, &[(0, 1, 2), (1, 2, 0)]);
        let adj = TemporalAdjacency::from_graph(&g);
        let cfg = WalkConfig { l_max: 8, ..WalkConfig::default() };
        for s in 0..50u64 {
            let mut rng = stream_rng(s, &[1]);
            let walk = sample_walk(&g, &adj, 0, &cfg, &mut rng).unwrap().unwrap();
            // After taking (0,1) at t=2 the (1,2) edge at t=0 is in the past,
            // so the walk can only oscillate on the t=2 edge.
            assert!(!walk.nodes.contains(&2));
            assert!(walk.times.iter().all(|&t| t == 2));
        }
    }

    #[test]
    fn isolated_start_is_rejected_not_an_error() {
        let g = graph("iso", 3, 1, &[(0, 1, 0)]);
        let adj = TemporalAdjacency::from_graph(&g);
        let cfg = WalkConfig::default();
        let mut rng = stream_rng(0, &[1]);
        let out = sample_walk(&g, &adj, 2, &cfg, &mut rng).unwrap();
        assert_eq!(out.unwrap_err(), Rejection::NoIncidentEdges);
    }

    #[test]
    fn uniform_incident_start_keeps_times_monotone() {
        let g = graph(
            "ui",
            4,
            4,
            &[(0, 1, 1), (1, 2, 0), (1, 3, 3), (2, 3, 2), (0, 3, 3)],
        );
        let adj = TemporalAdjacency::from_graph(&g);
        let cfg = WalkConfig {
            start_time_policy: StartTimePolicy::UniformIncident,
            l_max: 6,
            ..WalkConfig::default()
        };
        for s in 0..50u64 {
            let mut rng = stream_rng(s, &[7]);
            if let Ok(walk) = sample_walk(&g, &adj, 1, &cfg, &mut rng).unwrap() {
                assert!(walk.check(&g, cfg.l_max));
            }
        }
    }

    #[test]
    fn uniform_incident_start_times_are_uniform_over_incident_stamps() {
        // Node 0 has one edge at t=0 and one at t=9. Starting at t=9 forces
        // the first hop onto node 2; starting at t=0 picks node 1 with
        // weight 1 vs e^-9, so the first hop lands on node 2 with
        // probability ~0.5 iff start times are drawn uniformly.
        let g = graph("star", 3, 10, &[(0, 1, 0), (0, 2, 9)]);
        let adj = TemporalAdjacency::from_graph(&g);
        let cfg = WalkConfig {
            l_max: 2,
            start_time_policy: StartTimePolicy::UniformIncident,
            ..WalkConfig::default()
        };
        let n = 4000;
        let mut to_late = 0usize;
        for s in 0..n as u64 {
            let mut rng = stream_rng(s, &[13]);
            let walk = sample_walk(&g, &adj, 0, &cfg, &mut rng).unwrap().unwrap();
            if walk.nodes[1] == 2 {
                to_late += 1;
            }
        }
        let freq = to_late as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.025, "first-hop frequency {freq}");
    }

    #[test]
    fn corpus_is_deterministic_and_valid() {
        let graphs: Vec<DynamicGraph> = (0..4)
            .map(|i| random_graph(&format!("g{i}"), 12, 5, 0.25, 100 + i as u64))
            .collect();
        let cfg = WalkConfig {
            walks_per_node: 5,
            l_max: 10,
            seed: 9,
            ..WalkConfig::default()
        };
        let (walks_a, stats_a) = sample_corpus(&graphs, &cfg).unwrap();
        let (walks_b, stats_b) = sample_corpus(&graphs, &cfg).unwrap();
        assert_eq!(walks_a, walks_b);
        assert_eq!(stats_a, stats_b);
        assert_eq!(stats_a.attempts, 4 * 12 * 5);
        assert_eq!(stats_a.emitted + stats_a.rejected_no_edges + stats_a.rejected_too_short, stats_a.attempts);
        let by_id: std::collections::HashMap<&str, &DynamicGraph> =
            graphs.iter().map(|g| (g.graph_id(), g)).collect();
        for w in &walks_a {
            assert!(w.check(by_id[w.graph_id.as_str()], cfg.l_max));
        }
    }

    #[test]
    fn empty_graph_yields_zero_walks_with_warning() {
        let empty = DynamicGraph::new("empty", 3, 1, Vec::new()).unwrap();
        let cfg = WalkConfig::default();
        let (walks, stats) = sample_corpus(&[empty], &cfg).unwrap();
        assert!(walks.is_empty());
        assert_eq!(stats.empty_graphs, vec!["empty".to_string()]);
        assert_eq!(stats.attempts, 0);
    }

    #[test]
    fn empirical_frequencies_track_the_decay_distribution() {
        let nbh = [
            Incidence { time: 2, neighbor: 1 },
            Incidence { time: 3, neighbor: 2 },
            Incidence { time: 5, neighbor: 3 },
        ];
        let probs = transition_probs(&nbh, 2);
        let mut counts = [0usize; 3];
        let mut rng = stream_rng(31337, &[0]);
        let n = 100_000;
        for _ in 0..n {
            counts[draw_index(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(&probs) {
            let freq = *c as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * se,
                "freq {freq} vs p {p} (se {se})"
            );
        }
    }
}
