//! Network data model, synthetic generators, layered expansion, and file I/O.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Directed network with per-node capacities and per-edge activation
/// probabilities. Immutable once constructed.
///
/// Node ids are dense integers `0..n`. Every edge probability lies in
/// `[0, 1)`. Self-loops are only accepted on networks marked as layered
/// expansions, where an edge `(i, i)` stands for the tied transition
/// between consecutive copies of node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    capacities: Vec<u64>,
    layered: bool,
    out_edges: Vec<Vec<(usize, f64)>>,
    in_edges: Vec<Vec<(usize, f64)>>,
}

impl Network {
    pub fn new(
        capacities: Vec<u64>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        layered: bool,
    ) -> Result<Self> {
        let n = capacities.len();
        for (i, &c) in capacities.iter().enumerate() {
            if c < 1 {
                return Err(Error::parameter(format!("node {i}: capacity must be >= 1")));
            }
        }
        let mut out_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut in_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for (src, dst, p) in edges {
            if src >= n || dst >= n {
                return Err(Error::data(format!(
                    "edge ({src}, {dst}) references a node outside 0..{n}"
                )));
            }
            if src == dst && !layered {
                return Err(Error::data(format!(
                    "self-loop on node {src} is only allowed in layered networks"
                )));
            }
            if !(0.0..1.0).contains(&p) {
                return Err(Error::data(format!(
                    "edge ({src}, {dst}): probability {p} outside [0, 1)"
                )));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::data(format!("duplicate edge ({src}, {dst})")));
            }
            out_edges[src].push((dst, p));
            in_edges[dst].push((src, p));
        }
        for adj in out_edges.iter_mut().chain(in_edges.iter_mut()) {
            adj.sort_unstable_by_key(|&(v, _)| v);
        }
        Ok(Network {
            capacities,
            layered,
            out_edges,
            in_edges,
        })
    }

    pub fn node_count(&self) -> usize {
        self.capacities.len()
    }

    pub fn capacity(&self, node: usize) -> u64 {
        self.capacities[node]
    }

    pub fn capacities(&self) -> &[u64] {
        &self.capacities
    }

    pub fn is_layered(&self) -> bool {
        self.layered
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    /// Successors of `node` with edge probabilities, sorted by node id.
    pub fn out_neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.out_edges[node]
    }

    /// Predecessors of `node` with edge probabilities, sorted by node id.
    pub fn in_neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.in_edges[node]
    }

    pub fn edge_probability(&self, src: usize, dst: usize) -> Option<f64> {
        self.out_edges[src]
            .binary_search_by_key(&dst, |&(v, _)| v)
            .ok()
            .map(|k| self.out_edges[src][k].1)
    }

    /// All edges as (src, dst, probability), ordered by (src, dst).
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(|(src, adj)| adj.iter().map(move |&(dst, p)| (src, dst, p)))
    }

    /// True when every node is reachable from node 0 treating edges as
    /// undirected.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(w, _) in self.out_edges[v].iter().chain(self.in_edges[v].iter()) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = NetworkFile {
            layered: self.layered,
            nodes: self
                .capacities
                .iter()
                .enumerate()
                .map(|(id, &capacity)| NodeRecord {
                    id: id as u64,
                    capacity,
                })
                .collect(),
            edges: self
                .edges()
                .map(|(src, dst, p)| EdgeRecord {
                    src: src as u64,
                    dst: dst as u64,
                    p,
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::data(format!("serializing network: {e}")))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(&path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        let file: NetworkFile = serde_json::from_str(&text)
            .map_err(|e| Error::parse(&display, e.line(), e.to_string()))?;

        let n = file.nodes.len();
        let mut capacities = vec![0u64; n];
        let mut seen = vec![false; n];
        for node in &file.nodes {
            let id = node.id as usize;
            if node.id >= n as u64 || seen[id] {
                return Err(Error::data(format!(
                    "{display}: node ids must be a permutation of 0..{n}, offending id {}",
                    node.id
                )));
            }
            seen[id] = true;
            capacities[id] = node.capacity;
        }
        Network::new(
            capacities,
            file.edges
                .iter()
                .map(|e| (e.src as usize, e.dst as usize, e.p)),
            file.layered,
        )
        .map_err(|e| Error::data(format!("{display}: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    #[serde(default)]
    layered: bool,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: u64,
    capacity: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    src: u64,
    dst: u64,
    p: f64,
}

/// Scale-free network generator.
///
/// Growth model: nodes arrive one at a time and attach to
/// `edges_per_new_node` distinct existing nodes chosen with probability
/// proportional to current degree. Every undirected attachment becomes two
/// directed edges whose log-probabilities are sampled independently and
/// uniformly from `log_p_range` (natural log).
pub fn generate_preferential_attachment(
    n_nodes: usize,
    edges_per_new_node: usize,
    log_p_range: (f64, f64),
    capacity: u64,
    rng_seed: u64,
) -> Result<Network> {
    let m = edges_per_new_node;
    if m < 1 {
        return Err(Error::parameter("edges_per_new_node must be >= 1"));
    }
    if n_nodes < m + 1 {
        return Err(Error::parameter(format!(
            "n_nodes must be >= edges_per_new_node + 1 ({} < {})",
            n_nodes,
            m + 1
        )));
    }
    let (lo, hi) = log_p_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi && hi < 0.0) {
        return Err(Error::parameter(format!(
            "log_p_range must satisfy lo <= hi < 0, got ({lo}, {hi})"
        )));
    }
    if capacity < 1 {
        return Err(Error::parameter("capacity must be >= 1"));
    }

    let mut rng = stream_rng(rng_seed, 0);
    let log_p = Uniform::new_inclusive(lo, hi);

    // `repeated` holds each node id once per unit of degree.
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * m * n_nodes);
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * m * n_nodes);
    for new in m..n_nodes {
        let targets: BTreeSet<usize> = if new == m {
            (0..m).collect()
        } else {
            let mut t = BTreeSet::new();
            while t.len() < m {
                t.insert(repeated[rng.gen_range(0..repeated.len())]);
            }
            t
        };
        for &t in &targets {
            edges.push((new, t, log_p.sample(&mut rng).exp()));
            edges.push((t, new, log_p.sample(&mut rng).exp()));
            repeated.push(t);
            repeated.push(new);
        }
    }
    Network::new(vec![capacity; n_nodes], edges, false)
}

/// Time-indexed expansion of a base network over a finite horizon.
///
/// Node copies are indexed `(base id, layer t)` for `t in 0..=horizon`;
/// every base edge `(j, i)` induces one layered edge
/// `(j, t) -> (i, t+1)` per transition, tied to the base edge for
/// parameter sharing.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredNetwork {
    base: Network,
    horizon: usize,
}

/// One edge of a layered expansion, tagged with its base edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayeredEdge {
    pub src: (usize, usize),
    pub dst: (usize, usize),
    pub base_src: usize,
    pub base_dst: usize,
    pub probability: f64,
}

pub fn build_layered(base: &Network, horizon: usize) -> Result<LayeredNetwork> {
    if horizon < 1 {
        return Err(Error::parameter("horizon must be >= 1"));
    }
    Ok(LayeredNetwork {
        base: base.clone(),
        horizon,
    })
}

impl LayeredNetwork {
    pub fn base(&self) -> &Network {
        &self.base
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn copy_count(&self) -> usize {
        self.base.node_count() * (self.horizon + 1)
    }

    pub fn layered_edge_count(&self) -> usize {
        self.base.edge_count() * self.horizon
    }

    /// Dense id of the copy of `node` at `layer`.
    pub fn copy_index(&self, node: usize, layer: usize) -> usize {
        layer * self.base.node_count() + node
    }

    pub fn layered_edges(&self) -> impl Iterator<Item = LayeredEdge> + '_ {
        (0..self.horizon).flat_map(move |t| {
            self.base.edges().map(move |(j, i, p)| LayeredEdge {
                src: (j, t),
                dst: (i, t + 1),
                base_src: j,
                base_dst: i,
                probability: p,
            })
        })
    }

    /// Materialize the expansion as an ordinary network (marked layered).
    /// Copy `(node, layer)` gets id `layer * n + node`.
    pub fn to_network(&self) -> Network {
        let n = self.base.node_count();
        let capacities: Vec<u64> = (0..self.copy_count())
            .map(|id| self.base.capacity(id % n))
            .collect();
        let edges = self.layered_edges().map(|e| {
            (
                self.copy_index(e.base_src, e.src.1),
                self.copy_index(e.base_dst, e.dst.1),
                e.probability,
            )
        });
        Network::new(capacities, edges, true).expect("expansion of a valid base network is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node_net(p01: f64, p10: f64) -> Network {
        Network::new(vec![1, 1], vec![(0, 1, p01), (1, 0, p10)], false).unwrap()
    }

    #[test]
    fn rejects_bad_probability() {
        let err = Network::new(vec![1, 1], vec![(0, 1, 1.0)], false).unwrap_err();
        assert!(err.to_string().contains("[0, 1)"), "{err}");
    }

    #[test]
    fn rejects_dangling_edge() {
        assert!(Network::new(vec![1, 1], vec![(0, 2, 0.5)], false).is_err());
    }

    #[test]
    fn rejects_self_loop_unless_layered() {
        assert!(Network::new(vec![1], vec![(0, 0, 0.5)], false).is_err());
        assert!(Network::new(vec![1], vec![(0, 0, 0.5)], true).is_ok());
    }

    #[test]
    fn rejects_zero_capacity() {
        assert!(Network::new(vec![0], vec![], false).is_err());
    }

    #[test]
    fn degenerate_log_range_fixes_probability() {
        let net = generate_preferential_attachment(2, 1, (-1.0, -1.0), 1, 42).unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.edge_count(), 2);
        let expected = (-1.0f64).exp();
        for (_, _, p) in net.edges() {
            assert!((p - expected).abs() < 1e-15);
        }
        assert!(net.edge_probability(0, 1).is_some());
        assert!(net.edge_probability(1, 0).is_some());
    }

    #[test]
    fn generator_matches_reported_scale() {
        let net = generate_preferential_attachment(500, 2, (-8.0, -4.6), 1000, 7).unwrap();
        let e = net.edge_count();
        // ~2 * m * n directed edges
        assert!((1700..=2100).contains(&e), "directed edge count {e}");
        assert!(net.is_connected());
        for (_, _, p) in net.edges() {
            let lp = p.ln();
            assert!((-8.0..=-4.6).contains(&lp), "ln p = {lp}");
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_preferential_attachment(100, 2, (-8.0, -4.6), 10, 3).unwrap();
        let b = generate_preferential_attachment(100, 2, (-8.0, -4.6), 10, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_validates_sizes() {
        assert!(generate_preferential_attachment(2, 2, (-2.0, -1.0), 1, 0).is_err());
        assert!(generate_preferential_attachment(5, 0, (-2.0, -1.0), 1, 0).is_err());
        assert!(generate_preferential_attachment(5, 2, (-1.0, -2.0), 1, 0).is_err());
        assert!(generate_preferential_attachment(5, 2, (-1.0, 0.0), 1, 0).is_err());
    }

    #[test]
    fn layered_counts() {
        let base = two_node_net(0.3, 0.0);
        let layered = build_layered(&base, 3).unwrap();
        assert_eq!(layered.copy_count(), 8);
        assert_eq!(layered.layered_edge_count(), 6);
        assert_eq!(layered.layered_edges().count(), 6);

        // single-edge base: drop the reverse edge
        let base = Network::new(vec![1, 1], vec![(0, 1, 0.3)], false).unwrap();
        let layered = build_layered(&base, 3).unwrap();
        assert_eq!(layered.copy_count(), 8);
        assert_eq!(layered.layered_edge_count(), 3);
    }

    #[test]
    fn layered_self_loop_edges() {
        let base = Network::new(vec![1], vec![(0, 0, 0.4)], true).unwrap();
        let layered = build_layered(&base, 2).unwrap();
        let edges: Vec<_> = layered.layered_edges().collect();
        assert_eq!(edges.len(), 2);
        assert_eq!(edges[0].src, (0, 0));
        assert_eq!(edges[0].dst, (0, 1));
        assert_eq!(edges[1].src, (0, 1));
        assert_eq!(edges[1].dst, (0, 2));
        for e in edges {
            assert_eq!((e.base_src, e.base_dst), (0, 0));
        }
    }

    #[test]
    fn layered_fully_connected_with_self_loops() {
        let n = 10;
        let mut edges = Vec::new();
        for j in 0..n {
            for i in 0..n {
                edges.push((j, i, 0.01));
            }
        }
        let base = Network::new(vec![100; n], edges, true).unwrap();
        let layered = build_layered(&base, 32).unwrap();
        assert_eq!(layered.copy_count(), 330);
        assert_eq!(layered.layered_edge_count(), 3200);
    }

    #[test]
    fn materialized_expansion() {
        let base = two_node_net(0.3, 0.2);
        let layered = build_layered(&base, 2).unwrap();
        let net = layered.to_network();
        assert_eq!(net.node_count(), 6);
        assert_eq!(net.edge_count(), 4);
        assert!(net.is_layered());
        assert_eq!(net.edge_probability(0, 3), Some(0.3));
        assert_eq!(net.edge_probability(1, 2), Some(0.2));
        assert_eq!(net.edge_probability(2, 5), Some(0.3));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("codiff-graph-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.json");
        let net = generate_preferential_attachment(30, 2, (-8.0, -4.6), 50, 11).unwrap();
        net.save(&path).unwrap();
        let loaded = Network::load(&path).unwrap();
        assert_eq!(net, loaded);
    }

    #[test]
    fn load_rejects_invalid_files() {
        let dir = std::env::temp_dir().join("codiff-graph-test");
        std::fs::create_dir_all(&dir).unwrap();

        let p1 = dir.join("bad_p.json");
        std::fs::write(
            &p1,
            r#"{"layered":false,"nodes":[{"id":0,"capacity":1},{"id":1,"capacity":1}],"edges":[{"src":0,"dst":1,"p":1.0}]}"#,
        )
        .unwrap();
        assert!(Network::load(&p1).is_err());

        let p2 = dir.join("dangling.json");
        std::fs::write(
            &p2,
            r#"{"layered":false,"nodes":[{"id":0,"capacity":1}],"edges":[{"src":0,"dst":3,"p":0.5}]}"#,
        )
        .unwrap();
        assert!(Network::load(&p2).is_err());

        let p3 = dir.join("missing_field.json");
        std::fs::write(&p3, r#"{"layered":false,"nodes":[{"id":0}],"edges":[]}"#).unwrap();
        let err = Network::load(&p3).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }
}
