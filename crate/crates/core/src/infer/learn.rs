//! Two-phase structure discovery and tied-parameter layered learning.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::simulate::Cascade;

use super::problem::{assemble_node_problem, assemble_tied_node_problem};
use super::solver::{solve_node, SolverConfig, SolverState};

/// Estimated activation-probability matrix plus the detected edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredNetwork {
    node_count: usize,
    probabilities: Vec<f64>,
    edges: BTreeSet<(usize, usize)>,
}

impl InferredNetwork {
    pub fn empty(node_count: usize) -> Self {
        InferredNetwork {
            node_count,
            probabilities: vec![0.0; node_count * node_count],
            edges: BTreeSet::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Estimated p for the directed pair (src, dst); 0 where undetected.
    pub fn probability(&self, src: usize, dst: usize) -> f64 {
        self.probabilities[src * self.node_count + dst]
    }

    fn set_probability(&mut self, src: usize, dst: usize, p: f64) {
        self.probabilities[src * self.node_count + dst] = p;
    }

    /// The detected support, ordered by (src, dst).
    pub fn detected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn detected_edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Directed pairs whose estimate meets `threshold`.
    pub fn edges_at_threshold(&self, threshold: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for src in 0..self.node_count {
            for dst in 0..self.node_count {
                if self.probability(src, dst) >= threshold {
                    out.push((src, dst));
                }
            }
        }
        out
    }

    /// View a known network as an inferred one (for evaluation tooling).
    pub fn from_network(net: &Network) -> Self {
        let mut inferred = InferredNetwork::empty(net.node_count());
        for (src, dst, p) in net.edges() {
            inferred.set_probability(src, dst, p);
            if p > 0.0 {
                inferred.edges.insert((src, dst));
            }
        }
        inferred
    }

    /// Materialize as a network carrying the detected edges with their
    /// estimates. Marked layered when the support contains self-loops.
    pub fn to_network(&self, capacities: &[u64]) -> Result<Network> {
        if capacities.len() != self.node_count {
            return Err(Error::parameter(format!(
                "capacity vector has length {}, inferred network has {} nodes",
                capacities.len(),
                self.node_count
            )));
        }
        let edges: Vec<(usize, usize, f64)> = self
            .edges
            .iter()
            .map(|&(src, dst)| (src, dst, self.probability(src, dst)))
            .filter(|&(_, _, p)| p > 0.0)
            .collect();
        let layered = edges.iter().any(|&(src, dst, _)| src == dst);
        Network::new(capacities.to_vec(), edges, layered)
    }
}

/// Per-node solve diagnostics emitted alongside a learned network.
#[derive(Debug, Clone)]
pub struct NodeDiagnostics {
    pub node: usize,
    pub objective: f64,
    /// Total accepted iterations across both phases.
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub candidates: usize,
    pub detected: usize,
}

fn diagnostics(
    node: usize,
    candidates: usize,
    detected: usize,
    s: &SolverState,
    extra_iters: usize,
) -> NodeDiagnostics {
    NodeDiagnostics {
        node,
        objective: s.objective,
        iterations: s.iterations + extra_iters,
        gradient_norm: s.gradient_norm,
        converged: s.converged,
        candidates,
        detected,
    }
}

/// Learn network structure and parameters from cascades.
///
/// Phase 1 solves every node problem with the configured sparsity weight
/// and detects the parents whose estimate meets `edge_threshold`; phase 2
/// re-solves each node penalty-free on the detected support. The result
/// carries phase-2 probabilities on the support and zero elsewhere.
pub fn learn_structure(
    cascades: &[Cascade],
    capacities: &[u64],
    config: &SolverConfig,
) -> Result<InferredNetwork> {
    learn_structure_detailed(cascades, capacities, config).map(|(net, _)| net)
}

pub fn learn_structure_detailed(
    cascades: &[Cascade],
    capacities: &[u64],
    config: &SolverConfig,
) -> Result<(InferredNetwork, Vec<NodeDiagnostics>)> {
    config.validate()?;
    if cascades.is_empty() {
        return Err(Error::parameter("at least one cascade is required"));
    }
    let n = capacities.len();
    let per_node: Vec<(Vec<(usize, f64)>, NodeDiagnostics)> = (0..n)
        .into_par_iter()
        .map(|node| {
            let problem = assemble_node_problem(cascades, capacities, node)?;
            let phase1 = solve_node(&problem, config)
                .map_err(|e| Error::solver(format!("node {node}, phase 1: {e}")))?;
            let keep: Vec<bool> = phase1
                .probabilities()
                .iter()
                .map(|&p| p >= config.edge_threshold)
                .collect();
            let detected = keep.iter().filter(|&&k| k).count();
            if detected == 0 {
                let diag = diagnostics(node, problem.dimension(), 0, &phase1, 0);
                return Ok((Vec::new(), diag));
            }
            let restricted = problem.restrict(&keep);
            let refit_config = SolverConfig {
                rho: 0.0,
                ..config.clone()
            };
            let phase2 = solve_node(&restricted, &refit_config)
                .map_err(|e| Error::solver(format!("node {node}, phase 2: {e}")))?;
            let edges: Vec<(usize, f64)> = restricted
                .candidates()
                .iter()
                .copied()
                .zip(phase2.probabilities())
                .collect();
            let diag = diagnostics(
                node,
                problem.dimension(),
                detected,
                &phase2,
                phase1.iterations,
            );
            Ok((edges, diag))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut inferred = InferredNetwork::empty(n);
    let mut diags = Vec::with_capacity(n);
    for (node, (edges, diag)) in per_node.into_iter().enumerate() {
        for (src, p) in edges {
            inferred.set_probability(src, node, p);
            inferred.edges.insert((src, node));
        }
        diags.push(diag);
    }
    Ok((inferred, diags))
}

/// Learn tied base-edge parameters from per-layer level vectors of a
/// layered process. One variable per base edge, shared across all layer
/// transitions; solved penalty-free or with the configured `rho` in a
/// single phase per destination node.
pub fn learn_tied_layered(
    observations: &[Vec<u64>],
    capacities: &[u64],
    config: &SolverConfig,
) -> Result<InferredNetwork> {
    learn_tied_layered_detailed(observations, capacities, config).map(|(net, _)| net)
}

pub fn learn_tied_layered_detailed(
    observations: &[Vec<u64>],
    capacities: &[u64],
    config: &SolverConfig,
) -> Result<(InferredNetwork, Vec<NodeDiagnostics>)> {
    config.validate()?;
    let n = capacities.len();
    let per_node: Vec<(Vec<(usize, f64)>, NodeDiagnostics)> = (0..n)
        .into_par_iter()
        .map(|node| {
            let problem = assemble_tied_node_problem(observations, capacities, node)?;
            let state = solve_node(&problem, config)
                .map_err(|e| Error::solver(format!("node {node}: {e}")))?;
            let detected = state
                .probabilities()
                .iter()
                .filter(|&&p| p >= config.edge_threshold)
                .count();
            let edges: Vec<(usize, f64)> = problem
                .candidates()
                .iter()
                .copied()
                .zip(state.probabilities())
                .collect();
            let diag = diagnostics(node, problem.dimension(), detected, &state, 0);
            Ok((edges, diag))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut inferred = InferredNetwork::empty(n);
    let mut diags = Vec::with_capacity(n);
    for (node, (edges, diag)) in per_node.into_iter().enumerate() {
        for (src, p) in edges {
            inferred.set_probability(src, node, p);
            if p >= config.edge_threshold {
                inferred.edges.insert((src, node));
            }
        }
        diags.push(diag);
    }
    Ok((inferred, diags))
}
