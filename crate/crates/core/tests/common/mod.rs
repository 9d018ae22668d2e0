//! Shared fixtures for the integration suites.

use codiff::graph::{generate_preferential_attachment, Network};
use codiff::infer::{assemble_node_problem, NodeProblem};
use codiff::rng::{derive_seed, stream_rng};
use codiff::simulate::{simulate_cascades, Cascade, SeedSpec};
use rand::Rng;

/// A small random network with probabilities large enough that cascades
/// have several active steps.
pub fn random_test_network(seed: u64) -> Network {
    let mut rng = stream_rng(seed, 0);
    let n = rng.gen_range(4..9);
    let cap = rng.gen_range(2..7);
    generate_preferential_attachment(n, 2.min(n - 1), (-3.0, -0.7), cap, derive_seed(seed, &[1]))
        .unwrap()
}

pub fn random_cascades(net: &Network, count: usize, seed: u64) -> Vec<Cascade> {
    let spec = SeedSpec::Random {
        fraction: 0.3,
        level_range: (1, 3),
    };
    simulate_cascades(net, &spec, count, seed).unwrap()
}

/// A realistic node problem: simulate on a random network and assemble the
/// problem of a node that has at least `min_dim` candidates and one
/// activation record.
pub fn random_problem(seed: u64, min_dim: usize) -> (Network, Vec<Cascade>, NodeProblem) {
    for attempt in 0..200 {
        let s = derive_seed(seed, &[attempt]);
        let net = random_test_network(s);
        let cascades = random_cascades(&net, 6, derive_seed(s, &[2]));
        for node in 0..net.node_count() {
            let problem = assemble_node_problem(&cascades, net.capacities(), node).unwrap();
            if problem.dimension() >= min_dim && !problem.records().is_empty() {
                return (net, cascades, problem);
            }
        }
    }
    panic!("no suitable random problem found for seed {seed}");
}

/// Interior point of the box, away from both 0 and the default lower bound.
pub fn random_interior(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 7);
    (0..dim).map(|_| -rng.gen_range(0.05..2.0)).collect()
}
