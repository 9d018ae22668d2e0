//! Per-node likelihood data extracted from cascades, and its objective.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::math::log1mexp;
use crate::simulate::Cascade;

/// One cascade in which the node activated (non-seed): its level and the
/// newly-active parents at the preceding step, as (candidate index, level).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationRecord {
    pub level: u64,
    pub parents: Vec<(usize, u64)>,
}

/// The likelihood data of one node: candidate parents, activation records,
/// and the accumulated failure coefficients from pre-activation steps and
/// cascades where the node never activated.
///
/// A node j is a candidate parent of i when it activated strictly before i
/// in some cascade, or activated at all in a cascade where i never did.
/// Every other j has its optimum at p_ji = 0 exactly and is excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeProblem {
    node: usize,
    capacity: u64,
    candidates: Vec<usize>,
    failure_linear: Vec<f64>,
    records: Vec<ActivationRecord>,
}

impl NodeProblem {
    pub fn node(&self) -> usize {
        self.node
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Candidate parent node ids, sorted ascending. Record parent indices
    /// refer to positions in this slice.
    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn dimension(&self) -> usize {
        self.candidates.len()
    }

    pub fn records(&self) -> &[ActivationRecord] {
        &self.records
    }

    /// Total linear coefficient per candidate: failure terms plus the
    /// per-record parent weights `n_j (N_i - n_i)`.
    pub fn linear_coefficients(&self) -> Vec<f64> {
        let mut lin = self.failure_linear.clone();
        for r in &self.records {
            let w = (self.capacity - r.level) as f64;
            for &(k, n_j) in &r.parents {
                lin[k] += n_j as f64 * w;
            }
        }
        lin
    }

    /// Objective value at `q_hat` with sparsity weight `rho`:
    ///
    /// sum over activation records of `n_i ln(1 - e^s) + (N_i - n_i) s`
    /// with `s = sum_j n_j q_hat_j`, plus the failure linear terms, minus
    /// `rho * sum_j e^{-q_hat_j}`. Binomial coefficients are constant in
    /// `q_hat` and excluded. Returns -inf whenever some record has `s >= 0`.
    pub fn objective(&self, q_hat: &[f64], rho: f64) -> Result<f64> {
        self.check_dimension(q_hat)?;
        Ok(self.objective_unchecked(q_hat, rho))
    }

    /// Gradient of the objective, or None where the objective is -inf.
    pub fn gradient(&self, q_hat: &[f64], rho: f64) -> Result<Option<Vec<f64>>> {
        self.check_dimension(q_hat)?;
        let mut grad = vec![0.0; q_hat.len()];
        let f = self.eval_unchecked(q_hat, rho, Some(&mut grad));
        Ok(if f.is_finite() { Some(grad) } else { None })
    }

    fn check_dimension(&self, q_hat: &[f64]) -> Result<()> {
        if q_hat.len() != self.dimension() {
            return Err(Error::parameter(format!(
                "q_hat has dimension {}, problem has {}",
                q_hat.len(),
                self.dimension()
            )));
        }
        Ok(())
    }

    pub(crate) fn objective_unchecked(&self, q_hat: &[f64], rho: f64) -> f64 {
        self.eval_unchecked(q_hat, rho, None)
    }

    pub(crate) fn eval_unchecked(
        &self,
        q_hat: &[f64],
        rho: f64,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let mut f = 0.0;
        if let Some(g) = grad.as_deref_mut() {
            for (k, slot) in g.iter_mut().enumerate() {
                *slot = self.failure_linear[k] + rho * (-q_hat[k]).exp();
            }
        }
        for (k, &q) in q_hat.iter().enumerate() {
            f += self.failure_linear[k] * q;
            if rho > 0.0 {
                f -= rho * (-q).exp();
            }
        }
        for r in &self.records {
            let s: f64 = r
                .parents
                .iter()
                .map(|&(k, n_j)| n_j as f64 * q_hat[k])
                .sum();
            if s >= 0.0 {
                return f64::NEG_INFINITY;
            }
            let n_i = r.level as f64;
            let rest = (self.capacity - r.level) as f64;
            f += n_i * log1mexp(s) + rest * s;
            if let Some(g) = grad.as_deref_mut() {
                // d/ds of n_i ln(1 - e^s) is -n_i / expm1(-s)
                let w = rest - n_i / (-s).exp_m1();
                for &(k, n_j) in &r.parents {
                    g[k] += n_j as f64 * w;
                }
            }
        }
        f
    }

    /// Restriction to the candidates with `keep[k]` set. Records whose
    /// parent set becomes empty are dropped: the restricted model assigns
    /// those activations probability zero, so they are conditioned away
    /// rather than poisoning the refit.
    pub fn restrict(&self, keep: &[bool]) -> NodeProblem {
        assert_eq!(keep.len(), self.dimension());
        let mut new_index = vec![usize::MAX; self.dimension()];
        let mut candidates = Vec::new();
        let mut failure_linear = Vec::new();
        for (k, &kept) in keep.iter().enumerate() {
            if kept {
                new_index[k] = candidates.len();
                candidates.push(self.candidates[k]);
                failure_linear.push(self.failure_linear[k]);
            }
        }
        let records = self
            .records
            .iter()
            .filter_map(|r| {
                let parents: Vec<(usize, u64)> = r
                    .parents
                    .iter()
                    .filter(|&&(k, _)| keep[k])
                    .map(|&(k, n_j)| (new_index[k], n_j))
                    .collect();
                (!parents.is_empty()).then_some(ActivationRecord {
                    level: r.level,
                    parents,
                })
            })
            .collect();
        NodeProblem {
            node: self.node,
            capacity: self.capacity,
            candidates,
            failure_linear,
            records,
        }
    }
}

/// Extract the likelihood data of `node` from a cascade set.
///
/// Seeds of a cascade contribute only as parents; a cascade in which the
/// node is itself a seed contributes nothing to the node's own problem.
pub fn assemble_node_problem(
    cascades: &[Cascade],
    capacities: &[u64],
    node: usize,
) -> Result<NodeProblem> {
    if node >= capacities.len() {
        return Err(Error::parameter(format!(
            "node {node} outside 0..{}",
            capacities.len()
        )));
    }
    let capacity = capacities[node];

    let mut candidate_set: BTreeSet<usize> = BTreeSet::new();
    for (c_idx, cascade) in cascades.iter().enumerate() {
        cascade
            .check_against(capacities)
            .map_err(|e| Error::data(format!("cascade {c_idx}: {e}")))?;
        match cascade.activation(node) {
            Some((0, _)) => {}
            Some((tau, _)) => {
                for e in cascade.events() {
                    if e.time < tau {
                        candidate_set.insert(e.node);
                    }
                }
            }
            None => {
                for e in cascade.events() {
                    candidate_set.insert(e.node);
                }
            }
        }
    }
    let candidates: Vec<usize> = candidate_set.into_iter().collect();
    let index: HashMap<usize, usize> = candidates
        .iter()
        .enumerate()
        .map(|(k, &id)| (id, k))
        .collect();

    let mut failure_linear = vec![0.0; candidates.len()];
    let mut records = Vec::new();
    for (c_idx, cascade) in cascades.iter().enumerate() {
        match cascade.activation(node) {
            Some((0, _)) => {}
            Some((tau, n_i)) => {
                let mut parents = Vec::new();
                for e in cascade.events() {
                    if e.time + 1 == tau {
                        parents.push((index[&e.node], e.level));
                    } else if e.time + 1 < tau {
                        failure_linear[index[&e.node]] += e.level as f64 * capacity as f64;
                    }
                }
                if parents.is_empty() {
                    return Err(Error::data(format!(
                        "cascade {c_idx}: node {node} activates at time {tau} with no newly \
                         active nodes at time {}",
                        tau - 1
                    )));
                }
                records.push(ActivationRecord {
                    level: n_i,
                    parents,
                });
            }
            None => {
                for e in cascade.events() {
                    failure_linear[index[&e.node]] += e.level as f64 * capacity as f64;
                }
            }
        }
    }
    Ok(NodeProblem {
        node,
        capacity,
        candidates,
        failure_linear,
        records,
    })
}

/// Extract the tied-parameter problem of destination `node` from per-layer
/// level vectors over a base network. One variable per base edge; every
/// layer transition contributes either an activation record (next level
/// >= 1) or failure terms (next level 0) on the shared variables.
pub fn assemble_tied_node_problem(
    observations: &[Vec<u64>],
    capacities: &[u64],
    node: usize,
) -> Result<NodeProblem> {
    let n = capacities.len();
    if node >= n {
        return Err(Error::parameter(format!("node {node} outside 0..{n}")));
    }
    if observations.len() < 2 {
        return Err(Error::parameter(
            "tied-parameter learning needs at least two layers",
        ));
    }
    for (t, layer) in observations.iter().enumerate() {
        if layer.len() != n {
            return Err(Error::data(format!(
                "layer {t} has {} entries, expected {n}",
                layer.len()
            )));
        }
        for (j, &lvl) in layer.iter().enumerate() {
            if lvl > capacities[j] {
                return Err(Error::data(format!(
                    "layer {t}: node {j} level {lvl} exceeds capacity {}",
                    capacities[j]
                )));
            }
        }
    }
    let capacity = capacities[node];
    let transitions = observations.len() - 1;

    let mut candidate_set: BTreeSet<usize> = BTreeSet::new();
    for layer in &observations[..transitions] {
        for (j, &lvl) in layer.iter().enumerate() {
            if lvl >= 1 {
                candidate_set.insert(j);
            }
        }
    }
    let candidates: Vec<usize> = candidate_set.into_iter().collect();
    let index: HashMap<usize, usize> = candidates
        .iter()
        .enumerate()
        .map(|(k, &id)| (id, k))
        .collect();

    let mut failure_linear = vec![0.0; candidates.len()];
    let mut records = Vec::new();
    for t in 0..transitions {
        let parents: Vec<(usize, u64)> = observations[t]
            .iter()
            .enumerate()
            .filter(|&(_, &lvl)| lvl >= 1)
            .map(|(j, &lvl)| (index[&j], lvl))
            .collect();
        let next_level = observations[t + 1][node];
        if next_level >= 1 {
            if parents.is_empty() {
                return Err(Error::data(format!(
                    "layer {}: node {node} has level {next_level} but layer {t} is empty",
                    t + 1
                )));
            }
            records.push(ActivationRecord {
                level: next_level,
                parents,
            });
        } else {
            for &(k, n_j) in &parents {
                failure_linear[k] += n_j as f64 * capacity as f64;
            }
        }
    }
    Ok(NodeProblem {
        node,
        capacity,
        candidates,
        failure_linear,
        records,
    })
}
