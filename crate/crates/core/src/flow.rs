//! Collective flow diffusion: multinomial turn-probability estimation from
//! complete flow tables, and EM over the latent integer tables when only
//! the inflow/outflow margins are observed.
//!
//! The E-step enumerates the feasible tables exactly (with a state-space
//! cap), which keeps the fit testable against grid-search oracles at desk
//! scale. A sampler could replace the enumeration behind the same
//! interface for larger instances.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ln_factorial, logsumexp};

pub const DEFAULT_TABLE_CAP: usize = 1_000_000;

/// The bipartite routing structure: outflow nodes, inflow nodes, and the
/// inflow neighbors each outflow node can send to.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAdjacency {
    outflow_ids: Vec<u32>,
    inflow_ids: Vec<u32>,
    neighbors: Vec<Vec<usize>>,
}

impl FlowAdjacency {
    /// `neighbors[o]` lists inflow indices reachable from outflow index `o`.
    pub fn new(
        outflow_ids: Vec<u32>,
        inflow_ids: Vec<u32>,
        neighbors: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if neighbors.len() != outflow_ids.len() {
            return Err(Error::parameter(format!(
                "adjacency has {} rows for {} outflow nodes",
                neighbors.len(),
                outflow_ids.len()
            )));
        }
        let mut sorted_out = outflow_ids.clone();
        sorted_out.sort_unstable();
        sorted_out.dedup();
        if sorted_out.len() != outflow_ids.len() {
            return Err(Error::parameter("duplicate outflow ids"));
        }
        let mut sorted_in = inflow_ids.clone();
        sorted_in.sort_unstable();
        sorted_in.dedup();
        if sorted_in.len() != inflow_ids.len() {
            return Err(Error::parameter("duplicate inflow ids"));
        }
        let mut neighbors = neighbors;
        for row in &mut neighbors {
            row.sort_unstable();
            let before = row.len();
            row.dedup();
            if row.len() != before {
                return Err(Error::parameter("duplicate adjacency entry"));
            }
            if row.iter().any(|&i| i >= inflow_ids.len()) {
                return Err(Error::parameter("adjacency references unknown inflow node"));
            }
        }
        Ok(FlowAdjacency {
            outflow_ids,
            inflow_ids,
            neighbors,
        })
    }

    /// Full bipartite adjacency with ids `0..n_out` and `0..n_in`.
    pub fn complete(n_out: usize, n_in: usize) -> Self {
        FlowAdjacency {
            outflow_ids: (0..n_out as u32).collect(),
            inflow_ids: (0..n_in as u32).collect(),
            neighbors: vec![(0..n_in).collect(); n_out],
        }
    }

    pub fn outflow_count(&self) -> usize {
        self.outflow_ids.len()
    }

    pub fn inflow_count(&self) -> usize {
        self.inflow_ids.len()
    }

    pub fn outflow_ids(&self) -> &[u32] {
        &self.outflow_ids
    }

    pub fn inflow_ids(&self) -> &[u32] {
        &self.inflow_ids
    }

    /// Inflow indices adjacent to outflow index `o`, sorted.
    pub fn neighbors(&self, o: usize) -> &[usize] {
        &self.neighbors[o]
    }
}

/// One observation: total outflow counts and total inflow counts over the
/// shared adjacency. The pairwise flows are latent.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowInstance {
    adjacency: FlowAdjacency,
    outflow_counts: Vec<u64>,
    inflow_counts: Vec<u64>,
}

impl FlowInstance {
    pub fn new(
        adjacency: FlowAdjacency,
        outflow_counts: Vec<u64>,
        inflow_counts: Vec<u64>,
    ) -> Result<Self> {
        if outflow_counts.len() != adjacency.outflow_count() {
            return Err(Error::parameter(format!(
                "{} outflow counts for {} outflow nodes",
                outflow_counts.len(),
                adjacency.outflow_count()
            )));
        }
        if inflow_counts.len() != adjacency.inflow_count() {
            return Err(Error::parameter(format!(
                "{} inflow counts for {} inflow nodes",
                inflow_counts.len(),
                adjacency.inflow_count()
            )));
        }
        Ok(FlowInstance {
            adjacency,
            outflow_counts,
            inflow_counts,
        })
    }

    pub fn adjacency(&self) -> &FlowAdjacency {
        &self.adjacency
    }

    pub fn outflow_counts(&self) -> &[u64] {
        &self.outflow_counts
    }

    pub fn inflow_counts(&self) -> &[u64] {
        &self.inflow_counts
    }

    pub fn total_outflow(&self) -> u64 {
        self.outflow_counts.iter().sum()
    }

    pub fn total_inflow(&self) -> u64 {
        self.inflow_counts.iter().sum()
    }

    /// Total flow conservation; no feasible table exists without it.
    pub fn is_balanced(&self) -> bool {
        self.total_outflow() == self.total_inflow()
    }
}

/// Integer pairwise flows, aligned with the adjacency neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTable {
    adjacency: FlowAdjacency,
    counts: Vec<Vec<u64>>,
}

impl FlowTable {
    pub fn new(adjacency: FlowAdjacency, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != adjacency.outflow_count()
            || counts
                .iter()
                .zip(&adjacency.neighbors)
                .any(|(row, nb)| row.len() != nb.len())
        {
            return Err(Error::parameter("table shape does not match adjacency"));
        }
        Ok(FlowTable { adjacency, counts })
    }

    pub fn adjacency(&self) -> &FlowAdjacency {
        &self.adjacency
    }

    /// Counts for outflow index `o`, aligned with `adjacency.neighbors(o)`.
    pub fn row(&self, o: usize) -> &[u64] {
        &self.counts[o]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.adjacency.inflow_count()];
        for (o, row) in self.counts.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                sums[self.adjacency.neighbors[o][k]] += c;
            }
        }
        sums
    }
}

/// Row-stochastic turn probabilities over the adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnProbabilities {
    adjacency: FlowAdjacency,
    probabilities: Vec<Vec<f64>>,
}

impl TurnProbabilities {
    pub fn new(adjacency: FlowAdjacency, probabilities: Vec<Vec<f64>>) -> Result<Self> {
        if probabilities.len() != adjacency.outflow_count()
            || probabilities
                .iter()
                .zip(&adjacency.neighbors)
                .any(|(row, nb)| row.len() != nb.len())
        {
            return Err(Error::parameter(
                "probability shape does not match adjacency",
            ));
        }
        for (o, row) in probabilities.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::parameter(format!(
                    "outflow {o}: probabilities outside [0, 1]"
                )));
            }
            if !row.is_empty() {
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::parameter(format!(
                        "outflow {o}: probabilities sum to {total}, expected 1"
                    )));
                }
            }
        }
        Ok(TurnProbabilities {
            adjacency,
            probabilities,
        })
    }

    pub fn uniform(adjacency: FlowAdjacency) -> Self {
        let probabilities = adjacency
            .neighbors
            .iter()
            .map(|nb| vec![1.0 / nb.len() as f64; nb.len()])
            .collect();
        TurnProbabilities {
            adjacency,
            probabilities,
        }
    }

    pub fn adjacency(&self) -> &FlowAdjacency {
        &self.adjacency
    }

    /// Probabilities for outflow index `o`, aligned with the neighbor list.
    pub fn row(&self, o: usize) -> &[f64] {
        &self.probabilities[o]
    }

    /// Probability of the pair (outflow index, inflow index); 0 when not
    /// adjacent.
    pub fn probability(&self, o: usize, i: usize) -> f64 {
        self.adjacency.neighbors[o]
            .binary_search(&i)
            .map(|k| self.probabilities[o][k])
            .unwrap_or(0.0)
    }
}

/// Complete-data log-likelihood of a table: a product of one multinomial
/// per outflow node, coefficients included. Returns -inf when the table
/// violates the row or column margins of the instance, or routes flow
/// through a zero-probability pair.
pub fn flow_log_likelihood(
    instance: &FlowInstance,
    table: &FlowTable,
    p: &TurnProbabilities,
) -> Result<f64> {
    if table.adjacency != instance.adjacency || p.adjacency != instance.adjacency {
        return Err(Error::parameter(
            "instance, table and probabilities must share one adjacency",
        ));
    }
    if table.row_sums() != instance.outflow_counts || table.column_sums() != instance.inflow_counts
    {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(table_log_likelihood(table, p))
}

/// Log-likelihood of a table under `p` without margin checks; the caller
/// guarantees the table came from the instance's feasible set.
fn table_log_likelihood(table: &FlowTable, p: &TurnProbabilities) -> f64 {
    let mut ll = 0.0;
    for (o, row) in table.counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        ll += ln_factorial(total);
        for (k, &c) in row.iter().enumerate() {
            ll -= ln_factorial(c);
            if c > 0 {
                let p_ok = p.probabilities[o][k];
                if p_ok <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                ll += c as f64 * p_ok.ln();
            }
        }
    }
    ll
}

/// Maximum-likelihood turn probabilities from complete tables:
/// `p_oi = sum_c n_c(o, i) / sum_c n_c(o)`. Outflow nodes with zero total
/// count get the uniform distribution over their neighbors.
pub fn complete_data_mle(tables: &[FlowTable]) -> Result<TurnProbabilities> {
    let first = tables
        .first()
        .ok_or_else(|| Error::parameter("at least one table is required"))?;
    let adjacency = first.adjacency.clone();
    for t in tables {
        if t.adjacency != adjacency {
            return Err(Error::parameter("tables must share one adjacency"));
        }
    }
    let mut totals: Vec<Vec<f64>> = adjacency
        .neighbors
        .iter()
        .map(|nb| vec![0.0; nb.len()])
        .collect();
    for t in tables {
        for (o, row) in t.counts.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                totals[o][k] += c as f64;
            }
        }
    }
    let probabilities = normalize_rows(totals);
    Ok(TurnProbabilities {
        adjacency,
        probabilities,
    })
}

fn normalize_rows(mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for row in &mut rows {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for v in row.iter_mut() {
                *v /= total;
            }
        } else {
            let k = row.len();
            for v in row.iter_mut() {
                *v = 1.0 / k as f64;
            }
        }
    }
    rows
}

/// Enumerate every non-negative integer table satisfying the instance's
/// row and column margins, depth-first with residual-bound pruning.
/// Unbalanced or adjacency-infeasible margins yield an empty list; blowing
/// through the table cap is a capacity error.
pub fn enumerate_flow_tables(instance: &FlowInstance) -> Result<Vec<FlowTable>> {
    enumerate_flow_tables_capped(instance, DEFAULT_TABLE_CAP)
}

pub fn enumerate_flow_tables_capped(
    instance: &FlowInstance,
    table_cap: usize,
) -> Result<Vec<FlowTable>> {
    if !instance.is_balanced() {
        return Ok(Vec::new());
    }
    let adjacency = &instance.adjacency;
    let n_out = adjacency.outflow_count();
    let n_in = adjacency.inflow_count();

    // suffix_avail[o][i]: outflow still assignable to column i by rows o..
    let mut suffix_avail = vec![vec![0u64; n_in]; n_out + 1];
    for o in (0..n_out).rev() {
        suffix_avail[o] = suffix_avail[o + 1].clone();
        for &i in adjacency.neighbors(o) {
            suffix_avail[o][i] += instance.outflow_counts[o];
        }
    }

    let mut state = Enumerator {
        instance,
        suffix_avail,
        col_rem: instance.inflow_counts.clone(),
        rows: adjacency
            .neighbors
            .iter()
            .map(|nb| vec![0u64; nb.len()])
            .collect(),
        tables: Vec::new(),
        table_cap,
        work: 0,
        work_cap: table_cap.saturating_mul(64),
    };
    state.descend_row(0)?;
    Ok(state.tables)
}

struct Enumerator<'a> {
    instance: &'a FlowInstance,
    suffix_avail: Vec<Vec<u64>>,
    col_rem: Vec<u64>,
    rows: Vec<Vec<u64>>,
    tables: Vec<FlowTable>,
    table_cap: usize,
    work: usize,
    work_cap: usize,
}

impl Enumerator<'_> {
    fn capacity_error(&self) -> Error {
        Error::Capacity(format!(
            "flow table enumeration exceeds the cap of {} tables; shrink the instance",
            self.table_cap
        ))
    }

    fn descend_row(&mut self, o: usize) -> Result<()> {
        // remaining demand must be coverable by the remaining rows
        for i in 0..self.col_rem.len() {
            if self.col_rem[i] > self.suffix_avail[o][i] {
                return Ok(());
            }
        }
        if o == self.instance.adjacency.outflow_count() {
            if self.tables.len() >= self.table_cap {
                return Err(self.capacity_error());
            }
            self.tables.push(FlowTable {
                adjacency: self.instance.adjacency.clone(),
                counts: self.rows.clone(),
            });
            return Ok(());
        }
        let count = self.instance.outflow_counts[o];
        if self.instance.adjacency.neighbors(o).is_empty() {
            return if count == 0 {
                self.descend_row(o + 1)
            } else {
                Ok(())
            };
        }
        self.descend_cell(o, 0, count)
    }

    fn descend_cell(&mut self, o: usize, k: usize, remaining: u64) -> Result<()> {
        self.work += 1;
        if self.work > self.work_cap {
            return Err(self.capacity_error());
        }
        let nb = &self.instance.adjacency.neighbors[o];
        let i = nb[k];
        if k == nb.len() - 1 {
            if remaining <= self.col_rem[i] {
                self.col_rem[i] -= remaining;
                self.rows[o][k] = remaining;
                self.descend_row(o + 1)?;
                self.col_rem[i] += remaining;
            }
            return Ok(());
        }
        let tail_cap: u64 = nb[k + 1..].iter().map(|&j| self.col_rem[j]).sum();
        let lo = remaining.saturating_sub(tail_cap);
        let hi = remaining.min(self.col_rem[i]);
        for v in lo..=hi {
            self.col_rem[i] -= v;
            self.rows[o][k] = v;
            self.descend_cell(o, k + 1, remaining - v)?;
            self.col_rem[i] += v;
        }
        Ok(())
    }
}

/// EM settings for the margins-only fit.
#[derive(Debug, Clone)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop when the observed-data log-likelihood improves by less than this.
    pub tolerance: f64,
    pub table_cap: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 500,
            tolerance: 1e-8,
            table_cap: DEFAULT_TABLE_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmDiagnostics {
    pub iterations: usize,
    /// Observed-data log-likelihood at the returned parameters.
    pub log_likelihood: f64,
    pub converged: bool,
    /// Observed-data log-likelihood after each E-step.
    pub trace: Vec<f64>,
}

/// Fit turn probabilities from margins-only instances by EM with an exact
/// E-step over the enumerated feasible tables. Starts from the uniform
/// distribution; the observed-data log-likelihood is non-decreasing across
/// iterations. EM converges to a stationary point, which for multimodal
/// likelihoods may be a local optimum.
pub fn em_fit(instances: &[FlowInstance], config: &EmConfig) -> Result<TurnProbabilities> {
    em_fit_detailed(instances, config).map(|(p, _)| p)
}

pub fn em_fit_detailed(
    instances: &[FlowInstance],
    config: &EmConfig,
) -> Result<(TurnProbabilities, EmDiagnostics)> {
    let first = instances
        .first()
        .ok_or_else(|| Error::parameter("at least one instance is required"))?;
    let adjacency = first.adjacency.clone();
    for (idx, inst) in instances.iter().enumerate() {
        if inst.adjacency != adjacency {
            return Err(Error::parameter(format!(
                "instance {idx} does not share the common adjacency"
            )));
        }
        if !inst.is_balanced() {
            return Err(Error::data(format!(
                "instance {idx}: total outflow {} != total inflow {}",
                inst.total_outflow(),
                inst.total_inflow()
            )));
        }
    }
    let all_tables: Vec<Vec<FlowTable>> = instances
        .iter()
        .enumerate()
        .map(|(idx, inst)| {
            let tables = enumerate_flow_tables_capped(inst, config.table_cap)?;
            if tables.is_empty() {
                return Err(Error::data(format!(
                    "instance {idx}: no feasible flow table matches the margins"
                )));
            }
            Ok(tables)
        })
        .collect::<Result<_>>()?;

    let mut p = TurnProbabilities::uniform(adjacency.clone());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        // E-step: posterior over tables per instance, expected counts
        let (expected, obs_ll) = all_tables
            .par_iter()
            .map(|tables| {
                let lls: Vec<f64> = tables.iter().map(|t| table_log_likelihood(t, &p)).collect();
                let norm = logsumexp(&lls);
                let mut local: Vec<Vec<f64>> = adjacency
                    .neighbors
                    .iter()
                    .map(|nb| vec![0.0; nb.len()])
                    .collect();
                for (t, &ll) in tables.iter().zip(&lls) {
                    let w = (ll - norm).exp();
                    if w > 0.0 {
                        for (o, row) in t.counts.iter().enumerate() {
                            for (k, &c) in row.iter().enumerate() {
                                local[o][k] += w * c as f64;
                            }
                        }
                    }
                }
                (local, norm)
            })
            .reduce(
                || {
                    (
                        adjacency
                            .neighbors
                            .iter()
                            .map(|nb| vec![0.0; nb.len()])
                            .collect::<Vec<_>>(),
                        0.0,
                    )
                },
                |(mut acc, ll_a), (local, ll_b)| {
                    for (a, l) in acc.iter_mut().zip(local) {
                        for (x, y) in a.iter_mut().zip(l) {
                            *x += y;
                        }
                    }
                    (acc, ll_a + ll_b)
                },
            );
        trace.push(obs_ll);
        if iterations > 1 {
            let improvement = obs_ll - trace[iterations - 2];
            if improvement < config.tolerance {
                converged = true;
                break;
            }
        }
        // M-step
        p = TurnProbabilities {
            adjacency: adjacency.clone(),
            probabilities: normalize_rows(expected),
        };
    }

    let log_likelihood = trace.last().copied().unwrap_or(f64::NEG_INFINITY);
    Ok((
        p,
        EmDiagnostics {
            iterations,
            log_likelihood,
            converged,
            trace,
        },
    ))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowFile {
    outflows: Vec<IdCount>,
    inflows: Vec<IdCount>,
    adjacency: Vec<AdjacencyRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<TableCell>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdCount {
    id: u32,
    count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjacencyRow {
    src: u32,
    dsts: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableCell {
    src: u32,
    dst: u32,
    count: u64,
}

/// Load a flow instance file. A present `table` switches tools to
/// complete-data mode and is returned alongside the margins.
pub fn load_flow_instance(path: impl AsRef<Path>) -> Result<(FlowInstance, Option<FlowTable>)> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let file: FlowFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(&display, e.line(), e.to_string()))?;

    let outflow_ids: Vec<u32> = file.outflows.iter().map(|r| r.id).collect();
    let inflow_ids: Vec<u32> = file.inflows.iter().map(|r| r.id).collect();
    let out_index = {
        let ids = outflow_ids.clone();
        move |id: u32| ids.iter().position(|&x| x == id)
    };
    let in_index = {
        let ids = inflow_ids.clone();
        move |id: u32| ids.iter().position(|&x| x == id)
    };

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); outflow_ids.len()];
    let mut row_seen = vec![false; outflow_ids.len()];
    for row in &file.adjacency {
        let o = out_index(row.src).ok_or_else(|| {
            Error::data(format!(
                "{display}: adjacency src {} is not an outflow node",
                row.src
            ))
        })?;
        if row_seen[o] {
            return Err(Error::data(format!(
                "{display}: duplicate adjacency row for outflow {}",
                row.src
            )));
        }
        row_seen[o] = true;
        for &dst in &row.dsts {
            let i = in_index(dst).ok_or_else(|| {
                Error::data(format!(
                    "{display}: adjacency dst {dst} is not an inflow node"
                ))
            })?;
            neighbors[o].push(i);
        }
    }
    let adjacency = FlowAdjacency::new(outflow_ids, inflow_ids, neighbors)
        .map_err(|e| Error::data(format!("{display}: {e}")))?;
    let instance = FlowInstance::new(
        adjacency.clone(),
        file.outflows.iter().map(|r| r.count).collect(),
        file.inflows.iter().map(|r| r.count).collect(),
    )
    .map_err(|e| Error::data(format!("{display}: {e}")))?;

    let table = match file.table {
        None => None,
        Some(cells) => {
            let mut counts: Vec<Vec<u64>> = adjacency
                .neighbors
                .iter()
                .map(|nb| vec![0u64; nb.len()])
                .collect();
            let mut seen: Vec<Vec<bool>> = adjacency
                .neighbors
                .iter()
                .map(|nb| vec![false; nb.len()])
                .collect();
            for cell in cells {
                let o = out_index(cell.src).ok_or_else(|| {
                    Error::data(format!(
                        "{display}: table src {} is not an outflow node",
                        cell.src
                    ))
                })?;
                let i = in_index(cell.dst).ok_or_else(|| {
                    Error::data(format!(
                        "{display}: table dst {} is not an inflow node",
                        cell.dst
                    ))
                })?;
                let k = adjacency.neighbors[o].binary_search(&i).map_err(|_| {
                    Error::data(format!(
                        "{display}: table cell ({}, {}) is not an adjacent pair",
                        cell.src, cell.dst
                    ))
                })?;
                if seen[o][k] {
                    return Err(Error::data(format!(
                        "{display}: duplicate table cell ({}, {})",
                        cell.src, cell.dst
                    )));
                }
                seen[o][k] = true;
                counts[o][k] = cell.count;
            }
            Some(FlowTable {
                adjacency: adjacency.clone(),
                counts,
            })
        }
    };
    Ok((instance, table))
}

pub fn save_flow_instance(
    path: impl AsRef<Path>,
    instance: &FlowInstance,
    table: Option<&FlowTable>,
) -> Result<()> {
    let path = path.as_ref();
    let adjacency = &instance.adjacency;
    let file = FlowFile {
        outflows: adjacency
            .outflow_ids
            .iter()
            .zip(&instance.outflow_counts)
            .map(|(&id, &count)| IdCount { id, count })
            .collect(),
        inflows: adjacency
            .inflow_ids
            .iter()
            .zip(&instance.inflow_counts)
            .map(|(&id, &count)| IdCount { id, count })
            .collect(),
        adjacency: adjacency
            .neighbors
            .iter()
            .enumerate()
            .map(|(o, nb)| AdjacencyRow {
                src: adjacency.outflow_ids[o],
                dsts: nb.iter().map(|&i| adjacency.inflow_ids[i]).collect(),
            })
            .collect(),
        table: table.map(|t| {
            t.counts
                .iter()
                .enumerate()
                .flat_map(|(o, row)| {
                    row.iter().enumerate().map(move |(k, &count)| TableCell {
                        src: adjacency.outflow_ids[o],
                        dst: adjacency.inflow_ids[t.adjacency.neighbors[o][k]],
                        count,
                    })
                })
                .collect()
        }),
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::data(format!("serializing flow instance: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(&path.display().to_string(), e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnFile {
    turns: Vec<TurnCell>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnCell {
    src: u32,
    dst: u32,
    p: f64,
}

pub fn save_turn_probabilities(path: impl AsRef<Path>, p: &TurnProbabilities) -> Result<()> {
    let path = path.as_ref();
    let adjacency = &p.adjacency;
    let file = TurnFile {
        turns: p
            .probabilities
            .iter()
            .enumerate()
            .flat_map(|(o, row)| {
                row.iter().enumerate().map(move |(k, &prob)| TurnCell {
                    src: adjacency.outflow_ids[o],
                    dst: adjacency.inflow_ids[adjacency.neighbors[o][k]],
                    p: prob,
                })
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::data(format!("serializing turn probabilities: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(&path.display().to_string(), e))
}
