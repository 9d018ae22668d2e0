//! Cascade generation and exact cascade likelihoods under a known network.
//!
//! A node holds up to `N_i` individuals. When the set `X(t-1)` of nodes newly
//! activated at step `t-1` contains predecessors of an inactive node `i`,
//! every individual in `i` independently becomes active with probability
//! `gamma = 1 - prod_j (1 - p_ji)^{n_j}`, so the node's new level is a
//! `Binomial(N_i, gamma)` draw. A draw of zero leaves the node inactive and
//! those parents never retry; the node can still be activated later by other
//! newly active parents.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distributions::Uniform;
use rand::prelude::*;
use rand_distr::Binomial;
use rand_pcg::Pcg64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{LayeredNetwork, Network};
use crate::math::binomial_logpmf_from_log_q;
use crate::rng::stream_rng;

/// One activation: node `node` reached level `level` at time `time`.
/// Nodes without an event are never activated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CascadeEvent {
    pub node: usize,
    pub time: u32,
    pub level: u64,
}

/// One observed diffusion, stored as events sorted by (time, node).
/// Events at time 0 are the seeds.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cascade {
    events: Vec<CascadeEvent>,
}

impl Cascade {
    /// Build and validate a cascade from raw events.
    pub fn from_events(mut events: Vec<CascadeEvent>) -> Result<Self> {
        events.sort_unstable_by_key(|e| (e.time, e.node));
        let mut nodes_seen = BTreeMap::new();
        let mut times = BTreeMap::new();
        for e in &events {
            if e.level < 1 {
                return Err(Error::data(format!(
                    "node {}: activation level must be >= 1",
                    e.node
                )));
            }
            if nodes_seen.insert(e.node, e.time).is_some() {
                return Err(Error::data(format!(
                    "node {} appears in more than one event",
                    e.node
                )));
            }
            *times.entry(e.time).or_insert(0usize) += 1;
        }
        if !events.is_empty() && !times.contains_key(&0) {
            return Err(Error::data("cascade has events but no seeds at time 0"));
        }
        for &t in times.keys() {
            if t >= 1 && !times.contains_key(&(t - 1)) {
                return Err(Error::data(format!(
                    "events at time {t} but none at time {}",
                    t - 1
                )));
            }
        }
        Ok(Cascade { events })
    }

    pub fn events(&self) -> &[CascadeEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn seeds(&self) -> impl Iterator<Item = &CascadeEvent> {
        self.events.iter().take_while(|e| e.time == 0)
    }

    /// (time, level) of `node`, or None when never activated.
    pub fn activation(&self, node: usize) -> Option<(u32, u64)> {
        self.events
            .iter()
            .find(|e| e.node == node)
            .map(|e| (e.time, e.level))
    }

    /// Check node ids and levels against a capacity vector.
    pub fn check_against(&self, capacities: &[u64]) -> Result<()> {
        for e in &self.events {
            if e.node >= capacities.len() {
                return Err(Error::data(format!(
                    "event references node {} outside 0..{}",
                    e.node,
                    capacities.len()
                )));
            }
            if e.level > capacities[e.node] {
                return Err(Error::data(format!(
                    "node {}: level {} exceeds capacity {}",
                    e.node, e.level, capacities[e.node]
                )));
            }
        }
        Ok(())
    }
}

/// Seed selection for simulation: an explicit list of (node, level) pairs,
/// or a per-cascade sampling rule.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedSpec {
    Explicit(Vec<(usize, u64)>),
    /// Draw `round(fraction * n)` (at least one) distinct seed nodes
    /// uniformly; levels are uniform on `level_range`, capped at the node
    /// capacity.
    Random {
        fraction: f64,
        level_range: (u64, u64),
    },
}

impl SeedSpec {
    fn validate(&self, net: &Network) -> Result<()> {
        match self {
            SeedSpec::Explicit(seeds) => {
                if seeds.is_empty() {
                    return Err(Error::parameter("seed list is empty"));
                }
                let mut seen = BTreeMap::new();
                for &(node, level) in seeds {
                    if node >= net.node_count() {
                        return Err(Error::parameter(format!("seed node {node} out of range")));
                    }
                    if seen.insert(node, ()).is_some() {
                        return Err(Error::parameter(format!("duplicate seed node {node}")));
                    }
                    if level < 1 || level > net.capacity(node) {
                        return Err(Error::parameter(format!(
                            "seed node {node}: level {level} outside 1..={}",
                            net.capacity(node)
                        )));
                    }
                }
                Ok(())
            }
            SeedSpec::Random {
                fraction,
                level_range,
            } => {
                if !(*fraction > 0.0 && *fraction <= 1.0) {
                    return Err(Error::parameter(format!(
                        "seed fraction {fraction} outside (0, 1]"
                    )));
                }
                if level_range.0 < 1 || level_range.0 > level_range.1 {
                    return Err(Error::parameter(format!(
                        "seed level range {level_range:?} invalid"
                    )));
                }
                Ok(())
            }
        }
    }

    fn draw(&self, net: &Network, rng: &mut Pcg64) -> Vec<(usize, u64)> {
        match self {
            SeedSpec::Explicit(seeds) => seeds.clone(),
            SeedSpec::Random {
                fraction,
                level_range,
            } => {
                let n = net.node_count();
                let k = ((fraction * n as f64).round() as usize).clamp(1, n);
                let mut ids = rand::seq::index::sample(rng, n, k).into_vec();
                ids.sort_unstable();
                let level = Uniform::new_inclusive(level_range.0, level_range.1);
                ids.into_iter()
                    .map(|node| (node, level.sample(rng).min(net.capacity(node))))
                    .collect()
            }
        }
    }
}

/// Probability that one individual becomes active given newly active
/// parents `(n_j, p_ji)`: `1 - prod_j (1 - p_ji)^{n_j}`, in log space.
/// An empty parent list yields 0.
pub fn activation_probability(parents: &[(u64, f64)]) -> Result<f64> {
    let mut log_q = 0.0;
    for &(n, p) in parents {
        if n < 1 {
            return Err(Error::parameter("parent level must be >= 1"));
        }
        if !(0.0..1.0).contains(&p) {
            return Err(Error::parameter(format!("probability {p} outside [0, 1)")));
        }
        log_q += n as f64 * (-p).ln_1p();
    }
    Ok(-log_q.exp_m1())
}

/// Probability mass function of the per-step level draw: Binomial(capacity,
/// gamma) over levels `0..=capacity`. Level 0 means the node stays inactive.
pub fn step_activation_distribution(capacity: u64, gamma: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::parameter(format!("gamma {gamma} outside [0, 1)")));
    }
    let log_q = (-gamma).ln_1p();
    Ok((0..=capacity)
        .map(|k| binomial_logpmf_from_log_q(capacity, k, log_q).exp())
        .collect())
}

fn draw_level(capacity: u64, gamma: f64, rng: &mut Pcg64) -> u64 {
    if gamma <= 0.0 {
        return 0;
    }
    Binomial::new(capacity, gamma)
        .expect("gamma lies in (0, 1)")
        .sample(rng)
}

fn simulate_with_rng(net: &Network, seeds: &SeedSpec, rng: &mut Pcg64) -> Cascade {
    let n = net.node_count();
    let mut level = vec![0u64; n];
    let mut events: Vec<CascadeEvent> = Vec::new();

    let mut newly: Vec<(usize, u64)> = seeds.draw(net, rng);
    newly.sort_unstable_by_key(|&(node, _)| node);
    for &(node, lvl) in &newly {
        level[node] = lvl;
        events.push(CascadeEvent {
            node,
            time: 0,
            level: lvl,
        });
    }

    let mut t: u32 = 1;
    while !newly.is_empty() {
        // Aggregate log(1 - gamma) per inactive node touched by the frontier.
        let mut log_q: BTreeMap<usize, f64> = BTreeMap::new();
        for &(j, n_j) in &newly {
            for &(i, p) in net.out_neighbors(j) {
                if level[i] == 0 {
                    *log_q.entry(i).or_insert(0.0) += n_j as f64 * (-p).ln_1p();
                }
            }
        }
        let mut next: Vec<(usize, u64)> = Vec::new();
        for (i, lq) in log_q {
            let gamma = -lq.exp_m1();
            let drawn = draw_level(net.capacity(i), gamma, rng);
            if drawn >= 1 {
                level[i] = drawn;
                events.push(CascadeEvent {
                    node: i,
                    time: t,
                    level: drawn,
                });
                next.push((i, drawn));
            }
        }
        newly = next;
        t += 1;
    }
    Cascade { events }
}

/// Simulate one cascade. Equivalent to `simulate_cascades(net, seeds, 1, rng_seed)`.
pub fn simulate_cascade(net: &Network, seeds: &SeedSpec, rng_seed: u64) -> Result<Cascade> {
    seeds.validate(net)?;
    Ok(simulate_with_rng(net, seeds, &mut stream_rng(rng_seed, 0)))
}

/// Simulate a batch of independent cascades. Cascade `k` runs on its own
/// RNG substream, so the batch is reproducible regardless of scheduling.
pub fn simulate_cascades(
    net: &Network,
    seeds: &SeedSpec,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<Cascade>> {
    seeds.validate(net)?;
    Ok((0..count)
        .into_par_iter()
        .map(|k| simulate_with_rng(net, seeds, &mut stream_rng(rng_seed, k as u64)))
        .collect())
}

/// Simulate a non-progressive process on a layered network: every layer-t+1
/// copy draws its level from the aggregate binomial with parents given by
/// the layer-t levels. Returns one level vector per layer, starting with
/// `initial_levels`.
pub fn simulate_layered(
    layered: &LayeredNetwork,
    initial_levels: &[u64],
    rng_seed: u64,
) -> Result<Vec<Vec<u64>>> {
    let base = layered.base();
    let n = base.node_count();
    if initial_levels.len() != n {
        return Err(Error::parameter(format!(
            "initial_levels has length {}, network has {n} nodes",
            initial_levels.len()
        )));
    }
    for (i, &lvl) in initial_levels.iter().enumerate() {
        if lvl > base.capacity(i) {
            return Err(Error::parameter(format!(
                "node {i}: initial level {lvl} exceeds capacity {}",
                base.capacity(i)
            )));
        }
    }
    let mut rng = stream_rng(rng_seed, 0);
    let mut layers = Vec::with_capacity(layered.horizon() + 1);
    layers.push(initial_levels.to_vec());
    for _ in 0..layered.horizon() {
        let prev = layers.last().unwrap();
        let mut next = vec![0u64; n];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut lq = 0.0;
            for &(j, p) in base.in_neighbors(i) {
                if prev[j] >= 1 {
                    lq += prev[j] as f64 * (-p).ln_1p();
                }
            }
            let gamma = -lq.exp_m1();
            *slot = draw_level(base.capacity(i), gamma, &mut rng);
        }
        layers.push(next);
    }
    Ok(layers)
}

/// Exact log-probability of a cascade under a network.
///
/// Non-seed activations contribute the full binomial log-pmf of their level
/// (coefficient included); earlier-activated in-neighbors contribute failure
/// terms for the steps before activation; activated in-neighbors of
/// never-activated nodes contribute failure terms as well. Seeds are
/// exogenous and carry no term. Returns -inf for cascades that cannot occur
/// under the network.
pub fn cascade_log_likelihood(net: &Network, cascade: &Cascade) -> Result<f64> {
    cascade
        .check_against(net.capacities())
        .map_err(|e| Error::parameter(format!("cascade inconsistent with network: {e}")))?;

    let mut activation: HashMap<usize, (u32, u64)> = HashMap::new();
    for e in cascade.events() {
        activation.insert(e.node, (e.time, e.level));
    }

    let mut ll = 0.0;
    for i in 0..net.node_count() {
        match activation.get(&i) {
            Some(&(0, _)) => {} // seed
            Some(&(tau, n_i)) => {
                let mut s = 0.0; // log(1 - gamma) at the activation step
                for &(j, p) in net.in_neighbors(i) {
                    if let Some(&(tau_j, n_j)) = activation.get(&j) {
                        if tau_j + 1 == tau {
                            s += n_j as f64 * (-p).ln_1p();
                        } else if tau_j + 1 < tau {
                            ll += n_j as f64 * net.capacity(i) as f64 * (-p).ln_1p();
                        }
                    }
                }
                ll += binomial_logpmf_from_log_q(net.capacity(i), n_i, s);
            }
            None => {
                for &(j, p) in net.in_neighbors(i) {
                    if let Some(&(_, n_j)) = activation.get(&j) {
                        ll += n_j as f64 * net.capacity(i) as f64 * (-p).ln_1p();
                    }
                }
            }
        }
    }
    Ok(ll)
}

/// Write a cascade batch as delimited text: a comment header naming the
/// source network, then one `cascade_id,node_id,tau,level` row per event.
/// Never-activated nodes are omitted.
pub fn write_cascades(
    path: impl AsRef<Path>,
    network_label: &str,
    cascades: &[Cascade],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "# network: {network_label}");
    let _ = writeln!(out, "cascade_id,node_id,tau,level");
    for (id, cascade) in cascades.iter().enumerate() {
        for e in cascade.events() {
            let _ = writeln!(out, "{id},{},{},{}", e.node, e.time, e.level);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(&path.display().to_string(), e))
}

/// Read a cascade batch written by [`write_cascades`]. Returns the network
/// label from the header, if present, and the cascades in id order.
pub fn read_cascades(path: impl AsRef<Path>) -> Result<(Option<String>, Vec<Cascade>)> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;

    let mut label = None;
    let mut header_seen = false;
    let mut per_cascade: Vec<Vec<CascadeEvent>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(l) = rest.trim().strip_prefix("network:") {
                label = Some(l.trim().to_string());
            }
            continue;
        }
        if !header_seen {
            if line != "cascade_id,node_id,tau,level" {
                return Err(Error::parse(
                    &display,
                    lineno,
                    "expected header 'cascade_id,node_id,tau,level'",
                ));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                &display,
                lineno,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let parse = |s: &str, what: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| Error::parse(&display, lineno, format!("invalid {what} '{s}'")))
        };
        let id = parse(fields[0], "cascade_id")? as usize;
        let event = CascadeEvent {
            node: parse(fields[1], "node_id")? as usize,
            time: parse(fields[2], "tau")? as u32,
            level: parse(fields[3], "level")?,
        };
        if id == per_cascade.len() {
            per_cascade.push(Vec::new());
        } else if id > per_cascade.len() {
            return Err(Error::parse(
                &display,
                lineno,
                format!("cascade ids must be consecutive from 0, found {id}"),
            ));
        }
        per_cascade[id].push(event);
    }
    if !header_seen {
        return Err(Error::parse(&display, 1, "missing header row"));
    }
    let cascades = per_cascade
        .into_iter()
        .enumerate()
        .map(|(id, events)| {
            Cascade::from_events(events)
                .map_err(|e| Error::data(format!("{display}: cascade {id}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((label, cascades))
}
