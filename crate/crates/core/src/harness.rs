//! End-to-end experiment pipeline: generate networks, simulate cascade
//! batches, learn structure, score against ground truth, and emit report
//! files. Also ingests weekly per-region count files for the layered
//! tied-parameter workflow.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, Metrics};
use crate::fileio::read_capacities;
use crate::graph::generate_preferential_attachment;
use crate::infer::{learn_structure, SolverConfig};
use crate::rng::derive_seed;
use crate::simulate::{simulate_cascades, SeedSpec};

fn default_edges_per_new_node() -> usize {
    2
}
fn default_log_p_range() -> (f64, f64) {
    (-8.0, -4.6)
}
fn default_capacity() -> u64 {
    1000
}
fn default_seed_fraction() -> f64 {
    0.05
}
fn default_seed_level_range() -> (u64, u64) {
    (5, 25)
}
fn default_runs() -> usize {
    5
}
fn default_rho_values() -> Vec<f64> {
    vec![1.0]
}
fn default_edge_threshold() -> f64 {
    1e-4
}

/// Solver fields exposed through the experiment config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub init_probability: f64,
    /// Upper cap on estimated probabilities; sets the box lower bound
    /// `q_hat_min = ln(1 - max_probability)`.
    pub max_probability: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            gradient_tolerance: 1e-6,
            max_iterations: 5000,
            init_probability: 1e-3,
            max_probability: 0.999,
        }
    }
}

impl SolverSettings {
    pub fn to_config(&self, rho: f64, edge_threshold: f64) -> SolverConfig {
        SolverConfig {
            rho,
            gradient_tolerance: self.gradient_tolerance,
            max_iterations: self.max_iterations,
            edge_threshold,
            init_probability: self.init_probability,
            q_hat_min: (1.0 - self.max_probability).ln(),
        }
    }
}

/// Full description of a synthetic benchmark sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network_sizes: Vec<usize>,
    #[serde(default = "default_edges_per_new_node")]
    pub edges_per_new_node: usize,
    #[serde(default = "default_log_p_range")]
    pub log_p_range: (f64, f64),
    #[serde(default = "default_capacity")]
    pub capacity: u64,
    #[serde(default = "default_seed_fraction")]
    pub seed_fraction: f64,
    #[serde(default = "default_seed_level_range")]
    pub seed_level_range: (u64, u64),
    pub cascade_counts: Vec<usize>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_rho_values")]
    pub rho_values: Vec<f64>,
    #[serde(default = "default_edge_threshold")]
    pub edge_threshold: f64,
    #[serde(default)]
    pub solver: SolverSettings,
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: one 100-node network size, the standard
    /// cascade sweep, 5 runs per point.
    pub fn desk_default(master_seed: u64) -> Self {
        ExperimentConfig {
            network_sizes: vec![100],
            edges_per_new_node: default_edges_per_new_node(),
            log_p_range: default_log_p_range(),
            capacity: default_capacity(),
            seed_fraction: default_seed_fraction(),
            seed_level_range: default_seed_level_range(),
            cascade_counts: vec![50, 100, 250, 500],
            runs: default_runs(),
            rho_values: default_rho_values(),
            edge_threshold: default_edge_threshold(),
            solver: SolverSettings::default(),
            master_seed,
            output_dir: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::parse(&display, e.line(), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.network_sizes.is_empty() {
            return Err(Error::parameter("network_sizes must be nonempty"));
        }
        if self.cascade_counts.is_empty() || self.cascade_counts.contains(&0) {
            return Err(Error::parameter(
                "cascade_counts must be nonempty and positive",
            ));
        }
        if self.runs == 0 {
            return Err(Error::parameter("runs must be >= 1"));
        }
        if self.rho_values.is_empty() {
            return Err(Error::parameter("rho_values must be nonempty"));
        }
        if !(self.seed_fraction > 0.0 && self.seed_fraction <= 1.0) {
            return Err(Error::parameter("seed_fraction must lie in (0, 1]"));
        }
        if self.seed_level_range.0 < 1 || self.seed_level_range.0 > self.seed_level_range.1 {
            return Err(Error::parameter("seed_level_range is invalid"));
        }
        // surface solver misconfiguration before the sweep starts
        for &rho in &self.rho_values {
            self.solver.to_config(rho, self.edge_threshold).validate()?;
        }
        Ok(())
    }
}

/// Outcome of one (size, cascades, rho, run) cell.
#[derive(Debug, Clone)]
pub enum RunOutcome {
    Metrics(Metrics),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub network_size: usize,
    pub cascades: usize,
    pub rho: f64,
    pub run: usize,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone)]
pub struct AggregateRecord {
    pub network_size: usize,
    pub cascades: usize,
    pub rho: f64,
    pub runs_ok: usize,
    pub runs_total: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    /// Mean over runs with a defined error (some true positive).
    pub mean_error_percent: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

/// Run the full sweep. Each (size, cascade count, run) cell regenerates
/// both the network and its cascades from a seed derived from the master
/// seed; every rho value learns on that same data. Failed cells are
/// recorded, not fatal.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut runs = Vec::new();
    for &size in &config.network_sizes {
        for &count in &config.cascade_counts {
            for run in 0..config.runs {
                let cell_seed =
                    derive_seed(config.master_seed, &[size as u64, count as u64, run as u64]);
                let data = prepare_cell(config, size, count, cell_seed);
                for &rho in &config.rho_values {
                    let outcome = match &data {
                        Err(msg) => RunOutcome::Failed(msg.clone()),
                        Ok((net, cascades)) => {
                            let solver = config.solver.to_config(rho, config.edge_threshold);
                            match learn_structure(cascades, net.capacities(), &solver).and_then(
                                |inferred| evaluate(net, &inferred, config.edge_threshold),
                            ) {
                                Ok(metrics) => RunOutcome::Metrics(metrics),
                                Err(e) => RunOutcome::Failed(e.to_string()),
                            }
                        }
                    };
                    runs.push(RunRecord {
                        network_size: size,
                        cascades: count,
                        rho,
                        run,
                        outcome,
                    });
                }
                eprintln!(
                    "experiment: size={size} cascades={count} run={run} done ({} rho value{})",
                    config.rho_values.len(),
                    if config.rho_values.len() == 1 {
                        ""
                    } else {
                        "s"
                    }
                );
            }
        }
    }
    let aggregates = aggregate(&runs);
    Ok(ExperimentReport { runs, aggregates })
}

type CellData = (crate::graph::Network, Vec<crate::simulate::Cascade>);

fn prepare_cell(
    config: &ExperimentConfig,
    size: usize,
    count: usize,
    cell_seed: u64,
) -> std::result::Result<CellData, String> {
    let net = generate_preferential_attachment(
        size,
        config.edges_per_new_node,
        config.log_p_range,
        config.capacity,
        derive_seed(cell_seed, &[1]),
    )
    .map_err(|e| format!("network generation: {e}"))?;
    let spec = SeedSpec::Random {
        fraction: config.seed_fraction,
        level_range: config.seed_level_range,
    };
    let cascades = simulate_cascades(&net, &spec, count, derive_seed(cell_seed, &[2]))
        .map_err(|e| format!("simulation: {e}"))?;
    Ok((net, cascades))
}

fn aggregate(runs: &[RunRecord]) -> Vec<AggregateRecord> {
    let mut groups: BTreeMap<(usize, usize, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        groups
            .entry((r.network_size, r.cascades, r.rho.to_bits()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((network_size, cascades, rho_bits), members)| {
            let mut ok = Vec::new();
            for m in &members {
                if let RunOutcome::Metrics(metrics) = &m.outcome {
                    ok.push(metrics);
                }
            }
            let k = ok.len() as f64;
            let mean = |f: &dyn Fn(&Metrics) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|m| f(m)).sum::<f64>() / k
                }
            };
            let errors: Vec<f64> = ok
                .iter()
                .filter_map(|m| m.parameter_error_percent)
                .collect();
            AggregateRecord {
                network_size,
                cascades,
                rho: f64::from_bits(rho_bits),
                runs_ok: ok.len(),
                runs_total: members.len(),
                mean_precision: mean(&|m| m.precision),
                mean_recall: mean(&|m| m.recall),
                mean_f1: mean(&|m| m.f1),
                mean_error_percent: if errors.is_empty() {
                    None
                } else {
                    Some(errors.iter().sum::<f64>() / errors.len() as f64)
                },
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "nan".to_string(),
    }
}

impl ExperimentReport {
    /// Write `runs.csv`, `aggregate.csv` and one `plotdata_<metric>.csv`
    /// per metric into `dir`. Output is byte-deterministic for a given
    /// config.
    pub fn write_files(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(&dir.display().to_string(), e))?;

        let mut runs = String::from(
            "network_size,cascades,rho,run,status,precision,recall,f1,error_percent,tp,fp,fn,message\n",
        );
        for r in &self.runs {
            match &r.outcome {
                RunOutcome::Metrics(m) => {
                    let _ = writeln!(
                        runs,
                        "{},{},{},{},ok,{:.6},{:.6},{:.6},{},{},{},{},",
                        r.network_size,
                        r.cascades,
                        r.rho,
                        r.run,
                        m.precision,
                        m.recall,
                        m.f1,
                        fmt_opt(m.parameter_error_percent),
                        m.true_positives,
                        m.false_positives,
                        m.false_negatives,
                    );
                }
                RunOutcome::Failed(msg) => {
                    let _ = writeln!(
                        runs,
                        "{},{},{},{},failed,nan,nan,nan,nan,0,0,0,{}",
                        r.network_size,
                        r.cascades,
                        r.rho,
                        r.run,
                        msg.replace([',', '\n'], ";")
                    );
                }
            }
        }
        write_text(&dir.join("runs.csv"), &runs)?;

        let mut agg = String::from(
            "network_size,cascades,rho,runs_ok,runs_total,mean_precision,mean_recall,mean_f1,mean_error_percent\n",
        );
        for a in &self.aggregates {
            let _ = writeln!(
                agg,
                "{},{},{},{},{},{:.6},{:.6},{:.6},{}",
                a.network_size,
                a.cascades,
                a.rho,
                a.runs_ok,
                a.runs_total,
                a.mean_precision,
                a.mean_recall,
                a.mean_f1,
                fmt_opt(a.mean_error_percent),
            );
        }
        write_text(&dir.join("aggregate.csv"), &agg)?;

        type MetricColumn = (&'static str, fn(&AggregateRecord) -> String);
        let metrics: [MetricColumn; 4] = [
            ("precision", |a| format!("{:.6}", a.mean_precision)),
            ("recall", |a| format!("{:.6}", a.mean_recall)),
            ("f1", |a| format!("{:.6}", a.mean_f1)),
            ("error_percent", |a| fmt_opt(a.mean_error_percent)),
        ];
        for (name, value) in metrics {
            let mut plot = String::from("network_size,rho,cascades,value\n");
            for a in &self.aggregates {
                let _ = writeln!(
                    plot,
                    "{},{},{},{}",
                    a.network_size,
                    a.rho,
                    a.cascades,
                    value(a)
                );
            }
            write_text(&dir.join(format!("plotdata_{name}.csv")), &plot)?;
        }
        Ok(())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(&path.display().to_string(), e))
}

/// Per-layer level vectors plus the capacities they were validated against.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionObservations {
    pub capacities: Vec<u64>,
    /// `layers[t][region]`, consecutive layers starting at the first week.
    pub layers: Vec<Vec<u64>>,
}

const MAX_WEEK: u64 = 53;

fn week_follows(prev: u64, next: u64) -> bool {
    next == prev + 1 || ((prev == 52 || prev == 53) && next == 1)
}

/// Read a weekly region-count file (`region_id,week,count`) and a
/// capacities file into consecutive-layer level vectors. Weeks must be
/// consecutive per region, wrapping the year boundary at week 52 or 53;
/// gaps are errors, not imputed. All regions must cover the same weeks.
pub fn ingest_region_counts(
    regions_path: impl AsRef<Path>,
    capacities_path: impl AsRef<Path>,
) -> Result<RegionObservations> {
    let capacities = read_capacities(capacities_path)?;
    let n = capacities.len();
    let path = regions_path.as_ref();
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;

    let mut per_region: Vec<Vec<(u64, u64)>> = vec![Vec::new(); n];
    let mut header_seen = false;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != "region_id,week,count" {
                return Err(Error::parse(
                    &display,
                    lineno,
                    "expected header 'region_id,week,count'",
                ));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                &display,
                lineno,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let parse = |s: &str, what: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| Error::parse(&display, lineno, format!("invalid {what} '{s}'")))
        };
        let region = parse(fields[0], "region_id")?;
        let week = parse(fields[1], "week")?;
        let count = parse(fields[2], "count")?;
        if region as usize >= n {
            return Err(Error::data(format!(
                "{display}:{lineno}: region {region} is not in the capacities file (0..{n})"
            )));
        }
        if !(1..=MAX_WEEK).contains(&week) {
            return Err(Error::data(format!(
                "{display}:{lineno}: week {week} outside 1..={MAX_WEEK}"
            )));
        }
        if count > capacities[region as usize] {
            return Err(Error::data(format!(
                "{display}:{lineno}: region {region} count {count} exceeds capacity {}",
                capacities[region as usize]
            )));
        }
        per_region[region as usize].push((week, count));
    }
    if !header_seen {
        return Err(Error::parse(&display, 1, "missing header row"));
    }

    let mut weeks_template: Option<Vec<u64>> = None;
    for (region, rows) in per_region.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::data(format!(
                "{display}: region {region} has no rows"
            )));
        }
        for pair in rows.windows(2) {
            if !week_follows(pair[0].0, pair[1].0) {
                return Err(Error::data(format!(
                    "{display}: region {region}: gap after week {}, found week {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        let weeks: Vec<u64> = rows.iter().map(|&(w, _)| w).collect();
        match &weeks_template {
            None => weeks_template = Some(weeks),
            Some(t) if *t == weeks => {}
            Some(_) => {
                return Err(Error::data(format!(
                    "{display}: region {region} covers different weeks than region 0"
                )));
            }
        }
    }
    let t_len = weeks_template.map(|w| w.len()).unwrap_or(0);
    let layers: Vec<Vec<u64>> = (0..t_len)
        .map(|t| (0..n).map(|r| per_region[r][t].1).collect())
        .collect();
    Ok(RegionObservations { capacities, layers })
}

/// Write per-layer level vectors as a weekly region-count file. Layer 0
/// maps to `start_week`; week numbering wraps 52 -> 1.
pub fn write_region_counts(
    path: impl AsRef<Path>,
    layers: &[Vec<u64>],
    start_week: u64,
) -> Result<()> {
    if !(1..=52).contains(&start_week) {
        return Err(Error::parameter(format!(
            "start_week {start_week} outside 1..=52"
        )));
    }
    let path = path.as_ref();
    let mut out = String::from("region_id,week,count\n");
    if let Some(first) = layers.first() {
        for region in 0..first.len() {
            for (t, layer) in layers.iter().enumerate() {
                let week = (start_week - 1 + t as u64) % 52 + 1;
                let _ = writeln!(out, "{region},{week},{}", layer[region]);
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(&path.display().to_string(), e))
}
