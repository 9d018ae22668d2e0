//! `codiff` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/validation error,
//! 3 solver failure. Diagnostics go to stderr; results go to files or
//! stdout.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use codiff::error::Error;
use codiff::eval::evaluate;
use codiff::fileio::{read_capacities, read_levels};
use codiff::flow::{
    complete_data_mle, em_fit_detailed, load_flow_instance, save_turn_probabilities, EmConfig,
};
use codiff::graph::{build_layered, generate_preferential_attachment, Network};
use codiff::harness::{
    ingest_region_counts, run_experiment, write_region_counts, ExperimentConfig,
};
use codiff::infer::{
    learn_structure_detailed, learn_tied_layered_detailed, InferredNetwork, NodeDiagnostics,
    SolverConfig,
};
use codiff::simulate::{
    read_cascades, simulate_cascades, simulate_layered, write_cascades, SeedSpec,
};

#[derive(Parser)]
#[command(
    name = "codiff",
    version,
    about = "Collective diffusion over networks: simulate cascades, learn structure, fit flows"
)]
struct Cli {
    /// Seed for all randomness of the subcommand.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scale-free network with bi-directed edges.
    Generate(GenerateArgs),
    /// Expand a base network into its time-indexed layered form.
    Layered(LayeredArgs),
    /// Simulate a batch of cascades and write a trace file.
    Simulate(SimulateArgs),
    /// Simulate a non-progressive layered process and write weekly counts.
    SimulateLayered(SimulateLayeredArgs),
    /// Learn structure and parameters from a cascade trace file.
    Learn(LearnArgs),
    /// Learn tied parameters from weekly per-region counts.
    LearnLayered(LearnLayeredArgs),
    /// Score an inferred network against ground truth.
    Eval(EvalArgs),
    /// Estimate turn probabilities from complete flow tables.
    FlowFit(FlowFitArgs),
    /// Estimate turn probabilities from margins-only instances via EM.
    FlowEm(FlowEmArgs),
    /// Run a synthetic benchmark sweep and write report files.
    Experiment(ExperimentArgs),
    /// Validate a weekly region-count file and emit per-layer levels.
    IngestRegions(IngestRegionsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of nodes.
    #[arg(long)]
    nodes: usize,
    /// Undirected attachments per new node.
    #[arg(long, default_value_t = 2)]
    attach: usize,
    /// Lower end of the natural-log probability range.
    #[arg(long, default_value_t = -8.0, allow_hyphen_values = true)]
    log_p_min: f64,
    /// Upper end of the natural-log probability range.
    #[arg(long, default_value_t = -4.6, allow_hyphen_values = true)]
    log_p_max: f64,
    /// Capacity assigned to every node.
    #[arg(long, default_value_t = 1000)]
    capacity: u64,
    /// Output network file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LayeredArgs {
    /// Base network file.
    #[arg(long)]
    net: PathBuf,
    /// Number of layer transitions.
    #[arg(long)]
    horizon: usize,
    /// Output network file for the materialized expansion.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Network file.
    #[arg(long)]
    net: PathBuf,
    /// Number of cascades to simulate.
    #[arg(long)]
    cascades: usize,
    /// Fraction of nodes seeded per cascade.
    #[arg(long, default_value_t = 0.05)]
    seed_fraction: f64,
    /// Minimum seed activation level.
    #[arg(long, default_value_t = 5)]
    seed_level_min: u64,
    /// Maximum seed activation level.
    #[arg(long, default_value_t = 25)]
    seed_level_max: u64,
    /// Fixed seed nodes from a node_id,level file instead of random seeding.
    #[arg(long)]
    seeds_file: Option<PathBuf>,
    /// Output trace file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateLayeredArgs {
    /// Base network file (self-loops allowed when marked layered).
    #[arg(long)]
    net: PathBuf,
    /// Number of layer transitions.
    #[arg(long)]
    horizon: usize,
    /// Initial levels file (node_id,level).
    #[arg(long)]
    initial: PathBuf,
    /// Week number of layer 0 in the emitted file.
    #[arg(long, default_value_t = 40)]
    start_week: u64,
    /// Output weekly region-count file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    /// Cascade trace file.
    #[arg(long)]
    traces: PathBuf,
    /// Capacities file (node_id,capacity).
    #[arg(long)]
    capacities: PathBuf,
    /// Sparsity weight for phase 1.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Edge detection threshold on p.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Projected-gradient tolerance.
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    /// Iteration cap per node solve.
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Output network file for the learned structure.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-node diagnostics file.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct LearnLayeredArgs {
    /// Weekly region-count file.
    #[arg(long)]
    regions: PathBuf,
    /// Capacities file (node_id,capacity).
    #[arg(long)]
    capacities: PathBuf,
    /// Sparsity weight; 0 for plain recovery.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Edge detection threshold on p.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Projected-gradient tolerance.
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    /// Iteration cap per node solve.
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Output network file for the learned parameters.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-node diagnostics file.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth network file.
    #[arg(long)]
    truth: PathBuf,
    /// Inferred network file.
    #[arg(long)]
    inferred: PathBuf,
    /// Edge detection threshold on p.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Label written into the run_id column.
    #[arg(long, default_value_t = 0)]
    run_id: u64,
    /// Label written into the cascades column.
    #[arg(long, default_value_t = 0)]
    cascades: u64,
    /// Output metrics file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FlowFitArgs {
    /// Flow instance files; each must contain a complete table.
    #[arg(long, required = true, num_args = 1..)]
    instances: Vec<PathBuf>,
    /// Output turn-probability file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FlowEmArgs {
    /// Margins-only flow instance files over a shared adjacency.
    #[arg(long, required = true, num_args = 1..)]
    instances: Vec<PathBuf>,
    /// Iteration cap.
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Log-likelihood improvement threshold for convergence.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Cap on the enumerated tables per instance.
    #[arg(long, default_value_t = codiff::flow::DEFAULT_TABLE_CAP)]
    table_cap: usize,
    /// Output turn-probability file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Report directory; overrides output_dir from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct IngestRegionsArgs {
    /// Weekly region-count file.
    #[arg(long)]
    regions: PathBuf,
    /// Capacities file (node_id,capacity).
    #[arg(long)]
    capacities: PathBuf,
    /// Output layer,node_id,level file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) => 1,
        Error::Data(_) | Error::Parse { .. } | Error::Io { .. } | Error::Capacity(_) => 2,
        Error::Solver(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: failed to configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn dispatch(cli: Cli) -> codiff::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Generate(args) => {
            let net = generate_preferential_attachment(
                args.nodes,
                args.attach,
                (args.log_p_min, args.log_p_max),
                args.capacity,
                seed,
            )?;
            net.save(&args.out)?;
            eprintln!(
                "generated {} nodes, {} directed edges -> {}",
                net.node_count(),
                net.edge_count(),
                args.out.display()
            );
            Ok(())
        }
        Command::Layered(args) => {
            let base = Network::load(&args.net)?;
            let layered = build_layered(&base, args.horizon)?;
            let expanded = layered.to_network();
            expanded.save(&args.out)?;
            eprintln!(
                "expanded to {} node copies, {} layered edges -> {}",
                layered.copy_count(),
                layered.layered_edge_count(),
                args.out.display()
            );
            Ok(())
        }
        Command::Simulate(args) => {
            let net = Network::load(&args.net)?;
            let spec = match &args.seeds_file {
                Some(path) => {
                    let levels = read_levels(path)?;
                    SeedSpec::Explicit(
                        levels
                            .into_iter()
                            .enumerate()
                            .filter(|&(_, lvl)| lvl > 0)
                            .collect(),
                    )
                }
                None => SeedSpec::Random {
                    fraction: args.seed_fraction,
                    level_range: (args.seed_level_min, args.seed_level_max),
                },
            };
            let cascades = simulate_cascades(&net, &spec, args.cascades, seed)?;
            let label = args.net.display().to_string();
            write_cascades(&args.out, &label, &cascades)?;
            let events: usize = cascades.iter().map(|c| c.events().len()).sum();
            eprintln!(
                "simulated {} cascades, {events} events -> {}",
                cascades.len(),
                args.out.display()
            );
            Ok(())
        }
        Command::SimulateLayered(args) => {
            let base = Network::load(&args.net)?;
            let layered = build_layered(&base, args.horizon)?;
            let initial = read_levels(&args.initial)?;
            let layers = simulate_layered(&layered, &initial, seed)?;
            write_region_counts(&args.out, &layers, args.start_week)?;
            eprintln!(
                "simulated {} layers over {} nodes -> {}",
                layers.len(),
                base.node_count(),
                args.out.display()
            );
            Ok(())
        }
        Command::Learn(args) => {
            let capacities = read_capacities(&args.capacities)?;
            let (_, cascades) = read_cascades(&args.traces)?;
            let config = SolverConfig {
                rho: args.rho,
                gradient_tolerance: args.grad_tol,
                max_iterations: args.max_iters,
                edge_threshold: args.epsilon,
                ..SolverConfig::default()
            };
            let (inferred, diags) = learn_structure_detailed(&cascades, &capacities, &config)?;
            finish_learn(
                &inferred,
                &diags,
                &capacities,
                &args.out,
                args.diagnostics.as_deref(),
            )
        }
        Command::LearnLayered(args) => {
            let obs = ingest_region_counts(&args.regions, &args.capacities)?;
            let config = SolverConfig {
                rho: args.rho,
                gradient_tolerance: args.grad_tol,
                max_iterations: args.max_iters,
                edge_threshold: args.epsilon,
                ..SolverConfig::default()
            };
            let (inferred, diags) =
                learn_tied_layered_detailed(&obs.layers, &obs.capacities, &config)?;
            finish_learn(
                &inferred,
                &diags,
                &obs.capacities,
                &args.out,
                args.diagnostics.as_deref(),
            )
        }
        Command::Eval(args) => {
            let truth = Network::load(&args.truth)?;
            let inferred = InferredNetwork::from_network(&Network::load(&args.inferred)?);
            let m = evaluate(&truth, &inferred, args.epsilon)?;
            let mut out = String::from("run_id,cascades,precision,recall,f1,error_percent\n");
            let error = m
                .parameter_error_percent
                .map(|e| format!("{e:.6}"))
                .unwrap_or_else(|| "nan".to_string());
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{error}",
                args.run_id, args.cascades, m.precision, m.recall, m.f1
            );
            match &args.out {
                Some(path) => std::fs::write(path, out)
                    .map_err(|e| Error::io(&path.display().to_string(), e))?,
                None => print!("{out}"),
            }
            Ok(())
        }
        Command::FlowFit(args) => {
            let mut tables = Vec::new();
            for path in &args.instances {
                let (_, table) = load_flow_instance(path)?;
                match table {
                    Some(t) => tables.push(t),
                    None => {
                        return Err(Error::data(format!(
                            "{}: complete-data fit requires a table section",
                            path.display()
                        )))
                    }
                }
            }
            let p = complete_data_mle(&tables)?;
            save_turn_probabilities(&args.out, &p)?;
            eprintln!(
                "fitted {} outflow rows -> {}",
                tables[0].adjacency().outflow_count(),
                args.out.display()
            );
            Ok(())
        }
        Command::FlowEm(args) => {
            let mut instances = Vec::new();
            for path in &args.instances {
                let (instance, _) = load_flow_instance(path)?;
                instances.push(instance);
            }
            let config = EmConfig {
                max_iterations: args.max_iters,
                tolerance: args.tol,
                table_cap: args.table_cap,
            };
            let (p, diag) = em_fit_detailed(&instances, &config)?;
            save_turn_probabilities(&args.out, &p)?;
            eprintln!(
                "EM finished after {} iterations (converged: {}, log-likelihood {:.6}) -> {}",
                diag.iterations,
                diag.converged,
                diag.log_likelihood,
                args.out.display()
            );
            Ok(())
        }
        Command::Experiment(args) => {
            let mut config = ExperimentConfig::load(&args.config)?;
            if let Some(dir) = args.out_dir {
                config.output_dir = Some(dir);
            }
            let out_dir = config.output_dir.clone().ok_or_else(|| {
                Error::parameter(
                    "no output directory: set output_dir in the config or pass --out-dir",
                )
            })?;
            let report = run_experiment(&config)?;
            report.write_files(&out_dir)?;
            eprintln!(
                "experiment complete: {} run rows, {} aggregate rows -> {}",
                report.runs.len(),
                report.aggregates.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::IngestRegions(args) => {
            let obs = ingest_region_counts(&args.regions, &args.capacities)?;
            let mut out = String::from("layer,node_id,level\n");
            for (t, layer) in obs.layers.iter().enumerate() {
                for (node, &level) in layer.iter().enumerate() {
                    let _ = writeln!(out, "{t},{node},{level}");
                }
            }
            match &args.out {
                Some(path) => std::fs::write(path, out)
                    .map_err(|e| Error::io(&path.display().to_string(), e))?,
                None => print!("{out}"),
            }
            Ok(())
        }
    }
}

fn finish_learn(
    inferred: &InferredNetwork,
    diags: &[NodeDiagnostics],
    capacities: &[u64],
    out: &std::path::Path,
    diagnostics: Option<&std::path::Path>,
) -> codiff::Result<()> {
    let net = inferred.to_network(capacities)?;
    net.save(out)?;
    if let Some(path) = diagnostics {
        let mut text =
            String::from("node_id,objective,iterations,grad_norm,converged,candidates,detected\n");
        for d in diags {
            let _ = writeln!(
                text,
                "{},{:.9},{},{:.3e},{},{},{}",
                d.node,
                d.objective,
                d.iterations,
                d.gradient_norm,
                d.converged,
                d.candidates,
                d.detected
            );
        }
        std::fs::write(path, text).map_err(|e| Error::io(&path.display().to_string(), e))?;
    }
    eprintln!(
        "learned {} edges over {} nodes -> {}",
        inferred.detected_edge_count(),
        inferred.node_count(),
        out.display()
    );
    Ok(())
}
