//! `absaga`: generate graphs, inspect weights and problems, certify step sizes,
//! and run or compare decentralized optimization experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use absaga_core::digraph::{
    complete_graph, degrees, exponential_graph, geometric_digraph, is_strongly_connected,
    ring_graph, DirectedGraph,
};
use absaga_core::experiment::{
    build_graph, build_problem, certify, compare, parse_config, render_key_values, run_experiment,
    GraphType,
};
use absaga_core::theory::ConvergenceCertificate;
use absaga_core::weights::WeightSystem;
use absaga_core::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "absaga", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or check communication graphs.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Inspect problem instances.
    #[command(subcommand)]
    Problem(ProblemCommand),
    /// Mixing-weight spectra and convergence certificates.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Run one experiment from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run several configurations on a shared graph and problem and merge their traces.
    Compare {
        /// Comma-separated configuration files.
        #[arg(long, value_delimiter = ',', required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKindArg {
    Exponential,
    Geometric,
    Ring,
    Complete,
}

impl From<GraphKindArg> for GraphType {
    fn from(k: GraphKindArg) -> Self {
        match k {
            GraphKindArg::Exponential => GraphType::Exponential,
            GraphKindArg::Geometric => GraphType::Geometric,
            GraphKindArg::Ring => GraphType::Ring,
            GraphKindArg::Complete => GraphType::Complete,
        }
    }
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Write a generated graph as an edge list.
    Gen {
        #[arg(long = "type", value_enum)]
        kind: GraphKindArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        reverse_drop: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report size, degrees and strong connectivity of an edge list.
    Check { file: PathBuf },
}

#[derive(Subcommand)]
enum ProblemCommand {
    /// Print sizes, constants and the optimum of the configured problem.
    Info {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Perron vectors, contraction factors and directivity of a graph's weights.
    Weights {
        file: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Evaluate the convergence certificate; unset parameters use their certified values.
    Certify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        problem_config: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        c: Option<u32>,
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        csv: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Graph(GraphCommand::Gen {
            kind,
            n,
            radius,
            reverse_drop,
            seed,
            out,
        }) => {
            let g = match GraphType::from(kind) {
                GraphType::Exponential => exponential_graph(n)?,
                GraphType::Ring => ring_graph(n)?,
                GraphType::Complete => complete_graph(n)?,
                GraphType::Geometric => {
                    let radius = radius.ok_or_else(|| {
                        Error::InvalidArgument("--radius is required for geometric graphs".into())
                    })?;
                    geometric_digraph(n, radius, reverse_drop.unwrap_or(0.0), seed)?
                }
            };
            g.write(&out)?;
            println!("wrote {} nodes, {} edges to {}", g.n(), g.edge_count(), out.display());
            Ok(())
        }
        Command::Graph(GraphCommand::Check { file }) => graph_check(&file),
        Command::Problem(ProblemCommand::Info { config }) => problem_info(&config),
        Command::Theory(TheoryCommand::Weights { file, csv }) => theory_weights(&file, csv),
        Command::Theory(TheoryCommand::Certify {
            graph,
            problem_config,
            alpha,
            c,
            d,
            csv,
        }) => theory_certify(&graph, &problem_config, alpha, c, d, csv),
        Command::Run { config } => {
            let cfg = parse_config(&config)?;
            let summary = run_experiment(&cfg)?;
            print!("{}", render_key_values(&summary.key_values()));
            Ok(())
        }
        Command::Compare { configs, out } => {
            let cfgs = configs.iter().map(|p| parse_config(p)).collect::<Result<Vec<_>>>()?;
            let cmp = compare(&cfgs, &out)?;
            for (name, s) in cmp.names.iter().zip(&cmp.summaries) {
                println!("{name}: final_optimality_gap={:.6e} epochs={:.3}", s.final_optimality_gap, s.epochs);
            }
            println!("merged={}", cmp.merged.display());
            Ok(())
        }
    }
}

fn print_pairs(pairs: &[(String, String)], csv: bool) {
    if csv {
        let keys: Vec<&str> = pairs.iter().map(|(k, _)| k.as_str()).collect();
        let vals: Vec<&str> = pairs.iter().map(|(_, v)| v.as_str()).collect();
        println!("{}", keys.join(","));
        println!("{}", vals.join(","));
    } else {
        print!("{}", render_key_values(pairs));
    }
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_owned(), v.to_string())
}

fn graph_check(file: &Path) -> Result<()> {
    let g = DirectedGraph::read(file)?;
    let (din, dout) = degrees(&g);
    let connected = is_strongly_connected(&g);
    print_pairs(
        &[
            kv("n", g.n()),
            kv("edges", g.edge_count()),
            kv("self_loops", g.self_loops()),
            kv("strongly_connected", connected),
            kv("min_in_degree", din.iter().min().copied().unwrap_or(0)),
            kv("max_in_degree", din.iter().max().copied().unwrap_or(0)),
            kv("min_out_degree", dout.iter().min().copied().unwrap_or(0)),
            kv("max_out_degree", dout.iter().max().copied().unwrap_or(0)),
        ],
        false,
    );
    if !connected {
        return Err(Error::PreconditionViolation("graph is not strongly connected".into()));
    }
    Ok(())
}

fn problem_info(config: &Path) -> Result<()> {
    let cfg = parse_config(config)?;
    let g = build_graph(&cfg.graph, cfg.weights.self_loops).map_err(|e| e.at_stage("graph"))?;
    let prob = build_problem(&cfg.problem, g.n()).map_err(|e| e.at_stage("problem"))?;
    let c = prob.constants();
    let opt = prob.optimum().map_err(|e| e.at_stage("problem"))?;
    let mut pairs = vec![
        kv("kind", format!("{:?}", prob.kind()).to_lowercase()),
        kv("n", prob.n()),
        kv("dim", prob.dim()),
        kv("m_min", prob.m_min()),
        kv("m_max", prob.m_max()),
        kv("total_components", prob.total_components()),
        kv("ell", format!("{:.16e}", c.ell)),
        kv("mu", format!("{:.16e}", c.mu)),
        kv("kappa", format!("{:.16e}", c.kappa)),
        kv("optimal_value", format!("{:.16e}", opt.value)),
        kv("optimal_grad_norm", format!("{:.3e}", opt.grad_norm)),
    ];
    if let Some(l) = prob.lambda() {
        pairs.insert(6, kv("lambda", format!("{l:.16e}")));
    }
    print_pairs(&pairs, false);
    Ok(())
}

fn theory_weights(file: &Path, csv: bool) -> Result<()> {
    let g = DirectedGraph::read(file)?;
    let ws = WeightSystem::from_graph(&g)?;
    let (ka, ra, kb, rb) = ws.limit_residuals()?;
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ");
    print_pairs(
        &[
            kv("n", ws.n()),
            kv("sigma_A", format!("{:.16e}", ws.sigma_a)),
            kv("sigma_B", format!("{:.16e}", ws.sigma_b)),
            kv("h_r", format!("{:.16e}", ws.h_r)),
            kv("h_c", format!("{:.16e}", ws.h_c)),
            kv("pi_r_dot_pi_c", format!("{:.16e}", ws.pi_dot())),
            kv("psi", format!("{:.16e}", ws.psi)),
            kv("limit_horizon_A", ka),
            kv("limit_residual_A", format!("{ra:.3e}")),
            kv("limit_horizon_B", kb),
            kv("limit_residual_B", format!("{rb:.3e}")),
            kv("pi_r", join(ws.pi_r.as_slice())),
            kv("pi_c", join(ws.pi_c.as_slice())),
        ],
        csv,
    );
    Ok(())
}

fn theory_certify(
    graph: &Path,
    problem_config: &Path,
    alpha: Option<f64>,
    c: Option<u32>,
    d: Option<u32>,
    csv: bool,
) -> Result<()> {
    if let Some(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("--alpha must be positive, got {a}")));
        }
    }
    if c == Some(0) || d == Some(0) {
        return Err(Error::InvalidArgument("--c and --d must be >= 1".into()));
    }
    let cfg = parse_config(problem_config)?;
    let g = DirectedGraph::read(graph).map_err(|e| e.at_stage("graph"))?;
    let ws = WeightSystem::from_graph(&g).map_err(|e| e.at_stage("weights"))?;
    let prob = build_problem(&cfg.problem, g.n()).map_err(|e| e.at_stage("problem"))?;
    let cert: ConvergenceCertificate = certify(&ws, &prob, alpha, c, d).map_err(|e| e.at_stage("theory"))?;
    print_pairs(&cert.key_values(), csv);
    Ok(())
}
