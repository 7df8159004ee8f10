//! `qrl`: train, synthesize, route and benchmark from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use serde_json::json;

use qrl_core::agent::{train_run, Agent, Target};
use qrl_core::bench::run_benchmark;
use qrl_core::checkpoint::Checkpoint;
use qrl_core::config::{parse_suite, RunConfig};
use qrl_core::decode::{DecodeConfig, Strategy};
use qrl_core::routing::{bidirectional_route, finalize_route, path_embedding_layout, route_budgeted, sabre_lite, RoutedResult, SabreConfig};
use qrl_core::synth::build_gate_set;
use qrl_core::topology::{topology, topology_names};
use qrl_core::{Circuit, Error, Layout};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;
const EXIT_ALL_RUNS_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "qrl", version, about = "Reinforcement-learned circuit synthesis and routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write a checkpoint plus a CSV training log.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        deterministic: bool,
    },
    /// Synthesize a circuit for one target operator.
    Synth {
        #[arg(long)]
        ckpt: PathBuf,
        /// Target file: index list, 0/1 matrix rows, or a Clifford circuit.
        #[arg(long, conflicts_with = "random", required_unless_present = "random")]
        target: Option<PathBuf>,
        /// Draw a target from this many random gates instead.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output circuit; metrics go next to it with a `.json` extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Route a circuit onto a coupling map.
    Route {
        #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
        ckpt: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        coupling: String,
        #[arg(long, default_value_t = 1)]
        iterations: usize,
        /// Repeat sampled runs until this many seconds have elapsed.
        #[arg(long)]
        budget: Option<f64>,
        /// Cap on repeated runs; defaults to 1 without a budget.
        #[arg(long)]
        max_runs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial layout of the first pass.
        #[arg(long, value_enum, default_value_t = SeedLayout::Trivial)]
        seed_layout: SeedLayout,
        /// Output circuit; the result goes next to it with a `.json` extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark suite and write `bench.csv` and `bench.json`.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List registered coupling maps, or the edges of one.
    Topologies {
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Greedy,
    Sample,
    TopK,
    TopP,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SeedLayout {
    Trivial,
    Path,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Sabre,
}

#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(Exit(code, _)) = err.downcast_ref::<Exit>() {
        return *code;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config { .. } | Error::UnknownTopology { .. } | Error::Parse { .. }) => EXIT_CONFIG,
        Some(Error::Verification(_)) => EXIT_VERIFICATION,
        _ => EXIT_FAILURE,
    }
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("QRL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Exit(EXIT_CONFIG, format!("QRL_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn with_ext(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_train(config: &Path, out: &Path, seed: Option<u64>, deterministic: bool) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.deterministic |= deterministic;
    let log_path = with_ext(out, "log.csv");
    let mut log = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let (ckpt, outcome) = train_run(&cfg, Some(&mut log))?;
    ckpt.save(out)?;
    eprintln!(
        "steps {} difficulty {} converged {} -> {}",
        outcome.steps,
        outcome.final_difficulty,
        outcome.converged,
        out.display()
    );
    if let Some(reason) = outcome.aborted {
        return Err(Exit(EXIT_FAILURE, format!("training aborted ({reason}); partial checkpoint written")).into());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    ckpt: &Path,
    target: Option<&Path>,
    random: Option<usize>,
    runs: usize,
    strategy: Option<StrategyArg>,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(ckpt)?;
    let kind = ckpt
        .meta
        .config
        .env
        .task
        .operator_kind()
        .ok_or_else(|| anyhow!("checkpoint is a routing policy; use `qrl route`"))?;
    let agent = Agent::from_checkpoint(&ckpt)?;
    let target = match (target, random) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Target::parse(kind, &text)?
        }
        (None, Some(d)) => {
            let coupling = topology(&ckpt.meta.config.env.topology)?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            Target::walk(&build_gate_set(kind, &coupling), d, &mut rng)?
        }
        (None, None) => bail!("one of --target or --random is required"),
    };
    let strategy = match strategy {
        Some(StrategyArg::Greedy) => Strategy::Greedy,
        Some(StrategyArg::Sample) => Strategy::Sample,
        Some(StrategyArg::TopK) => Strategy::TopK,
        Some(StrategyArg::TopP) => Strategy::TopP,
        None if runs == 1 => Strategy::Greedy,
        None => Strategy::Sample,
    };
    let cfg = DecodeConfig { strategy, runs, seed, ..ckpt.meta.config.decode };
    cfg.validate()?;
    let result = agent.synthesize(&target, &cfg)?;
    let time_ms = result.wall_time.as_secs_f64() * 1e3;
    let metrics = match &result.circuit {
        Some(c) => {
            fs::write(out, c.emit()).with_context(|| format!("writing {}", out.display()))?;
            json!({
                "success": true,
                "runs_succeeded": result.runs_succeeded,
                "count2q": c.count2q(),
                "depth2q": c.depth2q(),
                "time_ms": time_ms,
            })
        }
        None => json!({
            "success": false,
            "runs_succeeded": 0,
            "count2q": null,
            "depth2q": null,
            "time_ms": time_ms,
        }),
    };
    write_json(&with_ext(out, "json"), &metrics)?;
    println!("{metrics}");
    if result.circuit.is_none() {
        return Err(Exit(EXIT_ALL_RUNS_FAILED, format!("all {runs} runs failed")).into());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_route(
    ckpt: Option<&Path>,
    circuit_path: &Path,
    coupling_name: &str,
    iterations: usize,
    budget: Option<f64>,
    max_runs: Option<usize>,
    seed: u64,
    seed_layout: SeedLayout,
    out: &Path,
) -> anyhow::Result<()> {
    let coupling = Arc::new(topology(coupling_name)?);
    let text = fs::read_to_string(circuit_path).with_context(|| format!("reading {}", circuit_path.display()))?;
    let circuit = Circuit::parse(&text)?;
    if iterations == 0 {
        return Err(Exit(EXIT_CONFIG, "--iterations must be at least 1".into()).into());
    }
    let budget = match budget {
        Some(b) if !(b.is_finite() && b >= 0.0) => {
            return Err(Exit(EXIT_CONFIG, "--budget must be finite and non-negative".into()).into())
        }
        b => b.map(Duration::from_secs_f64),
    };
    let layout = match seed_layout {
        SeedLayout::Trivial => Layout::trivial(coupling.n_qubits()),
        SeedLayout::Path => path_embedding_layout(&circuit, &coupling)?,
    };
    let start = Instant::now();
    let (result, runs): (RoutedResult, usize) = match ckpt {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let Agent::Routing(policy) = Agent::from_checkpoint(&ckpt)? else {
                bail!("checkpoint is a synthesis policy; use `qrl synth`");
            };
            if policy.coupling().name() != coupling.name() {
                bail!("checkpoint was trained on {}, not {}", policy.coupling().name(), coupling.name());
            }
            let max_runs = max_runs.unwrap_or(if budget.is_some() { usize::MAX } else { 1 });
            route_budgeted(&policy, &circuit, layout, iterations, budget, max_runs, seed)?
        }
        None => {
            let sabre = SabreConfig::default();
            let r = bidirectional_route(&circuit, layout, iterations, |c, l| sabre_lite(c, &coupling, l, &sabre))?;
            (r, 1)
        }
    };
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    let report = finalize_route(&result, &circuit, &coupling);
    fs::write(out, result.circuit.emit()).with_context(|| format!("writing {}", out.display()))?;
    let doc = json!({
        "initial_layout": result.initial_layout.l2p(),
        "final_layout": result.final_layout.l2p(),
        "metrics": result.metrics,
        "circuit_file": out.file_name().map(|f| f.to_string_lossy().into_owned()),
        "verification": report,
        "runs": runs,
        "time_ms": time_ms,
    });
    write_json(&with_ext(out, "json"), &doc)?;
    println!("{}", json!({ "metrics": result.metrics, "verified": report.passed() }));
    report.into_result()?;
    Ok(())
}

fn cmd_bench(suite: &Path, out: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(suite).with_context(|| format!("reading {}", suite.display()))?;
    let section = parse_suite(&text)?;
    let base = suite.parent().unwrap_or(Path::new("."));
    let report = run_benchmark(&section, base)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv = report.csv();
    fs::write(out.join("bench.csv"), &csv)?;
    write_json(&out.join("bench.json"), &serde_json::to_value(&report)?)?;
    print!("{csv}");
    Ok(())
}

fn cmd_topologies(name: Option<&str>) -> anyhow::Result<()> {
    match name {
        Some(name) => {
            let c = topology(name)?;
            for (a, b) in c.undirected_edges() {
                println!("{a} {b}");
            }
        }
        None => {
            for name in topology_names() {
                let c = topology(&name)?;
                println!("{name} {}", c.n_qubits());
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Train { config, out, seed, deterministic } => cmd_train(&config, &out, seed, deterministic),
        Command::Synth { ckpt, target, random, runs, strategy, seed, out } => {
            cmd_synth(&ckpt, target.as_deref(), random, runs, strategy, seed, &out)
        }
        Command::Route { ckpt, baseline: _, circuit, coupling, iterations, budget, max_runs, seed, seed_layout, out } => {
            cmd_route(ckpt.as_deref(), &circuit, &coupling, iterations, budget, max_runs, seed, seed_layout, &out)
        }
        Command::Bench { suite, out } => cmd_bench(&suite, &out),
        Command::Topologies { name } => cmd_topologies(name.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
