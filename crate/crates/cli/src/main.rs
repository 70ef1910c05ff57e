use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sagin_sfc::config::RunConfig;
use sagin_sfc::experiment::{compare_agents, run_experiment, validate_log, InstanceSource, METRICS_FILE, SUMMARY_FILE};
use sagin_sfc::learn::AgentKind;
use sagin_sfc::oracle::solve_exact;
use sagin_sfc::Error;

macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(io::stdout(), $($arg)*)?
    };
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "sagin", version, about = "SFC scheduling over a time-expanded space-air-ground network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one agent and write per-episode metrics and a summary.
    Run(RunArgs),
    /// Train several agents over several seeds and report mean and spread.
    Compare(CompareArgs),
    /// Check a schedule log against every constraint family.
    Validate(ValidateArgs),
    /// Solve a tiny instance exhaustively and emit the optimal schedule log.
    SolveExact(SolveArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seed; falls back to SAGIN_SEED, then to `run.seed`.
    #[arg(long, env = "SAGIN_SEED")]
    seed: Option<u64>,
    /// Override a configuration key, e.g. `--set workload.count=40`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self, extra: &[String]) -> sagin_sfc::Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        overrides.extend_from_slice(extra);
        if let Some(seed) = self.seed {
            overrides.push(format!("run.seed={seed}"));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// ddqn, dqn, q_learning or sarsa.
    #[arg(long)]
    agent: Option<AgentKind>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Agents to compare; repeat or comma-separate.
    #[arg(long = "agent", value_delimiter = ',', default_values = ["ddqn", "dqn", "q_learning", "sarsa"])]
    agents: Vec<AgentKind>,
    /// Seeds; defaults to the run seed alone.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Schedule log in JSON-lines form.
    #[arg(long)]
    log: PathBuf,
    /// Serialized instance to check against instead of building one from the config.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Where to write the optimal schedule log; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config { .. }) => EXIT_CONFIG,
        Some(Error::Divergence(_)) => EXIT_DIVERGENCE,
        _ => EXIT_FAILURE,
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Validate(a) => validate(a),
        Command::SolveExact(a) => solve(a),
    }
}

fn run_overrides(episodes: Option<usize>, out_dir: Option<&Path>, agent: Option<AgentKind>) -> Vec<String> {
    let mut v = Vec::new();
    if let Some(e) = episodes {
        v.push(format!("run.episodes={e}"));
    }
    if let Some(d) = out_dir {
        v.push(format!("run.out_dir={}", toml_string(&d.to_string_lossy())));
    }
    if let Some(a) = agent {
        v.push(format!("agent.kind={}", toml_string(a.name())));
    }
    v
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn run(a: RunArgs) -> Result<u8> {
    let cfg = a.common.load(&run_overrides(a.episodes, a.out_dir.as_deref(), a.agent))?;
    let out = run_experiment(&cfg)?;
    let s = &out.summary;
    say!(
        "agent={} seed={} episodes={} completed={}/{} utilization={:.4} greedy_completed={}",
        s.agent, s.seed, s.episodes, s.final_completed, s.total_sfcs, s.final_utilization, s.eval_completed
    );
    say!(
        "wrote {} and {}",
        cfg.run.out_dir.join(METRICS_FILE).display(),
        cfg.run.out_dir.join(SUMMARY_FILE).display()
    );
    Ok(0)
}

fn compare(a: CompareArgs) -> Result<u8> {
    let cfg = a.common.load(&run_overrides(a.episodes, a.out_dir.as_deref(), None))?;
    let seeds = if a.seeds.is_empty() { vec![cfg.run.seed] } else { a.seeds.clone() };
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let cmp = compare_agents(&cfg, &a.agents, &seeds, threads)?;
    say!("{:<12} {:>5} {:>20} {:>24}", "agent", "seeds", "completed", "utilization");
    for r in &cmp.rows {
        say!(
            "{:<12} {:>5} {:>10.3} ± {:<7.3} {:>12.4} ± {:<9.4}",
            r.agent.name(),
            r.seeds,
            r.completed_mean,
            r.completed_std,
            r.utilization_mean,
            r.utilization_std
        );
    }
    for c in &cmp.cells {
        say!("cell agent={} seed={} instance={}", c.agent, c.seed, c.instance_digest);
    }
    fs::create_dir_all(&cfg.run.out_dir)?;
    fs::write(cfg.run.out_dir.join("comparison.csv"), cmp.to_csv())?;
    fs::write(cfg.run.out_dir.join("comparison.json"), cmp.to_json()?)?;
    Ok(0)
}

fn instance_source(common: &Common, instance: Option<PathBuf>) -> Result<InstanceSource> {
    Ok(match instance {
        Some(p) => InstanceSource::File(p),
        None => {
            let cfg = common.load(&[])?;
            let seed = cfg.run.seed;
            InstanceSource::Config { config: Box::new(cfg), seed }
        }
    })
}

fn validate(a: ValidateArgs) -> Result<u8> {
    let source = instance_source(&a.common, a.instance)?;
    let report = validate_log(&a.log, &source).with_context(|| format!("validating {}", a.log.display()))?;
    if report.is_feasible() {
        say!("feasible objective={}", report.objective);
        Ok(0)
    } else {
        for v in &report.violations {
            say!("{v}");
        }
        say!("infeasible violations={} objective={}", report.violations.len(), report.objective);
        Ok(EXIT_FAILURE)
    }
}

fn solve(a: SolveArgs) -> Result<u8> {
    let inst = instance_source(&a.common, a.instance)?.load()?;
    let sol = solve_exact(Arc::new(inst))?;
    match &a.out {
        Some(p) => {
            sol.log.write_jsonl(std::io::BufWriter::new(fs::File::create(p)?))?;
            say!("objective={} states={} wrote {}", sol.objective, sol.states, p.display());
        }
        None => {
            write!(io::stdout(), "{}", sol.log.to_jsonl())?;
            eprintln!("objective={} states={}", sol.objective, sol.states);
        }
    }
    Ok(0)
}
