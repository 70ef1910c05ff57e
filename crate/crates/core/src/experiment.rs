//! Experiment runner: train and evaluate agents, write metrics, compare agents.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::config::{stream_rng, RunConfig, Stream};
use crate::env::{check_schedule, objective_value, Env, Instance, ScheduleLog, ValidatorOptions, Violation};
use crate::learn::{evaluate, make_agent, train, AgentKind, EpisodeMetrics, TrainOptions};
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SCHEDULE_FILE: &str = "schedule.jsonl";
pub const INSTANCE_FILE: &str = "instance.json";
pub const CHECKPOINT_FILE: &str = "network.ckpt";

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub episode: usize,
    pub mean_reward: f64,
    pub completed_sfcs: usize,
    pub node_utilization: f64,
    pub wall_seconds: f64,
}

impl From<&EpisodeMetrics> for MetricRecord {
    fn from(m: &EpisodeMetrics) -> Self {
        MetricRecord {
            episode: m.episode,
            mean_reward: m.mean_reward,
            completed_sfcs: m.completed_sfcs,
            node_utilization: m.node_utilization,
            wall_seconds: m.wall_seconds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub agent: AgentKind,
    pub episodes: usize,
    pub total_sfcs: usize,
    /// Completed SFCs in the last training episode.
    pub final_completed: usize,
    pub final_utilization: f64,
    /// Completed SFCs of a greedy episode after training.
    pub eval_completed: usize,
    pub eval_utilization: f64,
    pub eval_mean_reward: f64,
    pub instance_digest: String,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub summary: RunSummary,
    pub metrics: Vec<EpisodeMetrics>,
    pub eval_log: ScheduleLog,
    pub checkpoint: Option<String>,
    pub instance: Arc<Instance>,
}

pub fn train_options(cfg: &RunConfig) -> TrainOptions {
    TrainOptions {
        episodes: cfg.run.episodes,
        step_cap: cfg.run.step_cap.min(cfg.scenario.slots),
        schedule: cfg.agent.schedule(),
        gamma: cfg.agent.gamma,
        shaping: cfg.agent.shaping,
        decision_steps: cfg.agent.decision_steps,
    }
}

/// Trains `cfg.agent` on `instance` with the streams of `cfg.run.seed`, then
/// plays one greedy episode.
pub fn train_on(cfg: &RunConfig, instance: Arc<Instance>) -> Result<TrainedRun> {
    let seed = cfg.run.seed;
    let opts = train_options(cfg);
    let mut init_rng = stream_rng(seed, Stream::AgentInit);
    let mut agent = make_agent(
        &cfg.agent,
        Env::state_len(instance.node_count(), instance.sfc_count()),
        instance.node_count() + 1,
        &mut init_rng,
    )?;
    let mut rng = stream_rng(seed, Stream::Exploration);
    let metrics = train(&instance, agent.as_mut(), &opts, &mut rng, |_| {})?;
    let (env, eval) = evaluate(&instance, agent.as_mut(), &opts, &mut rng)?;
    let last = metrics.last().expect("at least one episode");
    let summary = RunSummary {
        seed,
        agent: cfg.agent.kind,
        episodes: cfg.run.episodes,
        total_sfcs: instance.sfc_count(),
        final_completed: last.completed_sfcs,
        final_utilization: last.node_utilization,
        eval_completed: eval.completed_sfcs,
        eval_utilization: eval.node_utilization,
        eval_mean_reward: eval.mean_reward,
        instance_digest: instance.digest(),
        config: cfg.clone(),
    };
    Ok(TrainedRun { summary, metrics, eval_log: env.log().clone(), checkpoint: agent.checkpoint(), instance })
}

/// Builds the instance from `cfg`, trains, and writes the metric files into `cfg.run.out_dir`.
pub fn run_experiment(cfg: &RunConfig) -> Result<TrainedRun> {
    let instance = Arc::new(cfg.build_instance(cfg.run.seed)?);
    let run = train_on(cfg, instance)?;
    let dir = &cfg.run.out_dir;
    fs::create_dir_all(dir)?;
    write_metrics_csv(&dir.join(METRICS_FILE), &run.metrics)?;
    fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&run.summary)? + "\n")?;
    if cfg.run.write_schedule {
        run.eval_log.write_jsonl(std::io::BufWriter::new(fs::File::create(dir.join(SCHEDULE_FILE))?))?;
        fs::write(dir.join(INSTANCE_FILE), serde_json::to_string(run.instance.as_ref())?)?;
    }
    if cfg.run.write_checkpoint {
        if let Some(text) = &run.checkpoint {
            fs::write(dir.join(CHECKPOINT_FILE), text)?;
        }
    }
    Ok(run)
}

pub fn write_metrics_csv(path: &Path, metrics: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for m in metrics {
        w.serialize(MetricRecord::from(m)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// One (agent, seed) cell of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub agent: AgentKind,
    pub seed: u64,
    pub instance_digest: String,
    pub eval_completed: usize,
    pub eval_utilization: f64,
    /// Mean completed count over the last (up to) 50 training episodes.
    pub tail_completed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub agent: AgentKind,
    pub seeds: usize,
    pub completed_mean: f64,
    pub completed_std: f64,
    pub utilization_mean: f64,
    pub utilization_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub cells: Vec<ComparisonCell>,
}

impl Comparison {
    pub fn row(&self, agent: AgentKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.agent == agent)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("agent,seeds,completed_mean,completed_std,utilization_mean,utilization_std\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.agent, r.seeds, r.completed_mean, r.completed_std, r.utilization_mean, r.utilization_std
            ));
        }
        s
    }
}

/// Sample mean and standard deviation (n - 1 denominator; zero for one sample).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains every agent on the instance of every seed; cells run on up to `threads` threads.
pub fn compare_agents(cfg: &RunConfig, agents: &[AgentKind], seeds: &[u64], threads: usize) -> Result<Comparison> {
    if agents.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("comparison needs at least one agent and one seed"));
    }
    let instances: Vec<Arc<Instance>> =
        seeds.iter().map(|&s| cfg.build_instance(s).map(Arc::new)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..agents.len()).flat_map(|a| (0..seeds.len()).map(move |s| (a, s))).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ComparisonCell>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1).min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(a, s)) = jobs.get(i) else { break };
                let mut cell_cfg = cfg.clone();
                cell_cfg.agent.kind = agents[a];
                cell_cfg.run.seed = seeds[s];
                let out = train_on(&cell_cfg, Arc::clone(&instances[s])).map(|run| {
                    let tail = &run.metrics[run.metrics.len().saturating_sub(50)..];
                    ComparisonCell {
                        agent: agents[a],
                        seed: seeds[s],
                        instance_digest: run.summary.instance_digest.clone(),
                        eval_completed: run.summary.eval_completed,
                        eval_utilization: run.summary.eval_utilization,
                        tail_completed: tail.iter().map(|m| m.completed_sfcs as f64).sum::<f64>() / tail.len() as f64,
                    }
                });
                results.lock().expect("no worker panics while holding the lock")[i] = Some(out);
            });
        }
    });
    let cells: Vec<ComparisonCell> = results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<_>>()?;
    let rows = agents
        .iter()
        .map(|&agent| {
            let mine: Vec<&ComparisonCell> = cells.iter().filter(|c| c.agent == agent).collect();
            let completed: Vec<f64> = mine.iter().map(|c| c.eval_completed as f64).collect();
            let util: Vec<f64> = mine.iter().map(|c| c.eval_utilization).collect();
            let (completed_mean, completed_std) = mean_std(&completed);
            let (utilization_mean, utilization_std) = mean_std(&util);
            ComparisonRow { agent, seeds: mine.len(), completed_mean, completed_std, utilization_mean, utilization_std }
        })
        .collect();
    Ok(Comparison { rows, cells })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub objective: usize,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_log_against(log: &ScheduleLog, instance: &Instance) -> Result<ValidationReport> {
    let violations = check_schedule(log, instance, &ValidatorOptions::default())?;
    let objective = objective_value(log, instance)?;
    Ok(ValidationReport { violations, objective })
}

/// Where the instance to validate against comes from.
#[derive(Clone, Debug)]
pub enum InstanceSource {
    Config { config: Box<RunConfig>, seed: u64 },
    File(PathBuf),
}

impl InstanceSource {
    pub fn load(&self) -> Result<Instance> {
        match self {
            InstanceSource::Config { config, seed } => config.build_instance(*seed),
            InstanceSource::File(path) => read_instance(path),
        }
    }
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)?;
    let mut inst: Instance = serde_json::from_str(&text)?;
    inst.reindex();
    Ok(inst)
}

pub fn validate_log(log_path: &Path, source: &InstanceSource) -> Result<ValidationReport> {
    let log = ScheduleLog::read_jsonl(std::io::BufReader::new(fs::File::open(log_path)?))?;
    validate_log_against(&log, &source.load()?)
}
