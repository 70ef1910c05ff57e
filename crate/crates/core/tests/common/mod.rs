#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sagin_sfc::channel::{g2u_snr, u2u_path_loss_db};
use sagin_sfc::config::RunConfig;
use sagin_sfc::energy::uav_hover_power;
use sagin_sfc::env::{
    check_schedule, contention_demo_instance, deferral_actions, naive_actions, objective_value, run_script, Env, Family,
    Instance, Record, ScheduleLog, ValidatorOptions,
};
use sagin_sfc::experiment::{compare_agents, mean_std, train_on, Comparison, TrainedRun};
use sagin_sfc::learn::{evaluate, make_agent, train, AgentConfig, AgentKind, DenseNet, TrainOptions};
use sagin_sfc::oracle::{random_tiny_instance, solve_exact};
use sagin_sfc::topology::LinkKind;

/// Reference values evaluated independently at 30 significant digits.
pub const G2U_SNR_GOLDEN: f64 = 5000.0;
pub const U2U_PATH_LOSS_GOLDEN_DB: f64 = 80.054_224_834_232_12;
pub const HOVER_POWER_GOLDEN_W: f64 = 9.774_085_869_835_1;
pub const GOLDEN_TOLERANCE: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug)]
pub struct Golden {
    pub name: &'static str,
    pub computed: f64,
    pub expected: f64,
}

impl Golden {
    pub fn ok(&self) -> bool {
        rel_err(self.computed, self.expected) <= GOLDEN_TOLERANCE
    }
}

pub fn golden_values() -> Vec<Golden> {
    vec![
        Golden { name: "g2u snr", computed: g2u_snr(0.5, 1e8, 100.0).unwrap(), expected: G2U_SNR_GOLDEN },
        Golden {
            name: "u2u path loss",
            computed: u2u_path_loss_db(2.4e9, 100.0).unwrap(),
            expected: U2U_PATH_LOSS_GOLDEN_DB,
        },
        Golden {
            name: "hover power",
            computed: uav_hover_power(0.5, 0.2, 4.0, 9.8, 1.225).unwrap(),
            expected: HOVER_POWER_GOLDEN_W,
        },
    ]
}

pub const GRADIENT_WIDTHS: [usize; 5] = [8, 64, 32, 32, 4];
pub const GRADIENT_STEP: f64 = 1e-5;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
const GRADIENT_FLOOR: f64 = 1e-6;

/// Dense forward pass written against the documented parameter layout:
/// per layer, an `out x in` row-major weight block followed by the biases.
pub fn reference_forward(widths: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let mut off = 0;
    let layers = widths.len() - 1;
    for l in 0..layers {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let w = &params[off..off + n_in * n_out];
        let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        off += n_in * n_out + n_out;
        a = (0..n_out)
            .map(|o| {
                let z: f64 = b[o] + (0..n_in).map(|i| w[o * n_in + i] * a[i]).sum::<f64>();
                if l + 1 < layers {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect();
    }
    a
}

fn projected(widths: &[usize], params: &[f64], x: &[f64], g: &[f64]) -> f64 {
    reference_forward(widths, params, x).iter().zip(g).map(|(o, gi)| o * gi).sum()
}

/// Largest relative error between backpropagated and central-difference
/// gradients of a random projection of the output.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = DenseNet::<f64>::new(&GRADIENT_WIDTHS, &mut rng).unwrap();
    let x: Vec<f64> = (0..GRADIENT_WIDTHS[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..GRADIENT_WIDTHS[4]).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let analytic = net.gradient(&x, &g).unwrap();
    let mut params = net.params().to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let keep = params[i];
        params[i] = keep + GRADIENT_STEP;
        let up = projected(&GRADIENT_WIDTHS, &params, &x, &g);
        params[i] = keep - GRADIENT_STEP;
        let down = projected(&GRADIENT_WIDTHS, &params, &x, &g);
        params[i] = keep;
        let numeric = (up - down) / (2.0 * GRADIENT_STEP);
        let scale = analytic[i].abs().max(numeric.abs()).max(GRADIENT_FLOOR);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

pub struct Mutation {
    pub family: Family,
    pub description: &'static str,
    pub log: ScheduleLog,
    pub instance: Instance,
}

impl Mutation {
    pub fn flagged(&self) -> bool {
        check_schedule(&self.log, &self.instance, &ValidatorOptions::default())
            .unwrap()
            .iter()
            .any(|v| v.family == self.family)
    }
}

fn without(log: &ScheduleLog, r: Record) -> ScheduleLog {
    let mut out = log.clone();
    assert!(out.remove(&r), "record {r:?} not in the base schedule");
    out
}

fn with(log: &ScheduleLog, extra: &[Record]) -> ScheduleLog {
    let mut out = log.clone();
    for r in extra {
        out.push(r.clone());
    }
    out
}

/// Feasible base schedule: the deferral script on the contention demo.
pub fn base_schedule() -> (Instance, ScheduleLog) {
    let inst = contention_demo_instance();
    let env = run_script(Arc::new(inst.clone()), &deferral_actions()).unwrap();
    (inst, env.log().clone())
}

/// One targeted corruption per constraint family, each applied to the
/// feasible deferral schedule or to the instance it is checked against.
pub fn mutation_matrix() -> Vec<Mutation> {
    let (inst, log) = base_schedule();
    let m = |family, description, log, instance| Mutation { family, description, log, instance };
    let mut out = Vec::new();

    out.push(m(
        Family::SingleDeployment,
        "place SFC 0's only VNF a second time on UAV 3",
        with(&log, &[Record::x(0, 0, 3, 2), Record::y(0, 3, 2)]),
        inst.clone(),
    ));
    out.push(m(
        Family::PassThrough,
        "drop SFC 0's presence on UAV 2 while its VNF runs there",
        without(&log, Record::y(0, 2, 2)),
        inst.clone(),
    ));
    out.push(m(
        Family::SequentialOrder,
        "drop SFC 1's first VNF placement",
        without(&log, Record::x(1, 0, 2, 2)),
        inst.clone(),
    ));
    out.push(m(
        Family::FlowConservation,
        "send SFC 0 to the destination from UAV 3 although its data is on UAV 2",
        with(&without(&log, Record::z(0, 2, 1, 3)), &[Record::z(0, 3, 1, 3)]),
        inst.clone(),
    ));
    out.push(m(
        Family::ExclusiveActivity,
        "store SFC 2 on UAV 3 while it is processing there",
        with(&log, &[Record::rho(2, 3, 3)]),
        inst.clone(),
    ));

    let mut small_compute = inst.clone();
    small_compute.nodes[2].compute_capacity = 100.0;
    out.push(m(Family::ComputeCapacity, "shrink UAV 2 compute below its slot-2 load", log.clone(), small_compute));

    let mut small_storage = inst.clone();
    small_storage.nodes[5].storage_capacity = 20.0;
    out.push(m(Family::StorageCapacity, "shrink satellite 5 storage below SFC 1's data", log.clone(), small_storage));

    let mut thin_link = inst.clone();
    thin_link.links.insert(0, 2, 1, LinkKind::G2U, 30.0);
    thin_link.reindex();
    out.push(m(Family::LinkCapacity, "thin the slot-1 uplink below the two SFCs it carries", log.clone(), thin_link));

    let mut low_energy = inst.clone();
    low_energy.nodes[2].energy_capacity = 5.0;
    out.push(m(Family::EnergyBudget, "cut UAV 2's energy budget below its baseline draw", log.clone(), low_energy));

    let mut tight = inst;
    tight.sfcs[1].deadline = 9;
    out.push(m(Family::Deadline, "tighten SFC 1's deadline below its delivery slot", log, tight));
    out
}

pub struct DemoScores {
    pub deferral: usize,
    pub naive: usize,
    pub deferral_feasible: bool,
    pub naive_feasible: bool,
}

pub fn demo_scores() -> DemoScores {
    let inst = Arc::new(contention_demo_instance());
    let score = |script: &[Vec<usize>]| {
        let env = run_script(Arc::clone(&inst), script).unwrap();
        let feasible = check_schedule(env.log(), &inst, &ValidatorOptions::default()).unwrap().is_empty();
        (objective_value(env.log(), &inst).unwrap(), feasible)
    };
    let (deferral, deferral_feasible) = score(&deferral_actions());
    let (naive, naive_feasible) = score(&naive_actions());
    DemoScores { deferral, naive, deferral_feasible, naive_feasible }
}

pub const TINY_MAX_NODES: usize = 4;
pub const TINY_EPISODES: usize = 40;

pub struct TinyCase {
    pub index: usize,
    pub nodes: usize,
    pub sfcs: usize,
    pub slots: usize,
    pub oracle: usize,
    pub witness_violations: usize,
    pub witness_objective: usize,
    /// Validator objective of each agent's greedy schedule, plus its violation count.
    pub agents: Vec<(AgentKind, usize, usize)>,
}

impl TinyCase {
    pub fn ok(&self) -> bool {
        self.nodes <= TINY_MAX_NODES
            && self.sfcs <= 3
            && self.slots <= 10
            && self.witness_violations == 0
            && self.witness_objective == self.oracle
            && self.agents.iter().all(|&(_, obj, viol)| viol == 0 && obj <= self.oracle)
    }
}

fn tiny_options(inst: &Instance, cfg: &AgentConfig) -> TrainOptions {
    TrainOptions {
        episodes: TINY_EPISODES,
        step_cap: inst.slot_count,
        schedule: cfg.schedule(),
        gamma: cfg.gamma,
        shaping: cfg.shaping,
        decision_steps: cfg.decision_steps,
    }
}

/// Solves `count` random tiny instances exactly and trains every agent briefly on each.
pub fn oracle_sweep(count: usize, seed: u64) -> Vec<TinyCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|index| {
            let inst = Arc::new(random_tiny_instance(&mut rng, TINY_MAX_NODES));
            let sol = solve_exact(Arc::clone(&inst)).unwrap();
            let witness_violations = check_schedule(&sol.log, &inst, &ValidatorOptions::default()).unwrap().len();
            let witness_objective = objective_value(&sol.log, &inst).unwrap();
            let agents = AgentKind::ALL
                .iter()
                .map(|&kind| {
                    let cfg = AgentConfig { kind, ..AgentConfig::default() };
                    let mut agent_rng = ChaCha8Rng::seed_from_u64(seed ^ index as u64);
                    let mut agent = make_agent(
                        &cfg,
                        Env::state_len(inst.node_count(), inst.sfc_count()),
                        inst.node_count() + 1,
                        &mut agent_rng,
                    )
                    .unwrap();
                    let opts = tiny_options(&inst, &cfg);
                    train(&inst, agent.as_mut(), &opts, &mut agent_rng, |_| {}).unwrap();
                    let (env, _) = evaluate(&inst, agent.as_mut(), &opts, &mut agent_rng).unwrap();
                    let viol = check_schedule(env.log(), &inst, &ValidatorOptions::default()).unwrap().len();
                    (kind, objective_value(env.log(), &inst).unwrap(), viol)
                })
                .collect();
            TinyCase {
                index,
                nodes: inst.node_count(),
                sfcs: inst.sfc_count(),
                slots: inst.slot_count,
                oracle: sol.objective,
                witness_violations,
                witness_objective,
                agents,
            }
        })
        .collect()
}

pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const CONVERGENCE_EPISODES: usize = 500;
pub const WINDOW: usize = 50;

/// Default desk-scale configuration: 10 UAVs, one satellite, 20 SFCs.
pub fn desk_config(agent: AgentKind, seed: u64, sfcs: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scenario.uav_count = 10;
    cfg.scenario.satellite_count = 1;
    cfg.workload.count = sfcs;
    cfg.agent.kind = agent;
    cfg.run.episodes = CONVERGENCE_EPISODES;
    cfg.run.seed = seed;
    cfg
}

pub fn desk_run(agent: AgentKind, seed: u64, sfcs: usize) -> TrainedRun {
    let cfg = desk_config(agent, seed, sfcs);
    let inst = Arc::new(cfg.build_instance(seed).unwrap());
    train_on(&cfg, inst).unwrap()
}

pub struct Convergence {
    /// Per seed: mean reward of the first and the last window.
    pub reward_windows: Vec<(u64, f64, f64)>,
    /// Seed-averaged completed count per consecutive window.
    pub completed_windows: Vec<f64>,
}

impl Convergence {
    pub fn improved_seeds(&self) -> usize {
        self.reward_windows.iter().filter(|(_, first, last)| last > first).count()
    }

    pub fn completed_non_decreasing(&self) -> bool {
        self.completed_windows.windows(2).all(|w| w[1] >= w[0])
    }
}

pub fn convergence(runs: &[(u64, TrainedRun)]) -> Convergence {
    let mut reward_windows = Vec::new();
    let episodes = runs[0].1.metrics.len();
    let mut completed_windows = vec![0.0; episodes / WINDOW];
    for (seed, run) in runs {
        let m = &run.metrics;
        let mean = |s: &[sagin_sfc::learn::EpisodeMetrics]| s.iter().map(|e| e.mean_reward).sum::<f64>() / s.len() as f64;
        reward_windows.push((*seed, mean(&m[..WINDOW]), mean(&m[m.len() - WINDOW..])));
        for (w, chunk) in m.chunks_exact(WINDOW).enumerate() {
            completed_windows[w] +=
                chunk.iter().map(|e| e.completed_sfcs as f64).sum::<f64>() / (WINDOW * runs.len()) as f64;
        }
    }
    Convergence { reward_windows, completed_windows }
}

pub fn agent_comparison() -> Comparison {
    let cfg = desk_config(AgentKind::Ddqn, SEEDS[0], 20);
    compare_agents(&cfg, &AgentKind::ALL, &SEEDS, 1).unwrap()
}

pub struct Ordering {
    pub lines: Vec<String>,
    pub ok: bool,
}

/// `a >= b`, treating a shortfall within one pooled standard deviation as a tie.
fn at_least(cmp: &Comparison, a: AgentKind, b: AgentKind) -> bool {
    let (ra, rb) = (cmp.row(a).unwrap(), cmp.row(b).unwrap());
    let pooled = ((ra.completed_std.powi(2) + rb.completed_std.powi(2)) / 2.0).sqrt();
    ra.completed_mean >= rb.completed_mean - pooled
}

fn strictly_above(cmp: &Comparison, a: AgentKind, b: AgentKind) -> bool {
    cmp.row(a).unwrap().completed_mean > cmp.row(b).unwrap().completed_mean
}

pub fn ordering(cmp: &Comparison) -> Ordering {
    use AgentKind::*;
    let checks = [
        ("ddqn >= dqn", at_least(cmp, Ddqn, Dqn)),
        ("dqn >= sarsa", at_least(cmp, Dqn, Sarsa)),
        ("dqn >= q_learning", at_least(cmp, Dqn, QLearning)),
        ("ddqn > sarsa", strictly_above(cmp, Ddqn, Sarsa)),
        ("ddqn > q_learning", strictly_above(cmp, Ddqn, QLearning)),
    ];
    Ordering {
        lines: checks.iter().map(|(n, ok)| format!("{n}: {}", if *ok { "yes" } else { "no" })).collect(),
        ok: checks.iter().all(|(_, ok)| *ok),
    }
}

pub const UTILIZATION_SFC_COUNTS: [usize; 3] = [5, 10, 20];

/// Mean greedy utilization of DDQN over the seeds, per SFC count.
pub fn utilization_by_count(known: &[(usize, Vec<f64>)]) -> Vec<(usize, f64)> {
    UTILIZATION_SFC_COUNTS
        .iter()
        .map(|&count| {
            let values = match known.iter().find(|(c, _)| *c == count) {
                Some((_, v)) => v.clone(),
                None => SEEDS.iter().map(|&s| desk_run(AgentKind::Ddqn, s, count).summary.eval_utilization).collect(),
            };
            (count, mean_std(&values).0)
        })
        .collect()
}
