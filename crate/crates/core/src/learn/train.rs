use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{Agent, GreedySchedule, Observation, Transition};
use crate::env::{Env, Instance, Terminal};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub episodes: usize,
    pub step_cap: usize,
    pub schedule: GreedySchedule,
    pub gamma: f64,
    pub shaping: RewardShaping,
    /// Fold slots with a single legal action into the preceding decision.
    pub decision_steps: bool,
}

/// How the environment reward is turned into the learner's reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardShaping {
    /// The environment reward as emitted.
    Raw,
    /// Reward minus `c0` per slot, plus a failure charge of `gamma * c0 / (1 - gamma)`.
    /// Equivalent to treating a completed SFC as an absorbing state that keeps
    /// earning `c0`, shifted so that staying active is no longer rewarded.
    Cost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    /// Mean immediate reward over every (SFC, step) pair of the episode.
    pub mean_reward: f64,
    pub completed_sfcs: usize,
    pub node_utilization: f64,
    /// Simulated time covered by the episode.
    pub wall_seconds: f64,
    pub steps: usize,
    pub last_loss: Option<f64>,
}

/// Learner reward for one slot of one SFC.
pub fn learning_reward(reward: f64, terminal: Option<Terminal>, c0: f64, gamma: f64, shaping: RewardShaping) -> f64 {
    match shaping {
        RewardShaping::Raw => reward,
        RewardShaping::Cost => {
            let fail = if terminal == Some(Terminal::Failure) { gamma * c0 / (1.0 - gamma) } else { 0.0 };
            reward - c0 - fail
        }
    }
}

struct OpenDecision {
    obs: Observation,
    action: usize,
    reward: f64,
    slots: usize,
}

/// Plays one episode from a fresh reset. When `learn` is set, transitions are
/// fed to the agent and it trains once per step.
pub fn run_episode(
    env: &mut Env,
    agent: &mut dyn Agent,
    episode: usize,
    epsilon: f64,
    learn: bool,
    opts: &TrainOptions,
    rng: &mut dyn RngCore,
) -> Result<EpisodeMetrics> {
    env.reset();
    let inst = Arc::clone(env.instance());
    let k_count = inst.sfc_count();
    let mut open: Vec<Option<OpenDecision>> = (0..k_count).map(|_| None).collect();
    let (mut steps, mut reward_sum, mut reward_count, mut last_loss) = (0usize, 0.0, 0usize, None);
    while !env.is_done() && steps < opts.step_cap {
        let active = env.active();
        let mut actions = vec![env.hold_action(); k_count];
        for &k in &active {
            let mask = env.action_mask(k);
            if opts.decision_steps && mask.len() == 1 && open[k].is_some() {
                actions[k] = mask[0];
                continue;
            }
            let obs = Observation { sfc: k, features: env.encode_state(k), key: env.tabular_key(k), mask };
            if let Some(prev) = open[k].take() {
                if learn {
                    agent.record(Transition {
                        state: prev.obs,
                        action: prev.action,
                        reward: prev.reward,
                        slots: prev.slots,
                        next: Some(obs.clone()),
                        terminal: None,
                    })?;
                }
            }
            let a = agent.act(&obs, epsilon, rng)?;
            actions[k] = a;
            open[k] = Some(OpenDecision { obs, action: a, reward: 0.0, slots: 0 });
        }
        let out = env.step(&actions)?;
        for &k in &active {
            let Some(r) = out.rewards[k] else { continue };
            reward_sum += r.value;
            reward_count += 1;
            let terminal = out.terminal[k];
            if let Some(o) = open[k].as_mut() {
                let discount = opts.gamma.powi(o.slots as i32);
                o.reward += discount * learning_reward(r.value, terminal, inst.reward.c0, opts.gamma, opts.shaping);
                o.slots += 1;
            }
            if terminal.is_some() {
                if let Some(o) = open[k].take() {
                    if learn {
                        agent.record(Transition {
                            state: o.obs,
                            action: o.action,
                            reward: o.reward,
                            slots: o.slots,
                            next: None,
                            terminal,
                        })?;
                    }
                }
            }
        }
        if learn {
            if let Some(l) = agent.learn(rng)? {
                last_loss = Some(l);
            }
        }
        steps += 1;
    }
    agent.end_episode();
    Ok(EpisodeMetrics {
        episode,
        mean_reward: if reward_count > 0 { reward_sum / reward_count as f64 } else { 0.0 },
        completed_sfcs: env.completed(),
        node_utilization: env.utilization(),
        wall_seconds: steps as f64 * inst.slot_length,
        steps,
        last_loss,
    })
}

/// Trains for `opts.episodes` episodes, calling `on_episode` after each.
pub fn train(
    instance: &Arc<Instance>,
    agent: &mut dyn Agent,
    opts: &TrainOptions,
    rng: &mut dyn RngCore,
    mut on_episode: impl FnMut(&EpisodeMetrics),
) -> Result<Vec<EpisodeMetrics>> {
    let mut env = Env::new(Arc::clone(instance));
    let mut out = Vec::with_capacity(opts.episodes);
    for e in 0..opts.episodes {
        let eps = opts.schedule.epsilon(e, opts.episodes);
        let m = run_episode(&mut env, agent, e + 1, eps, true, opts, rng)?;
        on_episode(&m);
        out.push(m);
    }
    Ok(out)
}

/// One greedy episode without learning; returns the final environment.
pub fn evaluate(
    instance: &Arc<Instance>,
    agent: &mut dyn Agent,
    opts: &TrainOptions,
    rng: &mut dyn RngCore,
) -> Result<(Env, EpisodeMetrics)> {
    let mut env = Env::new(Arc::clone(instance));
    let m = run_episode(&mut env, agent, 0, 0.0, false, opts, rng)?;
    Ok((env, m))
}
