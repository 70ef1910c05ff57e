//! Q-value learners and the training loop.
//!
//! The deep agents use a dense network over [`Env::encode_state`] features;
//! the tabular agents index a table by [`Env::tabular_key`].

mod dqn;
mod net;
mod optim;
mod policy;
mod replay;
mod tabular;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

pub use dqn::{ddqn_target, dqn_target, train_step, DqnAgent, DqnSettings, DqnVariant, StoredTransition};
pub use net::{q_network_widths, DenseNet};
pub use optim::{Optimizer, OptimizerKind};
pub use policy::{epsilon_greedy, masked_argmax, masked_max, GreedySchedule};
pub use replay::ReplayMemory;
pub use tabular::{tabular_update, Bootstrap, QTable, TabularAgent};
pub use train::{evaluate, learning_reward, run_episode, train, EpisodeMetrics, RewardShaping, TrainOptions};

use crate::env::{Env, TabularKey, Terminal};
use crate::{Error, Result};

/// What an agent sees of one SFC at decision time.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub sfc: usize,
    pub features: Vec<f64>,
    pub key: TabularKey,
    pub mask: Vec<usize>,
}

impl Observation {
    pub fn capture(env: &Env, k: usize) -> Self {
        Observation { sfc: k, features: env.encode_state(k), key: env.tabular_key(k), mask: env.action_mask(k) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    /// Reward the learner trains on (see [`learning_reward`]), discounted
    /// per slot when the decision spans several slots.
    pub reward: f64,
    /// Slots between this decision and the next; the bootstrap is discounted
    /// by `gamma^slots`.
    pub slots: usize,
    /// `None` when the SFC finished on this step.
    pub next: Option<Observation>,
    pub terminal: Option<Terminal>,
}

pub trait Agent: Send {
    fn kind(&self) -> AgentKind;

    fn act(&mut self, obs: &Observation, epsilon: f64, rng: &mut dyn RngCore) -> Result<usize>;

    fn record(&mut self, t: Transition) -> Result<()>;

    /// Called once per environment step after all transitions are recorded;
    /// returns the last training loss, if any update ran.
    fn learn(&mut self, _rng: &mut dyn RngCore) -> Result<Option<f64>> {
        Ok(None)
    }

    fn end_episode(&mut self) {}

    /// Text checkpoint of the learned parameters, if the agent has one.
    fn checkpoint(&self) -> Option<String> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Ddqn,
    Dqn,
    QLearning,
    Sarsa,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Ddqn, AgentKind::Dqn, AgentKind::QLearning, AgentKind::Sarsa];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Ddqn => "ddqn",
            AgentKind::Dqn => "dqn",
            AgentKind::QLearning => "q_learning",
            AgentKind::Sarsa => "sarsa",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ddqn" => Ok(AgentKind::Ddqn),
            "dqn" => Ok(AgentKind::Dqn),
            "q_learning" | "qlearning" | "q" => Ok(AgentKind::QLearning),
            "sarsa" => Ok(AgentKind::Sarsa),
            other => Err(Error::invalid(format!("unknown agent `{other}` (expected ddqn, dqn, q_learning or sarsa)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

/// Learner hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub optimizer: OptimizerKind,
    pub precision: Precision,
    pub learning_rate: f64,
    /// Step size of the tabular learners.
    pub tabular_rate: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync: usize,
    pub updates_per_step: usize,
    pub greedy_start: f64,
    pub greedy_end: f64,
    pub greedy_ramp: f64,
    pub shaping: RewardShaping,
    /// Discount once per decision instead of once per slot.
    pub decision_steps: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        let s = GreedySchedule::default();
        AgentConfig {
            kind: AgentKind::Ddqn,
            optimizer: OptimizerKind::Adam,
            precision: Precision::F64,
            learning_rate: 0.001,
            tabular_rate: 0.1,
            gamma: 0.9,
            replay_capacity: 500,
            batch_size: 8,
            target_sync: 200,
            updates_per_step: 4,
            greedy_start: s.start,
            greedy_end: s.end,
            greedy_ramp: s.ramp_fraction,
            shaping: RewardShaping::Cost,
            decision_steps: true,
        }
    }
}

impl AgentConfig {
    pub fn schedule(&self) -> GreedySchedule {
        GreedySchedule { start: self.greedy_start, end: self.greedy_end, ramp_fraction: self.greedy_ramp }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.tabular_rate > 0.0 && self.tabular_rate <= 1.0) {
            return Err(Error::config("agent.learning_rate", "learning rates must be positive (tabular rate at most 1)"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("agent.gamma", "discount must lie in [0, 1)"));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::config("agent.batch_size", "batch must be positive and fit in the replay memory"));
        }
        if self.target_sync == 0 || self.updates_per_step == 0 {
            return Err(Error::config("agent.target_sync", "target sync and updates per step must be positive"));
        }
        self.schedule().validate().map_err(|e| Error::config("agent.greedy", e.to_string()))
    }

    fn dqn_settings(&self, variant: DqnVariant) -> DqnSettings {
        DqnSettings {
            variant,
            optimizer: self.optimizer,
            learning_rate: self.learning_rate,
            gamma: self.gamma,
            replay_capacity: self.replay_capacity,
            batch_size: self.batch_size,
            target_sync: self.target_sync,
            updates_per_step: self.updates_per_step,
        }
    }
}

/// Builds the learner described by `cfg` for states of `state_len` features and `actions` outputs.
pub fn make_agent<R: Rng + ?Sized>(
    cfg: &AgentConfig,
    state_len: usize,
    actions: usize,
    rng: &mut R,
) -> Result<Box<dyn Agent>> {
    cfg.validate()?;
    let variant = match cfg.kind {
        AgentKind::Ddqn => DqnVariant::Double,
        AgentKind::Dqn => DqnVariant::Vanilla,
        AgentKind::QLearning => return Ok(Box::new(TabularAgent::q_learning(actions, cfg.tabular_rate, cfg.gamma))),
        AgentKind::Sarsa => return Ok(Box::new(TabularAgent::sarsa(actions, cfg.tabular_rate, cfg.gamma))),
    };
    let settings = cfg.dqn_settings(variant);
    Ok(match cfg.precision {
        Precision::F64 => Box::new(DqnAgent::<f64>::new(state_len, actions, settings, rng)?),
        Precision::F32 => Box::new(DqnAgent::<f32>::new(state_len, actions, settings, rng)?),
    })
}
