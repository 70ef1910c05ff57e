use rand::{Rng, RngCore};

use super::net::{q_network_widths, DenseNet};
use super::optim::{Optimizer, OptimizerKind};
use super::policy::{epsilon_greedy, masked_argmax, masked_max};
use super::replay::ReplayMemory;
use super::{Agent, AgentKind, Observation, Transition};
use crate::{Error, Result, Scalar};

/// Transition as stored in replay memory.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredTransition<S> {
    pub state: Vec<S>,
    pub action: usize,
    pub reward: S,
    /// Slots until `next_state`; the bootstrap is discounted by `gamma^slots`.
    pub slots: u32,
    /// `None` when the transition ended the SFC.
    pub next_state: Option<Vec<S>>,
    pub next_mask: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DqnVariant {
    /// Online network selects the next action, target network evaluates it.
    Double,
    /// Target network both selects and evaluates.
    Vanilla,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DqnSettings {
    pub variant: DqnVariant,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync: usize,
    pub updates_per_step: usize,
}

/// `r` when `done`, else `r + gamma * Q_target(s', argmax_a Q_online(s', a))`.
pub fn ddqn_target<S: Scalar>(
    reward: S,
    next_state: &[S],
    next_mask: &[usize],
    done: bool,
    online: &DenseNet<S>,
    target: &DenseNet<S>,
    gamma: S,
) -> Result<S> {
    if done {
        return Ok(reward);
    }
    let a = masked_argmax(&online.forward(next_state)?, next_mask)?;
    Ok(reward + gamma * target.forward(next_state)?[a])
}

/// `r` when `done`, else `r + gamma * max_a Q_target(s', a)`.
pub fn dqn_target<S: Scalar>(
    reward: S,
    next_state: &[S],
    next_mask: &[usize],
    done: bool,
    target: &DenseNet<S>,
    gamma: S,
) -> Result<S> {
    if done {
        return Ok(reward);
    }
    masked_max(&target.forward(next_state)?, next_mask).map(|m| reward + gamma * m)
}

/// One gradient step on the mean squared TD error of `batch`; returns the loss.
pub fn train_step<S: Scalar>(
    online: &mut DenseNet<S>,
    target: &DenseNet<S>,
    optimizer: &mut Optimizer<S>,
    batch: &[&StoredTransition<S>],
    gamma: S,
    variant: DqnVariant,
) -> Result<S> {
    if batch.is_empty() {
        return Err(Error::invalid("empty training batch"));
    }
    let scale = S::of(2.0 / batch.len() as f64);
    let mut grad = vec![S::zero(); online.param_count()];
    let mut loss = S::zero();
    let mut grad_out = vec![S::zero(); online.output_len()];
    for tr in batch {
        let discount = gamma.powi(tr.slots as i32);
        let y = match &tr.next_state {
            None => tr.reward,
            Some(next) => match variant {
                DqnVariant::Double => ddqn_target(tr.reward, next, &tr.next_mask, false, online, target, discount)?,
                DqnVariant::Vanilla => dqn_target(tr.reward, next, &tr.next_mask, false, target, discount)?,
            },
        };
        let acts = online.forward_trace(&tr.state)?;
        let q = acts.last().expect("trace holds the output")[tr.action];
        let err = q - y;
        loss += err * err;
        grad_out.fill(S::zero());
        grad_out[tr.action] = scale * err;
        online.backward(&acts, &grad_out, &mut grad)?;
    }
    let loss = loss / S::of(batch.len() as f64);
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {loss}")));
    }
    optimizer.step(online.params_mut(), &grad)?;
    if !online.all_finite() {
        return Err(Error::Divergence("non-finite network parameters".into()));
    }
    Ok(loss)
}

/// Deep Q-learning agent with replay memory and a periodically synced target network.
#[derive(Clone, Debug)]
pub struct DqnAgent<S> {
    settings: DqnSettings,
    online: DenseNet<S>,
    target: DenseNet<S>,
    optimizer: Optimizer<S>,
    memory: ReplayMemory<StoredTransition<S>>,
    train_steps: usize,
}

impl<S: Scalar> DqnAgent<S> {
    pub fn new<R: Rng + ?Sized>(state_len: usize, actions: usize, settings: DqnSettings, rng: &mut R) -> Result<Self> {
        if settings.batch_size == 0 || settings.target_sync == 0 || settings.replay_capacity < settings.batch_size {
            return Err(Error::invalid("batch size, target sync and replay capacity must be positive with capacity >= batch"));
        }
        let online = DenseNet::new(&q_network_widths(state_len, actions), rng)?;
        Ok(DqnAgent {
            optimizer: Optimizer::new(settings.optimizer, settings.learning_rate, online.param_count()),
            target: online.clone(),
            online,
            memory: ReplayMemory::new(settings.replay_capacity),
            train_steps: 0,
            settings,
        })
    }

    pub fn online(&self) -> &DenseNet<S> {
        &self.online
    }

    pub fn target(&self) -> &DenseNet<S> {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory<StoredTransition<S>> {
        &self.memory
    }

    pub fn train_steps(&self) -> usize {
        self.train_steps
    }

    pub fn q_values(&self, features: &[f64]) -> Result<Vec<S>> {
        self.online.forward(&convert(features))
    }

    pub fn push(&mut self, t: StoredTransition<S>) {
        self.memory.push(t);
    }

    /// Runs one minibatch update if enough experience is stored.
    pub fn update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<S>> {
        let Some(batch) = self.memory.sample(self.settings.batch_size, rng) else {
            return Ok(None);
        };
        let loss = train_step(
            &mut self.online,
            &self.target,
            &mut self.optimizer,
            &batch,
            S::of(self.settings.gamma),
            self.settings.variant,
        )?;
        self.train_steps += 1;
        if self.train_steps % self.settings.target_sync == 0 {
            self.target = self.online.clone();
        }
        Ok(Some(loss))
    }
}

fn convert<S: Scalar>(v: &[f64]) -> Vec<S> {
    v.iter().map(|&x| S::of(x)).collect()
}

impl<S: Scalar> Agent for DqnAgent<S> {
    fn kind(&self) -> AgentKind {
        match self.settings.variant {
            DqnVariant::Double => AgentKind::Ddqn,
            DqnVariant::Vanilla => AgentKind::Dqn,
        }
    }

    fn act(&mut self, obs: &Observation, epsilon: f64, rng: &mut dyn RngCore) -> Result<usize> {
        let q = self.q_values(&obs.features)?;
        epsilon_greedy(&q, epsilon, &obs.mask, rng)
    }

    fn record(&mut self, t: Transition) -> Result<()> {
        let (next_state, next_mask) = match t.next {
            Some(n) => (Some(convert(&n.features)), n.mask),
            None => (None, Vec::new()),
        };
        self.memory.push(StoredTransition {
            state: convert(&t.state.features),
            action: t.action,
            reward: S::of(t.reward),
            slots: t.slots.max(1) as u32,
            next_state,
            next_mask,
        });
        Ok(())
    }

    fn learn(&mut self, rng: &mut dyn RngCore) -> Result<Option<f64>> {
        let mut last = None;
        for _ in 0..self.settings.updates_per_step {
            match self.update(rng)? {
                Some(l) => last = Some(l.as_f64()),
                None => break,
            }
        }
        Ok(last)
    }

    fn checkpoint(&self) -> Option<String> {
        let mut buf = Vec::new();
        self.online.write_checkpoint(&mut buf).ok()?;
        String::from_utf8(buf).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net_with_output_bias(bias: &[f64]) -> DenseNet<f64> {
        let mut net = DenseNet::zeros(&[2, bias.len()]).unwrap();
        let off = 2 * bias.len();
        net.params_mut()[off..].copy_from_slice(bias);
        net
    }

    #[test]
    fn terminal_target_is_reward() {
        let n = net_with_output_bias(&[3.0, 7.0]);
        assert_eq!(ddqn_target(1.0, &[0.0, 0.0], &[0, 1], true, &n, &n, 0.9).unwrap(), 1.0);
    }

    #[test]
    fn double_target_decouples_selection() {
        let online = net_with_output_bias(&[5.0, 1.0]);
        let target = net_with_output_bias(&[2.0, 10.0]);
        let y = ddqn_target(1.0, &[0.0, 0.0], &[0, 1], false, &online, &target, 0.5).unwrap();
        assert_eq!(y, 1.0 + 0.5 * 2.0);
        let y = dqn_target(1.0, &[0.0, 0.0], &[0, 1], false, &target, 0.5).unwrap();
        assert_eq!(y, 1.0 + 0.5 * 10.0);
        let y = dqn_target(1.0, &[0.0, 0.0], &[0], false, &target, 0.5).unwrap();
        assert_eq!(y, 2.0);
    }
}
