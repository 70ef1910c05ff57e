use std::collections::HashMap;
use std::hash::Hash;

use rand::RngCore;

use super::policy::{epsilon_greedy, masked_max};
use super::{Agent, AgentKind, Observation, Transition};
use crate::env::TabularKey;
use crate::{Error, Result};

/// Action values keyed by discrete state; unseen entries read as zero.
#[derive(Clone, Debug)]
pub struct QTable<K> {
    actions: usize,
    values: HashMap<K, Vec<f64>>,
}

/// What the update bootstraps from.
#[derive(Clone, Copy, Debug)]
pub enum Bootstrap<'a, K> {
    Terminal,
    /// Q-learning: masked maximum over the next state's actions.
    Max(&'a K, &'a [usize]),
    /// Sarsa: the action actually taken next.
    Action(&'a K, usize),
}

impl<K: Hash + Eq + Clone> QTable<K> {
    pub fn new(actions: usize) -> Self {
        QTable { actions, values: HashMap::new() }
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: &K, a: usize) -> f64 {
        self.values.get(s).map_or(0.0, |v| v[a])
    }

    pub fn row(&self, s: &K) -> Vec<f64> {
        self.values.get(s).cloned().unwrap_or_else(|| vec![0.0; self.actions])
    }

    pub fn set(&mut self, s: &K, a: usize, value: f64) {
        let actions = self.actions;
        self.values.entry(s.clone()).or_insert_with(|| vec![0.0; actions])[a] = value;
    }
}

/// `Q(s,a) += alpha * (r + gamma * B - Q(s,a))`; returns the new value.
pub fn tabular_update<K: Hash + Eq + Clone>(
    q: &mut QTable<K>,
    s: &K,
    a: usize,
    reward: f64,
    next: Bootstrap<'_, K>,
    alpha: f64,
    gamma: f64,
) -> Result<f64> {
    if a >= q.action_count() {
        return Err(Error::invalid(format!("action {a} outside {} actions", q.action_count())));
    }
    let boot = match next {
        Bootstrap::Terminal => 0.0,
        Bootstrap::Max(s2, mask) => masked_max(&q.row(s2), mask)?,
        Bootstrap::Action(s2, a2) => q.get(s2, a2),
    };
    let old = q.get(s, a);
    let new = old + alpha * (reward + gamma * boot - old);
    q.set(s, a, new);
    Ok(new)
}

/// Tabular Q-learning or Sarsa over [`TabularKey`] states.
#[derive(Clone, Debug)]
pub struct TabularAgent {
    sarsa: bool,
    alpha: f64,
    gamma: f64,
    table: QTable<TabularKey>,
    /// Sarsa transitions per SFC waiting for their next action.
    pending: HashMap<usize, Transition>,
}

impl TabularAgent {
    pub fn q_learning(actions: usize, alpha: f64, gamma: f64) -> Self {
        Self::build(false, actions, alpha, gamma)
    }

    pub fn sarsa(actions: usize, alpha: f64, gamma: f64) -> Self {
        Self::build(true, actions, alpha, gamma)
    }

    fn build(sarsa: bool, actions: usize, alpha: f64, gamma: f64) -> Self {
        TabularAgent { sarsa, alpha, gamma, table: QTable::new(actions), pending: HashMap::new() }
    }

    pub fn table(&self) -> &QTable<TabularKey> {
        &self.table
    }
}

impl Agent for TabularAgent {
    fn kind(&self) -> AgentKind {
        if self.sarsa {
            AgentKind::Sarsa
        } else {
            AgentKind::QLearning
        }
    }

    fn act(&mut self, obs: &Observation, epsilon: f64, rng: &mut dyn RngCore) -> Result<usize> {
        let a = epsilon_greedy(&self.table.row(&obs.key), epsilon, &obs.mask, rng)?;
        if let Some(prev) = self.pending.remove(&obs.sfc) {
            tabular_update(
                &mut self.table,
                &prev.state.key,
                prev.action,
                prev.reward,
                Bootstrap::Action(&obs.key, a),
                self.alpha,
                self.gamma.powi(prev.slots.max(1) as i32),
            )?;
        }
        Ok(a)
    }

    fn record(&mut self, t: Transition) -> Result<()> {
        match &t.next {
            None => {
                tabular_update(&mut self.table, &t.state.key, t.action, t.reward, Bootstrap::Terminal, self.alpha, self.gamma)?;
            }
            Some(next) if !self.sarsa => {
                tabular_update(
                    &mut self.table,
                    &t.state.key,
                    t.action,
                    t.reward,
                    Bootstrap::Max(&next.key, &next.mask),
                    self.alpha,
                    self.gamma.powi(t.slots.max(1) as i32),
                )?;
            }
            Some(_) => {
                self.pending.insert(t.state.sfc, t);
            }
        }
        Ok(())
    }

    fn end_episode(&mut self) {
        self.pending.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_learning_update_hand_computed() {
        let mut q: QTable<u8> = QTable::new(3);
        q.set(&1, 0, 2.0);
        q.set(&1, 2, 5.0);
        let v = tabular_update(&mut q, &0, 1, 1.0, Bootstrap::Max(&1, &[0, 1]), 0.5, 0.9).unwrap();
        assert!((v - 0.5 * (1.0 + 0.9 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn sarsa_and_terminal_updates() {
        let mut q: QTable<u8> = QTable::new(2);
        q.set(&1, 1, 4.0);
        q.set(&0, 0, 1.0);
        let v = tabular_update(&mut q, &0, 0, 0.0, Bootstrap::Action(&1, 1), 1.0, 0.5).unwrap();
        assert_eq!(v, 2.0);
        let v = tabular_update(&mut q, &0, 0, 3.0, Bootstrap::Terminal, 0.5, 0.9).unwrap();
        assert_eq!(v, 2.5);
    }
}
