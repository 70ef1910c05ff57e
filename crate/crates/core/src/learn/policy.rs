use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Masked argmax; ties go to the lowest action index.
pub fn masked_argmax<S: Scalar>(q: &[S], mask: &[usize]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for &a in mask {
        if a >= q.len() {
            return Err(Error::invalid(format!("action {a} outside {} outputs", q.len())));
        }
        best = match best {
            Some(b) if q[a] < q[b] || (q[a] == q[b] && b < a) => Some(b),
            _ => Some(a),
        };
    }
    best.ok_or_else(|| Error::invalid("empty action mask"))
}

pub fn masked_max<S: Scalar>(q: &[S], mask: &[usize]) -> Result<S> {
    Ok(q[masked_argmax(q, mask)?])
}

/// Uniform over the mask with probability `epsilon`, otherwise masked argmax.
pub fn epsilon_greedy<S: Scalar, R: Rng + ?Sized>(q: &[S], epsilon: f64, mask: &[usize], rng: &mut R) -> Result<usize> {
    if mask.is_empty() {
        return Err(Error::invalid("empty action mask"));
    }
    if rng.gen::<f64>() < epsilon {
        Ok(mask[rng.gen_range(0..mask.len())])
    } else {
        masked_argmax(q, mask)
    }
}

/// Greediness rises linearly from `start` to `end` over the first
/// `ramp_fraction` of training; exploration rate is `1 - greediness`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedySchedule {
    pub start: f64,
    pub end: f64,
    pub ramp_fraction: f64,
}

impl Default for GreedySchedule {
    fn default() -> Self {
        GreedySchedule { start: 0.0, end: 0.9, ramp_fraction: 0.6 }
    }
}

impl GreedySchedule {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.start) || !unit(self.end) || !unit(self.ramp_fraction) {
            return Err(Error::invalid("greediness schedule values must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn greediness(&self, episode: usize, episodes: usize) -> f64 {
        let ramp = self.ramp_fraction * episodes as f64;
        if ramp <= 0.0 {
            return self.end;
        }
        let frac = (episode as f64 / ramp).min(1.0);
        self.start + (self.end - self.start) * frac
    }

    pub fn epsilon(&self, episode: usize, episodes: usize) -> f64 {
        1.0 - self.greediness(episode, episodes)
    }
}
