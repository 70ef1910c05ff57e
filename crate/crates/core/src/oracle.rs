//! Exhaustive search over joint actions for tiny instances.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::LinkRateTable;
use crate::env::{EnergyModel, Env, Phase, Instance, LinkPowers, RewardParams, ScheduleLog};
use crate::topology::{LinkKind, NodeKind, NodeSpec, UavParams};
use crate::workload::SfcRequest;
use crate::{Error, Result};

pub const MAX_HOSTING_NODES: usize = 4;
pub const MAX_SLOTS: usize = 10;
pub const MAX_SFCS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    /// Largest number of SFCs the environment can complete.
    pub objective: usize,
    /// Lexicographically first joint-action sequence reaching the objective.
    pub actions: Vec<Vec<usize>>,
    pub log: ScheduleLog,
    /// Distinct environment states expanded.
    pub states: usize,
}

#[derive(Clone, Debug)]
struct Best {
    value: usize,
    suffix: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Skip subtrees whose SFCs can no longer meet their deadlines.
    pub deadline_pruning: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { deadline_pruning: true }
    }
}

/// Maximises completed SFCs over every joint-action sequence the environment allows.
pub fn solve_exact(instance: Arc<Instance>) -> Result<ExactSolution> {
    solve_exact_with(instance, SolveOptions::default())
}

pub fn solve_exact_with(instance: Arc<Instance>, opts: SolveOptions) -> Result<ExactSolution> {
    let hosts = (0..instance.node_count()).filter(|&i| instance.hosts(i)).count();
    if hosts > MAX_HOSTING_NODES || instance.slot_count > MAX_SLOTS || instance.sfc_count() > MAX_SFCS {
        return Err(Error::InstanceTooLarge(format!(
            "{hosts} hosting nodes, {} slots, {} SFCs (limits {MAX_HOSTING_NODES}, {MAX_SLOTS}, {MAX_SFCS})",
            instance.slot_count,
            instance.sfc_count()
        )));
    }
    let root = Env::new(Arc::clone(&instance));
    let fastest = if opts.deadline_pruning {
        fastest_processing(&instance)
    } else {
        vec![Vec::new(); instance.sfc_count()]
    };
    let mut memo = HashMap::new();
    let best = search(&root, &fastest, &mut memo)?;
    let mut env = root;
    for a in &best.suffix {
        env.step(a)?;
    }
    debug_assert_eq!(env.completed(), best.value);
    Ok(ExactSolution { objective: best.value, actions: best.suffix, log: env.log().clone(), states: memo.len() })
}

/// Completed SFCs plus active SFCs that can still meet their deadline in the
/// best case (fastest host for every remaining VNF, one-slot transfers).
/// With an empty `fastest` table every active SFC counts.
fn upper_bound(env: &Env, fastest: &[Vec<usize>]) -> usize {
    let inst = env.instance();
    if fastest.iter().all(Vec::is_empty) {
        return env.completed() + env.active().len();
    }
    let reachable = env
        .active()
        .into_iter()
        .filter(|&k| {
            let st = env.sfc(k);
            let req = &inst.sfcs[k];
            let in_flight = match st.phase {
                Phase::Transmitting => st.remaining_transmit.saturating_sub(1),
                Phase::Processing => st.remaining_process.saturating_sub(1),
                Phase::Stored => 0,
            };
            let delivering = st.phase == Phase::Transmitting && st.node == req.destination;
            let needed = in_flight + fastest[k][st.processed..].iter().sum::<usize>() + usize::from(!delivering);
            env.t() + needed <= req.deadline.min(inst.slot_count)
        })
        .count();
    env.completed() + reachable
}

/// Fewest processing slots of every VNF over all hosting nodes.
fn fastest_processing(inst: &Instance) -> Vec<Vec<usize>> {
    (0..inst.sfc_count())
        .map(|k| {
            (0..inst.sfcs[k].len())
                .map(|m| {
                    (0..inst.node_count())
                        .filter(|&i| inst.hosts(i))
                        .filter_map(|i| inst.process_slots(k, m, i).ok())
                        .min()
                        .unwrap_or(usize::MAX / 4)
                })
                .collect()
        })
        .collect()
}

fn search(env: &Env, fastest: &[Vec<usize>], memo: &mut HashMap<u64, Best>) -> Result<Best> {
    if env.is_done() {
        return Ok(Best { value: env.completed(), suffix: Vec::new() });
    }
    let key = env.fingerprint();
    if let Some(b) = memo.get(&key) {
        return Ok(b.clone());
    }
    let k_count = env.instance().sfc_count();
    let active = env.active();
    let masks: Vec<Vec<usize>> = active.iter().map(|&k| env.action_mask(k)).collect();
    let ceiling = upper_bound(env, fastest);
    let mut best: Option<Best> = None;
    let mut idx = vec![0usize; active.len()];
    'outer: loop {
        let mut joint = vec![env.hold_action(); k_count];
        for (slot, &k) in active.iter().enumerate() {
            joint[k] = masks[slot][idx[slot]];
        }
        let mut child = env.clone();
        child.step(&joint)?;
        if best.as_ref().map_or(true, |b| upper_bound(&child, fastest) > b.value) {
            let sub = search(&child, fastest, memo)?;
            if best.as_ref().map_or(true, |b| sub.value > b.value) {
                let mut suffix = Vec::with_capacity(sub.suffix.len() + 1);
                suffix.push(joint);
                suffix.extend(sub.suffix);
                best = Some(Best { value: sub.value, suffix });
                if sub.value == ceiling {
                    break 'outer;
                }
            }
        }
        for pos in (0..idx.len()).rev() {
            idx[pos] += 1;
            if idx[pos] < masks[pos].len() {
                continue 'outer;
            }
            idx[pos] = 0;
        }
        break;
    }
    let best = best.expect("an active SFC always has at least one action");
    memo.insert(key, best.clone());
    Ok(best)
}

/// Random instance inside the exact-search limits: two ground nodes, up to
/// four hosting nodes, up to three SFCs.
///
/// `max_nodes` bounds the total node count, two ground stations included; it
/// is clamped to `3..=2 + MAX_HOSTING_NODES`.
pub fn random_tiny_instance<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> Instance {
    let slots = rng.gen_range(4..=7);
    let hosting = rng.gen_range(1..=max_nodes.clamp(3, 2 + MAX_HOSTING_NODES) - 2);
    let mut nodes = vec![NodeSpec::ground(0), NodeSpec::ground(1)];
    for i in 0..hosting {
        let id = nodes.len();
        let kind = if i == 0 || rng.gen_bool(0.5) { NodeKind::Uav } else { NodeKind::Satellite };
        nodes.push(NodeSpec {
            id,
            kind,
            compute_capacity: rng.gen_range(1..=4) as f64 * 100.0,
            compute_rate: 100.0,
            storage_capacity: rng.gen_range(1..=4) as f64 * 20.0,
            energy_capacity: 1e6,
            uav: (kind == NodeKind::Uav).then_some(UavParams {
                mass_kg: 0.5,
                rotor_radius_m: 0.2,
                rotor_count: 4,
                max_speed_mps: 12.0,
                max_power_w: 12.0,
            }),
        });
    }
    let mut links = LinkRateTable::default();
    for t in 1..=slots {
        for a in 0..nodes.len() {
            for b in 0..nodes.len() {
                if a == b {
                    continue;
                }
                let Some(kind) = LinkKind::between(nodes[a].kind, nodes[b].kind) else { continue };
                if rng.gen_bool(0.6) {
                    links.insert(a, b, t, kind, rng.gen_range(1..=4) as f64 * 10.0);
                }
            }
        }
    }
    let sfcs = (0..rng.gen_range(1..=MAX_SFCS))
        .map(|k| {
            let demands: Vec<f64> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=3) as f64 * 100.0).collect();
            SfcRequest::new(k, &demands, rng.gen_range(1..=4) as f64 * 10.0, rng.gen_range(3..=slots), 0, 1)
        })
        .collect();
    let mut energy = EnergyModel::free(nodes.len(), slots);
    for (i, n) in nodes.iter().enumerate() {
        if n.kind.hosts_vnfs() {
            energy.baseline[i] = vec![1.0; slots];
            energy.compute_per_bit[i] = 0.01;
        }
    }
    energy.powers = LinkPowers::uniform(1.0, 0.5);
    Instance::new(nodes, slots, 1.0, links, sfcs, RewardParams::default(), energy)
        .expect("generated tiny instance is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::contention_demo_instance;

    #[test]
    fn demo_optimum_is_three() {
        let sol = solve_exact(Arc::new(contention_demo_instance())).unwrap();
        assert_eq!(sol.objective, 3);
    }
}
