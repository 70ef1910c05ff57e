//! The slot-stepped scheduling environment.
//!
//! Environment time `t` counts the slots decided so far. The state at `t`
//! describes what every SFC does during slot `t` (the initial state, `t = 0`,
//! has every SFC waiting at its origin). A joint action chosen at `t` decides
//! the activity of slot `t + 1`.
//!
//! Action indices `0..node_count` select a node; index `node_count` is the
//! hold action, which keeps an SFC stored on its node without requesting
//! compute in the next slot.

mod demo;
mod instance;
mod log;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyKind, EnergyLedger};
use crate::{Error, Result};

pub use demo::{contention_demo_instance, deferral_actions, naive_actions, run_script};
pub use instance::{EnergyModel, Instance, LinkPowers, RewardParams};
pub use log::{Record, ScheduleLog};
pub use validate::{check_schedule, objective_value, Family, ValidatorOptions, Violation};

/// Relative slack on capacity comparisons, absorbing rounding in pro-rata shares.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

/// Number of hosting nodes whose occupancy enters the tabular state key.
pub const TABULAR_TRACKED_NODES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Transmitting,
    Processing,
    Stored,
}

impl Phase {
    pub fn index(self) -> usize {
        match self {
            Phase::Transmitting => 0,
            Phase::Processing => 1,
            Phase::Stored => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Active,
    Done,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    Success,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SfcState {
    pub status: Status,
    pub phase: Phase,
    /// Node selected in the previous slot: the SFC's location, or the
    /// receiving end of an in-flight transfer.
    pub node: usize,
    /// VNFs admitted for processing so far.
    pub processed: usize,
    /// Transfer slots left, counting the current one.
    pub remaining_transmit: usize,
    /// Processing slots left, counting the current one.
    pub remaining_process: usize,
    pub elapsed: usize,
    pub delivered_at: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub value: f64,
    pub transmit_slots: usize,
    pub wait_slots: usize,
    /// Terminal penalty subtracted when the SFC fails on this step.
    pub penalty: f64,
}

/// Immediate reward `c0 - c1 * t_c - c2 * t_w`.
pub fn reward(transmit_slots: usize, wait_slots: usize, params: &RewardParams) -> Reward {
    let value = params.c0 - params.c1 * transmit_slots as f64 - params.c2 * wait_slots as f64;
    Reward { value, transmit_slots, wait_slots, penalty: 0.0 }
}

impl Reward {
    pub fn with_penalty(self, penalty: f64) -> Reward {
        Reward { value: self.value - penalty, penalty: self.penalty + penalty, ..self }
    }
}

/// Pending phase of the next slot from the current phase, counters and action.
pub fn pending_transition(phase: Phase, transmit_left: usize, process_left: usize, action: usize, current: usize) -> Phase {
    let stay = action == current;
    match phase {
        Phase::Transmitting if transmit_left > 1 => Phase::Transmitting,
        Phase::Transmitting if !stay => Phase::Transmitting,
        Phase::Transmitting => Phase::Stored,
        Phase::Processing | Phase::Stored if !stay => Phase::Transmitting,
        Phase::Processing if process_left > 1 => Phase::Processing,
        Phase::Processing | Phase::Stored => Phase::Stored,
    }
}

/// An SFC asking a node for compute in the next slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contender {
    pub sfc: usize,
    pub data_bits: f64,
    pub demand: f64,
}

/// Admission order among contenders: ascending data volume, then SFC index.
pub fn contention_order(contenders: &[Contender]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..contenders.len()).collect();
    idx.sort_by(|&a, &b| {
        contenders[a]
            .data_bits
            .total_cmp(&contenders[b].data_bits)
            .then(contenders[a].sfc.cmp(&contenders[b].sfc))
    });
    idx
}

/// Single-slot contention on one node with `residual` free compute.
///
/// Contenders are visited in [`contention_order`] and admitted while their
/// demand fits. Returns per-contender admission and the remaining capacity.
pub fn resolve_contention(contenders: &[Contender], mut residual: f64) -> (Vec<bool>, f64) {
    let mut admitted = vec![false; contenders.len()];
    for i in contention_order(contenders) {
        if contenders[i].demand <= residual {
            residual -= contenders[i].demand;
            admitted[i] = true;
        }
    }
    (admitted, residual)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepOutcome {
    /// Reward per SFC that was active before the step.
    pub rewards: Vec<Option<Reward>>,
    /// SFCs that finished on this step.
    pub terminal: Vec<Option<Terminal>>,
    pub done: bool,
}

/// Discretized state for tabular learners.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TabularKey {
    pub phase: u8,
    pub node: usize,
    pub processed: usize,
    pub buckets: [u8; TABULAR_TRACKED_NODES],
}

#[derive(Clone, Debug)]
pub struct Env {
    instance: Arc<Instance>,
    t: usize,
    sfcs: Vec<SfcState>,
    /// Reserved compute per node and slot, `[node][slot - 1]`.
    occupancy: Vec<Vec<f64>>,
    link_load: BTreeMap<(usize, usize, usize), f64>,
    ledger: EnergyLedger,
    log: ScheduleLog,
    done: bool,
}

impl Env {
    pub fn new(instance: Arc<Instance>) -> Self {
        let n = instance.node_count();
        let budgets = (0..n).map(|i| instance.energy_budget(i)).collect();
        let mut env = Env {
            t: 0,
            sfcs: Vec::new(),
            occupancy: vec![vec![0.0; instance.slot_count]; n],
            link_load: BTreeMap::new(),
            ledger: EnergyLedger::new(budgets, instance.slot_count),
            log: ScheduleLog::new(),
            done: false,
            instance,
        };
        env.reset();
        env
    }

    pub fn reset(&mut self) {
        let inst = Arc::clone(&self.instance);
        self.t = 0;
        self.sfcs = inst
            .sfcs
            .iter()
            .map(|r| SfcState {
                status: Status::Active,
                phase: Phase::Stored,
                node: r.origin,
                processed: 0,
                remaining_transmit: 0,
                remaining_process: 0,
                elapsed: 0,
                delivered_at: None,
            })
            .collect();
        for row in &mut self.occupancy {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
        self.link_load.clear();
        let budgets = (0..inst.node_count()).map(|i| inst.energy_budget(i)).collect();
        self.ledger = EnergyLedger::new(budgets, inst.slot_count);
        for (node, row) in inst.energy.baseline.iter().enumerate() {
            for (i, &e) in row.iter().enumerate() {
                self.ledger
                    .charge(node, i + 1, EnergyKind::Path, e)
                    .expect("instance validation guarantees finite baseline energy");
            }
        }
        self.log = ScheduleLog::new();
        self.done = inst.sfcs.is_empty();
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn sfc(&self, k: usize) -> &SfcState {
        &self.sfcs[k]
    }

    pub fn sfcs(&self) -> &[SfcState] {
        &self.sfcs
    }

    pub fn log(&self) -> &ScheduleLog {
        &self.log
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn action_count(&self) -> usize {
        self.instance.node_count() + 1
    }

    pub fn hold_action(&self) -> usize {
        self.instance.node_count()
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.sfcs.len()).filter(|&k| self.sfcs[k].status == Status::Active).collect()
    }

    pub fn completed(&self) -> usize {
        self.sfcs.iter().filter(|s| s.status == Status::Done).count()
    }

    /// Compute occupancy of every node in `slot`; zero before the first slot.
    pub fn occupancy_at(&self, slot: usize) -> Vec<f64> {
        self.occupancy
            .iter()
            .map(|row| if slot == 0 { 0.0 } else { row.get(slot - 1).copied().unwrap_or(0.0) })
            .collect()
    }

    /// Reserved compute over compute capacity, summed over hosting nodes and the horizon.
    pub fn utilization(&self) -> f64 {
        let inst = &self.instance;
        let mut used = 0.0;
        let mut cap = 0.0;
        for (i, n) in inst.nodes.iter().enumerate() {
            if n.kind.hosts_vnfs() {
                used += self.occupancy[i].iter().sum::<f64>();
                cap += n.compute_capacity * inst.slot_count as f64;
            }
        }
        if cap > 0.0 {
            (used / cap).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Actions available to SFC `k` at the current time.
    pub fn action_mask(&self, k: usize) -> Vec<usize> {
        let st = &self.sfcs[k];
        if st.status != Status::Active || self.done {
            return Vec::new();
        }
        let here = st.node;
        let busy = (st.phase == Phase::Transmitting && st.remaining_transmit > 1)
            || (st.phase == Phase::Processing && st.remaining_process > 1);
        if busy {
            return vec![here];
        }
        let inst = &self.instance;
        let req = &inst.sfcs[k];
        let all_processed = st.processed == req.len();
        let mut mask = vec![here];
        for &j in inst.neighbours(here, self.t + 1) {
            if inst.hosts(j) || (j == req.destination && all_processed) {
                mask.push(j);
            }
        }
        mask.sort_unstable();
        mask.dedup();
        if inst.hosts(here) && !all_processed {
            mask.push(self.hold_action());
        }
        mask
    }

    /// Feature vector `[SFC one-hot, phase one-hot, node one-hot, progress,
    /// chain done, transfer left, processing left, slack, occupancy/capacity,
    /// transfer speed]`, with slot counts scaled by the deadline. Transfer speed
    /// is `1 / d` for a transfer to each node that would take `d` slots if
    /// started next slot, and 0 where no transfer fits.
    pub fn encode_state(&self, k: usize) -> Vec<f64> {
        let inst = &self.instance;
        let n = inst.node_count();
        let st = &self.sfcs[k];
        let req = &inst.sfcs[k];
        let deadline = req.deadline.max(1) as f64;
        let mut v = Vec::with_capacity(Self::state_len(n, inst.sfc_count()));
        v.extend((0..inst.sfc_count()).map(|j| if j == k { 1.0 } else { 0.0 }));
        let mut phase = [0.0; 3];
        phase[st.phase.index()] = 1.0;
        v.extend_from_slice(&phase);
        v.extend((0..n).map(|i| if i == st.node { 1.0 } else { 0.0 }));
        v.push(st.processed as f64 / req.len() as f64);
        v.push(if st.processed == req.len() { 1.0 } else { 0.0 });
        v.push(st.remaining_transmit as f64 / deadline);
        v.push(st.remaining_process as f64 / deadline);
        v.push((deadline - st.elapsed as f64) / deadline);
        let occ = self.occupancy_at(self.t);
        v.extend(inst.nodes.iter().zip(&occ).map(|(node, &o)| {
            if node.kind.hosts_vnfs() && node.compute_capacity > 0.0 {
                o / node.compute_capacity
            } else {
                0.0
            }
        }));
        let s = self.t + 1;
        v.extend((0..n).map(|j| {
            if j == st.node || s > inst.slot_count {
                return 0.0;
            }
            let residual = inst.capacity(st.node, j, s) - self.load(st.node, j, s);
            if residual <= 0.0 {
                0.0
            } else {
                1.0 / (req.data_bits / residual).ceil().max(1.0)
            }
        }));
        v
    }

    pub fn state_len(node_count: usize, sfc_count: usize) -> usize {
        3 * node_count + sfc_count + 8
    }

    pub fn tabular_key(&self, k: usize) -> TabularKey {
        let inst = &self.instance;
        let st = &self.sfcs[k];
        let occ = self.occupancy_at(self.t);
        let mut buckets = [0u8; TABULAR_TRACKED_NODES];
        for (slot, (i, node)) in inst
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind.hosts_vnfs())
            .take(TABULAR_TRACKED_NODES)
            .enumerate()
        {
            let frac = if node.compute_capacity > 0.0 { occ[i] / node.compute_capacity } else { 0.0 };
            buckets[slot] = ((frac * 4.0).floor() as i64).clamp(0, 3) as u8;
        }
        TabularKey { phase: st.phase.index() as u8, node: st.node, processed: st.processed, buckets }
    }

    /// Hash of everything that determines future behaviour.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.t.hash(&mut h);
        self.sfcs.hash(&mut h);
        for row in &self.occupancy {
            for x in &row[self.t.min(row.len())..] {
                x.to_bits().hash(&mut h);
            }
        }
        for (key, load) in self.link_load.range((0, 0, self.t + 1)..) {
            if key.2 > self.t {
                key.hash(&mut h);
                load.to_bits().hash(&mut h);
            }
        }
        for i in 0..self.instance.node_count() {
            self.ledger.total(i).to_bits().hash(&mut h);
        }
        h.finish()
    }

    fn load(&self, from: usize, to: usize, slot: usize) -> f64 {
        self.link_load.get(&(from, to, slot)).copied().unwrap_or(0.0)
    }

    fn try_transfer(&mut self, k: usize, from: usize, to: usize, s: usize) -> Result<Option<usize>> {
        let inst = Arc::clone(&self.instance);
        let delta = inst.sfcs[k].data_bits;
        let residual = inst.capacity(from, to, s) - self.load(from, to, s);
        if residual <= 0.0 || delta / residual > inst.slot_count as f64 {
            return Ok(None);
        }
        let d = ((delta / residual).ceil() as usize).max(1);
        if s + d - 1 > inst.slot_count || (to == inst.sfcs[k].destination && s + d - 1 > inst.sfcs[k].deadline) {
            return Ok(None);
        }
        let q = delta / d as f64;
        let (mut tx, mut rx) = (0.0, 0.0);
        for u in s..s + d {
            let cap = inst.capacity(from, to, u);
            if cap <= 0.0 || self.load(from, to, u) + q > cap * (1.0 + CAPACITY_TOLERANCE) {
                return Ok(None);
            }
            let (a, b) = inst.transfer_energy(from, to, u, q);
            tx += a;
            rx += b;
        }
        if !self.ledger.can_afford(from, tx) || !self.ledger.can_afford(to, rx) {
            return Ok(None);
        }
        for u in s..s + d {
            *self.link_load.entry((from, to, u)).or_insert(0.0) += q;
            let (a, b) = inst.transfer_energy(from, to, u, q);
            self.ledger.charge(from, u, EnergyKind::Transmit, a)?;
            self.ledger.charge(to, u, EnergyKind::Receive, b)?;
            self.log.push(Record::z(k, from, to, u));
        }
        Ok(Some(d))
    }

    fn try_process(&mut self, k: usize, node: usize, s: usize) -> Result<Option<usize>> {
        let inst = Arc::clone(&self.instance);
        let m = self.sfcs[k].processed;
        let demand = inst.sfcs[k].vnfs[m].demand;
        let p = inst.process_slots(k, m, node)?;
        if s + p - 1 > inst.slot_count {
            return Ok(None);
        }
        let cap = inst.nodes[node].compute_capacity * (1.0 + CAPACITY_TOLERANCE);
        if (s..s + p).any(|u| self.occupancy[node][u - 1] + demand > cap) {
            return Ok(None);
        }
        let energy = demand * inst.energy.compute_per_bit[node];
        if !self.ledger.can_afford(node, energy) {
            return Ok(None);
        }
        self.log.push(Record::x(k, m, node, s));
        for u in s..s + p {
            self.occupancy[node][u - 1] += demand;
            self.ledger.charge(node, u, EnergyKind::Compute, energy / p as f64)?;
            self.log.push(Record::y(k, node, u));
        }
        Ok(Some(p))
    }

    /// Applies one joint action (indexed by SFC; entries of inactive SFCs are ignored).
    pub fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Env("stepping a finished episode".into()));
        }
        let inst = Arc::clone(&self.instance);
        let k_count = inst.sfc_count();
        if actions.len() != k_count {
            return Err(Error::Dimension { expected: k_count, got: actions.len() });
        }
        let s = self.t + 1;
        let hold = self.hold_action();
        let active = self.active();
        for &k in &active {
            if !self.action_mask(k).contains(&actions[k]) {
                return Err(Error::Env(format!("action {} not allowed for SFC {k} at t = {}", actions[k], self.t)));
            }
        }
        let by_volume = |a: &usize, b: &usize| inst.sfcs[*a].data_bits.total_cmp(&inst.sfcs[*b].data_bits).then(a.cmp(b));

        let mut transmit = vec![0usize; k_count];
        let mut wait = vec![0usize; k_count];
        let mut moves: Vec<(usize, usize)> = Vec::new();
        let mut contenders: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &k in &active {
            let a = actions[k];
            let st = self.sfcs[k].clone();
            let target = if a == hold { st.node } else { a };
            match pending_transition(st.phase, st.remaining_transmit, st.remaining_process, target, st.node) {
                Phase::Transmitting if st.phase == Phase::Transmitting && st.remaining_transmit > 1 => {
                    self.sfcs[k].remaining_transmit -= 1;
                }
                Phase::Transmitting => moves.push((k, target)),
                Phase::Processing => self.sfcs[k].remaining_process -= 1,
                Phase::Stored => {
                    let sfc = &mut self.sfcs[k];
                    sfc.phase = Phase::Stored;
                    sfc.remaining_transmit = 0;
                    sfc.remaining_process = 0;
                    if a != hold && inst.hosts(st.node) && st.processed < inst.sfcs[k].len() {
                        contenders.entry(st.node).or_default().push(k);
                    } else {
                        wait[k] = 1;
                    }
                }
            }
        }

        moves.sort_by(|a, b| by_volume(&a.0, &b.0));
        for (k, to) in moves {
            let from = self.sfcs[k].node;
            let admitted = self.try_transfer(k, from, to, s)?;
            let sfc = &mut self.sfcs[k];
            sfc.remaining_process = 0;
            match admitted {
                Some(d) => {
                    sfc.phase = Phase::Transmitting;
                    sfc.node = to;
                    sfc.remaining_transmit = d;
                    transmit[k] = d;
                }
                None => {
                    sfc.phase = Phase::Stored;
                    sfc.remaining_transmit = 0;
                    wait[k] = 1;
                }
            }
        }

        for (node, mut ks) in contenders {
            ks.sort_by(by_volume);
            for k in ks {
                match self.try_process(k, node, s)? {
                    Some(p) => {
                        let sfc = &mut self.sfcs[k];
                        sfc.phase = Phase::Processing;
                        sfc.remaining_process = p;
                        sfc.processed += 1;
                    }
                    None => wait[k] = 1,
                }
            }
        }

        let mut dropped = vec![false; k_count];
        if s < inst.slot_count {
            let mut stored: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&k| self.sfcs[k].phase == Phase::Stored && inst.hosts(self.sfcs[k].node))
                .collect();
            stored.sort_by(|a, b| self.sfcs[*a].node.cmp(&self.sfcs[*b].node).then(by_volume(a, b)));
            let mut used: HashMap<usize, f64> = HashMap::new();
            for k in stored {
                let node = self.sfcs[k].node;
                let u = used.entry(node).or_insert(0.0);
                let delta = inst.sfcs[k].data_bits;
                if *u + delta > inst.nodes[node].storage_capacity * (1.0 + CAPACITY_TOLERANCE) {
                    dropped[k] = true;
                } else {
                    *u += delta;
                    self.log.push(Record::y(k, node, s));
                    self.log.push(Record::rho(k, node, s));
                }
            }
        }

        self.t = s;
        let mut out = StepOutcome { rewards: vec![None; k_count], terminal: vec![None; k_count], done: false };
        for &k in &active {
            let req = &inst.sfcs[k];
            let r = reward(transmit[k], wait[k], &inst.reward);
            let sfc = &mut self.sfcs[k];
            sfc.elapsed = s;
            let delivered = sfc.phase == Phase::Transmitting && sfc.node == req.destination && sfc.remaining_transmit == 1;
            if !dropped[k] && delivered {
                sfc.status = Status::Done;
                sfc.delivered_at = Some(s);
                out.terminal[k] = Some(Terminal::Success);
                out.rewards[k] = Some(r);
            } else if dropped[k] || s >= req.deadline || s >= inst.slot_count {
                sfc.status = Status::Failed;
                out.terminal[k] = Some(Terminal::Failure);
                out.rewards[k] = Some(r.with_penalty(inst.reward.c0));
            } else {
                out.rewards[k] = Some(r);
            }
        }
        self.done = s >= inst.slot_count || self.sfcs.iter().all(|x| x.status != Status::Active);
        out.done = self.done;
        Ok(out)
    }
}
