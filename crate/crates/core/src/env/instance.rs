use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{LinkRateTable, RadioConstants};
use crate::energy::{uav_hover_power, uav_slot_energy, EnergyParams};
use crate::topology::{LinkKind, NodeKind, NodeSpec, Rteg};
use crate::workload::{vnf_process_slots, SfcRequest};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams { c0: 1.0, c1: 0.1, c2: 0.2 }
    }
}

/// Transmit and receive powers per link kind, W.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPowers {
    pub g2u_tx: f64,
    pub u2g_tx: f64,
    pub u2u_tx: f64,
    pub u2s_tx: f64,
    pub u2s_rx: f64,
    pub s2s_tx: f64,
    pub s2s_rx: f64,
    pub s2g_tx: f64,
}

impl LinkPowers {
    pub fn from_params(radio: &RadioConstants<f64>, energy: &EnergyParams<f64>) -> Self {
        LinkPowers {
            g2u_tx: radio.p_tr_ground,
            u2g_tx: radio.p_tr_uav,
            u2u_tx: radio.p_uu,
            u2s_tx: radio.p_us,
            u2s_rx: energy.p_re_us,
            s2s_tx: radio.p_ss,
            s2s_rx: energy.p_re_ss,
            s2g_tx: radio.p_sg,
        }
    }

    pub fn uniform(tx: f64, rx: f64) -> Self {
        LinkPowers {
            g2u_tx: tx,
            u2g_tx: tx,
            u2u_tx: tx,
            u2s_tx: tx,
            u2s_rx: rx,
            s2s_tx: tx,
            s2s_rx: rx,
            s2g_tx: tx,
        }
    }

    pub fn tx(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::G2U => self.g2u_tx,
            LinkKind::U2G => self.u2g_tx,
            LinkKind::U2U => self.u2u_tx,
            LinkKind::U2S => self.u2s_tx,
            LinkKind::S2S => self.s2s_tx,
            LinkKind::S2G => self.s2g_tx,
        }
    }

    /// Receive power charged to the receiving satellite; zero for other kinds.
    pub fn rx(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::U2S => self.u2s_rx,
            LinkKind::S2S => self.s2s_rx,
            _ => 0.0,
        }
    }
}

/// Energy bookkeeping inputs: fixed per-slot baseline plus activity prices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Path or operations energy per node and slot, `[node][slot - 1]`.
    pub baseline: Vec<Vec<f64>>,
    /// Compute energy per bit for each node.
    pub compute_per_bit: Vec<f64>,
    pub powers: LinkPowers,
}

impl EnergyModel {
    /// A model with no baseline, no compute price and no link power.
    pub fn free(node_count: usize, slot_count: usize) -> Self {
        EnergyModel {
            baseline: vec![vec![0.0; slot_count]; node_count],
            compute_per_bit: vec![0.0; node_count],
            powers: LinkPowers::uniform(0.0, 0.0),
        }
    }

    /// Hover and movement energy for UAVs, operations energy for satellites.
    pub fn from_scenario(rteg: &Rteg, radio: &RadioConstants<f64>, params: &EnergyParams<f64>) -> Result<Self> {
        let n = rteg.node_count();
        let t_count = rteg.slot_count;
        let mut baseline = vec![vec![0.0; t_count]; n];
        let mut compute_per_bit = vec![0.0; n];
        for node in &rteg.nodes {
            match node.kind {
                NodeKind::Ground => {}
                NodeKind::Uav => {
                    let u = node
                        .uav
                        .as_ref()
                        .ok_or_else(|| Error::invalid(format!("UAV {} lacks airframe parameters", node.id)))?;
                    let hover = uav_hover_power(
                        u.mass_kg,
                        u.rotor_radius_m,
                        f64::from(u.rotor_count),
                        params.gravity,
                        params.air_density,
                    )?;
                    let speed = params.uav_speed.min(u.max_speed_mps);
                    for t in 1..=t_count {
                        let from = rteg.position(node.id, t);
                        let to = if t < t_count { rteg.position(node.id, t + 1) } else { from };
                        baseline[node.id][t - 1] =
                            uav_slot_energy(speed, u.max_speed_mps, u.max_power_w, hover, from, to, rteg.slot_length)?;
                    }
                    compute_per_bit[node.id] = params.ec_uav;
                }
                NodeKind::Satellite => {
                    baseline[node.id] = vec![params.e_op; t_count];
                    compute_per_bit[node.id] = params.ec_sat;
                }
            }
        }
        Ok(EnergyModel { baseline, compute_per_bit, powers: LinkPowers::from_params(radio, params) })
    }
}

/// Everything the environment and validator need about one scheduling problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub nodes: Vec<NodeSpec>,
    pub slot_count: usize,
    pub slot_length: f64,
    pub links: LinkRateTable,
    pub sfcs: Vec<SfcRequest>,
    pub reward: RewardParams,
    pub energy: EnergyModel,
    #[serde(skip)]
    adjacency: Vec<Vec<Vec<usize>>>,
}

impl Instance {
    pub fn new(
        nodes: Vec<NodeSpec>,
        slot_count: usize,
        slot_length: f64,
        links: LinkRateTable,
        sfcs: Vec<SfcRequest>,
        reward: RewardParams,
        energy: EnergyModel,
    ) -> Result<Self> {
        if slot_count == 0 {
            return Err(Error::invalid("an instance needs at least one slot"));
        }
        if !(slot_length > 0.0) {
            return Err(Error::invalid("slot length must be positive"));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::invalid(format!("node at index {i} has id {}", n.id)));
            }
            n.validate()?;
        }
        let n = nodes.len();
        for ((from, to, slot), (kind, bits)) in links.iter() {
            if from >= n || to >= n || from == to {
                return Err(Error::invalid(format!("link ({from}, {to}) is not between two distinct known nodes")));
            }
            if slot == 0 || slot > slot_count {
                return Err(Error::SlotOutOfRange { slot, horizon: slot_count });
            }
            if LinkKind::between(nodes[from].kind, nodes[to].kind) != Some(kind) {
                return Err(Error::invalid(format!("link ({from}, {to}) has kind {kind:?} inconsistent with its endpoints")));
            }
            if !(bits >= 0.0) || !bits.is_finite() {
                return Err(Error::invalid(format!("link ({from}, {to}, {slot}) has invalid capacity {bits}")));
            }
        }
        for (i, s) in sfcs.iter().enumerate() {
            if s.id != i {
                return Err(Error::Workload(format!("SFC at index {i} has id {}", s.id)));
            }
            s.validate()?;
            for end in [s.origin, s.destination] {
                if end >= n || nodes[end].kind != NodeKind::Ground {
                    return Err(Error::Workload(format!("SFC {i} endpoint {end} is not a ground node")));
                }
            }
        }
        if energy.baseline.len() != n
            || energy.compute_per_bit.len() != n
            || energy.baseline.iter().any(|row| row.len() != slot_count)
        {
            return Err(Error::Dimension { expected: n * slot_count, got: energy.baseline.iter().map(Vec::len).sum() });
        }
        let mut inst = Instance { nodes, slot_count, slot_length, links, sfcs, reward, energy, adjacency: Vec::new() };
        inst.index_links();
        Ok(inst)
    }

    /// Builds an instance from a time-expanded graph and radio/energy parameters.
    pub fn from_scenario(
        rteg: &Rteg,
        radio: &RadioConstants<f64>,
        energy: &EnergyParams<f64>,
        sfcs: Vec<SfcRequest>,
        reward: RewardParams,
    ) -> Result<Self> {
        let links = LinkRateTable::build(rteg, radio)?;
        let model = EnergyModel::from_scenario(rteg, radio, energy)?;
        Instance::new(rteg.nodes.clone(), rteg.slot_count, rteg.slot_length, links, sfcs, reward, model)
    }

    fn index_links(&mut self) {
        let mut adj = vec![vec![Vec::new(); self.nodes.len()]; self.slot_count];
        for ((from, to, slot), (_, bits)) in self.links.iter() {
            if bits > 0.0 {
                adj[slot - 1][from].push(to);
            }
        }
        for row in &mut adj {
            for v in row.iter_mut() {
                v.sort_unstable();
                v.dedup();
            }
        }
        self.adjacency = adj;
    }

    /// Restores derived indices after deserialization.
    pub fn reindex(&mut self) {
        self.index_links();
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn sfc_count(&self) -> usize {
        self.sfcs.len()
    }

    pub fn hosts(&self, node: usize) -> bool {
        self.nodes.get(node).is_some_and(|n| n.kind.hosts_vnfs())
    }

    /// Nodes reachable from `node` over a positive-capacity link in `slot`.
    pub fn neighbours(&self, node: usize, slot: usize) -> &[usize] {
        self.adjacency
            .get(slot.wrapping_sub(1))
            .and_then(|row| row.get(node))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Bits per slot on `(from, to)` in `slot`; zero for a missing link.
    pub fn capacity(&self, from: usize, to: usize, slot: usize) -> f64 {
        self.links.get(from, to, slot).map_or(0.0, |(_, bits)| bits)
    }

    pub fn link_kind(&self, from: usize, to: usize) -> Option<LinkKind> {
        LinkKind::between(self.nodes.get(from)?.kind, self.nodes.get(to)?.kind)
    }

    /// Slots VNF `m` of SFC `k` occupies when processed on `node`.
    pub fn process_slots(&self, k: usize, m: usize, node: usize) -> Result<usize> {
        let demand = self.sfcs[k].vnfs[m].demand;
        vnf_process_slots(demand, self.nodes[node].compute_rate, self.slot_length)
    }

    /// Transmit and receive energy of carrying `bits` over `(from, to)` in `slot`.
    pub fn transfer_energy(&self, from: usize, to: usize, slot: usize, bits: f64) -> (f64, f64) {
        match self.links.get(from, to, slot) {
            Some((kind, cap)) if cap > 0.0 => {
                let rate = cap / self.slot_length;
                (self.energy.powers.tx(kind) * bits / rate, self.energy.powers.rx(kind) * bits / rate)
            }
            _ => (0.0, 0.0),
        }
    }

    /// Energy budget of a node; ground nodes are untracked.
    pub fn energy_budget(&self, node: usize) -> Option<f64> {
        let n = &self.nodes[node];
        n.kind.hosts_vnfs().then_some(n.energy_capacity)
    }

    /// Stable digest of the instance's canonical serialization.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("instance serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
