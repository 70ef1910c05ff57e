//! UAV and satellite energy expenditure and budget accounting.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "S: Scalar + Deserialize<'de>"))]
pub struct EnergyParams<S> {
    pub gravity: S,
    pub air_density: S,
    /// Maximum UAV propulsion power, W.
    pub p_max_uav: S,
    /// UAV cruise speed used for repositioning, m/s.
    pub uav_speed: S,
    /// Compute energy per bit on UAVs, J/bit.
    pub ec_uav: S,
    /// Compute energy per bit on satellites, J/bit.
    pub ec_sat: S,
    /// Satellite operations energy per slot, J.
    pub e_op: S,
    pub e_max_uav: S,
    pub e_max_sat: S,
    /// Satellite receive power for U2S links, W.
    pub p_re_us: S,
    /// Satellite receive power for S2S links, W.
    pub p_re_ss: S,
}

impl<S: Scalar> Default for EnergyParams<S> {
    fn default() -> Self {
        EnergyParams {
            gravity: S::of(9.8),
            air_density: S::of(1.225),
            p_max_uav: S::of(12.0),
            uav_speed: S::of(12.0),
            ec_uav: S::of(1e-8),
            ec_sat: S::of(5e-9),
            e_op: S::of(1.0),
            e_max_uav: S::of(8e4),
            e_max_sat: S::of(1e7),
            p_re_us: S::of(5.0),
            p_re_ss: S::of(5.0),
        }
    }
}

impl<S: Scalar> EnergyParams<S> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gravity", self.gravity),
            ("air_density", self.air_density),
            ("p_max_uav", self.p_max_uav),
            ("uav_speed", self.uav_speed),
            ("e_max_uav", self.e_max_uav),
            ("e_max_sat", self.e_max_sat),
        ];
        for (key, v) in positive {
            if !(v > S::zero()) {
                return Err(Error::config(format!("energy.{key}"), "must be positive"));
            }
        }
        let nonneg = [
            ("ec_uav", self.ec_uav),
            ("ec_sat", self.ec_sat),
            ("e_op", self.e_op),
            ("p_re_us", self.p_re_us),
            ("p_re_ss", self.p_re_ss),
        ];
        for (key, v) in nonneg {
            if !(v >= S::zero()) {
                return Err(Error::config(format!("energy.{key}"), "must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Environmental constant `sqrt(g^3 / (2 pi rho))`.
pub fn hover_theta<S: Scalar>(gravity: S, air_density: S) -> S {
    (gravity.powi(3) / (S::of(2.0 * std::f64::consts::PI) * air_density)).sqrt()
}

/// Hovering power of a multirotor, W.
pub fn uav_hover_power<S: Scalar>(mass: S, rotor_radius: S, rotor_count: S, gravity: S, air_density: S) -> Result<S> {
    for (name, v) in [
        ("mass", mass),
        ("rotor radius", rotor_radius),
        ("rotor count", rotor_count),
        ("gravity", gravity),
        ("air density", air_density),
    ] {
        if !(v > S::zero()) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let theta = hover_theta(gravity, air_density);
    Ok(theta * (mass.powi(3) / (rotor_radius * rotor_radius * rotor_count)).sqrt())
}

/// Moving power above hover, clamped at zero when `p_max < p_hover`.
pub fn moving_power<S: Scalar>(v: S, v_max: S, p_max: S, p_hover: S) -> Result<S> {
    if !(v_max > S::zero()) {
        return Err(Error::invalid("maximum UAV speed must be positive"));
    }
    if v < S::zero() || v > v_max {
        return Err(Error::invalid(format!("speed {v} outside [0, {v_max}]")));
    }
    Ok((v / v_max * (p_max - p_hover)).max(S::zero()))
}

/// Path energy of a UAV over one slot: movement plus hovering for the whole slot.
pub fn uav_slot_energy<S: Scalar>(
    v: S,
    v_max: S,
    p_max: S,
    p_hover: S,
    from: [S; 3],
    to: [S; 3],
    tau: S,
) -> Result<S> {
    let pm = moving_power(v, v_max, p_max, p_hover)?;
    let d = from
        .iter()
        .zip(to.iter())
        .fold(S::zero(), |acc, (a, b)| acc + (*a - *b) * (*a - *b))
        .sqrt();
    let moving = if d == S::zero() || v == S::zero() { S::zero() } else { pm * d / v };
    Ok(moving + p_hover * tau)
}

/// Energy to move `bits` over a link of `rate` bit/s at power `power`.
pub fn transfer_energy<S: Scalar>(power: S, bits: S, rate: S) -> Result<S> {
    if !(rate > S::zero()) {
        return Err(Error::invalid("transfer over a zero-rate link"));
    }
    Ok(power * bits / rate)
}

/// One routed flow: bits carried and the link rate in bit/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transfer<S> {
    pub bits: S,
    pub rate: S,
}

impl<S: Scalar> Transfer<S> {
    pub fn new(bits: S, rate: S) -> Self {
        Transfer { bits, rate }
    }
}

fn sum_transfers<S: Scalar>(power: S, transfers: &[Transfer<S>]) -> Result<S> {
    transfers
        .iter()
        .try_fold(S::zero(), |acc, t| Ok(acc + transfer_energy(power, t.bits, t.rate)?))
}

/// Transmit energy of a UAV for its outbound flows.
pub fn uav_comm_energy<S: Scalar>(outbound: &[Transfer<S>], p_tr: S) -> Result<S> {
    sum_transfers(p_tr, outbound)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SatPowers<S> {
    pub p_re_us: S,
    pub p_re_ss: S,
    pub p_tr_ss: S,
    pub p_tr_sg: S,
}

/// Flows touching one satellite in one slot, grouped by role.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SatFlows<S> {
    pub inbound_us: Vec<Transfer<S>>,
    pub inbound_ss: Vec<Transfer<S>>,
    pub outbound_ss: Vec<Transfer<S>>,
    pub outbound_sg: Vec<Transfer<S>>,
}

/// Receive plus transmit plus operations energy of a satellite in one slot.
pub fn sat_slot_energy<S: Scalar>(flows: &SatFlows<S>, powers: &SatPowers<S>, e_op: S) -> Result<S> {
    let e_re = sum_transfers(powers.p_re_us, &flows.inbound_us)? + sum_transfers(powers.p_re_ss, &flows.inbound_ss)?;
    let e_tr = sum_transfers(powers.p_tr_ss, &flows.outbound_ss)? + sum_transfers(powers.p_tr_sg, &flows.outbound_sg)?;
    Ok(e_re + e_tr + e_op)
}

/// Energy to process the given VNF demands at `e_c` J/bit.
pub fn compute_energy<S: Scalar>(sigmas: &[S], e_c: S) -> S {
    sigmas.iter().fold(S::zero(), |acc, s| acc + *s * e_c)
}

/// Per-slot energy categories of one node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyEntry {
    pub path: f64,
    pub transmit: f64,
    pub receive: f64,
    pub compute: f64,
    pub operations: f64,
}

impl EnergyEntry {
    pub fn total(&self) -> f64 {
        self.path + self.transmit + self.receive + self.compute + self.operations
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyKind {
    Path,
    Transmit,
    Receive,
    Compute,
    Operations,
}

/// Energy spent per node and slot, with per-node budgets.
///
/// Nodes without a budget (ground stations) are untracked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    slot_count: usize,
    budgets: Vec<Option<f64>>,
    entries: Vec<Vec<EnergyEntry>>,
    totals: Vec<f64>,
}

impl EnergyLedger {
    pub fn new(budgets: Vec<Option<f64>>, slot_count: usize) -> Self {
        let n = budgets.len();
        EnergyLedger {
            slot_count,
            budgets,
            entries: vec![vec![EnergyEntry::default(); slot_count]; n],
            totals: vec![0.0; n],
        }
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn budget(&self, node: usize) -> Option<f64> {
        self.budgets.get(node).copied().flatten()
    }

    /// Adds `joules` to a node's slot; untracked nodes ignore the charge.
    pub fn charge(&mut self, node: usize, slot: usize, kind: EnergyKind, joules: f64) -> Result<()> {
        if !(joules >= 0.0) || !joules.is_finite() {
            return Err(Error::invalid(format!("energy charge must be finite and nonnegative, got {joules}")));
        }
        if slot == 0 || slot > self.slot_count {
            return Err(Error::SlotOutOfRange { slot, horizon: self.slot_count });
        }
        if node >= self.budgets.len() {
            return Err(Error::invalid(format!("node {node} out of range")));
        }
        if self.budgets[node].is_none() {
            return Ok(());
        }
        let e = &mut self.entries[node][slot - 1];
        match kind {
            EnergyKind::Path => e.path += joules,
            EnergyKind::Transmit => e.transmit += joules,
            EnergyKind::Receive => e.receive += joules,
            EnergyKind::Compute => e.compute += joules,
            EnergyKind::Operations => e.operations += joules,
        }
        self.totals[node] += joules;
        Ok(())
    }

    pub fn entry(&self, node: usize, slot: usize) -> Option<&EnergyEntry> {
        self.entries.get(node)?.get(slot.checked_sub(1)?)
    }

    /// Energy spent by `node` in slots `1..=t`.
    pub fn cumulative(&self, node: usize, t: usize) -> f64 {
        self.entries
            .get(node)
            .map(|row| row.iter().take(t).map(EnergyEntry::total).sum())
            .unwrap_or(0.0)
    }

    /// Energy committed by `node` over the whole horizon.
    pub fn total(&self, node: usize) -> f64 {
        self.totals.get(node).copied().unwrap_or(0.0)
    }

    /// Whether `extra` joules more still fit within the node's budget.
    pub fn can_afford(&self, node: usize, extra: f64) -> bool {
        match self.budget(node) {
            None => true,
            Some(b) => self.total(node) + extra <= b,
        }
    }
}

/// True when the energy `node` spent through slot `t` stays within its budget.
pub fn energy_feasible(ledger: &EnergyLedger, node: usize, t: usize) -> bool {
    match ledger.budget(node) {
        None => true,
        Some(b) => ledger.cumulative(node, t) <= b,
    }
}
