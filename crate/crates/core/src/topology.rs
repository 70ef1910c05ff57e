//! Node placement, motion and the reconfigurable time-expanded graph.
//!
//! Slots are 1-based (`1..=slot_count`). Within a slot the geometry is
//! quasi-static: every link is evaluated on the node positions of that slot.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean equatorial earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;
/// Standard gravitational parameter of the earth, m^3/s^2.
pub const EARTH_MU: f64 = 3.986_004_418e14;
/// Rejection-sampling budget per placed node.
pub const PLACEMENT_ATTEMPTS_PER_NODE: usize = 10_000;

pub type Position = [f64; 3];

pub fn distance(a: &Position, b: &Position) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn horizontal_distance(a: &Position, b: &Position) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Ground,
    Uav,
    Satellite,
}

impl NodeKind {
    /// Uav and Satellite nodes carry compute/storage/energy resources.
    pub fn hosts_vnfs(self) -> bool {
        !matches!(self, NodeKind::Ground)
    }
}

/// Airframe parameters that only exist for UAVs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavParams {
    pub mass_kg: f64,
    pub rotor_radius_m: f64,
    pub rotor_count: u32,
    pub max_speed_mps: f64,
    pub max_power_w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: usize,
    pub kind: NodeKind,
    /// Compute occupancy cap, bits per slot.
    pub compute_capacity: f64,
    /// Processing rate, bit/s.
    pub compute_rate: f64,
    /// Storage capacity, bits.
    pub storage_capacity: f64,
    /// Energy budget over the horizon, joules.
    pub energy_capacity: f64,
    pub uav: Option<UavParams>,
}

impl NodeSpec {
    pub fn ground(id: usize) -> Self {
        NodeSpec {
            id,
            kind: NodeKind::Ground,
            compute_capacity: 0.0,
            compute_rate: 0.0,
            storage_capacity: 0.0,
            energy_capacity: 0.0,
            uav: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NodeKind::Ground => {
                if self.uav.is_some() {
                    return Err(Error::invalid(format!("ground node {} has UAV parameters", self.id)));
                }
            }
            NodeKind::Uav | NodeKind::Satellite => {
                let caps = [
                    self.compute_capacity,
                    self.compute_rate,
                    self.storage_capacity,
                    self.energy_capacity,
                ];
                if caps.iter().any(|c| !(*c > 0.0)) {
                    return Err(Error::invalid(format!("node {} has a nonpositive capacity", self.id)));
                }
                match (self.kind, &self.uav) {
                    (NodeKind::Uav, None) => {
                        return Err(Error::invalid(format!("UAV {} lacks airframe parameters", self.id)))
                    }
                    (NodeKind::Satellite, Some(_)) => {
                        return Err(Error::invalid(format!("satellite {} has UAV parameters", self.id)))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Per-slot position of one node, index 0 is slot 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub positions: Vec<Position>,
}

impl Trajectory {
    pub fn stationary(p: Position, slots: usize) -> Self {
        Trajectory { positions: vec![p; slots] }
    }

    /// Flies through `waypoints` in order at `speed`, starting at the first one.
    /// The last waypoint is held once reached.
    pub fn from_waypoints(waypoints: &[Position], speed: f64, tau: f64, slots: usize) -> Result<Self> {
        let Some(&start) = waypoints.first() else {
            return Err(Error::invalid("empty waypoint list"));
        };
        if !(speed > 0.0) {
            return Err(Error::invalid("waypoint speed must be positive"));
        }
        let step = speed * tau;
        let mut positions = Vec::with_capacity(slots);
        let mut cur = start;
        let mut next = 1;
        for _ in 0..slots {
            positions.push(cur);
            let mut budget = step;
            while budget > 0.0 && next < waypoints.len() {
                let target = waypoints[next];
                let d = distance(&cur, &target);
                if d <= budget {
                    cur = target;
                    budget -= d;
                    next += 1;
                } else {
                    let f = budget / d;
                    for i in 0..3 {
                        cur[i] += (target[i] - cur[i]) * f;
                    }
                    budget = 0.0;
                }
            }
        }
        Ok(Trajectory { positions })
    }

    pub fn at(&self, slot: usize) -> Position {
        self.positions[slot - 1]
    }

    /// Largest displacement between consecutive slots.
    pub fn max_step(&self) -> f64 {
        self.positions.windows(2).map(|w| distance(&w[0], &w[1])).fold(0.0, f64::max)
    }
}

/// Places `count` nodes uniformly in a horizontal disc centred on the origin,
/// keeping every pair at least `min_separation` apart.
pub fn place_uavs<R: Rng + ?Sized>(
    count: usize,
    radius: f64,
    min_separation: f64,
    altitude: f64,
    rng: &mut R,
) -> Result<Vec<Position>> {
    if count == 0 {
        return Err(Error::invalid("placement count must be at least 1"));
    }
    if !(radius > 0.0) || min_separation < 0.0 {
        return Err(Error::invalid("placement radius must be positive and separation nonnegative"));
    }
    let mut placed: Vec<Position> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut ok = false;
        for _ in 0..PLACEMENT_ATTEMPTS_PER_NODE {
            let r = radius * rng.gen::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.gen::<f64>();
            let p = [r * theta.cos(), r * theta.sin(), altitude];
            if placed.iter().all(|q| horizontal_distance(&p, q) >= min_separation) {
                placed.push(p);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::PlacementInfeasible { placed: placed.len(), requested: count });
        }
    }
    Ok(placed)
}

/// Idealised circular orbit seen from a local frame whose origin sits on the
/// earth's surface at the scenario centre (z up, earth centre at `-R_e` on z).
///
/// `inclination` is the heading of the ground track in the local x/y plane and
/// `phase` the orbital anomaly at t = 0, measured from the local zenith.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircularOrbit {
    pub altitude: f64,
    pub inclination: f64,
    pub phase: f64,
}

impl CircularOrbit {
    pub fn radius(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude
    }

    /// Orbital period from Kepler's third law.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU * (self.radius().powi(3) / EARTH_MU).sqrt()
    }

    pub fn angular_rate(&self) -> f64 {
        std::f64::consts::TAU / self.period()
    }

    pub fn position_at(&self, seconds: f64) -> Position {
        let a = self.radius();
        let theta = self.phase + self.angular_rate() * seconds;
        let (s, c) = theta.sin_cos();
        let (si, ci) = self.inclination.sin_cos();
        [a * s * ci, a * s * si, a * c - EARTH_RADIUS_M]
    }
}

/// Satellite position in `slot` (1-based); slot 1 is t = 0.
pub fn propagate_satellite(orbit: &CircularOrbit, slot: usize, tau: f64) -> Position {
    orbit.position_at((slot as f64 - 1.0) * tau)
}

pub fn orbit_trajectory(orbit: &CircularOrbit, slots: usize, tau: f64) -> Result<Trajectory> {
    if !(orbit.altitude > 0.0) {
        return Err(Error::invalid("orbit altitude must be positive"));
    }
    Ok(Trajectory { positions: (1..=slots).map(|t| propagate_satellite(orbit, t, tau)).collect() })
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    node_id: usize,
    slot: usize,
    x_m: f64,
    y_m: f64,
    z_m: f64,
}

/// Reads a `node_id,slot,x_m,y_m,z_m` trace. Every listed node must cover
/// slots `1..=slots` exactly once.
pub fn read_position_trace(path: &Path, slots: usize) -> Result<BTreeMap<usize, Trajectory>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::config("scenario.trace_file", e.to_string()))?;
    let mut by_node: BTreeMap<usize, Vec<Option<Position>>> = BTreeMap::new();
    for row in reader.deserialize::<TraceRow>() {
        let row = row.map_err(|e| Error::config("scenario.trace_file", e.to_string()))?;
        if row.slot == 0 || row.slot > slots {
            return Err(Error::config(
                "scenario.trace_file",
                format!("node {} slot {} outside 1..={slots}", row.node_id, row.slot),
            ));
        }
        let entry = by_node.entry(row.node_id).or_insert_with(|| vec![None; slots]);
        if entry[row.slot - 1].replace([row.x_m, row.y_m, row.z_m]).is_some() {
            return Err(Error::config(
                "scenario.trace_file",
                format!("duplicate row for node {} slot {}", row.node_id, row.slot),
            ));
        }
    }
    by_node
        .into_iter()
        .map(|(id, ps)| {
            let positions = ps.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| {
                Error::config("scenario.trace_file", format!("node {id} does not cover every slot"))
            })?;
            Ok((id, Trajectory { positions }))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    G2U,
    U2G,
    U2U,
    U2S,
    S2S,
    S2G,
}

impl LinkKind {
    pub const ALL: [LinkKind; 6] =
        [LinkKind::G2U, LinkKind::U2G, LinkKind::U2U, LinkKind::U2S, LinkKind::S2S, LinkKind::S2G];

    /// The link kind for a directed node pair, if the pairing is one of the six.
    pub fn between(from: NodeKind, to: NodeKind) -> Option<LinkKind> {
        use NodeKind::*;
        match (from, to) {
            (Ground, Uav) => Some(LinkKind::G2U),
            (Uav, Ground) => Some(LinkKind::U2G),
            (Uav, Uav) => Some(LinkKind::U2U),
            (Uav, Satellite) => Some(LinkKind::U2S),
            (Satellite, Satellite) => Some(LinkKind::S2S),
            (Satellite, Ground) => Some(LinkKind::S2G),
            _ => None,
        }
    }

    /// Satellite-facing links use the link-budget rate directly instead of Shannon.
    pub fn is_link_budget(self) -> bool {
        matches!(self, LinkKind::U2S | LinkKind::S2S)
    }
}

/// Maximum communication distance per link kind, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangeLimits {
    pub g2u: f64,
    pub u2g: f64,
    pub u2u: f64,
    pub u2s: f64,
    pub s2s: f64,
    pub s2g: f64,
}

impl Default for RangeLimits {
    fn default() -> Self {
        RangeLimits { g2u: 1e3, u2g: 1e3, u2u: 2e3, u2s: 2e6, s2s: 5e6, s2g: 2e6 }
    }
}

impl RangeLimits {
    pub fn get(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::G2U => self.g2u,
            LinkKind::U2G => self.u2g,
            LinkKind::U2U => self.u2u,
            LinkKind::U2S => self.u2s,
            LinkKind::S2S => self.s2s,
            LinkKind::S2G => self.s2g,
        }
    }
}

/// A directed communication link inside one slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub slot: usize,
    pub kind: LinkKind,
    /// Node distance in this slot, meters.
    pub distance: f64,
}

/// Storage edge `(node, slot) -> (node, slot + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StorageLink {
    pub node: usize,
    pub slot: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rteg {
    pub slot_count: usize,
    pub slot_length: f64,
    pub nodes: Vec<NodeSpec>,
    pub trajectories: Vec<Trajectory>,
    links: Vec<Vec<Link>>,
    storage_links: Vec<StorageLink>,
}

pub fn build_rteg(
    nodes: Vec<NodeSpec>,
    trajectories: Vec<Trajectory>,
    slot_count: usize,
    slot_length: f64,
    ranges: &RangeLimits,
) -> Result<Rteg> {
    if slot_count == 0 {
        return Err(Error::invalid("slot count must be at least 1"));
    }
    if !(slot_length > 0.0) {
        return Err(Error::invalid("slot length must be positive"));
    }
    if nodes.len() != trajectories.len() {
        return Err(Error::invalid(format!(
            "{} nodes but {} trajectories",
            nodes.len(),
            trajectories.len()
        )));
    }
    for (i, (n, tr)) in nodes.iter().zip(&trajectories).enumerate() {
        if n.id != i {
            return Err(Error::invalid(format!("node at index {i} has id {}", n.id)));
        }
        n.validate()?;
        if tr.positions.len() < slot_count {
            return Err(Error::invalid(format!("trajectory of node {i} is shorter than {slot_count} slots")));
        }
    }

    let mut links = Vec::with_capacity(slot_count);
    for t in 1..=slot_count {
        let mut slot_links = Vec::new();
        for a in &nodes {
            for b in &nodes {
                if a.id == b.id {
                    continue;
                }
                let Some(kind) = LinkKind::between(a.kind, b.kind) else { continue };
                let d = distance(&trajectories[a.id].at(t), &trajectories[b.id].at(t));
                if d <= ranges.get(kind) {
                    slot_links.push(Link { from: a.id, to: b.id, slot: t, kind, distance: d });
                }
            }
        }
        links.push(slot_links);
    }

    let storage_links = (1..slot_count)
        .flat_map(|t| {
            nodes
                .iter()
                .filter(|n| n.kind.hosts_vnfs())
                .map(move |n| StorageLink { node: n.id, slot: t })
        })
        .collect();

    Ok(Rteg { slot_count, slot_length, nodes, trajectories, links, storage_links })
}

impl Rteg {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of (node, slot) replicas.
    pub fn replica_count(&self) -> usize {
        self.nodes.len() * self.slot_count
    }

    pub fn links_at(&self, slot: usize) -> Result<&[Link]> {
        if slot == 0 || slot > self.slot_count {
            return Err(Error::SlotOutOfRange { slot, horizon: self.slot_count });
        }
        Ok(&self.links[slot - 1])
    }

    pub fn storage_links(&self) -> &[StorageLink] {
        &self.storage_links
    }

    pub fn has_storage_link(&self, node: usize, slot: usize) -> bool {
        slot >= 1
            && slot < self.slot_count
            && self.nodes.get(node).is_some_and(|n| n.kind.hosts_vnfs())
    }

    pub fn position(&self, node: usize, slot: usize) -> Position {
        self.trajectories[node].at(slot)
    }

    /// Canonical serialization used for determinism checks.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("Rteg serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uav(id: usize) -> NodeSpec {
        NodeSpec {
            id,
            kind: NodeKind::Uav,
            compute_capacity: 1e9,
            compute_rate: 1e8,
            storage_capacity: 1e10,
            energy_capacity: 8e4,
            uav: Some(UavParams {
                mass_kg: 0.5,
                rotor_radius_m: 0.2,
                rotor_count: 4,
                max_speed_mps: 12.0,
                max_power_w: 12.0,
            }),
        }
    }

    fn sat(id: usize) -> NodeSpec {
        NodeSpec {
            id,
            kind: NodeKind::Satellite,
            compute_capacity: 4e9,
            compute_rate: 1e9,
            storage_capacity: 1e11,
            energy_capacity: 1e7,
            uav: None,
        }
    }

    #[test]
    fn thirty_uavs_respect_separation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ps = place_uavs(30, 400.0, 20.0, 100.0, &mut rng).unwrap();
        assert_eq!(ps.len(), 30);
        for (i, a) in ps.iter().enumerate() {
            assert!(a[0].hypot(a[1]) <= 400.0);
            assert_eq!(a[2], 100.0);
            for b in &ps[i + 1..] {
                assert!(horizontal_distance(a, b) >= 20.0);
            }
        }
    }

    #[test]
    fn single_uav_lands_in_disc() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ps = place_uavs(1, 400.0, 20.0, 100.0, &mut rng).unwrap();
        assert_eq!(ps.len(), 1);
        assert!(ps[0][0].hypot(ps[0][1]) <= 400.0);
    }

    #[test]
    fn dense_placement_is_infeasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = place_uavs(2, 5.0, 20.0, 100.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::PlacementInfeasible { placed: 1, requested: 2 }));
    }

    #[test]
    fn placement_is_deterministic() {
        let a = place_uavs(10, 400.0, 20.0, 100.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = place_uavs(10, 400.0, 20.0, 100.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn orbit_starts_at_phase() {
        let orbit = CircularOrbit { altitude: 550e3, inclination: 0.3, phase: 0.0 };
        let p = propagate_satellite(&orbit, 1, 5.0);
        assert!(p[0].abs() < 1e-6 && p[1].abs() < 1e-6);
        assert!((p[2] - 550e3).abs() < 1e-6);
    }

    #[test]
    fn orbit_period_near_96_minutes() {
        let orbit = CircularOrbit { altitude: 550e3, inclination: 0.0, phase: 0.0 };
        // Kepler: 2*pi*sqrt((6378137+550000)^3 / mu)
        let a: f64 = 6_928_137.0;
        let expect = 2.0 * std::f64::consts::PI * (a * a * a / 3.986004418e14).sqrt();
        assert!((orbit.period() - expect).abs() < 1e-9);
        assert!((orbit.period() - 5742.0).abs() < 10.0);
    }

    #[test]
    fn orbit_rotates_by_omega_tau() {
        let orbit = CircularOrbit { altitude: 550e3, inclination: 0.0, phase: 0.0 };
        let p = propagate_satellite(&orbit, 2, 5.0);
        let centre = [0.0, 0.0, -EARTH_RADIUS_M];
        let r = [p[0] - centre[0], p[1] - centre[1], p[2] - centre[2]];
        let angle = r[0].atan2(r[2]);
        let omega = 2.0 * std::f64::consts::PI / orbit.period();
        assert!((angle - omega * 5.0).abs() < 1e-12);
    }

    #[test]
    fn orbit_is_periodic() {
        let orbit = CircularOrbit { altitude: 550e3, inclination: 0.9, phase: -0.2 };
        for t0 in [0.0, 37.0, 1234.5] {
            let a = orbit.position_at(t0);
            let b = orbit.position_at(t0 + orbit.period());
            assert!(distance(&a, &b) <= 1e-6 * orbit.radius());
        }
    }

    #[test]
    fn counts_replicas_and_storage_links() {
        let nodes = vec![NodeSpec::ground(0), uav(1), sat(2)];
        let trajs = vec![
            Trajectory::stationary([0.0, 0.0, 0.0], 4),
            Trajectory::stationary([0.0, 0.0, 100.0], 4),
            Trajectory::stationary([0.0, 0.0, 550e3], 4),
        ];
        let g = build_rteg(nodes, trajs, 4, 5.0, &RangeLimits::default()).unwrap();
        assert_eq!(g.replica_count(), 12);
        assert_eq!(g.storage_links().len(), 6);
        assert!(g.storage_links().iter().all(|s| s.node != 0 && s.slot < 4));
        assert!(!g.has_storage_link(0, 1));
        assert!(g.has_storage_link(1, 3));
        assert!(!g.has_storage_link(1, 4));
    }

    #[test]
    fn range_gates_u2u() {
        let nodes = vec![uav(0), uav(1)];
        let trajs = vec![
            Trajectory::stationary([0.0, 0.0, 100.0], 3),
            Trajectory::stationary([10e3, 0.0, 100.0], 3),
        ];
        let ranges = RangeLimits { u2u: 5e3, ..RangeLimits::default() };
        let g = build_rteg(nodes, trajs, 3, 5.0, &ranges).unwrap();
        for t in 1..=3 {
            assert!(g.links_at(t).unwrap().is_empty());
        }
        assert!(matches!(g.links_at(4), Err(Error::SlotOutOfRange { .. })));
        assert!(matches!(g.links_at(0), Err(Error::SlotOutOfRange { .. })));
    }

    #[test]
    fn links_connect_distinct_nodes_within_slot() {
        let nodes = vec![NodeSpec::ground(0), uav(1), uav(2), sat(3)];
        let orbit = CircularOrbit { altitude: 550e3, inclination: 0.0, phase: -0.35 };
        let trajs = vec![
            Trajectory::stationary([0.0, 0.0, 0.0], 40),
            Trajectory::stationary([50.0, 0.0, 100.0], 40),
            Trajectory::stationary([-50.0, 0.0, 100.0], 40),
            orbit_trajectory(&orbit, 40, 5.0).unwrap(),
        ];
        let g = build_rteg(nodes, trajs, 40, 5.0, &RangeLimits::default()).unwrap();
        for t in 1..=40 {
            for l in g.links_at(t).unwrap() {
                assert_ne!(l.from, l.to);
                assert_eq!(l.slot, t);
            }
        }
        // the satellite drifts into U2S range during the horizon
        let has_u2s = |t| g.links_at(t).unwrap().iter().any(|l| l.kind == LinkKind::U2S);
        assert!(!has_u2s(1));
        assert!(has_u2s(40));
    }

    #[test]
    fn waypoints_respect_speed() {
        let tr = Trajectory::from_waypoints(&[[0.0, 0.0, 100.0], [200.0, 0.0, 100.0]], 12.0, 5.0, 10).unwrap();
        assert!(tr.max_step() <= 60.0 + 1e-9);
        assert_eq!(tr.at(1), [0.0, 0.0, 100.0]);
        assert!((tr.at(4)[0] - 180.0).abs() < 1e-9);
        assert_eq!(tr.at(5)[0], 200.0);
    }

    #[test]
    fn reads_trace_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        std::fs::write(&path, "node_id,slot,x_m,y_m,z_m\n3,1,0,0,550000\n3,2,1000,0,550000\n").unwrap();
        let m = read_position_trace(&path, 2).unwrap();
        assert_eq!(m[&3].at(2), [1000.0, 0.0, 550000.0]);
        std::fs::write(&path, "node_id,slot,x_m,y_m,z_m\n3,1,0,0,550000\n").unwrap();
        assert!(read_position_trace(&path, 2).is_err());
    }
}
