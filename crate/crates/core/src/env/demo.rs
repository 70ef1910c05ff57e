//! A hand-built six-node instance where deferring one SFC lets all three meet
//! their deadlines, while first-come scheduling loses one.

use std::sync::Arc;

use super::{EnergyModel, Env, Instance, LinkPowers, RewardParams};
use crate::channel::LinkRateTable;
use crate::topology::{LinkKind, NodeKind, NodeSpec, UavParams};
use crate::workload::SfcRequest;
use crate::Result;

const ORIGIN: usize = 0;
const DEST: usize = 1;
const U1: usize = 2;
const U2: usize = 3;
const S1: usize = 4;
const S2: usize = 5;
const HOLD: usize = 6;

fn host(id: usize, kind: NodeKind, compute: f64, storage: f64) -> NodeSpec {
    NodeSpec {
        id,
        kind,
        compute_capacity: compute,
        compute_rate: 100.0,
        storage_capacity: storage,
        energy_capacity: 1e6,
        uav: (kind == NodeKind::Uav).then_some(UavParams {
            mass_kg: 0.5,
            rotor_radius_m: 0.2,
            rotor_count: 4,
            max_speed_mps: 12.0,
            max_power_w: 12.0,
        }),
    }
}

/// Ground origin 0, ground destination 1, UAVs 2 and 3, satellites 4 and 5,
/// ten one-second slots, three SFCs.
pub fn contention_demo_instance() -> Instance {
    let slots = 10;
    let nodes = vec![
        NodeSpec::ground(ORIGIN),
        NodeSpec::ground(DEST),
        host(U1, NodeKind::Uav, 1000.0, 1000.0),
        host(U2, NodeKind::Uav, 450.0, 1000.0),
        host(S1, NodeKind::Satellite, 1000.0, 1000.0),
        host(S2, NodeKind::Satellite, 250.0, 30.0),
    ];
    let edges = [
        (ORIGIN, U1, LinkKind::G2U),
        (ORIGIN, U2, LinkKind::G2U),
        (U1, U2, LinkKind::U2U),
        (U2, U1, LinkKind::U2U),
        (U1, S1, LinkKind::U2S),
        (U2, S2, LinkKind::U2S),
        (S1, S2, LinkKind::S2S),
        (S1, DEST, LinkKind::S2G),
        (S2, DEST, LinkKind::S2G),
        (U1, DEST, LinkKind::U2G),
        (U2, DEST, LinkKind::U2G),
    ];
    let mut links = LinkRateTable::default();
    for t in 1..=slots {
        for &(a, b, kind) in &edges {
            let bits = if (a, b, t) == (U1, DEST, 4) { 5.0 } else { 1000.0 };
            links.insert(a, b, t, kind, bits);
        }
    }
    let sfcs = vec![
        SfcRequest::new(0, &[50.0], 10.0, 4, ORIGIN, DEST),
        SfcRequest::new(1, &[100.0, 100.0, 200.0], 30.0, 10, ORIGIN, DEST),
        SfcRequest::new(2, &[400.0, 100.0], 20.0, 8, ORIGIN, DEST),
    ];
    let mut energy = EnergyModel::free(nodes.len(), slots);
    for (i, n) in nodes.iter().enumerate() {
        if n.kind.hosts_vnfs() {
            energy.baseline[i] = vec![1.0; slots];
            energy.compute_per_bit[i] = 0.01;
        }
    }
    energy.powers = LinkPowers::uniform(1.0, 0.5);
    Instance::new(nodes, slots, 1.0, links, sfcs, RewardParams::default(), energy)
        .expect("demo instance is well formed")
}

/// Joint actions where the middle SFC holds on the small satellite for one
/// slot, letting the smaller SFC use its compute first.
pub fn deferral_actions() -> Vec<Vec<usize>> {
    vec![
        vec![U1, U1, U2],
        vec![U1, U1, U2],
        vec![DEST, U1, U2],
        vec![0, S1, U2],
        vec![0, S2, U2],
        vec![0, HOLD, S2],
        vec![0, S2, S2],
        vec![0, S2, DEST],
        vec![0, S2, 0],
        vec![0, DEST, 0],
    ]
}

/// Joint actions where every SFC requests compute as soon as it arrives.
pub fn naive_actions() -> Vec<Vec<usize>> {
    let mut a = deferral_actions();
    a[5] = vec![0, S2, S2];
    a[6] = vec![0, S2, S2];
    a[7] = vec![0, DEST, S2];
    a.truncate(8);
    a
}

/// Replays a joint-action script until the episode ends or the script runs out.
pub fn run_script(instance: Arc<Instance>, script: &[Vec<usize>]) -> Result<Env> {
    let mut env = Env::new(instance);
    for actions in script {
        if env.is_done() {
            break;
        }
        env.step(actions)?;
    }
    Ok(env)
}
