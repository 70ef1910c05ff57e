use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Instance, Record, ScheduleLog, CAPACITY_TOLERANCE};
use crate::{Error, Result};

/// Constraint families checked by [`check_schedule`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Each VNF is deployed on exactly one hosting node.
    SingleDeployment,
    /// A deployed VNF's SFC passes through the hosting node in that slot.
    PassThrough,
    /// VNFs of a chain start in order, each after its predecessor finishes.
    SequentialOrder,
    /// Flows start at the origin, continue where the data is, and end at the destination.
    FlowConservation,
    /// An SFC is in exactly one of transmitting, processing or stored per slot.
    ExclusiveActivity,
    ComputeCapacity,
    StorageCapacity,
    LinkCapacity,
    EnergyBudget,
    Deadline,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::SingleDeployment,
        Family::PassThrough,
        Family::SequentialOrder,
        Family::FlowConservation,
        Family::ExclusiveActivity,
        Family::ComputeCapacity,
        Family::StorageCapacity,
        Family::LinkCapacity,
        Family::EnergyBudget,
        Family::Deadline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::SingleDeployment => "single_deployment",
            Family::PassThrough => "pass_through",
            Family::SequentialOrder => "sequential_order",
            Family::FlowConservation => "flow_conservation",
            Family::ExclusiveActivity => "exclusive_activity",
            Family::ComputeCapacity => "compute_capacity",
            Family::StorageCapacity => "storage_capacity",
            Family::LinkCapacity => "link_capacity",
            Family::EnergyBudget => "energy_budget",
            Family::Deadline => "deadline",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: Family,
    pub sfc: Option<usize>,
    pub node: Option<usize>,
    pub link: Option<[usize; 2]>,
    pub slot: Option<usize>,
    pub detail: String,
}

impl Violation {
    fn new(family: Family, detail: impl Into<String>) -> Self {
        Violation { family, sfc: None, node: None, link: None, slot: None, detail: detail.into() }
    }

    fn sfc(mut self, k: usize) -> Self {
        self.sfc = Some(k);
        self
    }

    fn node(mut self, n: usize) -> Self {
        self.node = Some(n);
        self
    }

    fn link(mut self, l: [usize; 2]) -> Self {
        self.link = Some(l);
        self
    }

    fn slot(mut self, t: usize) -> Self {
        self.slot = Some(t);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if let Some(k) = self.sfc {
            write!(f, " sfc={k}")?;
        }
        if let Some(n) = self.node {
            write!(f, " node={n}")?;
        }
        if let Some([a, b]) = self.link {
            write!(f, " link={a}->{b}")?;
        }
        if let Some(t) = self.slot {
            write!(f, " slot={t}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatorOptions {
    /// Require every transfer to fit in a single slot.
    pub strict_single_slot: bool,
}

struct Transfer {
    k: usize,
    link: [usize; 2],
    start: usize,
    end: usize,
}

impl Transfer {
    fn len(&self) -> usize {
        self.end - self.start + 1
    }
}

struct Processing {
    k: usize,
    m: usize,
    node: usize,
    start: usize,
    end: usize,
}

#[derive(Default)]
struct SfcRecords {
    x: Vec<(usize, usize, usize)>,
    y: BTreeSet<(usize, usize)>,
    z: BTreeMap<[usize; 2], BTreeSet<usize>>,
    rho: BTreeSet<(usize, usize)>,
}

fn within(value: f64, cap: f64) -> bool {
    value <= cap * (1.0 + CAPACITY_TOLERANCE) + f64::EPSILON
}

fn parse(log: &ScheduleLog, inst: &Instance) -> Result<Vec<SfcRecords>> {
    let n = inst.node_count();
    let t_max = inst.slot_count;
    let mut per: Vec<SfcRecords> = (0..inst.sfc_count()).map(|_| SfcRecords::default()).collect();
    let bad = |what: String| Error::MalformedLog(what);
    for r in &log.records {
        let k = r.sfc();
        if k >= per.len() {
            return Err(bad(format!("SFC {k} does not exist")));
        }
        let t = r.slot();
        if t == 0 || t > t_max {
            return Err(bad(format!("slot {t} outside 1..={t_max}")));
        }
        if r.value() > 1 {
            return Err(bad(format!("non-binary value in {r:?}")));
        }
        if r.value() == 0 {
            continue;
        }
        match *r {
            Record::X { m, node, .. } => {
                if m >= inst.sfcs[k].len() || node >= n {
                    return Err(bad(format!("x record {r:?} references an unknown VNF or node")));
                }
                per[k].x.push((m, node, t));
            }
            Record::Y { node, .. } => {
                if node >= n {
                    return Err(bad(format!("y record {r:?} references an unknown node")));
                }
                per[k].y.insert((node, t));
            }
            Record::Z { link, .. } => {
                if link[0] >= n || link[1] >= n || link[0] == link[1] {
                    return Err(bad(format!("z record {r:?} references an invalid link")));
                }
                per[k].z.entry(link).or_default().insert(t);
            }
            Record::Rho { node, .. } => {
                if node >= n {
                    return Err(bad(format!("rho record {r:?} references an unknown node")));
                }
                per[k].rho.insert((node, t));
            }
        }
    }
    Ok(per)
}

fn transfers(k: usize, recs: &SfcRecords) -> Vec<Transfer> {
    let mut out = Vec::new();
    for (link, slots) in &recs.z {
        let mut iter = slots.iter().copied();
        let Some(first) = iter.next() else { continue };
        let (mut start, mut end) = (first, first);
        for t in iter {
            if t == end + 1 {
                end = t;
            } else {
                out.push(Transfer { k, link: *link, start, end });
                start = t;
                end = t;
            }
        }
        out.push(Transfer { k, link: *link, start, end });
    }
    out.sort_by_key(|tr| (tr.start, tr.link));
    out
}

/// Checks a schedule against every constraint family; an empty result means feasible.
pub fn check_schedule(log: &ScheduleLog, inst: &Instance, opts: &ValidatorOptions) -> Result<Vec<Violation>> {
    let per = parse(log, inst)?;
    let t_max = inst.slot_count;
    let n = inst.node_count();
    let mut v = Vec::new();

    let mut windows: Vec<Processing> = Vec::new();
    let mut runs: Vec<Transfer> = Vec::new();
    for (k, recs) in per.iter().enumerate() {
        let req = &inst.sfcs[k];
        let mut counts = vec![0usize; req.len()];
        for &(m, node, t) in &recs.x {
            counts[m] += 1;
            if !inst.hosts(node) {
                v.push(
                    Violation::new(Family::SingleDeployment, format!("VNF {m} placed on non-hosting node"))
                        .sfc(k)
                        .node(node)
                        .slot(t),
                );
                continue;
            }
            if !recs.y.contains(&(node, t)) {
                v.push(
                    Violation::new(Family::PassThrough, format!("VNF {m} deployed without the SFC passing through"))
                        .sfc(k)
                        .node(node)
                        .slot(t),
                );
            }
            let p = inst.process_slots(k, m, node)?;
            let end = t + p - 1;
            if end > t_max {
                v.push(
                    Violation::new(Family::SequentialOrder, format!("VNF {m} processing overruns the horizon"))
                        .sfc(k)
                        .node(node)
                        .slot(t),
                );
            }
            windows.push(Processing { k, m, node, start: t, end: end.min(t_max) });
        }
        for (m, &c) in counts.iter().enumerate() {
            if c > 1 {
                v.push(Violation::new(Family::SingleDeployment, format!("VNF {m} deployed {c} times")).sfc(k));
            }
        }

        let mut first: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for &(m, node, t) in &recs.x {
            if !inst.hosts(node) {
                continue;
            }
            let e = first.entry(m).or_insert((t, node));
            if t < e.0 {
                *e = (t, node);
            }
        }
        for (&m, &(start, _)) in &first {
            if m == 0 {
                continue;
            }
            match first.get(&(m - 1)) {
                None => v.push(
                    Violation::new(Family::SequentialOrder, format!("VNF {m} deployed before VNF {}", m - 1))
                        .sfc(k)
                        .slot(start),
                ),
                Some(&(prev_start, prev_node)) => {
                    let ready = prev_start + inst.process_slots(k, m - 1, prev_node)?;
                    if start < ready {
                        v.push(
                            Violation::new(
                                Family::SequentialOrder,
                                format!("VNF {m} starts in slot {start} before VNF {} finishes (slot {ready})", m - 1),
                            )
                            .sfc(k)
                            .slot(start),
                        );
                    }
                }
            }
        }

        let tr = transfers(k, recs);
        enum Item {
            Store(usize),
            Move(usize),
        }
        let mut items: Vec<(usize, u8, Item)> = recs.rho.iter().map(|&(node, t)| (t, 0, Item::Store(node))).collect();
        items.extend(tr.iter().enumerate().map(|(i, x)| (x.start, 1, Item::Move(i))));
        items.sort_by_key(|(t, order, _)| (*t, *order));
        let mut pos = req.origin;
        let mut delivered_at: Option<usize> = None;
        for (t, _, item) in &items {
            if let Some(d) = delivered_at {
                v.push(
                    Violation::new(Family::FlowConservation, format!("activity after delivery in slot {d}"))
                        .sfc(k)
                        .slot(*t),
                );
                break;
            }
            match item {
                Item::Store(node) => {
                    if *node != pos {
                        v.push(
                            Violation::new(Family::FlowConservation, format!("stored on node {node} while data is at {pos}"))
                                .sfc(k)
                                .node(*node)
                                .slot(*t),
                        );
                        pos = *node;
                    }
                }
                Item::Move(i) => {
                    let x = &tr[*i];
                    if x.link[0] != pos {
                        v.push(
                            Violation::new(Family::FlowConservation, format!("flow leaves {} while data is at {pos}", x.link[0]))
                                .sfc(k)
                                .link(x.link)
                                .slot(*t),
                        );
                    }
                    pos = x.link[1];
                    if !inst.hosts(pos) {
                        if pos != req.destination {
                            v.push(
                                Violation::new(Family::FlowConservation, format!("flow terminates at ground node {pos}"))
                                    .sfc(k)
                                    .link(x.link)
                                    .slot(*t),
                            );
                        }
                        delivered_at = Some(x.end);
                    }
                }
            }
        }
        if let Some(d) = delivered_at {
            if pos == req.destination && d > req.deadline {
                v.push(
                    Violation::new(Family::Deadline, format!("delivered in slot {d} after deadline {}", req.deadline))
                        .sfc(k)
                        .slot(d),
                );
            }
        }

        let mut activity: BTreeMap<usize, usize> = BTreeMap::new();
        let mut processing: BTreeSet<(usize, usize)> = BTreeSet::new();
        for w in windows.iter().filter(|w| w.k == k) {
            for u in w.start..=w.end {
                processing.insert((u, w.m));
            }
        }
        for &(u, _) in &processing {
            *activity.entry(u).or_default() += 1;
        }
        for x in &tr {
            for u in x.start..=x.end {
                *activity.entry(u).or_default() += 1;
            }
        }
        for &(_, t) in &recs.rho {
            *activity.entry(t).or_default() += 1;
        }
        if let (Some((&lo, _)), Some((&hi, _))) = (activity.first_key_value(), activity.last_key_value()) {
            for u in lo..=hi {
                let c = activity.get(&u).copied().unwrap_or(0);
                if c != 1 {
                    v.push(
                        Violation::new(Family::ExclusiveActivity, format!("{c} concurrent activities"))
                            .sfc(k)
                            .slot(u),
                    );
                }
            }
        }
        runs.extend(tr);
    }

    let mut occupancy = vec![vec![0.0; t_max]; n];
    for w in &windows {
        let demand = inst.sfcs[w.k].vnfs[w.m].demand;
        for u in w.start..=w.end {
            occupancy[w.node][u - 1] += demand;
        }
    }
    for (node, row) in occupancy.iter().enumerate() {
        let cap = inst.nodes[node].compute_capacity;
        for (i, &o) in row.iter().enumerate() {
            if o > 0.0 && !within(o, cap) {
                v.push(
                    Violation::new(Family::ComputeCapacity, format!("occupancy {o} exceeds capacity {cap}"))
                        .node(node)
                        .slot(i + 1),
                );
            }
        }
    }

    let mut stored: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (k, recs) in per.iter().enumerate() {
        for &(node, t) in &recs.rho {
            if !inst.hosts(node) || t >= t_max {
                v.push(
                    Violation::new(Family::StorageCapacity, "storage link does not exist")
                        .sfc(k)
                        .node(node)
                        .slot(t),
                );
                continue;
            }
            *stored.entry((node, t)).or_default() += inst.sfcs[k].data_bits;
        }
    }
    for (&(node, t), &bits) in &stored {
        let cap = inst.nodes[node].storage_capacity;
        if !within(bits, cap) {
            v.push(
                Violation::new(Family::StorageCapacity, format!("stored {bits} bits exceed capacity {cap}"))
                    .node(node)
                    .slot(t),
            );
        }
    }

    let mut load: BTreeMap<([usize; 2], usize), f64> = BTreeMap::new();
    for r in &runs {
        if opts.strict_single_slot && r.len() > 1 {
            v.push(
                Violation::new(Family::LinkCapacity, format!("transfer spans {} slots", r.len()))
                    .sfc(r.k)
                    .link(r.link)
                    .slot(r.start),
            );
        }
        let q = inst.sfcs[r.k].data_bits / r.len() as f64;
        for u in r.start..=r.end {
            *load.entry((r.link, u)).or_default() += q;
        }
    }
    for (&(link, u), &bits) in &load {
        let cap = inst.capacity(link[0], link[1], u);
        if !within(bits, cap) || cap <= 0.0 {
            v.push(
                Violation::new(Family::LinkCapacity, format!("load {bits} exceeds capacity {cap}"))
                    .link(link)
                    .slot(u),
            );
        }
    }

    let mut energy: Vec<Vec<f64>> = inst.energy.baseline.clone();
    for r in &runs {
        let q = inst.sfcs[r.k].data_bits / r.len() as f64;
        for u in r.start..=r.end {
            let (tx, rx) = inst.transfer_energy(r.link[0], r.link[1], u, q);
            energy[r.link[0]][u - 1] += tx;
            energy[r.link[1]][u - 1] += rx;
        }
    }
    for w in &windows {
        let total = inst.sfcs[w.k].vnfs[w.m].demand * inst.energy.compute_per_bit[w.node];
        let p = inst.process_slots(w.k, w.m, w.node)? as f64;
        for u in w.start..=w.end {
            energy[w.node][u - 1] += total / p;
        }
    }
    for (node, row) in energy.iter().enumerate() {
        let Some(budget) = inst.energy_budget(node) else { continue };
        let mut cumulative = 0.0;
        for (i, e) in row.iter().enumerate() {
            cumulative += e;
            if !within(cumulative, budget) {
                v.push(
                    Violation::new(Family::EnergyBudget, format!("cumulative energy {cumulative} exceeds budget {budget}"))
                        .node(node)
                        .slot(i + 1),
                );
                break;
            }
        }
    }
    Ok(v)
}

/// Number of SFCs that are fully processed and delivered within their deadline
/// without any violation attributed to them.
pub fn objective_value(log: &ScheduleLog, inst: &Instance) -> Result<usize> {
    let violations = check_schedule(log, inst, &ValidatorOptions::default())?;
    let per = parse(log, inst)?;
    let mut count = 0;
    for (k, recs) in per.iter().enumerate() {
        let req = &inst.sfcs[k];
        if violations.iter().any(|x| x.sfc == Some(k)) {
            continue;
        }
        let placed: BTreeSet<usize> = recs.x.iter().filter(|(_, node, _)| inst.hosts(*node)).map(|(m, _, _)| *m).collect();
        if placed.len() != req.len() {
            continue;
        }
        let delivery = transfers(k, recs)
            .into_iter()
            .filter(|t| t.link[1] == req.destination)
            .map(|t| t.end)
            .min();
        if delivery.is_some_and(|d| d <= req.deadline) {
            count += 1;
        }
    }
    Ok(count)
}
