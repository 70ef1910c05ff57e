//! SFC requests and randomized task-set generation.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VnfSpec {
    pub sfc: usize,
    /// Position in the chain, 0-based.
    pub index: usize,
    /// Compute demand, bits.
    pub demand: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfcRequest {
    pub id: usize,
    pub vnfs: Vec<VnfSpec>,
    /// Data volume carried along the chain, bits.
    pub data_bits: f64,
    /// Maximum tolerable delay, slots.
    pub deadline: usize,
    pub origin: usize,
    pub destination: usize,
}

impl SfcRequest {
    pub fn new(id: usize, demands: &[f64], data_bits: f64, deadline: usize, origin: usize, destination: usize) -> Self {
        let vnfs = demands
            .iter()
            .enumerate()
            .map(|(index, &demand)| VnfSpec { sfc: id, index, demand })
            .collect();
        SfcRequest { id, vnfs, data_bits, deadline, origin, destination }
    }

    pub fn len(&self) -> usize {
        self.vnfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vnfs.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vnfs.is_empty() {
            return Err(Error::Workload(format!("SFC {} has no VNFs", self.id)));
        }
        for (i, v) in self.vnfs.iter().enumerate() {
            if v.index != i || v.sfc != self.id {
                return Err(Error::Workload(format!("SFC {} has non-contiguous VNF indices", self.id)));
            }
            if !(v.demand > 0.0) || !v.demand.is_finite() {
                return Err(Error::Workload(format!("SFC {} VNF {i} demand must be positive", self.id)));
            }
        }
        if !(self.data_bits > 0.0) || !self.data_bits.is_finite() {
            return Err(Error::Workload(format!("SFC {} data volume must be positive", self.id)));
        }
        if self.deadline == 0 {
            return Err(Error::Workload(format!("SFC {} deadline must be at least one slot", self.id)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadParams {
    pub count: usize,
    pub vnf_min: usize,
    pub vnf_max: usize,
    /// Permit chain lengths outside 2..=3.
    pub allow_any_length: bool,
    pub data_min_bits: f64,
    pub data_max_bits: f64,
    pub demand_min_bits: f64,
    pub demand_max_bits: f64,
    pub deadline_min: usize,
    pub deadline_max: usize,
    /// Fixed workload seed; the run seed is used when absent.
    pub seed: Option<u64>,
    /// Explicit request list replacing generation.
    pub request_file: Option<PathBuf>,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        WorkloadParams {
            count: 20,
            vnf_min: 2,
            vnf_max: 3,
            allow_any_length: false,
            data_min_bits: 5e8,
            data_max_bits: 4e9,
            demand_min_bits: 1e8,
            demand_max_bits: 8e8,
            deadline_min: 8,
            deadline_max: 20,
            seed: None,
            request_file: None,
        }
    }
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::config("workload.count", "must be at least 1"));
        }
        if self.vnf_min == 0 || self.vnf_min > self.vnf_max {
            return Err(Error::config("workload.vnf_min", "chain length range must be nonempty and start at 1 or more"));
        }
        if !self.allow_any_length && (self.vnf_min < 2 || self.vnf_max > 3) {
            return Err(Error::config("workload.vnf_min", "chain length range must lie within 2..=3"));
        }
        if !(self.data_min_bits > 0.0) || self.data_min_bits > self.data_max_bits {
            return Err(Error::config("workload.data_min_bits", "data range must be positive and ordered"));
        }
        if !(self.demand_min_bits > 0.0) || self.demand_min_bits > self.demand_max_bits {
            return Err(Error::config("workload.demand_min_bits", "demand range must be positive and ordered"));
        }
        if self.deadline_min == 0 || self.deadline_min > self.deadline_max {
            return Err(Error::config("workload.deadline_min", "deadline range must be positive and ordered"));
        }
        Ok(())
    }
}

fn uniform_f64<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Draws `params.count` requests with origin and destination picked among `ground_nodes`.
///
/// Origin and destination differ whenever two or more ground nodes exist.
pub fn generate_workload<R: Rng + ?Sized>(
    params: &WorkloadParams,
    ground_nodes: &[usize],
    rng: &mut R,
) -> Result<Vec<SfcRequest>> {
    params.validate()?;
    if ground_nodes.is_empty() {
        return Err(Error::Workload("no ground nodes to serve as origin or destination".into()));
    }
    let mut out = Vec::with_capacity(params.count);
    for id in 0..params.count {
        let len = rng.gen_range(params.vnf_min..=params.vnf_max);
        let data = uniform_f64(rng, params.data_min_bits, params.data_max_bits);
        let demands: Vec<f64> = (0..len)
            .map(|_| uniform_f64(rng, params.demand_min_bits, params.demand_max_bits))
            .collect();
        let deadline = rng.gen_range(params.deadline_min..=params.deadline_max);
        let o = rng.gen_range(0..ground_nodes.len());
        let d = if ground_nodes.len() > 1 {
            let j = rng.gen_range(0..ground_nodes.len() - 1);
            if j >= o {
                j + 1
            } else {
                j
            }
        } else {
            o
        };
        out.push(SfcRequest::new(id, &demands, data, deadline, ground_nodes[o], ground_nodes[d]));
    }
    Ok(out)
}

/// Whole slots needed to process `demand` bits at `rate` bit/s with slot length `tau`.
pub fn vnf_process_slots(demand: f64, rate: f64, tau: f64) -> Result<usize> {
    if !(rate > 0.0) {
        return Err(Error::invalid("compute rate must be positive"));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("slot length must be positive"));
    }
    if !(demand >= 0.0) {
        return Err(Error::invalid("compute demand must be nonnegative"));
    }
    let slots = (demand / (rate * tau)).ceil();
    Ok((slots as usize).max(1))
}

#[derive(Debug, Deserialize)]
struct RequestRow {
    k: usize,
    l_k: usize,
    delta_bits: f64,
    deadline_slots: usize,
    origin: usize,
    dest: usize,
    sigma_1: Option<f64>,
    sigma_2: Option<f64>,
    sigma_3: Option<f64>,
}

/// Reads an explicit request list with columns
/// `k,l_k,delta_bits,deadline_slots,origin,dest,sigma_1,sigma_2,sigma_3`.
pub fn read_requests(path: &Path) -> Result<Vec<SfcRequest>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Workload(e.to_string()))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<RequestRow>() {
        let row = row.map_err(|e| Error::Workload(e.to_string()))?;
        let sigmas: Vec<f64> = [row.sigma_1, row.sigma_2, row.sigma_3].into_iter().flatten().collect();
        if row.l_k == 0 || row.l_k > sigmas.len() {
            return Err(Error::Workload(format!("request {} lists {} demands for l_k = {}", row.k, sigmas.len(), row.l_k)));
        }
        let req = SfcRequest::new(row.k, &sigmas[..row.l_k], row.delta_bits, row.deadline_slots, row.origin, row.dest);
        req.validate()?;
        out.push(req);
    }
    for (i, r) in out.iter().enumerate() {
        if r.id != i {
            return Err(Error::Workload(format!("request ids must be 0..n in order, found {} at row {i}", r.id)));
        }
    }
    Ok(out)
}
