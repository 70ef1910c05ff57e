//! Run configuration: a TOML document with `scenario`, `radio`, `energy`,
//! `workload`, `reward`, `agent` and `run` sections, plus `section.key=value`
//! overrides.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, dbm_to_watt, MarginMode, RadioConstants, RainModel, BOLTZMANN};
use crate::energy::EnergyParams;
use crate::env::{Instance, RewardParams};
use crate::learn::AgentConfig;
use crate::topology::{
    build_rteg, orbit_trajectory, place_uavs, read_position_trace, CircularOrbit, NodeKind, NodeSpec, Position,
    RangeLimits, Rteg, Trajectory, UavParams,
};
use crate::workload::{generate_workload, read_requests, SfcRequest, WorkloadParams};
use crate::{Error, Result};

pub const SECTIONS: [&str; 7] = ["scenario", "radio", "energy", "workload", "reward", "agent", "run"];

/// Independent random streams derived from one run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Topology = 1,
    Workload = 2,
    AgentInit = 3,
    Exploration = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub ground_count: usize,
    pub uav_count: usize,
    pub satellite_count: usize,
    pub disc_radius_m: f64,
    pub min_separation_m: f64,
    pub uav_altitude_m: f64,
    pub slots: usize,
    pub slot_length_s: f64,
    pub uav_compute_capacity: f64,
    pub uav_compute_rate: f64,
    pub uav_storage: f64,
    pub sat_compute_capacity: f64,
    pub sat_compute_rate: f64,
    pub sat_storage: f64,
    pub uav_mass_kg: f64,
    pub uav_rotor_radius_m: f64,
    pub uav_rotor_count: u32,
    pub uav_max_speed_mps: f64,
    pub sat_altitude_m: f64,
    pub sat_inclination_rad: f64,
    pub sat_phase0_rad: f64,
    pub sat_phase_spacing_rad: f64,
    /// Per-UAV waypoint lists (UAV order); UAVs without one hover in place.
    pub uav_waypoints: Vec<Vec<Position>>,
    /// `node_id,slot,x_m,y_m,z_m` trace replacing the listed nodes' motion.
    pub trace_file: Option<PathBuf>,
    pub ranges: RangeLimits,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            ground_count: 4,
            uav_count: 10,
            satellite_count: 1,
            disc_radius_m: 400.0,
            min_separation_m: 20.0,
            uav_altitude_m: 100.0,
            slots: 40,
            slot_length_s: 20.0,
            uav_compute_capacity: 1e9,
            uav_compute_rate: 2e8,
            uav_storage: 1e10,
            sat_compute_capacity: 4e9,
            sat_compute_rate: 1e9,
            sat_storage: 1e11,
            uav_mass_kg: 0.5,
            uav_rotor_radius_m: 0.2,
            uav_rotor_count: 4,
            uav_max_speed_mps: 12.0,
            sat_altitude_m: 550e3,
            sat_inclination_rad: 0.9,
            sat_phase0_rad: -0.15,
            sat_phase_spacing_rad: -0.05,
            uav_waypoints: Vec::new(),
            trace_file: None,
            ranges: RangeLimits::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ground_count < 2 {
            return Err(Error::config("scenario.ground_count", "need at least two ground nodes"));
        }
        if self.uav_count + self.satellite_count == 0 {
            return Err(Error::config("scenario.uav_count", "need at least one UAV or satellite"));
        }
        if self.slots == 0 {
            return Err(Error::config("scenario.slots", "must be at least 1"));
        }
        let positive = [
            ("disc_radius_m", self.disc_radius_m),
            ("slot_length_s", self.slot_length_s),
            ("uav_compute_capacity", self.uav_compute_capacity),
            ("uav_compute_rate", self.uav_compute_rate),
            ("uav_storage", self.uav_storage),
            ("sat_compute_capacity", self.sat_compute_capacity),
            ("sat_compute_rate", self.sat_compute_rate),
            ("sat_storage", self.sat_storage),
            ("uav_mass_kg", self.uav_mass_kg),
            ("uav_rotor_radius_m", self.uav_rotor_radius_m),
            ("uav_max_speed_mps", self.uav_max_speed_mps),
            ("sat_altitude_m", self.sat_altitude_m),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("scenario.{key}"), format!("must be positive and finite, got {v}")));
            }
        }
        if self.uav_rotor_count == 0 {
            return Err(Error::config("scenario.uav_rotor_count", "must be at least 1"));
        }
        if self.min_separation_m < 0.0 {
            return Err(Error::config("scenario.min_separation_m", "must be nonnegative"));
        }
        if self.uav_waypoints.len() > self.uav_count {
            return Err(Error::config("scenario.uav_waypoints", "more waypoint lists than UAVs"));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.ground_count + self.uav_count + self.satellite_count
    }

    pub fn ground_nodes(&self) -> Vec<usize> {
        (0..self.ground_count).collect()
    }
}

/// Radio constants as written in the file; `_db` keys are decibels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub p_tr_ground: f64,
    pub p_tr_uav: f64,
    pub p_uu: f64,
    pub p_us: f64,
    pub p_ss: f64,
    pub p_sg: f64,
    pub iota0_db: f64,
    pub sigma_uu2: f64,
    pub gain_us_db: f64,
    pub gain_ss_db: f64,
    pub gain_sg_db: f64,
    /// Total line loss, a positive number of dB.
    pub line_loss_db: f64,
    pub ebn0_req_db: f64,
    pub noise_temp_k: f64,
    pub margin_db: f64,
    pub margin_mode: MarginMode,
    pub b_gu: f64,
    pub b_uu: f64,
    pub b_ug: f64,
    pub b_us: f64,
    pub b_ss: f64,
    pub b_sg: f64,
    pub f_uu: f64,
    pub f_us: f64,
    pub f_ss: f64,
    pub f_sg: f64,
    /// In-band noise power at the ground receiver, spread over `b_sg`.
    pub noise_dbm: f64,
    pub rain_db_per_km: f64,
    /// Per-slot rain attenuation; overrides `rain_db_per_km` when nonempty.
    pub rain_trace_db_per_km: Vec<f64>,
    pub slant_path_km: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            p_tr_ground: 0.5,
            p_tr_uav: 10.0,
            p_uu: 10.0,
            p_us: 10.0,
            p_ss: 20.0,
            p_sg: 20.0,
            iota0_db: 80.0,
            sigma_uu2: 4e-13,
            gain_us_db: 42.0,
            gain_ss_db: 52.0,
            gain_sg_db: 42.0,
            line_loss_db: 2.0,
            ebn0_req_db: 10.0,
            noise_temp_k: 1000.0,
            margin_db: 3.0,
            margin_mode: MarginMode::Margin,
            b_gu: 2e6,
            b_uu: 4e6,
            b_ug: 2e6,
            b_us: 50e6,
            b_ss: 80e6,
            b_sg: 80e6,
            f_uu: 2.4e9,
            f_us: 3.4e9,
            f_ss: 2.2e9,
            f_sg: 20e9,
            noise_dbm: -114.0,
            rain_db_per_km: 0.0,
            rain_trace_db_per_km: Vec::new(),
            slant_path_km: 5.0,
        }
    }
}

impl RadioConfig {
    /// Linear-domain constants.
    pub fn constants(&self) -> RadioConstants<f64> {
        RadioConstants {
            p_tr_ground: self.p_tr_ground,
            p_tr_uav: self.p_tr_uav,
            p_uu: self.p_uu,
            p_us: self.p_us,
            p_ss: self.p_ss,
            p_sg: self.p_sg,
            iota0: db_to_linear(self.iota0_db),
            sigma_uu2: self.sigma_uu2,
            gain_us: db_to_linear(self.gain_us_db),
            gain_ss: db_to_linear(self.gain_ss_db),
            gain_sg: db_to_linear(self.gain_sg_db),
            line_loss: db_to_linear(-self.line_loss_db),
            ebn0_req: db_to_linear(self.ebn0_req_db),
            boltzmann: BOLTZMANN,
            noise_temp_k: self.noise_temp_k,
            margin: db_to_linear(self.margin_db),
            margin_mode: self.margin_mode,
            b_gu: self.b_gu,
            b_uu: self.b_uu,
            b_ug: self.b_ug,
            b_us: self.b_us,
            b_ss: self.b_ss,
            b_sg: self.b_sg,
            f_uu: self.f_uu,
            f_us: self.f_us,
            f_ss: self.f_ss,
            f_sg: self.f_sg,
            n0: dbm_to_watt(self.noise_dbm) / self.b_sg,
            rain: if self.rain_trace_db_per_km.is_empty() {
                RainModel::Constant(self.rain_db_per_km)
            } else {
                RainModel::PerSlot(self.rain_trace_db_per_km.clone())
            },
            slant_path_km: self.slant_path_km,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.line_loss_db >= 0.0) {
            return Err(Error::config("radio.line_loss_db", "line loss is given as a nonnegative number of dB"));
        }
        self.constants().validate().map_err(|e| Error::config("radio", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub episodes: usize,
    /// Environment steps per episode at most; also bounded by the slot count.
    pub step_cap: usize,
    pub out_dir: PathBuf,
    /// Write the schedule log of a greedy episode after training.
    pub write_schedule: bool,
    /// Write the trained network (deep agents only).
    pub write_checkpoint: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 1,
            episodes: 500,
            step_cap: 100,
            out_dir: PathBuf::from("out"),
            write_schedule: true,
            write_checkpoint: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub radio: RadioConfig,
    pub energy: EnergyParams<f64>,
    pub workload: WorkloadParams,
    pub reward: RewardParams,
    pub agent: AgentConfig,
    pub run: RunSection,
}

impl RunConfig {
    /// Parses a TOML document, applies `key=value` overrides, then validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<file>", e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<config>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.radio.validate()?;
        self.energy.validate().map_err(|e| Error::config("energy", e.to_string()))?;
        self.workload.validate()?;
        self.agent.validate()?;
        let r = &self.reward;
        if ![r.c0, r.c1, r.c2].iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::config("reward", "reward constants must be finite and nonnegative"));
        }
        if self.run.episodes == 0 {
            return Err(Error::config("run.episodes", "must be at least 1"));
        }
        if self.run.step_cap == 0 {
            return Err(Error::config("run.step_cap", "must be at least 1"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Builds the time-expanded graph from the topology stream of `seed`.
    pub fn build_rteg(&self, seed: u64) -> Result<Rteg> {
        let sc = &self.scenario;
        let mut rng = stream_rng(seed, Stream::Topology);
        let slots = sc.slots;
        let tau = sc.slot_length_s;
        let mut nodes = Vec::with_capacity(sc.node_count());
        let mut trajectories = Vec::with_capacity(sc.node_count());
        let ground = place_uavs(sc.ground_count, sc.disc_radius_m, sc.min_separation_m, 0.0, &mut rng)?;
        for p in ground {
            nodes.push(NodeSpec::ground(nodes.len()));
            trajectories.push(Trajectory::stationary(p, slots));
        }
        if sc.uav_count > 0 {
            let uavs = place_uavs(sc.uav_count, sc.disc_radius_m, sc.min_separation_m, sc.uav_altitude_m, &mut rng)?;
            let speed = sc.uav_max_speed_mps.min(self.energy.uav_speed);
            for (i, p) in uavs.into_iter().enumerate() {
                nodes.push(NodeSpec {
                    id: nodes.len(),
                    kind: NodeKind::Uav,
                    compute_capacity: sc.uav_compute_capacity,
                    compute_rate: sc.uav_compute_rate,
                    storage_capacity: sc.uav_storage,
                    energy_capacity: self.energy.e_max_uav,
                    uav: Some(UavParams {
                        mass_kg: sc.uav_mass_kg,
                        rotor_radius_m: sc.uav_rotor_radius_m,
                        rotor_count: sc.uav_rotor_count,
                        max_speed_mps: sc.uav_max_speed_mps,
                        max_power_w: self.energy.p_max_uav,
                    }),
                });
                trajectories.push(match sc.uav_waypoints.get(i) {
                    Some(w) if !w.is_empty() => Trajectory::from_waypoints(w, speed, tau, slots)
                        .map_err(|e| Error::config("scenario.uav_waypoints", e.to_string()))?,
                    _ => Trajectory::stationary(p, slots),
                });
            }
        }
        for i in 0..sc.satellite_count {
            let orbit = CircularOrbit {
                altitude: sc.sat_altitude_m,
                inclination: sc.sat_inclination_rad,
                phase: sc.sat_phase0_rad + i as f64 * sc.sat_phase_spacing_rad,
            };
            nodes.push(NodeSpec {
                id: nodes.len(),
                kind: NodeKind::Satellite,
                compute_capacity: sc.sat_compute_capacity,
                compute_rate: sc.sat_compute_rate,
                storage_capacity: sc.sat_storage,
                energy_capacity: self.energy.e_max_sat,
                uav: None,
            });
            trajectories.push(orbit_trajectory(&orbit, slots, tau)?);
        }
        if let Some(path) = &sc.trace_file {
            for (id, tr) in read_position_trace(path, slots)? {
                let slot = trajectories.get_mut(id).ok_or_else(|| {
                    Error::config("scenario.trace_file", format!("trace names node {id}, which does not exist"))
                })?;
                *slot = tr;
            }
        }
        build_rteg(nodes, trajectories, slots, tau, &sc.ranges)
    }

    /// Requests from the request file, or generated from the workload stream.
    pub fn build_workload(&self, seed: u64) -> Result<Vec<SfcRequest>> {
        if let Some(path) = &self.workload.request_file {
            let reqs = read_requests(path)?;
            let n = self.scenario.node_count();
            for r in &reqs {
                if r.origin >= self.scenario.ground_count || r.destination >= self.scenario.ground_count || r.origin >= n {
                    return Err(Error::config(
                        "workload.request_file",
                        format!("request {} must start and end at ground nodes 0..{}", r.id, self.scenario.ground_count),
                    ));
                }
            }
            return Ok(reqs);
        }
        let mut rng = stream_rng(self.workload.seed.unwrap_or(seed), Stream::Workload);
        generate_workload(&self.workload, &self.scenario.ground_nodes(), &mut rng)
    }

    pub fn build_instance(&self, seed: u64) -> Result<Instance> {
        let rteg = self.build_rteg(seed)?;
        let sfcs = self.build_workload(seed)?;
        Instance::from_scenario(&rteg, &self.radio.constants(), &self.energy, sfcs, self.reward.clone())
    }
}

/// Applies `section.key=value` (or `section.table.key=value`) to a parsed document.
/// The value is read as a TOML value, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like section.key=value"))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.len() < 2 || path.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "override key must be section.key"));
    }
    if !SECTIONS.contains(&path[0]) {
        return Err(Error::config(key, format!("unknown section `{}`", path[0])));
    }
    let value = parse_value(raw.trim());
    let mut cur = table;
    for part in &path[..path.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a section")))?;
    }
    cur.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_key_is_rejected_with_its_name() {
        let err = RunConfig::from_toml_str("[scenario]\nuav_cout = 3\n", &[]).unwrap_err();
        assert!(err.to_string().contains("uav_cout"), "{err}");
        let err = RunConfig::from_toml_str("", &["bogus.x=1".into()]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_toml_str(
            "[run]\nepisodes = 3\n",
            &["run.episodes=7".into(), "agent.kind=sarsa".into(), "scenario.ranges.u2u=500".into()],
        )
        .unwrap();
        assert_eq!(cfg.run.episodes, 7);
        assert_eq!(cfg.agent.kind, crate::learn::AgentKind::Sarsa);
        assert_eq!(cfg.scenario.ranges.u2u, 500.0);
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let err = RunConfig::from_toml_str("", &["workload.count=0".into()]).unwrap_err();
        assert!(err.to_string().contains("workload.count"), "{err}");
        let err = RunConfig::from_toml_str("", &["agent.gamma=1.5".into()]).unwrap_err();
        assert!(err.to_string().contains("agent.gamma"), "{err}");
    }

    #[test]
    fn radio_db_keys_convert_once() {
        let c = RadioConfig::default().constants();
        let d = RadioConstants::<f64>::default();
        assert!((c.iota0 - d.iota0).abs() < 1e-6 * d.iota0);
        assert!((c.line_loss - d.line_loss).abs() < 1e-15);
        assert!((c.n0 - d.n0).abs() < 1e-12 * d.n0);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn default_instance_builds_deterministically() {
        let cfg = RunConfig::default();
        let a = cfg.build_instance(3).unwrap();
        let b = cfg.build_instance(3).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.node_count(), 15);
        assert_eq!(a.sfc_count(), 20);
        assert_ne!(a.digest(), cfg.build_instance(4).unwrap().digest());
    }
}
