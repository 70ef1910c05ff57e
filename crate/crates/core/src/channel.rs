//! Link budgets and achievable per-slot link capacities.
//!
//! Every quantity is kept in the linear domain; decibel values from
//! configuration are converted once with [`db_to_linear`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::topology::{LinkKind, Rteg};
use crate::{Error, Result, Scalar};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub fn db_to_linear<S: Scalar>(db: S) -> S {
    S::of(10.0).powf(db / S::of(10.0))
}

pub fn linear_to_db<S: Scalar>(x: S) -> S {
    S::of(10.0) * x.log10()
}

/// Milliwatt-referenced decibels to watts.
pub fn dbm_to_watt<S: Scalar>(dbm: S) -> S {
    db_to_linear(dbm - S::of(30.0))
}

/// How the trailing `S` of the link-budget denominator is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    /// Dimensionless system margin.
    #[default]
    Margin,
    /// Slant range in meters, taken literally.
    SlantRange,
}

/// Rain attenuation per km, constant or per slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RainModel<S> {
    Constant(S),
    PerSlot(Vec<S>),
}

impl<S: Scalar> RainModel<S> {
    /// dB/km in `slot` (1-based); a trace shorter than the horizon holds its last value.
    pub fn gamma_db_per_km(&self, slot: usize) -> S {
        match self {
            RainModel::Constant(g) => *g,
            RainModel::PerSlot(v) => {
                let i = slot.saturating_sub(1).min(v.len().saturating_sub(1));
                v.get(i).copied().unwrap_or_else(S::zero)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioConstants<S> {
    /// Ground transmit power (G2U), W.
    pub p_tr_ground: S,
    /// UAV transmit power toward the ground (U2G), W.
    pub p_tr_uav: S,
    pub p_uu: S,
    pub p_us: S,
    pub p_ss: S,
    pub p_sg: S,
    /// Reference SNR at 1 m.
    pub iota0: S,
    pub sigma_uu2: S,
    pub gain_us: S,
    pub gain_ss: S,
    pub gain_sg: S,
    /// Line loss as a linear factor in (0, 1].
    pub line_loss: S,
    pub ebn0_req: S,
    pub boltzmann: S,
    pub noise_temp_k: S,
    pub margin: S,
    pub margin_mode: MarginMode,
    pub b_gu: S,
    pub b_uu: S,
    pub b_ug: S,
    pub b_us: S,
    pub b_ss: S,
    pub b_sg: S,
    pub f_uu: S,
    pub f_us: S,
    pub f_ss: S,
    pub f_sg: S,
    /// Noise spectral density at the ground receiver, W/Hz.
    pub n0: S,
    pub rain: RainModel<S>,
    /// Slant-path length through rain, km.
    pub slant_path_km: S,
}

impl<S: Scalar> RadioConstants<S> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p_tr_ground", self.p_tr_ground),
            ("p_tr_uav", self.p_tr_uav),
            ("p_uu", self.p_uu),
            ("p_us", self.p_us),
            ("p_ss", self.p_ss),
            ("p_sg", self.p_sg),
            ("iota0", self.iota0),
            ("sigma_uu2", self.sigma_uu2),
            ("gain_us", self.gain_us),
            ("gain_ss", self.gain_ss),
            ("gain_sg", self.gain_sg),
            ("ebn0_req", self.ebn0_req),
            ("boltzmann", self.boltzmann),
            ("noise_temp_k", self.noise_temp_k),
            ("margin", self.margin),
            ("b_gu", self.b_gu),
            ("b_uu", self.b_uu),
            ("b_ug", self.b_ug),
            ("b_us", self.b_us),
            ("b_ss", self.b_ss),
            ("b_sg", self.b_sg),
            ("f_uu", self.f_uu),
            ("f_us", self.f_us),
            ("f_ss", self.f_ss),
            ("f_sg", self.f_sg),
            ("n0", self.n0),
        ];
        for (key, v) in positive {
            if !(v > S::zero()) || !v.is_finite() {
                return Err(Error::config(format!("radio.{key}"), "must be positive and finite"));
            }
        }
        if !(self.line_loss > S::zero() && self.line_loss <= S::one()) {
            return Err(Error::config("radio.line_loss_db", "linear line loss must lie in (0, 1]"));
        }
        if self.slant_path_km < S::zero() {
            return Err(Error::config("radio.slant_path_km", "must be nonnegative"));
        }
        Ok(())
    }
}

impl Default for RadioConstants<f64> {
    fn default() -> Self {
        RadioConstants {
            p_tr_ground: 0.5,
            p_tr_uav: 10.0,
            p_uu: 10.0,
            p_us: 10.0,
            p_ss: 20.0,
            p_sg: 20.0,
            iota0: db_to_linear(80.0),
            sigma_uu2: 4e-13,
            gain_us: db_to_linear(42.0),
            gain_ss: db_to_linear(52.0),
            gain_sg: db_to_linear(42.0),
            line_loss: db_to_linear(-2.0),
            ebn0_req: db_to_linear(10.0),
            boltzmann: BOLTZMANN,
            noise_temp_k: 1000.0,
            margin: db_to_linear(3.0),
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
            // -114 dBm of in-band noise spread over the 80 MHz S2G band
            n0: dbm_to_watt(-114.0) / 80e6,
            rain: RainModel::Constant(0.0),
            slant_path_km: 5.0,
        }
    }
}

fn check_positive<S: Scalar>(what: &str, v: S) -> Result<()> {
    if v > S::zero() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive, got {v}")))
    }
}

/// Line-of-sight SNR between a ground node and a UAV.
pub fn g2u_snr<S: Scalar>(p_tr: S, iota0: S, d: S) -> Result<S> {
    check_positive("distance", d)?;
    Ok(p_tr * iota0 / (d * d))
}

/// U2U path loss in dB with `f` in Hz and `d` in meters.
pub fn u2u_path_loss_db<S: Scalar>(f: S, d: S) -> Result<S> {
    check_positive("distance", d)?;
    check_positive("frequency", f)?;
    let twenty = S::of(20.0);
    Ok(twenty * d.log10() + twenty * f.log10() - S::of(147.55))
}

pub fn u2u_snr<S: Scalar>(p: S, f: S, d: S, sigma2: S) -> Result<S> {
    let pl = u2u_path_loss_db(f, d)?;
    Ok(p * db_to_linear(-pl) / sigma2)
}

/// Free-space factor `(c / (4 pi S f))^2`.
pub fn free_space_factor<S: Scalar>(slant_range: S, f: S) -> Result<S> {
    check_positive("slant range", slant_range)?;
    check_positive("frequency", f)?;
    let x = S::of(SPEED_OF_LIGHT) / (S::of(4.0 * std::f64::consts::PI) * slant_range * f);
    Ok(x * x)
}

/// Link-budget data rate for U2S and S2S links, bit/s.
///
/// `margin` is the trailing denominator factor: a dimensionless margin, or the
/// slant range in meters under [`MarginMode::SlantRange`].
#[allow(clippy::too_many_arguments)]
pub fn sat_link_rate<S: Scalar>(
    p: S,
    gain_product: S,
    slant_range: S,
    f_center: S,
    line_loss: S,
    ebn0_req: S,
    boltzmann: S,
    noise_temp: S,
    margin: S,
) -> Result<S> {
    let l_ij = free_space_factor(slant_range, f_center)?;
    Ok(p * gain_product * l_ij * line_loss / (ebn0_req * boltzmann * noise_temp * margin))
}

/// S2G SNR with rain attenuation `gamma_r` dB/km over `slant_path_km`.
pub fn s2g_snr<S: Scalar>(
    p: S,
    gain_product: S,
    l_ij: S,
    gamma_r: S,
    slant_path_km: S,
    n0: S,
    bandwidth: S,
) -> Result<S> {
    check_positive("bandwidth", bandwidth)?;
    check_positive("noise density", n0)?;
    if gamma_r < S::zero() {
        return Err(Error::invalid("rain attenuation must be nonnegative"));
    }
    let rain = db_to_linear(-(slant_path_km * gamma_r));
    Ok(p * gain_product * l_ij * rain / (n0 * bandwidth))
}

/// Shannon rate `B log2(1 + snr)`, bit/s.
pub fn shannon_rate<S: Scalar>(bandwidth: S, snr: S) -> S {
    bandwidth * snr.ln_1p() / S::of(std::f64::consts::LN_2)
}

/// Achievable rate of a typed link at the given distance and slot, bit/s.
pub fn link_rate<S: Scalar>(kind: LinkKind, distance: S, slot: usize, radio: &RadioConstants<S>) -> Result<S> {
    let r = match kind {
        LinkKind::G2U => shannon_rate(radio.b_gu, g2u_snr(radio.p_tr_ground, radio.iota0, distance)?),
        LinkKind::U2G => shannon_rate(radio.b_ug, g2u_snr(radio.p_tr_uav, radio.iota0, distance)?),
        LinkKind::U2U => shannon_rate(radio.b_uu, u2u_snr(radio.p_uu, radio.f_uu, distance, radio.sigma_uu2)?),
        LinkKind::U2S | LinkKind::S2S => {
            let (p, g, f) = if kind == LinkKind::U2S {
                (radio.p_us, radio.gain_us, radio.f_us)
            } else {
                (radio.p_ss, radio.gain_ss, radio.f_ss)
            };
            let margin = match radio.margin_mode {
                MarginMode::Margin => radio.margin,
                MarginMode::SlantRange => distance,
            };
            sat_link_rate(
                p,
                g,
                distance,
                f,
                radio.line_loss,
                radio.ebn0_req,
                radio.boltzmann,
                radio.noise_temp_k,
                margin,
            )?
        }
        LinkKind::S2G => {
            let l_ij = free_space_factor(distance, radio.f_sg)?;
            let snr = s2g_snr(
                radio.p_sg,
                radio.gain_sg,
                l_ij,
                radio.rain.gamma_db_per_km(slot),
                radio.slant_path_km,
                radio.n0,
                radio.b_sg,
            )?;
            shannon_rate(radio.b_sg, snr)
        }
    };
    Ok(r)
}

/// Bits a link can carry in one slot of length `tau`.
pub fn slot_capacity<S: Scalar>(
    kind: LinkKind,
    distance: S,
    slot: usize,
    radio: &RadioConstants<S>,
    tau: S,
) -> Result<S> {
    Ok(link_rate(kind, distance, slot, radio)? * tau)
}

/// One row of a [`LinkRateTable`] in serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LinkRateRow {
    from: usize,
    to: usize,
    slot: usize,
    kind: LinkKind,
    bits: f64,
}

/// Per-slot capacity of every communication link in an Rteg.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<LinkRateRow>", from = "Vec<LinkRateRow>")]
pub struct LinkRateTable {
    /// (from, to, slot) -> (kind, bits per slot)
    entries: BTreeMap<(usize, usize, usize), (LinkKind, f64)>,
}

impl From<LinkRateTable> for Vec<LinkRateRow> {
    fn from(t: LinkRateTable) -> Self {
        t.entries
            .into_iter()
            .map(|((from, to, slot), (kind, bits))| LinkRateRow { from, to, slot, kind, bits })
            .collect()
    }
}

impl From<Vec<LinkRateRow>> for LinkRateTable {
    fn from(rows: Vec<LinkRateRow>) -> Self {
        LinkRateTable {
            entries: rows.into_iter().map(|r| ((r.from, r.to, r.slot), (r.kind, r.bits))).collect(),
        }
    }
}

impl LinkRateTable {
    pub fn build(rteg: &Rteg, radio: &RadioConstants<f64>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for t in 1..=rteg.slot_count {
            for l in rteg.links_at(t)? {
                let bits = slot_capacity(l.kind, l.distance, t, radio, rteg.slot_length)?;
                if !bits.is_finite() || bits < 0.0 {
                    return Err(Error::invalid(format!("non-finite capacity on link {l:?}")));
                }
                entries.insert((l.from, l.to, t), (l.kind, bits));
            }
        }
        Ok(LinkRateTable { entries })
    }

    pub fn insert(&mut self, from: usize, to: usize, slot: usize, kind: LinkKind, bits: f64) {
        self.entries.insert((from, to, slot), (kind, bits));
    }

    pub fn get(&self, from: usize, to: usize, slot: usize) -> Option<(LinkKind, f64)> {
        self.entries.get(&(from, to, slot)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), (LinkKind, f64))> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}
