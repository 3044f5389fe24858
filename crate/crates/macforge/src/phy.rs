//! Radio abstraction: node placement, log-distance path loss, SINR-based (or
//! hard-collision) frame reception, and frame airtime.
//!
//! The channel deliberately stays coarse: a fixed 20 us preamble on every
//! frame, control frames pinned to the lowest rate, no fading, no OFDM
//! symbol modeling. `HardCollision` mode exists so the ALOHA and DCF
//! fixed-point oracles apply exactly: any temporal overlap anywhere on the
//! (single, perfectly shared) channel corrupts the frame.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::desim::SimTime;
use crate::error::{Error, Result};

/// Data rates selectable by the synthesizer, in half-Mbps so airtime math is
/// exact integer arithmetic (all rates are multiples of 0.5 Mbps).
pub const MCS_RATES_HALF_MBPS: [u64; 9] = [13, 26, 39, 52, 78, 104, 117, 130, 156];

/// Fixed PHY preamble charged to every frame.
pub const PREAMBLE: SimTime = SimTime::from_us(20);

/// MAC header bytes added to every DATA payload.
pub const MAC_HEADER_BYTES: u32 = 28;
pub const RTS_BYTES: u32 = 20;
pub const CTS_BYTES: u32 = 14;
pub const ACK_BYTES: u32 = 14;

/// Index into [`MCS_RATES_HALF_MBPS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct McsIndex(pub u8);

impl McsIndex {
    pub const LOWEST: McsIndex = McsIndex(0);
    pub const HIGHEST: McsIndex = McsIndex(8);

    pub fn new(idx: u8) -> Result<Self> {
        if usize::from(idx) < MCS_RATES_HALF_MBPS.len() {
            Ok(McsIndex(idx))
        } else {
            Err(Error::Config(format!("MCS index {idx} out of range 0..=8")))
        }
    }

    /// Map a rate in Mbps onto its index; the mapping is exact (rates are
    /// half-Mbps multiples).
    pub fn from_mbps(mbps: f64) -> Result<Self> {
        let half = (mbps * 2.0).round() as u64;
        if (mbps * 2.0 - half as f64).abs() > 1e-9 {
            return Err(Error::Config(format!("unknown data rate {mbps} Mbps")));
        }
        MCS_RATES_HALF_MBPS
            .iter()
            .position(|&r| r == half)
            .map(|i| McsIndex(i as u8))
            .ok_or_else(|| Error::Config(format!("unknown data rate {mbps} Mbps")))
    }

    pub fn as_usize(self) -> usize {
        usize::from(self.0)
    }

    pub fn rate_mbps(self) -> f64 {
        MCS_RATES_HALF_MBPS[self.as_usize()] as f64 / 2.0
    }

    pub fn step_up(self) -> McsIndex {
        McsIndex(self.0.saturating_add(1).min(8))
    }

    pub fn step_down(self) -> McsIndex {
        McsIndex(self.0.saturating_sub(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FrameKind {
    Rts,
    Cts,
    Data,
    Ack,
}

impl FrameKind {
    /// Bits on air for this frame kind. DATA carries payload plus the MAC
    /// header; control frames have fixed sizes.
    pub fn bits(self, payload_bytes: u32) -> u64 {
        let bytes = match self {
            FrameKind::Rts => RTS_BYTES,
            FrameKind::Cts => CTS_BYTES,
            FrameKind::Ack => ACK_BYTES,
            FrameKind::Data => payload_bytes + MAC_HEADER_BYTES,
        };
        u64::from(bytes) * 8
    }
}

/// Airtime of a frame: fixed preamble plus ceil(bits / rate).
///
/// `rate` is in half-Mbps, i.e. bits-per-microsecond times two, so
/// `bits * 2000 / rate` is the payload time in integer nanoseconds.
pub fn frame_duration(kind: FrameKind, payload_bytes: u32, mcs: McsIndex) -> SimTime {
    let bits = kind.bits(payload_bytes);
    let half_mbps = MCS_RATES_HALF_MBPS[mcs.as_usize()];
    let payload_ns = (bits * 2000).div_ceil(half_mbps);
    PREAMBLE + SimTime::from_ns(payload_ns)
}

/// How reception outcomes are judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    Sinr,
    HardCollision,
}

/// Radio/propagation parameters, part of the scenario config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    /// Reference loss at 1 m (5 GHz free space).
    pub ref_loss_db: f64,
    /// Log-distance path loss exponent.
    pub exponent: f64,
    /// Noise floor over 20 MHz (thermal -101 dBm plus 7 dB noise figure).
    pub noise_dbm: f64,
    pub mode: ChannelMode,
    /// Required SINR per MCS, strictly increasing with the index.
    pub thresholds_db: Vec<f64>,
    pub tx_power_dbm: f64,
    /// CCA busy threshold for carrier sensing.
    pub cca_dbm: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            ref_loss_db: 46.4,
            exponent: 3.0,
            noise_dbm: -94.0,
            mode: ChannelMode::Sinr,
            thresholds_db: vec![2.0, 5.0, 9.0, 11.0, 15.0, 18.0, 20.0, 25.0, 27.0],
            tx_power_dbm: 23.0,
            cca_dbm: -82.0,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds_db.len() != MCS_RATES_HALF_MBPS.len() {
            return Err(Error::Config(format!(
                "thresholds_db must have {} entries, got {}",
                MCS_RATES_HALF_MBPS.len(),
                self.thresholds_db.len()
            )));
        }
        if !self.thresholds_db.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "thresholds_db must be strictly increasing with MCS index".into(),
            ));
        }
        if self.exponent < 2.0 {
            return Err(Error::Config(format!(
                "pathloss exponent must be >= 2, got {}",
                self.exponent
            )));
        }
        Ok(())
    }

    /// Log-distance path loss. Distances below 1 m clamp to the reference.
    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(1.0);
        self.ref_loss_db + 10.0 * self.exponent * d.log10()
    }

    pub fn rx_power_dbm(&self, distance_m: f64) -> f64 {
        self.tx_power_dbm - self.path_loss_db(distance_m)
    }

    /// Whether a node at `distance_m` from a transmitter senses the medium
    /// busy. In hard-collision mode the channel is a single shared medium:
    /// every transmission is audible everywhere.
    pub fn senses(&self, distance_m: f64) -> bool {
        match self.mode {
            ChannelMode::HardCollision => true,
            ChannelMode::Sinr => self.rx_power_dbm(distance_m) >= self.cca_dbm,
        }
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }

    /// SINR test against the per-MCS capture threshold.
    pub fn sinr_ok(&self, signal_dbm: f64, interference_mw: f64, mcs: McsIndex) -> bool {
        let sinr_db = 10.0
            * (dbm_to_mw(signal_dbm) / (self.noise_mw() + interference_mw)).log10();
        sinr_db >= self.thresholds_db[mcs.as_usize()]
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// A frame on the air, as seen by the reception judge.
#[derive(Debug, Clone)]
pub struct FrameAir {
    pub tx_node: usize,
    pub rx_node: usize,
    pub mcs: McsIndex,
    pub start: SimTime,
    pub duration: SimTime,
    pub kind: FrameKind,
}

impl FrameAir {
    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }

    fn overlaps(&self, other: &FrameAir) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

/// Judge one frame against the set of temporally overlapping transmissions.
///
/// `rx_power` maps a transmitter index to received power in dBm at
/// `frame.rx_node`. In SINR mode the frame survives iff its SINR stays at or
/// above the capture threshold over every overlap sub-interval (interference
/// is piecewise constant, so the worst sub-interval decides). In
/// hard-collision mode any overlap is fatal.
pub fn frame_outcome(
    frame: &FrameAir,
    interferers: &[FrameAir],
    model: &ChannelModel,
    rx_power: impl Fn(usize) -> f64,
) -> bool {
    let overlapping: Vec<&FrameAir> = interferers
        .iter()
        .filter(|f| f.overlaps(frame))
        .collect();
    match model.mode {
        ChannelMode::HardCollision => overlapping.is_empty(),
        ChannelMode::Sinr => {
            // Sweep power deltas at clipped interval edges to find the
            // worst-case concurrent interference sum.
            let mut deltas: Vec<(SimTime, f64)> = Vec::with_capacity(overlapping.len() * 2);
            for f in &overlapping {
                let power = dbm_to_mw(rx_power(f.tx_node));
                deltas.push((f.start.max(frame.start), power));
                deltas.push((f.end().min(frame.end()), -power));
            }
            deltas.sort_by_key(|&(t, _)| t);
            let mut current = 0.0f64;
            let mut worst = 0.0f64;
            for (_, d) in deltas {
                current += d;
                worst = worst.max(current);
            }
            model.sinr_ok(rx_power(frame.tx_node), worst, frame.mcs)
        }
    }
}

/// Node placement: one access point and one station per network, the station
/// uniform within a disk around its AP. Node ids interleave as
/// `ap = 2 * net`, `sta = 2 * net + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub positions: Vec<(f64, f64)>,
    pub area_m: f64,
}

impl Topology {
    pub fn sample(nn: u32, area_m: f64, sta_radius_m: f64, placement_seed: u64) -> Topology {
        let mut rng = ChaCha8Rng::seed_from_u64(placement_seed);
        let mut positions = Vec::with_capacity(2 * nn as usize);
        for _ in 0..nn {
            let ap = (
                rng.random::<f64>() * area_m,
                rng.random::<f64>() * area_m,
            );
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let radius = sta_radius_m * rng.random::<f64>().sqrt();
            let sta = (
                (ap.0 + radius * angle.cos()).clamp(0.0, area_m),
                (ap.1 + radius * angle.sin()).clamp(0.0, area_m),
            );
            positions.push(ap);
            positions.push(sta);
        }
        Topology { positions, area_m }
    }

    pub fn ap(net: usize) -> usize {
        2 * net
    }

    pub fn sta(net: usize) -> usize {
        2 * net + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (xa, ya) = self.positions[a];
        let (xb, yb) = self.positions[b];
        ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt()
    }
}
