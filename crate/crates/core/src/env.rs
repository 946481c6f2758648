//! Reproducible environment traces.
//!
//! A [`Trace`] fixes, for every slot, the BS-wide per-packet HPC price and,
//! for every concentrator, the free-spectrum level and the packet arrivals.
//! Every policy and the offline oracle consume the same trace, so paired
//! comparisons see identical randomness.
//!
//! Draw order (fixed, part of the reproducibility contract): for each slot,
//! one price draw, then for each concentrator one level draw followed by one
//! arrival draw (Poisson law only). The generator is ChaCha8 seeded with the
//! 64-bit trace seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ArrivalLaw, ScenarioConfig};
use crate::currency::MicroCents;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum SpectrumLevel {
    None = 0,
    Reduced = 1,
    Full = 2,
}

impl SpectrumLevel {
    pub const ALL: [SpectrumLevel; 3] = [
        SpectrumLevel::None,
        SpectrumLevel::Reduced,
        SpectrumLevel::Full,
    ];

    pub fn from_index(i: u8) -> Option<SpectrumLevel> {
        SpectrumLevel::ALL.get(i as usize).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PriceSample {
    pub full_unit_price: MicroCents,
    pub reduced_unit_price: MicroCents,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArrivalBatch {
    pub packet_count: u32,
    pub slot_index: usize,
}

/// Packets in a reduced-size unit: `ceil(ρ·size)`.
pub fn reduced_unit_packets(unit_size_packets: u32, reduced_fraction: f64) -> u32 {
    // The small offset absorbs representation error such as 0.3 * 10 = 3.0000000000000004.
    (reduced_fraction * unit_size_packets as f64 - 1e-9)
        .ceil()
        .max(0.0) as u32
}

/// Unit prices derived from a per-packet price; both scale linearly with packet count.
pub fn unit_prices(
    base_packet_price: MicroCents,
    unit_size_packets: u32,
    reduced_fraction: f64,
) -> Result<PriceSample> {
    if !(reduced_fraction > 0.0 && reduced_fraction < 1.0) {
        return Err(Error::config(
            "reduced fraction must lie strictly between 0 and 1",
        ));
    }
    if unit_size_packets == 0 {
        return Err(Error::config("unit size must be at least one packet"));
    }
    if base_packet_price == MicroCents::ZERO {
        return Err(Error::config("packet price must be positive"));
    }
    let reduced = reduced_unit_packets(unit_size_packets, reduced_fraction);
    let sample = PriceSample {
        full_unit_price: base_packet_price * unit_size_packets as u64,
        reduced_unit_price: base_packet_price * reduced as u64,
    };
    if sample.full_unit_price <= sample.reduced_unit_price {
        return Err(Error::config(format!(
            "unit of {unit_size_packets} packets with reduced fraction {reduced_fraction} \
             leaves no price gap between full and reduced units"
        )));
    }
    Ok(sample)
}

/// The subset of a scenario that determines a trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
struct TraceShape {
    k_concentrators: usize,
    horizon: usize,
    mean_arrival: f64,
    arrival_law: ArrivalLaw,
    arrival_bound: u32,
    price_min: MicroCents,
    price_max: MicroCents,
}

impl TraceShape {
    fn of(config: &ScenarioConfig) -> Self {
        TraceShape {
            k_concentrators: config.k_concentrators,
            horizon: config.horizon,
            mean_arrival: config.mean_arrival,
            arrival_law: config.arrival_law,
            arrival_bound: config.arrival_bound,
            price_min: config.price_min(),
            price_max: config.price_max(),
        }
    }

    fn hash(&self) -> u64 {
        let json = serde_json::to_vec(self).expect("trace shape serialises");
        let digest = Sha256::digest(&json);
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// Hash of the trace-relevant part of `config`, stored in trace headers.
pub fn config_hash(config: &ScenarioConfig) -> u64 {
    TraceShape::of(config).hash()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    horizon: usize,
    k: usize,
    seed: u64,
    config_hash: u64,
    packet_prices: Vec<MicroCents>,
    // slot-major: index = slot * k + concentrator
    levels: Vec<SpectrumLevel>,
    arrivals: Vec<u32>,
}

pub fn generate_trace(config: &ScenarioConfig, seed: u64) -> Result<Trace> {
    if config.horizon == 0 {
        return Err(Error::config("horizon must be at least 1 slot"));
    }
    if config.k_concentrators == 0 {
        return Err(Error::config("at least one concentrator is required"));
    }
    let (lo, hi) = (config.price_min(), config.price_max());
    if lo == MicroCents::ZERO || lo > hi {
        return Err(Error::config(
            "price interval must be nonempty and positive",
        ));
    }
    if config.mean_arrival.is_nan()
        || config.mean_arrival < 0.0
        || config.mean_arrival > config.arrival_bound as f64
    {
        return Err(Error::config(
            "mean arrival must lie within [0, arrival_bound]",
        ));
    }

    let shape = TraceShape::of(config);
    let (h, k) = (config.horizon, config.k_concentrators);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = match config.arrival_law {
        ArrivalLaw::Poisson if config.mean_arrival > 0.0 => {
            Some(Poisson::new(config.mean_arrival).map_err(|e| Error::config(e.to_string()))?)
        }
        _ => None,
    };

    let mut packet_prices = Vec::with_capacity(h);
    let mut levels = Vec::with_capacity(h * k);
    let mut arrivals = Vec::with_capacity(h * k);
    for slot in 0..h {
        packet_prices.push(MicroCents(rng.random_range(lo.0..=hi.0)));
        let deterministic = deterministic_arrivals(config.mean_arrival, slot);
        for _ in 0..k {
            levels.push(SpectrumLevel::ALL[rng.random_range(0..3usize)]);
            let a = match (&poisson, config.arrival_law) {
                (Some(p), _) => p.sample(&mut rng) as u32,
                (None, ArrivalLaw::Poisson) => 0,
                (None, ArrivalLaw::Deterministic) => deterministic,
            };
            arrivals.push(a.min(config.arrival_bound));
        }
    }

    Ok(Trace {
        horizon: h,
        k,
        seed,
        config_hash: shape.hash(),
        packet_prices,
        levels,
        arrivals,
    })
}

fn deterministic_arrivals(mean: f64, slot: usize) -> u32 {
    let upto = |t: usize| (t as f64 * mean + 1e-9).floor() as u64;
    (upto(slot + 1) - upto(slot)) as u32
}

impl Trace {
    /// Assembles a trace from explicit sequences; used for hand-built scenarios.
    pub fn from_parts(
        seed: u64,
        config_hash: u64,
        packet_prices: Vec<MicroCents>,
        levels: Vec<Vec<SpectrumLevel>>,
        arrivals: Vec<Vec<u32>>,
    ) -> Result<Trace> {
        let horizon = packet_prices.len();
        let k = levels.len();
        if horizon == 0 || k == 0 || arrivals.len() != k {
            return Err(Error::config(
                "trace needs at least one slot and matching concentrator sequences",
            ));
        }
        if levels.iter().any(|l| l.len() != horizon) || arrivals.iter().any(|a| a.len() != horizon)
        {
            return Err(Error::config(
                "every per-concentrator sequence must span the horizon",
            ));
        }
        let mut flat_levels = Vec::with_capacity(horizon * k);
        let mut flat_arrivals = Vec::with_capacity(horizon * k);
        for t in 0..horizon {
            for c in 0..k {
                flat_levels.push(levels[c][t]);
                flat_arrivals.push(arrivals[c][t]);
            }
        }
        Ok(Trace {
            horizon,
            k,
            seed,
            config_hash,
            packet_prices,
            levels: flat_levels,
            arrivals: flat_arrivals,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn k_concentrators(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config_hash(&self) -> u64 {
        self.config_hash
    }

    pub fn packet_price(&self, slot: usize) -> MicroCents {
        self.packet_prices[slot]
    }

    pub fn packet_prices(&self) -> &[MicroCents] {
        &self.packet_prices
    }

    pub fn level(&self, slot: usize, concentrator: usize) -> SpectrumLevel {
        self.levels[slot * self.k + concentrator]
    }

    pub fn arrival(&self, slot: usize, concentrator: usize) -> ArrivalBatch {
        ArrivalBatch {
            packet_count: self.arrivals[slot * self.k + concentrator],
            slot_index: slot,
        }
    }

    pub fn levels_of(&self, concentrator: usize) -> Vec<SpectrumLevel> {
        (0..self.horizon)
            .map(|t| self.level(t, concentrator))
            .collect()
    }

    pub fn prices(
        &self,
        slot: usize,
        unit_size: u32,
        reduced_fraction: f64,
    ) -> Result<PriceSample> {
        unit_prices(self.packet_prices[slot], unit_size, reduced_fraction)
    }

    pub fn total_arrivals(&self, concentrator: usize) -> u64 {
        (0..self.horizon)
            .map(|t| self.arrival(t, concentrator).packet_count as u64)
            .sum()
    }
}

const MAGIC: &[u8; 4] = b"HPCT";
const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 32;
const DIGEST_LEN: usize = 32;

/// Serialises a trace. Layout (all integers little-endian):
///
/// | offset | size     | field                                   |
/// |--------|----------|-----------------------------------------|
/// | 0      | 4        | magic `HPCT`                            |
/// | 4      | 2        | format version (1)                      |
/// | 6      | 2        | reserved, zero                          |
/// | 8      | 8        | seed                                    |
/// | 16     | 8        | config hash                             |
/// | 24     | 4        | horizon `H`                             |
/// | 28     | 4        | concentrators `K`                       |
/// | 32     | 8·H      | per-packet price per slot, micro-cents  |
/// |        | H·K      | spectrum level (0/1/2), slot-major      |
/// |        | 4·H·K    | arrivals in packets, slot-major         |
/// |        | 32       | SHA-256 of all preceding bytes          |
pub fn save_trace(trace: &Trace) -> Vec<u8> {
    let (h, k) = (trace.horizon, trace.k);
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * h + 5 * h * k + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&trace.seed.to_le_bytes());
    out.extend_from_slice(&trace.config_hash.to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    for p in &trace.packet_prices {
        out.extend_from_slice(&p.0.to_le_bytes());
    }
    out.extend(trace.levels.iter().map(|l| *l as u8));
    for a in &trace.arrivals {
        out.extend_from_slice(&a.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn load_trace(bytes: &[u8]) -> Result<Trace> {
    let bad = |msg: &str| Error::Format(msg.to_string());
    if bytes.len() < HEADER_LEN + DIGEST_LEN {
        return Err(bad("payload shorter than header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("missing HPCT magic"));
    }
    let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u16_at(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let (h, k) = (u32_at(24) as usize, u32_at(28) as usize);
    if h == 0 || k == 0 {
        return Err(bad("empty horizon or concentrator count"));
    }
    let body = h
        .checked_mul(k)
        .and_then(|hk| hk.checked_mul(5))
        .and_then(|b| b.checked_add(8 * h))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() != HEADER_LEN + body + DIGEST_LEN {
        return Err(bad("payload length does not match header dimensions"));
    }
    let (content, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(content).as_slice() != digest {
        return Err(bad("checksum mismatch"));
    }

    let mut off = HEADER_LEN;
    let packet_prices = (0..h).map(|i| MicroCents(u64_at(off + 8 * i))).collect();
    off += 8 * h;
    let levels = bytes[off..off + h * k]
        .iter()
        .map(|b| SpectrumLevel::from_index(*b).ok_or_else(|| bad("invalid spectrum level")))
        .collect::<Result<Vec<_>>>()?;
    off += h * k;
    let arrivals = (0..h * k).map(|i| u32_at(off + 4 * i)).collect();

    Ok(Trace {
        horizon: h,
        k,
        seed: u64_at(8),
        config_hash: u64_at(16),
        packet_prices,
        levels,
        arrivals,
    })
}
