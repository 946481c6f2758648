//! Scenario configuration shared by the trace generator, the engine and the CLI.

use serde::{Deserialize, Serialize};

use crate::currency::MicroCents;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalLaw {
    /// `floor((t+1)λ) - floor(tλ)` packets in slot `t`; exactly `λ` per slot for integral `λ`.
    Deterministic,
    /// Poisson(λ), truncated at `arrival_bound`.
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyChoice {
    Lyapunov,
    Quality,
    #[serde(rename = "static-1")]
    Static1,
    #[serde(rename = "static-2")]
    Static2,
}

impl PolicyChoice {
    pub fn label(self) -> &'static str {
        match self {
            PolicyChoice::Lyapunov => "lyapunov",
            PolicyChoice::Quality => "quality",
            PolicyChoice::Static1 => "static-1",
            PolicyChoice::Static2 => "static-2",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    /// Cost weight `V`, in packets per cent of full-unit price.
    pub v_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualitySection {
    pub beta_c: f64,
    /// Share of the `N` data units that may be sent at reduced size.
    pub budget_fraction: f64,
    /// Maximum per-unit delay `T - N`, in slots.
    pub delay_slack: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSection {
    pub period: usize,
    pub burst_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub k_concentrators: usize,
    pub horizon: usize,
    /// Mean packet arrivals per concentrator per slot (`λ`).
    pub mean_arrival: f64,
    pub arrival_law: ArrivalLaw,
    /// Upper bound on packets arriving in one slot.
    pub arrival_bound: u32,
    /// Packets per data unit.
    pub unit_size: u32,
    /// Maximum packets served per slot (`μ`) on full free spectrum or a leased HPC.
    pub service_capacity: u32,
    pub price_min_cents: f64,
    pub price_max_cents: f64,
    /// Fraction `ρ` of a unit kept when its size is reduced.
    pub reduced_fraction: f64,
    /// Virtual-queue increment; `None` means `mean_arrival` (or 1 when that is zero).
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub policy: PolicyChoice,
    pub lyapunov: LyapunovSection,
    pub quality: QualitySection,
    pub static_1: StaticSection,
    pub static_2: StaticSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            k_concentrators: 60,
            horizon: 10_000,
            mean_arrival: 5.0,
            arrival_law: ArrivalLaw::Deterministic,
            arrival_bound: 20,
            unit_size: 5,
            service_capacity: 5,
            price_min_cents: 0.1,
            price_max_cents: 1.0,
            reduced_fraction: 0.5,
            epsilon: None,
            seed: 1,
            policy: PolicyChoice::Lyapunov,
            lyapunov: LyapunovSection { v_factor: 20.0 },
            quality: QualitySection {
                beta_c: 1.0,
                budget_fraction: 0.0,
                delay_slack: 10,
            },
            static_1: StaticSection {
                period: 1000,
                burst_len: 200,
            },
            static_2: StaticSection {
                period: 1000,
                burst_len: 150,
            },
        }
    }
}

/// Bundled scenario presets, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("paper", include_str!("../presets/paper.json")),
    ("fig3", include_str!("../presets/fig3.json")),
    ("fig4", include_str!("../presets/fig4.json")),
];

impl ScenarioConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let text = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| Error::Usage(format!("unknown preset `{name}`")))?;
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn epsilon(&self) -> f64 {
        match self.epsilon {
            Some(e) => e,
            None if self.mean_arrival > 0.0 => self.mean_arrival,
            None => 1.0,
        }
    }

    pub fn price_min(&self) -> MicroCents {
        MicroCents::from_cents(self.price_min_cents)
    }

    pub fn price_max(&self) -> MicroCents {
        MicroCents::from_cents(self.price_max_cents)
    }

    /// Packets served for free when the spectrum level is `Reduced`.
    pub fn reduced_capacity(&self) -> u32 {
        (self.reduced_fraction * self.service_capacity as f64).floor() as u32
    }

    pub fn static_section(&self, choice: PolicyChoice) -> Option<StaticSection> {
        match choice {
            PolicyChoice::Static1 => Some(self.static_1),
            PolicyChoice::Static2 => Some(self.static_2),
            _ => None,
        }
    }

    pub fn with_policy(&self, policy: PolicyChoice) -> Self {
        ScenarioConfig {
            policy,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::config(msg));
        if self.k_concentrators == 0 {
            return fail("k_concentrators must be at least 1");
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1 slot");
        }
        if !(self.mean_arrival.is_finite() && self.mean_arrival >= 0.0) {
            return fail("mean_arrival must be a nonnegative number");
        }
        if self.mean_arrival > self.arrival_bound as f64 {
            return fail("mean_arrival exceeds arrival_bound");
        }
        if self.unit_size == 0 || self.service_capacity == 0 {
            return fail("unit_size and service_capacity must be at least 1");
        }
        if !(self.price_min_cents > 0.0 && self.price_min_cents <= self.price_max_cents) {
            return fail("price interval must be nonempty and positive");
        }
        if !(self.reduced_fraction > 0.0 && self.reduced_fraction < 1.0) {
            return fail("reduced_fraction must lie strictly between 0 and 1");
        }
        if self.epsilon().is_nan() || self.epsilon() <= 0.0 {
            return fail("epsilon must be positive");
        }
        if self.lyapunov.v_factor.is_nan() || self.lyapunov.v_factor < 0.0 {
            return fail("lyapunov.v_factor must be nonnegative");
        }
        let q = &self.quality;
        if !(0.0..=1.0).contains(&q.beta_c) {
            return fail("quality.beta_c must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&q.budget_fraction) {
            return fail("quality.budget_fraction must lie in [0, 1)");
        }
        if q.delay_slack >= self.horizon {
            return fail("quality.delay_slack must be smaller than the horizon");
        }
        for s in [self.static_1, self.static_2] {
            if s.burst_len == 0 || s.burst_len > s.period {
                return fail("static schedules need 0 < burst_len <= period");
            }
        }
        // Degenerate unit sizes make the reduced price equal the full price.
        crate::env::unit_prices(self.price_min(), self.unit_size, self.reduced_fraction)?;
        Ok(())
    }
}
