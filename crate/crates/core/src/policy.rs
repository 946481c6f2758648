//! Online HPC leasing rules.
//!
//! Three families sit behind [`Policy`]:
//!
//! - **Lyapunov threshold**: buy when `Y = Q + Z` exceeds `V·c(t)/2`, with
//!   `c(t)` the full-unit price in cents. Free full spectrum always wins.
//! - **Quality heuristic**: for the deadline-constrained data-unit task, buy
//!   when the current price is at or below a β-scaled running average of all
//!   past prices (the parametrized average price, PAP), spend the reduced-size
//!   budget on free reduced spectrum first, and force a transmission once the
//!   slack to the deadline is gone.
//! - **Static schedules**: buy for `burst_len` consecutive slots right after
//!   every `period` boundary, regardless of prices.

use serde::Serialize;

use crate::config::{PolicyChoice, ScenarioConfig, StaticSection};
use crate::currency::MicroCents;
use crate::env::{PriceSample, SpectrumLevel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Idle,
    /// Use free spectrum. `reduced` marks a reduced-size data unit.
    FreeTransmit {
        reduced: bool,
    },
    BuyFull,
    BuyReduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HpcDecision {
    action: Action,
    d_flag: bool,
}

impl HpcDecision {
    pub fn new(action: Action) -> Self {
        HpcDecision {
            action,
            d_flag: matches!(action, Action::BuyFull | Action::BuyReduced),
        }
    }

    pub const IDLE: HpcDecision = HpcDecision {
        action: Action::Idle,
        d_flag: false,
    };

    pub fn action(&self) -> Action {
        self.action
    }

    /// Whether an HPC is leased this slot.
    pub fn d_flag(&self) -> bool {
        self.d_flag
    }

    pub fn transmits(&self) -> bool {
        self.action != Action::Idle
    }

    pub fn is_reduced(&self) -> bool {
        matches!(
            self.action,
            Action::BuyReduced | Action::FreeTransmit { reduced: true }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovParams {
    pub v_factor: f64,
    pub epsilon: f64,
}

impl LyapunovParams {
    pub fn new(v_factor: f64, epsilon: f64) -> Result<Self> {
        if !(v_factor >= 0.0 && v_factor.is_finite()) {
            return Err(Error::config("V must be a finite nonnegative number"));
        }
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::config("epsilon must be positive"));
        }
        Ok(LyapunovParams { v_factor, epsilon })
    }
}

/// `Y* = V·c/2`, with `c` in cents.
pub fn lyapunov_threshold(v_factor: f64, price: MicroCents) -> f64 {
    v_factor * price.as_cents() / 2.0
}

/// Threshold rule. `free_covers` says whether free spectrum at `free_level`
/// can carry the whole backlog this slot; a full free channel always counts
/// as covering. Ties (`y == threshold`) do not buy.
pub fn lyapunov_decide(
    y: f64,
    threshold: f64,
    free_level: SpectrumLevel,
    free_covers: bool,
) -> HpcDecision {
    if y <= 0.0 {
        return HpcDecision::IDLE;
    }
    if free_level == SpectrumLevel::Full || (free_covers && free_level != SpectrumLevel::None) {
        return HpcDecision::new(Action::FreeTransmit { reduced: false });
    }
    if y > threshold {
        return HpcDecision::new(Action::BuyFull);
    }
    match free_level {
        SpectrumLevel::Reduced => HpcDecision::new(Action::FreeTransmit { reduced: false }),
        _ => HpcDecision::IDLE,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StaticParams {
    pub period: usize,
    pub burst_len: usize,
}

impl StaticParams {
    pub fn new(period: usize, burst_len: usize) -> Result<Self> {
        if burst_len == 0 || burst_len > period {
            return Err(Error::config(
                "static schedule needs 0 < burst_len <= period",
            ));
        }
        Ok(StaticParams { period, burst_len })
    }
}

impl From<StaticSection> for StaticParams {
    fn from(s: StaticSection) -> Self {
        StaticParams {
            period: s.period,
            burst_len: s.burst_len,
        }
    }
}

/// True on slots `p+1 ..= p+burst_len` after every boundary `p = 0, period, 2·period, …`.
pub fn static_decide(slot: usize, params: StaticParams) -> bool {
    let offset = (slot + params.period - 1) % params.period + 1;
    offset <= params.burst_len
}

/// Shape of the deadline-constrained data-unit task: `N` units arrive one
/// per slot from slot 0, all must be sent within `T` slots, and at most `M`
/// of them may be reduced in size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DeadlineTask {
    pub n_units: usize,
    pub deadline: usize,
    pub quality_budget: usize,
}

impl DeadlineTask {
    pub fn new(n_units: usize, deadline: usize, quality_budget: usize) -> Result<Self> {
        if n_units > deadline {
            return Err(Error::Infeasible(format!(
                "{n_units} units cannot be sent one per slot within {deadline} slots"
            )));
        }
        if quality_budget > 0 && quality_budget >= n_units {
            return Err(Error::config(
                "quality budget must be smaller than the unit count",
            ));
        }
        Ok(DeadlineTask {
            n_units,
            deadline,
            quality_budget,
        })
    }

    /// Task for a scenario: `N = horizon - slack`, `T = horizon`, `M = round(fraction·N)`.
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        let q = &config.quality;
        let n = config
            .horizon
            .checked_sub(q.delay_slack)
            .ok_or_else(|| Error::config("delay slack exceeds the horizon"))?;
        let m = (q.budget_fraction * n as f64).round() as usize;
        DeadlineTask::new(n, config.horizon, m.min(n.saturating_sub(1)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityParams {
    pub n_units: usize,
    pub deadline: usize,
    pub quality_budget: usize,
    pub beta_c: f64,
    pub pap_full: f64,
    pub pap_reduced: f64,
    sum_full: u128,
    sum_reduced: u128,
    observations: u64,
}

impl QualityParams {
    pub fn new(task: DeadlineTask, beta_c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta_c) {
            return Err(Error::config("beta_c must lie in [0, 1]"));
        }
        Ok(QualityParams {
            n_units: task.n_units,
            deadline: task.deadline,
            quality_budget: task.quality_budget,
            beta_c,
            pap_full: 0.0,
            pap_reduced: 0.0,
            sum_full: 0,
            sum_reduced: 0,
            observations: 0,
        })
    }

    pub fn task(&self) -> DeadlineTask {
        DeadlineTask {
            n_units: self.n_units,
            deadline: self.deadline,
            quality_budget: self.quality_budget,
        }
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }
}

/// Folds one observed price into the running means and recomputes both PAPs
/// (micro-cents) as `beta_c` times the mean of every price seen so far.
pub fn pap_update(mut params: QualityParams, observed: &PriceSample, beta_c: f64) -> QualityParams {
    params.sum_full += observed.full_unit_price.0 as u128;
    params.sum_reduced += observed.reduced_unit_price.0 as u128;
    params.observations += 1;
    let n = params.observations as f64;
    params.beta_c = beta_c;
    params.pap_full = beta_c * params.sum_full as f64 / n;
    params.pap_reduced = beta_c * params.sum_reduced as f64 / n;
    params
}

/// Progress of one concentrator through its [`DeadlineTask`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaskProgress {
    pub units_remaining: usize,
    pub budget_remaining: usize,
    pub slots_remaining: usize,
    /// Units that have arrived but are not yet sent.
    pub units_available: usize,
}

pub fn quality_decide(
    params: &QualityParams,
    slot: usize,
    level: SpectrumLevel,
    prices: &PriceSample,
    progress: TaskProgress,
) -> Result<HpcDecision> {
    if progress.units_remaining == 0 {
        return Ok(HpcDecision::IDLE);
    }
    if slot >= params.deadline || progress.units_remaining > progress.slots_remaining {
        return Err(Error::Infeasible(format!(
            "slot {slot}: {} units left with {} slots to the deadline",
            progress.units_remaining, progress.slots_remaining
        )));
    }
    let forced = progress.units_remaining == progress.slots_remaining;
    if progress.units_available == 0 {
        if forced {
            return Err(Error::Infeasible(format!(
                "slot {slot}: transmission forced but no unit has arrived"
            )));
        }
        return Ok(HpcDecision::IDLE);
    }
    let has_budget = progress.budget_remaining > 0;

    let action = match level {
        SpectrumLevel::Full => Action::FreeTransmit { reduced: false },
        SpectrumLevel::Reduced if has_budget => Action::FreeTransmit { reduced: true },
        _ if forced => {
            if has_budget && prices.reduced_unit_price < prices.full_unit_price {
                Action::BuyReduced
            } else {
                Action::BuyFull
            }
        }
        _ if prices.full_unit_price.0 as f64 <= params.pap_full => Action::BuyFull,
        _ if has_budget && prices.reduced_unit_price.0 as f64 <= params.pap_reduced => {
            Action::BuyReduced
        }
        _ => Action::Idle,
    };
    Ok(HpcDecision::new(action))
}

/// What a policy sees for one concentrator in one slot.
#[derive(Clone, Copy, Debug)]
pub struct Observation {
    pub slot: usize,
    pub level: SpectrumLevel,
    pub prices: PriceSample,
    pub queue_len: u64,
    /// Packets the free spectrum at `level` can carry this slot.
    pub free_capacity: u64,
    /// `Q + Z` for the concentrator.
    pub y: f64,
    /// Present only for the deadline-constrained data-unit task.
    pub task: Option<TaskProgress>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Lyapunov(LyapunovParams),
    Quality(QualityParams),
    Static {
        label: &'static str,
        params: StaticParams,
    },
}

impl Policy {
    pub fn from_config(config: &ScenarioConfig, choice: PolicyChoice) -> Result<Self> {
        Ok(match choice {
            PolicyChoice::Lyapunov => Policy::Lyapunov(LyapunovParams::new(
                config.lyapunov.v_factor,
                config.epsilon(),
            )?),
            PolicyChoice::Quality => Policy::Quality(QualityParams::new(
                DeadlineTask::from_config(config)?,
                config.quality.beta_c,
            )?),
            PolicyChoice::Static1 | PolicyChoice::Static2 => {
                let s = config.static_section(choice).expect("static choice");
                Policy::Static {
                    label: choice.label(),
                    params: StaticParams::new(s.period, s.burst_len)?,
                }
            }
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Policy::Lyapunov(_) => "lyapunov",
            Policy::Quality(_) => "quality",
            Policy::Static { label, .. } => label,
        }
    }

    /// Whether decisions depend on state carried across slots.
    pub fn is_stateful(&self) -> bool {
        matches!(self, Policy::Quality(_))
    }

    pub fn decide(&self, obs: &Observation) -> Result<HpcDecision> {
        match self {
            Policy::Lyapunov(p) => {
                if obs.queue_len == 0 {
                    return Ok(HpcDecision::IDLE);
                }
                let threshold = lyapunov_threshold(p.v_factor, obs.prices.full_unit_price);
                let covers = obs.free_capacity >= obs.queue_len;
                Ok(lyapunov_decide(obs.y, threshold, obs.level, covers))
            }
            Policy::Quality(q) => {
                let progress = obs.task.ok_or_else(|| {
                    Error::config("the quality policy runs only on the deadline task")
                })?;
                quality_decide(q, obs.slot, obs.level, &obs.prices, progress)
            }
            Policy::Static { params, .. } => {
                if obs.queue_len == 0 {
                    return Ok(HpcDecision::IDLE);
                }
                if static_decide(obs.slot, *params) {
                    return Ok(HpcDecision::new(Action::BuyFull));
                }
                Ok(match obs.level {
                    SpectrumLevel::None => HpcDecision::IDLE,
                    _ => HpcDecision::new(Action::FreeTransmit { reduced: false }),
                })
            }
        }
    }

    /// End-of-slot hook; feeds the slot's price into PAP statistics.
    pub fn observe(&mut self, prices: &PriceSample) {
        if let Policy::Quality(q) = self {
            let beta = q.beta_c;
            *q = pap_update(q.clone(), prices, beta);
        }
    }

    pub fn reset(&mut self) {
        if let Policy::Quality(q) = self {
            *q = QualityParams::new(q.task(), q.beta_c).expect("validated at construction");
        }
    }
}
