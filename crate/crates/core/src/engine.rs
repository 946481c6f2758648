//! Slot-by-slot simulation of `K` concentrators over a [`Trace`].
//!
//! Two run modes share the same policies and metrics:
//!
//! - **Queue mode** (Lyapunov and static policies). Per slot and
//!   concentrator: observe `(Q, Z, level, price)`, decide, serve, charge,
//!   advance `Z`, then enqueue the slot's arrivals. Arrivals are therefore
//!   served at the earliest in the following slot. Free full spectrum and a
//!   leased HPC both carry up to `service_capacity` packets; free reduced
//!   spectrum carries `floor(ρ·service_capacity)` packets. A lease is charged
//!   the slot's per-packet price for every packet it carries, which equals
//!   the full-unit price when a whole unit goes out.
//!
//! - **Deadline-task mode** (quality policy). Unit `i` arrives at the start
//!   of slot `i < N`, at most one unit goes out per slot, and all `N` units
//!   must be out by slot `T`. Paid units are charged the full- or
//!   reduced-unit price.
//!
//! Concentrators never interact (prices are BS-wide and HPC supply is
//! unlimited), so each one is simulated independently and in parallel; the
//! result is identical to a sequential run.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PolicyChoice, ScenarioConfig};
use crate::currency::MicroCents;
use crate::env::{ArrivalBatch, PriceSample, SpectrumLevel, Trace};
use crate::error::{Error, Result};
use crate::oracle::{lower_bound_gap, solve_dp, OfflineInstance, Schedule, SlotAction};
use crate::policy::{Action, DeadlineTask, Observation, Policy, TaskProgress};
use crate::queueing::{littles_law_delay, ConcentratorState, DelayStats, ServiceGrant};

/// Everything recorded for one concentrator.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentratorTrack {
    pub cost: MicroCents,
    /// Cost paid in each slot.
    pub slot_cost: Vec<MicroCents>,
    /// Backlog at the end of each slot, after arrivals.
    pub queue: Vec<u64>,
    /// Packets served in each slot.
    pub served: Vec<u32>,
    pub actions: Vec<Action>,
    /// Packets still waiting after the last service opportunity, not
    /// counting the batch that arrives in the final slot.
    pub final_backlog: u64,
    pub arrived: u64,
    pub delivered: u64,
    pub purchases: u64,
    pub units_full: u64,
    pub units_reduced: u64,
    pub delays: DelayStats,
}

impl ConcentratorTrack {
    fn with_horizon(h: usize) -> Self {
        ConcentratorTrack {
            cost: MicroCents::ZERO,
            slot_cost: Vec::with_capacity(h),
            queue: Vec::with_capacity(h),
            served: Vec::with_capacity(h),
            actions: Vec::with_capacity(h),
            final_backlog: 0,
            arrived: 0,
            delivered: 0,
            purchases: 0,
            units_full: 0,
            units_reduced: 0,
            delays: DelayStats::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub policy: String,
    pub seed: u64,
    pub horizon: usize,
    pub unit_size: u32,
    /// Set for deadline-task runs.
    pub task: Option<DeadlineTask>,
    pub total_cost: MicroCents,
    /// Accumulated cost over all concentrators at the end of each slot.
    pub cumulative_cost: Vec<MicroCents>,
    /// End-of-slot backlog summed over concentrators.
    pub queue_total: Vec<u64>,
    pub purchases_per_slot: Vec<u32>,
    pub delays: DelayStats,
    pub concentrators: Vec<ConcentratorTrack>,
}

impl RunMetrics {
    pub fn k(&self) -> usize {
        self.concentrators.len()
    }

    pub fn cost_per_concentrator(&self) -> Vec<MicroCents> {
        self.concentrators.iter().map(|c| c.cost).collect()
    }

    /// Mean accumulated cost per concentrator, in dollars.
    pub fn mean_cost_dollars(&self) -> f64 {
        self.total_cost.as_dollars() / self.k() as f64
    }

    pub fn mean_final_backlog(&self) -> f64 {
        self.concentrators
            .iter()
            .map(|c| c.final_backlog as f64)
            .sum::<f64>()
            / self.k() as f64
    }

    /// Time-averaged end-of-slot backlog per concentrator, in packets.
    pub fn time_avg_queue(&self) -> f64 {
        self.queue_total.iter().map(|q| *q as f64).sum::<f64>() / (self.horizon * self.k()) as f64
    }

    /// Empirical packet arrival rate per concentrator per slot.
    pub fn arrival_rate(&self) -> f64 {
        self.concentrators
            .iter()
            .map(|c| c.arrived as f64)
            .sum::<f64>()
            / (self.horizon * self.k()) as f64
    }

    pub fn mean_delay(&self) -> Option<f64> {
        self.delays.mean()
    }

    pub fn littles_delay(&self) -> Result<f64> {
        littles_law_delay(self.time_avg_queue(), self.arrival_rate())
    }

    pub fn units_reduced(&self) -> u64 {
        self.concentrators.iter().map(|c| c.units_reduced).sum()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            policy: self.policy.clone(),
            seed: self.seed,
            total_cost: self.total_cost,
            cost_dollars: self.mean_cost_dollars(),
            final_backlog: self.mean_final_backlog(),
            mean_delay: self.mean_delay().unwrap_or(0.0),
            time_avg_queue: self.time_avg_queue(),
            purchases: self.concentrators.iter().map(|c| c.purchases).sum(),
            units_reduced: self.units_reduced(),
        }
    }

    /// Per-slot time series as CSV: slot, accumulated cost (dollars per
    /// concentrator), mean backlog (packets), HPC purchases.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["slot", "cost_dollars", "queue_mean", "purchases"])?;
        let k = self.k() as f64;
        for t in 0..self.horizon {
            w.write_record(&[
                t.to_string(),
                format!("{:.8}", self.cumulative_cost[t].as_dollars() / k),
                format!("{:.8}", self.queue_total[t] as f64 / k),
                self.purchases_per_slot[t].to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    /// Rebuilds concentrator `c`'s backlog series from the recorded service
    /// alone, through the queueing module.
    pub fn replay_queue(&self, trace: &Trace, c: usize) -> Vec<u64> {
        let track = &self.concentrators[c];
        let mut st = ConcentratorState::new();
        let mut out = Vec::with_capacity(self.horizon);
        for t in 0..self.horizon {
            let grant = ServiceGrant {
                packets_served: track.served[t] as u64,
                ..Default::default()
            };
            match self.task {
                Some(task) => {
                    if t < task.n_units {
                        st.enqueue(unit_batch(self.unit_size, t));
                    }
                    st.serve(grant, t);
                }
                None => {
                    st.serve(grant, t);
                    st.enqueue(trace.arrival(t, c));
                }
            }
            out.push(st.q_len());
        }
        out
    }
}

/// Compact per-run figures used for sweeps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub total_cost: MicroCents,
    /// Mean accumulated cost per concentrator, dollars.
    pub cost_dollars: f64,
    /// Mean final backlog per concentrator, packets.
    pub final_backlog: f64,
    pub mean_delay: f64,
    pub time_avg_queue: f64,
    pub purchases: u64,
    pub units_reduced: u64,
}

fn unit_batch(unit_size: u32, slot: usize) -> ArrivalBatch {
    ArrivalBatch {
        packet_count: unit_size,
        slot_index: slot,
    }
}

fn check_dimensions(config: &ScenarioConfig, trace: &Trace) -> Result<()> {
    if trace.k_concentrators() != config.k_concentrators || trace.horizon() != config.horizon {
        return Err(Error::config(format!(
            "trace is {}x{} (concentrators x slots), config expects {}x{}",
            trace.k_concentrators(),
            trace.horizon(),
            config.k_concentrators,
            config.horizon
        )));
    }
    Ok(())
}

fn slot_prices(config: &ScenarioConfig, trace: &Trace, slots: usize) -> Result<Vec<PriceSample>> {
    (0..slots)
        .map(|t| trace.prices(t, config.unit_size, config.reduced_fraction))
        .collect()
}

/// Runs the policy selected in `config` over `trace`.
pub fn run(config: &ScenarioConfig, trace: &Trace) -> Result<RunMetrics> {
    config.validate()?;
    let policy = Policy::from_config(config, config.policy)?;
    run_policy(config, trace, &policy)
}

/// Runs every config on the same trace for paired comparison.
pub fn run_matched(configs: &[ScenarioConfig], trace: &Trace) -> Result<Vec<RunMetrics>> {
    if let Some(first) = configs.first() {
        if configs
            .iter()
            .any(|c| (c.k_concentrators, c.horizon) != (first.k_concentrators, first.horizon))
        {
            return Err(Error::config(
                "matched runs must share concentrator count and horizon",
            ));
        }
    }
    configs.iter().map(|c| run(c, trace)).collect()
}

pub fn run_policy(config: &ScenarioConfig, trace: &Trace, policy: &Policy) -> Result<RunMetrics> {
    check_dimensions(config, trace)?;
    let mut policy = policy.clone();
    policy.reset();
    let (task, slots) = match &policy {
        Policy::Quality(q) => (Some(q.task()), q.deadline),
        _ => (None, config.horizon),
    };
    if slots > trace.horizon() {
        return Err(Error::config("task deadline extends beyond the trace"));
    }
    let prices = slot_prices(config, trace, slots)?;
    let tracks = (0..config.k_concentrators)
        .into_par_iter()
        .map(|c| match task {
            Some(task) => simulate_task(config, trace, policy.clone(), &prices, task, c),
            None => simulate_queue(config, trace, &policy, &prices, c),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(
        policy.label(),
        trace.seed(),
        config.unit_size,
        task,
        slots,
        tracks,
    ))
}

fn free_capacity(config: &ScenarioConfig, level: SpectrumLevel) -> u64 {
    match level {
        SpectrumLevel::Full => config.service_capacity as u64,
        SpectrumLevel::Reduced => config.reduced_capacity() as u64,
        SpectrumLevel::None => 0,
    }
}

fn simulate_queue(
    config: &ScenarioConfig,
    trace: &Trace,
    policy: &Policy,
    prices: &[PriceSample],
    c: usize,
) -> Result<ConcentratorTrack> {
    let h = config.horizon;
    let epsilon = config.epsilon();
    let mut st = ConcentratorState::new();
    let mut track = ConcentratorTrack::with_horizon(h);
    for (t, price) in prices.iter().enumerate() {
        let level = trace.level(t, c);
        let obs = Observation {
            slot: t,
            level,
            prices: *price,
            queue_len: st.q_len(),
            free_capacity: free_capacity(config, level),
            y: st.y(),
            task: None,
        };
        let decision = policy.decide(&obs)?;
        let (capacity, via_hpc) = match decision.action() {
            Action::Idle => (0, false),
            Action::FreeTransmit { .. } => (free_capacity(config, level), false),
            Action::BuyFull => (config.service_capacity as u64, true),
            Action::BuyReduced => {
                return Err(Error::invariant("reduced-size purchase in queue mode"));
            }
        };
        let backlogged = st.q_len() > 0;
        let served = st.serve(
            ServiceGrant {
                packets_served: capacity,
                via_hpc,
                quality_reduced: false,
            },
            t,
        );
        let paid = if via_hpc {
            track.purchases += 1;
            trace.packet_price(t) * served
        } else {
            MicroCents::ZERO
        };
        track.cost += paid;
        st.advance_virtual(served, epsilon, backlogged);
        if t + 1 == h {
            track.final_backlog = st.q_len();
        }
        st.enqueue(trace.arrival(t, c));

        track.slot_cost.push(paid);
        track.served.push(served as u32);
        track.actions.push(decision.action());
        track.queue.push(st.q_len());
    }
    track.arrived = st.enqueued_total();
    track.delivered = st.served_total();
    track.delays = st.delivered().clone();
    Ok(track)
}

fn simulate_task(
    config: &ScenarioConfig,
    trace: &Trace,
    mut policy: Policy,
    prices: &[PriceSample],
    task: DeadlineTask,
    c: usize,
) -> Result<ConcentratorTrack> {
    let unit = config.unit_size as u64;
    let mut st = ConcentratorState::new();
    let mut track = ConcentratorTrack::with_horizon(task.deadline);
    let (mut sent, mut reduced) = (0usize, 0usize);
    for (t, price) in prices.iter().enumerate() {
        if t < task.n_units {
            st.enqueue(unit_batch(config.unit_size, t));
        }
        let level = trace.level(t, c);
        let progress = TaskProgress {
            units_remaining: task.n_units - sent,
            budget_remaining: task.quality_budget - reduced,
            slots_remaining: task.deadline - t,
            units_available: (st.q_len() / unit) as usize,
        };
        let obs = Observation {
            slot: t,
            level,
            prices: *price,
            queue_len: st.q_len(),
            free_capacity: free_capacity(config, level),
            y: st.y(),
            task: Some(progress),
        };
        let decision = policy.decide(&obs)?;
        let paid = match decision.action() {
            Action::Idle => MicroCents::ZERO,
            Action::FreeTransmit { reduced: false } if level == SpectrumLevel::Full => {
                MicroCents::ZERO
            }
            Action::FreeTransmit { reduced: true } if level == SpectrumLevel::Reduced => {
                MicroCents::ZERO
            }
            Action::FreeTransmit { .. } => {
                return Err(Error::invariant(format!(
                    "slot {t}: free transmission not admitted by level {level:?}"
                )));
            }
            Action::BuyFull => price.full_unit_price,
            Action::BuyReduced => price.reduced_unit_price,
        };
        if decision.transmits() {
            if progress.units_available == 0 || progress.units_remaining == 0 {
                return Err(Error::invariant(format!(
                    "slot {t}: transmission without a unit"
                )));
            }
            st.serve(
                ServiceGrant {
                    packets_served: unit,
                    via_hpc: decision.d_flag(),
                    quality_reduced: decision.is_reduced(),
                },
                t,
            );
            sent += 1;
            if decision.is_reduced() {
                reduced += 1;
                track.units_reduced += 1;
            } else {
                track.units_full += 1;
            }
            if reduced > task.quality_budget {
                return Err(Error::invariant("quality budget exceeded"));
            }
        }
        if decision.d_flag() {
            track.purchases += 1;
        }
        track.cost += paid;
        policy.observe(price);

        track.slot_cost.push(paid);
        track
            .served
            .push(if decision.transmits() { unit as u32 } else { 0 });
        track.actions.push(decision.action());
        track.queue.push(st.q_len());
    }
    if sent != task.n_units {
        return Err(Error::invariant(format!(
            "concentrator {c} sent {sent} of {} units by the deadline",
            task.n_units
        )));
    }
    track.final_backlog = st.q_len();
    track.arrived = st.enqueued_total();
    track.delivered = st.served_total();
    track.delays = st.delivered().clone();
    Ok(track)
}

fn aggregate(
    label: &str,
    seed: u64,
    unit_size: u32,
    task: Option<DeadlineTask>,
    slots: usize,
    concentrators: Vec<ConcentratorTrack>,
) -> RunMetrics {
    let mut cumulative_cost = Vec::with_capacity(slots);
    let mut queue_total = vec![0u64; slots];
    let mut purchases_per_slot = vec![0u32; slots];
    let mut slot_cost = vec![MicroCents::ZERO; slots];
    let mut delays = DelayStats::default();
    for track in &concentrators {
        for t in 0..slots {
            queue_total[t] += track.queue[t];
            slot_cost[t] += track.slot_cost[t];
            purchases_per_slot[t] += track.actions[t].is_purchase() as u32;
        }
        delays.merge(&track.delays);
    }
    let mut acc = MicroCents::ZERO;
    for c in slot_cost {
        acc += c;
        cumulative_cost.push(acc);
    }
    RunMetrics {
        policy: label.to_string(),
        seed,
        horizon: slots,
        unit_size,
        task,
        total_cost: concentrators.iter().map(|c| c.cost).sum(),
        cumulative_cost,
        queue_total,
        purchases_per_slot,
        delays,
        concentrators,
    }
}

impl Action {
    pub fn is_purchase(self) -> bool {
        matches!(self, Action::BuyFull | Action::BuyReduced)
    }
}

/// Offline optimum next to a deadline-task run, per concentrator.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleComparison {
    pub online: Vec<MicroCents>,
    pub offline: Vec<MicroCents>,
}

impl OracleComparison {
    pub fn online_total(&self) -> MicroCents {
        self.online.iter().copied().sum()
    }

    pub fn offline_total(&self) -> MicroCents {
        self.offline.iter().copied().sum()
    }
}

/// Solves the offline task for every concentrator of a deadline-task run,
/// re-validates the online schedule, and fails with an invariant violation
/// if any online cost falls below its offline optimum.
pub fn compare_with_oracle(
    config: &ScenarioConfig,
    trace: &Trace,
    metrics: &RunMetrics,
) -> Result<OracleComparison> {
    let task = metrics
        .task
        .ok_or_else(|| Error::config("oracle comparison needs a deadline-task run"))?;
    let pairs = metrics
        .concentrators
        .par_iter()
        .enumerate()
        .map(|(c, track)| {
            let instance = OfflineInstance::from_trace(
                trace,
                c,
                task,
                config.unit_size,
                config.reduced_fraction,
            )?;
            let online_actions = track
                .actions
                .iter()
                .enumerate()
                .map(|(t, a)| {
                    SlotAction::from_online(*a, instance.levels()[t]).ok_or_else(|| {
                        Error::invariant(format!(
                            "slot {t}: online action {a:?} has no offline form"
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let online = Schedule {
                reduced_count: online_actions.iter().filter(|a| a.reduced()).count(),
                actions: online_actions,
                total_cost: track.cost,
            };
            online.validate(&instance)?;
            let offline = solve_dp(&instance)?;
            lower_bound_gap(track.cost, offline.total_cost)?;
            Ok((track.cost, offline.total_cost))
        })
        .collect::<Result<Vec<_>>>()?;
    let (online, offline) = pairs.into_iter().unzip();
    Ok(OracleComparison { online, offline })
}

/// Lyapunov, both static schedules and the quality heuristic on one trace.
pub fn default_lineup() -> [PolicyChoice; 4] {
    [
        PolicyChoice::Lyapunov,
        PolicyChoice::Static1,
        PolicyChoice::Static2,
        PolicyChoice::Quality,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ArrivalLaw;
    use crate::env::generate_trace;

    fn small(policy: PolicyChoice) -> ScenarioConfig {
        ScenarioConfig {
            k_concentrators: 4,
            horizon: 3000,
            policy,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn zero_arrivals_cost_nothing() {
        let cfg = ScenarioConfig {
            mean_arrival: 0.0,
            ..small(PolicyChoice::Lyapunov)
        };
        let trace = generate_trace(&cfg, 1).unwrap();
        for choice in [PolicyChoice::Lyapunov, PolicyChoice::Static1] {
            let m = run(&cfg.with_policy(choice), &trace).unwrap();
            assert_eq!(m.total_cost, MicroCents::ZERO);
            assert!(m.queue_total.iter().all(|q| *q == 0));
        }
    }

    #[test]
    fn all_full_spectrum_is_free_and_bounded() {
        let cfg = small(PolicyChoice::Lyapunov);
        let levels = vec![vec![SpectrumLevel::Full; cfg.horizon]; cfg.k_concentrators];
        let arrivals = vec![vec![5u32; cfg.horizon]; cfg.k_concentrators];
        let prices = vec![MicroCents::from_cents(0.5); cfg.horizon];
        let trace = Trace::from_parts(0, 0, prices, levels, arrivals).unwrap();
        let m = run(&cfg, &trace).unwrap();
        assert_eq!(m.total_cost, MicroCents::ZERO);
        assert!(m
            .concentrators
            .iter()
            .all(|c| c.queue.iter().all(|q| *q <= 5)));
    }

    #[test]
    fn static_one_buys_two_hundred_slots_per_period() {
        let cfg = small(PolicyChoice::Static1);
        let trace = generate_trace(&cfg, 5).unwrap();
        let m = run(&cfg, &trace).unwrap();
        for track in &m.concentrators {
            for period in 0..3 {
                let range = period * 1000..(period + 1) * 1000;
                let bought = track.actions[range]
                    .iter()
                    .filter(|a| a.is_purchase())
                    .count();
                assert_eq!(bought, 200);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let cfg = small(PolicyChoice::Lyapunov);
        let trace = generate_trace(
            &ScenarioConfig {
                horizon: 10,
                ..cfg.clone()
            },
            1,
        )
        .unwrap();
        assert!(matches!(run(&cfg, &trace), Err(Error::Config(_))));
    }

    #[test]
    fn quality_run_completes_and_beats_no_oracle() {
        let mut cfg = small(PolicyChoice::Quality);
        cfg.horizon = 400;
        cfg.quality.delay_slack = 6;
        cfg.quality.budget_fraction = 0.2;
        let trace = generate_trace(&cfg, 11).unwrap();
        let m = run(&cfg, &trace).unwrap();
        let task = m.task.unwrap();
        assert_eq!(task.n_units, 394);
        for track in &m.concentrators {
            assert_eq!(track.units_full + track.units_reduced, 394);
            assert!(track.units_reduced as usize <= task.quality_budget);
        }
        let cmp = compare_with_oracle(&cfg, &trace, &m).unwrap();
        assert!(cmp.offline_total() <= cmp.online_total());
    }

    #[test]
    fn replay_reproduces_queues() {
        for choice in [
            PolicyChoice::Lyapunov,
            PolicyChoice::Static2,
            PolicyChoice::Quality,
        ] {
            let mut cfg = small(choice);
            cfg.arrival_law = ArrivalLaw::Poisson;
            cfg.horizon = 500;
            let trace = generate_trace(&cfg, 2).unwrap();
            let m = run(&cfg, &trace).unwrap();
            for c in 0..cfg.k_concentrators {
                assert_eq!(m.replay_queue(&trace, c), m.concentrators[c].queue);
            }
        }
    }

    #[test]
    fn identical_inputs_identical_metrics() {
        let cfg = small(PolicyChoice::Lyapunov);
        let trace = generate_trace(&cfg, 3).unwrap();
        let runs = run_matched(&[cfg.clone(), cfg], &trace).unwrap();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0].to_csv().unwrap(), runs[1].to_csv().unwrap());
    }
}
