//! Offline optimum for the deadline-constrained data-unit task.
//!
//! With full knowledge of levels and prices, choose for every slot whether
//! to send the next unit and how (free or paid, full or reduced) so that all
//! `N` units go out within `T` slots, at most `M` at reduced size, at
//! minimum total cost.
//!
//! [`solve_dp`] runs a backward dynamic program over `(slot, units sent,
//! reduced used)`. Only states from which the deadline is still reachable
//! and which respect causality are kept: at the start of slot `t` the number
//! of units sent lies in `[max(0, N-(T-t)), min(t, N)]`, a band of width
//! `T-N+1`, so tight deadlines are cheap even at `T = N = 10_000`.
//! Value layers roll and are checkpointed; reconstruction recomputes one
//! segment at a time, so memory stays modest at `T = 10_000, M = 3_000`.
//!
//! [`solve_bruteforce`] enumerates every schedule and serves as the
//! independent check.

use serde::Serialize;

use crate::currency::MicroCents;
use crate::env::{PriceSample, SpectrumLevel, Trace};
use crate::error::{Error, Result};
use crate::policy::{Action, DeadlineTask};

/// Largest horizon accepted by [`solve_bruteforce`].
pub const BRUTEFORCE_MAX_SLOTS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotAction {
    Idle,
    SendFullFree,
    SendReducedFree,
    SendFullPaid,
    SendReducedPaid,
}

impl SlotAction {
    pub fn sends(self) -> bool {
        self != SlotAction::Idle
    }

    pub fn reduced(self) -> bool {
        matches!(
            self,
            SlotAction::SendReducedFree | SlotAction::SendReducedPaid
        )
    }

    /// Maps an online action taken on `level` to the offline vocabulary.
    pub fn from_online(action: Action, level: SpectrumLevel) -> Option<SlotAction> {
        Some(match (action, level) {
            (Action::Idle, _) => SlotAction::Idle,
            (Action::FreeTransmit { reduced: false }, SpectrumLevel::Full) => {
                SlotAction::SendFullFree
            }
            (Action::FreeTransmit { reduced: true }, SpectrumLevel::Reduced) => {
                SlotAction::SendReducedFree
            }
            (Action::BuyFull, _) => SlotAction::SendFullPaid,
            (Action::BuyReduced, _) => SlotAction::SendReducedPaid,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineInstance {
    task: DeadlineTask,
    levels: Vec<SpectrumLevel>,
    prices: Vec<PriceSample>,
}

impl OfflineInstance {
    pub fn new(
        task: DeadlineTask,
        levels: Vec<SpectrumLevel>,
        prices: Vec<PriceSample>,
    ) -> Result<Self> {
        if task.n_units > task.deadline {
            return Err(Error::Infeasible(format!(
                "{} units need at least {} slots, deadline is {}",
                task.n_units, task.n_units, task.deadline
            )));
        }
        if task.quality_budget > 0 && task.quality_budget >= task.n_units {
            return Err(Error::config(
                "quality budget must be smaller than the unit count",
            ));
        }
        if levels.len() != task.deadline || prices.len() != task.deadline {
            return Err(Error::config(
                "levels and prices must cover exactly the deadline",
            ));
        }
        Ok(OfflineInstance {
            task,
            levels,
            prices,
        })
    }

    /// The task as seen by one concentrator of a trace.
    pub fn from_trace(
        trace: &Trace,
        concentrator: usize,
        task: DeadlineTask,
        unit_size: u32,
        reduced_fraction: f64,
    ) -> Result<Self> {
        if task.deadline > trace.horizon() {
            return Err(Error::config("deadline extends beyond the trace horizon"));
        }
        if concentrator >= trace.k_concentrators() {
            return Err(Error::config("concentrator index out of range"));
        }
        let levels = (0..task.deadline)
            .map(|t| trace.level(t, concentrator))
            .collect();
        let prices = (0..task.deadline)
            .map(|t| trace.prices(t, unit_size, reduced_fraction))
            .collect::<Result<_>>()?;
        OfflineInstance::new(task, levels, prices)
    }

    pub fn task(&self) -> DeadlineTask {
        self.task
    }

    pub fn levels(&self) -> &[SpectrumLevel] {
        &self.levels
    }

    pub fn prices(&self) -> &[PriceSample] {
        &self.prices
    }

    /// Send options for `slot` in tie-break order (free, full paid, reduced paid).
    fn send_options(&self, slot: usize) -> &'static [SlotAction] {
        match self.levels[slot] {
            SpectrumLevel::Full => &[SlotAction::SendFullFree],
            SpectrumLevel::Reduced => &[SlotAction::SendReducedFree, SlotAction::SendFullPaid],
            SpectrumLevel::None => &[SlotAction::SendFullPaid, SlotAction::SendReducedPaid],
        }
    }

    /// Cost of `action` in `slot`, or `None` if the level does not admit it.
    pub fn action_cost(&self, slot: usize, action: SlotAction) -> Option<MicroCents> {
        let level = self.levels[slot];
        let p = self.prices[slot];
        match action {
            SlotAction::Idle => Some(MicroCents::ZERO),
            SlotAction::SendFullFree => (level == SpectrumLevel::Full).then_some(MicroCents::ZERO),
            SlotAction::SendReducedFree => {
                (level == SpectrumLevel::Reduced).then_some(MicroCents::ZERO)
            }
            SlotAction::SendFullPaid => Some(p.full_unit_price),
            SlotAction::SendReducedPaid => Some(p.reduced_unit_price),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub actions: Vec<SlotAction>,
    pub total_cost: MicroCents,
    pub reduced_count: usize,
}

impl Schedule {
    fn from_actions(instance: &OfflineInstance, actions: Vec<SlotAction>) -> Schedule {
        let total_cost = actions
            .iter()
            .enumerate()
            .map(|(t, a)| {
                instance
                    .action_cost(t, *a)
                    .unwrap_or(MicroCents(u64::MAX / 4))
            })
            .sum();
        let reduced_count = actions.iter().filter(|a| a.reduced()).count();
        Schedule {
            actions,
            total_cost,
            reduced_count,
        }
    }

    pub fn sends(&self) -> usize {
        self.actions.iter().filter(|a| a.sends()).count()
    }

    /// Re-checks every schedule invariant against the instance.
    pub fn validate(&self, instance: &OfflineInstance) -> Result<()> {
        let task = instance.task();
        if self.actions.len() != task.deadline {
            return Err(Error::invariant(
                "schedule length differs from the deadline",
            ));
        }
        if self.sends() != task.n_units {
            return Err(Error::invariant(format!(
                "schedule sends {} units, task has {}",
                self.sends(),
                task.n_units
            )));
        }
        let reduced = self.actions.iter().filter(|a| a.reduced()).count();
        if reduced != self.reduced_count || reduced > task.quality_budget {
            return Err(Error::invariant("reduced units exceed the quality budget"));
        }
        let mut sent = 0usize;
        let mut cost = MicroCents::ZERO;
        for (t, a) in self.actions.iter().enumerate() {
            if a.sends() {
                sent += 1;
            }
            // unit i arrives in slot i
            if sent > (t + 1).min(task.n_units) {
                return Err(Error::invariant(format!(
                    "slot {t}: sends ahead of arrivals"
                )));
            }
            cost += instance.action_cost(t, *a).ok_or_else(|| {
                Error::invariant(format!(
                    "slot {t}: {a:?} not admitted by level {:?}",
                    instance.levels[t]
                ))
            })?;
        }
        if cost != self.total_cost {
            return Err(Error::invariant(
                "recorded cost differs from recomputed cost",
            ));
        }
        Ok(())
    }
}

const INF: u64 = u64::MAX;
const NO_CHOICE: u8 = u8::MAX;

fn action_code(a: SlotAction) -> u8 {
    match a {
        SlotAction::Idle => 0,
        SlotAction::SendFullFree => 1,
        SlotAction::SendReducedFree => 2,
        SlotAction::SendFullPaid => 3,
        SlotAction::SendReducedPaid => 4,
    }
}

fn action_from_code(c: u8) -> SlotAction {
    match c {
        0 => SlotAction::Idle,
        1 => SlotAction::SendFullFree,
        2 => SlotAction::SendReducedFree,
        3 => SlotAction::SendFullPaid,
        _ => SlotAction::SendReducedPaid,
    }
}

/// Memory ceiling for [`solve_dp`]'s working set, in bytes.
pub const DP_MEMORY_LIMIT: usize = 1 << 31;

/// Banded state layout: at the start of slot `t`, `s` units sent and `r`
/// reduced, stored at `(s - lo(t)) * width + r`.
struct Layout {
    n: usize,
    t_max: usize,
    m: usize,
}

impl Layout {
    fn width(&self) -> usize {
        self.m + 1
    }
    fn lo(&self, t: usize) -> usize {
        self.n.saturating_sub(self.t_max - t)
    }
    fn hi(&self, t: usize) -> usize {
        t.min(self.n)
    }
    fn len(&self, t: usize) -> usize {
        (self.hi(t) + 1 - self.lo(t)) * self.width()
    }
    fn max_len(&self) -> usize {
        (self.t_max - self.n + 1).min(self.n + 1) * self.width()
    }

    /// Fills `cur` (start of slot `t`) from `next` (start of slot `t + 1`),
    /// recording the chosen action per state when `choice` is given.
    fn step(
        &self,
        instance: &OfflineInstance,
        t: usize,
        next: &[u64],
        cur: &mut Vec<u64>,
        mut choice: Option<&mut [u8]>,
    ) {
        let (n, m, width) = (self.n, self.m, self.width());
        let (lo_t, hi_t) = (self.lo(t), self.hi(t));
        let (lo_n, hi_n) = (self.lo(t + 1), self.hi(t + 1));
        cur.clear();
        cur.resize(self.len(t), INF);
        let options: Vec<(SlotAction, u64)> = instance
            .send_options(t)
            .iter()
            .map(|&a| (a, instance.action_cost(t, a).expect("option admitted").0))
            .collect();
        for s in lo_t..=hi_t {
            for r in 0..=m.min(s) {
                let mut best = INF;
                let mut pick = NO_CHOICE;
                if s >= lo_n && s <= hi_n {
                    let v = next[(s - lo_n) * width + r];
                    if v < best {
                        best = v;
                        pick = action_code(SlotAction::Idle);
                    }
                }
                if s < n {
                    for &(a, cost) in &options {
                        let r2 = r + a.reduced() as usize;
                        if r2 > m {
                            continue;
                        }
                        let v = next[(s + 1 - lo_n) * width + r2];
                        if v == INF {
                            continue;
                        }
                        if v + cost < best {
                            best = v + cost;
                            pick = action_code(a);
                        }
                    }
                }
                let idx = (s - lo_t) * width + r;
                cur[idx] = best;
                if let Some(c) = choice.as_deref_mut() {
                    c[idx] = pick;
                }
            }
        }
    }
}

/// Minimum-cost schedule by backward dynamic programming.
///
/// Value layers are kept only at checkpoints every `stride` slots; the
/// forward reconstruction recomputes one segment at a time with its decision
/// bytes, so memory is about `(T/stride)·8 + stride` bytes per layer state.
pub fn solve_dp(instance: &OfflineInstance) -> Result<Schedule> {
    let task = instance.task();
    let (n, t_max, m) = (task.n_units, task.deadline, task.quality_budget);
    if n > t_max {
        return Err(Error::Infeasible(format!(
            "{n} units cannot fit in {t_max} slots"
        )));
    }
    if t_max == 0 {
        return Ok(Schedule::from_actions(instance, Vec::new()));
    }
    let layout = Layout { n, t_max, m };
    let stride = ((8 * t_max) as f64).sqrt().ceil().max(1.0) as usize;
    let checkpoints = t_max.div_ceil(stride) + 1;
    let need = layout
        .max_len()
        .saturating_mul(8 * (checkpoints + 2) + stride);
    if need > DP_MEMORY_LIMIT {
        return Err(Error::TooLarge(format!(
            "offline dp needs about {} MiB (limit {} MiB)",
            need >> 20,
            DP_MEMORY_LIMIT >> 20
        )));
    }

    // saved[k] holds the value layer at the start of slot k·stride
    let mut saved: Vec<Vec<u64>> = vec![Vec::new(); checkpoints];
    let mut next = vec![0u64; layout.len(t_max)]; // s = n at the deadline
    if t_max % stride == 0 {
        saved[t_max / stride] = next.clone();
    }
    let mut cur = Vec::with_capacity(layout.max_len());
    for t in (0..t_max).rev() {
        layout.step(instance, t, &next, &mut cur, None);
        std::mem::swap(&mut cur, &mut next);
        if t % stride == 0 {
            saved[t / stride] = next.clone();
        }
    }
    let optimum = next[0];
    if optimum == INF {
        return Err(Error::Infeasible("no feasible schedule".into()));
    }

    let mut actions = Vec::with_capacity(t_max);
    let (mut s, mut r) = (0usize, 0usize);
    let mut choice = vec![NO_CHOICE; stride * layout.max_len()];
    let mut seg_offsets = Vec::with_capacity(stride);
    for a in (0..t_max).step_by(stride) {
        let b = (a + stride).min(t_max);
        let mut layer = if b % stride == 0 {
            saved[b / stride].clone()
        } else {
            vec![0u64; layout.len(t_max)]
        };
        seg_offsets.clear();
        let mut off = 0;
        for t in a..b {
            seg_offsets.push(off);
            off += layout.len(t);
        }
        for t in (a..b).rev() {
            let o = seg_offsets[t - a];
            let c = &mut choice[o..o + layout.len(t)];
            layout.step(instance, t, &layer, &mut cur, Some(c));
            std::mem::swap(&mut cur, &mut layer);
        }
        for t in a..b {
            let idx = (s - layout.lo(t)) * layout.width() + r;
            let code = choice[seg_offsets[t - a] + idx];
            if code == NO_CHOICE {
                return Err(Error::invariant(format!(
                    "dp reconstruction left the band at slot {t}"
                )));
            }
            let act = action_from_code(code);
            s += act.sends() as usize;
            r += act.reduced() as usize;
            actions.push(act);
        }
    }
    let schedule = Schedule::from_actions(instance, actions);
    if schedule.total_cost.0 != optimum {
        return Err(Error::invariant(
            "reconstructed schedule cost differs from dp optimum",
        ));
    }
    Ok(schedule)
}

pub fn solve_bruteforce(instance: &OfflineInstance) -> Result<Schedule> {
    let task = instance.task();
    if task.deadline > BRUTEFORCE_MAX_SLOTS {
        return Err(Error::TooLarge(format!(
            "{} slots exceeds the enumeration limit of {BRUTEFORCE_MAX_SLOTS}",
            task.deadline
        )));
    }
    let mut path = Vec::with_capacity(task.deadline);
    let mut best: Option<(u64, Vec<SlotAction>)> = None;
    enumerate(instance, 0, 0, 0, 0, &mut path, &mut best);
    let (_, actions) = best.ok_or_else(|| Error::Infeasible("no feasible schedule".into()))?;
    Ok(Schedule::from_actions(instance, actions))
}

fn enumerate(
    instance: &OfflineInstance,
    slot: usize,
    sent: usize,
    reduced: usize,
    cost: u64,
    path: &mut Vec<SlotAction>,
    best: &mut Option<(u64, Vec<SlotAction>)>,
) {
    let task = instance.task();
    if task.n_units - sent > task.deadline - slot {
        return;
    }
    if slot == task.deadline {
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            *best = Some((cost, path.clone()));
        }
        return;
    }
    let mut candidates = vec![SlotAction::Idle];
    if sent < task.n_units {
        candidates.extend_from_slice(instance.send_options(slot));
    }
    for a in candidates {
        let r = reduced + a.reduced() as usize;
        if r > task.quality_budget {
            continue;
        }
        let c = instance.action_cost(slot, a).expect("admitted").0;
        path.push(a);
        enumerate(
            instance,
            slot + 1,
            sent + a.sends() as usize,
            r,
            cost + c,
            path,
            best,
        );
        path.pop();
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalityGap {
    pub gap: MicroCents,
    /// `online / offline`, defined as 1 when both are zero.
    pub ratio: f64,
}

pub fn lower_bound_gap(online_cost: MicroCents, offline_cost: MicroCents) -> Result<OptimalityGap> {
    let gap = online_cost.checked_sub(offline_cost).ok_or_else(|| {
        Error::invariant(format!(
            "online cost {online_cost} is below the offline optimum {offline_cost}"
        ))
    })?;
    let ratio = if offline_cost == MicroCents::ZERO {
        if online_cost == MicroCents::ZERO {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        online_cost.0 as f64 / offline_cost.0 as f64
    };
    Ok(OptimalityGap { gap, ratio })
}
