//! Reference models shared by the property tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use hpclease::config::{ArrivalLaw, PolicyChoice, QualitySection, ScenarioConfig};
use hpclease::env::{unit_prices, ArrivalBatch, PriceSample, SpectrumLevel};
use hpclease::queueing::{ConcentratorState, ServiceGrant};
use hpclease::MicroCents;
use rand::Rng;

#[derive(Clone, Debug)]
pub enum Op {
    Arrive(u32),
    Serve(u64),
    Tick,
}

pub fn random_op(rng: &mut impl Rng) -> Op {
    match rng.random_range(0..3) {
        0 => Op::Arrive(rng.random_range(0..20)),
        1 => Op::Serve(rng.random_range(0..25)),
        _ => Op::Tick,
    }
}

/// One stamp per packet, plus the virtual queue kept the long way round.
#[derive(Default)]
pub struct Reference {
    pub stamps: VecDeque<usize>,
    pub delays: BTreeMap<u64, u64>,
    pub z: f64,
    pub arrived: u64,
    pub served: u64,
}

impl Reference {
    pub fn arrive(&mut self, n: u32, now: usize) {
        for _ in 0..n {
            self.stamps.push_back(now);
        }
        self.arrived += n as u64;
    }

    pub fn serve(&mut self, cap: u64, now: usize, eps: f64) -> u64 {
        let was_backlogged = !self.stamps.is_empty();
        let mut done = 0;
        while done < cap {
            let Some(s) = self.stamps.pop_front() else {
                break;
            };
            *self.delays.entry((now - s) as u64).or_default() += 1;
            done += 1;
        }
        self.served += done;
        let mut z = self.z - done as f64;
        if was_backlogged {
            z += eps;
        }
        self.z = if z < 0.0 { 0.0 } else { z };
        done
    }
}

/// Replays `ops` on both the real queue and the reference, returning the
/// first disagreement. `eps` should be dyadic so float sums stay exact.
pub fn check_queue_ops(ops: &[Op], eps: f64) -> Result<(), String> {
    let mut st = ConcentratorState::new();
    let mut rf = Reference::default();
    let mut now = 0usize;
    let mut last_stamp = None;
    let fail = |what: &str, i: usize| Err(format!("op {i}: {what}"));
    for (i, o) in ops.iter().enumerate() {
        match *o {
            Op::Arrive(n) => {
                st.enqueue(ArrivalBatch {
                    packet_count: n,
                    slot_index: now,
                });
                rf.arrive(n, now);
            }
            Op::Serve(cap) => {
                let backlogged = st.q_len() > 0;
                let grant = ServiceGrant {
                    packets_served: cap,
                    via_hpc: false,
                    quality_reduced: false,
                };
                let served = st.serve(grant, now);
                st.advance_virtual(served, eps, backlogged);
                if served != rf.serve(cap, now, eps) || served > cap {
                    return fail("service count", i);
                }
            }
            Op::Tick => now += 1,
        }
        if st.z_len() < 0.0 {
            return fail("negative virtual queue", i);
        }
        if st.q_len() != st.ledger_len() || st.q_len() != rf.stamps.len() as u64 {
            return fail("backlog", i);
        }
        if st.enqueued_total() != rf.arrived
            || st.enqueued_total() != st.served_total() + st.q_len()
        {
            return fail("conservation", i);
        }
        if st.delivered().count() != st.served_total() {
            return fail("delay records", i);
        }
        if st.z_len() != rf.z || st.y() != st.q_len() as f64 + st.z_len() {
            return fail("virtual queue", i);
        }
        if let Some(s) = st.last_served_stamp() {
            if last_stamp.is_some_and(|prev| s < prev) {
                return fail("FIFO order", i);
            }
            last_stamp = Some(s);
        }
    }
    if st.delivered().histogram() != &rf.delays {
        return Err("delay histogram".into());
    }
    let total: u64 = rf.delays.iter().map(|(d, n)| d * n).sum();
    if st.delivered().sum() != total {
        return Err("delay sum".into());
    }
    Ok(())
}

pub fn random_slots(rng: &mut impl Rng, t: usize) -> (Vec<SpectrumLevel>, Vec<PriceSample>) {
    let levels = (0..t)
        .map(|_| SpectrumLevel::ALL[rng.random_range(0..3usize)])
        .collect();
    // a narrow price range makes ties common
    let prices = (0..t)
        .map(|_| unit_prices(MicroCents(rng.random_range(1..=4u64) * 100), 5, 0.5).unwrap())
        .collect();
    (levels, prices)
}

/// A random deadline-task scenario, or `None` when the draw is not a valid config.
pub fn random_task_config(rng: &mut impl Rng) -> Option<ScenarioConfig> {
    let horizon = rng.random_range(2..120usize);
    let cfg = ScenarioConfig {
        k_concentrators: rng.random_range(1..4),
        horizon,
        arrival_law: ArrivalLaw::Deterministic,
        unit_size: rng.random_range(2..8),
        reduced_fraction: rng.random_range(0.2..0.8),
        price_min_cents: 0.1,
        price_max_cents: rng.random_range(0.1..3.0),
        policy: PolicyChoice::Quality,
        quality: QualitySection {
            beta_c: rng.random_range(0.0..=1.0),
            budget_fraction: rng.random_range(0.0..0.9),
            delay_slack: rng.random_range(0..horizon),
        },
        ..ScenarioConfig::default()
    };
    cfg.validate().is_ok().then_some(cfg)
}
