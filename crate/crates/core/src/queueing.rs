//! Per-concentrator queues.
//!
//! A [`ConcentratorState`] keeps the real backlog `Q` as a FIFO ledger of
//! arrival stamps (run-length encoded by slot), the delay-aware virtual queue
//! `Z`, and the delays of every delivered packet. Recursions:
//!
//! ```text
//! Q(t+1) = max(Q(t) - R(t), 0) + A(t)
//! Z(t+1) = max(Z(t) - R(t) + ε·1[Q(t) > 0], 0)
//! ```
//!
//! where `Q(t)` in the indicator is the occupancy observed before service.

use std::collections::{BTreeMap, VecDeque};

use crate::env::ArrivalBatch;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ServiceGrant {
    pub packets_served: u64,
    pub via_hpc: bool,
    pub quality_reduced: bool,
}

/// Delivered-packet delays, in whole slots.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DelayStats {
    histogram: BTreeMap<u64, u64>,
    count: u64,
    sum: u64,
}

impl DelayStats {
    pub fn record(&mut self, delay: u64, packets: u64) {
        if packets == 0 {
            return;
        }
        *self.histogram.entry(delay).or_default() += packets;
        self.count += packets;
        self.sum += delay * packets;
    }

    pub fn merge(&mut self, other: &DelayStats) {
        for (d, n) in &other.histogram {
            self.record(*d, *n);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> u64 {
        self.sum
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum as f64 / self.count as f64)
    }

    pub fn max(&self) -> Option<u64> {
        self.histogram.keys().next_back().copied()
    }

    pub fn histogram(&self) -> &BTreeMap<u64, u64> {
        &self.histogram
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConcentratorState {
    q_len: u64,
    z_len: f64,
    // (arrival slot, packets still queued from that slot), oldest first
    ledger: VecDeque<(usize, u64)>,
    delivered: DelayStats,
    enqueued_total: u64,
    served_total: u64,
    last_served_stamp: Option<usize>,
}

impl ConcentratorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn q_len(&self) -> u64 {
        self.q_len
    }

    pub fn z_len(&self) -> f64 {
        self.z_len
    }

    /// Policy-visible congestion `Y = Q + Z`.
    pub fn y(&self) -> f64 {
        self.q_len as f64 + self.z_len
    }

    pub fn delivered(&self) -> &DelayStats {
        &self.delivered
    }

    pub fn enqueued_total(&self) -> u64 {
        self.enqueued_total
    }

    pub fn served_total(&self) -> u64 {
        self.served_total
    }

    /// Packets currently recorded in the ledger.
    pub fn ledger_len(&self) -> u64 {
        self.ledger.iter().map(|(_, n)| n).sum()
    }

    /// Arrival stamp of the most recently served packet.
    pub fn last_served_stamp(&self) -> Option<usize> {
        self.last_served_stamp
    }

    pub fn enqueue(&mut self, batch: ArrivalBatch) {
        let n = batch.packet_count as u64;
        if n == 0 {
            return;
        }
        match self.ledger.back_mut() {
            Some((slot, count)) if *slot == batch.slot_index => *count += n,
            _ => self.ledger.push_back((batch.slot_index, n)),
        }
        self.q_len += n;
        self.enqueued_total += n;
    }

    /// Removes up to `grant.packets_served` oldest packets and records their
    /// delays relative to `now`. Returns the number actually served.
    pub fn serve(&mut self, grant: ServiceGrant, now: usize) -> u64 {
        let mut remaining = grant.packets_served.min(self.q_len);
        let served = remaining;
        while remaining > 0 {
            let (slot, count) = self.ledger.front_mut().expect("ledger tracks q_len");
            let take = remaining.min(*count);
            self.delivered
                .record(now.saturating_sub(*slot) as u64, take);
            self.last_served_stamp = Some(*slot);
            *count -= take;
            remaining -= take;
            if *count == 0 {
                self.ledger.pop_front();
            }
        }
        self.q_len -= served;
        self.served_total += served;
        served
    }

    /// Applies the virtual-queue update; `backlogged` is whether `Q` was
    /// nonempty before this slot's service.
    pub fn advance_virtual(&mut self, served: u64, epsilon: f64, backlogged: bool) {
        self.z_len = virtual_step(self.z_len, served, epsilon, backlogged);
    }
}

pub fn virtual_step(z: f64, served: u64, epsilon: f64, backlogged: bool) -> f64 {
    let inc = if backlogged { epsilon } else { 0.0 };
    (z - served as f64 + inc).max(0.0)
}

/// Mean delay in slots implied by Little's law.
pub fn littles_law_delay(mean_queue_len: f64, mean_arrival_rate: f64) -> Result<f64> {
    if mean_arrival_rate.is_nan() || mean_arrival_rate <= 0.0 {
        return Err(Error::Domain(format!(
            "Little's law needs a positive arrival rate, got {mean_arrival_rate}"
        )));
    }
    Ok(mean_queue_len / mean_arrival_rate)
}
