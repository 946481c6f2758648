//! Slot-level simulation of a cognitive-radio operator that serves smart-grid
//! traffic over free TV white space and leases high-priority channels (HPCs)
//! when free spectrum or queue state calls for it.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`] generates and serialises reproducible traces of spectrum
//!   availability, prices and arrivals.
//! - [`queueing`] holds the per-concentrator real and virtual queues.
//! - [`policy`] implements the leasing rules (Lyapunov threshold, price-average
//!   quality heuristic, static schedules).
//! - [`oracle`] solves the offline data-unit problem exactly.
//! - [`engine`] drives runs over a trace and collects [`engine::RunMetrics`].
//! - [`report`] aggregates sweeps and writes CSV/JSON/.dat output.
//! - [`cli`] is the command-line front end.

pub mod cli;
pub mod config;
pub mod currency;
pub mod engine;
pub mod env;
pub mod error;
pub mod oracle;
pub mod policy;
pub mod queueing;
pub mod report;

pub use config::ScenarioConfig;
pub use currency::MicroCents;
pub use error::{Error, Result};
