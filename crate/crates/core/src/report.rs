//! Sweep aggregation and output formats.
//!
//! Costs are reported in dollars per concentrator (the internal unit is the
//! micro-cent; one dollar is 10^8 micro-cents). CSV columns are fixed:
//!
//! ```text
//! axis_value,cost_mean,cost_std,queue_mean,delay_mean[,oracle_cost]
//! ```
//!
//! with every number printed to 8 decimals, i.e. micro-cent resolution for
//! dollar amounts. The oracle column is present only when at least one point
//! carries an oracle cost.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::RunSummary;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    VFactor,
    QualityBudget,
    DelayConstraint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    /// Mean over seeds of the per-concentrator accumulated cost, dollars.
    pub cost_mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub cost_std: f64,
    /// Mean final backlog per concentrator, packets.
    pub queue_mean: f64,
    /// Mean measured delay of delivered packets, slots.
    pub delay_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_cost: Option<f64>,
}

/// A single comparison line drawn next to a sweep (e.g. the Lyapunov run a
/// quality sweep was calibrated against).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLine {
    pub label: String,
    pub cost_mean: f64,
    pub delay_constraint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub seed_count: usize,
    pub points: Vec<SweepPoint>,
    /// Smallest V reaching the minimum mean cost among points with an empty
    /// final backlog.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_opt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceLine>,
}

/// Arithmetic mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn point(axis_value: f64, runs: &[RunSummary], oracle: Option<&[f64]>) -> SweepPoint {
    let costs: Vec<f64> = runs.iter().map(|r| r.cost_dollars).collect();
    let (cost_mean, cost_std) = mean_std(&costs);
    let avg = |f: fn(&RunSummary) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    SweepPoint {
        axis_value,
        cost_mean,
        cost_std,
        queue_mean: avg(|r| r.final_backlog),
        delay_mean: avg(|r| r.mean_delay),
        oracle_cost: oracle.map(|o| mean_std(o).0),
    }
}

fn seed_count(groups: impl Iterator<Item = usize>) -> Result<usize> {
    let counts: Vec<usize> = groups.collect();
    let n = counts.first().copied().unwrap_or(0);
    if counts.iter().any(|c| *c != n || *c == 0) {
        return Err(Error::config(
            "every sweep point needs the same nonzero number of seeds",
        ));
    }
    Ok(n)
}

/// Aggregates Lyapunov runs grouped by V.
pub fn v_sweep_summary(groups: &[(f64, Vec<RunSummary>)]) -> Result<SweepResult> {
    let mut values: Vec<f64> = groups.iter().map(|(v, _)| *v).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() < 2 {
        return Err(Error::config(
            "a V sweep needs at least two distinct V values",
        ));
    }
    let seeds = seed_count(groups.iter().map(|(_, r)| r.len()))?;
    let mut points: Vec<SweepPoint> = groups
        .iter()
        .map(|(v, runs)| point(*v, runs, None))
        .collect();
    points.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value));

    let v_opt = points
        .iter()
        .filter(|p| p.queue_mean == 0.0)
        .fold(None::<&SweepPoint>, |best, p| match best {
            Some(b) if b.cost_mean <= p.cost_mean => Some(b),
            _ => Some(p),
        })
        .map(|p| p.axis_value);

    Ok(SweepResult {
        axis: SweepAxis::VFactor,
        seed_count: seeds,
        points,
        v_opt,
        reference: None,
    })
}

/// One quality-budget cell: runs at a budget (percent of `N`) and, when the
/// oracle comparison ran, the matching offline costs in dollars per
/// concentrator, one per seed.
#[derive(Clone, Debug)]
pub struct QualityCell {
    pub budget_percent: f64,
    pub runs: Vec<RunSummary>,
    pub oracle_costs: Option<Vec<f64>>,
}

pub fn quality_sweep_summary(
    cells: &[QualityCell],
    require_oracle: bool,
    axis: SweepAxis,
) -> Result<SweepResult> {
    if require_oracle && cells.iter().any(|c| c.oracle_costs.is_none()) {
        return Err(Error::config(
            "oracle comparison requested but a cell has no oracle baseline",
        ));
    }
    let seeds = seed_count(cells.iter().map(|c| c.runs.len()))?;
    let mut points: Vec<SweepPoint> = cells
        .iter()
        .map(|c| point(c.budget_percent, &c.runs, c.oracle_costs.as_deref()))
        .collect();
    points.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value));
    Ok(SweepResult {
        axis,
        seed_count: seeds,
        points,
        v_opt: None,
        reference: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    /// Space-separated columns with a `#` comment header, for gnuplot.
    Dat,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Dat => "dat",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "dat" => Ok(OutputFormat::Dat),
            other => Err(Error::Usage(format!("unknown output format `{other}`"))),
        }
    }
}

fn columns(result: &SweepResult) -> Vec<&'static str> {
    let mut cols = vec![
        "axis_value",
        "cost_mean",
        "cost_std",
        "queue_mean",
        "delay_mean",
    ];
    if result.points.iter().any(|p| p.oracle_cost.is_some()) {
        cols.push("oracle_cost");
    }
    cols
}

fn row(p: &SweepPoint, with_oracle: bool) -> Vec<String> {
    let mut r: Vec<String> = [
        p.axis_value,
        p.cost_mean,
        p.cost_std,
        p.queue_mean,
        p.delay_mean,
    ]
    .iter()
    .map(|x| format!("{x:.8}"))
    .collect();
    if with_oracle {
        r.push(p.oracle_cost.map(|x| format!("{x:.8}")).unwrap_or_default());
    }
    r
}

pub fn emit(result: &SweepResult, format: OutputFormat) -> Result<Vec<u8>> {
    let cols = columns(result);
    let with_oracle = cols.len() == 6;
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&cols)?;
            for p in &result.points {
                w.write_record(row(p, with_oracle))?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
        OutputFormat::Json => {
            let mut out = serde_json::to_vec_pretty(result)?;
            out.push(b'\n');
            Ok(out)
        }
        OutputFormat::Dat => {
            let mut out = format!("# {}\n", cols.join(" "));
            for p in &result.points {
                let mut r = row(p, with_oracle);
                for cell in r.iter_mut().filter(|c| c.is_empty()) {
                    *cell = "NaN".into();
                }
                out.push_str(&r.join(" "));
                out.push('\n');
            }
            Ok(out.into_bytes())
        }
    }
}
