//! Command-line front end.
//!
//! ```text
//! hpclease <run|compare|sweep-v|sweep-quality|oracle|gen-trace>
//!          (--config PATH | --preset NAME) [--set KEY=VALUE]...
//!          [--seed N] [--seeds COUNT] [--trace PATH]
//!          [-o PATH|-] [--format csv|json|dat]
//! ```
//!
//! Exit status: 0 success, 1 other failure, 2 usage, 3 configuration or
//! input format, 4 infeasible instance, 5 internal invariant violation.
//! Diagnostics go to stderr; stdout carries data only with `-o -`. Without
//! `-o`, outputs land in `$HPCLEASE_OUT_DIR` (default: the working
//! directory). Files are written to a temporary name and renamed into place.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{PolicyChoice, ScenarioConfig};
use crate::engine::{
    compare_with_oracle, default_lineup, run, run_matched, RunMetrics, RunSummary,
};
use crate::env::{config_hash, generate_trace, load_trace, save_trace, Trace};
use crate::error::{Error, Result};
use crate::oracle::{solve_dp, OfflineInstance, SlotAction};
use crate::policy::DeadlineTask;
use crate::report::{
    emit, quality_sweep_summary, v_sweep_summary, OutputFormat, QualityCell, ReferenceLine,
    SweepAxis,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HPCLEASE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "hpclease",
    version,
    about = "Simulate HPC leasing policies for smart-grid data concentrators"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (JSON)
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled scenario: paper, fig3 or fig4
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override a config key with a dotted path, e.g. lyapunov.v_factor=1e4
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; `-` writes to stdout
    #[arg(short, long, value_name = "PATH")]
    output: Option<String>,
    /// csv, json or dat
    #[arg(long, default_value = "csv")]
    format: String,
    /// First seed (defaults to the scenario's seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds, starting at --seed
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Replay a recorded trace instead of generating one
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Run the scenario's policy once and write its per-slot time series
    Run {
        #[command(flatten)]
        common: Common,
        /// lyapunov, quality, static-1 or static-2
        #[arg(long)]
        policy: Option<String>,
    },
    /// Run every policy on one trace, plus the offline optimum
    Compare {
        #[command(flatten)]
        common: Common,
        /// Skip the offline optimum
        #[arg(long)]
        no_oracle: bool,
    },
    /// Sweep the Lyapunov cost weight V
    SweepV {
        #[command(flatten)]
        common: Common,
        /// Comma-separated V values
        #[arg(
            long = "v",
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        v_values: Vec<f64>,
    },
    /// Sweep the quality budget (percent of units) or the delay slack
    SweepQuality {
        #[command(flatten)]
        common: Common,
        /// Comma-separated budgets in percent of the unit count
        #[arg(long, value_delimiter = ',', default_value = "0,10,20,30")]
        budgets: Vec<f64>,
        /// Delay slack in slots; derived from a Lyapunov run when absent
        #[arg(long, conflicts_with = "slacks")]
        slack: Option<usize>,
        /// Sweep these delay slacks at the scenario's budget instead
        #[arg(long, value_delimiter = ',')]
        slacks: Vec<usize>,
        /// Skip the offline optimum
        #[arg(long)]
        no_oracle: bool,
    },
    /// Solve the offline task for one concentrator
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        concentrator: usize,
        /// Units to send (N)
        #[arg(long)]
        units: Option<usize>,
        /// Deadline in slots (T)
        #[arg(long)]
        deadline: Option<usize>,
        /// Reduced-size allowance in units (M)
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Generate a trace and save it in the binary trace format
    GenTrace {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Run,
    Compare {
        oracle: bool,
    },
    SweepV {
        v_values: Vec<f64>,
    },
    SweepQuality {
        budgets: Vec<f64>,
        slack: Option<usize>,
        slacks: Vec<usize>,
        oracle: bool,
    },
    Oracle {
        concentrator: usize,
        units: Option<usize>,
        deadline: Option<usize>,
        budget: Option<usize>,
    },
    GenTrace,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Compare { .. } => "compare",
            Command::SweepV { .. } => "sweep-v",
            Command::SweepQuality { .. } => "sweep-quality",
            Command::Oracle { .. } => "oracle",
            Command::GenTrace => "gen-trace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Stdout,
    File(PathBuf),
    /// A generated file name inside the default output directory.
    Default,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommandSpec {
    pub command: Command,
    /// Scenario with every override applied, validated.
    pub config: ScenarioConfig,
    pub seeds: Vec<u64>,
    pub trace: Option<PathBuf>,
    pub output: Output,
    pub format: OutputFormat,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParsedArgs {
    /// `--help` or `--version`: print the text and exit 0.
    Help(String),
    Spec(Box<CommandSpec>),
}

pub fn parse_args<I, T>(argv: I) -> Result<ParsedArgs>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(ParsedArgs::Help(e.render().to_string()));
        }
        Err(e) => return Err(Error::Usage(e.render().to_string())),
    };
    let (common, command) = match cli.command {
        CliCommand::Run { mut common, policy } => {
            if let Some(p) = policy {
                common.overrides.push(format!("policy={p}"));
            }
            (common, Command::Run)
        }
        CliCommand::Compare { common, no_oracle } => {
            (common, Command::Compare { oracle: !no_oracle })
        }
        CliCommand::SweepV { common, v_values } => {
            let mut distinct = v_values.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() < 2 {
                return Err(Error::Usage(
                    "--v needs at least two distinct values".into(),
                ));
            }
            if v_values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Usage(
                    "--v values must be nonnegative numbers".into(),
                ));
            }
            (common, Command::SweepV { v_values })
        }
        CliCommand::SweepQuality {
            common,
            budgets,
            slack,
            slacks,
            no_oracle,
        } => {
            if budgets.is_empty() || budgets.iter().any(|b| !(0.0..100.0).contains(b)) {
                return Err(Error::Usage(
                    "--budgets must be percentages in [0, 100)".into(),
                ));
            }
            let cmd = Command::SweepQuality {
                budgets,
                slack,
                slacks,
                oracle: !no_oracle,
            };
            (common, cmd)
        }
        CliCommand::Oracle {
            common,
            concentrator,
            units,
            deadline,
            budget,
        } => {
            let cmd = Command::Oracle {
                concentrator,
                units,
                deadline,
                budget,
            };
            (common, cmd)
        }
        CliCommand::GenTrace { common } => (common, Command::GenTrace),
    };
    resolve(common, command).map(|s| ParsedArgs::Spec(Box::new(s)))
}

fn resolve(common: Common, command: Command) -> Result<CommandSpec> {
    let base = match (&common.config, &common.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => ScenarioConfig::preset(name)?,
        (None, None) => {
            return Err(Error::Usage(
                "one of --config or --preset is required".into(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(Error::Usage(
                "--config and --preset are mutually exclusive".into(),
            ))
        }
    };
    let config = apply_overrides(base, &common.overrides)?;
    config.validate()?;

    if common.seeds == 0 {
        return Err(Error::Usage("--seeds must be at least 1".into()));
    }
    let first = common.seed.unwrap_or(config.seed);
    let seeds: Vec<u64> = (0..common.seeds).map(|i| first.wrapping_add(i)).collect();
    let single = matches!(
        command,
        Command::Run | Command::Compare { .. } | Command::Oracle { .. } | Command::GenTrace
    );
    if single && seeds.len() > 1 {
        return Err(Error::Usage(format!(
            "`{}` takes a single seed",
            command.name()
        )));
    }
    if common.trace.is_some() && (seeds.len() > 1 || command == Command::GenTrace) {
        return Err(Error::Usage(format!(
            "--trace cannot be combined with {}",
            if seeds.len() > 1 {
                "--seeds"
            } else {
                "gen-trace"
            }
        )));
    }
    let output = match common.output.as_deref() {
        Some("-") => Output::Stdout,
        Some(p) => Output::File(PathBuf::from(p)),
        None => Output::Default,
    };
    Ok(CommandSpec {
        command,
        config,
        seeds,
        trace: common.trace,
        output,
        format: common.format.parse()?,
    })
}

/// Applies `key=value` overrides with dotted keys. Values are read as JSON
/// when they parse as such and as plain strings otherwise.
pub fn apply_overrides(config: ScenarioConfig, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut tree = serde_json::to_value(&config)?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("override `{item}` is not KEY=VALUE")))?;
        let node = key
            .split('.')
            .try_fold(&mut tree, |node, part| node.get_mut(part))
            .ok_or_else(|| Error::Usage(format!("unknown config key `{key}`")))?;
        *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    }
    serde_json::from_value(tree).map_err(|e| Error::Config(format!("after overrides: {e}")))
}

/// Parses and executes; returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_args(argv) {
        Ok(ParsedArgs::Help(text)) => {
            print!("{text}");
            0
        }
        Ok(ParsedArgs::Spec(spec)) => execute(&spec),
        Err(Error::Usage(msg)) => {
            eprint!("{msg}");
            if !msg.ends_with('\n') {
                eprintln!();
            }
            2
        }
        Err(e) => report_error(&e),
    }
}

pub fn execute(spec: &CommandSpec) -> i32 {
    match dispatch(spec) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> i32 {
    eprintln!("hpclease: {e}");
    e.exit_code()
}

fn dispatch(spec: &CommandSpec) -> Result<()> {
    match &spec.command {
        Command::Run => cmd_run(spec),
        Command::Compare { oracle } => cmd_compare(spec, *oracle),
        Command::SweepV { v_values } => cmd_sweep_v(spec, v_values),
        Command::SweepQuality {
            budgets,
            slack,
            slacks,
            oracle,
        } => cmd_sweep_quality(spec, budgets, *slack, slacks, *oracle),
        Command::Oracle {
            concentrator,
            units,
            deadline,
            budget,
        } => cmd_oracle(spec, *concentrator, *units, *deadline, *budget),
        Command::GenTrace => cmd_gen_trace(spec),
    }
}

fn obtain_trace(spec: &CommandSpec, seed: u64) -> Result<Trace> {
    match &spec.trace {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
            let trace = load_trace(&bytes)?;
            if trace.config_hash() != config_hash(&spec.config) {
                eprintln!(
                    "hpclease: warning: {} was generated from a different scenario",
                    path.display()
                );
            }
            Ok(trace)
        }
        None => generate_trace(&spec.config, seed),
    }
}

fn write_output(spec: &CommandSpec, default_name: &str, bytes: &[u8]) -> Result<()> {
    let path = match &spec.output {
        Output::Stdout => {
            let mut out = std::io::stdout().lock();
            return match out.write_all(bytes).and_then(|()| out.flush()) {
                // a closed pipe (e.g. `| head`) is not an error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            };
        }
        Output::File(p) => p.clone(),
        Output::Default => {
            let dir = std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            dir.join(default_name)
        }
    };
    write_atomic(&path, bytes)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn file_name(spec: &CommandSpec, ext: &str) -> String {
    format!("{}-seed{}.{ext}", spec.command.name(), spec.seeds[0])
}

/// CSV text to the space-separated `.dat` layout.
fn csv_to_dat(csv: &[u8]) -> Vec<u8> {
    let text = String::from_utf8_lossy(csv);
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str("# ");
        }
        let cells: Vec<&str> = line
            .split(',')
            .map(|c| if c.is_empty() { "NaN" } else { c })
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

fn describe(summary: &RunSummary) -> String {
    format!(
        "{} seed {}: cost {:.6}$ per concentrator, final backlog {:.2}, mean delay {:.3} slots",
        summary.policy,
        summary.seed,
        summary.cost_dollars,
        summary.final_backlog,
        summary.mean_delay
    )
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a ScenarioConfig,
    summary: RunSummary,
    littles_delay: Option<f64>,
}

fn cmd_run(spec: &CommandSpec) -> Result<()> {
    let trace = obtain_trace(spec, spec.seeds[0])?;
    let metrics = run(&spec.config, &trace)?;
    let summary = metrics.summary();
    eprintln!("{}", describe(&summary));
    let bytes = match spec.format {
        OutputFormat::Csv => metrics.to_csv()?,
        OutputFormat::Dat => csv_to_dat(&metrics.to_csv()?),
        OutputFormat::Json => {
            let report = RunReport {
                config: &spec.config,
                summary,
                littles_delay: metrics.littles_delay().ok(),
            };
            let mut b = serde_json::to_vec_pretty(&report)?;
            b.push(b'\n');
            b
        }
    };
    write_output(spec, &file_name(spec, spec.format.extension()), &bytes)
}

/// One line of the `compare` table. Fields the oracle does not produce are
/// left empty.
#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub policy: String,
    pub cost_dollars: f64,
    pub final_backlog: Option<f64>,
    pub mean_delay: Option<f64>,
    pub purchases: Option<u64>,
    pub units_reduced: Option<u64>,
}

impl CompareRow {
    fn from_metrics(m: &RunMetrics) -> Self {
        let s = m.summary();
        CompareRow {
            policy: s.policy,
            cost_dollars: s.cost_dollars,
            final_backlog: Some(s.final_backlog),
            mean_delay: Some(s.mean_delay),
            purchases: Some(s.purchases),
            units_reduced: Some(s.units_reduced),
        }
    }
}

fn compare_csv(rows: &[CompareRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "policy",
        "cost_dollars",
        "final_backlog",
        "mean_delay",
        "purchases",
        "units_reduced",
    ])?;
    let f = |x: Option<f64>| x.map(|v| format!("{v:.8}")).unwrap_or_default();
    let u = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.policy.clone(),
            format!("{:.8}", r.cost_dollars),
            f(r.final_backlog),
            f(r.mean_delay),
            u(r.purchases),
            u(r.units_reduced),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn cmd_compare(spec: &CommandSpec, with_oracle: bool) -> Result<()> {
    let trace = obtain_trace(spec, spec.seeds[0])?;
    let configs: Vec<ScenarioConfig> = default_lineup()
        .iter()
        .map(|p| spec.config.with_policy(*p))
        .collect();
    let metrics = run_matched(&configs, &trace)?;
    let mut rows: Vec<CompareRow> = metrics.iter().map(CompareRow::from_metrics).collect();
    for m in &metrics {
        eprintln!("{}", describe(&m.summary()));
    }
    if with_oracle {
        let (cfg, quality) = configs
            .iter()
            .zip(&metrics)
            .find(|(c, _)| c.policy == PolicyChoice::Quality)
            .expect("lineup includes the quality policy");
        // fails with an invariant violation if any concentrator beats the optimum
        let cmp = compare_with_oracle(cfg, &trace, quality)?;
        let k = quality.k() as f64;
        eprintln!(
            "oracle: {:.6}$ per concentrator (quality heuristic {:.6}$)",
            cmp.offline_total().as_dollars() / k,
            cmp.online_total().as_dollars() / k
        );
        rows.push(CompareRow {
            policy: "oracle".into(),
            cost_dollars: cmp.offline_total().as_dollars() / k,
            final_backlog: Some(0.0),
            mean_delay: None,
            purchases: None,
            units_reduced: None,
        });
    }
    let bytes = match spec.format {
        OutputFormat::Csv => compare_csv(&rows)?,
        OutputFormat::Dat => csv_to_dat(&compare_csv(&rows)?),
        OutputFormat::Json => {
            let mut b = serde_json::to_vec_pretty(&rows)?;
            b.push(b'\n');
            b
        }
    };
    write_output(spec, &file_name(spec, spec.format.extension()), &bytes)
}

fn traces(spec: &CommandSpec) -> Result<Vec<Trace>> {
    spec.seeds
        .par_iter()
        .map(|s| obtain_trace(spec, *s))
        .collect()
}

fn cmd_sweep_v(spec: &CommandSpec, v_values: &[f64]) -> Result<()> {
    let traces = traces(spec)?;
    let base = spec.config.with_policy(PolicyChoice::Lyapunov);
    let groups = v_values
        .par_iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.lyapunov.v_factor = *v;
            let runs = traces
                .iter()
                .map(|t| run(&cfg, t).map(|m| m.summary()))
                .collect::<Result<Vec<_>>>()?;
            Ok((*v, runs))
        })
        .collect::<Result<Vec<_>>>()?;
    let result = v_sweep_summary(&groups)?;
    match result.v_opt {
        Some(v) => eprintln!("V with minimal cost and empty final queue: {v}"),
        None => eprintln!("no V in the grid ends with an empty queue"),
    }
    let bytes = emit(&result, spec.format)?;
    write_output(spec, &file_name(spec, spec.format.extension()), &bytes)
}

/// Delay slack matched to a Lyapunov run: the Little's-law mean delay,
/// rounded, less the one-slot service boundary that queue-mode delays include.
pub fn matched_slack(littles_delay: f64) -> usize {
    (littles_delay.round() as i64 - 1).max(0) as usize
}

fn quality_cell(
    cfg: &ScenarioConfig,
    traces: &[Trace],
    axis_value: f64,
    with_oracle: bool,
) -> Result<QualityCell> {
    let mut runs = Vec::with_capacity(traces.len());
    let mut oracle = with_oracle.then(Vec::new);
    for trace in traces {
        let m = run(cfg, trace)?;
        if let Some(costs) = oracle.as_mut() {
            let cmp = compare_with_oracle(cfg, trace, &m)?;
            costs.push(cmp.offline_total().as_dollars() / m.k() as f64);
        }
        runs.push(m.summary());
    }
    Ok(QualityCell {
        budget_percent: axis_value,
        runs,
        oracle_costs: oracle,
    })
}

fn cmd_sweep_quality(
    spec: &CommandSpec,
    budgets: &[f64],
    slack: Option<usize>,
    slacks: &[usize],
    with_oracle: bool,
) -> Result<()> {
    let traces = traces(spec)?;
    let quality = spec.config.with_policy(PolicyChoice::Quality);

    if !slacks.is_empty() {
        let cells = slacks
            .par_iter()
            .map(|d| {
                let mut cfg = quality.clone();
                cfg.quality.delay_slack = *d;
                cfg.validate()?;
                quality_cell(&cfg, &traces, *d as f64, with_oracle)
            })
            .collect::<Result<Vec<_>>>()?;
        let result = quality_sweep_summary(&cells, with_oracle, SweepAxis::DelayConstraint)?;
        let bytes = emit(&result, spec.format)?;
        return write_output(spec, &file_name(spec, spec.format.extension()), &bytes);
    }

    let mut reference = None;
    let slack = match slack {
        Some(d) => d,
        None => {
            let lyap = spec.config.with_policy(PolicyChoice::Lyapunov);
            let runs = traces
                .par_iter()
                .map(|t| run(&lyap, t))
                .collect::<Result<Vec<_>>>()?;
            let delays = runs
                .iter()
                .map(|m| m.littles_delay())
                .collect::<Result<Vec<_>>>()?;
            let d = delays.iter().sum::<f64>() / delays.len() as f64;
            let slack = matched_slack(d);
            let cost = runs.iter().map(|m| m.mean_cost_dollars()).sum::<f64>() / runs.len() as f64;
            eprintln!(
                "Lyapunov at V={}: mean delay {d:.3} slots, cost {cost:.6}$; slack {slack}",
                lyap.lyapunov.v_factor
            );
            reference = Some(ReferenceLine {
                label: "lyapunov".into(),
                cost_mean: cost,
                delay_constraint: slack as f64,
            });
            slack
        }
    };
    let cells = budgets
        .par_iter()
        .map(|b| {
            let mut cfg = quality.clone();
            cfg.quality.delay_slack = slack;
            cfg.quality.budget_fraction = b / 100.0;
            cfg.validate()?;
            quality_cell(&cfg, &traces, *b, with_oracle)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut result = quality_sweep_summary(&cells, with_oracle, SweepAxis::QualityBudget)?;
    result.reference = reference;
    let bytes = emit(&result, spec.format)?;
    write_output(spec, &file_name(spec, spec.format.extension()), &bytes)
}

#[derive(Serialize)]
struct OracleReport<'a> {
    seed: u64,
    concentrator: usize,
    task: DeadlineTask,
    total_cost_microcents: u64,
    total_cost_dollars: f64,
    reduced_count: usize,
    actions: &'a [SlotAction],
}

fn cmd_oracle(
    spec: &CommandSpec,
    concentrator: usize,
    units: Option<usize>,
    deadline: Option<usize>,
    budget: Option<usize>,
) -> Result<()> {
    let base = DeadlineTask::from_config(&spec.config)?;
    let task = DeadlineTask::new(
        units.unwrap_or(base.n_units),
        deadline.unwrap_or(base.deadline),
        budget.unwrap_or(base.quality_budget),
    )?;
    let trace = obtain_trace(spec, spec.seeds[0])?;
    let instance = OfflineInstance::from_trace(
        &trace,
        concentrator,
        task,
        spec.config.unit_size,
        spec.config.reduced_fraction,
    )?;
    let schedule = solve_dp(&instance)?;
    schedule.validate(&instance)?;
    eprintln!(
        "offline optimum: {} for {} units in {} slots, {} of {} reduced",
        schedule.total_cost,
        task.n_units,
        task.deadline,
        schedule.reduced_count,
        task.quality_budget
    );
    let bytes = match spec.format {
        OutputFormat::Json => {
            let report = OracleReport {
                seed: trace.seed(),
                concentrator,
                task,
                total_cost_microcents: schedule.total_cost.0,
                total_cost_dollars: schedule.total_cost.as_dollars(),
                reduced_count: schedule.reduced_count,
                actions: &schedule.actions,
            };
            let mut b = serde_json::to_vec_pretty(&report)?;
            b.push(b'\n');
            b
        }
        fmt => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["slot", "level", "action", "cost_cents"])?;
            for (t, a) in schedule.actions.iter().enumerate() {
                let cost = instance.action_cost(t, *a).unwrap_or_default();
                let level = serde_json::to_value(instance.levels()[t])?;
                let action = serde_json::to_value(a)?;
                w.write_record([
                    t.to_string(),
                    level.as_str().unwrap_or_default().to_string(),
                    action.as_str().unwrap_or_default().to_string(),
                    format!("{:.6}", cost.as_cents()),
                ])?;
            }
            let csv = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            if fmt == OutputFormat::Dat {
                csv_to_dat(&csv)
            } else {
                csv
            }
        }
    };
    write_output(spec, &file_name(spec, spec.format.extension()), &bytes)
}

fn cmd_gen_trace(spec: &CommandSpec) -> Result<()> {
    let trace = generate_trace(&spec.config, spec.seeds[0])?;
    let bytes = save_trace(&trace);
    eprintln!(
        "trace: {} slots x {} concentrators, seed {}",
        trace.horizon(),
        trace.k_concentrators(),
        trace.seed()
    );
    write_output(spec, &format!("trace-seed{}.hpct", spec.seeds[0]), &bytes)
}
