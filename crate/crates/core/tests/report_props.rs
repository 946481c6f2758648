use hpclease::engine::RunSummary;
use hpclease::report::{
    emit, mean_std, quality_sweep_summary, v_sweep_summary, OutputFormat, QualityCell, SweepAxis,
    SweepResult,
};
use hpclease::MicroCents;
use proptest::prelude::*;

fn summary(seed: u64, cost: f64, backlog: f64, delay: f64) -> RunSummary {
    RunSummary {
        policy: "lyapunov".into(),
        seed,
        total_cost: MicroCents::ZERO,
        cost_dollars: cost,
        final_backlog: backlog,
        mean_delay: delay,
        time_avg_queue: 0.0,
        purchases: 0,
        units_reduced: 0,
    }
}

/// Welford's one-pass recurrence, as an independent check.
fn welford(xs: &[f64]) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for &x in xs {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    let sd = if n > 1.0 {
        (m2 / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12)
}

/// Per V value: (cost, final backlog, delay) for each seed.
type RawSweep = Vec<(f64, Vec<(f64, f64, f64)>)>;

fn groups() -> impl Strategy<Value = RawSweep> {
    (1usize..6, 2usize..8).prop_flat_map(|(seeds, points)| {
        prop::collection::vec(
            (
                0.0f64..1e6,
                prop::collection::vec(
                    (
                        0.0f64..500.0,
                        prop_oneof![Just(0.0), 0.0f64..50.0],
                        0.0f64..100.0,
                    ),
                    seeds,
                ),
            ),
            points,
        )
    })
}

fn to_result(raw: &RawSweep) -> Option<SweepResult> {
    let groups: Vec<(f64, Vec<RunSummary>)> = raw
        .iter()
        .map(|(v, runs)| {
            let runs = runs
                .iter()
                .enumerate()
                .map(|(s, (c, q, d))| summary(s as u64, *c, *q, *d))
                .collect();
            (*v, runs)
        })
        .collect();
    v_sweep_summary(&groups).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn mean_and_std_match_one_pass_reference(xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let (m, s) = mean_std(&xs);
        let (wm, ws) = welford(&xs);
        prop_assert!(close(m, wm) || (m - wm).abs() < 1e-6, "{m} vs {wm}");
        prop_assert!(close(s, ws) || (s - ws).abs() < 1e-6, "{s} vs {ws}");
    }

    #[test]
    fn sweep_points_aggregate_their_seeds(raw in groups()) {
        let Some(result) = to_result(&raw) else { return Ok(()); };
        prop_assert!(result.points.windows(2).all(|w| w[0].axis_value <= w[1].axis_value));
        for p in &result.points {
            let (_, runs) = raw.iter().find(|(v, _)| *v == p.axis_value).unwrap();
            let costs: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let (m, s) = welford(&costs);
            prop_assert!(close(p.cost_mean, m));
            prop_assert!(close(p.cost_std, s) || (p.cost_std - s).abs() < 1e-9);
            prop_assert!(close(p.queue_mean, welford(&runs.iter().map(|r| r.1).collect::<Vec<_>>()).0)
                || p.queue_mean.abs() < 1e-12);
        }
        // V° is the smallest V among the cheapest empty-queue points
        let best = result
            .points
            .iter()
            .filter(|p| p.queue_mean == 0.0)
            .map(|p| p.cost_mean)
            .fold(f64::INFINITY, f64::min);
        match result.v_opt {
            Some(v) => {
                let first = result.points.iter().find(|p| p.queue_mean == 0.0 && p.cost_mean == best).unwrap();
                prop_assert_eq!(v, first.axis_value);
            }
            None => prop_assert!(best.is_infinite()),
        }
    }

    #[test]
    fn csv_round_trips_through_a_parser(raw in groups()) {
        let Some(result) = to_result(&raw) else { return Ok(()); };
        let bytes = emit(&result, OutputFormat::Csv).unwrap();
        let mut rdr = csv::Reader::from_reader(bytes.as_slice());
        let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
        prop_assert_eq!(header, vec!["axis_value", "cost_mean", "cost_std", "queue_mean", "delay_mean"]);
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        prop_assert_eq!(rows.len(), result.points.len());
        for (row, p) in rows.iter().zip(&result.points) {
            let vals: Vec<f64> = row.iter().map(|c| c.parse().unwrap()).collect();
            let want = [p.axis_value, p.cost_mean, p.cost_std, p.queue_mean, p.delay_mean];
            for (got, want) in vals.iter().zip(want) {
                prop_assert!((got - want).abs() <= 5e-9 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn json_round_trips(raw in groups()) {
        let Some(result) = to_result(&raw) else { return Ok(()); };
        let bytes = emit(&result, OutputFormat::Json).unwrap();
        let back: SweepResult = serde_json::from_slice(&bytes).unwrap();
        prop_assert_eq!(back, result);
    }
}

#[test]
fn oracle_column_appears_only_with_oracle_costs() {
    let cell = |b: f64, oracle: Option<Vec<f64>>| QualityCell {
        budget_percent: b,
        runs: vec![
            summary(0, 10.0 - b / 10.0, 0.0, 5.0),
            summary(1, 11.0 - b / 10.0, 0.0, 5.0),
        ],
        oracle_costs: oracle,
    };
    let with = quality_sweep_summary(
        &[
            cell(0.0, Some(vec![9.0, 9.5])),
            cell(30.0, Some(vec![6.0, 7.0])),
        ],
        true,
        SweepAxis::QualityBudget,
    )
    .unwrap();
    let text = String::from_utf8(emit(&with, OutputFormat::Csv).unwrap()).unwrap();
    assert!(text.starts_with("axis_value,cost_mean,cost_std,queue_mean,delay_mean,oracle_cost\n"));
    assert_eq!(with.points[1].oracle_cost, Some(6.5));

    let without =
        quality_sweep_summary(&[cell(0.0, None)], false, SweepAxis::QualityBudget).unwrap();
    let dat = String::from_utf8(emit(&without, OutputFormat::Dat).unwrap()).unwrap();
    assert!(dat.starts_with("# axis_value cost_mean cost_std queue_mean delay_mean\n"));
}

#[test]
fn unequal_seed_counts_are_rejected() {
    let groups = vec![
        (1.0, vec![summary(0, 1.0, 0.0, 1.0)]),
        (
            2.0,
            vec![summary(0, 1.0, 0.0, 1.0), summary(1, 1.0, 0.0, 1.0)],
        ),
    ];
    assert!(v_sweep_summary(&groups).is_err());
}
