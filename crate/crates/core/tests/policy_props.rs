mod common;

use common::random_task_config;
use hpclease::config::{PolicyChoice, ScenarioConfig};
use hpclease::engine::run;
use hpclease::env::{generate_trace, SpectrumLevel};
use hpclease::policy::{
    lyapunov_decide, lyapunov_threshold, static_decide, Action, HpcDecision, StaticParams,
};
use hpclease::MicroCents;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn level() -> impl Strategy<Value = SpectrumLevel> {
    prop_oneof![
        Just(SpectrumLevel::None),
        Just(SpectrumLevel::Reduced),
        Just(SpectrumLevel::Full),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn scaling_v_against_price_keeps_the_decision(
        y in 0.0f64..1e7,
        v in 0.0f64..1e6,
        price in 1u64..10_000_000,
        shift in 0u32..10,
        lvl in level(),
        covers in any::<bool>(),
    ) {
        // powers of two keep the product exact
        let k = (1u64 << shift) as f64;
        let a = lyapunov_decide(y, lyapunov_threshold(v * k, MicroCents(price)), lvl, covers);
        let b = lyapunov_decide(y, lyapunov_threshold(v, MicroCents(price << shift)), lvl, covers);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn buying_is_monotone_in_backlog_and_price(
        y in 0.0f64..1e5,
        dy in 0.0f64..1e5,
        v in 0.0f64..1e4,
        price in 1u64..10_000_000,
        cheaper in 0u64..10_000_000,
        lvl in level(),
    ) {
        let thr = lyapunov_threshold(v, MicroCents(price));
        let buys = |y: f64, thr: f64| lyapunov_decide(y, thr, lvl, false).action() == Action::BuyFull;
        if buys(y, thr) {
            prop_assert!(buys(y + dy, thr));
            let lower = lyapunov_threshold(v, MicroCents(price.saturating_sub(cheaper).max(1)));
            prop_assert!(buys(y, lower));
        }
    }

    #[test]
    fn free_spectrum_is_never_paid_for(y in 0.0f64..1e6, thr in 0.0f64..1e6, lvl in level()) {
        let d = lyapunov_decide(y, thr, lvl, true);
        if lvl != SpectrumLevel::None {
            prop_assert!(!d.d_flag());
        }
        let full = lyapunov_decide(y, thr, SpectrumLevel::Full, false);
        prop_assert!(!full.d_flag());
    }

    #[test]
    fn static_schedule_buys_burst_len_per_period(period in 1usize..400, burst_seed in 0usize..400, periods in 1usize..5) {
        let burst = burst_seed % period + 1;
        let p = StaticParams::new(period, burst).unwrap();
        for k in 0..periods {
            let n = (k * period..(k + 1) * period).filter(|&t| static_decide(t, p)).count();
            prop_assert_eq!(n, burst);
            prop_assert!(static_decide(k * period + 1, p));
        }
    }
}

#[test]
fn d_flag_marks_exactly_the_purchases() {
    let actions = [
        Action::Idle,
        Action::FreeTransmit { reduced: false },
        Action::FreeTransmit { reduced: true },
        Action::BuyFull,
        Action::BuyReduced,
    ];
    for a in actions {
        let d = HpcDecision::new(a);
        assert_eq!(
            d.d_flag(),
            matches!(a, Action::BuyFull | Action::BuyReduced)
        );
        assert_eq!(d.transmits(), a != Action::Idle);
    }
    assert!(!HpcDecision::IDLE.d_flag());
}

#[test]
fn static_run_buys_two_hundred_slots_per_thousand() {
    // arrivals above capacity keep the queue busy every slot
    let cfg = ScenarioConfig {
        k_concentrators: 3,
        horizon: 3_000,
        mean_arrival: 12.0,
        policy: PolicyChoice::Static1,
        ..ScenarioConfig::default()
    };
    let trace = generate_trace(&cfg, 9).unwrap();
    let m = run(&cfg, &trace).unwrap();
    for track in &m.concentrators {
        for k in 0..3 {
            let bought = track.actions[k * 1000..(k + 1) * 1000]
                .iter()
                .filter(|a| a.is_purchase())
                .count();
            assert_eq!(bought, 200);
        }
    }
    let s2 = run(&cfg.with_policy(PolicyChoice::Static2), &trace).unwrap();
    assert!(s2.concentrators.iter().all(|c| c.purchases == 450));
}

#[test]
fn quality_meets_every_deadline_on_random_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    let mut i = 0u64;
    while checked < 1_000 {
        i += 1;
        let Some(cfg) = random_task_config(&mut rng) else {
            continue;
        };
        let trace = generate_trace(&cfg, i).unwrap();
        let m = run(&cfg, &trace).unwrap_or_else(|e| panic!("trace {i}: {e}"));
        let task = m.task.unwrap();
        for track in &m.concentrators {
            assert_eq!(
                (track.units_full + track.units_reduced) as usize,
                task.n_units
            );
            assert!(track.units_reduced as usize <= task.quality_budget);
            assert_eq!(track.final_backlog, 0);
            assert!(track.delays.max().unwrap_or(0) as usize <= task.deadline - task.n_units);
        }
        checked += 1;
    }
}
