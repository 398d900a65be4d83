use ledbat::controller::{ControllerConfig, DecreaseCause, DelaySample, LedbatController, Variant};
use proptest::prelude::*;

const TAU: f64 = 0.025;
/// Delays are multiples of 2^-20 s so sums and differences stay exact.
const QUANTUM: f64 = 1.0 / (1u64 << 20) as f64;

fn started(variant: Variant<f64>, w: f64, seed: u64) -> LedbatController<f64> {
    let mut c = LedbatController::new(ControllerConfig::new(TAU, variant), seed, 1).unwrap();
    c.start(Some(w));
    c
}

/// (one-way delay ticks, rtt ticks) per ack; ack times advance by 1 ms.
fn samples() -> impl Strategy<Value = Vec<(i64, u64)>> {
    prop::collection::vec((20_000i64..200_000, 50_000u64..150_000), 1..200)
}

fn feed(c: &mut LedbatController<f64>, xs: &[(i64, u64)], offset: i64) -> Vec<(f64, Option<DecreaseCause>)> {
    xs.iter()
        .enumerate()
        .map(|(k, &(d, r))| {
            let s = DelaySample::new((d + offset) as f64 * QUANTUM, k as f64 * 1e-3, r as f64 * QUANTUM);
            let ev = c.on_ack(s).unwrap();
            (c.cwnd(), ev.map(|e| e.cause))
        })
        .collect()
}

fn any_variant() -> impl Strategy<Value = Variant<f64>> {
    prop_oneof![
        Just(Variant::Plain),
        Just(Variant::RandomPacing),
        Just(Variant::SlowStart),
        (0.0f64..0.2).prop_map(|p| Variant::RandomDrop { p }),
        (0.05f64..0.95).prop_map(|beta| Variant::MultiplicativeDecrease { beta }),
    ]
}

proptest! {
    #[test]
    fn base_delay_is_running_minimum(xs in samples()) {
        let mut c = started(Variant::Plain, 10.0, 1);
        let mut min = f64::INFINITY;
        for (k, &(d, r)) in xs.iter().enumerate() {
            let before = c.state.base_delay;
            let owd = d as f64 * QUANTUM;
            c.on_ack(DelaySample::new(owd, k as f64, r as f64 * QUANTUM)).unwrap();
            min = min.min(owd);
            prop_assert_eq!(c.state.base_delay, min);
            if owd < before {
                prop_assert!(c.state.base_delay < before);
            } else {
                prop_assert_eq!(c.state.base_delay, before);
            }
        }
    }

    #[test]
    fn clock_offset_cancels(xs in samples(), offset in -1_000_000i64..1_000_000, v in any_variant(), seed in any::<u64>()) {
        let a = feed(&mut started(v, 5.0, seed), &xs, 0);
        let b = feed(&mut started(v, 5.0, seed), &xs, offset);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn target_is_a_fixed_point(w in 1.0f64..500.0, base in 1i64..100_000) {
        let tau_ticks = 26_214i64;
        let cfg = ControllerConfig::new(tau_ticks as f64 * QUANTUM, Variant::Plain);
        let mut c = LedbatController::new(cfg, 1, 1).unwrap();
        c.start(Some(w));
        c.on_ack(DelaySample::new(base as f64 * QUANTUM, 0.0, 0.1)).unwrap();
        let w0 = c.cwnd();
        for k in 1..50 {
            c.on_ack(DelaySample::new((base + tau_ticks) as f64 * QUANTUM, k as f64, 0.1)).unwrap();
            prop_assert_eq!(c.cwnd(), w0);
        }
    }

    #[test]
    fn window_moves_toward_target(w in 1.5f64..500.0, q in 0.0f64..0.2) {
        prop_assume!((q - TAU).abs() > 1e-6);
        let mut c = started(Variant::Plain, w, 1);
        c.state.base_delay = 0.1;
        c.on_ack(DelaySample::new(0.1 + q, 0.0, 0.1)).unwrap();
        if q < TAU {
            prop_assert!(c.cwnd() > w);
        } else {
            prop_assert!(c.cwnd() < w || c.cwnd() == 1.0);
        }
    }

    #[test]
    fn zero_drop_probability_matches_plain(xs in samples(), seed in any::<u64>()) {
        let plain = feed(&mut started(Variant::Plain, 3.0, seed), &xs, 0);
        let rd = feed(&mut started(Variant::RandomDrop { p: 0.0 }, 3.0, seed), &xs, 0);
        prop_assert_eq!(plain, rd);
    }

    #[test]
    fn md_respects_floor_and_guard(xs in samples(), beta in 0.05f64..0.95, w in 1.0f64..200.0) {
        let mut c = started(Variant::MultiplicativeDecrease { beta }, w, 1);
        let mut last: Option<f64> = None;
        for (k, &(d, r)) in xs.iter().enumerate() {
            let t = k as f64 * 1e-3;
            let rtt = r as f64 * QUANTUM;
            let ev = c.on_ack(DelaySample::new(d as f64 * QUANTUM, t, rtt)).unwrap();
            prop_assert!(c.cwnd() >= 1.0);
            if let Some(e) = ev {
                // The guard compares against the estimate current at the second drop.
                if let Some(t0) = last {
                    prop_assert!(e.time - t0 >= rtt, "two drops within {} s", e.time - t0);
                }
                last = Some(e.time);
            }
        }
    }

    #[test]
    fn identical_inputs_give_identical_outputs(xs in samples(), v in any_variant(), seed in any::<u64>()) {
        let mut a = started(v, 4.0, seed);
        let mut b = started(v, 4.0, seed);
        prop_assert_eq!(feed(&mut a, &xs, 0), feed(&mut b, &xs, 0));
        prop_assert_eq!(a.state.base_delay, b.state.base_delay);
        prop_assert_eq!(a.pacing_schedule(0.1, 10), b.pacing_schedule(0.1, 10));
    }

    #[test]
    fn pacing_offsets_sorted_within_round(n in 1usize..200, rtt in 0.001f64..1.0, seed in any::<u64>()) {
        let mut c = started(Variant::RandomPacing, 4.0, seed);
        let offs = c.pacing_schedule(rtt, n);
        prop_assert_eq!(offs.len(), n);
        prop_assert_eq!(offs[0], 0.0);
        prop_assert!(offs.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(offs[1..].iter().all(|&o| o > 0.0 && o <= rtt));
    }
}

#[test]
fn loss_halving_is_guarded_per_rtt() {
    let mut c = started(Variant::Plain, 20.0, 1);
    c.on_ack(DelaySample::new(0.05, 0.0, 0.08)).unwrap();
    let w = c.cwnd();
    assert!(c.on_loss(1.0).is_some());
    assert_eq!(c.cwnd(), w / 2.0);
    assert!(c.on_loss(1.001).is_none());
    assert!(c.on_loss(1.08).is_some());
}
