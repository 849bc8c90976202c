use proptest::prelude::*;
use vecoffload_core::model::{
    bit_offload_delay, compute_delay, downlink_rate, pathloss_gain, sum_delay, upload_delay, uplink_rate, ComputeState,
    RadioParams, Task,
};

fn radio() -> impl Strategy<Value = RadioParams> {
    (1e-3..10.0f64, 1e5..1e8f64, 1e-15..1e-10f64, 1e-4..1.0f64, 0.0..1e-10f64, 0.0..1e-10f64).prop_map(
        |(p, w, n, a, iu, id)| RadioParams {
            tx_power_watts: p,
            bandwidth_hz: w,
            noise_watts: n,
            pathloss_const: a,
            interference_up_watts: iu,
            interference_down_watts: id,
        },
    )
}

fn task() -> impl Strategy<Value = Task> {
    (1e3..1e8f64, 0.0..2.0f64, 10.0..1e4f64).prop_map(|(x, a, w)| Task::new(x, a, w).unwrap())
}

fn compute() -> impl Strategy<Value = ComputeState> {
    (1e9..1e10f64, 0.05..1.0f64).prop_map(|(f, s)| ComputeState {
        max_cpu_hz: f,
        alloc_cpu_hz: f * s,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn sum_delay_is_input_times_bit_delay(r in radio(), t in task(), c in compute(), d in 1.0..1000.0f64, d2 in 1.0..1000.0f64) {
        let up = uplink_rate(&r, pathloss_gain(d, r.pathloss_const).unwrap());
        let down = download_rate_at(&r, d2);
        let s = sum_delay(&t, up, down, &c).unwrap();
        let u = bit_offload_delay(&t, up, down, &c).unwrap();
        let rel = (s - t.input_bits * u).abs() / s;
        prop_assert!(rel <= 1e-12, "relative error {rel}");
    }
}

fn download_rate_at(r: &RadioParams, d: f64) -> f64 {
    downlink_rate(r, pathloss_gain(d, r.pathloss_const).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn rate_grows_with_gain_and_power(r in radio(), g in 1e-12..1e-3f64, k in 1.0001..10.0f64) {
        let base = uplink_rate(&r, g);
        prop_assert!(uplink_rate(&r, g * k) > base);
        let louder = RadioParams { tx_power_watts: r.tx_power_watts * k, ..r };
        prop_assert!(uplink_rate(&louder, g) > base);
    }

    #[test]
    fn rate_falls_with_interference_and_distance(r in radio(), d in 1.0..500.0f64, k in 1.01..10.0f64, extra in 1e-13..1e-9f64) {
        let g = pathloss_gain(d, r.pathloss_const).unwrap();
        let base = uplink_rate(&r, g);
        let noisy = RadioParams { interference_up_watts: r.interference_up_watts + extra, ..r };
        prop_assert!(uplink_rate(&noisy, g) < base);
        let far = pathloss_gain(d * k, r.pathloss_const).unwrap();
        prop_assert!(far < g);
        prop_assert!(uplink_rate(&r, far) < base);
    }

    #[test]
    fn delays_scale_linearly_with_input(t in task(), c in compute(), up in 1e5..1e9f64, down in 1e5..1e9f64, k in 1..64u32) {
        let k = k as f64;
        let big = Task { input_bits: t.input_bits * k, ..t };
        let s = sum_delay(&t, up, down, &c).unwrap();
        let sb = sum_delay(&big, up, down, &c).unwrap();
        prop_assert!(((sb - k * s) / sb).abs() <= 1e-12);
        prop_assert_eq!(
            bit_offload_delay(&big, up, down, &c).unwrap(),
            bit_offload_delay(&t, up, down, &c).unwrap()
        );
    }

    #[test]
    fn faster_links_and_cpus_shorten_delay(t in task(), c in compute(), up in 1e5..1e9f64, k in 1.01..10.0f64) {
        prop_assert!(upload_delay(&t, up * k).unwrap() < upload_delay(&t, up).unwrap());
        let faster = ComputeState { alloc_cpu_hz: c.alloc_cpu_hz * k, max_cpu_hz: c.max_cpu_hz * k };
        prop_assert!(compute_delay(&t, &faster).unwrap() < compute_delay(&t, &c).unwrap());
    }
}
