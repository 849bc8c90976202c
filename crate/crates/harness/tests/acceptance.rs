//! Acceptance suite. Runs every criterion at its stated tolerance, prints
//! one PASS/FAIL line per criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rayon::prelude::*;
use vecoffload::config::{ExperimentConfig, PlotToggles, PolicyGroup, PolicySpec};
use vecoffload::runner::{run_seed, OracleReference, RunRecord};
use vecoffload::{emit_outputs, run_experiment};
use vecoffload_core::env::{
    DelayModel, Environment, ScenarioConfig, TaskModel, ThresholdRule, TABLE1_EPOCH_LEN,
};
use vecoffload_core::metrics::{
    check_periodic_log_bound, check_ucb_pull_bound, sublinearity_fit, PeriodicScenarioParams,
};
use vecoffload_core::model::{
    bit_offload_delay, compute_delay, downlink_rate, pathloss_gain, sum_delay, uplink_rate, ComputeState, RadioParams,
    Task,
};
use vecoffload_core::policy::{IndexPolicy, IndexVariant, NormalizationThresholds, PolicyKind};
use vecoffload_core::{stats, ArmId};

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn spec(kind: PolicyKind, beta0: f64, thresholds: ThresholdRule) -> PolicySpec {
    PolicySpec {
        label: kind.name().to_string(),
        kind,
        beta0,
        thresholds,
        zero_occurrence: false,
        group: PolicyGroup::Main,
    }
}

fn experiment(scenario: ScenarioConfig, seeds: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_scenario(scenario, &[], (0..seeds).collect());
    c.plots = PlotToggles::NONE;
    c
}

/// Runs one policy over all seeds of `config` and reduces each run with `f`.
fn sweep<T: Send>(config: &ExperimentConfig, spec: &PolicySpec, f: impl Fn(RunRecord) -> T + Sync) -> Vec<T> {
    let reference = OracleReference::new(config).expect("oracle reference");
    config
        .seeds
        .par_iter()
        .map(|&s| f(run_seed(config, spec, s, &reference).expect("run")))
        .collect()
}

/// Final regrets per policy, then the last-200 window delays of ALTO and
/// of the oracle per seed.
type SyntheticRuns = (Vec<(&'static str, Vec<f64>)>, Vec<Vec<f64>>, Vec<Vec<f64>>);

fn synthetic_runs() -> SyntheticRuns {
    let scenario = ScenarioConfig::synthetic_table1();
    let cfg = experiment(scenario.clone(), 1000);
    let kinds = [PolicyKind::Alto, PolicyKind::AdaUcb, PolicyKind::Vucb, PolicyKind::Ucb];
    let last200 = |r: &RunRecord| -> Vec<f64> {
        (1..=3)
            .map(|b| {
                let end = b * TABLE1_EPOCH_LEN;
                r.window_delay(end - 199, end)
            })
            .collect()
    };
    let mut finals = Vec::new();
    let mut alto_windows = Vec::new();
    for kind in kinds {
        let out = sweep(&cfg, &spec(kind, scenario.beta0, scenario.thresholds), |r| {
            (r.trace.final_regret(), last200(&r))
        });
        if kind == PolicyKind::Alto {
            alto_windows = out.iter().map(|o| o.1.clone()).collect();
        }
        finals.push((kind.name(), out.into_iter().map(|o| o.0).collect()));
    }
    let oracle_windows = sweep(&cfg, &spec(PolicyKind::Oracle, scenario.beta0, scenario.thresholds), |r| last200(&r));
    (finals, alto_windows, oracle_windows)
}

fn criterion_1(finals: &[(&'static str, Vec<f64>)]) -> Outcome {
    let m: Vec<f64> = finals.iter().map(|(_, v)| stats::mean(v)).collect();
    let se: Vec<f64> = finals.iter().map(|(_, v)| stats::std_error(v)).collect();
    let ordered = m[0] < m[1] && m[1] < m[2] && m[2] < m[3];
    let ratio = m[0] / m[3];
    let detail = finals
        .iter()
        .zip(m.iter().zip(&se))
        .map(|((n, v), (m, se))| format!("{n}={m:.3}±{se:.3}(n={})", v.len()))
        .collect::<Vec<_>>()
        .join(" ");
    // Runs share seeds, so consecutive policies are compared pairwise.
    let paired = finals
        .windows(2)
        .map(|w| {
            let d: Vec<f64> = w[0].1.iter().zip(&w[1].1).map(|(a, b)| a - b).collect();
            format!("{}-{}={:.3}±{:.3}", w[0].0, w[1].0, stats::mean(&d), stats::std_error(&d))
        })
        .collect::<Vec<_>>()
        .join(" ");
    Outcome {
        name: "baseline ordering alto < adaucb < vucb < ucb, alto <= 0.5 ucb",
        pass: ordered && ratio <= 0.5,
        detail: format!("{detail}; paired {paired}; alto/ucb={ratio:.3}"),
    }
}

fn criterion_2(alto: &[Vec<f64>], oracle: &[Vec<f64>]) -> Outcome {
    let mut pass = alto.len() >= 50;
    let mut parts = Vec::new();
    for b in 0..3 {
        let a = stats::mean(&alto.iter().map(|w| w[b]).collect::<Vec<_>>());
        let o = stats::mean(&oracle.iter().map(|w| w[b]).collect::<Vec<_>>());
        let rel = (a - o).abs() / o;
        pass &= rel <= 0.15;
        parts.push(format!("epoch {}: alto={a:.4} oracle={o:.4} rel={rel:.3}", b + 1));
    }
    Outcome {
        name: "delay within 15% of oracle over the last 200 periods of each epoch",
        pass,
        detail: parts.join("; "),
    }
}

fn stationary6() -> ScenarioConfig {
    ScenarioConfig::stationary(vecoffload_core::env::standard_physical_arms(2..=7))
}

fn beta_runs() -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    let scenario = stationary6();
    let cfg = experiment(scenario.clone(), 500);
    [0.0, 0.5, 1.0, 2.0]
        .into_iter()
        .map(|b| {
            let runs = sweep(&cfg, &spec(PolicyKind::Alto, b, scenario.thresholds), |r| r.trace.cumulative);
            let finals = runs.iter().map(|c| *c.last().unwrap()).collect();
            let t_max = runs[0].len();
            let curve = (0..t_max).map(|i| runs.iter().map(|c| c[i]).sum::<f64>() / runs.len() as f64).collect();
            (b, finals, curve)
        })
        .collect()
}

fn criterion_3(curve: &[f64]) -> Outcome {
    let fit = sublinearity_fit(curve, 500, 3000).expect("fit");
    let ratio = |t: usize| curve[t - 1] / t as f64;
    let shrink = ratio(3000) / ratio(300);
    Outcome {
        name: "sublinear regret on the stationary six-arm scenario",
        pass: fit.fit.r_squared >= 0.9 && shrink <= 0.5,
        detail: format!(
            "ln-fit R^2={:.4} slope={:.3}; (R_3000/3000)/(R_300/300)={shrink:.3}",
            fit.fit.r_squared, fit.fit.slope
        ),
    }
}

fn criterion_4() -> Outcome {
    let (lo, hi) = (0.5e-6, 1.5e-6);
    let mut scenario = ScenarioConfig::stationary(vec![
        (ArmId(1), DelayModel::TwoPoint { low: lo, high: hi, p_high: 0.25 }),
        (ArmId(2), DelayModel::TwoPoint { low: lo, high: hi, p_high: 0.75 }),
    ]);
    scenario.task = TaskModel::Constant { bits: 0.6e6 };
    scenario.beta0 = 2.0;
    let cfg = experiment(scenario.clone(), 100);
    let horizon = scenario.horizon;
    let mu = |p: f64| lo + p * (hi - lo);
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in [PolicyKind::Ucb, PolicyKind::Alto] {
        let out = sweep(&cfg, &spec(kind, 2.0, scenario.thresholds), |r| {
            let pulls = r.pulls(1, horizon).get(&ArmId(2)).copied().unwrap_or(0) as f64;
            (pulls, r.trace.final_regret())
        });
        // u_m is the high value, which both arms draw.
        let delta = (mu(0.75) - mu(0.25)) / hi;
        let pulls: Vec<f64> = out.iter().map(|o| o.0).collect();
        let check = check_ucb_pull_bound(&pulls, delta, horizon as f64, 100).expect("bound check");
        pass &= check.pass && !check.vacuous;
        parts.push(format!(
            "{kind}: pulls={:.1} (CI upper {:.1}) bound={:.1}",
            check.observed.mean,
            check.observed.upper(),
            check.bound
        ));
    }
    Outcome {
        name: "suboptimal pulls below 8 ln T / delta^2 + 1 + pi^2/3",
        pass,
        detail: parts.join("; "),
    }
}

fn criterion_5() -> Outcome {
    let params = PeriodicScenarioParams {
        eps0: 0.1,
        eps1: 0.1,
        mu1: 1.0,
        mu2: 2.0,
        t1: 1,
        t2: 2,
    };
    let scenario = ScenarioConfig::periodic_two_sev(1.0, 2.0, 0.1, 0.1, 1, 2).unwrap();
    let cfg = experiment(scenario.clone(), 100);
    let horizon = scenario.horizon;
    let second = params.second_arrival();
    let out = sweep(&cfg, &spec(PolicyKind::Alto, 2.0, scenario.thresholds), |r| {
        let k2 = r.pulls(second, horizon).get(&ArmId(2)).copied().unwrap_or(0) as f64;
        (r.trace.cumulative, k2)
    });
    let (runs, k2): (Vec<Vec<f64>>, Vec<f64>) = out.into_iter().unzip();
    let report = check_periodic_log_bound(&scenario.kind, &params, &runs, &k2, horizon, 100).expect("bound");
    Outcome {
        name: "periodic-input regret within 2 mu2 eps0 ln T / gap + C",
        pass: report.pass(),
        detail: format!(
            "R_T={:.3} <= {:.3} + C={:.3}; fitted ln-coefficient {:.3} vs {:.3} (limit {:.3}); gap*k2={:.3}",
            report.mean_final_regret.mean,
            report.leading_term,
            report.fitted_constant,
            report.fit.slope,
            report.leading_coefficient,
            1.25 * report.leading_coefficient,
            report.gap_times_pulls
        ),
    }
}

fn index_run(config: &ScenarioConfig, seed: u64, policy: IndexPolicy) -> Vec<vecoffload_core::env::Observation> {
    let mut p = policy;
    Environment::from_config(config.clone(), seed).unwrap().run(&mut p).unwrap()
}

fn criterion_6() -> Outcome {
    let mut runner = TestRunner::new(PtConfig {
        cases: 32,
        failure_persistence: None,
        ..PtConfig::default()
    });
    let base = ScenarioConfig::synthetic_table1();
    let reduction_a = runner.run(&(any::<u64>(), 0.0..3.0f64), |(seed, beta0)| {
        let thr = NormalizationThresholds::new(1.0e6, 1.0e6).unwrap();
        let mut c = base.clone();
        c.thresholds = ThresholdRule::Explicit(thr);
        let alto = index_run(&c, seed, IndexPolicy::new(IndexVariant::Alto, beta0, thr).unwrap());
        let vucb = index_run(&c, seed, IndexPolicy::new(IndexVariant::Vucb, beta0, thr).unwrap());
        prop_assert!(alto.iter().all(|o| o.input_bits <= thr.lower));
        prop_assert_eq!(alto, vucb);
        Ok(())
    });
    let reduction_b = runner.run(&(any::<u64>(), 0.0..3.0f64), |(seed, beta0)| {
        let thr = NormalizationThresholds::new(0.24e6, 0.6e6).unwrap();
        for (a, b) in [(IndexVariant::Alto, IndexVariant::AdaUcb), (IndexVariant::Vucb, IndexVariant::Ucb)] {
            let x = index_run(&base, seed, IndexPolicy::new(a, beta0, thr).unwrap().with_zero_occurrence());
            let y = index_run(&base, seed, IndexPolicy::new(b, beta0, thr).unwrap());
            prop_assert_eq!(x, y);
        }
        Ok(())
    });
    Outcome {
        name: "exact reductions to VUCB, AdaUCB and UCB",
        pass: reduction_a.is_ok() && reduction_b.is_ok(),
        detail: format!(
            "(a) alto|x<=x-==vucb: {}; (b) t_n=0: alto==adaucb, vucb==ucb: {} (32 seeded traces each, T=3000)",
            reduction_a.err().map_or("identical".into(), |e| e.to_string()),
            reduction_b.err().map_or("identical".into(), |e| e.to_string())
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut runner = TestRunner::new(PtConfig {
        cases: 10_000,
        failure_persistence: None,
        ..PtConfig::default()
    });
    let draw = (
        (1e-3..10.0f64, 1e5..1e8f64, 1e-15..1e-10f64, 1e-4..1.0f64, 0.0..1e-10f64, 0.0..1e-10f64),
        (1e3..1e8f64, 0.0..2.0f64, 10.0..1e4f64),
        (1e9..1e10f64, 0.05..1.0f64),
        (1.0..1000.0f64, 1.01..10.0f64),
    );
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner.run(&draw, |((p, w, n, a, iu, id), (x, al, om), (f, s), (d, k))| {
        let r = RadioParams {
            tx_power_watts: p,
            bandwidth_hz: w,
            noise_watts: n,
            pathloss_const: a,
            interference_up_watts: iu,
            interference_down_watts: id,
        };
        let t = Task::new(x, al, om).unwrap();
        let c = ComputeState { max_cpu_hz: f, alloc_cpu_hz: f * s };
        let g = pathloss_gain(d, a).unwrap();
        let (up, down) = (uplink_rate(&r, g), downlink_rate(&r, g));
        let sd = sum_delay(&t, up, down, &c).unwrap();
        let rel = (sd - x * bit_offload_delay(&t, up, down, &c).unwrap()).abs() / sd;
        worst.set(worst.get().max(rel));
        prop_assert!(rel <= 1e-12);
        // Farther, noisier, weaker links are slower; faster CPUs are quicker.
        let g_far = pathloss_gain(d * k, a).unwrap();
        prop_assert!(g_far < g && uplink_rate(&r, g_far) < up);
        let louder = RadioParams { tx_power_watts: p * k, ..r };
        let noisier = RadioParams { interference_up_watts: iu + n, ..r };
        prop_assert!(uplink_rate(&louder, g) > up);
        prop_assert!(uplink_rate(&noisier, g) < up);
        let faster = ComputeState { max_cpu_hz: f * k, alloc_cpu_hz: f * s * k };
        prop_assert!(compute_delay(&t, &faster).unwrap() < compute_delay(&t, &c).unwrap());
        let bigger = Task { input_bits: x * k, ..t };
        prop_assert!(sum_delay(&bigger, up, down, &c).unwrap() > sd);
        Ok(())
    });
    Outcome {
        name: "sum delay equals input times bit delay; monotone model",
        pass: result.is_ok(),
        detail: match result {
            Ok(()) => format!("10000 draws, worst relative error {:.2e}", worst.get()),
            Err(e) => e.to_string(),
        },
    }
}

fn criterion_8(runs: &[(f64, Vec<f64>, Vec<f64>)]) -> Outcome {
    let m = |i: usize| stats::mean(&runs[i].1);
    let sd = |i: usize| stats::std_dev(&runs[i].1);
    let n = runs[1].1.len() as f64;
    let greedy_gap = m(0) >= 2.0 * m(1);
    let mut monotone = true;
    for i in 1..3 {
        let pooled = ((sd(i) * sd(i) + sd(i + 1) * sd(i + 1)) / n).sqrt();
        monotone &= m(i + 1) >= m(i) - pooled;
    }
    let detail = runs
        .iter()
        .enumerate()
        .map(|(i, (b, _, _))| format!("beta0={b}: {:.3}±{:.3}", m(i), sd(i) / n.sqrt()))
        .collect::<Vec<_>>()
        .join(" ");
    Outcome {
        name: "beta0 sweep: greedy at least 2x worse, nondecreasing over 0.5, 1, 2",
        pass: greedy_gap && monotone,
        detail: format!("{detail}; R(0)/R(0.5)={:.2}", m(0) / m(1)),
    }
}

fn criterion_9() -> Outcome {
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut pass = true;
    let mut sizes = Vec::new();
    for scenario in ["synthetic-table1", "bernoulli-arrivals"] {
        let bytes: Vec<Vec<u8>> = dirs
            .iter()
            .map(|d| {
                let mut cfg = ExperimentConfig::for_scenario(
                    ScenarioConfig::builtin(scenario).unwrap(),
                    &PolicyKind::ALL,
                    vec![3, 11, 42],
                );
                cfg.output_dir = d.path().join(scenario);
                cfg.plots = PlotToggles::NONE;
                let out = run_experiment(&cfg).unwrap();
                emit_outputs(&out, &cfg).unwrap();
                std::fs::read(cfg.output_dir.join("results.csv")).unwrap()
            })
            .collect();
        pass &= bytes[0] == bytes[1];
        sizes.push(format!("{scenario}: {} bytes", bytes[0].len()));
    }
    Outcome {
        name: "byte-identical results.csv across repeated runs",
        pass,
        detail: sizes.join(", "),
    }
}

fn bernoulli_check() -> Outcome {
    let scenario = ScenarioConfig::builtin("bernoulli-arrivals").unwrap();
    let cfg = experiment(scenario.clone(), 50);
    let delay = |kind| {
        let v = sweep(&cfg, &spec(kind, scenario.beta0, scenario.thresholds), |r| {
            r.window_delay(1, r.horizon())
        });
        stats::mean(&v)
    };
    let (alto, random) = (delay(PolicyKind::Alto), delay(PolicyKind::Random));
    Outcome {
        name: "random arrivals: alto delay <= random delay",
        pass: alto <= random,
        detail: format!("alto={alto:.4} random={random:.4} (50 seeds)"),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let (finals, alto_w, oracle_w) = synthetic_runs();
    let betas = beta_runs();
    let outcomes: Vec<(String, Outcome)> = vec![
        ("1".into(), criterion_1(&finals)),
        ("2".into(), criterion_2(&alto_w, &oracle_w)),
        ("3".into(), criterion_3(&betas[1].2)),
        ("4".into(), criterion_4()),
        ("5".into(), criterion_5()),
        ("6".into(), criterion_6()),
        ("7".into(), criterion_7()),
        ("8".into(), criterion_8(&betas)),
        ("9".into(), criterion_9()),
        ("note".into(), bernoulli_check()),
    ];
    let mut failed = 0;
    for (id, o) in &outcomes {
        let status = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("acceptance {id:>4}: {status}  {}  [{}]", o.name, o.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        outcomes.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
