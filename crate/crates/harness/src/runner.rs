//! Seed sweeps over (policy, seed) cells.

use std::collections::BTreeMap;
use std::sync::Mutex;

use rayon::prelude::*;
use vecoffload_core::env::{build_schedule, threshold_from_quantiles, Epoch, EpochSchedule, Environment, ScenarioKind};
use vecoffload_core::metrics::{regret_trace, EpochOracle, MeanEstimator, RegretTrace};
use vecoffload_core::policy::{build_policy, PolicyKind, PolicyParams};
use vecoffload_core::{stats, ArmId, Period};

use crate::config::{ExperimentConfig, PolicyGroup, PolicySpec};
use crate::error::{HarnessError, Result};

/// Full-resolution outcome of one (policy, seed) cell.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub label: String,
    pub kind: PolicyKind,
    pub group: PolicyGroup,
    pub seed: u64,
    pub epoch: Vec<usize>,
    pub chosen: Vec<ArmId>,
    pub input_bits: Vec<f64>,
    pub d_sum: Vec<f64>,
    pub trace: RegretTrace,
    pub epochs: Vec<Epoch>,
}

impl RunRecord {
    pub fn horizon(&self) -> Period {
        self.trace.t.last().copied().unwrap_or(0)
    }

    /// Mean sum delay over periods `start..=end`.
    pub fn window_delay(&self, start: Period, end: Period) -> f64 {
        let lo = start.max(1) as usize - 1;
        let hi = (end as usize).min(self.d_sum.len());
        stats::mean(&self.d_sum[lo..hi])
    }

    /// Pulls of each arm over periods `start..=end`.
    pub fn pulls(&self, start: Period, end: Period) -> BTreeMap<ArmId, u64> {
        let lo = start.max(1) as usize - 1;
        let hi = (end as usize).min(self.chosen.len());
        let mut counts = BTreeMap::new();
        for a in &self.chosen[lo..hi] {
            *counts.entry(*a).or_insert(0) += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellFailure {
    pub label: String,
    pub seed: u64,
    pub diagnosis: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub scenario: String,
    /// Sorted by label, then seed.
    pub runs: Vec<RunRecord>,
    pub failures: Vec<CellFailure>,
}

/// Oracle references shared by every cell of an experiment. Scenarios with
/// a fixed schedule compute them once; random arrivals reuse the cached
/// per-model estimates across seeds.
pub struct OracleReference {
    estimator: Mutex<MeanEstimator>,
    fixed: Option<(EpochSchedule, Vec<EpochOracle>, BTreeMap<ArmId, f64>)>,
}

impl OracleReference {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let mut estimator = MeanEstimator::new(&config.scenario, config.oracle_samples, config.oracle_seed)?;
        let fixed = if matches!(config.scenario.kind, ScenarioKind::BernoulliArrivals { .. }) {
            None
        } else {
            let schedule = build_schedule(&config.scenario, 0)?;
            let oracles = estimator.epoch_oracles(&schedule)?;
            let means = estimator.arm_means(&schedule)?;
            Some((schedule, oracles, means))
        };
        Ok(Self {
            estimator: Mutex::new(estimator),
            fixed,
        })
    }

    pub fn for_seed(&self, config: &ExperimentConfig, seed: u64) -> Result<(EpochSchedule, Vec<EpochOracle>, BTreeMap<ArmId, f64>)> {
        if let Some(fixed) = &self.fixed {
            return Ok(fixed.clone());
        }
        let schedule = build_schedule(&config.scenario, seed)?;
        let mut est = self.estimator.lock().expect("estimator lock");
        let oracles = est.epoch_oracles(&schedule)?;
        let means = est.arm_means(&schedule)?;
        Ok((schedule, oracles, means))
    }
}

pub fn run_cell(
    config: &ExperimentConfig,
    spec: &PolicySpec,
    seed: u64,
    schedule: EpochSchedule,
    oracles: &[EpochOracle],
    means: &BTreeMap<ArmId, f64>,
) -> Result<RunRecord> {
    let mut probe = config.scenario.clone();
    probe.thresholds = spec.thresholds;
    let params = PolicyParams {
        beta0: spec.beta0,
        thresholds: threshold_from_quantiles(&probe)?,
        zero_occurrence: spec.zero_occurrence,
        seed,
        means: (spec.kind == PolicyKind::Oracle).then(|| means.clone()),
    };
    let mut policy = build_policy(spec.kind, &params)?;
    let epochs = schedule.epochs().to_vec();
    let mut env = Environment::new(config.scenario.clone(), schedule, seed)?;
    let obs = env.run(policy.as_mut())?;
    let trace = regret_trace(&obs, oracles)?;
    Ok(RunRecord {
        label: spec.label.clone(),
        kind: spec.kind,
        group: spec.group,
        seed,
        epoch: obs.iter().map(|o| o.epoch).collect(),
        chosen: obs.iter().map(|o| o.chosen).collect(),
        input_bits: obs.iter().map(|o| o.input_bits).collect(),
        d_sum: obs.iter().map(|o| o.d_sum).collect(),
        trace,
        epochs,
    })
}

/// One cell against shared oracle references.
pub fn run_seed(config: &ExperimentConfig, spec: &PolicySpec, seed: u64, reference: &OracleReference) -> Result<RunRecord> {
    let (schedule, oracles, means) = reference.for_seed(config, seed)?;
    run_cell(config, spec, seed, schedule, &oracles, &means)
}

/// Runs every (policy, seed) cell with a fresh environment and policy. A
/// failing cell is recorded and the remaining cells still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let reference = OracleReference::new(config)?;
    let cells: Vec<(&PolicySpec, u64)> = config
        .policies
        .iter()
        .flat_map(|p| config.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results: Vec<std::result::Result<RunRecord, CellFailure>> = cells
        .par_iter()
        .map(|&(spec, seed)| {
            run_seed(config, spec, seed, &reference)
                .map_err(|e| CellFailure {
                    label: spec.label.clone(),
                    seed,
                    diagnosis: e.to_string(),
                })
        })
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(f) => failures.push(f),
        }
    }
    runs.sort_by(|a, b| (&a.label, a.seed).cmp(&(&b.label, b.seed)));
    failures.sort_by(|a, b| (&a.label, a.seed).cmp(&(&b.label, b.seed)));
    Ok(ExperimentOutput {
        scenario: config.scenario.kind.name().to_string(),
        runs,
        failures,
    })
}

/// One recorded period of one run.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub t: Period,
    pub cum_regret: f64,
    pub cum_avg_delay: f64,
    pub chosen_arm: u32,
    pub x_t: f64,
}

pub fn is_recorded(t: Period, stride: Period, horizon: Period) -> bool {
    (t - 1).is_multiple_of(stride) || t == horizon
}

impl ExperimentOutput {
    pub fn rows(&self, stride: Period) -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for run in &self.runs {
            let horizon = run.horizon();
            for (i, &t) in run.trace.t.iter().enumerate() {
                if !is_recorded(t, stride, horizon) {
                    continue;
                }
                rows.push(ResultRow {
                    scenario: self.scenario.clone(),
                    policy: run.label.clone(),
                    seed: run.seed,
                    t,
                    cum_regret: run.trace.cumulative[i],
                    cum_avg_delay: run.trace.cumulative_avg_delay[i],
                    chosen_arm: run.chosen[i].0,
                    x_t: run.input_bits[i],
                });
            }
        }
        rows
    }

    pub fn runs_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.runs.iter().filter(move |r| r.label == label)
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.runs.iter().map(|r| r.label.clone()).collect();
        labels.dedup();
        labels
    }

    /// Mean and standard deviation across seeds of the delay averaged over
    /// each epoch. Scenarios whose epochs differ per seed use the whole
    /// horizon as a single window.
    pub fn epoch_delays(&self) -> Vec<EpochDelayRow> {
        let mut out = Vec::new();
        for label in self.labels() {
            let runs: Vec<&RunRecord> = self.runs_of(&label).collect();
            let shared = runs.windows(2).all(|w| w[0].epochs == w[1].epochs);
            let windows: Vec<(usize, Period, Period)> = if shared {
                runs[0].epochs.iter().map(|e| (e.index, e.start, e.end)).collect()
            } else {
                vec![(0, 1, runs[0].horizon())]
            };
            for (epoch, start, end) in windows {
                let v: Vec<f64> = runs.iter().map(|r| r.window_delay(start, end)).collect();
                out.push(EpochDelayRow {
                    policy: label.clone(),
                    epoch,
                    start,
                    end,
                    mean_delay: stats::mean(&v),
                    std_delay: stats::std_dev(&v),
                });
            }
        }
        out
    }

    /// Mean and standard deviation across seeds of the pulls of each arm.
    pub fn pull_table(&self) -> Vec<PullRow> {
        let mut out = Vec::new();
        for label in self.labels() {
            let per_run: Vec<BTreeMap<ArmId, u64>> =
                self.runs_of(&label).map(|r| r.pulls(1, r.horizon())).collect();
            let mut arms: Vec<ArmId> = per_run.iter().flat_map(|m| m.keys().copied()).collect();
            arms.sort_unstable();
            arms.dedup();
            for arm in arms {
                let v: Vec<f64> = per_run.iter().map(|m| m.get(&arm).copied().unwrap_or(0) as f64).collect();
                out.push(PullRow {
                    policy: label.clone(),
                    arm: arm.0,
                    mean_pulls: stats::mean(&v),
                    std_pulls: stats::std_dev(&v),
                });
            }
        }
        out
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.rows(u32::MAX))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochDelayRow {
    pub policy: String,
    pub epoch: usize,
    pub start: Period,
    pub end: Period,
    pub mean_delay: f64,
    pub std_delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullRow {
    pub policy: String,
    pub arm: u32,
    pub mean_pulls: f64,
    pub std_pulls: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: String,
    pub runs: usize,
    pub horizon: Period,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_avg_delay: f64,
    pub std_avg_delay: f64,
}

/// Final regret and average delay per policy, from the last row of each run.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut last: BTreeMap<(&str, u64), &ResultRow> = BTreeMap::new();
    for r in rows {
        let e = last.entry((r.policy.as_str(), r.seed)).or_insert(r);
        if r.t > e.t {
            *e = r;
        }
    }
    let mut by_policy: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for ((p, _), r) in last {
        by_policy.entry(p).or_default().push(r);
    }
    by_policy
        .into_iter()
        .map(|(policy, finals)| {
            let regret: Vec<f64> = finals.iter().map(|r| r.cum_regret).collect();
            let delay: Vec<f64> = finals.iter().map(|r| r.cum_avg_delay).collect();
            SummaryRow {
                scenario: finals[0].scenario.clone(),
                policy: policy.to_string(),
                runs: finals.len(),
                horizon: finals.iter().map(|r| r.t).max().unwrap_or(0),
                mean_regret: stats::mean(&regret),
                std_regret: stats::std_dev(&regret),
                mean_avg_delay: stats::mean(&delay),
                std_avg_delay: stats::std_dev(&delay),
            }
        })
        .collect()
}

/// Mean and standard deviation across runs of a per-period column, at the
/// periods recorded for every run of `policy`.
pub fn mean_curve(rows: &[ResultRow], policy: &str, column: fn(&ResultRow) -> f64) -> Vec<(Period, f64, f64)> {
    let mut by_t: BTreeMap<Period, Vec<f64>> = BTreeMap::new();
    let mut seeds = std::collections::BTreeSet::new();
    for r in rows.iter().filter(|r| r.policy == policy) {
        seeds.insert(r.seed);
        by_t.entry(r.t).or_default().push(column(r));
    }
    by_t.into_iter()
        .filter(|(_, v)| v.len() == seeds.len())
        .map(|(t, v)| (t, stats::mean(&v), stats::std_dev(&v)))
        .collect()
}

impl From<CellFailure> for HarnessError {
    fn from(f: CellFailure) -> Self {
        HarnessError::Report(format!("run {} seed {} failed: {}", f.label, f.seed, f.diagnosis))
    }
}
