//! Experiment configuration files.
//!
//! A config is TOML with a `[scenario]` table, one `[[policy]]` table per
//! policy, a `[seeds]` table, an optional `[sweep]` table and an `[output]`
//! table. Every key is optional except the policy names; omitted scenario
//! keys fall back to the built-in scenario named by `scenario.kind`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use vecoffload_core::env::{DelayModel, ScenarioConfig, ScenarioKind, TaskModel, ThresholdRule};
use vecoffload_core::model::{db_to_linear, RadioParams};
use vecoffload_core::policy::{NormalizationThresholds, PolicyKind};
use vecoffload_core::{ArmId, Period};

use crate::error::{HarnessError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "VECOFFLOAD_OUT";
pub const DEFAULT_OUT_DIR: &str = "results";
pub const DEFAULT_ORACLE_SAMPLES: usize = 200_000;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    policy: Vec<RawPolicy>,
    #[serde(default)]
    seeds: Option<RawSeeds>,
    #[serde(default)]
    sweep: Option<RawSweep>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: Option<String>,
    horizon: Option<Period>,
    beta0: Option<f64>,
    rho_lower: Option<f64>,
    rho_upper: Option<f64>,
    x_lower: Option<f64>,
    x_upper: Option<f64>,

    tx_power_w: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_w: Option<f64>,
    pathloss_db: Option<f64>,
    interference_up_w: Option<f64>,
    interference_down_w: Option<f64>,

    output_ratio: Option<f64>,
    intensity_cycles_per_bit: Option<f64>,
    task: Option<String>,
    task_min_bits: Option<f64>,
    task_max_bits: Option<f64>,
    task_bits: Option<f64>,
    eps0: Option<f64>,
    eps1: Option<f64>,

    min_distance_m: Option<f64>,
    max_distance_m: Option<f64>,
    max_step_m: Option<f64>,
    cpu_share_low: Option<f64>,
    cpu_share_high: Option<f64>,

    /// Stationary scenario: synthetic arm indices.
    arms: Option<Vec<u32>>,
    /// Stationary scenario: explicit arms.
    #[serde(default)]
    arm: Vec<RawArm>,

    mu1: Option<f64>,
    mu2: Option<f64>,
    t1: Option<Period>,
    t2: Option<Period>,

    route_probs: Option<Vec<f64>>,
    sojourn_min: Option<Period>,
    sojourn_max: Option<Period>,
    anchor_max_cpu_ghz: Option<f64>,

    oracle_samples: Option<usize>,
    oracle_seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArm {
    id: u32,
    bit_delay: Option<f64>,
    max_cpu_ghz: Option<f64>,
    low: Option<f64>,
    high: Option<f64>,
    p_high: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    name: String,
    label: Option<String>,
    beta0: Option<f64>,
    rho_lower: Option<f64>,
    rho_upper: Option<f64>,
    #[serde(default)]
    zero_occurrence: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeeds {
    list: Option<Vec<u64>>,
    base: Option<u64>,
    count: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    policy: Option<String>,
    #[serde(default)]
    beta0: Vec<f64>,
    /// `[rho_lower, rho_upper]` pairs.
    #[serde(default)]
    thresholds: Vec<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    stride: Option<Period>,
    regret_vs_t: Option<bool>,
    avg_delay_vs_t: Option<bool>,
    beta_sweep: Option<bool>,
    threshold_sweep: Option<bool>,
}

/// Which figure a policy entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PolicyGroup {
    Main,
    BetaSweep,
    ThresholdSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub label: String,
    pub kind: PolicyKind,
    pub beta0: f64,
    pub thresholds: ThresholdRule,
    pub zero_occurrence: bool,
    pub group: PolicyGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlotToggles {
    pub regret_vs_t: bool,
    pub avg_delay_vs_t: bool,
    pub beta_sweep: bool,
    pub threshold_sweep: bool,
}

impl PlotToggles {
    pub const NONE: PlotToggles = PlotToggles {
        regret_vs_t: false,
        avg_delay_vs_t: false,
        beta_sweep: false,
        threshold_sweep: false,
    };

    pub fn any(&self) -> bool {
        self.regret_vs_t || self.avg_delay_vs_t || self.beta_sweep || self.threshold_sweep
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub policies: Vec<PolicySpec>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Record every `stride`-th period plus the last one.
    pub stride: Period,
    pub plots: PlotToggles,
    pub oracle_samples: usize,
    pub oracle_seed: u64,
}

impl ExperimentConfig {
    /// Built-in scenario with default policies, seeds and output settings.
    pub fn for_scenario(scenario: ScenarioConfig, kinds: &[PolicyKind], seeds: Vec<u64>) -> Self {
        let policies = kinds
            .iter()
            .map(|&kind| PolicySpec {
                label: kind.name().to_string(),
                kind,
                beta0: scenario.beta0,
                thresholds: scenario.thresholds,
                zero_occurrence: false,
                group: PolicyGroup::Main,
            })
            .collect();
        Self {
            scenario,
            policies,
            seeds,
            output_dir: default_output_dir(),
            stride: 1,
            plots: PlotToggles {
                regret_vs_t: true,
                avg_delay_vs_t: true,
                beta_sweep: false,
                threshold_sweep: false,
            },
            oracle_samples: DEFAULT_ORACLE_SAMPLES,
            oracle_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario
            .validate()
            .map_err(|e| HarnessError::config("scenario", e.to_string()))?;
        if self.policies.is_empty() {
            return Err(HarnessError::config("policy", "at least one policy is required"));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds", "at least one seed is required"));
        }
        if self.stride == 0 {
            return Err(HarnessError::config("output.stride", "stride must be at least 1"));
        }
        let mut labels: Vec<&str> = self.policies.iter().map(|p| p.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(HarnessError::config("policy.label", format!("duplicate label `{}`", w[0])));
        }
        for p in &self.policies {
            if !(p.beta0 >= 0.0 && p.beta0.is_finite()) {
                return Err(HarnessError::config(
                    "policy.beta0",
                    format!("`{}`: beta0 must be >= 0, got {}", p.label, p.beta0),
                ));
            }
            let mut probe = self.scenario.clone();
            probe.thresholds = p.thresholds;
            probe
                .validate()
                .map_err(|e| HarnessError::config("policy.rho_lower/rho_upper", format!("`{}`: {e}", p.label)))?;
        }
        if self.plots.beta_sweep && !self.policies.iter().any(|p| p.group == PolicyGroup::BetaSweep) {
            return Err(HarnessError::config("output.beta_sweep", "plot enabled but sweep.beta0 is empty"));
        }
        if self.plots.threshold_sweep && !self.policies.iter().any(|p| p.group == PolicyGroup::ThresholdSweep) {
            return Err(HarnessError::config(
                "output.threshold_sweep",
                "plot enabled but sweep.thresholds is empty",
            ));
        }
        if self.oracle_samples < vecoffload_core::metrics::MIN_MEAN_SAMPLES {
            return Err(HarnessError::config(
                "scenario.oracle_samples",
                format!("must be at least {}", vecoffload_core::metrics::MIN_MEAN_SAMPLES),
            ));
        }
        Ok(())
    }
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config_str(&text).map_err(|e| match e {
        HarnessError::Config { field, message } => HarnessError::Config {
            field: format!("{}: {field}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::Config {
        field: "toml".into(),
        message: e.to_string(),
    })?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let scenario = resolve_scenario(&raw.scenario)?;

    let mut policies = Vec::new();
    for (i, p) in raw.policy.iter().enumerate() {
        let field = |k: &str| format!("policy[{i}].{k}");
        let kind: PolicyKind = p.name.parse().map_err(|e| HarnessError::config(field("name"), e))?;
        let thresholds = policy_thresholds(&scenario, p.rho_lower, p.rho_upper)
            .map_err(|m| HarnessError::config(field("rho_lower"), m))?;
        policies.push(PolicySpec {
            label: p.label.clone().unwrap_or_else(|| kind.name().to_string()),
            kind,
            beta0: p.beta0.unwrap_or(scenario.beta0),
            thresholds,
            zero_occurrence: p.zero_occurrence,
            group: PolicyGroup::Main,
        });
    }

    if let Some(sweep) = &raw.sweep {
        let kind: PolicyKind = sweep
            .policy
            .as_deref()
            .unwrap_or("alto")
            .parse()
            .map_err(|e| HarnessError::config("sweep.policy", e))?;
        for &b in &sweep.beta0 {
            policies.push(PolicySpec {
                label: format!("{kind}[beta0={b}]"),
                kind,
                beta0: b,
                thresholds: scenario.thresholds,
                zero_occurrence: false,
                group: PolicyGroup::BetaSweep,
            });
        }
        for &[lo, hi] in &sweep.thresholds {
            policies.push(PolicySpec {
                label: format!("{kind}[rho={lo}/{hi}]"),
                kind,
                beta0: scenario.beta0,
                thresholds: ThresholdRule::Quantiles {
                    rho_lower: lo,
                    rho_upper: hi,
                },
                zero_occurrence: false,
                group: PolicyGroup::ThresholdSweep,
            });
        }
    }

    let seeds = match &raw.seeds {
        None => (0..10).collect(),
        Some(s) => match (&s.list, s.base, s.count) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(HarnessError::config("seeds", "give either `list` or `base`/`count`, not both"))
            }
            (Some(list), None, None) => list.clone(),
            (None, base, count) => {
                let count = count.unwrap_or(10);
                if count == 0 {
                    return Err(HarnessError::config("seeds.count", "count must be at least 1"));
                }
                let base = base.unwrap_or(0);
                (base..base + count).collect()
            }
        },
    };

    let o = &raw.output;
    let plots = PlotToggles {
        regret_vs_t: o.regret_vs_t.unwrap_or(true),
        avg_delay_vs_t: o.avg_delay_vs_t.unwrap_or(true),
        beta_sweep: o
            .beta_sweep
            .unwrap_or_else(|| raw.sweep.as_ref().is_some_and(|s| !s.beta0.is_empty())),
        threshold_sweep: o
            .threshold_sweep
            .unwrap_or_else(|| raw.sweep.as_ref().is_some_and(|s| !s.thresholds.is_empty())),
    };

    let config = ExperimentConfig {
        scenario,
        policies,
        seeds,
        output_dir: o.dir.clone().unwrap_or_else(default_output_dir),
        stride: o.stride.unwrap_or(1),
        plots,
        oracle_samples: raw.scenario.oracle_samples.unwrap_or(DEFAULT_ORACLE_SAMPLES),
        oracle_seed: raw.scenario.oracle_seed.unwrap_or(0),
    };
    // Policies may still come from the command line, so an empty list is
    // only rejected once overrides are applied.
    if !config.policies.is_empty() {
        config.validate()?;
    } else {
        config
            .scenario
            .validate()
            .map_err(|e| HarnessError::config("scenario", e.to_string()))?;
    }
    Ok(config)
}

fn policy_thresholds(
    scenario: &ScenarioConfig,
    rho_lower: Option<f64>,
    rho_upper: Option<f64>,
) -> std::result::Result<ThresholdRule, String> {
    match (rho_lower, rho_upper) {
        (None, None) => Ok(scenario.thresholds),
        (Some(rho_lower), Some(rho_upper)) => Ok(ThresholdRule::Quantiles { rho_lower, rho_upper }),
        _ => Err("rho_lower and rho_upper must be given together".into()),
    }
}

fn resolve_scenario(r: &RawScenario) -> Result<ScenarioConfig> {
    let kind_name = r.kind.as_deref().unwrap_or("synthetic-table1");
    let mut s = ScenarioConfig::builtin(kind_name).map_err(|e| HarnessError::config("scenario.kind", e))?;

    if let Some(h) = r.horizon {
        s.horizon = h;
    }
    if let Some(b) = r.beta0 {
        s.beta0 = b;
    }

    let radio = RadioParams {
        tx_power_watts: r.tx_power_w.unwrap_or(s.radio.tx_power_watts),
        bandwidth_hz: r.bandwidth_hz.unwrap_or(s.radio.bandwidth_hz),
        noise_watts: r.noise_w.unwrap_or(s.radio.noise_watts),
        pathloss_const: r.pathloss_db.map(db_to_linear).unwrap_or(s.radio.pathloss_const),
        interference_up_watts: r.interference_up_w.unwrap_or(s.radio.interference_up_watts),
        interference_down_watts: r.interference_down_w.unwrap_or(s.radio.interference_down_watts),
    };
    s.radio = radio;
    if let Some(v) = r.output_ratio {
        s.output_ratio = v;
    }
    if let Some(v) = r.intensity_cycles_per_bit {
        s.intensity_cycles_per_bit = v;
    }
    if let Some(v) = r.min_distance_m {
        s.mobility.min_distance_m = v;
    }
    if let Some(v) = r.max_distance_m {
        s.mobility.max_distance_m = v;
    }
    if let Some(v) = r.max_step_m {
        s.mobility.max_step_m = v;
    }
    if let Some(v) = r.cpu_share_low {
        s.cpu_share.low = v;
    }
    if let Some(v) = r.cpu_share_high {
        s.cpu_share.high = v;
    }

    s.task = match r.task.as_deref() {
        None => s.task,
        Some("uniform") => TaskModel::Uniform {
            min_bits: 0.0,
            max_bits: 0.0,
        },
        Some("constant") => TaskModel::Constant { bits: 0.0 },
        Some("periodic") => TaskModel::Periodic { eps0: 0.1, eps1: 0.1 },
        Some(other) => {
            return Err(HarnessError::config(
                "scenario.task",
                format!("unknown task model `{other}` (uniform, constant, periodic)"),
            ))
        }
    };
    // Fill the selected task model from explicit keys, falling back to the
    // built-in values where the model is unchanged.
    let builtin_task = ScenarioConfig::builtin(kind_name).expect("checked above").task;
    s.task = match s.task {
        TaskModel::Uniform { .. } => {
            let (dmin, dmax) = match builtin_task {
                TaskModel::Uniform { min_bits, max_bits } => (min_bits, max_bits),
                _ => (0.2e6, 1.0e6),
            };
            TaskModel::Uniform {
                min_bits: r.task_min_bits.unwrap_or(dmin),
                max_bits: r.task_max_bits.unwrap_or(dmax),
            }
        }
        TaskModel::Constant { .. } => TaskModel::Constant {
            bits: r
                .task_bits
                .ok_or_else(|| HarnessError::config("scenario.task_bits", "constant task needs task_bits"))?,
        },
        TaskModel::Periodic { eps0, eps1 } => TaskModel::Periodic {
            eps0: r.eps0.unwrap_or(eps0),
            eps1: r.eps1.unwrap_or(eps1),
        },
    };

    s.kind = match s.kind {
        ScenarioKind::SyntheticTable1 => ScenarioKind::SyntheticTable1,
        ScenarioKind::Stationary { arms } => {
            let mut out: Vec<(ArmId, DelayModel)> = match &r.arms {
                Some(ids) => {
                    if let Some(bad) = ids.iter().find(|&&n| n == 0 || n > 8) {
                        return Err(HarnessError::config(
                            "scenario.arms",
                            format!("synthetic arm index {bad} outside 1..=8"),
                        ));
                    }
                    vecoffload_core::env::standard_physical_arms(ids.iter().copied())
                }
                None if r.arm.is_empty() => arms,
                None => Vec::new(),
            };
            for (i, a) in r.arm.iter().enumerate() {
                out.push((ArmId(a.id), raw_arm_model(a).map_err(|m| HarnessError::config(format!("scenario.arm[{i}]"), m))?));
            }
            ScenarioKind::Stationary { arms: out }
        }
        ScenarioKind::PeriodicTwoSev { mu1, mu2, t1, t2 } => ScenarioKind::PeriodicTwoSev {
            mu1: r.mu1.unwrap_or(mu1),
            mu2: r.mu2.unwrap_or(mu2),
            t1: r.t1.unwrap_or(t1),
            t2: r.t2.unwrap_or(t2),
        },
        ScenarioKind::BernoulliArrivals {
            route_probs,
            sojourn_min,
            sojourn_max,
            anchor_max_cpu_hz,
        } => ScenarioKind::BernoulliArrivals {
            route_probs: r.route_probs.clone().unwrap_or(route_probs),
            sojourn_min: r.sojourn_min.unwrap_or(sojourn_min),
            sojourn_max: r.sojourn_max.unwrap_or(sojourn_max),
            anchor_max_cpu_hz: r.anchor_max_cpu_ghz.map(|g| g * 1e9).unwrap_or(anchor_max_cpu_hz),
        },
    };
    if !matches!(s.kind, ScenarioKind::Stationary { .. }) && (r.arms.is_some() || !r.arm.is_empty()) {
        return Err(HarnessError::config("scenario.arms", "arms are only configurable for `stationary`"));
    }

    // Periodic scenarios normalize with x- = eps0 and x+ = 1 by default.
    if let (ScenarioKind::PeriodicTwoSev { .. }, TaskModel::Periodic { eps0, .. }) = (&s.kind, s.task) {
        if let ThresholdRule::Explicit(_) = s.thresholds {
            if eps0 > 0.0 {
                s.thresholds = ThresholdRule::Explicit(
                    NormalizationThresholds::new(eps0, 1.0).map_err(|e| HarnessError::config("scenario.eps0", e))?,
                );
            }
        }
    }

    match (r.rho_lower, r.rho_upper, r.x_lower, r.x_upper) {
        (None, None, None, None) => {}
        (Some(rho_lower), Some(rho_upper), None, None) => {
            s.thresholds = ThresholdRule::Quantiles { rho_lower, rho_upper };
        }
        (None, None, Some(lo), Some(hi)) => {
            s.thresholds = ThresholdRule::Explicit(
                NormalizationThresholds::new(lo, hi).map_err(|e| HarnessError::config("scenario.x_lower", e))?,
            );
        }
        _ => {
            return Err(HarnessError::config(
                "scenario.rho_lower",
                "give both rho_lower and rho_upper, or both x_lower and x_upper",
            ))
        }
    }
    Ok(s)
}

fn raw_arm_model(a: &RawArm) -> std::result::Result<DelayModel, String> {
    match (a.bit_delay, a.max_cpu_ghz, a.low, a.high, a.p_high) {
        (Some(bit_delay), None, None, None, None) if bit_delay > 0.0 => Ok(DelayModel::Fixed { bit_delay }),
        (None, Some(ghz), None, None, None) if ghz > 0.0 => Ok(DelayModel::Physical { max_cpu_hz: ghz * 1e9 }),
        (None, None, Some(low), Some(high), Some(p_high))
            if 0.0 < low && low <= high && (0.0..=1.0).contains(&p_high) =>
        {
            Ok(DelayModel::TwoPoint { low, high, p_high })
        }
        _ => Err("an arm needs exactly one of: bit_delay > 0; max_cpu_ghz > 0; low, high, p_high".into()),
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Option<String>,
    pub policies: Vec<String>,
    pub horizon: Option<Period>,
}

/// `N` (seeds 0..N), `A..B` (half open) or a comma list.
pub fn parse_seed_spec(spec: &str) -> Result<Vec<u64>> {
    let bad = |m: String| HarnessError::config("--seeds", m);
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| bad(format!("`{s}`: {e}")));
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else if spec.contains(',') {
        spec.split(',').map(num).collect::<Result<_>>()?
    } else {
        (0..num(spec)?).collect()
    };
    if seeds.is_empty() {
        return Err(bad(format!("`{spec}` selects no seeds")));
    }
    Ok(seeds)
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        if let Some(spec) = &o.seeds {
            self.seeds = parse_seed_spec(spec)?;
        }
        if let Some(h) = o.horizon {
            self.scenario.horizon = h;
        }
        if !o.policies.is_empty() {
            let mut main = Vec::new();
            for name in &o.policies {
                let kind: PolicyKind = name.parse().map_err(|e| HarnessError::config("--policy", e))?;
                let existing = self
                    .policies
                    .iter()
                    .find(|p| p.group == PolicyGroup::Main && p.kind == kind)
                    .cloned();
                main.push(existing.unwrap_or(PolicySpec {
                    label: kind.name().to_string(),
                    kind,
                    beta0: self.scenario.beta0,
                    thresholds: self.scenario.thresholds,
                    zero_occurrence: false,
                    group: PolicyGroup::Main,
                }));
            }
            self.policies.retain(|p| p.group != PolicyGroup::Main);
            main.append(&mut self.policies);
            self.policies = main;
        }
        self.validate()
    }
}
