//! Scenario schedules and the per-period offloading environment.
//!
//! An [`EpochSchedule`] says which service vehicles are candidates in each
//! period; an [`Environment`] evolves their distances and CPU shares, draws
//! a task, computes every candidate's true bit offloading delay, asks the
//! policy for a choice and feeds back the sum delay of that choice only.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{self, ComputeState, RadioParams, Task};
use crate::policy::{ArmId, NormalizationThresholds, Policy};
use crate::Period;

/// Maximum CPU frequency of service vehicles 1..=8 in the synthetic scenario, GHz.
pub const TABLE1_MAX_CPU_GHZ: [f64; 8] = [3.5, 4.5, 5.0, 5.5, 3.0, 6.5, 6.0, 4.0];

/// Length of each of the three synthetic epochs.
pub const TABLE1_EPOCH_LEN: Period = 1000;

/// Independent random streams derived from one run seed.
pub mod stream {
    pub const DYNAMICS: u64 = 0;
    pub const SCHEDULE: u64 = 1;
    pub const POLICY: u64 = 2;
    pub const ESTIMATOR: u64 = 3;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How the per-period bit delay of one arm is generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayModel {
    /// Radio link plus a random CPU share of `max_cpu_hz`.
    Physical { max_cpu_hz: f64 },
    /// Constant bit delay.
    Fixed { bit_delay: f64 },
    /// `high` with probability `p_high`, otherwise `low`.
    TwoPoint { low: f64, high: f64, p_high: f64 },
}

impl DelayModel {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DelayModel::Physical { max_cpu_hz } => max_cpu_hz > 0.0 && max_cpu_hz.is_finite(),
            DelayModel::Fixed { bit_delay } => bit_delay > 0.0 && bit_delay.is_finite(),
            DelayModel::TwoPoint { low, high, p_high } => {
                low > 0.0 && low <= high && high.is_finite() && (0.0..=1.0).contains(&p_high)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid delay model {self:?}")))
        }
    }
}

/// One service vehicle's presence interval, `[appear, disappear)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSpec {
    pub id: ArmId,
    pub appear: Period,
    pub disappear: Period,
    pub model: DelayModel,
}

/// Maximal interval of constant candidate membership, `start..=end`.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub index: usize,
    pub start: Period,
    pub end: Period,
    pub members: Vec<ArmId>,
}

impl Epoch {
    pub fn len(&self) -> Period {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSchedule {
    horizon: Period,
    arms: Vec<ArmSpec>,
    epochs: Vec<Epoch>,
}

impl EpochSchedule {
    pub fn new(horizon: Period, mut arms: Vec<ArmSpec>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        arms.sort_by_key(|a| a.id);
        for w in arms.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::Config(format!("arm {} listed twice", w[0].id)));
            }
        }
        for a in &arms {
            if a.appear == 0 || a.appear >= a.disappear {
                return Err(Error::Config(format!(
                    "arm {} needs 1 <= appear < disappear, got [{}, {})",
                    a.id, a.appear, a.disappear
                )));
            }
            a.model.validate()?;
        }

        let mut cuts: Vec<Period> = Vec::with_capacity(2 * arms.len() + 1);
        cuts.push(1);
        for a in &arms {
            for p in [a.appear, a.disappear] {
                if p > 1 && p <= horizon {
                    cuts.push(p);
                }
            }
        }
        cuts.sort_unstable();
        cuts.dedup();

        let mut epochs: Vec<Epoch> = Vec::with_capacity(cuts.len());
        for (i, &start) in cuts.iter().enumerate() {
            let end = cuts.get(i + 1).map_or(horizon, |next| next - 1);
            let members: Vec<ArmId> = arms
                .iter()
                .filter(|a| a.appear <= start && start < a.disappear)
                .map(|a| a.id)
                .collect();
            if members.is_empty() {
                return Err(Error::EmptyCandidates(start));
            }
            match epochs.last_mut() {
                Some(prev) if prev.members == members => prev.end = end,
                _ => epochs.push(Epoch {
                    index: epochs.len(),
                    start,
                    end,
                    members,
                }),
            }
        }
        Ok(Self { horizon, arms, epochs })
    }

    pub fn horizon(&self) -> Period {
        self.horizon
    }

    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    pub fn arm(&self, id: ArmId) -> Option<&ArmSpec> {
        self.arms
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|i| &self.arms[i])
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn epoch_count(&self) -> usize {
        self.epochs.len()
    }

    pub fn epoch_of(&self, t: Period) -> Option<usize> {
        if t == 0 || t > self.horizon {
            return None;
        }
        Some(self.epochs.partition_point(|e| e.end < t))
    }

    /// Candidate set at period `t`, ascending by id.
    pub fn candidate_set(&self, t: Period) -> Option<&[ArmId]> {
        self.epoch_of(t).map(|b| self.epochs[b].members.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    /// Eight vehicles over three epochs of 1000 periods.
    SyntheticTable1,
    /// Fixed candidate set for the whole horizon.
    Stationary { arms: Vec<(ArmId, DelayModel)> },
    /// Two vehicles with constant bit delays appearing at `t1` and `t2`.
    PeriodicTwoSev { mu1: f64, mu2: f64, t1: Period, t2: Period },
    /// Vehicles arrive by per-route Bernoulli draws and stay a random
    /// number of periods; a permanent anchor vehicle keeps the set nonempty.
    BernoulliArrivals {
        route_probs: Vec<f64>,
        sojourn_min: Period,
        sojourn_max: Period,
        anchor_max_cpu_hz: f64,
    },
}

impl ScenarioKind {
    pub const NAMES: [&'static str; 4] = [
        "synthetic-table1",
        "stationary",
        "periodic-two-sev",
        "bernoulli-arrivals",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::SyntheticTable1 => Self::NAMES[0],
            ScenarioKind::Stationary { .. } => Self::NAMES[1],
            ScenarioKind::PeriodicTwoSev { .. } => Self::NAMES[2],
            ScenarioKind::BernoulliArrivals { .. } => Self::NAMES[3],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Default-parameter scenario for a kind name.
impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "synthetic-table1" => ScenarioKind::SyntheticTable1,
            "stationary" => ScenarioKind::Stationary {
                arms: standard_physical_arms(2..=7),
            },
            "periodic-two-sev" => ScenarioKind::PeriodicTwoSev {
                mu1: 1.0,
                mu2: 2.0,
                t1: 1,
                t2: 2,
            },
            "bernoulli-arrivals" => ScenarioKind::BernoulliArrivals {
                route_probs: alloc::vec![0.1, 0.05, 0.05],
                sojourn_min: 200,
                sojourn_max: 720,
                anchor_max_cpu_hz: 3.0e9,
            },
            _ => return Err(Error::Config(format!("unknown scenario kind `{s}`"))),
        })
    }
}

/// Physical arms with the synthetic CPU frequencies, by 1-based index.
pub fn standard_physical_arms(ids: impl IntoIterator<Item = u32>) -> Vec<(ArmId, DelayModel)> {
    ids.into_iter()
        .map(|n| {
            let max_cpu_hz = TABLE1_MAX_CPU_GHZ[(n - 1) as usize] * 1e9;
            (ArmId(n), DelayModel::Physical { max_cpu_hz })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskModel {
    Uniform { min_bits: f64, max_bits: f64 },
    Constant { bits: f64 },
    /// `eps0` in even periods, `1 - eps1` in odd periods.
    Periodic { eps0: f64, eps1: f64 },
}

impl TaskModel {
    /// Quantile of the per-period input size law.
    pub fn quantile(&self, rho: f64) -> f64 {
        match *self {
            TaskModel::Uniform { min_bits, max_bits } => min_bits + rho * (max_bits - min_bits),
            TaskModel::Constant { bits } => bits,
            TaskModel::Periodic { eps0, eps1 } => {
                if rho <= 0.5 {
                    eps0
                } else {
                    1.0 - eps1
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TaskModel::Uniform { min_bits, max_bits } => 0.5 * (min_bits + max_bits),
            TaskModel::Constant { bits } => bits,
            TaskModel::Periodic { eps0, eps1 } => 0.5 * (eps0 + 1.0 - eps1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// `P{x <= lower} = rho_lower`, `P{x <= upper} = rho_upper`.
    Quantiles { rho_lower: f64, rho_upper: f64 },
    Explicit(NormalizationThresholds),
}

/// Bounded random walk of the task-to-service-vehicle distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobility {
    pub min_distance_m: f64,
    pub max_distance_m: f64,
    /// Per-period change is uniform on `[-max_step_m, max_step_m]`.
    pub max_step_m: f64,
}

impl Default for Mobility {
    fn default() -> Self {
        Self {
            min_distance_m: 10.0,
            max_distance_m: 200.0,
            max_step_m: 10.0,
        }
    }
}

/// Allocated CPU frequency is a uniform fraction of the maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpuShare {
    pub low: f64,
    pub high: f64,
}

impl Default for CpuShare {
    fn default() -> Self {
        Self { low: 0.2, high: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub horizon: Period,
    pub task: TaskModel,
    pub output_ratio: f64,
    pub intensity_cycles_per_bit: f64,
    pub radio: RadioParams,
    /// Default exploration weight for policies that do not set their own.
    pub beta0: f64,
    pub thresholds: ThresholdRule,
    pub mobility: Mobility,
    pub cpu_share: CpuShare,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Synthetic three-epoch scenario with the default radio and task settings.
    pub fn synthetic_table1() -> Self {
        Self {
            kind: ScenarioKind::SyntheticTable1,
            horizon: 3 * TABLE1_EPOCH_LEN,
            task: TaskModel::Uniform {
                min_bits: 0.2e6,
                max_bits: 1.0e6,
            },
            output_ratio: 0.0,
            intensity_cycles_per_bit: 1000.0,
            radio: RadioParams::default(),
            beta0: 0.5,
            thresholds: ThresholdRule::Quantiles {
                rho_lower: 0.05,
                rho_upper: 0.05,
            },
            mobility: Mobility::default(),
            cpu_share: CpuShare::default(),
            seed: 0,
        }
    }

    /// Synthetic settings with a fixed candidate set of the given arms.
    pub fn stationary(arms: Vec<(ArmId, DelayModel)>) -> Self {
        Self {
            kind: ScenarioKind::Stationary { arms },
            ..Self::synthetic_table1()
        }
    }

    /// Periodic input `eps0, 1 - eps1, eps0, ...` on two constant-delay arms,
    /// normalized with `x- = eps0`, `x+ = 1` and `beta0 = 2`.
    pub fn periodic_two_sev(mu1: f64, mu2: f64, eps0: f64, eps1: f64, t1: Period, t2: Period) -> Result<Self> {
        Ok(Self {
            kind: ScenarioKind::PeriodicTwoSev { mu1, mu2, t1, t2 },
            task: TaskModel::Periodic { eps0, eps1 },
            beta0: 2.0,
            thresholds: ThresholdRule::Explicit(NormalizationThresholds::new(eps0, 1.0)?),
            ..Self::synthetic_table1()
        })
    }

    pub fn bernoulli_arrivals() -> Self {
        Self {
            kind: "bernoulli-arrivals".parse().expect("built-in kind"),
            ..Self::synthetic_table1()
        }
    }

    /// Built-in scenario with default parameters.
    pub fn builtin(name: &str) -> Result<Self> {
        let kind: ScenarioKind = name.parse()?;
        Ok(match kind {
            ScenarioKind::SyntheticTable1 => Self::synthetic_table1(),
            ScenarioKind::Stationary { arms } => Self::stationary(arms),
            ScenarioKind::PeriodicTwoSev { mu1, mu2, t1, t2 } => Self::periodic_two_sev(mu1, mu2, 0.1, 0.1, t1, t2)?,
            ScenarioKind::BernoulliArrivals { .. } => Self {
                kind,
                ..Self::synthetic_table1()
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.into()));
        if self.horizon == 0 {
            return cfg("horizon must be at least 1");
        }
        self.radio.validate().map_err(|e| Error::Config(format!("{e}")))?;
        if !(self.output_ratio >= 0.0 && self.output_ratio.is_finite()) {
            return cfg("output_ratio must be >= 0");
        }
        if !(self.intensity_cycles_per_bit > 0.0 && self.intensity_cycles_per_bit.is_finite()) {
            return cfg("intensity must be > 0");
        }
        if !(self.beta0 >= 0.0 && self.beta0.is_finite()) {
            return cfg("beta0 must be >= 0");
        }
        let m = self.mobility;
        if !(m.min_distance_m > 0.0 && m.min_distance_m <= m.max_distance_m && m.max_step_m >= 0.0) {
            return cfg("mobility needs 0 < min_distance <= max_distance and step >= 0");
        }
        let c = self.cpu_share;
        if !(c.low > 0.0 && c.low <= c.high && c.high <= 1.0) {
            return cfg("cpu share needs 0 < low <= high <= 1");
        }
        match self.task {
            TaskModel::Uniform { min_bits, max_bits } => {
                if !(min_bits > 0.0 && min_bits <= max_bits && max_bits.is_finite()) {
                    return cfg("uniform task needs 0 < min_bits <= max_bits");
                }
            }
            TaskModel::Constant { bits } => {
                if !(bits > 0.0 && bits.is_finite()) {
                    return cfg("constant task needs bits > 0");
                }
            }
            TaskModel::Periodic { eps0, eps1 } => {
                if !(eps0 > 0.0 && eps0 < 0.5 && (0.0..0.5).contains(&eps1)) {
                    return cfg("periodic task needs 0 < eps0 < 0.5 and 0 <= eps1 < 0.5");
                }
            }
        }
        match self.thresholds {
            ThresholdRule::Quantiles { rho_lower, rho_upper } => {
                if !(0.0 <= rho_lower && rho_lower <= rho_upper && rho_upper <= 1.0) {
                    return cfg("quantiles need 0 <= rho_lower <= rho_upper <= 1");
                }
            }
            ThresholdRule::Explicit(t) => {
                NormalizationThresholds::new(t.lower, t.upper)?;
            }
        }
        match &self.kind {
            ScenarioKind::PeriodicTwoSev { mu1, mu2, t1, t2 } => {
                if !matches!(self.task, TaskModel::Periodic { .. }) {
                    return cfg("periodic-two-sev needs the periodic task model");
                }
                if !(*mu1 > 0.0 && mu1 <= mu2 && mu2.is_finite()) {
                    return cfg("periodic-two-sev needs 0 < mu1 <= mu2");
                }
                if t1 == t2 || *t1.min(t2) != 1 {
                    return cfg("periodic-two-sev needs distinct arrival times, the first at period 1");
                }
            }
            ScenarioKind::BernoulliArrivals {
                route_probs,
                sojourn_min,
                sojourn_max,
                anchor_max_cpu_hz,
            } => {
                if route_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return cfg("route probabilities must lie in [0, 1]");
                }
                if !(*sojourn_min >= 1 && sojourn_min <= sojourn_max) {
                    return cfg("sojourn needs 1 <= min <= max");
                }
                if !(*anchor_max_cpu_hz > 0.0) {
                    return cfg("anchor CPU frequency must be > 0");
                }
            }
            ScenarioKind::Stationary { arms } => {
                if arms.is_empty() {
                    return cfg("stationary scenario needs at least one arm");
                }
            }
            ScenarioKind::SyntheticTable1 => {}
        }
        Ok(())
    }
}

/// Normalization thresholds from the configured quantiles of the input law
/// (closed form), or the explicit pair.
pub fn threshold_from_quantiles(config: &ScenarioConfig) -> Result<NormalizationThresholds> {
    match config.thresholds {
        ThresholdRule::Explicit(t) => Ok(t),
        ThresholdRule::Quantiles { rho_lower, rho_upper } => {
            NormalizationThresholds::new(config.task.quantile(rho_lower), config.task.quantile(rho_upper))
        }
    }
}

/// Candidate schedule of a scenario. `seed` only matters for random arrivals.
pub fn build_schedule(config: &ScenarioConfig, seed: u64) -> Result<EpochSchedule> {
    config.validate()?;
    let horizon = config.horizon;
    let end = horizon + 1;
    let arms = match &config.kind {
        ScenarioKind::SyntheticTable1 => {
            let e = TABLE1_EPOCH_LEN;
            // (appear, disappear) per arm; arms still present in the third
            // epoch stay until the horizon.
            let spans: [(Period, Period); 8] = [
                (1, 2 * e + 1),
                (1, end.max(3 * e + 1)),
                (1, end.max(3 * e + 1)),
                (1, end.max(3 * e + 1)),
                (1, e + 1),
                (e + 1, 2 * e + 1),
                (e + 1, end.max(3 * e + 1)),
                (2 * e + 1, end.max(3 * e + 1)),
            ];
            standard_physical_arms(1..=8)
                .into_iter()
                .zip(spans)
                .filter(|(_, (appear, _))| *appear <= horizon)
                .map(|((id, model), (appear, disappear))| ArmSpec {
                    id,
                    appear,
                    disappear: disappear.min(end),
                    model,
                })
                .collect()
        }
        ScenarioKind::Stationary { arms } => arms
            .iter()
            .map(|&(id, model)| ArmSpec {
                id,
                appear: 1,
                disappear: end,
                model,
            })
            .collect(),
        ScenarioKind::PeriodicTwoSev { mu1, mu2, t1, t2 } => [(1, *mu1, *t1), (2, *mu2, *t2)]
            .into_iter()
            .filter(|(_, _, appear)| *appear <= horizon)
            .map(|(id, mu, appear)| ArmSpec {
                id: ArmId(id),
                appear,
                disappear: end,
                model: DelayModel::Fixed { bit_delay: mu },
            })
            .collect(),
        ScenarioKind::BernoulliArrivals {
            route_probs,
            sojourn_min,
            sojourn_max,
            anchor_max_cpu_hz,
        } => {
            let mut rng = stream_rng(seed, stream::SCHEDULE);
            let mut arms = alloc::vec![ArmSpec {
                id: ArmId(0),
                appear: 1,
                disappear: end,
                model: DelayModel::Physical {
                    max_cpu_hz: *anchor_max_cpu_hz
                },
            }];
            let mut next_id = 1u32;
            for t in 1..=horizon {
                for &p in route_probs {
                    if rng.gen_bool(p) {
                        let stay = rng.gen_range(*sojourn_min..=*sojourn_max);
                        let ghz = TABLE1_MAX_CPU_GHZ[rng.gen_range(0..TABLE1_MAX_CPU_GHZ.len())];
                        arms.push(ArmSpec {
                            id: ArmId(next_id),
                            appear: t,
                            disappear: (t + stay).min(end),
                            model: DelayModel::Physical { max_cpu_hz: ghz * 1e9 },
                        });
                        next_id += 1;
                    }
                }
            }
            arms
        }
    };
    EpochSchedule::new(horizon, arms)
}

/// Dynamic state of one physical service vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SevState {
    pub id: ArmId,
    pub max_cpu_hz: f64,
    pub distance_m: f64,
    pub alive: bool,
    pub alloc_cpu_hz: f64,
}

/// One random-walk step with the result clamped into the distance range.
pub fn apply_mobility_step(distance_m: f64, step_m: f64, mobility: &Mobility) -> f64 {
    (distance_m + step_m).clamp(mobility.min_distance_m, mobility.max_distance_m)
}

pub fn advance_mobility<R: Rng + ?Sized>(sev: SevState, mobility: &Mobility, rng: &mut R) -> SevState {
    let step = if mobility.max_step_m > 0.0 {
        rng.gen_range(-mobility.max_step_m..=mobility.max_step_m)
    } else {
        0.0
    };
    SevState {
        distance_m: apply_mobility_step(sev.distance_m, step, mobility),
        ..sev
    }
}

pub fn initial_distance<R: Rng + ?Sized>(mobility: &Mobility, rng: &mut R) -> f64 {
    if mobility.min_distance_m == mobility.max_distance_m {
        mobility.min_distance_m
    } else {
        rng.gen_range(mobility.min_distance_m..=mobility.max_distance_m)
    }
}

pub fn sample_cpu_allocation<R: Rng + ?Sized>(max_cpu_hz: f64, share: &CpuShare, rng: &mut R) -> f64 {
    let fraction = if share.low == share.high {
        share.low
    } else {
        rng.gen_range(share.low..=share.high)
    };
    fraction * max_cpu_hz
}

pub fn sample_task<R: Rng + ?Sized>(config: &ScenarioConfig, t: Period, rng: &mut R) -> Result<Task> {
    let input_bits = match config.task {
        TaskModel::Uniform { min_bits, max_bits } => {
            if min_bits == max_bits {
                min_bits
            } else {
                rng.gen_range(min_bits..=max_bits)
            }
        }
        TaskModel::Constant { bits } => bits,
        TaskModel::Periodic { eps0, eps1 } => {
            if t.is_multiple_of(2) {
                eps0
            } else {
                1.0 - eps1
            }
        }
    };
    Task::new(input_bits, config.output_ratio, config.intensity_cycles_per_bit)
}

/// One period of the offloading loop as seen by the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: Period,
    pub epoch: usize,
    pub chosen: ArmId,
    pub was_initialization: bool,
    pub input_bits: f64,
    /// `input_bits * truths[chosen]`, the only value the policy sees.
    pub d_sum: f64,
    /// True bit delay of every candidate this period, ascending by id.
    pub truths: Vec<(ArmId, f64)>,
}

impl Observation {
    pub fn true_bit_delay(&self, arm: ArmId) -> Option<f64> {
        self.truths
            .binary_search_by_key(&arm, |(id, _)| *id)
            .ok()
            .map(|i| self.truths[i].1)
    }
}

pub struct Environment {
    config: ScenarioConfig,
    schedule: EpochSchedule,
    rng: ChaCha8Rng,
    sevs: BTreeMap<ArmId, SevState>,
    next_period: Period,
}

impl Environment {
    /// Environment for one run. The dynamics stream is independent of the
    /// policy, so every policy sees the same trace for the same seed.
    pub fn new(config: ScenarioConfig, schedule: EpochSchedule, seed: u64) -> Result<Self> {
        config.validate()?;
        if schedule.horizon() != config.horizon {
            return Err(Error::Config("schedule horizon differs from the scenario horizon".into()));
        }
        Ok(Self {
            config,
            schedule,
            rng: stream_rng(seed, stream::DYNAMICS),
            sevs: BTreeMap::new(),
            next_period: 1,
        })
    }

    /// Builds the schedule and the environment from one seed.
    pub fn from_config(config: ScenarioConfig, seed: u64) -> Result<Self> {
        let schedule = build_schedule(&config, seed)?;
        Self::new(config, schedule, seed)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn schedule(&self) -> &EpochSchedule {
        &self.schedule
    }

    /// Next period to be played.
    pub fn period(&self) -> Period {
        self.next_period
    }

    pub fn is_done(&self) -> bool {
        self.next_period > self.config.horizon
    }

    pub fn step(&mut self, policy: &mut dyn Policy) -> Result<Observation> {
        let t = self.next_period;
        if t > self.config.horizon {
            return Err(Error::Input(format!("horizon {} exhausted", self.config.horizon)));
        }
        let epoch = self.schedule.epoch_of(t).ok_or(Error::EmptyCandidates(t))?;
        let candidates = self.schedule.epochs()[epoch].members.clone();

        self.sevs.retain(|id, _| candidates.binary_search(id).is_ok());
        let mobility = self.config.mobility;
        let share = self.config.cpu_share;
        for &id in &candidates {
            let spec = *self.schedule.arm(id).ok_or(Error::UnknownArm(id))?;
            let DelayModel::Physical { max_cpu_hz } = spec.model else {
                continue;
            };
            let state = match self.sevs.get(&id) {
                Some(s) => advance_mobility(*s, &mobility, &mut self.rng),
                None => SevState {
                    id,
                    max_cpu_hz,
                    distance_m: initial_distance(&mobility, &mut self.rng),
                    alive: true,
                    alloc_cpu_hz: 0.0,
                },
            };
            let alloc_cpu_hz = sample_cpu_allocation(max_cpu_hz, &share, &mut self.rng);
            self.sevs.insert(id, SevState { alloc_cpu_hz, ..state });
        }

        let task = sample_task(&self.config, t, &mut self.rng)?;

        let mut truths = Vec::with_capacity(candidates.len());
        for &id in &candidates {
            let spec = self.schedule.arm(id).ok_or(Error::UnknownArm(id))?;
            let u = match spec.model {
                DelayModel::Physical { .. } => {
                    let s = &self.sevs[&id];
                    let compute = ComputeState {
                        max_cpu_hz: s.max_cpu_hz,
                        alloc_cpu_hz: s.alloc_cpu_hz,
                    };
                    model::bit_delay_at(&self.config.radio, &task, s.distance_m, &compute)?
                }
                DelayModel::Fixed { bit_delay } => bit_delay,
                DelayModel::TwoPoint { low, high, p_high } => {
                    if self.rng.gen_bool(p_high) {
                        high
                    } else {
                        low
                    }
                }
            };
            truths.push((id, u));
        }

        let decision = policy.select(&candidates, task.input_bits, t)?;
        let chosen = decision.chosen_sev;
        let u = truths
            .binary_search_by_key(&chosen, |(id, _)| *id)
            .map(|i| truths[i].1)
            .map_err(|_| Error::Input(format!("policy chose arm {chosen} outside the candidate set")))?;
        let d_sum = task.input_bits * u;
        policy.observe(chosen, d_sum, task.input_bits, t)?;

        self.next_period += 1;
        Ok(Observation {
            t,
            epoch,
            chosen,
            was_initialization: decision.was_initialization,
            input_bits: task.input_bits,
            d_sum,
            truths,
        })
    }

    /// Plays the remaining periods.
    pub fn run(&mut self, policy: &mut dyn Policy) -> Result<Vec<Observation>> {
        let mut out = Vec::with_capacity((self.config.horizon + 1 - self.next_period) as usize);
        while !self.is_done() {
            out.push(self.step(policy)?);
        }
        Ok(out)
    }
}
