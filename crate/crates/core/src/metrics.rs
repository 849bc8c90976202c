//! Regret, delay and bound checks computed from observation streams.
//!
//! The reference for regret is the genie that knows every arm's mean bit
//! delay `mu_n`. For physical arms the mean is taken under the long-run law
//! of the clamped distance walk, estimated by Monte Carlo.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::env::{
    sample_cpu_allocation, stream, stream_rng, DelayModel, EpochSchedule, Mobility, Observation, ScenarioConfig,
    ScenarioKind,
};
use crate::error::{Error, Result};
use crate::model::{self, ComputeState, Task};
use crate::policy::ArmId;
use crate::stats::{self, LineFit, MeanCi};
use crate::Period;

/// Smallest Monte-Carlo sample count accepted for an arm mean.
pub const MIN_MEAN_SAMPLES: usize = 10_000;

/// Default length of the simulated distance walk.
pub const DEFAULT_WALK_STEPS: usize = 1_000_000;

const WALK_BURN_IN: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmMeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Largest sampled bit delay.
    pub max: f64,
    pub samples: usize,
}

/// Per-epoch genie reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochOracle {
    pub epoch: usize,
    pub start: Period,
    pub end: Period,
    /// `(arm, mu_n, standard error)`, ascending by arm.
    pub means: Vec<(ArmId, f64, f64)>,
    pub optimal_arm: ArmId,
    pub optimal_mean: f64,
    /// Bit-delay supremum used to normalize gaps.
    pub u_max: f64,
}

impl EpochOracle {
    pub fn mean_of(&self, arm: ArmId) -> Option<f64> {
        self.means.iter().find(|(id, _, _)| *id == arm).map(|m| m.1)
    }

    /// Normalized gap `(mu_n - mu*) / u_max`.
    pub fn gap(&self, arm: ArmId) -> Option<f64> {
        self.mean_of(arm).map(|mu| (mu - self.optimal_mean) / self.u_max)
    }

    pub fn with_u_max(mut self, u_max: f64) -> Self {
        self.u_max = u_max;
        self
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn model_key(model: &DelayModel) -> [u64; 4] {
    match *model {
        DelayModel::Physical { max_cpu_hz } => [0, max_cpu_hz.to_bits(), 0, 0],
        DelayModel::Fixed { bit_delay } => [1, bit_delay.to_bits(), 0, 0],
        DelayModel::TwoPoint { low, high, p_high } => [2, low.to_bits(), high.to_bits(), p_high.to_bits()],
    }
}

/// Simulates the clamped distance walk and keeps every visited distance
/// after a burn-in, as an empirical sample of its long-run law.
pub fn distance_pool<R: Rng + ?Sized>(mobility: &Mobility, steps: usize, rng: &mut R) -> Vec<f64> {
    let mut d = crate::env::initial_distance(mobility, rng);
    let mut pool = Vec::with_capacity(steps);
    for i in 0..steps + WALK_BURN_IN {
        let step = if mobility.max_step_m > 0.0 {
            rng.gen_range(-mobility.max_step_m..=mobility.max_step_m)
        } else {
            0.0
        };
        d = crate::env::apply_mobility_step(d, step, mobility);
        if i >= WALK_BURN_IN {
            pool.push(d);
        }
    }
    pool
}

/// Monte-Carlo estimator of arm mean bit delays. Results are cached per
/// delay model and each model draws from its own seeded stream, so the
/// estimates do not depend on query order.
pub struct MeanEstimator {
    config: ScenarioConfig,
    sample_count: usize,
    seed: u64,
    walk_steps: usize,
    pool: Option<Vec<f64>>,
    cache: BTreeMap<[u64; 4], ArmMeanEstimate>,
}

impl MeanEstimator {
    pub fn new(config: &ScenarioConfig, sample_count: usize, seed: u64) -> Result<Self> {
        if sample_count < MIN_MEAN_SAMPLES {
            return Err(Error::Precision(format!(
                "mean estimation needs at least {MIN_MEAN_SAMPLES} samples, got {sample_count}"
            )));
        }
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            sample_count,
            seed,
            walk_steps: DEFAULT_WALK_STEPS,
            pool: None,
            cache: BTreeMap::new(),
        })
    }

    pub fn with_walk_steps(mut self, steps: usize) -> Self {
        self.walk_steps = steps.max(1);
        self.pool = None;
        self
    }

    fn pool(&mut self) -> &[f64] {
        if self.pool.is_none() {
            let mut rng = stream_rng(self.seed, stream::ESTIMATOR);
            self.pool = Some(distance_pool(&self.config.mobility, self.walk_steps, &mut rng));
        }
        self.pool.as_deref().expect("pool initialized")
    }

    pub fn estimate(&mut self, model: &DelayModel) -> Result<ArmMeanEstimate> {
        let key = model_key(model);
        if let Some(e) = self.cache.get(&key) {
            return Ok(*e);
        }
        let mut rng = stream_rng(splitmix64(self.seed ^ splitmix64(key[0] ^ key[1] ^ key[2].rotate_left(17) ^ key[3].rotate_left(41))), stream::ESTIMATOR + 1);
        let n = self.sample_count;
        let mut samples = Vec::with_capacity(n);
        match *model {
            DelayModel::Fixed { bit_delay } => samples.resize(n, bit_delay),
            DelayModel::TwoPoint { low, high, p_high } => {
                samples.extend((0..n).map(|_| if rng.gen_bool(p_high) { high } else { low }));
            }
            DelayModel::Physical { max_cpu_hz } => {
                let task = Task::new(1.0, self.config.output_ratio, self.config.intensity_cycles_per_bit)?;
                let radio = self.config.radio;
                let share = self.config.cpu_share;
                let pool_len = self.pool().len();
                for _ in 0..n {
                    let d = self.pool.as_ref().expect("pool initialized")[rng.gen_range(0..pool_len)];
                    let compute = ComputeState {
                        max_cpu_hz,
                        alloc_cpu_hz: sample_cpu_allocation(max_cpu_hz, &share, &mut rng),
                    };
                    samples.push(model::bit_delay_at(&radio, &task, d, &compute)?);
                }
            }
        }
        let est = ArmMeanEstimate {
            mean: stats::mean(&samples),
            std_error: stats::std_error(&samples),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            samples: n,
        };
        self.cache.insert(key, est);
        Ok(est)
    }

    /// Mean bit delay of every arm in the schedule.
    pub fn arm_means(&mut self, schedule: &EpochSchedule) -> Result<BTreeMap<ArmId, f64>> {
        schedule
            .arms()
            .iter()
            .map(|a| Ok((a.id, self.estimate(&a.model)?.mean)))
            .collect()
    }

    pub fn epoch_oracle(&mut self, schedule: &EpochSchedule, epoch: usize) -> Result<EpochOracle> {
        let e = schedule
            .epochs()
            .get(epoch)
            .ok_or_else(|| Error::Input(format!("epoch {epoch} out of range")))?;
        let mut means = Vec::with_capacity(e.members.len());
        let mut u_max = f64::NEG_INFINITY;
        for &id in &e.members {
            let spec = schedule.arm(id).ok_or(Error::UnknownArm(id))?;
            let est = self.estimate(&spec.model)?;
            u_max = u_max.max(est.max);
            means.push((id, est.mean, est.std_error));
        }
        let (optimal_arm, optimal_mean) = means
            .iter()
            .fold(None, |best: Option<(ArmId, f64)>, &(id, mu, _)| match best {
                Some((_, b)) if b <= mu => best,
                _ => Some((id, mu)),
            })
            .expect("epochs are nonempty");
        Ok(EpochOracle {
            epoch,
            start: e.start,
            end: e.end,
            means,
            optimal_arm,
            optimal_mean,
            u_max,
        })
    }

    pub fn epoch_oracles(&mut self, schedule: &EpochSchedule) -> Result<Vec<EpochOracle>> {
        (0..schedule.epoch_count())
            .map(|b| self.epoch_oracle(schedule, b))
            .collect()
    }
}

/// Monte-Carlo genie reference of one epoch.
pub fn estimate_epoch_means(
    config: &ScenarioConfig,
    schedule: &EpochSchedule,
    epoch: usize,
    sample_count: usize,
    seed: u64,
) -> Result<EpochOracle> {
    MeanEstimator::new(config, sample_count, seed)?.epoch_oracle(schedule, epoch)
}

/// Largest true bit delay seen by any candidate over a set of runs.
pub fn global_delay_max<'a>(observations: impl IntoIterator<Item = &'a Observation>) -> f64 {
    observations
        .into_iter()
        .flat_map(|o| o.truths.iter().map(|(_, u)| *u))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretTrace {
    pub t: Vec<Period>,
    /// `x_t (u(t, a_t) - mu*_b)`.
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Mean sum delay over the periods played so far.
    pub cumulative_avg_delay: Vec<f64>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

pub fn regret_trace(observations: &[Observation], oracles: &[EpochOracle]) -> Result<RegretTrace> {
    let n = observations.len();
    let mut trace = RegretTrace {
        t: Vec::with_capacity(n),
        instantaneous: Vec::with_capacity(n),
        cumulative: Vec::with_capacity(n),
        cumulative_avg_delay: Vec::with_capacity(n),
    };
    let mut regret = 0.0;
    let mut delay = 0.0;
    for (i, o) in observations.iter().enumerate() {
        let oracle = oracles
            .get(o.epoch)
            .filter(|b| b.epoch == o.epoch && b.start <= o.t && o.t <= b.end)
            .ok_or_else(|| Error::Input(format!("no oracle covers epoch {} at period {}", o.epoch, o.t)))?;
        let u = o
            .true_bit_delay(o.chosen)
            .ok_or_else(|| Error::Input(format!("period {} has no truth for arm {}", o.t, o.chosen)))?;
        let r = o.input_bits * (u - oracle.optimal_mean);
        regret += r;
        delay += o.d_sum;
        trace.t.push(o.t);
        trace.instantaneous.push(r);
        trace.cumulative.push(regret);
        trace.cumulative_avg_delay.push(delay / (i + 1) as f64);
    }
    Ok(trace)
}

/// Mean sum delay over periods `start..=end`.
pub fn average_delay(observations: &[Observation], start: Period, end: Period) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for o in observations.iter().filter(|o| start <= o.t && o.t <= end) {
        sum += o.d_sum;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Input(format!("no observations in window [{start}, {end}]")));
    }
    Ok(sum / n as f64)
}

/// Exponent above which a regret curve is reported as not sublinear.
pub const SUBLINEAR_MAX_EXPONENT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublinearityReport {
    /// Fit of `R_t = a + b ln t` over the window.
    pub fit: LineFit,
    /// `R_t / t` at the window start and end.
    pub ratio_start: f64,
    pub ratio_end: f64,
    /// `ln(R_end / R_start) / ln(end / start)`; 1 for linear growth.
    pub growth_exponent: f64,
    pub sublinear: bool,
}

/// Log fit of a cumulative regret curve where `cumulative[i]` is `R_{i+1}`.
pub fn sublinearity_fit(cumulative: &[f64], start: Period, end: Period) -> Result<SublinearityReport> {
    if start == 0 || start >= end || end as usize > cumulative.len() {
        return Err(Error::Input(format!(
            "window [{start}, {end}] does not fit a trace of {} periods",
            cumulative.len()
        )));
    }
    let xs: Vec<f64> = (start..=end).map(|t| libm::log(t as f64)).collect();
    let ys: Vec<f64> = (start..=end).map(|t| cumulative[(t - 1) as usize]).collect();
    let fit = stats::fit_line(&xs, &ys).ok_or_else(|| Error::Input("degenerate window".into()))?;
    let r_start = cumulative[(start - 1) as usize];
    let r_end = cumulative[(end - 1) as usize];
    let ratio_start = r_start / start as f64;
    let ratio_end = r_end / end as f64;
    let growth_exponent = if r_start > 0.0 && r_end > 0.0 {
        libm::log(r_end / r_start) / libm::log(end as f64 / start as f64)
    } else {
        f64::NAN
    };
    let sublinear = if growth_exponent.is_nan() {
        ratio_end <= ratio_start
    } else {
        growth_exponent < SUBLINEAR_MAX_EXPONENT
    };
    Ok(SublinearityReport {
        fit,
        ratio_start,
        ratio_end,
        growth_exponent,
        sublinear,
    })
}

/// Expected-pull bound of a suboptimal arm under UCB with `beta0 = 2`:
/// `8 ln T / delta^2 + 1 + pi^2 / 3`.
pub fn ucb_pull_bound(delta: f64, horizon: f64) -> f64 {
    if delta <= 0.0 {
        return f64::INFINITY;
    }
    8.0 * libm::log(horizon) / (delta * delta) + 1.0 + PI * PI / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub bound: f64,
    pub observed: MeanCi,
    /// `bound - observed.upper()`.
    pub margin: f64,
    pub pass: bool,
    /// The bound is infinite, so the check passes trivially.
    pub vacuous: bool,
}

/// Compares the mean pull count of one suboptimal arm across runs with the
/// UCB bound; passes when the 95% CI upper edge is below the bound.
pub fn check_ucb_pull_bound(pulls: &[f64], delta: f64, horizon: f64, min_runs: usize) -> Result<BoundCheck> {
    if pulls.len() < min_runs {
        return Err(Error::Input(format!(
            "pull bound check needs at least {min_runs} runs, got {}",
            pulls.len()
        )));
    }
    let bound = ucb_pull_bound(delta, horizon);
    let observed = MeanCi::of(pulls);
    let vacuous = !bound.is_finite();
    Ok(BoundCheck {
        bound,
        observed,
        margin: bound - observed.upper(),
        pass: vacuous || observed.upper() < bound,
        vacuous,
    })
}

/// Two fixed-delay arms under periodic input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicScenarioParams {
    pub eps0: f64,
    pub eps1: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub t1: Period,
    pub t2: Period,
}

impl PeriodicScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let gap = self.gap();
        if !(gap > 0.0 && gap <= 1.0) {
            return Err(Error::Input(format!("relative gap must lie in (0, 1], got {gap}")));
        }
        if !((0.0..0.5).contains(&self.eps0) && (0.0..0.5).contains(&self.eps1)) {
            return Err(Error::Input("eps0 and eps1 must lie in [0, 0.5)".into()));
        }
        if self.t1 == self.t2 {
            return Err(Error::Input("arrival times must differ".into()));
        }
        Ok(())
    }

    /// Relative gap `(mu2 - mu1) / mu2`.
    pub fn gap(&self) -> f64 {
        (self.mu2 - self.mu1) / self.mu2
    }

    /// Coefficient of `ln T` in the regret bound, `2 mu2 eps0 / gap`.
    pub fn leading_coefficient(&self) -> f64 {
        2.0 * self.mu2 * self.eps0 / self.gap()
    }

    pub fn second_arrival(&self) -> Period {
        self.t1.max(self.t2)
    }
}

/// Allowed excess of the fitted log coefficient over the analytic one.
pub const LOG_COEFFICIENT_SLACK: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicBoundReport {
    pub leading_coefficient: f64,
    /// `leading_coefficient * ln T`.
    pub leading_term: f64,
    /// Smallest constant with `mean R_t <= c ln t + C` over the first half
    /// of the fit window.
    pub fitted_constant: f64,
    pub mean_final_regret: MeanCi,
    /// Log fit of the mean regret curve over the fit window.
    pub fit: LineFit,
    /// `(mu2 - mu1) * mean(k2)`, pulls of arm 2 in the second epoch.
    pub gap_times_pulls: f64,
    pub bound_holds: bool,
    pub coefficient_ok: bool,
}

impl PeriodicBoundReport {
    pub fn pass(&self) -> bool {
        self.bound_holds && self.coefficient_ok
    }
}

/// Checks the periodic-input regret bound. `regret_runs[r][i]` is `R_{i+1}`
/// of run `r`; `second_epoch_pulls[r]` counts pulls of arm 2 from the
/// second arrival on. The constant is calibrated on
/// `[fit_start, T/2]` and the bound is then tested at `T`.
pub fn check_periodic_log_bound(
    kind: &ScenarioKind,
    params: &PeriodicScenarioParams,
    regret_runs: &[Vec<f64>],
    second_epoch_pulls: &[f64],
    horizon: Period,
    fit_start: Period,
) -> Result<PeriodicBoundReport> {
    if !matches!(kind, ScenarioKind::PeriodicTwoSev { .. }) {
        return Err(Error::Input(format!("bound applies to periodic-two-sev, not {kind}")));
    }
    params.validate()?;
    if regret_runs.is_empty() || regret_runs.iter().any(|r| r.len() < horizon as usize) {
        return Err(Error::Input(format!("every run needs {horizon} regret values")));
    }
    let half = horizon / 2;
    if fit_start == 0 || fit_start >= half {
        return Err(Error::Input(format!("fit start {fit_start} must lie in [1, T/2)")));
    }
    let runs = regret_runs.len() as f64;
    let mean_curve: Vec<f64> = (0..horizon as usize)
        .map(|i| regret_runs.iter().map(|r| r[i]).sum::<f64>() / runs)
        .collect();
    let c = params.leading_coefficient();
    let ln = |t: Period| libm::log(t as f64);
    let fitted_constant = (fit_start..=half)
        .map(|t| mean_curve[(t - 1) as usize] - c * ln(t))
        .fold(f64::NEG_INFINITY, f64::max);
    let finals: Vec<f64> = regret_runs.iter().map(|r| r[horizon as usize - 1]).collect();
    let mean_final_regret = MeanCi::of(&finals);
    let leading_term = c * ln(horizon);
    let slack = 3.0 * stats::std_error(&finals);
    let bound_holds = mean_final_regret.mean <= leading_term + fitted_constant + slack;

    let xs: Vec<f64> = (fit_start..=horizon).map(ln).collect();
    let ys: Vec<f64> = (fit_start..=horizon).map(|t| mean_curve[(t - 1) as usize]).collect();
    let fit = stats::fit_line(&xs, &ys).ok_or_else(|| Error::Input("degenerate fit window".into()))?;
    let coefficient_ok = fit.slope <= (1.0 + LOG_COEFFICIENT_SLACK) * c;

    Ok(PeriodicBoundReport {
        leading_coefficient: c,
        leading_term,
        fitted_constant,
        mean_final_regret,
        fit,
        gap_times_pulls: (params.mu2 - params.mu1) * stats::mean(second_epoch_pulls),
        bound_holds,
        coefficient_ok,
    })
}

/// Pulls of each arm in `[from, to]`.
pub fn pull_counts(observations: &[Observation], from: Period, to: Period) -> BTreeMap<ArmId, u64> {
    let mut counts = BTreeMap::new();
    for o in observations.iter().filter(|o| from <= o.t && o.t <= to) {
        *counts.entry(o.chosen).or_insert(0) += 1;
    }
    counts
}
