//! Online offloading policies.
//!
//! Every policy sees the candidate set and the input size of the current
//! task, picks one service vehicle, and later receives the sum delay of that
//! choice only. The index policies (ALTO, UCB, VUCB, AdaUCB) share one
//! implementation and differ only in whether the exploration padding is
//! scaled by the normalized input and whether it runs on a per-arm clock
//! that starts when the arm first appeared.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{stream, stream_rng};
use crate::error::{Error, Result};
use crate::Period;

/// Service-vehicle identifier. One arm per service vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArmId(pub u32);

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationThresholds {
    pub lower: f64,
    pub upper: f64,
}

impl NormalizationThresholds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && upper.is_finite() && lower <= upper) {
            return Err(Error::Config(format!(
                "normalization thresholds need 0 < lower <= upper, got lower={lower} upper={upper}"
            )));
        }
        Ok(Self { lower, upper })
    }
}

/// Maps an input size onto `[0, 1]`. With equal thresholds the result is
/// 0 at or below the threshold and 1 above it.
pub fn normalize_input(x: f64, thresholds: &NormalizationThresholds) -> f64 {
    let NormalizationThresholds { lower, upper } = *thresholds;
    if upper == lower {
        return if x <= lower { 0.0 } else { 1.0 };
    }
    ((x - lower) / (upper - lower)).clamp(0.0, 1.0)
}

/// Learning state of one initialized arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmStats {
    /// Running mean of observed `d_sum / x`.
    pub empirical_bit_delay: f64,
    pub pull_count: u64,
    /// Period of the initialization pull (0 when occurrence clocks are disabled).
    pub occurrence_time: Period,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyStats {
    pub arms: BTreeMap<ArmId, ArmStats>,
    /// Largest bit delay observed so far; `None` before the first observation.
    pub running_delay_max: Option<f64>,
    pub exploration_weight: f64,
    /// Pulls over the whole run, including arms that were later forgotten.
    pub total_pulls: u64,
}

impl PolicyStats {
    /// `beta = beta0 * u_m^2` with the running maximum as `u_m`.
    pub fn beta(&self) -> f64 {
        let um = self.running_delay_max.unwrap_or(0.0);
        self.exploration_weight * um * um
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub chosen_sev: ArmId,
    pub was_initialization: bool,
    /// Utility of every candidate, ascending by arm id. Empty for
    /// initialization pulls and for the random policy.
    pub utility_snapshot: Vec<(ArmId, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    Alto,
    Ucb,
    Vucb,
    AdaUcb,
    Random,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Alto,
        PolicyKind::Ucb,
        PolicyKind::Vucb,
        PolicyKind::AdaUcb,
        PolicyKind::Random,
        PolicyKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Alto => "alto",
            PolicyKind::Ucb => "ucb",
            PolicyKind::Vucb => "vucb",
            PolicyKind::AdaUcb => "adaucb",
            PolicyKind::Random => "random",
            PolicyKind::Oracle => "oracle",
        }
    }

    pub fn is_index(self) -> bool {
        self.index_variant().is_some()
    }

    pub fn index_variant(self) -> Option<IndexVariant> {
        match self {
            PolicyKind::Alto => Some(IndexVariant::Alto),
            PolicyKind::Ucb => Some(IndexVariant::Ucb),
            PolicyKind::Vucb => Some(IndexVariant::Vucb),
            PolicyKind::AdaUcb => Some(IndexVariant::AdaUcb),
            PolicyKind::Random | PolicyKind::Oracle => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

/// The four index policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexVariant {
    /// Neither input-aware nor occurrence-aware.
    Ucb,
    /// Occurrence-aware.
    Vucb,
    /// Input-aware.
    AdaUcb,
    /// Input-aware and occurrence-aware.
    Alto,
}

impl IndexVariant {
    pub fn input_aware(self) -> bool {
        matches!(self, IndexVariant::AdaUcb | IndexVariant::Alto)
    }

    pub fn occurrence_aware(self) -> bool {
        matches!(self, IndexVariant::Vucb | IndexVariant::Alto)
    }

    pub fn kind(self) -> PolicyKind {
        match self {
            IndexVariant::Ucb => PolicyKind::Ucb,
            IndexVariant::Vucb => PolicyKind::Vucb,
            IndexVariant::AdaUcb => PolicyKind::AdaUcb,
            IndexVariant::Alto => PolicyKind::Alto,
        }
    }
}

/// Utility of an initialized arm under one of the index policies:
/// empirical bit delay minus an exploration padding. Lower is better and
/// the value may be negative.
///
/// Policies without input awareness use a normalized input of 0, and
/// policies without occurrence awareness count the clock from 0.
pub fn index_utility(variant: IndexVariant, arm: &ArmStats, t: Period, x_norm: f64, beta: f64) -> Result<f64> {
    let origin = if variant.occurrence_aware() {
        arm.occurrence_time
    } else {
        0
    };
    if t <= origin {
        return Err(Error::Sequencing(format!(
            "utility requested at period {t}, not after clock origin {origin}"
        )));
    }
    if arm.pull_count == 0 {
        return Err(Error::Sequencing("utility of an arm with no pulls".into()));
    }
    let x = if variant.input_aware() { x_norm } else { 0.0 };
    let elapsed = (t - origin) as f64;
    let padding = libm::sqrt(beta * (1.0 - x) * libm::log(elapsed) / arm.pull_count as f64);
    Ok(arm.empirical_bit_delay - padding)
}

/// ALTO utility: `u_bar - sqrt(beta (1 - x_norm) ln(t - t_n) / k)`.
pub fn alto_utility(arm: &ArmStats, t: Period, x_norm: f64, beta: f64) -> Result<f64> {
    index_utility(IndexVariant::Alto, arm, t, x_norm, beta)
}

pub trait Policy {
    fn kind(&self) -> PolicyKind;

    /// Picks one service vehicle for the task of period `t`.
    fn select(&mut self, candidates: &[ArmId], input_bits: f64, t: Period) -> Result<Decision>;

    /// Feeds back the sum delay of the arm chosen by the last `select`.
    fn observe(&mut self, arm: ArmId, d_sum: f64, input_bits: f64, t: Period) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    arm: ArmId,
    t: Period,
    initialization: bool,
}

fn take_pending(pending: &mut Option<Pending>, arm: ArmId, t: Period) -> Result<Pending> {
    match *pending {
        Some(p) if p.arm == arm && p.t == t => {
            *pending = None;
            Ok(p)
        }
        Some(p) => Err(Error::Sequencing(format!(
            "observation for arm {arm} at period {t}, but arm {} was selected at period {}",
            p.arm, p.t
        ))),
        None => Err(Error::Sequencing(format!(
            "observation for arm {arm} at period {t} without a selection"
        ))),
    }
}

fn check_candidates(candidates: &[ArmId], t: Period) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates(t));
    }
    if !candidates.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Input("candidate set must be strictly ascending".into()));
    }
    Ok(())
}

fn check_feedback(d_sum: f64, input_bits: f64) -> Result<f64> {
    if !(input_bits > 0.0 && input_bits.is_finite()) {
        return Err(Error::Domain("observed input size must be positive"));
    }
    if !(d_sum >= 0.0 && d_sum.is_finite()) {
        return Err(Error::Domain("observed delay must be finite and non-negative"));
    }
    Ok(d_sum / input_bits)
}

/// ALTO and the UCB-family baselines.
#[derive(Debug, Clone)]
pub struct IndexPolicy {
    variant: IndexVariant,
    thresholds: NormalizationThresholds,
    zero_occurrence: bool,
    stats: PolicyStats,
    pending: Option<Pending>,
}

impl IndexPolicy {
    pub fn new(variant: IndexVariant, beta0: f64, thresholds: NormalizationThresholds) -> Result<Self> {
        if !(beta0 >= 0.0 && beta0.is_finite()) {
            return Err(Error::Config(format!("beta0 must be finite and >= 0, got {beta0}")));
        }
        Ok(Self {
            variant,
            thresholds,
            zero_occurrence: false,
            stats: PolicyStats {
                exploration_weight: beta0,
                ..PolicyStats::default()
            },
            pending: None,
        })
    }

    /// Records every occurrence time as 0, so the per-arm clock equals the
    /// global one.
    pub fn with_zero_occurrence(mut self) -> Self {
        self.zero_occurrence = true;
        self
    }

    pub fn variant(&self) -> IndexVariant {
        self.variant
    }

    pub fn stats(&self) -> &PolicyStats {
        &self.stats
    }

    pub fn thresholds(&self) -> &NormalizationThresholds {
        &self.thresholds
    }
}

impl Policy for IndexPolicy {
    fn kind(&self) -> PolicyKind {
        self.variant.kind()
    }

    fn select(&mut self, candidates: &[ArmId], input_bits: f64, t: Period) -> Result<Decision> {
        check_candidates(candidates, t)?;
        // Arms that left the candidate set are forgotten; a returning
        // vehicle starts over as a new arm.
        self.stats
            .arms
            .retain(|id, _| candidates.binary_search(id).is_ok());

        let decision = if let Some(&fresh) = candidates.iter().find(|id| !self.stats.arms.contains_key(id)) {
            Decision {
                chosen_sev: fresh,
                was_initialization: true,
                utility_snapshot: Vec::new(),
            }
        } else {
            let x_norm = normalize_input(input_bits, &self.thresholds);
            let beta = self.stats.beta();
            let mut snapshot = Vec::with_capacity(candidates.len());
            let mut best: Option<(ArmId, f64)> = None;
            for &id in candidates {
                let u = index_utility(self.variant, &self.stats.arms[&id], t, x_norm, beta)?;
                snapshot.push((id, u));
                if best.is_none_or(|(_, b)| u < b) {
                    best = Some((id, u));
                }
            }
            let (chosen, _) = best.expect("candidate set is nonempty");
            Decision {
                chosen_sev: chosen,
                was_initialization: false,
                utility_snapshot: snapshot,
            }
        };
        self.pending = Some(Pending {
            arm: decision.chosen_sev,
            t,
            initialization: decision.was_initialization,
        });
        Ok(decision)
    }

    fn observe(&mut self, arm: ArmId, d_sum: f64, input_bits: f64, t: Period) -> Result<()> {
        let bit_delay = check_feedback(d_sum, input_bits)?;
        let pending = take_pending(&mut self.pending, arm, t)?;
        if pending.initialization {
            let occurrence_time = if self.zero_occurrence { 0 } else { t };
            self.stats.arms.insert(
                arm,
                ArmStats {
                    empirical_bit_delay: bit_delay,
                    pull_count: 1,
                    occurrence_time,
                },
            );
        } else {
            let s = self.stats.arms.get_mut(&arm).ok_or(Error::UnknownArm(arm))?;
            let k = s.pull_count as f64;
            s.empirical_bit_delay = (s.empirical_bit_delay * k + bit_delay) / (k + 1.0);
            s.pull_count += 1;
        }
        self.stats.running_delay_max = Some(match self.stats.running_delay_max {
            Some(m) if m >= bit_delay => m,
            _ => bit_delay,
        });
        self.stats.total_pulls += 1;
        Ok(())
    }
}

/// Uniform choice among the candidates every period.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    pending: Option<Pending>,
}

impl RandomPolicy {
    /// Draws from the policy stream of `seed`, independent of the
    /// environment dynamics of the same seed.
    pub fn new(seed: u64) -> Self {
        Self {
            rng: stream_rng(seed, stream::POLICY),
            pending: None,
        }
    }
}

impl Policy for RandomPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Random
    }

    fn select(&mut self, candidates: &[ArmId], _input_bits: f64, t: Period) -> Result<Decision> {
        check_candidates(candidates, t)?;
        let chosen = candidates[self.rng.gen_range(0..candidates.len())];
        self.pending = Some(Pending {
            arm: chosen,
            t,
            initialization: false,
        });
        Ok(Decision {
            chosen_sev: chosen,
            was_initialization: false,
            utility_snapshot: Vec::new(),
        })
    }

    fn observe(&mut self, arm: ArmId, d_sum: f64, input_bits: f64, t: Period) -> Result<()> {
        check_feedback(d_sum, input_bits)?;
        take_pending(&mut self.pending, arm, t).map(|_| ())
    }
}

/// Genie that knows the true mean bit delay of every arm and always picks
/// the smallest one.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    means: BTreeMap<ArmId, f64>,
    pending: Option<Pending>,
}

impl OraclePolicy {
    pub fn new(means: BTreeMap<ArmId, f64>) -> Self {
        Self { means, pending: None }
    }
}

impl Policy for OraclePolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Oracle
    }

    fn select(&mut self, candidates: &[ArmId], _input_bits: f64, t: Period) -> Result<Decision> {
        check_candidates(candidates, t)?;
        let mut snapshot = Vec::with_capacity(candidates.len());
        let mut best: Option<(ArmId, f64)> = None;
        for &id in candidates {
            let mu = *self.means.get(&id).ok_or(Error::UnknownArm(id))?;
            snapshot.push((id, mu));
            if best.is_none_or(|(_, b)| mu < b) {
                best = Some((id, mu));
            }
        }
        let (chosen, _) = best.expect("candidate set is nonempty");
        self.pending = Some(Pending {
            arm: chosen,
            t,
            initialization: false,
        });
        Ok(Decision {
            chosen_sev: chosen,
            was_initialization: false,
            utility_snapshot: snapshot,
        })
    }

    fn observe(&mut self, arm: ArmId, d_sum: f64, input_bits: f64, t: Period) -> Result<()> {
        check_feedback(d_sum, input_bits)?;
        take_pending(&mut self.pending, arm, t).map(|_| ())
    }
}

/// Everything needed to instantiate any policy by kind.
#[derive(Debug, Clone)]
pub struct PolicyParams {
    pub beta0: f64,
    pub thresholds: NormalizationThresholds,
    pub zero_occurrence: bool,
    /// Seed of the random policy.
    pub seed: u64,
    /// True mean bit delays, required by the oracle.
    pub means: Option<BTreeMap<ArmId, f64>>,
}

pub fn build_policy(kind: PolicyKind, params: &PolicyParams) -> Result<Box<dyn Policy + Send>> {
    Ok(match kind.index_variant() {
        Some(variant) => {
            let mut p = IndexPolicy::new(variant, params.beta0, params.thresholds)?;
            if params.zero_occurrence {
                p = p.with_zero_occurrence();
            }
            Box::new(p)
        }
        None if kind == PolicyKind::Random => Box::new(RandomPolicy::new(params.seed)),
        None => {
            let means = params
                .means
                .clone()
                .ok_or_else(|| Error::Config("oracle policy needs true mean bit delays".into()))?;
            Box::new(OraclePolicy::new(means))
        }
    })
}
