//! Sequential arm-selection rules.
//!
//! Every policy sees the same loop: `select` an arm with the round counter
//! `t = Σ τ_i` of completed rounds, then `observe` its reward. Ties between
//! grid points go to the smallest lattice index, ties between arms to the
//! smallest arm index.

mod cirt;
mod etc;
mod ucb;

pub use cirt::{box_half_width, split_delta, Cirt, CirtMode, FixedAnytime};
pub use etc::Etc;
pub use ucb::{CeUcb, PmUcb};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::choquet::MixtureEvaluator;
use crate::distortion::Distortion;
use crate::envs::{BanditInstance, EmpiricalCdf};
use crate::error::{config, Result};
use crate::oracle::{choose_epsilon, EpsilonRule, GapVariant};
use crate::simplex::{Grid, MixtureWeights};

/// Utility ties closer than this keep the incumbent.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Uniform,
    Etc,
    PmUcb,
    CeUcb,
    Cirt,
    FixedAnytime,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Uniform => "uniform",
            Algorithm::Etc => "etc",
            Algorithm::PmUcb => "pm_ucb",
            Algorithm::CeUcb => "ce_ucb",
            Algorithm::Cirt => "cirt",
            Algorithm::FixedAnytime => "fixed_anytime",
        }
    }
}

fn default_beta() -> f64 {
    1.0
}
fn default_rho() -> f64 {
    0.5
}
fn default_a() -> u32 {
    4
}
fn default_eps_target() -> f64 {
    0.06
}
fn default_delta() -> f64 {
    0.05
}
fn default_xi() -> f64 {
    0.5
}
fn default_scale() -> f64 {
    1.0
}

/// Immutable policy parameters. Unused fields are ignored by algorithms that
/// do not need them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub algorithm: Algorithm,
    /// Series name in outputs; defaults to the algorithm tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Grid resolution; derived from the horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Gap exponent fed to the resolution rule.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Exploration rate for the UCB variants.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Suboptimality gap for ETC; computed from the true instance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default = "default_variant")]
    pub gap_variant: GapVariant,
    #[serde(default = "default_a")]
    pub a: u32,
    #[serde(default = "default_eps_target")]
    pub eps_target: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    /// Multiplier on every confidence radius. 1 keeps the stated constants.
    #[serde(default = "default_scale")]
    pub radius_scale: f64,
}

fn default_variant() -> GapVariant {
    GapVariant::Delta12
}

impl PolicyConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        PolicyConfig {
            algorithm,
            label: None,
            eps: None,
            beta: default_beta(),
            rho: default_rho(),
            gap: None,
            gap_variant: default_variant(),
            a: default_a(),
            eps_target: default_eps_target(),
            delta: default_delta(),
            xi: default_xi(),
            radius_scale: default_scale(),
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.algorithm.tag().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(config(format!("rho must lie in (0,1), got {}", self.rho)));
        }
        if !(self.xi > 0.0) {
            return Err(config(format!("xi must be positive, got {}", self.xi)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if !(self.beta > 0.0) {
            return Err(config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.radius_scale > 0.0) {
            return Err(config(format!(
                "radius_scale must be positive, got {}",
                self.radius_scale
            )));
        }
        if let Some(e) = self.eps {
            if !(e > 0.0 && e <= 1.0) {
                return Err(config(format!("eps must lie in (0,1], got {e}")));
            }
        }
        if let Some(g) = self.gap {
            if !(g > 0.0) {
                return Err(config(format!("gap must be positive, got {g}")));
            }
        }
        if matches!(self.algorithm, Algorithm::Cirt | Algorithm::FixedAnytime) {
            crate::simplex::phase_count(self.a, self.eps_target)?;
        }
        Ok(())
    }

    /// Grid resolution for a horizon-aware algorithm.
    pub fn resolve_eps(&self, rule: EpsilonRule, k: usize, q: f64, horizon: u64) -> f64 {
        self.eps
            .unwrap_or_else(|| choose_epsilon(rule, k, q, self.beta, horizon))
    }

    /// Instantiates the policy for one trial.
    pub fn build(
        &self,
        inst: &BanditInstance,
        d: &Distortion,
        horizon: u64,
    ) -> Result<Box<dyn Policy>> {
        self.validate()?;
        Ok(match self.algorithm {
            Algorithm::Uniform => Box::new(Uniform::new(inst.k())),
            Algorithm::Etc => Box::new(Etc::new(self, inst, d, horizon)?),
            Algorithm::PmUcb => Box::new(PmUcb::new(self, inst, d, horizon)?),
            Algorithm::CeUcb => Box::new(CeUcb::new(self, inst, d, horizon)?),
            Algorithm::Cirt => Box::new(Cirt::new(self, inst, d)?),
            Algorithm::FixedAnytime => Box::new(FixedAnytime::new(self, inst, d)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseEventKind {
    /// A refinement phase certified its maximizer.
    PhaseEnd,
    /// The tracking grid was built and its target fixed.
    Track,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEvent {
    /// Completed rounds when the event fired.
    pub t: u64,
    pub level: u32,
    pub kind: PhaseEventKind,
    pub center: MixtureWeights,
}

pub trait Policy: Send {
    fn select(&mut self, rng: &mut ChaCha8Rng) -> usize;

    fn observe(&mut self, arm: usize, reward: f64);

    /// Pull counts `τ`.
    fn counts(&self) -> &[u64];

    /// The mixture currently being tracked, if any.
    fn target(&self) -> Option<MixtureWeights> {
        None
    }

    fn events(&self) -> &[PhaseEvent] {
        &[]
    }

    /// Non-fatal remarks raised while configuring.
    fn notes(&self) -> &[String] {
        &[]
    }
}

/// Pull counts and empirical CDFs shared by all policies.
#[derive(Debug, Clone)]
pub struct ArmStats {
    pub tau: Vec<u64>,
    pub empirical: Vec<EmpiricalCdf>,
    sums: Vec<f64>,
}

impl ArmStats {
    pub fn new(k: usize) -> Self {
        ArmStats {
            tau: vec![0; k],
            empirical: vec![EmpiricalCdf::new(); k],
            sums: vec![0.0; k],
        }
    }

    pub fn k(&self) -> usize {
        self.tau.len()
    }

    /// Completed rounds.
    pub fn t(&self) -> u64 {
        self.tau.iter().sum()
    }

    pub fn push(&mut self, arm: usize, reward: f64) {
        self.tau[arm] += 1;
        self.sums[arm] += reward;
        self.empirical[arm].push(reward);
    }

    pub fn means(&self) -> Vec<f64> {
        self.tau
            .iter()
            .zip(&self.sums)
            .map(|(&n, &s)| if n == 0 { 0.0 } else { s / n as f64 })
            .collect()
    }

    pub fn all_binary(&self) -> bool {
        self.empirical.iter().all(EmpiricalCdf::is_binary)
    }

    /// Empirical utilities of mixtures. Requires every arm sampled.
    pub fn snapshot(&self) -> Result<EmpiricalView> {
        if self.all_binary() {
            return Ok(EmpiricalView::Binary(self.means()));
        }
        let cdfs = self
            .empirical
            .iter()
            .map(EmpiricalCdf::to_step_cdf)
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<_> = cdfs.iter().collect();
        Ok(EmpiricalView::Step(MixtureEvaluator::new(&refs)))
    }
}

/// Frozen empirical CDFs ready for repeated mixture evaluation.
pub enum EmpiricalView {
    /// All rewards in `{0,1}`: the mixture is Bernoulli with the mixed mean.
    Binary(Vec<f64>),
    Step(MixtureEvaluator),
}

impl EmpiricalView {
    pub fn value(&self, d: &Distortion, w: &[f64]) -> f64 {
        match self {
            EmpiricalView::Binary(p) => d.h(dot(w, p)),
            EmpiricalView::Step(ev) => ev.eval(d, w),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `argmax_i {t·a_i − τ_i}`, smallest index on ties.
pub fn undersampled_arm(t: u64, a: &[f64], tau: &[u64]) -> usize {
    let tf = t as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (&ai, &ni)) in a.iter().zip(tau).enumerate() {
        let deficit = tf * ai - ni as f64;
        if deficit > best.1 {
            best = (i, deficit);
        }
    }
    best.0
}

/// Least-pulled arm among those with `τ_i <= ⌈(t/K)^{1/(1+ξ)}⌉`.
pub fn forced_exploration(t: u64, xi: f64, tau: &[u64]) -> Option<usize> {
    let floor = ((t as f64 / tau.len() as f64).powf(1.0 / (1.0 + xi))).ceil() as u64;
    tau.iter()
        .enumerate()
        .filter(|(_, &n)| n <= floor)
        .min_by_key(|(i, &n)| (n, *i))
        .map(|(i, _)| i)
}

/// Grid maximizer of `score`, keeping `incumbent` when it is within
/// [`TIE_TOL`] of the maximum.
pub(crate) fn argmax_with_persistence(
    grid: &Grid,
    scores: &[f64],
    incumbent: Option<usize>,
) -> usize {
    let mut best = 0;
    for i in 1..grid.len() {
        if scores[i] > scores[best] + TIE_TOL {
            best = i;
        }
    }
    match incumbent {
        Some(j) if scores[j] >= scores[best] - TIE_TOL => j,
        _ => best,
    }
}

/// Round-robin in shuffled blocks of `K`: counts never differ by more than
/// one and the remainder of any horizon falls on random arms.
#[derive(Debug, Clone)]
pub struct Uniform {
    stats: ArmStats,
    block: Vec<usize>,
}

impl Uniform {
    pub fn new(k: usize) -> Self {
        Uniform {
            stats: ArmStats::new(k),
            block: Vec::new(),
        }
    }
}

impl Policy for Uniform {
    fn select(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.block.is_empty() {
            self.block = (0..self.stats.k()).collect();
            self.block.shuffle(rng);
        }
        self.block.pop().expect("refilled")
    }

    fn observe(&mut self, arm: usize, reward: f64) {
        self.stats.push(arm, reward);
    }

    fn counts(&self) -> &[u64] {
        &self.stats.tau
    }
}

/// Pure under-sampling toward a fixed target from the first round.
#[derive(Debug, Clone)]
pub struct FrozenTarget {
    stats: ArmStats,
    target: MixtureWeights,
}

impl FrozenTarget {
    pub fn new(target: MixtureWeights) -> Self {
        FrozenTarget {
            stats: ArmStats::new(target.len()),
            target,
        }
    }
}

impl Policy for FrozenTarget {
    fn select(&mut self, _rng: &mut ChaCha8Rng) -> usize {
        undersampled_arm(self.stats.t(), self.target.as_slice(), &self.stats.tau)
    }

    fn observe(&mut self, arm: usize, reward: f64) {
        self.stats.push(arm, reward);
    }

    fn counts(&self) -> &[u64] {
        &self.stats.tau
    }

    fn target(&self) -> Option<MixtureWeights> {
        Some(self.target.clone())
    }
}

/// Hölder parameters of `d` on the instance's support.
pub(crate) fn holder_for(inst: &BanditInstance, d: &Distortion) -> Result<(f64, f64)> {
    d.holder_params(inst.support_bounds())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::trial_rng;
    use proptest::prelude::*;

    fn drive(p: &mut dyn Policy, rounds: u64) {
        let mut rng = trial_rng(1, 0, 1);
        for _ in 0..rounds {
            let a = p.select(&mut rng);
            p.observe(a, 0.0);
        }
    }

    #[test]
    fn undersampling_example() {
        assert_eq!(undersampled_arm(10, &[0.5, 0.5], &[6, 4]), 1);
        assert_eq!(undersampled_arm(10, &[0.5, 0.5], &[5, 5]), 0);
    }

    #[test]
    fn forced_exploration_floor() {
        assert_eq!(forced_exploration(0, 0.5, &[0, 0]), Some(0));
        assert_eq!(forced_exploration(100, 0.5, &[85, 15]), None);
        assert_eq!(forced_exploration(100, 0.5, &[86, 14]), Some(1));
        assert_eq!(forced_exploration(100, 0.5, &[96, 4]), Some(1));
    }

    #[test]
    fn uniform_counts() {
        let mut u = Uniform::new(3);
        drive(&mut u, 9);
        assert_eq!(u.counts(), &[3, 3, 3]);
        let mut u = Uniform::new(2);
        drive(&mut u, 7);
        let mut c = u.counts().to_vec();
        c.sort();
        assert_eq!(c, vec![3, 4]);
    }

    #[test]
    fn config_validation() {
        let mut c = PolicyConfig::new(Algorithm::CeUcb);
        c.rho = 1.0;
        assert!(c.validate().unwrap_err().is_config());
        let mut c = PolicyConfig::new(Algorithm::Cirt);
        c.xi = 0.0;
        assert!(c.validate().is_err());
        let mut c = PolicyConfig::new(Algorithm::Cirt);
        c.a = 2;
        assert!(c.validate().is_err());
        assert!(PolicyConfig::new(Algorithm::Etc).validate().is_ok());
    }

    proptest! {
        #[test]
        fn uniform_counts_stay_balanced(k in 2usize..6, t in 1u64..200, seed in 0u64..1000) {
            let mut u = Uniform::new(k);
            let mut rng = trial_rng(seed, 0, 1);
            for _ in 0..t {
                let a = u.select(&mut rng);
                u.observe(a, 1.0);
                let c = u.counts();
                prop_assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
            }
            prop_assert_eq!(u.counts().iter().sum::<u64>(), t);
        }

        #[test]
        fn frozen_target_tracks(raw in proptest::collection::vec(0.01..1.0f64, 2..5)) {
            let s: f64 = raw.iter().sum();
            let a = MixtureWeights::new(raw.iter().map(|x| x / s).collect()).unwrap();
            let k = a.len() as f64;
            let mut p = FrozenTarget::new(a.clone());
            let mut rng = trial_rng(0, 0, 1);
            for t in 1..=5_000u64 {
                let arm = p.select(&mut rng);
                p.observe(arm, 0.0);
                if t >= 100 {
                    let worst = p.counts().iter().zip(a.as_slice()).map(|(&n, &w)| (n as f64 / t as f64 - w).abs()).fold(0.0, f64::max);
                    prop_assert!(worst < k / t as f64, "t={t} worst={worst}");
                }
            }
        }
    }
}
