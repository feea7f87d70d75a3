//! Arm models, reward sampling, empirical CDFs and 1-Wasserstein distances.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal as NormalDist};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::choquet::{
    choquet_quadrature, ContinuousCdf, FiniteSupportCdf, MixtureEvaluator, DEFAULT_TOL,
};
use crate::distortion::Distortion;
use crate::error::{config, domain, Result};
use crate::quadrature;
use crate::simplex::MixtureWeights;

/// Gaussian arms are truncated at `μ ± 8σ`.
pub const GAUSSIAN_SPAN: f64 = 8.0;
/// Shifted exponential arms are truncated at `c + 40/λ`.
pub const EXPONENTIAL_SPAN: f64 = 40.0;

fn default_sigma() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArmModel {
    Bernoulli {
        p: f64,
    },
    Gaussian {
        mu: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    ShiftedExponential {
        c: f64,
        lambda: f64,
    },
    Finite {
        supports: Vec<f64>,
        probs: Vec<f64>,
    },
}

/// The true CDF of an arm.
#[derive(Debug, Clone)]
pub enum ArmCdf {
    Step(FiniteSupportCdf),
    Continuous(ContinuousCdf),
}

impl ArmModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ArmModel::Bernoulli { p } if !(0.0..=1.0).contains(p) => {
                Err(config(format!("bernoulli arm needs p in [0,1], got {p}")))
            }
            ArmModel::Gaussian { mu, sigma }
                if !(mu.is_finite() && *sigma > 0.0 && sigma.is_finite()) =>
            {
                Err(config(format!(
                    "gaussian arm needs finite mu and sigma > 0, got ({mu}, {sigma})"
                )))
            }
            ArmModel::ShiftedExponential { c, lambda } if !(*c > 0.0 && *lambda > 0.0) => {
                Err(config(format!(
                    "shifted_exponential arm needs c > 0 and lambda > 0, got ({c}, {lambda})"
                )))
            }
            ArmModel::Finite { supports, probs } => {
                if supports.is_empty() || supports.len() != probs.len() {
                    return Err(config(
                        "finite arm needs matching, nonempty supports and probs",
                    ));
                }
                if probs.iter().any(|p| !(*p >= 0.0))
                    || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(config("finite arm probs must be nonnegative and sum to 1"));
                }
                if supports.iter().any(|x| !x.is_finite()) {
                    return Err(config("finite arm supports must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ArmModel::Bernoulli { p } => {
                if rng.gen::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            ArmModel::Gaussian { mu, sigma } => {
                NormalDist::new(*mu, *sigma).expect("validated").sample(rng)
            }
            ArmModel::ShiftedExponential { c, lambda } => {
                c + Exp::new(*lambda).expect("validated").sample(rng)
            }
            ArmModel::Finite { supports, probs } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (x, p) in supports.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *x;
                    }
                }
                *supports.last().expect("validated")
            }
        }
    }

    pub fn true_cdf(&self) -> ArmCdf {
        match self {
            ArmModel::Bernoulli { p } => {
                ArmCdf::Step(FiniteSupportCdf::bernoulli(*p).expect("validated"))
            }
            ArmModel::Finite { supports, probs } => {
                let atoms: Vec<(f64, f64)> = supports
                    .iter()
                    .copied()
                    .zip(probs.iter().copied())
                    .collect();
                ArmCdf::Step(FiniteSupportCdf::from_atoms(&atoms).expect("validated"))
            }
            ArmModel::Gaussian { .. } | ArmModel::ShiftedExponential { .. } => {
                let (lo, hi) = self.window();
                let f = self.cdf_fn();
                let breaks = match self {
                    ArmModel::ShiftedExponential { c, .. } => vec![*c],
                    _ => Vec::new(),
                };
                ArmCdf::Continuous(
                    ContinuousCdf::new(f, lo, hi)
                        .expect("window covers mass")
                        .with_breaks(breaks),
                )
            }
        }
    }

    /// `Q(x)` as a shareable closure.
    pub fn cdf_fn(&self) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        match self.clone() {
            ArmModel::Gaussian { mu, sigma } => {
                let n = Normal::new(mu, sigma).expect("validated");
                Arc::new(move |x| n.cdf(x))
            }
            ArmModel::ShiftedExponential { c, lambda } => Arc::new(move |x| {
                if x < c {
                    0.0
                } else {
                    1.0 - (-lambda * (x - c)).exp()
                }
            }),
            other => {
                let step = match other.true_cdf() {
                    ArmCdf::Step(s) => s,
                    ArmCdf::Continuous(_) => unreachable!(),
                };
                Arc::new(move |x| step.cdf(x))
            }
        }
    }

    /// Interval carrying all the mass (up to truncation).
    pub fn window(&self) -> (f64, f64) {
        match self {
            ArmModel::Bernoulli { .. } => (0.0, 1.0),
            ArmModel::Gaussian { mu, sigma } => {
                (mu - GAUSSIAN_SPAN * sigma, mu + GAUSSIAN_SPAN * sigma)
            }
            ArmModel::ShiftedExponential { c, lambda } => (*c, c + EXPONENTIAL_SPAN / lambda),
            ArmModel::Finite { supports, .. } => {
                let lo = supports.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = supports.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    /// Support bounds when the law is bounded.
    pub fn support_bounds(&self) -> Option<(f64, f64)> {
        match self {
            ArmModel::Bernoulli { .. } | ArmModel::Finite { .. } => Some(self.window()),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ArmModel::Bernoulli { p } => *p,
            ArmModel::Gaussian { mu, .. } => *mu,
            ArmModel::ShiftedExponential { c, lambda } => c + 1.0 / lambda,
            ArmModel::Finite { supports, probs } => {
                supports.iter().zip(probs).map(|(x, p)| x * p).sum()
            }
        }
    }

    pub fn is_step(&self) -> bool {
        matches!(self, ArmModel::Bernoulli { .. } | ArmModel::Finite { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    arms: Vec<ArmModel>,
}

impl BanditInstance {
    pub fn new(arms: Vec<ArmModel>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(config(format!(
                "a bandit instance needs at least 2 arms, got {}",
                arms.len()
            )));
        }
        for a in &arms {
            a.validate()?;
        }
        Ok(BanditInstance { arms })
    }

    pub fn bernoulli(ps: &[f64]) -> Result<Self> {
        Self::new(ps.iter().map(|&p| ArmModel::Bernoulli { p }).collect())
    }

    pub fn arms(&self) -> &[ArmModel] {
        &self.arms
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    /// Arm means when every arm is Bernoulli.
    pub fn bernoulli_means(&self) -> Option<Vec<f64>> {
        self.arms
            .iter()
            .map(|a| match a {
                ArmModel::Bernoulli { p } => Some(*p),
                _ => None,
            })
            .collect()
    }

    pub fn is_bernoulli(&self) -> bool {
        self.bernoulli_means().is_some()
    }

    /// Union of arm supports, if every arm is bounded.
    pub fn support_bounds(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &self.arms {
            let (l, h) = a.support_bounds()?;
            lo = lo.min(l);
            hi = hi.max(h);
        }
        Some((lo, hi))
    }

    pub fn evaluator(&self) -> InstanceEvaluator {
        InstanceEvaluator::new(self)
    }

    /// `V(α, F) = U_h(Σ α_i F_i)` with the true CDFs.
    pub fn value(&self, d: &Distortion, w: &MixtureWeights) -> Result<f64> {
        if w.len() != self.k() {
            return Err(domain(format!("{} weights for {} arms", w.len(), self.k())));
        }
        self.evaluator().value(d, w.as_slice())
    }

    /// `U_h(F_i)` for each arm.
    pub fn solitary_values(&self, d: &Distortion) -> Result<Vec<f64>> {
        let ev = self.evaluator();
        (0..self.k())
            .map(|i| ev.value(d, MixtureWeights::unit(self.k(), i).as_slice()))
            .collect()
    }

    /// Mixture CDF `Σ w_i F_i` as a continuous CDF over the union window.
    pub fn mixture_cdf(&self, w: &[f64]) -> ContinuousCdf {
        let fns: Vec<_> = self.arms.iter().map(|a| a.cdf_fn()).collect();
        let weights = w.to_vec();
        let (lo, hi) = self.window();
        let mut breaks = Vec::new();
        for a in &self.arms {
            match a {
                ArmModel::ShiftedExponential { c, .. } => breaks.push(*c),
                ArmModel::Bernoulli { .. } => breaks.extend([0.0, 1.0]),
                ArmModel::Finite { supports, .. } => breaks.extend(supports.iter().copied()),
                ArmModel::Gaussian { .. } => {}
            }
        }
        let f = move |x: f64| fns.iter().zip(&weights).map(|(f, w)| w * f(x)).sum::<f64>();
        ContinuousCdf::new(Arc::new(f), lo, hi)
            .expect("union window covers mass")
            .with_breaks(breaks)
    }

    fn window(&self) -> (f64, f64) {
        self.arms
            .iter()
            .map(|a| a.window())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (a, b)| {
                (l.min(a), h.max(b))
            })
    }
}

/// Evaluates `V(·, F)` repeatedly for one instance.
#[derive(Debug, Clone)]
pub enum InstanceEvaluator {
    Bernoulli(Vec<f64>),
    Step(MixtureEvaluator),
    Continuous(BanditInstance),
}

impl InstanceEvaluator {
    pub fn new(inst: &BanditInstance) -> Self {
        if let Some(ps) = inst.bernoulli_means() {
            return InstanceEvaluator::Bernoulli(ps);
        }
        if inst.arms.iter().all(|a| a.is_step()) {
            let cdfs: Vec<FiniteSupportCdf> = inst
                .arms
                .iter()
                .map(|a| match a.true_cdf() {
                    ArmCdf::Step(s) => s,
                    ArmCdf::Continuous(_) => unreachable!(),
                })
                .collect();
            let refs: Vec<&FiniteSupportCdf> = cdfs.iter().collect();
            return InstanceEvaluator::Step(MixtureEvaluator::new(&refs));
        }
        InstanceEvaluator::Continuous(inst.clone())
    }

    pub fn value(&self, d: &Distortion, w: &[f64]) -> Result<f64> {
        match self {
            InstanceEvaluator::Bernoulli(ps) => Ok(d.h(ps.iter().zip(w).map(|(p, a)| p * a).sum())),
            InstanceEvaluator::Step(ev) => Ok(ev.eval(d, w)),
            InstanceEvaluator::Continuous(inst) => {
                choquet_quadrature(d, &inst.mixture_cdf(w), DEFAULT_TOL)
            }
        }
    }
}

/// Total-order key for reward values.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Running empirical CDF of one arm's rewards.
#[derive(Debug, Clone, Default)]
pub struct EmpiricalCdf {
    counts: BTreeMap<Key, u64>,
    n: u64,
    sum: f64,
    /// Observations outside `{0, 1}`.
    non_binary: u64,
}

impl EmpiricalCdf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        // Normalize -0.0 so it shares a key with 0.0.
        let x = if x == 0.0 { 0.0 } else { x };
        *self.counts.entry(Key(x)).or_insert(0) += 1;
        self.n += 1;
        self.sum += x;
        if x != 0.0 && x != 1.0 {
            self.non_binary += 1;
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// All observations lie in `{0, 1}`.
    pub fn is_binary(&self) -> bool {
        self.non_binary == 0
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let below: u64 = self.counts.range(..=Key(x)).map(|(_, c)| c).sum();
        below as f64 / self.n as f64
    }

    pub fn to_step_cdf(&self) -> Result<FiniteSupportCdf> {
        if self.n == 0 {
            return Err(domain("empirical CDF has no samples"));
        }
        let mut supports = Vec::with_capacity(self.counts.len());
        let mut cum = Vec::with_capacity(self.counts.len());
        let mut acc = 0u64;
        for (k, c) in &self.counts {
            acc += c;
            supports.push(k.0);
            cum.push(acc as f64 / self.n as f64);
        }
        FiniteSupportCdf::from_cumulative(supports, cum)
    }
}

/// Exact `∫ |F - G| dx` for step CDFs.
pub fn wasserstein1_step(f: &FiniteSupportCdf, g: &FiniteSupportCdf) -> f64 {
    let mut xs: Vec<f64> = f.supports().iter().chain(g.supports()).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2)
        .map(|w| (f.cdf(w[0]) - g.cdf(w[0])).abs() * (w[1] - w[0]))
        .sum()
}

/// `W1(Σα_i F_i, Σβ_i F_i) / ‖α - β‖₁` with the true CDFs.
pub fn mixture_w_ratio(
    inst: &BanditInstance,
    alpha: &MixtureWeights,
    beta: &MixtureWeights,
) -> Result<f64> {
    if alpha.len() != inst.k() || beta.len() != inst.k() {
        return Err(domain("mixture weights do not match the number of arms"));
    }
    let l1 = alpha.l1_distance(beta);
    if l1 == 0.0 {
        return Err(domain("mixture ratio is undefined for identical weights"));
    }
    let diff: Vec<f64> = alpha
        .as_slice()
        .iter()
        .zip(beta.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let w1 = if let Some(ps) = inst.bernoulli_means() {
        ps.iter().zip(&diff).map(|(p, d)| p * d).sum::<f64>().abs()
    } else if inst.arms.iter().all(|a| a.is_step()) {
        let mix = |w: &MixtureWeights| -> Result<FiniteSupportCdf> {
            let mut atoms = Vec::new();
            for (arm, wi) in inst.arms.iter().zip(w.as_slice()) {
                if let ArmCdf::Step(s) = arm.true_cdf() {
                    atoms.extend(
                        s.supports()
                            .iter()
                            .copied()
                            .zip(s.masses().into_iter().map(|m| m * wi)),
                    );
                }
            }
            FiniteSupportCdf::from_atoms(&atoms)
        };
        wasserstein1_step(&mix(alpha)?, &mix(beta)?)
    } else {
        let fns: Vec<_> = inst.arms.iter().map(|a| a.cdf_fn()).collect();
        let (lo, hi) = inst.window();
        let cdf = inst.mixture_cdf(alpha.as_slice());
        let integrand = |x: f64| {
            fns.iter()
                .zip(&diff)
                .map(|(f, d)| d * f(x))
                .sum::<f64>()
                .abs()
        };
        quadrature::integrate_split(integrand, lo, hi, cdf.breaks(), 1e-9)?
    };
    Ok(w1 / l1)
}

/// Confidence radius `16 (√(2e log T) + 32) / √τ`.
pub fn concentration_radius(tau: u64, log_t: f64) -> Result<f64> {
    if tau == 0 {
        return Err(domain("confidence radius needs at least one sample"));
    }
    if !(log_t > 0.0) {
        return Err(domain(format!("log horizon must be positive, got {log_t}")));
    }
    Ok(radius_numerator(2.0 * std::f64::consts::E * log_t) / (tau as f64).sqrt())
}

/// `16 (√x + 32)`: the τ-free factor shared by the confidence radii.
pub fn radius_numerator(x: f64) -> f64 {
    16.0 * (x.sqrt() + 32.0)
}

/// Stream ids within a trial.
pub const REWARD_STREAM: u64 = 0;
pub const POLICY_STREAM: u64 = 1;

/// Independent generator for `(seed, trial, stream)`.
pub fn trial_rng(seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(2).wrapping_add(stream));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn degenerate_arms() {
        let mut rng = trial_rng(1, 0, 0);
        for _ in 0..100 {
            assert_eq!(ArmModel::Bernoulli { p: 1.0 }.sample(&mut rng), 1.0);
            assert_eq!(ArmModel::Bernoulli { p: 0.0 }.sample(&mut rng), 0.0);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let arm = ArmModel::Gaussian {
            mu: 3.0,
            sigma: 1.0,
        };
        let a: Vec<f64> = (0..5)
            .map({
                let mut r = trial_rng(42, 3, REWARD_STREAM);
                move |_| arm.sample(&mut r)
            })
            .collect();
        let arm = ArmModel::Gaussian {
            mu: 3.0,
            sigma: 1.0,
        };
        let b: Vec<f64> = (0..5)
            .map({
                let mut r = trial_rng(42, 3, REWARD_STREAM);
                move |_| arm.sample(&mut r)
            })
            .collect();
        assert_eq!(a, b);
        let mut other = trial_rng(42, 4, REWARD_STREAM);
        assert_ne!(
            a[0],
            ArmModel::Gaussian {
                mu: 3.0,
                sigma: 1.0
            }
            .sample(&mut other)
        );
    }

    #[test]
    fn sample_means() {
        let mut rng = trial_rng(9, 0, 0);
        for arm in [
            ArmModel::Bernoulli { p: 0.3 },
            ArmModel::Gaussian {
                mu: -1.0,
                sigma: 1.0,
            },
            ArmModel::ShiftedExponential {
                c: 1.0,
                lambda: 2.0,
            },
            ArmModel::Finite {
                supports: vec![-1.0, 2.0],
                probs: vec![0.25, 0.75],
            },
        ] {
            let n = 200_000;
            let m: f64 = (0..n).map(|_| arm.sample(&mut rng)).sum::<f64>() / n as f64;
            assert!((m - arm.mean()).abs() < 0.02, "{arm:?}: {m}");
        }
    }

    #[test]
    fn wasserstein_examples() {
        let b2 = FiniteSupportCdf::bernoulli(0.2).unwrap();
        let b8 = FiniteSupportCdf::bernoulli(0.8).unwrap();
        assert!((wasserstein1_step(&b2, &b8) - 0.6).abs() < 1e-15);
        assert_eq!(wasserstein1_step(&b2, &b2), 0.0);
        let half = FiniteSupportCdf::from_cumulative(vec![0.0, 1.0], vec![0.5, 1.0]).unwrap();
        let one = FiniteSupportCdf::point_mass(1.0).unwrap();
        assert!((wasserstein1_step(&half, &one) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ratio_examples() {
        let inst = BanditInstance::bernoulli(&[0.2, 0.8]).unwrap();
        let r = mixture_w_ratio(
            &inst,
            &MixtureWeights::unit(2, 0),
            &MixtureWeights::unit(2, 1),
        )
        .unwrap();
        assert!((r - 0.3).abs() < 1e-15);
        let same = BanditInstance::bernoulli(&[0.4, 0.4]).unwrap();
        let r = mixture_w_ratio(
            &same,
            &MixtureWeights::unit(2, 0),
            &MixtureWeights::uniform(2),
        )
        .unwrap();
        assert_eq!(r, 0.0);
        assert!(mixture_w_ratio(
            &inst,
            &MixtureWeights::uniform(2),
            &MixtureWeights::uniform(2)
        )
        .is_err());
    }

    #[test]
    fn gaussian_ratio_matches_closed_form() {
        // W1(N(μ1,1), N(μ2,1)) = |μ1 - μ2|, ‖e1 - e2‖₁ = 2.
        let inst = BanditInstance::new(vec![
            ArmModel::Gaussian {
                mu: 0.3,
                sigma: 1.0,
            },
            ArmModel::Gaussian {
                mu: 1.5,
                sigma: 1.0,
            },
        ])
        .unwrap();
        let r = mixture_w_ratio(
            &inst,
            &MixtureWeights::unit(2, 0),
            &MixtureWeights::unit(2, 1),
        )
        .unwrap();
        assert!((r - 0.6).abs() < 1e-8, "{r}");
        let mut rng = trial_rng(5, 0, 0);
        for _ in 0..1000 {
            let a: f64 = rng.gen();
            let b: f64 = rng.gen();
            if (a - b).abs() < 1e-6 {
                continue;
            }
            let r = mixture_w_ratio(
                &inst,
                &MixtureWeights::new(vec![a, 1.0 - a]).unwrap(),
                &MixtureWeights::new(vec![b, 1.0 - b]).unwrap(),
            )
            .unwrap();
            assert!(r <= (2.0 * std::f64::consts::PI).sqrt());
            assert!((r - 0.6).abs() < 1e-6);
        }
    }

    #[test]
    fn radius_examples() {
        let r = concentration_radius(100, 1.0).unwrap();
        let expect = 16.0 * ((2.0 * std::f64::consts::E).sqrt() + 32.0) / 10.0;
        assert!((r - expect).abs() < 1e-12);
        assert!((r - 54.93).abs() < 0.01);
        assert!((concentration_radius(400, 1.0).unwrap() - r / 2.0).abs() < 1e-12);
        let l = (1e6f64).ln();
        let big = concentration_radius(1, l).unwrap();
        assert!((big - 16.0 * ((2.0 * std::f64::consts::E * 13.8155).sqrt() + 32.0)).abs() < 1e-3);
        assert!(concentration_radius(0, 1.0).is_err());
    }

    #[test]
    fn empirical_cdf_counts_fractions() {
        let mut e = EmpiricalCdf::new();
        for x in [0.0, 1.0, 1.0, -0.0, 2.5] {
            e.push(x);
        }
        assert_eq!(e.count(), 5);
        assert!((e.cdf(0.0) - 0.4).abs() < 1e-15);
        assert!((e.cdf(1.0) - 0.8).abs() < 1e-15);
        assert_eq!(e.cdf(-1.0), 0.0);
        assert!(!e.is_binary());
        let s = e.to_step_cdf().unwrap();
        assert_eq!(s.supports(), &[0.0, 1.0, 2.5]);
    }

    #[test]
    fn lemma3_tail_bound_holds_in_frequency() {
        use rand_distr::Binomial;
        let p = 0.3;
        let mut rng = trial_rng(11, 0, 0);
        for tau in [10_000u64, 100_000] {
            let reps = 10_000;
            let draws: Vec<f64> = (0..reps)
                .map(|_| {
                    (Binomial::new(tau, p).unwrap().sample(&mut rng) as f64 / tau as f64 - p).abs()
                })
                .collect();
            for y in [0.001, 0.01, 0.05, 0.2, 1.0, 2.0, 6.0, 10.0] {
                let freq = draws.iter().filter(|w| **w > y).count() as f64 / reps as f64;
                let offset = y - 512.0 / (tau as f64).sqrt();
                let bound = if offset <= 0.0 {
                    1.0
                } else {
                    (2.0 * (-(tau as f64) / (256.0 * std::f64::consts::E) * offset * offset).exp())
                        .min(1.0)
                };
                assert!(freq <= bound, "tau={tau} y={y}: {freq} > {bound}");
            }
        }
    }

    fn random_step(rng: &mut ChaCha8Rng) -> FiniteSupportCdf {
        let m = rng.gen_range(1..6);
        let atoms: Vec<(f64, f64)> = (0..m)
            .map(|_| (rng.gen_range(-3.0..3.0), rng.gen_range(0.01..1.0)))
            .collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let atoms: Vec<(f64, f64)> = atoms.into_iter().map(|(x, m)| (x, m / total)).collect();
        FiniteSupportCdf::from_atoms(&atoms).unwrap()
    }

    proptest! {
        #[test]
        fn wasserstein_is_a_metric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (f, g, h) = (random_step(&mut rng), random_step(&mut rng), random_step(&mut rng));
            let fg = wasserstein1_step(&f, &g);
            prop_assert!((fg - wasserstein1_step(&g, &f)).abs() < 1e-12);
            prop_assert!(wasserstein1_step(&f, &f) == 0.0);
            prop_assert!(fg <= wasserstein1_step(&f, &h) + wasserstein1_step(&h, &g) + 1e-12);
            if f != g {
                prop_assert!(fg > 0.0);
            }
        }

        #[test]
        fn empirical_cdf_matches_definition(xs in proptest::collection::vec(-5.0..5.0f64, 1..60), q in -6.0..6.0f64) {
            let mut e = EmpiricalCdf::new();
            for &x in &xs { e.push(x); }
            let direct = xs.iter().filter(|&&x| x <= q).count() as f64 / xs.len() as f64;
            prop_assert!((e.cdf(q) - direct).abs() < 1e-15);
            prop_assert!((e.to_step_cdf().unwrap().cdf(q) - direct).abs() < 1e-12);
        }
    }
}
