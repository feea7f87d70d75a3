//! Optimistic mixture selection over the offset grid, followed by
//! under-sampling toward the chosen mixture.

use rand_chacha::ChaCha8Rng;

use super::{
    argmax_with_persistence, dot, holder_for, undersampled_arm, ArmStats, Policy, PolicyConfig,
};
use crate::distortion::Distortion;
use crate::envs::{concentration_radius, BanditInstance};
use crate::error::{config, Result};
use crate::oracle::EpsilonRule;
use crate::simplex::{enumerate_grid, Grid, GridSpec, MixtureWeights};

#[derive(Debug, Clone, Copy)]
enum Bonus {
    /// Empirical utility plus `𝓛 Σ (a_i r_i)^q`.
    Additive { q: f64, l: f64 },
    /// Maximum of `h` over the mixture-mean interval of Bernoulli
    /// confidence intervals.
    BernoulliInterval,
}

#[derive(Debug, Clone)]
struct UcbCore {
    stats: ArmStats,
    d: Distortion,
    grid: Grid,
    bonus: Bonus,
    eps: f64,
    log_t: f64,
    radius_scale: f64,
    explore_per_arm: u64,
    incumbent: Option<usize>,
    scores: Vec<f64>,
}

impl UcbCore {
    fn new(
        cfg: &PolicyConfig,
        inst: &BanditInstance,
        d: &Distortion,
        horizon: u64,
        bonus: Bonus,
    ) -> Result<Self> {
        if horizon < 2 {
            return Err(config("UCB policies need a horizon of at least 2"));
        }
        let k = inst.k();
        let (q, _) = holder_for(inst, d)?;
        let eps = cfg.resolve_eps(EpsilonRule::Ucb, k, q, horizon);
        let grid = enumerate_grid(&GridSpec::ucb(k, eps))?;
        let explore_per_arm = (cfg.rho * horizon as f64 * eps / 4.0).ceil().max(1.0) as u64;
        Ok(UcbCore {
            stats: ArmStats::new(k),
            d: d.clone(),
            scores: vec![0.0; grid.len()],
            grid,
            bonus,
            eps,
            log_t: (horizon as f64).ln(),
            radius_scale: cfg.radius_scale,
            explore_per_arm,
            incumbent: None,
        })
    }

    fn radii(&self) -> Vec<f64> {
        self.stats
            .tau
            .iter()
            .map(|&n| {
                self.radius_scale * concentration_radius(n, self.log_t).expect("explored arms")
            })
            .collect()
    }

    fn select(&mut self) -> usize {
        let k = self.stats.k();
        let t = self.stats.t();
        if t < k as u64 * self.explore_per_arm {
            return (t % k as u64) as usize;
        }
        let radii = self.radii();
        match self.bonus {
            Bonus::Additive { q, l } => {
                let view = self.stats.snapshot().expect("explored arms");
                for (s, w) in self.scores.iter_mut().zip(self.grid.iter()) {
                    let spread: f64 = w.iter().zip(&radii).map(|(a, r)| (a * r).powf(q)).sum();
                    *s = view.value(&self.d, w) + l * spread;
                }
            }
            Bonus::BernoulliInterval => {
                let p = self.stats.means();
                let lo: Vec<f64> = p
                    .iter()
                    .zip(&radii)
                    .map(|(m, r)| (m - r).max(0.0))
                    .collect();
                let hi: Vec<f64> = p
                    .iter()
                    .zip(&radii)
                    .map(|(m, r)| (m + r).min(1.0))
                    .collect();
                for (s, w) in self.scores.iter_mut().zip(self.grid.iter()) {
                    *s = self.d.max_on(dot(w, &lo), dot(w, &hi));
                }
            }
        }
        let best = argmax_with_persistence(&self.grid, &self.scores, self.incumbent);
        self.incumbent = Some(best);
        undersampled_arm(t, self.grid.point(best), &self.stats.tau)
    }

    fn target(&self) -> Option<MixtureWeights> {
        self.incumbent.map(|i| self.grid.weights(i))
    }
}

/// Additive-bonus UCB over mixtures; works for any environment.
#[derive(Debug, Clone)]
pub struct CeUcb(UcbCore);

impl CeUcb {
    pub fn new(
        cfg: &PolicyConfig,
        inst: &BanditInstance,
        d: &Distortion,
        horizon: u64,
    ) -> Result<Self> {
        let (q, l) = holder_for(inst, d)?;
        Ok(CeUcb(UcbCore::new(
            cfg,
            inst,
            d,
            horizon,
            Bonus::Additive { q, l },
        )?))
    }

    pub fn eps(&self) -> f64 {
        self.0.eps
    }

    pub fn explore_per_arm(&self) -> u64 {
        self.0.explore_per_arm
    }

    pub fn grid(&self) -> &Grid {
        &self.0.grid
    }
}

/// Optimistic mixture utility over Bernoulli confidence intervals.
#[derive(Debug, Clone)]
pub struct PmUcb(UcbCore);

impl PmUcb {
    pub fn new(
        cfg: &PolicyConfig,
        inst: &BanditInstance,
        d: &Distortion,
        horizon: u64,
    ) -> Result<Self> {
        if !inst.is_bernoulli() {
            return Err(config(
                "pm_ucb supports Bernoulli arms only; use ce_ucb for other environments",
            ));
        }
        Ok(PmUcb(UcbCore::new(
            cfg,
            inst,
            d,
            horizon,
            Bonus::BernoulliInterval,
        )?))
    }

    pub fn eps(&self) -> f64 {
        self.0.eps
    }

    pub fn explore_per_arm(&self) -> u64 {
        self.0.explore_per_arm
    }

    /// Optimistic score of grid point `j` under the current statistics.
    pub fn score(&self, j: usize) -> f64 {
        let radii = self.0.radii();
        let p = self.0.stats.means();
        let w = self.0.grid.point(j);
        let lo: f64 = w
            .iter()
            .zip(p.iter().zip(&radii))
            .map(|(a, (m, r))| a * (m - r).max(0.0))
            .sum();
        let hi: f64 = w
            .iter()
            .zip(p.iter().zip(&radii))
            .map(|(a, (m, r))| a * (m + r).min(1.0))
            .sum();
        self.0.d.max_on(lo, hi)
    }

    pub fn grid(&self) -> &Grid {
        &self.0.grid
    }
}

macro_rules! delegate_policy {
    ($t:ty) => {
        impl Policy for $t {
            fn select(&mut self, _rng: &mut ChaCha8Rng) -> usize {
                self.0.select()
            }

            fn observe(&mut self, arm: usize, reward: f64) {
                self.0.stats.push(arm, reward);
            }

            fn counts(&self) -> &[u64] {
                &self.0.stats.tau
            }

            fn target(&self) -> Option<MixtureWeights> {
                self.0.target()
            }
        }
    };
}

delegate_policy!(CeUcb);
delegate_policy!(PmUcb);
