//! Explore-then-commit over the `Δ_ε` grid.

use rand_chacha::ChaCha8Rng;

use super::{holder_for, ArmStats, Policy, PolicyConfig};
use crate::distortion::Distortion;
use crate::envs::BanditInstance;
use crate::error::{config, Result};
use crate::oracle::{gap_report, n_epsilon, EpsilonRule, GapVariant};
use crate::simplex::{enumerate_grid, Grid, GridSpec, MixtureWeights};

#[derive(Debug, Clone)]
pub struct Etc {
    stats: ArmStats,
    distortion: Option<Distortion>,
    grid: Option<Grid>,
    horizon: u64,
    /// Total exploration rounds, `K⌈N/K⌉`.
    explore_rounds: u64,
    committed: Option<MixtureWeights>,
    targets: Vec<u64>,
    notes: Vec<String>,
}

/// `⌈x⌉` forgiving float noise just above an integer.
fn ceil_tight(x: f64) -> u64 {
    (x - 1e-9).ceil().max(0.0) as u64
}

impl Etc {
    pub fn new(
        cfg: &PolicyConfig,
        inst: &BanditInstance,
        d: &Distortion,
        horizon: u64,
    ) -> Result<Self> {
        let k = inst.k();
        let (q, l) = holder_for(inst, d)?;
        let eps = cfg.resolve_eps(EpsilonRule::Etc, k, q, horizon);
        let spec = GridSpec::etc(k, eps);
        let grid = enumerate_grid(&spec)?;
        let mut notes = Vec::new();
        let gap = match cfg.gap {
            Some(g) => g,
            None => {
                let r = gap_report(inst, d, &spec)?;
                let d12 = r.delta12.filter(|g| *g > 0.0).ok_or_else(|| {
                    config(format!(
                        "grid at eps = {eps} has a single utility level; ETC needs a positive gap"
                    ))
                })?;
                match (cfg.gap_variant, r.delta13) {
                    (GapVariant::Delta12, _) => d12,
                    (GapVariant::Delta13, Some(g)) if g > 0.0 => g,
                    (GapVariant::Delta13, _) => {
                        notes.push(format!("delta13 unavailable at eps = {eps}; using delta12"));
                        d12
                    }
                }
            }
        };
        let (mut n, _) = n_epsilon(k, l, q, gap, horizon, eps)?;
        if n as f64 > horizon as f64 / 2.0 {
            let capped = ceil_tight(0.5 * k as f64 * eps * horizon as f64);
            notes.push(format!(
                "exploration budget {n} exceeds T/2; capped to {capped}"
            ));
            n = capped;
        }
        let explore_rounds = k as u64 * n.div_ceil(k as u64);
        if explore_rounds > horizon {
            return Err(config(format!(
                "horizon {horizon} is shorter than the exploration budget {explore_rounds}"
            )));
        }
        Ok(Etc {
            stats: ArmStats::new(k),
            distortion: Some(d.clone()),
            grid: Some(grid),
            horizon,
            explore_rounds,
            committed: None,
            targets: Vec::new(),
            notes,
        })
    }

    /// ETC whose commitment is fixed in advance to `a`, with `n` total
    /// exploration rounds.
    pub fn frozen(horizon: u64, n: u64, a: MixtureWeights) -> Self {
        let k = a.len();
        let mut e = Etc {
            stats: ArmStats::new(k),
            distortion: None,
            grid: None,
            horizon,
            explore_rounds: k as u64 * n.div_ceil(k as u64),
            committed: None,
            targets: Vec::new(),
            notes: Vec::new(),
        };
        e.commit(a);
        e
    }

    pub fn explore_rounds(&self) -> u64 {
        self.explore_rounds
    }

    pub fn committed(&self) -> Option<&MixtureWeights> {
        self.committed.as_ref()
    }

    fn commit(&mut self, a: MixtureWeights) {
        let k = a.len();
        let per_arm = self.explore_rounds.div_ceil(k as u64);
        let tf = self.horizon as f64;
        self.targets = (0..k - 1)
            .map(|i| {
                let want = tf * a[i];
                if want > per_arm as f64 {
                    ceil_tight(want)
                } else {
                    0
                }
            })
            .collect();
        self.committed = Some(a);
    }

    fn choose_commitment(&self) -> MixtureWeights {
        let grid = self.grid.as_ref().expect("grid present when not frozen");
        let d = self
            .distortion
            .as_ref()
            .expect("distortion present when not frozen");
        let view = self.stats.snapshot().expect("every arm explored");
        let (i, _) = grid.argmax_by(|w| view.value(d, w), super::TIE_TOL);
        grid.weights(i)
    }
}

impl Policy for Etc {
    fn select(&mut self, _rng: &mut ChaCha8Rng) -> usize {
        let k = self.stats.k();
        let t = self.stats.t();
        if t < self.explore_rounds {
            return (t % k as u64) as usize;
        }
        if self.committed.is_none() {
            let a = self.choose_commitment();
            self.commit(a);
        }
        self.targets
            .iter()
            .zip(&self.stats.tau)
            .position(|(&want, &have)| have < want)
            .unwrap_or(k - 1)
    }

    fn observe(&mut self, arm: usize, reward: f64) {
        self.stats.push(arm, reward);
    }

    fn counts(&self) -> &[u64] {
        &self.stats.tau
    }

    fn target(&self) -> Option<MixtureWeights> {
        self.committed.clone()
    }

    fn notes(&self) -> &[String] {
        &self.notes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::trial_rng;
    use crate::policies::Algorithm;

    fn run(p: &mut dyn Policy, t: u64) {
        let mut rng = trial_rng(0, 0, 1);
        for _ in 0..t {
            let a = p.select(&mut rng);
            p.observe(a, 0.0);
        }
    }

    #[test]
    fn commitment_trace() {
        let mut e = Etc::frozen(1000, 200, MixtureWeights::new(vec![0.7, 0.3]).unwrap());
        run(&mut e, 1000);
        assert_eq!(e.counts(), &[700, 300]);
    }

    #[test]
    fn over_explored_arm_is_skipped() {
        let mut e = Etc::frozen(1000, 400, MixtureWeights::new(vec![0.1, 0.9]).unwrap());
        run(&mut e, 1000);
        assert_eq!(e.counts(), &[200, 800]);
    }

    #[test]
    fn solitary_commitment() {
        let mut e = Etc::frozen(500, 10, MixtureWeights::unit(2, 0));
        run(&mut e, 500);
        assert_eq!(e.counts(), &[495, 5]);
    }

    #[test]
    fn exploration_cap_and_shortfall() {
        let inst = BanditInstance::bernoulli(&[0.2, 0.8]).unwrap();
        let mut cfg = PolicyConfig::new(Algorithm::Etc);
        cfg.eps = Some(0.25);
        let p = Etc::new(&cfg, &inst, &Distortion::gini(), 10_000).unwrap();
        assert_eq!(p.explore_rounds(), 2500);
        assert!(!p.notes().is_empty());
        cfg.eps = Some(1.0);
        let inst = BanditInstance::bernoulli(&[0.5, 0.5]).unwrap();
        assert!(Etc::new(&cfg, &inst, &Distortion::mean(), 10_000)
            .unwrap_err()
            .is_config());
    }
}
