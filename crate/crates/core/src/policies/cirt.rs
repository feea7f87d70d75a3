//! Anytime policies: phased confidence-certified grid refinement, and the
//! fixed fine-grid baseline that shares its sampling logic.

use rand_chacha::ChaCha8Rng;

use super::{
    dot, forced_exploration, undersampled_arm, ArmStats, PhaseEvent, PhaseEventKind, Policy,
    PolicyConfig, TIE_TOL,
};
use crate::distortion::Distortion;
use crate::envs::{radius_numerator, BanditInstance};
use crate::error::{config, Error, Result};
use crate::simplex::{enumerate_grid, phase_count, Grid, GridSpec, MixtureWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CirtMode {
    Refine,
    Track,
}

/// Half-width of the box kept after `level` certified phases.
pub fn box_half_width(level: u32, a: u32) -> f64 {
    2f64.powi(level as i32 - 1) / (a as f64).powi(level as i32)
}

/// Per-arm failure budget `(1+δ)^{1/K} − 1`.
pub fn split_delta(delta: f64, k: usize) -> f64 {
    (1.0 + delta).powf(1.0 / k as f64) - 1.0
}

/// First arm never pulled.
fn unpulled(tau: &[u64]) -> Option<usize> {
    tau.iter().position(|&n| n == 0)
}

fn grid_or_center(spec: GridSpec, center: &MixtureWeights) -> Result<Grid> {
    match enumerate_grid(&spec) {
        Err(Error::DegenerateGrid(_)) => Ok(Grid::singleton(center)),
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct Cirt {
    stats: ArmStats,
    d: Distortion,
    a: u32,
    phases: u32,
    xi: f64,
    /// `τ`-free radius factor, `16(√(e log(2/δ_K)) + 32)` times the scale.
    radius_factor: f64,
    level: u32,
    mode: CirtMode,
    grid: Grid,
    target: Option<usize>,
    events: Vec<PhaseEvent>,
    values: Vec<f64>,
}

impl Cirt {
    pub fn new(cfg: &PolicyConfig, inst: &BanditInstance, d: &Distortion) -> Result<Self> {
        if !inst.is_bernoulli() {
            return Err(config("cirt supports Bernoulli arms only"));
        }
        let k = inst.k();
        let phases = phase_count(cfg.a, cfg.eps_target)?;
        let delta_k = split_delta(cfg.delta, k);
        let grid = enumerate_grid(&GridSpec::cirt_initial(k, cfg.a))?;
        Ok(Cirt {
            stats: ArmStats::new(k),
            d: d.clone(),
            a: cfg.a,
            phases,
            xi: cfg.xi,
            radius_factor: cfg.radius_scale
                * radius_numerator(std::f64::consts::E * (2.0 / delta_k).ln()),
            level: 1,
            mode: CirtMode::Refine,
            values: vec![0.0; grid.len()],
            grid,
            target: None,
            events: Vec::new(),
        })
    }

    pub fn mode(&self) -> CirtMode {
        self.mode
    }

    /// Number of refinement phases `L`.
    pub fn phases(&self) -> u32 {
        self.phases
    }

    /// Current phase, `1..=L`, or `L` while tracking.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Center and half-width of the latest certified box; `None` while the
    /// whole simplex is still in play.
    pub fn retained_box(&self) -> Option<(MixtureWeights, u32, f64)> {
        self.events
            .iter()
            .rev()
            .find(|e| e.kind == PhaseEventKind::PhaseEnd)
            .map(|e| (e.center.clone(), e.level, box_half_width(e.level, self.a)))
    }

    fn refine_step(&mut self, t: u64) -> MixtureWeights {
        let p = self.stats.means();
        let (lo, hi): (Vec<f64>, Vec<f64>) = p
            .iter()
            .zip(&self.stats.tau)
            .map(|(m, &n)| {
                let r = self.radius_factor / (n as f64).sqrt();
                ((m - r).max(0.0), (m + r).min(1.0))
            })
            .unzip();
        for (v, w) in self.values.iter_mut().zip(self.grid.iter()) {
            *v = self.d.h(dot(w, &p));
        }
        let mut best = 0;
        for j in 1..self.values.len() {
            if self.values[j] > self.values[best] + TIE_TOL {
                best = j;
            }
        }
        let lcb = {
            let w = self.grid.point(best);
            self.d.min_on(dot(w, &lo), dot(w, &hi))
        };
        let rival = self
            .grid
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != best)
            .map(|(_, w)| self.d.max_on(dot(w, &lo), dot(w, &hi)))
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen = self.grid.weights(best);
        if lcb > rival {
            self.advance(t, chosen.clone(), &p);
        }
        chosen
    }

    fn advance(&mut self, t: u64, b: MixtureWeights, p: &[f64]) {
        self.events.push(PhaseEvent {
            t,
            level: self.level,
            kind: PhaseEventKind::PhaseEnd,
            center: b.clone(),
        });
        if self.level < self.phases {
            self.grid = grid_or_center(GridSpec::cirt(self.level, self.a, b.clone()), &b)
                .expect("valid refinement");
            self.level += 1;
            self.values = vec![0.0; self.grid.len()];
            return;
        }
        self.grid = grid_or_center(GridSpec::cirt_tracking(self.level, self.a, b.clone()), &b)
            .expect("valid tracking grid");
        let (j, _) = self.grid.argmax_by(|w| self.d.h(dot(w, p)), TIE_TOL);
        self.target = Some(j);
        self.mode = CirtMode::Track;
        self.events.push(PhaseEvent {
            t,
            level: self.level,
            kind: PhaseEventKind::Track,
            center: self.grid.weights(j),
        });
    }
}

impl Policy for Cirt {
    fn select(&mut self, _rng: &mut ChaCha8Rng) -> usize {
        if let Some(i) = unpulled(&self.stats.tau) {
            return i;
        }
        let t = self.stats.t();
        let goal = match self.mode {
            CirtMode::Refine => self.refine_step(t),
            CirtMode::Track => self.grid.weights(self.target.expect("tracking target")),
        };
        forced_exploration(t, self.xi, &self.stats.tau)
            .unwrap_or_else(|| undersampled_arm(t, goal.as_slice(), &self.stats.tau))
    }

    fn observe(&mut self, arm: usize, reward: f64) {
        self.stats.push(arm, reward);
    }

    fn counts(&self) -> &[u64] {
        &self.stats.tau
    }

    fn target(&self) -> Option<MixtureWeights> {
        match self.mode {
            CirtMode::Track => self.target.map(|j| self.grid.weights(j)),
            CirtMode::Refine => self.events.last().map(|e| e.center.clone()),
        }
    }

    fn events(&self) -> &[PhaseEvent] {
        &self.events
    }
}

/// CIRT's sampling rule on one fixed grid at resolution `ε_target / A`,
/// re-maximized every round.
#[derive(Debug, Clone)]
pub struct FixedAnytime {
    stats: ArmStats,
    d: Distortion,
    xi: f64,
    grid: Grid,
    target: Option<usize>,
}

impl FixedAnytime {
    pub fn new(cfg: &PolicyConfig, inst: &BanditInstance, d: &Distortion) -> Result<Self> {
        let eps = cfg.eps_target / cfg.a as f64;
        let grid = enumerate_grid(&GridSpec::ucb(inst.k(), eps))?;
        Ok(FixedAnytime {
            stats: ArmStats::new(inst.k()),
            d: d.clone(),
            xi: cfg.xi,
            grid,
            target: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

impl Policy for FixedAnytime {
    fn select(&mut self, _rng: &mut ChaCha8Rng) -> usize {
        if let Some(i) = unpulled(&self.stats.tau) {
            return i;
        }
        let t = self.stats.t();
        let view = self.stats.snapshot().expect("every arm pulled");
        let (j, _) = self.grid.argmax_by(|w| view.value(&self.d, w), TIE_TOL);
        self.target = Some(j);
        forced_exploration(t, self.xi, &self.stats.tau)
            .unwrap_or_else(|| undersampled_arm(t, self.grid.point(j), &self.stats.tau))
    }

    fn observe(&mut self, arm: usize, reward: f64) {
        self.stats.push(arm, reward);
    }

    fn counts(&self) -> &[u64] {
        &self.stats.tau
    }

    fn target(&self) -> Option<MixtureWeights> {
        self.target.map(|j| self.grid.weights(j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::trial_rng;
    use crate::policies::Algorithm;

    fn play(
        p: &mut dyn Policy,
        inst: &BanditInstance,
        t: u64,
        seed: u64,
        mut check: impl FnMut(&dyn Policy, u64),
    ) {
        let mut r = trial_rng(seed, 0, 0);
        let mut pr = trial_rng(seed, 0, 1);
        for s in 1..=t {
            let a = p.select(&mut pr);
            p.observe(a, inst.arms()[a].sample(&mut r));
            check(&*p, s);
        }
    }

    #[test]
    fn split_delta_value() {
        assert!((split_delta(0.05, 2) - 0.024_695_076_6).abs() < 1e-9);
    }

    #[test]
    fn phase_schedule() {
        let inst = BanditInstance::bernoulli(&[0.2, 0.8]).unwrap();
        let c = Cirt::new(
            &PolicyConfig::new(Algorithm::Cirt),
            &inst,
            &Distortion::gini(),
        )
        .unwrap();
        assert_eq!(c.phases(), 5);
        assert_eq!(c.grid().len(), 5);
        assert!((box_half_width(5, 4) - 16.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn exploration_floor() {
        let inst = BanditInstance::bernoulli(&[0.1, 0.9]).unwrap();
        let mut cfg = PolicyConfig::new(Algorithm::Cirt);
        cfg.radius_scale = 1e-3;
        let mut c = Cirt::new(&cfg, &inst, &Distortion::mean()).unwrap();
        play(&mut c, &inst, 20_000, 5, |p, t| {
            let floor = (t as f64 / 2.0).powf(1.0 / 1.5) - 1.0;
            assert!(
                p.counts().iter().all(|&n| n as f64 >= floor),
                "t={t} {:?}",
                p.counts()
            );
        });
    }

    #[test]
    fn small_radii_run_every_phase() {
        let inst = BanditInstance::bernoulli(&[0.2, 0.8]).unwrap();
        let mut cfg = PolicyConfig::new(Algorithm::Cirt);
        cfg.radius_scale = 1e-3;
        let mut c = Cirt::new(&cfg, &inst, &Distortion::gini()).unwrap();
        play(&mut c, &inst, 200_000, 9, |_, _| {});
        assert_eq!(c.mode(), CirtMode::Track);
        let ends = c
            .events()
            .iter()
            .filter(|e| e.kind == PhaseEventKind::PhaseEnd)
            .count();
        assert_eq!(ends as u32, c.phases());
        let (b, level, half) = c.retained_box().unwrap();
        assert_eq!(level, 5);
        assert!(b.as_slice().iter().all(|x| (x - 0.5).abs() <= half + 1e-12));
        let frac = c.counts()[0] as f64 / 200_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn mean_keeps_best_vertex() {
        let inst = BanditInstance::bernoulli(&[0.3, 0.7]).unwrap();
        let mut cfg = PolicyConfig::new(Algorithm::Cirt);
        cfg.radius_scale = 1e-3;
        let mut c = Cirt::new(&cfg, &inst, &Distortion::mean()).unwrap();
        play(&mut c, &inst, 100_000, 2, |_, _| {});
        for e in c.events() {
            assert!(
                e.center[1] >= 1.0 - box_half_width(e.level, 4) - 1e-12,
                "{e:?}"
            );
        }
    }

    #[test]
    fn fixed_grid_is_finer_than_cirt_grids() {
        let inst = BanditInstance::bernoulli(&[0.2, 0.8]).unwrap();
        let cfg = PolicyConfig::new(Algorithm::FixedAnytime);
        let f = FixedAnytime::new(&cfg, &inst, &Distortion::gini()).unwrap();
        assert!(f.grid().len() > 5);
    }

    #[test]
    fn continuous_arms_rejected() {
        let inst = BanditInstance::new(vec![
            crate::envs::ArmModel::Gaussian {
                mu: 0.0,
                sigma: 1.0,
            },
            crate::envs::ArmModel::Gaussian {
                mu: 1.0,
                sigma: 1.0,
            },
        ])
        .unwrap();
        assert!(Cirt::new(
            &PolicyConfig::new(Algorithm::Cirt),
            &inst,
            &Distortion::gini()
        )
        .unwrap_err()
        .is_config());
    }
}
