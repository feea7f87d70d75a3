//! Ground truth: the optimal mixture, discrete optima and their gaps, gap
//! exponents, exploration budgets and the grid-resolution rules.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortion::Distortion;
use crate::envs::{BanditInstance, InstanceEvaluator};
use crate::error::{domain, Error, Result};
use crate::simplex::{enumerate_grid, Grid, GridSpec, MixtureWeights};

/// Utility values closer than this form one level.
pub const LEVEL_TOL: f64 = 1e-12;

/// Dense 1-D scan size for the Bernoulli reduction.
const BERNOULLI_SCAN: usize = 100_000;

/// `(α*, V(α*))`.
pub fn optimal_mixture(inst: &BanditInstance, d: &Distortion) -> Result<(MixtureWeights, f64)> {
    if let Some(ps) = inst.bernoulli_means() {
        return Ok(bernoulli_optimum(&ps, d));
    }
    general_optimum(inst, d)
}

/// Bernoulli mixtures are Bernoulli, so `V(α) = h(⟨α, p⟩)` and the problem
/// is one-dimensional over `m ∈ [min p, max p]`.
fn bernoulli_optimum(ps: &[f64], d: &Distortion) -> (MixtureWeights, f64) {
    let k = ps.len();
    let (imin, pmin) =
        ps.iter().copied().enumerate().fold(
            (0, f64::INFINITY),
            |b, (i, p)| if p < b.1 { (i, p) } else { b },
        );
    let (imax, pmax) = ps
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |b, (i, p)| if p > b.1 { (i, p) } else { b },
        );
    let m = if d.shape().is_concave() {
        d.peak().clamp(pmin, pmax)
    } else {
        let mut best = (pmin, d.h(pmin));
        for j in 1..=BERNOULLI_SCAN {
            let m = pmin + (pmax - pmin) * j as f64 / BERNOULLI_SCAN as f64;
            let v = d.h(m);
            if v > best.1 {
                best = (m, v);
            }
        }
        // Golden-section polish inside the winning cell.
        let cell = (pmax - pmin) / BERNOULLI_SCAN as f64;
        let (mut lo, mut hi) = ((best.0 - cell).max(pmin), (best.0 + cell).min(pmax));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if d.h(x1) < d.h(x2) {
                lo = x1;
            } else {
                hi = x2;
            }
        }
        let mid = 0.5 * (lo + hi);
        if d.h(mid) > best.1 {
            mid
        } else {
            best.0
        }
    };
    let mut w = vec![0.0; k];
    if pmax - pmin <= 0.0 {
        w[imin] = 1.0;
    } else {
        let lam = ((pmax - m) / (pmax - pmin)).clamp(0.0, 1.0);
        w[imin] += lam;
        w[imax] += 1.0 - lam;
    }
    (MixtureWeights::new(w).expect("convex combination"), d.h(m))
}

fn general_optimum(inst: &BanditInstance, d: &Distortion) -> Result<(MixtureWeights, f64)> {
    let ev = inst.evaluator();
    let coarse = 0.02;
    let grid = enumerate_grid(&GridSpec::etc(inst.k(), coarse))?;
    let (mut best, mut best_v) = grid_argmax(&grid, d, &ev)?;
    let zoom = 10usize;
    let mut spacing = coarse;
    for _ in 0..6 {
        spacing *= 2.0 / zoom as f64;
        let local = zoom_grid(&best, spacing, zoom / 2);
        let (b, v) = grid_argmax(&local, d, &ev)?;
        if v > best_v {
            best = b;
            best_v = v;
        }
    }
    Ok((best, best_v))
}

/// Points `b + spacing·m`, `m ∈ [-r, r]^{K-1}`, last coordinate absorbing,
/// restricted to the simplex.
fn zoom_grid(b: &MixtureWeights, spacing: f64, r: usize) -> Grid {
    let k = b.len();
    let mut pts: Vec<MixtureWeights> = Vec::new();
    let span = 2 * r + 1;
    let total = span.pow((k - 1) as u32);
    for code in 0..total {
        let mut c = code;
        let mut w = Vec::with_capacity(k);
        let mut ok = true;
        for i in 0..k - 1 {
            let m = (c % span) as f64 - r as f64;
            c /= span;
            let x = b[i] + spacing * m;
            if x < -1e-15 {
                ok = false;
                break;
            }
            w.push(x.max(0.0));
        }
        if !ok {
            continue;
        }
        let last = 1.0 - w.iter().sum::<f64>();
        if last < -1e-15 {
            continue;
        }
        w.push(last.max(0.0));
        if let Ok(mw) = MixtureWeights::new(w) {
            pts.push(mw);
        }
    }
    pts.push(b.clone());
    Grid::from_points(&pts).expect("nonempty")
}

fn grid_values(grid: &Grid, d: &Distortion, ev: &InstanceEvaluator) -> Result<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| ev.value(d, grid.point(i)))
        .collect()
}

fn grid_argmax(
    grid: &Grid,
    d: &Distortion,
    ev: &InstanceEvaluator,
) -> Result<(MixtureWeights, f64)> {
    let vals = grid_values(grid, d, ev)?;
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] + LEVEL_TOL {
            best = i;
        }
    }
    Ok((grid.weights(best), vals[best]))
}

/// Idealized CIRT with true CDFs: `L` phases of argmax plus refinement.
pub fn refinement_oracle(
    inst: &BanditInstance,
    d: &Distortion,
    a: u32,
    l: u32,
) -> Result<MixtureWeights> {
    if a < 3 || l < 1 {
        return Err(crate::error::config(format!(
            "refinement oracle needs A >= 3 and L >= 1, got A={a}, L={l}"
        )));
    }
    let ev = inst.evaluator();
    let mut grid = enumerate_grid(&GridSpec::cirt_initial(inst.k(), a))?;
    let mut b = grid_argmax(&grid, d, &ev)?.0;
    for level in 1..l {
        grid = match enumerate_grid(&GridSpec::cirt(level, a, b.clone())) {
            Ok(g) => g,
            Err(Error::DegenerateGrid(_)) => Grid::singleton(&b),
            Err(e) => return Err(e),
        };
        b = grid_argmax(&grid, d, &ev)?.0;
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub v_star: f64,
    pub a1: MixtureWeights,
    pub v1: f64,
    pub a2: Option<MixtureWeights>,
    pub v2: Option<f64>,
    pub a3: Option<MixtureWeights>,
    pub v3: Option<f64>,
    pub delta12: Option<f64>,
    pub delta13: Option<f64>,
    pub delta23: Option<f64>,
    pub delta01: f64,
    pub delta02: Option<f64>,
    pub grid_size: usize,
}

/// Top three distinct utility levels of a grid, with their gaps.
pub fn gap_report(inst: &BanditInstance, d: &Distortion, spec: &GridSpec) -> Result<GapReport> {
    let grid = enumerate_grid(spec)?;
    if grid.len() < 2 {
        return Err(domain(format!(
            "gap report needs at least 2 grid points, got {}",
            grid.len()
        )));
    }
    let (_, v_star) = optimal_mixture(inst, d)?;
    let ev = inst.evaluator();
    let vals = grid_values(&grid, d, &ev)?;
    let levels = top_levels(&vals, 3);
    let pick = |j: usize| levels.get(j).map(|&(i, v)| (grid.weights(i), v));
    let (a1, v1) = pick(0).expect("nonempty grid");
    let second = pick(1);
    let third = pick(2);
    let v2 = second.as_ref().map(|s| s.1);
    let v3 = third.as_ref().map(|s| s.1);
    Ok(GapReport {
        v_star,
        delta01: (v_star - v1).max(0.0),
        delta02: v2.map(|v| (v_star - v).max(0.0)),
        delta12: v2.map(|v| v1 - v),
        delta13: v3.map(|v| v1 - v),
        delta23: v2.zip(v3).map(|(a, b)| a - b),
        a1,
        v1,
        a2: second.map(|s| s.0),
        v2,
        a3: third.map(|s| s.0),
        v3,
        grid_size: grid.len(),
    })
}

/// Representatives `(index, value)` of the top `n` utility levels. Values
/// within [`LEVEL_TOL`] of a level's top value join it; the representative
/// is the smallest index in the level.
fn top_levels(vals: &[f64], n: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut top = f64::NAN;
    for &i in &order {
        let v = vals[i];
        if out.is_empty() || top - v > LEVEL_TOL {
            if out.len() == n {
                break;
            }
            out.push((i, v));
            top = v;
        } else if let Some(last) = out.last_mut() {
            if i < last.0 {
                last.0 = i;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaPoint {
    pub eps: f64,
    pub delta13: Option<f64>,
    /// `log δ13(ε) / log ε`; absent when `δ13` is missing or zero.
    pub ratio: Option<f64>,
    pub warning: Option<String>,
}

/// `log δ13(ε) / log ε` along a decreasing sequence of resolutions.
pub fn beta_bar_estimate(
    inst: &BanditInstance,
    d: &Distortion,
    eps_list: &[f64],
) -> Result<Vec<BetaPoint>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(domain("resolutions must be strictly decreasing"));
    }
    eps_list
        .iter()
        .map(|&eps| {
            let r = gap_report(inst, d, &GridSpec::etc(inst.k(), eps))?;
            Ok(match r.delta13 {
                Some(g) if g > 0.0 => BetaPoint {
                    eps,
                    delta13: Some(g),
                    ratio: Some(g.ln() / eps.ln()),
                    warning: None,
                },
                other => BetaPoint {
                    eps,
                    delta13: other,
                    ratio: None,
                    warning: Some(format!("no positive third utility level at eps = {eps}")),
                },
            })
        })
        .collect()
}

/// Published range of the `δ13` gap exponent for Bernoulli arms, when known.
pub fn beta_bar_reference(d: &Distortion) -> Option<(f64, f64)> {
    use crate::distortion::Family;
    match d.family() {
        Family::Mean
        | Family::DualPower { .. }
        | Family::Quadratic { .. }
        | Family::Cvar { .. } => Some((1.0, 1.0)),
        Family::MeanMedian | Family::InterEs => Some((1.0, 1.0)),
        Family::Pht { s } => Some((*s, 1.0)),
        Family::WangRtd => Some((0.5, 2.0)),
        Family::Gini => Some((1.0, 2.0)),
        Family::InvertedS { .. } | Family::Custom(_) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapVariant {
    Delta12,
    Delta13,
}

/// Exploration budget `N(ε)` and its scaled form `M(ε) = N(ε) / log T`.
pub fn n_epsilon(k: usize, l: f64, q: f64, gap: f64, t: u64, eps: f64) -> Result<(u64, f64)> {
    if !(gap > 0.0) {
        return Err(domain(format!(
            "suboptimality gap must be positive, got {gap}"
        )));
    }
    if t < 2 {
        return Err(domain("horizon must be at least 2"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(domain(format!("resolution must lie in (0,1], got {eps}")));
    }
    let e = std::f64::consts::E;
    let kf = k as f64;
    let tf = t as f64;
    let inner = (2.0 * kf * tf * tf * (eps.powf(-(kf - 1.0)) + 1.0)).ln();
    let bracket = 32.0 / e.sqrt() + inner.sqrt();
    let n = (256.0 * kf * e * (2.0 * kf * l / gap).powf(2.0 / q) * bracket * bracket).ceil();
    Ok((n as u64, n / tf.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    Etc,
    Ucb,
}

/// `γ = 2β / (2β + q)`.
pub fn etc_gamma(beta: f64, q: f64) -> f64 {
    2.0 * beta / (2.0 * beta + q)
}

/// `κ = 1 / (2β/q + 2)`.
pub fn ucb_kappa(beta: f64, q: f64) -> f64 {
    1.0 / (2.0 * beta / q + 2.0)
}

/// Grid resolution for a horizon, with unit constants, clamped to `(0, ½]`.
pub fn choose_epsilon(rule: EpsilonRule, k: usize, q: f64, beta: f64, t: u64) -> f64 {
    let kf = k as f64;
    let tf = t as f64;
    let eps = match rule {
        EpsilonRule::Etc => {
            let gamma = etc_gamma(beta, q);
            (kf.powf(2.0 + 2.0 / q) * tf.ln() / tf.powf(gamma)).powf(q / (2.0 * beta))
        }
        EpsilonRule::Ucb => (kf.powf(2.0 / q) * tf.ln() / tf).powf(ucb_kappa(beta, q)),
    };
    eps.clamp(f64::MIN_POSITIVE, 0.5)
}

/// Smallest `t` with `(2√(2e log s) + 32)/√(ρ s ε) <= (δ12/(2KL))^{1/q} / 16`
/// for all `s >= t`, and `T(ε) = (2/ε)(T0 - 1)`.
pub fn t0_epsilon(
    k: usize,
    l: f64,
    q: f64,
    delta12: f64,
    rho: f64,
    eps: f64,
) -> Result<(u64, f64)> {
    if !(delta12 > 0.0 && rho > 0.0 && eps > 0.0 && l > 0.0 && q > 0.0) {
        return Err(domain("t0 needs positive parameters"));
    }
    let rhs = t0_threshold(k, l, q, delta12);
    let g = |s: u64| t0_lhs(s, rho, eps);
    // g decreases for s >= 3; bracket then bisect.
    let mut hi = 4u64;
    while g(hi) > rhs {
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| domain("t0 search overflow"))?;
    }
    let mut lo = 3u64;
    if g(lo) <= rhs {
        hi = lo;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if g(mid) <= rhs {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut t0 = hi;
    while t0 > 1 && g(t0 - 1) <= rhs {
        t0 -= 1;
    }
    Ok((t0, 2.0 / eps * (t0 - 1) as f64))
}

/// Left side of the `T0` condition at `s`.
pub fn t0_lhs(s: u64, rho: f64, eps: f64) -> f64 {
    let sf = s as f64;
    (2.0 * (2.0 * std::f64::consts::E * sf.ln()).sqrt() + 32.0) / (rho * sf * eps).sqrt()
}

/// Right side of the `T0` condition.
pub fn t0_threshold(k: usize, l: f64, q: f64, delta12: f64) -> f64 {
    (delta12 / (2.0 * k as f64 * l)).powf(1.0 / q) / 16.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choquet::{choquet_mixture, FiniteSupportCdf};
    use crate::envs::ArmModel;
    use proptest::prelude::*;

    #[test]
    fn bernoulli_optima() {
        let g = Distortion::gini();
        let (a, v) = optimal_mixture(&BanditInstance::bernoulli(&[0.2, 0.8]).unwrap(), &g).unwrap();
        assert!((a[0] - 0.5).abs() < 1e-9 && (v - 0.25).abs() < 1e-15);
        let (a, v) = optimal_mixture(
            &BanditInstance::bernoulli(&[0.1, 0.4, 0.9]).unwrap(),
            &Distortion::mean(),
        )
        .unwrap();
        assert_eq!(a.as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(v, 0.9);
        let (a, v) = optimal_mixture(&BanditInstance::bernoulli(&[0.3, 0.6]).unwrap(), &g).unwrap();
        assert!((a[0] - 1.0 / 3.0).abs() < 1e-9 && (a[1] - 2.0 / 3.0).abs() < 1e-9);
        assert!((v - 0.25).abs() < 1e-15);
        let inv = Distortion::inverted_s(0.5).unwrap();
        let (_, v) =
            optimal_mixture(&BanditInstance::bernoulli(&[0.2, 0.7]).unwrap(), &inv).unwrap();
        assert!((v - inv.h(0.7)).abs() < 1e-12);
    }

    #[test]
    fn general_optimum_matches_bernoulli_reduction() {
        // Finite arms on {0,1} are Bernoulli in disguise.
        let inst = BanditInstance::new(vec![
            ArmModel::Finite {
                supports: vec![0.0, 1.0],
                probs: vec![0.8, 0.2],
            },
            ArmModel::Finite {
                supports: vec![0.0, 1.0],
                probs: vec![0.3, 0.7],
            },
            ArmModel::Finite {
                supports: vec![0.0, 1.0],
                probs: vec![0.6, 0.4],
            },
        ])
        .unwrap();
        let (_, v) = optimal_mixture(&inst, &Distortion::gini()).unwrap();
        assert!((v - 0.25).abs() < 1e-9, "{v}");
    }

    #[test]
    fn gap_examples() {
        let inst = BanditInstance::bernoulli(&[0.2, 0.8]).unwrap();
        let r = gap_report(&inst, &Distortion::gini(), &GridSpec::etc(2, 0.5)).unwrap();
        assert_eq!(r.a1.as_slice(), &[0.5, 0.5]);
        assert!((r.delta12.unwrap() - 0.09).abs() < 1e-12);
        assert_eq!(r.delta01, 0.0);
        assert!(r.delta13.is_none());
        // The two 0.16 points collapse into one level represented by (0,1).
        assert_eq!(r.a2.unwrap().as_slice(), &[0.0, 1.0]);

        let inst = BanditInstance::bernoulli(&[0.1, 0.9]).unwrap();
        let r = gap_report(&inst, &Distortion::mean(), &GridSpec::etc(2, 1.0)).unwrap();
        assert!((r.delta12.unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(r.delta01, 0.0);
    }

    #[test]
    fn gap_report_needs_two_points() {
        let inst = BanditInstance::bernoulli(&[0.1, 0.9, 0.5]).unwrap();
        assert!(gap_report(&inst, &Distortion::gini(), &GridSpec::ucb(3, 0.5)).is_err());
    }

    #[test]
    fn refinement_oracle_examples() {
        let inst = BanditInstance::bernoulli(&[0.2, 0.8]).unwrap();
        let b = refinement_oracle(&inst, &Distortion::gini(), 4, 5).unwrap();
        let tol = 2f64.powi(4) / 4f64.powi(5);
        assert!((b[0] - 0.5).abs() <= tol && (b[1] - 0.5).abs() <= tol);

        let inst = BanditInstance::bernoulli(&[0.3, 0.7, 0.5]).unwrap();
        for l in 1..=5 {
            let b = refinement_oracle(&inst, &Distortion::mean(), 4, l).unwrap();
            assert_eq!(b.as_slice(), &[0.0, 1.0, 0.0]);
        }

        let inst = BanditInstance::bernoulli(&[0.1, 0.6]).unwrap();
        let b = refinement_oracle(&inst, &Distortion::gini(), 4, 1).unwrap();
        let grid = enumerate_grid(&GridSpec::etc(2, 0.25)).unwrap();
        let ev = inst.evaluator();
        let best = grid
            .iter()
            .map(|p| ev.value(&Distortion::gini(), p).unwrap())
            .fold(f64::MIN, f64::max);
        assert!((inst.value(&Distortion::gini(), &b).unwrap() - best).abs() < 1e-15);
    }

    #[test]
    fn n_epsilon_matches_independent_evaluation() {
        let (n, m) = n_epsilon(2, 1.0, 1.0, 0.09, 100_000, 0.5).unwrap();
        // Term by term: 256·2·e·(4/0.09)^2·(32/√e + √ln(2·2·1e10·(2+1)))^2.
        let e = std::f64::consts::E;
        let lead = 256.0 * 2.0 * e * (4.0f64 / 0.09).powi(2);
        let log_term = (1.2e11f64).ln();
        let expect = (lead * (32.0 / e.sqrt() + log_term.sqrt()).powi(2)).ceil() as u64;
        assert_eq!(n, expect);
        assert!((m - n as f64 / (1e5f64).ln()).abs() < 1e-6);
        assert!(n_epsilon(2, 1.0, 1.0, 0.0, 100, 0.5).is_err());
    }

    #[test]
    fn n_epsilon_grows_like_log_t() {
        let mut prev = 0;
        for t in [10u64, 100, 1_000, 10_000, 100_000, 1_000_000] {
            let (n, _) = n_epsilon(3, 1.0, 1.0, 0.05, t, 0.1).unwrap();
            assert!(n > prev);
            prev = n;
        }
        let bracket = |t: f64| {
            let inner = (2.0 * 2.0 * t * t * (1.0 / 0.5 + 1.0)).ln();
            (32.0 / std::f64::consts::E.sqrt() + inner.sqrt()).powi(2)
        };
        let (n1, _) = n_epsilon(2, 1.0, 1.0, 0.1, 1_000, 0.5).unwrap();
        let (n2, _) = n_epsilon(2, 1.0, 1.0, 0.1, 1_000_000, 0.5).unwrap();
        let ratio = n2 as f64 / n1 as f64;
        assert!((ratio - bracket(1e6) / bracket(1e3)).abs() < 1e-5);
    }

    #[test]
    fn epsilon_rules() {
        let e = choose_epsilon(EpsilonRule::Ucb, 2, 1.0, 1.0, 10_000);
        assert!((e - (4.0 * (1e4f64).ln() / 1e4).powf(0.25)).abs() < 1e-15);
        assert!((etc_gamma(1.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((ucb_kappa(2.0, 1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(choose_epsilon(EpsilonRule::Etc, 2, 1.0, 2.0, 1_000), 0.5);
        let mut prev = 1.0;
        for t in [1e4, 1e6, 1e8, 1e10] {
            let e = choose_epsilon(EpsilonRule::Etc, 2, 1.0, 1.0, t as u64);
            assert!(e <= prev && e > 0.0);
            prev = e;
        }
    }

    #[test]
    fn t0_examples() {
        let (t0, big_t) = t0_epsilon(2, 1.0, 1.0, 0.09, 0.5, 0.1).unwrap();
        let rhs = t0_threshold(2, 1.0, 1.0, 0.09);
        assert!((rhs - 0.09 / 4.0 / 16.0).abs() < 1e-15);
        assert!(t0_lhs(t0, 0.5, 0.1) <= rhs);
        assert!(t0_lhs(t0 - 1, 0.5, 0.1) > rhs);
        // Linear scans around T0 and strided scan below it.
        for s in t0.saturating_sub(1_000_000).max(3)..t0 {
            assert!(t0_lhs(s, 0.5, 0.1) > rhs);
        }
        for s in t0..t0 + 1_000_000 {
            assert!(t0_lhs(s, 0.5, 0.1) <= rhs);
        }
        let stride = (t0 / 100_000).max(1);
        let mut s = 3;
        while s < t0 {
            assert!(t0_lhs(s, 0.5, 0.1) > rhs);
            s += stride;
        }
        assert!((big_t - 20.0 * (t0 - 1) as f64).abs() < 1e-6);
        let (small, _) = t0_epsilon(2, 1.0, 1.0, 0.5, 0.5, 0.1).unwrap();
        let (halved, _) = t0_epsilon(2, 1.0, 1.0, 0.25, 0.5, 0.1).unwrap();
        assert!(small < t0 && halved > small);
    }

    #[test]
    fn gap_levels_are_strictly_sorted() {
        let inst = BanditInstance::bernoulli(&[0.15, 0.55, 0.8]).unwrap();
        for d in [
            Distortion::gini(),
            Distortion::mean(),
            Distortion::wang_rtd(),
        ] {
            let r = gap_report(&inst, &d, &GridSpec::etc(3, 0.05)).unwrap();
            let (v2, v3) = (r.v2.unwrap(), r.v3.unwrap());
            assert!(r.v1 > v2 && v2 > v3);
            assert!(r.delta13.unwrap() > r.delta12.unwrap().max(r.delta23.unwrap()));
            assert!(r.delta01 >= 0.0 && r.delta02.unwrap() >= r.delta01);
        }
    }

    #[test]
    fn convex_distortion_prefers_solitary_arms() {
        use crate::distortion::{CustomDistortion, Shape};
        use std::sync::Arc;
        let sq = Distortion::custom(CustomDistortion {
            name: "square".into(),
            h: Arc::new(|u| u * u),
            holder_q: 1.0,
            holder_l: 2.0,
            shape: Shape::Convex,
            monotone: true,
        })
        .unwrap();
        let arms = vec![
            FiniteSupportCdf::from_atoms(&[(-1.0, 0.3), (2.0, 0.7)]).unwrap(),
            FiniteSupportCdf::from_atoms(&[(0.5, 0.5), (1.0, 0.5)]).unwrap(),
        ];
        let best = arms
            .iter()
            .map(|f| crate::choquet::choquet_step(&sq, f))
            .fold(f64::MIN, f64::max);
        for j in 0..=20 {
            let a = j as f64 / 20.0;
            let v = choquet_mixture(&sq, &MixtureWeights::new(vec![a, 1.0 - a]).unwrap(), &arms)
                .unwrap();
            assert!(v <= best + 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn bernoulli_optimum_matches_brute_force(p in proptest::collection::vec(0.0..1.0f64, 2..4), fam in 0usize..4) {
            let d = match fam {
                0 => Distortion::gini(),
                1 => Distortion::wang_rtd(),
                2 => Distortion::mean_median(),
                _ => Distortion::inverted_s(0.5).unwrap(),
            };
            let inst = BanditInstance::bernoulli(&p).unwrap();
            let (a, v) = optimal_mixture(&inst, &d).unwrap();
            prop_assert!((inst.value(&d, &a).unwrap() - v).abs() < 1e-12);
            let grid = enumerate_grid(&GridSpec::etc(p.len(), 1e-3)).unwrap();
            let ev = inst.evaluator();
            let brute = grid.iter().map(|w| ev.value(&d, w).unwrap()).fold(f64::MIN, f64::max);
            prop_assert!(v >= brute - 1e-12);
            // Lattice spacing 1e-3 in mixture mean, slopes below 2.
            prop_assert!(v - brute < 2e-3);
        }
    }
}
