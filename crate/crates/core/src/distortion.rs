//! Distortion functions `h: [0,1] -> R` with `h(0) = 0`.
//!
//! A distortion is applied to the complement CDF inside the signed Choquet
//! integral. Besides evaluation, each family carries its Hölder parameters
//! `(q, L)` for the induced utility, the scalar Hölder parameters of `h`
//! itself, a shape class and a monotonicity flag. Those last two drive the
//! fast interval optimizers used by the confidence-set policies.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Shape class of a distortion on `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Convex,
    Concave,
    StrictlyConcave,
    Neither,
}

impl Shape {
    pub fn is_concave(self) -> bool {
        matches!(self, Shape::Concave | Shape::StrictlyConcave)
    }
}

/// User-supplied distortion. The library does not infer Hölder constants,
/// so they are declared alongside the function.
#[derive(Clone)]
pub struct CustomDistortion {
    pub name: String,
    pub h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub holder_q: f64,
    pub holder_l: f64,
    pub shape: Shape,
    pub monotone: bool,
}

impl fmt::Debug for CustomDistortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDistortion")
            .field("name", &self.name)
            .field("holder_q", &self.holder_q)
            .field("holder_l", &self.holder_l)
            .field("shape", &self.shape)
            .field("monotone", &self.monotone)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    Mean,
    DualPower {
        s: f64,
    },
    Quadratic {
        s: f64,
    },
    Cvar {
        c: f64,
    },
    Pht {
        s: f64,
    },
    MeanMedian,
    /// Inter-ES difference, only for `c = 1/2`.
    InterEs,
    WangRtd,
    Gini,
    InvertedS {
        beta: f64,
    },
    Custom(CustomDistortion),
}

#[derive(Debug, Clone)]
pub struct Distortion {
    family: Family,
    peak: f64,
}

/// Points used by dense 1-D scans of `h`.
const SCAN_POINTS: usize = 10_000;

impl Distortion {
    pub fn new(family: Family) -> Result<Self> {
        match &family {
            Family::DualPower { s } if !(*s >= 2.0 && s.is_finite()) => {
                return Err(config(format!("dual_power requires s >= 2, got {s}")))
            }
            Family::Quadratic { s } if !(0.0..=1.0).contains(s) => {
                return Err(config(format!("quadratic requires s in [0,1], got {s}")))
            }
            Family::Cvar { c } if !(*c > 0.0 && *c < 1.0) => {
                return Err(config(format!("cvar requires c in (0,1), got {c}")))
            }
            Family::Pht { s } if !(*s > 0.0 && *s < 1.0) => {
                return Err(config(format!("pht requires s in (0,1), got {s}")))
            }
            Family::InvertedS { beta } if !(*beta > 0.0 && beta.is_finite()) => {
                return Err(config(format!("inverted_s requires beta > 0, got {beta}")))
            }
            Family::Custom(c) if !(c.holder_q > 0.0 && c.holder_q <= 1.0 && c.holder_l > 0.0) => {
                return Err(config("custom distortion needs q in (0,1] and L > 0"))
            }
            _ => {}
        }
        let mut d = Distortion { family, peak: 1.0 };
        let h0 = d.h(0.0);
        if h0 != 0.0 {
            return Err(config(format!(
                "distortion must satisfy h(0) = 0, got {h0}"
            )));
        }
        d.peak = d.locate_peak();
        Ok(d)
    }

    pub fn mean() -> Self {
        Self::new(Family::Mean).expect("valid")
    }

    pub fn gini() -> Self {
        Self::new(Family::Gini).expect("valid")
    }

    pub fn dual_power(s: f64) -> Result<Self> {
        Self::new(Family::DualPower { s })
    }

    pub fn quadratic(s: f64) -> Result<Self> {
        Self::new(Family::Quadratic { s })
    }

    pub fn cvar(c: f64) -> Result<Self> {
        Self::new(Family::Cvar { c })
    }

    pub fn pht(s: f64) -> Result<Self> {
        Self::new(Family::Pht { s })
    }

    pub fn mean_median() -> Self {
        Self::new(Family::MeanMedian).expect("valid")
    }

    pub fn inter_es(c: f64) -> Result<Self> {
        if (c - 0.5).abs() > 1e-15 {
            return Err(config(format!(
                "inter_es is only defined for c = 0.5, got {c}"
            )));
        }
        Self::new(Family::InterEs)
    }

    pub fn wang_rtd() -> Self {
        Self::new(Family::WangRtd).expect("valid")
    }

    pub fn inverted_s(beta: f64) -> Result<Self> {
        Self::new(Family::InvertedS { beta })
    }

    pub fn custom(c: CustomDistortion) -> Result<Self> {
        Self::new(Family::Custom(c))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn name(&self) -> String {
        match &self.family {
            Family::Mean => "mean".into(),
            Family::DualPower { s } => format!("dual_power(s={s})"),
            Family::Quadratic { s } => format!("quadratic(s={s})"),
            Family::Cvar { c } => format!("cvar(c={c})"),
            Family::Pht { s } => format!("pht(s={s})"),
            Family::MeanMedian => "mean_median".into(),
            Family::InterEs => "inter_es(c=0.5)".into(),
            Family::WangRtd => "wang_rtd".into(),
            Family::Gini => "gini".into(),
            Family::InvertedS { beta } => format!("inverted_s(beta={beta})"),
            Family::Custom(c) => c.name.clone(),
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(domain(format!("distortion argument {u} outside [0,1]")));
        }
        Ok(self.h(u))
    }

    /// Unchecked evaluation for hot loops; `u` is clamped to `[0,1]`.
    #[inline]
    pub fn h(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.family {
            Family::Mean => u,
            Family::DualPower { s } => 1.0 - (1.0 - u).powf(*s),
            Family::Quadratic { s } => (1.0 + s) * u - s * u * u,
            Family::Cvar { c } => (u / (1.0 - c)).min(1.0),
            Family::Pht { s } => u.powf(*s),
            Family::MeanMedian => u.min(1.0 - u),
            Family::InterEs => (2.0 * u).min(1.0) + (1.0 - 2.0 * u).min(0.0),
            Family::WangRtd => u.sqrt() - u,
            Family::Gini => u * (1.0 - u),
            Family::InvertedS { beta } => {
                if u == 0.0 {
                    0.0
                } else {
                    (-(-u.ln()).powf(*beta)).exp()
                }
            }
            Family::Custom(c) => (c.h)(u),
        }
    }

    /// Hölder parameters `(q, L)` of `U_h` with respect to `W1`.
    pub fn holder_params(&self, support: Option<(f64, f64)>) -> Result<(f64, f64)> {
        let width = |name: &str| -> Result<f64> {
            match support {
                Some((v, z)) if z > v => Ok(z - v),
                Some((v, z)) => Err(config(format!("{name}: invalid support bounds [{v}, {z}]"))),
                None => Err(config(format!("{name} requires bounded support [V, Z]"))),
            }
        };
        Ok(match &self.family {
            Family::Mean | Family::MeanMedian | Family::Gini => (1.0, 1.0),
            Family::DualPower { s } => (1.0, *s),
            Family::Quadratic { s } => (1.0, 1.0 + s),
            Family::Cvar { c } => (1.0, 1.0 / (1.0 - c)),
            Family::Pht { s } => (*s, width("pht")?.powf(1.0 - s)),
            Family::InterEs => (1.0, 2.0),
            Family::WangRtd => (0.5, width("wang_rtd")?.sqrt()),
            Family::InvertedS { .. } => {
                return Err(config(
                    "inverted_s has no tabulated Hölder parameters; supply q and L explicitly",
                ))
            }
            Family::Custom(c) => (c.holder_q, c.holder_l),
        })
    }

    /// Scalar Hölder parameters `(r, L_h)` with `|h(u)-h(v)| <= L_h |u-v|^r`.
    pub fn scalar_holder(&self) -> Option<(f64, f64)> {
        match &self.family {
            Family::Mean | Family::MeanMedian | Family::Gini => Some((1.0, 1.0)),
            Family::DualPower { s } => Some((1.0, *s)),
            Family::Quadratic { s } => Some((1.0, 1.0 + s)),
            Family::Cvar { c } => Some((1.0, 1.0 / (1.0 - c))),
            Family::Pht { s } => Some((*s, 1.0)),
            Family::InterEs => Some((1.0, 2.0)),
            Family::WangRtd => Some((0.5, 1.0)),
            Family::InvertedS { .. } => None,
            Family::Custom(c) => Some((c.holder_q, c.holder_l)),
        }
    }

    pub fn shape(&self) -> Shape {
        match &self.family {
            Family::Mean => Shape::Concave,
            Family::Quadratic { s } if *s == 0.0 => Shape::Concave,
            Family::DualPower { .. }
            | Family::Quadratic { .. }
            | Family::Pht { .. }
            | Family::WangRtd
            | Family::Gini => Shape::StrictlyConcave,
            Family::Cvar { .. } | Family::MeanMedian | Family::InterEs => Shape::Concave,
            Family::InvertedS { .. } => Shape::Neither,
            Family::Custom(c) => c.shape,
        }
    }

    /// Nondecreasing on `[0,1]`.
    pub fn is_monotone(&self) -> bool {
        match &self.family {
            Family::Mean
            | Family::DualPower { .. }
            | Family::Quadratic { .. }
            | Family::Cvar { .. }
            | Family::Pht { .. }
            | Family::InvertedS { .. } => true,
            Family::MeanMedian | Family::InterEs | Family::WangRtd | Family::Gini => false,
            Family::Custom(c) => c.monotone,
        }
    }

    /// A maximizer of `h` over `[0,1]`.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    fn locate_peak(&self) -> f64 {
        if self.is_monotone() {
            return 1.0;
        }
        let n = 100_000usize;
        let mut best = (0.0, self.h(0.0));
        for k in 1..=n {
            let u = k as f64 / n as f64;
            let v = self.h(u);
            if v > best.1 {
                best = (u, v);
            }
        }
        if !self.shape().is_concave() {
            return best.0;
        }
        // Ternary refinement inside the bracketing cell.
        let (mut lo, mut hi) = (
            (best.0 - 1.0 / n as f64).max(0.0),
            (best.0 + 1.0 / n as f64).min(1.0),
        );
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if self.h(m1) < self.h(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let u = 0.5 * (lo + hi);
        if self.h(u) > best.1 {
            u
        } else {
            best.0
        }
    }

    /// `max h` over `[lo, hi] ⊆ [0,1]`.
    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
        if self.shape().is_concave() {
            self.h(self.peak.clamp(lo, hi))
        } else if self.is_monotone() {
            self.h(hi)
        } else {
            self.scan(lo, hi, f64::max)
        }
    }

    /// `min h` over `[lo, hi] ⊆ [0,1]`.
    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
        if self.shape().is_concave() {
            self.h(lo).min(self.h(hi))
        } else if self.is_monotone() {
            self.h(lo)
        } else {
            self.scan(lo, hi, f64::min)
        }
    }

    fn scan(&self, lo: f64, hi: f64, pick: fn(f64, f64) -> f64) -> f64 {
        let mut acc = pick(self.h(lo), self.h(hi));
        if hi > lo {
            for k in 1..SCAN_POINTS {
                acc = pick(acc, self.h(lo + (hi - lo) * k as f64 / SCAN_POINTS as f64));
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn builtins() -> &'static [Distortion] {
        static ALL: std::sync::OnceLock<Vec<Distortion>> = std::sync::OnceLock::new();
        ALL.get_or_init(|| {
            vec![
                Distortion::mean(),
                Distortion::dual_power(2.0).unwrap(),
                Distortion::dual_power(3.5).unwrap(),
                Distortion::quadratic(0.0).unwrap(),
                Distortion::quadratic(0.5).unwrap(),
                Distortion::quadratic(1.0).unwrap(),
                Distortion::cvar(0.5).unwrap(),
                Distortion::cvar(0.75).unwrap(),
                Distortion::pht(0.5).unwrap(),
                Distortion::mean_median(),
                Distortion::inter_es(0.5).unwrap(),
                Distortion::wang_rtd(),
                Distortion::gini(),
                Distortion::inverted_s(0.5).unwrap(),
                Distortion::inverted_s(2.0).unwrap(),
            ]
        })
    }

    #[test]
    fn frozen_values() {
        assert_eq!(Distortion::gini().eval(0.5).unwrap(), 0.25);
        for u in [0.0, 0.3, 1.0] {
            assert_eq!(Distortion::mean().eval(u).unwrap(), u);
        }
        assert_eq!(Distortion::cvar(0.5).unwrap().eval(0.8).unwrap(), 1.0);
        assert_eq!(Distortion::wang_rtd().eval(0.25).unwrap(), 0.25);
        assert!(Distortion::gini().eval(1.5).is_err());
        assert!(Distortion::gini().eval(-0.1).is_err());
    }

    #[test]
    fn closed_forms() {
        let u: f64 = 0.3;
        assert!((Distortion::dual_power(2.0).unwrap().h(u) - (1.0 - 0.49)).abs() < 1e-15);
        assert!((Distortion::quadratic(1.0).unwrap().h(u) - (2.0 * u - u * u)).abs() < 1e-15);
        assert!((Distortion::pht(0.5).unwrap().h(u) - u.sqrt()).abs() < 1e-15);
        assert!((Distortion::mean_median().h(0.7) - 0.3).abs() < 1e-15);
        assert!((Distortion::inter_es(0.5).unwrap().h(0.7) - 0.6).abs() < 1e-15);
        assert!((Distortion::inter_es(0.5).unwrap().h(0.2) - 0.4).abs() < 1e-15);
        let inv = Distortion::inverted_s(2.0).unwrap();
        assert!((inv.h(u) - (-(u.ln().powi(2))).exp()).abs() < 1e-15);
        assert_eq!(inv.h(1.0), 1.0);
    }

    #[test]
    fn h_vanishes_at_zero() {
        for d in builtins() {
            assert_eq!(d.eval(0.0).unwrap(), 0.0, "{}", d.name());
        }
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(Distortion::dual_power(1.5).is_err());
        assert!(Distortion::quadratic(1.2).is_err());
        assert!(Distortion::cvar(1.0).is_err());
        assert!(Distortion::pht(1.0).is_err());
        assert!(Distortion::inter_es(0.3).is_err());
        assert!(Distortion::inverted_s(0.0).is_err());
        let bad = CustomDistortion {
            name: "shifted".into(),
            h: Arc::new(|u| u + 0.1),
            holder_q: 1.0,
            holder_l: 1.0,
            shape: Shape::Concave,
            monotone: true,
        };
        assert!(Distortion::custom(bad).is_err());
    }

    #[test]
    fn holder_table() {
        assert_eq!(Distortion::gini().holder_params(None).unwrap(), (1.0, 1.0));
        assert_eq!(
            Distortion::cvar(0.75).unwrap().holder_params(None).unwrap(),
            (1.0, 4.0)
        );
        assert_eq!(
            Distortion::wang_rtd()
                .holder_params(Some((0.0, 1.0)))
                .unwrap(),
            (0.5, 1.0)
        );
        assert_eq!(
            Distortion::wang_rtd()
                .holder_params(Some((0.0, 4.0)))
                .unwrap(),
            (0.5, 2.0)
        );
        assert!(Distortion::wang_rtd()
            .holder_params(None)
            .unwrap_err()
            .is_config());
        assert!(Distortion::pht(0.5)
            .unwrap()
            .holder_params(None)
            .unwrap_err()
            .is_config());
        let (q, l) = Distortion::pht(0.5)
            .unwrap()
            .holder_params(Some((1.0, 5.0)))
            .unwrap();
        assert_eq!((q, l), (0.5, 2.0));
        assert_eq!(
            Distortion::dual_power(3.0)
                .unwrap()
                .holder_params(None)
                .unwrap(),
            (1.0, 3.0)
        );
        assert_eq!(
            Distortion::quadratic(0.5)
                .unwrap()
                .holder_params(None)
                .unwrap(),
            (1.0, 1.5)
        );
        assert_eq!(
            Distortion::inter_es(0.5)
                .unwrap()
                .holder_params(None)
                .unwrap(),
            (1.0, 2.0)
        );
        assert!(Distortion::inverted_s(0.5)
            .unwrap()
            .holder_params(None)
            .is_err());
    }

    #[test]
    fn peaks() {
        assert!((Distortion::gini().peak() - 0.5).abs() < 1e-9);
        assert!((Distortion::wang_rtd().peak() - 0.25).abs() < 1e-9);
        assert!((Distortion::mean_median().peak() - 0.5).abs() < 1e-9);
        assert_eq!(Distortion::cvar(0.5).unwrap().peak(), 1.0);
    }

    #[test]
    fn interval_extrema_match_scan() {
        for d in builtins() {
            for &(lo, hi) in &[(0.0, 1.0), (0.1, 0.4), (0.45, 0.9), (0.6, 0.6), (0.0, 0.05)] {
                let mut mx = f64::MIN;
                let mut mn = f64::MAX;
                for k in 0..=20_000 {
                    let v = d.h(lo + (hi - lo) * k as f64 / 20_000.0);
                    mx = mx.max(v);
                    mn = mn.min(v);
                }
                assert!(
                    d.max_on(lo, hi) >= mx - 1e-9,
                    "{} max on [{lo},{hi}]",
                    d.name()
                );
                assert!(
                    d.max_on(lo, hi) <= mx + 1e-4,
                    "{} max on [{lo},{hi}]",
                    d.name()
                );
                assert!(
                    (d.min_on(lo, hi) - mn).abs() < 1e-9,
                    "{} min on [{lo},{hi}]",
                    d.name()
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn concave_shapes_certify(u in 0.0..=1.0f64, v in 0.0..=1.0f64, lam in 0.0..=1.0f64) {
            for d in builtins() {
                if !d.shape().is_concave() {
                    continue;
                }
                let mid = d.h(lam * u + (1.0 - lam) * v);
                let chord = lam * d.h(u) + (1.0 - lam) * d.h(v);
                prop_assert!(mid >= chord - 1e-12, "{} at ({u},{v},{lam})", d.name());
            }
        }

        #[test]
        fn strictly_concave_shapes_are_strict(u in 0.0..=1.0f64, v in 0.0..=1.0f64, lam in 0.05..=0.95f64) {
            prop_assume!((u - v).abs() > 1e-3);
            for d in builtins() {
                if d.shape() != Shape::StrictlyConcave {
                    continue;
                }
                let mid = d.h(lam * u + (1.0 - lam) * v);
                let chord = lam * d.h(u) + (1.0 - lam) * d.h(v);
                prop_assert!(mid > chord, "{} at ({u},{v},{lam})", d.name());
            }
        }

        #[test]
        fn scalar_holder_holds(u in 0.0..=1.0f64, v in 0.0..=1.0f64) {
            for d in builtins() {
                if let Some((r, l)) = d.scalar_holder() {
                    let lhs = (d.h(u) - d.h(v)).abs();
                    prop_assert!(lhs <= l * (u - v).abs().powf(r) + 1e-12, "{} at ({u},{v})", d.name());
                }
            }
        }

        #[test]
        fn monotone_flag_is_honest(u in 0.0..=1.0f64, v in 0.0..=1.0f64) {
            for d in builtins() {
                if d.is_monotone() {
                    let (a, b) = if u <= v { (u, v) } else { (v, u) };
                    prop_assert!(d.h(a) <= d.h(b) + 1e-15, "{}", d.name());
                }
            }
        }
    }
}
