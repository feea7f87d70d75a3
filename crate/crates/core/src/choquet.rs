//! Signed Choquet integrals
//! `U_h(Q) = ∫_{-∞}^0 (h(1-Q) - h(1)) dx + ∫_0^∞ h(1-Q) dx`.
//!
//! Step CDFs are integrated exactly on their breakpoints; continuous CDFs go
//! through adaptive quadrature on a declared truncation window.

use std::fmt;
use std::sync::Arc;

use crate::distortion::Distortion;
use crate::error::{domain, Result};
use crate::quadrature;
use crate::simplex::MixtureWeights;

/// Supports closer than this are coalesced when merging.
pub const COALESCE_TOL: f64 = 1e-12;

/// Default absolute tolerance for quadrature.
pub const DEFAULT_TOL: f64 = 1e-8;

/// A right-continuous step CDF with finitely many jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSupportCdf {
    supports: Vec<f64>,
    cum: Vec<f64>,
}

impl FiniteSupportCdf {
    /// From support points and cumulative probabilities `cum_j = Q(x_j)`.
    pub fn from_cumulative(supports: Vec<f64>, cum: Vec<f64>) -> Result<Self> {
        if supports.is_empty() || supports.len() != cum.len() {
            return Err(domain(
                "step CDF needs matching, nonempty supports and cumulative masses",
            ));
        }
        if supports.iter().any(|x| !x.is_finite()) {
            return Err(domain("step CDF supports must be finite"));
        }
        if supports.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("step CDF supports must be strictly increasing"));
        }
        if cum[0] < 0.0 || cum.windows(2).any(|w| w[1] < w[0]) {
            return Err(domain(
                "cumulative masses must be nonnegative and nondecreasing",
            ));
        }
        let last = *cum.last().expect("nonempty");
        if (last - 1.0).abs() > 1e-12 {
            return Err(domain(format!(
                "cumulative masses must end at 1, got {last}"
            )));
        }
        let mut cum = cum;
        *cum.last_mut().expect("nonempty") = 1.0;
        Ok(FiniteSupportCdf { supports, cum })
    }

    /// From unsorted atoms `(x, mass)`; duplicate locations are merged.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.iter().any(|(x, m)| !x.is_finite() || !(*m >= 0.0)) {
            return Err(domain("atoms need finite locations and nonnegative masses"));
        }
        let mut atoms = atoms.to_vec();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut supports: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut cum: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for (x, m) in atoms {
            acc += m;
            match supports.last() {
                Some(&last) if x - last <= COALESCE_TOL => *cum.last_mut().expect("paired") = acc,
                _ => {
                    supports.push(x);
                    cum.push(acc);
                }
            }
        }
        Self::from_cumulative(supports, cum)
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::from_cumulative(vec![x], vec![1.0])
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("Bernoulli parameter {p} outside [0,1]")));
        }
        Self::from_cumulative(vec![0.0, 1.0], vec![1.0 - p, 1.0])
    }

    pub fn supports(&self) -> &[f64] {
        &self.supports
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Point masses, in support order.
    pub fn masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cum
            .iter()
            .map(|&c| {
                let m = c - prev;
                prev = c;
                m
            })
            .collect()
    }

    /// `Q(x)`: the mass at or below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.supports.partition_point(|&s| s <= x) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }
}

/// A CDF given by an evaluator, treated as 0 below `lo` and 1 above `hi`.
#[derive(Clone)]
pub struct ContinuousCdf {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
}

impl fmt::Debug for ContinuousCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousCdf")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("breaks", &self.breaks)
            .finish()
    }
}

impl ContinuousCdf {
    pub fn new(eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(domain(format!("invalid truncation window [{lo}, {hi}]")));
        }
        let (qa, qb) = (eval(lo), eval(hi));
        if qa > 1e-10 || qb < 1.0 - 1e-10 {
            return Err(domain(format!(
                "truncation window [{lo}, {hi}] leaves mass outside: Q(a)={qa:e}, Q(b)={qb}"
            )));
        }
        Ok(ContinuousCdf {
            eval,
            lo,
            hi,
            breaks: Vec::new(),
        })
    }

    /// Adds points where `Q` or its derivative is not smooth; quadrature
    /// splits there.
    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn window(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.lo {
            0.0
        } else if x > self.hi {
            1.0
        } else {
            (self.eval)(x).clamp(0.0, 1.0)
        }
    }
}

/// Exact `U_h` of a step CDF.
pub fn choquet_step(d: &Distortion, f: &FiniteSupportCdf) -> f64 {
    let h1 = d.h(1.0);
    let mut total = 0.0;
    let xs = &f.supports;
    // Below the first support Q = 0, which only contributes on (0, x_1).
    if xs[0] > 0.0 {
        total += h1 * xs[0];
    }
    for j in 0..xs.len() - 1 {
        let (a, b) = (xs[j], xs[j + 1]);
        let q = f.cum[j];
        let tail = d.h(1.0 - q);
        if b <= 0.0 {
            total += (tail - h1) * (b - a);
        } else if a >= 0.0 {
            total += tail * (b - a);
        } else {
            total += (tail - h1) * (0.0 - a) + tail * b;
        }
    }
    // Above the last support Q = 1; only (x_m, 0) contributes when x_m < 0.
    let last = xs[xs.len() - 1];
    if last < 0.0 {
        total += -h1 * (0.0 - last);
    }
    total
}

/// Precomputed merged breakpoints for evaluating many mixtures of the same
/// step CDFs.
#[derive(Debug, Clone)]
pub struct MixtureEvaluator {
    /// Interval lengths, in merged-breakpoint order.
    lengths: Vec<f64>,
    /// Whether each interval lies on the negative axis.
    negative: Vec<bool>,
    /// `cdf_at[k * K + i]`: CDF of component `i` on interval `k`.
    cdf_at: Vec<f64>,
    k: usize,
}

impl MixtureEvaluator {
    pub fn new(cdfs: &[&FiniteSupportCdf]) -> Self {
        let k = cdfs.len();
        let mut xs: Vec<f64> = cdfs
            .iter()
            .flat_map(|c| c.supports.iter().copied())
            .collect();
        xs.push(0.0);
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() <= COALESCE_TOL);
        let mut lengths = Vec::with_capacity(xs.len());
        let mut negative = Vec::with_capacity(xs.len());
        let mut cdf_at = Vec::with_capacity(xs.len() * k);
        for w in xs.windows(2) {
            lengths.push(w[1] - w[0]);
            negative.push(w[1] <= 0.0);
            // Evaluate just inside the interval so coalesced supports land on the left.
            let probe = w[0] + COALESCE_TOL;
            cdf_at.extend(cdfs.iter().map(|c| c.cdf(probe)));
        }
        MixtureEvaluator {
            lengths,
            negative,
            cdf_at,
            k,
        }
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    /// `U_h(Σ w_i F_i)`.
    pub fn eval(&self, d: &Distortion, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.k);
        let h1 = d.h(1.0);
        let mut total = 0.0;
        for (idx, (&len, &neg)) in self.lengths.iter().zip(&self.negative).enumerate() {
            let row = &self.cdf_at[idx * self.k..(idx + 1) * self.k];
            let q: f64 = row.iter().zip(w).map(|(c, wi)| c * wi).sum();
            let tail = d.h(1.0 - q);
            total += if neg { (tail - h1) * len } else { tail * len };
        }
        total
    }
}

/// Exact `U_h` of the mixture `Σ w_i F_i` of step CDFs.
pub fn choquet_mixture(
    d: &Distortion,
    w: &MixtureWeights,
    cdfs: &[FiniteSupportCdf],
) -> Result<f64> {
    if w.len() != cdfs.len() {
        return Err(domain(format!(
            "{} weights for {} CDFs",
            w.len(),
            cdfs.len()
        )));
    }
    let refs: Vec<&FiniteSupportCdf> = cdfs.iter().collect();
    Ok(MixtureEvaluator::new(&refs).eval(d, w.as_slice()))
}

/// `U_h` of a continuous CDF by adaptive quadrature to absolute error `tol`.
pub fn choquet_quadrature(d: &Distortion, f: &ContinuousCdf, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(domain("quadrature tolerance must be positive"));
    }
    let h1 = d.h(1.0);
    let (lo, hi) = f.window();
    let mut breaks = f.breaks.clone();
    breaks.push(lo);
    breaks.push(hi);
    let neg = if lo < 0.0 {
        quadrature::integrate_split(|x| d.h(1.0 - f.cdf(x)) - h1, lo, 0.0, &breaks, tol / 2.0)?
    } else {
        0.0
    };
    let pos = if hi > 0.0 {
        quadrature::integrate_split(|x| d.h(1.0 - f.cdf(x)), 0.0, hi, &breaks, tol / 2.0)?
    } else {
        0.0
    };
    Ok(neg + pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn w(v: &[f64]) -> MixtureWeights {
        MixtureWeights::new(v.to_vec()).unwrap()
    }

    #[test]
    fn step_examples() {
        let g = Distortion::gini();
        let b = FiniteSupportCdf::bernoulli(0.3).unwrap();
        assert!((choquet_step(&g, &b) - 0.21).abs() < 1e-15);
        for p in [0.0, 0.25, 0.9, 1.0] {
            let b = FiniteSupportCdf::bernoulli(p).unwrap();
            assert!((choquet_step(&Distortion::mean(), &b) - p).abs() < 1e-15);
        }
        assert_eq!(
            choquet_step(&g, &FiniteSupportCdf::point_mass(0.0).unwrap()),
            0.0
        );
        let sym = FiniteSupportCdf::from_atoms(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!(choquet_step(&Distortion::mean(), &sym).abs() < 1e-15);
    }

    #[test]
    fn step_mean_is_expectation_anywhere_on_the_line() {
        let f = FiniteSupportCdf::from_atoms(&[(-3.0, 0.2), (-1.5, 0.3), (2.0, 0.1), (4.0, 0.4)])
            .unwrap();
        let mean = -0.6 - 0.45 + 0.2 + 1.6;
        assert!((choquet_step(&Distortion::mean(), &f) - mean).abs() < 1e-14);
        let pos = FiniteSupportCdf::from_atoms(&[(2.0, 0.5), (3.0, 0.5)]).unwrap();
        assert!((choquet_step(&Distortion::mean(), &pos) - 2.5).abs() < 1e-14);
        let neg = FiniteSupportCdf::from_atoms(&[(-2.0, 0.5), (-3.0, 0.5)]).unwrap();
        assert!((choquet_step(&Distortion::mean(), &neg) + 2.5).abs() < 1e-14);
    }

    #[test]
    fn mixture_examples() {
        let g = Distortion::gini();
        let arms = vec![
            FiniteSupportCdf::bernoulli(0.2).unwrap(),
            FiniteSupportCdf::bernoulli(0.8).unwrap(),
        ];
        assert!((choquet_mixture(&g, &w(&[0.5, 0.5]), &arms).unwrap() - 0.25).abs() < 1e-12);
        let v = choquet_mixture(&g, &w(&[0.3, 0.7]), &arms).unwrap();
        assert!((v - 0.62 * 0.38).abs() < 1e-12);
        assert!((v - 0.2356).abs() < 1e-12);
        for i in 0..2 {
            let e = MixtureWeights::unit(2, i);
            let v = choquet_mixture(&g, &e, &arms).unwrap();
            assert!((v - choquet_step(&g, &arms[i])).abs() < 1e-15);
        }
        assert!(choquet_mixture(&g, &w(&[1.0]), &arms).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let n = Normal::new(3.0, 1.0).unwrap();
        let f = ContinuousCdf::new(Arc::new(move |x| n.cdf(x)), -5.0, 11.0).unwrap();
        let v = choquet_quadrature(&Distortion::mean(), &f, DEFAULT_TOL).unwrap();
        assert!((v - 3.0).abs() < 1e-6);

        let e = ContinuousCdf::new(
            Arc::new(|x: f64| {
                if x < 1.0 {
                    0.0
                } else {
                    1.0 - (-(x - 1.0)).exp()
                }
            }),
            1.0,
            41.0,
        )
        .unwrap()
        .with_breaks(vec![1.0]);
        let v = choquet_quadrature(&Distortion::gini(), &e, DEFAULT_TOL).unwrap();
        assert!((v - 0.5).abs() < 1e-7, "{v}");

        let narrow = Normal::new(0.0, 1e-3).unwrap();
        let f = ContinuousCdf::new(Arc::new(move |x| narrow.cdf(x)), -8e-3, 8e-3).unwrap();
        assert!(
            choquet_quadrature(&Distortion::mean(), &f, DEFAULT_TOL)
                .unwrap()
                .abs()
                < DEFAULT_TOL
        );
    }

    #[test]
    fn invalid_inputs() {
        assert!(FiniteSupportCdf::from_cumulative(vec![1.0, 0.0], vec![0.5, 1.0]).is_err());
        assert!(FiniteSupportCdf::from_cumulative(vec![0.0, 1.0], vec![0.5, 0.9]).is_err());
        assert!(FiniteSupportCdf::from_cumulative(vec![f64::NAN], vec![1.0]).is_err());
        assert!(FiniteSupportCdf::from_atoms(&[(f64::INFINITY, 1.0)]).is_err());
        assert!(ContinuousCdf::new(Arc::new(|_| 0.5), 0.0, 1.0).is_err());
    }

    #[test]
    fn quadrature_agrees_with_step_on_smoothed_steps() {
        // A fine staircase integrated by quadrature matches the exact step value.
        let f = FiniteSupportCdf::from_atoms(&[(-0.5, 0.25), (0.75, 0.5), (1.5, 0.25)]).unwrap();
        let step = f.clone();
        let c = ContinuousCdf::new(Arc::new(move |x| step.cdf(x)), -1.0, 2.0)
            .unwrap()
            .with_breaks(f.supports().to_vec());
        for d in [
            Distortion::gini(),
            Distortion::wang_rtd(),
            Distortion::mean(),
        ] {
            let exact = choquet_step(&d, &f);
            let quad = choquet_quadrature(&d, &c, 1e-10).unwrap();
            assert!(
                (exact - quad).abs() < 1e-9,
                "{}: {exact} vs {quad}",
                d.name()
            );
        }
    }
}
