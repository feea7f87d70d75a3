//! Points of the probability simplex and the discrete grids searched by the
//! policies.
//!
//! Grids are enumerated on an integer lattice and converted to reals at the
//! end, in lexicographic order of the lattice vector, so "first maximizer in
//! enumeration order" is the lexicographically smallest one.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

/// Tolerance on `Σ w_i = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Slack when testing lattice points against box or sum constraints.
const LATTICE_TOL: f64 = 1e-9;

/// A point of the simplex `Δ^{K-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(domain("mixture weights must be nonempty"));
        }
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(domain(format!(
                "mixture weights must be finite and nonnegative: {w:?}"
            )));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(domain(format!("mixture weights sum to {s}, not 1")));
        }
        Ok(MixtureWeights(w))
    }

    /// The vertex `e_i` of the `K`-simplex.
    pub fn unit(k: usize, i: usize) -> Self {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        MixtureWeights(w)
    }

    pub fn uniform(k: usize) -> Self {
        MixtureWeights(vec![1.0 / k as f64; k])
    }

    /// Pull fractions `τ / Στ`.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let t: u64 = counts.iter().sum();
        if t == 0 {
            return Err(domain("cannot normalize all-zero counts"));
        }
        Ok(MixtureWeights(
            counts.iter().map(|&c| c as f64 / t as f64).collect(),
        ))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_distance(&self, other: &MixtureWeights) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn linf_distance(&self, other: &MixtureWeights) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for MixtureWeights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    /// `w = ε n`; the last coordinate absorbs any deficit.
    Etc { eps: f64 },
    /// `w_i = ε (n_i + ½)`; the last coordinate absorbs any deficit.
    Ucb { eps: f64 },
    /// The refined grid built from `b^(ℓ)`: spacing `2^ℓ / A^{ℓ+1}` inside
    /// the box `b ± 2^{ℓ-1} / A^ℓ`.
    Cirt {
        level: u32,
        a: u32,
        center: MixtureWeights,
    },
    /// Offset lattice `(n + ½) 2^L / A^{L+1}` inside the phase-`L` box.
    CirtTracking {
        level: u32,
        a: u32,
        center: MixtureWeights,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub k: usize,
    pub kind: GridKind,
}

impl GridSpec {
    pub fn etc(k: usize, eps: f64) -> Self {
        GridSpec {
            k,
            kind: GridKind::Etc { eps },
        }
    }

    pub fn ucb(k: usize, eps: f64) -> Self {
        GridSpec {
            k,
            kind: GridKind::Ucb { eps },
        }
    }

    /// The first CIRT grid, `Δ_{1/A}`.
    pub fn cirt_initial(k: usize, a: u32) -> Self {
        Self::etc(k, 1.0 / a as f64)
    }

    pub fn cirt(level: u32, a: u32, center: MixtureWeights) -> Self {
        GridSpec {
            k: center.len(),
            kind: GridKind::Cirt { level, a, center },
        }
    }

    pub fn cirt_tracking(level: u32, a: u32, center: MixtureWeights) -> Self {
        GridSpec {
            k: center.len(),
            kind: GridKind::CirtTracking { level, a, center },
        }
    }
}

/// Enumerated grid points, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    k: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn weights(&self, i: usize) -> MixtureWeights {
        MixtureWeights(self.point(i).to_vec())
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.k)
    }

    pub fn to_weights(&self) -> Vec<MixtureWeights> {
        self.iter().map(|p| MixtureWeights(p.to_vec())).collect()
    }

    /// A single-point grid.
    pub fn singleton(w: &MixtureWeights) -> Self {
        Grid {
            k: w.len(),
            data: w.as_slice().to_vec(),
        }
    }

    /// Grid over explicit points, kept in the given order.
    pub fn from_points(points: &[MixtureWeights]) -> Result<Self> {
        let k = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| Error::DegenerateGrid("no points".into()))?;
        if points.iter().any(|p| p.len() != k) {
            return Err(domain("grid points differ in dimension"));
        }
        Ok(Grid {
            k,
            data: points
                .iter()
                .flat_map(|p| p.as_slice().iter().copied())
                .collect(),
        })
    }

    /// Index of the first maximizer of `score` (ties within `tol` keep the
    /// earlier, i.e. lexicographically smaller, point).
    pub fn argmax_by<F: FnMut(&[f64]) -> f64>(&self, mut score: F, tol: f64) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in self.iter().enumerate() {
            let s = score(p);
            if s > best.1 + tol {
                best = (i, s);
            }
        }
        best
    }
}

/// `1/x` as an integer when it is one up to rounding.
fn integer_reciprocal(x: f64) -> Option<u64> {
    let r = 1.0 / x;
    let n = r.round();
    if n >= 1.0 && (r - n).abs() <= 1e-9 * n.max(1.0) {
        Some(n as u64)
    } else {
        None
    }
}

/// Per-coordinate lattice description: coordinate `i` takes values
/// `unit * (n + offset)` for `n` in `lo_i..=hi_i`; the last coordinate is
/// whatever remains, subject to `[last_lo, last_hi]`.
struct Lattice {
    k: usize,
    unit: f64,
    /// Integer reciprocal of `unit`, when it exists.
    denom: Option<u64>,
    offset: f64,
    ranges: Vec<(u64, u64)>,
    last_lo: f64,
    last_hi: f64,
}

impl Lattice {
    fn value(&self, n: u64) -> f64 {
        match self.denom {
            Some(d) if self.offset == 0.0 => n as f64 / d as f64,
            Some(d) => (2 * n + 1) as f64 / (2 * d) as f64,
            None => self.unit * (n as f64 + self.offset),
        }
    }

    fn enumerate(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut n = vec![0u64; self.k - 1];
        self.recurse(0, &mut n, &mut out);
        out
    }

    fn recurse(&self, depth: usize, n: &mut Vec<u64>, out: &mut Vec<f64>) {
        if depth == self.k - 1 {
            let head: Vec<f64> = n.iter().map(|&x| self.value(x)).collect();
            let used: f64 = head.iter().sum();
            let mut last = match self.denom {
                // Exact remainder in lattice units.
                Some(d) if self.offset == 0.0 => {
                    let s: u64 = n.iter().sum();
                    if s > d {
                        return;
                    }
                    (d - s) as f64 / d as f64
                }
                _ => 1.0 - used,
            };
            if last < self.last_lo - LATTICE_TOL || last > self.last_hi + LATTICE_TOL {
                return;
            }
            if last < 0.0 {
                last = 0.0;
            }
            out.extend(head);
            out.push(last);
            return;
        }
        let (lo, hi) = self.ranges[depth];
        let used: f64 = n[..depth].iter().map(|&x| self.value(x)).sum();
        for v in lo..=hi {
            let val = self.value(v);
            if used + val > 1.0 + LATTICE_TOL {
                break;
            }
            n[depth] = v;
            self.recurse(depth + 1, n, out);
        }
    }
}

fn lattice_range(unit: f64, offset: f64, lo: f64, hi: f64) -> Option<(u64, u64)> {
    let first = ((lo - LATTICE_TOL) / unit - offset).ceil().max(0.0);
    let last = ((hi + LATTICE_TOL) / unit - offset).floor();
    if last < first {
        None
    } else {
        Some((first as u64, last as u64))
    }
}

/// All points of the grid, in lexicographic lattice order.
pub fn enumerate_grid(spec: &GridSpec) -> Result<Grid> {
    let k = spec.k;
    if k < 1 {
        return Err(domain("grid dimension must be at least 1"));
    }
    let lattice = match &spec.kind {
        GridKind::Etc { eps } | GridKind::Ucb { eps } => {
            if !(*eps > 0.0 && *eps <= 1.0) {
                return Err(config(format!("grid spacing must lie in (0,1], got {eps}")));
            }
            let offset = if matches!(spec.kind, GridKind::Ucb { .. }) {
                0.5
            } else {
                0.0
            };
            let top = lattice_range(*eps, offset, 0.0, 1.0).unwrap_or((0, 0));
            Lattice {
                k,
                unit: *eps,
                denom: integer_reciprocal(*eps),
                offset,
                ranges: vec![(0, top.1); k.saturating_sub(1)],
                last_lo: offset * eps,
                last_hi: 1.0,
            }
        }
        GridKind::Cirt { level, a, center } | GridKind::CirtTracking { level, a, center } => {
            if *a < 3 || *level < 1 {
                return Err(config(format!(
                    "cirt grid needs A >= 3 and level >= 1, got A={a}, level={level}"
                )));
            }
            let af = *a as f64;
            let unit = 2f64.powi(*level as i32) / af.powi(*level as i32 + 1);
            let half = 2f64.powi(*level as i32 - 1) / af.powi(*level as i32);
            let offset = if matches!(spec.kind, GridKind::CirtTracking { .. }) {
                0.5
            } else {
                0.0
            };
            let mut ranges = Vec::with_capacity(k - 1);
            for i in 0..k - 1 {
                match lattice_range(unit, offset, center[i] - half, center[i] + half) {
                    Some(r) => ranges.push(r),
                    None => {
                        return Err(Error::DegenerateGrid(format!(
                            "empty box at coordinate {i}"
                        )))
                    }
                }
            }
            Lattice {
                k,
                unit,
                denom: integer_reciprocal(unit),
                offset,
                ranges,
                last_lo: (center[k - 1] - half).max(0.0),
                last_hi: center[k - 1] + half,
            }
        }
    };
    if k == 1 {
        return Ok(Grid { k, data: vec![1.0] });
    }
    let data = lattice.enumerate();
    if data.is_empty() {
        return Err(Error::DegenerateGrid(format!(
            "no feasible points for {:?}",
            spec.kind
        )));
    }
    Ok(Grid { k, data })
}

/// Number of CIRT refinement phases, `⌈log_{A/2}(1/ε)⌉`.
pub fn phase_count(a: u32, eps_target: f64) -> Result<u32> {
    if a <= 2 {
        return Err(config(format!("phase count needs A >= 3, got {a}")));
    }
    if !(eps_target > 0.0 && eps_target < 1.0) {
        return Err(config(format!(
            "target resolution must lie in (0,1), got {eps_target}"
        )));
    }
    let x = (1.0 / eps_target).ln() / (a as f64 / 2.0).ln();
    let r = x.round();
    let l = if (x - r).abs() < 1e-12 { r } else { x.ceil() };
    Ok(l.max(1.0) as u32)
}
