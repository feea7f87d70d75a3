//! Globally adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Maximum number of subintervals before giving up.
pub const MAX_INTERVALS: usize = 20_000;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to absolute error `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut parts = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    loop {
        let (total, err) = parts
            .iter()
            .fold((0.0, 0.0), |(s, e), p| (s + p.2, e + p.3));
        if err <= tol {
            return Ok(total);
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::Numeric {
                message: format!("quadrature did not reach tolerance {tol:e} (estimate {err:e})"),
                partial: total,
            });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            let (total, _) = parts
                .iter()
                .fold((0.0, 0.0), |(s, e), p| (s + p.2, e + p.3));
            return Err(Error::Numeric {
                message: "quadrature interval underflow".into(),
                partial: total,
            });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Integrates over `[a, b]` split at the given interior breakpoints, sharing
/// the error budget evenly between pieces.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| *x > a && *x < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let pieces = (pts.len() - 1).max(1) as f64;
    let mut total = 0.0;
    for w in pts.windows(2) {
        match integrate(&f, w[0], w[1], tol / pieces) {
            Ok(v) => total += v,
            Err(Error::Numeric { message, partial }) => {
                return Err(Error::Numeric {
                    message,
                    partial: total + partial,
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_kinks() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-10);
        let v = integrate_split(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-12).unwrap();
        assert!((v - 0.29).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let v = integrate(|x: f64| (-x).exp(), 0.0, 40.0, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }
}
