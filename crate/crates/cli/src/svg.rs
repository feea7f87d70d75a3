//! Minimal line-chart SVG writer.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

impl Scale {
    fn map(self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Log10 => v.log10(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric error bar per point.
    pub errors: Option<Vec<f64>>,
    pub dashed: bool,
}

impl Series {
    pub fn line(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
            errors: None,
            dashed: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub series: Vec<Series>,
    /// Free-text lines printed under the legend.
    pub annotations: Vec<String>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Round tick labels without trailing noise.
fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= n as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|j| j as f64 * step).collect()
}

impl Chart {
    pub fn render(&self) -> String {
        let pts = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter().enumerate().map(move |(i, p)| (s, i, *p)))
        };
        let xs: Vec<f64> = pts()
            .map(|(_, _, p)| self.x_scale.map(p.0))
            .filter(|v| v.is_finite())
            .collect();
        let ys: Vec<f64> = pts()
            .flat_map(|(s, i, p)| {
                let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
                [p.1 - e, p.1 + e]
            })
            .filter(|v| v.is_finite())
            .collect();
        let (mut x0, mut x1) = bounds(&xs);
        let (mut y0, mut y1) = bounds(&ys);
        if x1 <= x0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 <= y0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |v: f64| LEFT + (self.x_scale.map(v) - x0) / (x1 - x0) * pw;
        let sy = |v: f64| TOP + (1.0 - (v - y0) / (y1 - y0)) * ph;

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            o,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );

        let xticks: Vec<(f64, String)> = match self.x_scale {
            Scale::Linear => nice_ticks(x0, x1, 6)
                .into_iter()
                .map(|t| (t, fmt_tick(t)))
                .collect(),
            Scale::Log10 => (x0.ceil() as i32..=x1.floor() as i32)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect(),
        };
        for (v, label) in xticks {
            let x = sx(v);
            let _ = writeln!(
                o,
                r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
                TOP + ph,
                TOP + ph + 5.0
            );
            let _ = writeln!(
                o,
                r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                TOP + ph + 18.0,
                esc(&label)
            );
        }
        for v in nice_ticks(y0, y1, 6) {
            let y = sy(v);
            let _ = writeln!(
                o,
                r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#,
                LEFT - 5.0
            );
            let _ = writeln!(
                o,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 8.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            o,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 12.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );

        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let dash = if s.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let path: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.1.is_finite() && self.x_scale.map(p.0).is_finite())
                .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
                .collect();
            let _ = writeln!(
                o,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.8"{dash} points="{}"/>"#,
                path.join(" ")
            );
            if let Some(errs) = &s.errors {
                for (p, e) in s.points.iter().zip(errs) {
                    let x = sx(p.0);
                    let _ = writeln!(
                        o,
                        r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                        sy(p.1 - e),
                        sy(p.1 + e)
                    );
                    let _ = writeln!(
                        o,
                        r#"<circle cx="{x:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                        sy(p.1)
                    );
                }
            }
            let ly = TOP + 14.0 + 18.0 * k as f64;
            let lx = W - RIGHT + 12.0;
            let _ = writeln!(
                o,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
                lx + 22.0
            );
            let _ = writeln!(
                o,
                r#"<text x="{}" y="{}">{}</text>"#,
                lx + 28.0,
                ly + 4.0,
                esc(&s.name)
            );
        }
        for (j, a) in self.annotations.iter().enumerate() {
            let y = TOP + 26.0 + 18.0 * (self.series.len() + j) as f64;
            let _ = writeln!(
                o,
                r#"<text x="{}" y="{y}" font-size="10">{}</text>"#,
                W - RIGHT + 12.0,
                esc(a)
            );
        }
        o.push_str("</svg>\n");
        o
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 1.0);
    }
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}
