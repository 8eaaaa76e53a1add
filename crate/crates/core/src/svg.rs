//! Static single-panel line charts as SVG 1.1.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

pub struct Series<'a> {
    pub label: String,
    pub values: &'a [f64],
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub xs: &'a [f64],
    pub series: Vec<Series<'a>>,
    /// Fixed y range; otherwise fitted to the data with 5% padding.
    pub y_range: Option<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round tick step (1, 2 or 5 times a power of ten) giving about `n` ticks.
fn tick_step(span: f64, n: f64) -> f64 {
    let raw = span / n;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let unit = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    unit * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo, 5.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

impl Chart<'_> {
    pub fn render(&self) -> String {
        let x_lo = self.xs.first().copied().unwrap_or(0.0);
        let mut x_hi = self.xs.last().copied().unwrap_or(1.0);
        if x_hi <= x_lo {
            x_hi = x_lo + 1.0;
        }
        let (y_lo, y_hi) = self.y_range.unwrap_or_else(|| {
            let finite = self.series.iter().flat_map(|s| s.values.iter()).filter(|v| v.is_finite());
            let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        });
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph;

        let mut out = String::new();
        let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(self.title));
        let _ = writeln!(out, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);

        for x in ticks(x_lo, x_hi) {
            let px = sx(x);
            let _ = writeln!(out, r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#333"/>"##, TOP + ph, TOP + ph + 5.0);
            let _ = writeln!(out, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(x));
        }
        for y in ticks(y_lo, y_hi) {
            let py = sy(y);
            let _ = writeln!(out, r##"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="#333"/>"##, LEFT - 5.0);
            let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd"/>"##, LEFT + pw);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py + 4.0, label(y));
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 12.0, escape(self.x_label));
        let _ = writeln!(
            out,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut points = String::new();
            for (x, y) in self.xs.iter().zip(s.values) {
                if y.is_finite() {
                    let _ = write!(points, "{:.2},{:.2} ", sx(*x), sy(y.clamp(y_lo, y_hi)));
                }
            }
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.trim_end());
            if self.series.len() > 1 {
                let ly = TOP + 14.0 + 16.0 * i as f64;
                let lx = LEFT + pw - 110.0;
                let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
                let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
            }
        }
        out.push_str("</svg>\n");
        out
    }
}
