//! Minimal SVG line plots: axes, ticks, one polyline per series.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn map_axis(v: f64, log: bool) -> Option<f64> {
    let t = if log {
        if v > 0.0 {
            v.log10()
        } else {
            return None;
        }
    } else {
        v
    };
    t.is_finite().then_some(t)
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300_f64.max(1e-12 * hi.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.floor() as i64, hi.ceil() as i64);
        let stride = ((b - a) / 8).max(1);
        return (a..=b).step_by(stride as usize).map(|e| e as f64).filter(|&e| e >= lo - 1e-9 && e <= hi + 1e-9).collect();
    }
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(t: f64, log: bool) -> String {
    if log {
        format!("1e{}", t.round() as i64)
    } else if t == 0.0 {
        "0".into()
    } else if t.abs() >= 1e4 || t.abs() < 1e-3 {
        format!("{t:.1e}")
    } else {
        let s = format!("{t:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let mapped: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter_map(|&(x, y)| Some((map_axis(x, self.log_x)?, map_axis(y, self.log_y)?)))
                    .collect()
            })
            .collect();
        let (x0, x1) = range(mapped.iter().flatten().map(|p| p.0));
        let (y0, y1) = range(mapped.iter().flatten().map(|p| p.1));
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for t in ticks(x0, x1, self.log_x) {
            let x = sx(t);
            let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t, self.log_x));
        }
        for t in ticks(y0, y1, self.log_y) {
            let y = sy(t);
            let _ = writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, label(t, self.log_y));
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, escape(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, (s, pts)) in self.series.iter().zip(&mapped).enumerate() {
            let color = COLORS[i % COLORS.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            if path.len() == 1 {
                let (x, y) = pts[0];
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            } else if !path.is_empty() {
                let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            }
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let lx = LEFT + pw - 150.0;
            let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polyline_and_skips_nonpositive_on_log_axes() {
        let p = Plot {
            title: "t".into(),
            log_y: true,
            series: vec![Series { label: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 0.0), (2.0, 1e-3)] }],
            ..Default::default()
        };
        let s = p.render();
        assert!(s.starts_with("<svg"));
        assert_eq!(s.matches("<polyline").count(), 1);
        assert!(s.contains("a&lt;b"));
        assert!(s.contains(">1e-3<"));
    }

    #[test]
    fn linear_ticks_are_round() {
        let labels: Vec<String> = ticks(0.0, 1.0, false).into_iter().map(|t| label(t, false)).collect();
        assert_eq!(labels, ["0", "0.2", "0.4", "0.6", "0.8", "1"]);
    }
}
