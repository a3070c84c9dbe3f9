//! Minimal self-contained SVG line charts.
//!
//! Coordinates are printed with fixed precision, so a chart renders to the
//! same bytes whenever its data are equal.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Plot `log10 |y|` instead of `y`.
    pub log_y: bool,
    /// Dashed vertical reference lines with labels.
    pub vlines: Vec<(f64, String)>,
    /// Dashed horizontal reference lines with labels.
    pub hlines: Vec<(f64, String)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    fn y_of(&self, y: f64) -> Option<f64> {
        let v = if self.log_y { y.abs().max(1e-300).log10() } else { y };
        v.is_finite().then_some(v)
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs = self.vlines.iter().map(|v| v.0).collect::<Vec<_>>();
        let mut ys = self.hlines.iter().filter_map(|h| self.y_of(h.0)).collect::<Vec<_>>();
        for s in &self.series {
            for &(x, y) in &s.points {
                if let Some(y) = self.y_of(y) {
                    if x.is_finite() {
                        xs.push(x);
                        ys.push(y);
                    }
                }
            }
        }
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&xs);
        let (y0, y1) = span(&ys);
        (x0, x1, y0, y1)
    }

    /// Renders the chart as a standalone SVG document.
    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let ylab = if self.log_y { format!("1e{fy:.1}") } else { format!("{fy:.3}") };
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{fx:.3}</text>"#,
                px(fx),
                MARGIN_T + ph + 18.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{ylab}</text>"#,
                MARGIN_L - 6.0,
                py(fy) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 10.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            esc(&self.y_label)
        );
        for (x, label) in &self.vlines {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.2}" y1="{MARGIN_T}" x2="{0:.2}" y2="{1:.2}" stroke="gray" stroke-dasharray="4 3"/><text x="{2:.2}" y="{3:.2}" fill="gray">{4}</text>"#,
                px(*x),
                MARGIN_T + ph,
                px(*x) + 3.0,
                MARGIN_T + 12.0,
                esc(label)
            );
        }
        for (y, label) in &self.hlines {
            if let Some(v) = self.y_of(*y) {
                let _ = writeln!(
                    s,
                    r#"<line x1="{MARGIN_L}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="gray" stroke-dasharray="4 3"/><text x="{2:.2}" y="{3:.2}" fill="gray">{4}</text>"#,
                    py(v),
                    MARGIN_L + pw,
                    MARGIN_L + 4.0,
                    py(v) - 3.0,
                    esc(label)
                );
            }
        }
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .filter_map(|&(x, y)| self.y_of(y).filter(|_| x.is_finite()).map(|v| format!("{:.2},{:.2}", px(x), py(v))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            let ly = MARGIN_T + 14.0 + 14.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" text-anchor="end">{}</text>"#,
                MARGIN_L + pw - 6.0,
                esc(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
