//! Minimal SVG line charts with a logarithmic y axis.

use std::fmt::Write;

use crate::error::{Result, RsfError};
use crate::io::Table;
use crate::presets::Metric;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
    /// Index into the palette; simulated and theory curves of one scenario
    /// share a colour.
    pub color: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    /// Renders the chart. Non-positive y values are dropped (log axis).
    pub fn to_svg(&self) -> Result<String> {
        let pts = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|p| p.1 > 0.0 && p.1.is_finite() && p.0.is_finite())
        };
        if pts().next().is_none() {
            return Err(RsfError::validation("plot", "no positive finite points to draw"));
        }
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y.log10());
            y1 = y1.max(y.log10());
        }
        if x1 == x0 {
            x0 -= 1.0;
            x1 += 1.0;
        }
        let (d0, d1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (d1 - y.log10()) / (d1 - d0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );

        // y decades
        let mut d = d0;
        while d <= d1 + 1e-9 {
            let y = TOP + (d1 - d) / (d1 - d0) * ph;
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
                LEFT + pw
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                d as i64
            );
            d += 1.0;
        }
        // x ticks
        let step = nice_step((x1 - x0) / 8.0);
        let mut t = (x0 / step).ceil() * step;
        while t <= x1 + 1e-9 * step {
            let x = sx(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#eee"/>"##,
                TOP + ph
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph + 16.0,
                trim_num(t)
            );
            t += step;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 14.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[series.color % PALETTE.len()];
            let good: Vec<(f64, f64)> = series.points.iter().copied().filter(|p| p.1 > 0.0 && p.1.is_finite()).collect();
            match series.style {
                Style::Line => {
                    let path: Vec<String> = good.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
                        path.join(" ")
                    );
                }
                Style::Markers => {
                    for &(x, y) in &good {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
            }
            // legend
            let ly = TOP + 10.0 + 20.0 * i as f64;
            let lx = W - RIGHT + 14.0;
            match series.style {
                Style::Line => {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.8"/>"#,
                        lx + 22.0
                    );
                }
                Style::Markers => {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{}" cy="{ly}" r="3.5" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                        lx + 11.0
                    );
                }
            }
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, esc(&series.label));
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let n = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    n * mag
}

fn trim_num(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Simulated-vs-theory series for one sweep table.
pub fn sweep_series(table: &Table, metric: Metric, label: &str, color: usize) -> Result<Vec<Series>> {
    let snr = table.column("snr_db")?;
    let (sim, th) = match metric {
        Metric::Tau => (table.column("mse_tau_sim")?, table.column("mse_tau_theory")?),
        Metric::Gamma => (table.column("mse_gamma_sim")?, table.column("mse_gamma_theory")?),
    };
    let zip = |v: Vec<f64>| snr.iter().copied().zip(v).collect::<Vec<_>>();
    Ok(vec![
        Series {
            label: format!("{label} (sim)"),
            points: zip(sim),
            style: Style::Markers,
            color,
        },
        Series {
            label: format!("{label} (theory)"),
            points: zip(th),
            style: Style::Line,
            color,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_legend() {
        let plot = Plot {
            title: "a < b".into(),
            x_label: "SNR (dB)".into(),
            y_label: "MSE".into(),
            series: vec![
                Series {
                    label: "sim".into(),
                    points: vec![(5.0, 1e-15), (10.0, 3e-16), (15.0, 0.0)],
                    style: Style::Markers,
                    color: 0,
                },
                Series {
                    label: "theory".into(),
                    points: vec![(5.0, 1e-15), (15.0, 1e-17)],
                    style: Style::Line,
                    color: 0,
                },
            ],
        };
        let svg = plot.to_svg().unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 2 + 1);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(">1e-17<") && svg.contains(">1e-15<"));
    }

    #[test]
    fn empty_plot_is_an_error() {
        assert!(Plot::default().to_svg().is_err());
    }

    #[test]
    fn tick_steps() {
        assert_eq!(nice_step(4.375), 5.0);
        assert_eq!(nice_step(0.13), 0.2);
        assert_eq!(trim_num(15.0), "15");
    }
}
