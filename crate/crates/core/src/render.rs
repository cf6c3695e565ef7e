//! Minimal SVG figures: the Lissajous panel matrix, regression scatter and
//! accumulated angular momentum curves.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

use crate::spectral::{EigencycleSet, SubspacePair};

pub const POSITIVE_COLOR: &str = "#d62728";
pub const NEGATIVE_COLOR: &str = "#1f5fbf";
pub const NEUTRAL_COLOR: &str = "#444444";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    LissajousMatrix,
    RegressionScatter,
    AccumulatedL,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    /// Panel edge for matrices, full width otherwise.
    pub size_px: u32,
    pub positive_color: String,
    pub negative_color: String,
}

impl PlotSpec {
    pub fn new(kind: PlotKind) -> Self {
        let size_px = match kind {
            PlotKind::LissajousMatrix => 110,
            _ => 640,
        };
        Self { kind, size_px, positive_color: POSITIVE_COLOR.into(), negative_color: NEGATIVE_COLOR.into() }
    }

    pub fn color_for(&self, sigma: f64) -> &str {
        if sigma > 0.0 {
            &self.positive_color
        } else if sigma < 0.0 {
            &self.negative_color
        } else {
            NEUTRAL_COLOR
        }
    }
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">
<rect width="{w}" height="{h}" fill="white"/>"#
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Panel matrix with one cell per subspace `(m, n)`, `m` on rows and `n` on
/// columns. Without eigenvector components each panel shows a circle whose
/// area follows `|σ|`; with them, the projected orbit `Re(ξ e^{iθ})`.
pub fn render_lissajous(sigma: &EigencycleSet, xi: Option<&[Complex64]>, spec: &PlotSpec) -> String {
    let s = sigma.dim();
    let cell = spec.size_px as f64;
    let margin = 24.0;
    let (w, h) = (margin + cell * s as f64, margin + cell * (s - 1) as f64);
    let mut out = String::new();
    header(&mut out, w, h);
    for k in 1..=s {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="16" font-size="12" text-anchor="middle">{k}</text>"#,
            margin + cell * (k as f64 - 0.5)
        );
        if k < s {
            let _ = writeln!(
                out,
                r#"<text x="12" y="{:.1}" font-size="12" text-anchor="middle">{k}</text>"#,
                margin + cell * (k as f64 - 0.5)
            );
        }
    }
    let max_sigma = sigma.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let max_amp = xi.map(|v| v.iter().fold(0.0_f64, |m, z| m.max(z.norm()))).unwrap_or(0.0);
    let radius = 0.36 * cell;
    for (p, value) in sigma.iter() {
        let x0 = margin + cell * (p.n - 1) as f64;
        let y0 = margin + cell * (p.m - 1) as f64;
        let (cx, cy) = (x0 + cell / 2.0, y0 + cell / 2.0);
        let color = spec.color_for(value);
        let _ = writeln!(out, r#"<g class="panel" data-pair="{}" data-sigma="{value:.4}">"#, p.code());
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{cell:.1}" height="{cell:.1}" fill="none" stroke="#bbbbbb"/>"##
        );
        // screen y grows downward, so the vertical coordinate is negated
        let curve: Vec<(f64, f64)> = match xi {
            Some(v) if max_amp > 0.0 => (0..=72)
                .map(|i| {
                    let th = std::f64::consts::TAU * i as f64 / 72.0;
                    let e = Complex64::from_polar(1.0, th);
                    (cx + radius * (v[p.m - 1] * e).re / max_amp, cy - radius * (v[p.n - 1] * e).re / max_amp)
                })
                .collect(),
            _ => {
                let r = if max_sigma > 0.0 { radius * (value.abs() / max_sigma).sqrt() } else { 0.0 };
                let dir = value.signum();
                (0..=72)
                    .map(|i| {
                        let th = dir * std::f64::consts::TAU * i as f64 / 72.0;
                        (cx + r * th.cos(), cy - r * th.sin())
                    })
                    .collect()
            }
        };
        let extent = curve.iter().fold(0.0_f64, |m, (x, y)| m.max((x - cx).abs()).max((y - cy).abs()));
        if value == 0.0 || extent < 0.5 {
            let _ = writeln!(out, r#"<circle class="origin" cx="{cx:.2}" cy="{cy:.2}" r="2" fill="{color}"/>"#);
        } else {
            let pts: Vec<String> = curve.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                out,
                r#"<polyline class="orbit" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
            let (ax, ay) = curve[9];
            let (bx, by) = curve[13];
            let (dx, dy) = (bx - ax, by - ay);
            let len = (dx * dx + dy * dy).sqrt().max(1e-9);
            let (ux, uy) = (dx / len, dy / len);
            let tip = (bx, by);
            let l = (tip.0 - 7.0 * ux - 4.0 * uy, tip.1 - 7.0 * uy + 4.0 * ux);
            let r = (tip.0 - 7.0 * ux + 4.0 * uy, tip.1 - 7.0 * uy - 4.0 * ux);
            let class = if value > 0.0 { "arrow ccw" } else { "arrow cw" };
            let _ = writeln!(
                out,
                r#"<polygon class="{class}" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
                tip.0, tip.1, l.0, l.1, r.0, r.1
            );
        }
        let _ = writeln!(
            out,
            r#"<text class="sigma" x="{:.1}" y="{:.1}" font-size="10" fill="{color}">{value:.4}</text>"#,
            x0 + 4.0,
            y0 + cell - 4.0
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn new(size: f64, xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        Frame {
            x0: 60.0,
            y0: 20.0,
            w: size - 80.0,
            h: size * 0.75 - 60.0,
            xr: range(&mut xs.clone()),
            yr: range(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + self.w * (x - self.xr.0) / (self.xr.1 - self.xr.0)
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h * (1.0 - (y - self.yr.0) / (self.yr.1 - self.yr.0))
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            self.x0, self.y0, self.w, self.h
        );
        for (v, anchor_x) in [(self.xr.0, self.x0), (self.xr.1, self.x0 + self.w)] {
            let _ = writeln!(
                out,
                r#"<text x="{anchor_x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{v:.3}</text>"#,
                self.y0 + self.h + 14.0
            );
        }
        for (v, anchor_y) in [(self.yr.0, self.y0 + self.h), (self.yr.1, self.y0)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{anchor_y:.1}" font-size="10" text-anchor="end">{v:.3}</text>"#,
                self.x0 - 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            self.x0 + self.w / 2.0,
            self.y0 + self.h + 32.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
            self.y0 + self.h / 2.0,
            self.y0 + self.h / 2.0,
            escape(ylabel)
        );
    }
}

/// Scatter of `(σ, L)` per subspace with an optional fitted line
/// `y = intercept + slope·x`. Points are colored by the sign of σ.
pub fn render_regression_scatter(
    pairs: &[SubspacePair],
    x: &[f64],
    y: &[f64],
    fit: Option<(f64, f64)>,
    labels: (&str, &str),
    spec: &PlotSpec,
) -> String {
    let size = spec.size_px as f64;
    let frame = Frame::new(size, x.iter().copied(), y.iter().copied());
    let mut out = String::new();
    header(&mut out, size, size * 0.75);
    frame.axes(&mut out, labels.0, labels.1);
    if let Some((a, b)) = fit {
        let (x1, x2) = frame.xr;
        let _ = writeln!(
            out,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="4 3"/>"#,
            frame.px(x1),
            frame.py(a + b * x1),
            frame.px(x2),
            frame.py(a + b * x2)
        );
    }
    for ((p, &xv), &yv) in pairs.iter().zip(x).zip(y) {
        let _ = writeln!(
            out,
            r#"<circle class="point" data-pair="{}" cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
            p.code(),
            frame.px(xv),
            frame.py(yv),
            spec.color_for(xv)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One polyline per named series of accumulated angular momentum.
pub fn render_accumulated(times: &[f64], series: &[(String, Vec<f64>)], spec: &PlotSpec) -> String {
    let size = spec.size_px as f64;
    let frame = Frame::new(size, times.iter().copied(), series.iter().flat_map(|(_, v)| v.iter().copied()));
    let mut out = String::new();
    header(&mut out, size, size * 0.75);
    frame.axes(&mut out, "time", "accumulated L");
    for (name, values) in series {
        let last = values.last().copied().unwrap_or(0.0);
        let pts: Vec<String> =
            times.iter().zip(values).map(|(&t, &v)| format!("{:.2},{:.2}", frame.px(t), frame.py(v))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-name="{}" points="{}" fill="none" stroke="{}"/>"#,
            escape(name),
            pts.join(" "),
            spec.color_for(last)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FixtureSet;

    fn panels(doc: &roxmltree::Document) -> Vec<(String, String, Option<String>)> {
        doc.descendants()
            .filter(|n| n.attribute("class") == Some("panel"))
            .map(|g| {
                let arrow = g
                    .descendants()
                    .find(|c| c.attribute("class").is_some_and(|a| a.starts_with("arrow")))
                    .map(|a| format!("{} {}", a.attribute("class").unwrap(), a.attribute("fill").unwrap()));
                (g.attribute("data-pair").unwrap().to_string(), g.attribute("data-sigma").unwrap().to_string(), arrow)
            })
            .collect()
    }

    #[test]
    fn lissajous_panels_follow_support_and_sign() {
        let f = FixtureSet::embedded().unwrap();
        let sigma = f.eigen_table.eigencycle_column(".8i").unwrap();
        let xi = f.eigen_table.eigenvector(".8i").unwrap();
        for v in [None, Some(xi)] {
            let svg = render_lissajous(&sigma, v, &PlotSpec::new(PlotKind::LissajousMatrix));
            let doc = roxmltree::Document::parse(&svg).unwrap();
            let ps = panels(&doc);
            assert_eq!(ps.len(), 28);
            let live: Vec<&str> = ps.iter().filter(|p| p.2.is_some()).map(|p| p.0.as_str()).collect();
            let support: Vec<String> = sigma.iter().filter(|(_, s)| *s != 0.0).map(|(p, _)| p.code()).collect();
            assert_eq!(live, support);
            for (pair, text, arrow) in &ps {
                let s: f64 = text.parse().unwrap();
                let want = sigma.get(pair.as_bytes()[0] as usize - 48, pair.as_bytes()[1] as usize - 48);
                assert!((s - want).abs() < 5e-5);
                match arrow {
                    Some(a) if want > 0.0 => assert_eq!(a, &format!("arrow ccw {POSITIVE_COLOR}")),
                    Some(a) => assert_eq!(a, &format!("arrow cw {NEGATIVE_COLOR}")),
                    None => assert_eq!(want, 0.0),
                }
            }
        }
    }

    #[test]
    fn orbit_direction_matches_sign() {
        // The signed area of the drawn orbit in screen coordinates (y down)
        // is negative for counterclockwise motion.
        let f = FixtureSet::embedded().unwrap();
        let sigma = f.eigen_table.eigencycle_column(".8i").unwrap();
        let xi = f.eigen_table.eigenvector(".8i").unwrap();
        let svg = render_lissajous(&sigma, Some(xi), &PlotSpec::new(PlotKind::LissajousMatrix));
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let mut checked = 0;
        for g in doc.descendants().filter(|n| n.attribute("class") == Some("panel")) {
            let Some(poly) = g.descendants().find(|c| c.attribute("class") == Some("orbit")) else { continue };
            let pts: Vec<(f64, f64)> = poly
                .attribute("points")
                .unwrap()
                .split(' ')
                .map(|p| {
                    let (a, b) = p.split_once(',').unwrap();
                    (a.parse().unwrap(), b.parse().unwrap())
                })
                .collect();
            let area: f64 = pts.windows(2).map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1).sum();
            let s: f64 = g.attribute("data-sigma").unwrap().parse().unwrap();
            assert!(area * s < 0.0, "pair {} area {area} sigma {s}", g.attribute("data-pair").unwrap());
            checked += 1;
        }
        assert_eq!(checked, 16);
        // the seven strongest panels sit in row 1 and column 5
        let mut by_size: Vec<(SubspacePair, f64)> = sigma.iter().collect();
        by_size.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        assert!(by_size[..7].iter().all(|(p, _)| p.m == 1 || p.n == 5));
        assert!(by_size[7].1.abs() < by_size[6].1.abs() / 2.0);
    }

    #[test]
    fn zero_panel_is_a_dot() {
        let set = EigencycleSet::from_values(3, vec![0.0, 0.25, -0.1]).unwrap();
        let svg = render_lissajous(&set, None, &PlotSpec::new(PlotKind::LissajousMatrix));
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let ps = panels(&doc);
        assert_eq!(ps.len(), 3);
        assert_eq!(ps[0].2, None);
        assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("origin")).count(), 1);
    }

    #[test]
    fn scatter_and_accumulated_are_valid_xml() {
        let pairs = SubspacePair::enumerate(3);
        let svg = render_regression_scatter(
            &pairs,
            &[0.1, -0.2, 0.0],
            &[0.5, -1.0, 0.1],
            Some((0.0, 5.0)),
            ("sigma", "L <O>"),
            &PlotSpec::new(PlotKind::RegressionScatter),
        );
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("point")).count(), 3);
        let acc = render_accumulated(
            &[0.0, 1.0, 2.0],
            &[("12".into(), vec![0.0, 1.0, 2.0]), ("13".into(), vec![0.0, -1.0, -1.0])],
            &PlotSpec::new(PlotKind::AccumulatedL),
        );
        let doc = roxmltree::Document::parse(&acc).unwrap();
        assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("series")).count(), 2);
    }
}
