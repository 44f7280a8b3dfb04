//! Minimal SVG plots built from rects, polylines, circles and text.

use std::fmt::Write;

use cna_core::analysis::{GapReport, Landscape};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
pub const UNDEFINED_FILL: &str = "#9e9e9e";
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map from data coordinates onto the plot area.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    pub fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x;
        LEFT + if hi > lo { (x - lo) / (hi - lo) } else { 0.5 } * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y;
        HEIGHT - BOTTOM - if hi > lo { (y - lo) / (hi - lo) } else { 0.5 } * (HEIGHT - TOP - BOTTOM)
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    s
}

fn axes(s: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    writeln!(s, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1).unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.x.0 + t * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + t * (frame.y.1 - frame.y.0);
        let (px, py) = (frame.px(xv), frame.py(yv));
        writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{xv:.3}</text>"#, y0 + 16.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#, x0 - 6.0, py + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 18.0, escape(x_label)).unwrap();
    writeln!(
        s,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    )
    .unwrap();
}

/// Blue (-1) through white (0) to red (+1).
pub fn diverging(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let a = -t;
        (255.0 * (1.0 - a) + 33.0 * a, 255.0 * (1.0 - a) + 102.0 * a, 255.0 * (1.0 - a) + 172.0 * a)
    } else {
        (255.0 * (1.0 - t) + 178.0 * t, 255.0 * (1.0 - t) + 24.0 * t, 255.0 * (1.0 - t) + 43.0 * t)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn legend_entry(s: &mut String, i: usize, color: &str, label: &str, class: &str) {
    let y = TOP + 10.0 + 20.0 * i as f64;
    let x = WIDTH - RIGHT + 14.0;
    writeln!(s, r#"<rect class="{class}" x="{x}" y="{}" width="12" height="12" fill="{color}" stroke="black" stroke-width="0.5"/>"#, y - 10.0).unwrap();
    writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 18.0, escape(label)).unwrap();
}

/// CNA over the PCA plane with the projected training path on top.
///
/// The path's first and last points carry their data coordinates in
/// `data-x` / `data-y` attributes.
pub fn landscape(land: &Landscape, path: &[[f64; 2]], title: &str) -> String {
    let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 1.0 };
    let (dx, dy) = (step(&land.xs), step(&land.ys));
    let frame = Frame {
        x: (land.xs[0] - dx / 2.0, land.xs[land.xs.len() - 1] + dx / 2.0),
        y: (land.ys[0] - dy / 2.0, land.ys[land.ys.len() - 1] + dy / 2.0),
    };
    let mut s = open(title);
    let cw = frame.px(dx) - frame.px(0.0);
    let ch = frame.py(0.0) - frame.py(dy);
    for (j, &y) in land.ys.iter().enumerate() {
        for (i, &x) in land.xs.iter().enumerate() {
            let (class, fill) = match land.get(i, j) {
                Some(v) => ("cell", diverging(v)),
                None => ("undefined", UNDEFINED_FILL.to_string()),
            };
            writeln!(
                s,
                r#"<rect class="{class}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
                frame.px(x - dx / 2.0),
                frame.py(y + dy / 2.0),
                cw,
                ch
            )
            .unwrap();
        }
    }
    let points: Vec<String> = path.iter().map(|p| format!("{:.3},{:.3}", frame.px(p[0]), frame.py(p[1]))).collect();
    writeln!(s, r#"<polyline id="path" points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#, points.join(" ")).unwrap();
    if let (Some(first), Some(last)) = (path.first(), path.last()) {
        for (id, p, fill) in [("path-start", first, "white"), ("path-end", last, "black")] {
            writeln!(
                s,
                r#"<circle id="{id}" cx="{:.3}" cy="{:.3}" r="4" fill="{fill}" stroke="black" data-x="{}" data-y="{}"/>"#,
                frame.px(p[0]),
                frame.py(p[1]),
                p[0],
                p[1]
            )
            .unwrap();
        }
    }
    axes(&mut s, &frame, "PC1", "PC2");
    for (i, (v, label)) in [(1.0, "CNA +1"), (0.0, "CNA 0"), (-1.0, "CNA -1")].iter().enumerate() {
        legend_entry(&mut s, i, &diverging(*v), label, "legend");
    }
    legend_entry(&mut s, 3, UNDEFINED_FILL, "undefined", "legend");
    s.push_str("</svg>\n");
    s
}

/// One bar cluster per metric, one bar per group. Undefined cells get a
/// text marker instead of a bar.
pub fn correlation_bars(report: &GapReport, metrics: &[&str], title: &str) -> String {
    let mut groups: Vec<&str> = Vec::new();
    for c in &report.cells {
        if !groups.contains(&c.group.as_str()) {
            groups.push(&c.group);
        }
    }
    let frame = Frame { x: (0.0, metrics.len() as f64), y: (-1.0, 1.0) };
    let mut s = open(title);
    let zero = frame.py(0.0);
    writeln!(s, r#"<line x1="{LEFT}" y1="{zero:.3}" x2="{}" y2="{zero:.3}" stroke="black"/>"#, WIDTH - RIGHT).unwrap();
    let slot = (frame.px(1.0) - frame.px(0.0)) * 0.8 / groups.len().max(1) as f64;
    for (m, metric) in metrics.iter().enumerate() {
        let x0 = frame.px(m as f64) + (frame.px(1.0) - frame.px(0.0)) * 0.1;
        for (g, group) in groups.iter().enumerate() {
            let Some(cell) = report.get(metric, group) else { continue };
            let x = x0 + g as f64 * slot;
            match cell.rho {
                Some(rho) => {
                    let y = frame.py(rho);
                    writeln!(
                        s,
                        r#"<rect class="bar" data-metric="{}" data-group="{}" data-rho="{rho}" x="{x:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                        escape(metric),
                        escape(group),
                        y.min(zero),
                        slot * 0.9,
                        (y - zero).abs(),
                        PALETTE[g % PALETTE.len()]
                    )
                    .unwrap();
                }
                None => {
                    writeln!(
                        s,
                        r#"<text class="undefined" data-metric="{}" data-group="{}" transform="translate({:.3} {:.3}) rotate(-90)" font-size="10">undefined</text>"#,
                        escape(metric),
                        escape(group),
                        x + slot * 0.6,
                        zero - 4.0
                    )
                    .unwrap();
                }
            }
        }
        writeln!(
            s,
            r#"<text x="{:.3}" y="{}" text-anchor="middle">{}</text>"#,
            frame.px(m as f64 + 0.5),
            HEIGHT - BOTTOM + 16.0,
            escape(metric)
        )
        .unwrap();
    }
    for i in 0..=4 {
        let v = -1.0 + 0.5 * i as f64;
        writeln!(s, r#"<text x="{}" y="{:.3}" text-anchor="end">{v:.1}</text>"#, LEFT - 6.0, frame.py(v) + 4.0).unwrap();
    }
    writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    )
    .unwrap();
    writeln!(
        s,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">Pearson correlation with generalization gap</text>"#,
        (HEIGHT - BOTTOM + TOP) / 2.0
    )
    .unwrap();
    for (g, group) in groups.iter().enumerate() {
        legend_entry(&mut s, g, PALETTE[g % PALETTE.len()], group, "legend");
    }
    s.push_str("</svg>\n");
    s
}

/// Points `(x, y)` coloured by series.
pub fn scatter(points: &[(f64, f64, String)], title: &str, x_label: &str, y_label: &str) -> String {
    let range = |f: &dyn Fn(&(f64, f64, String)) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else {
            let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
            (lo - pad, hi + pad)
        }
    };
    let frame = Frame { x: range(&|p| p.0), y: range(&|p| p.1) };
    let mut series: Vec<&str> = points.iter().map(|p| p.2.as_str()).collect();
    series.sort_unstable();
    series.dedup();
    let mut s = open(title);
    for (x, y, label) in points {
        let k = series.iter().position(|l| l == label).unwrap();
        writeln!(
            s,
            r#"<circle class="point" cx="{:.3}" cy="{:.3}" r="3.5" fill="{}" fill-opacity="0.8" data-x="{x}" data-y="{y}"/>"#,
            frame.px(*x),
            frame.py(*y),
            PALETTE[k % PALETTE.len()]
        )
        .unwrap();
    }
    axes(&mut s, &frame, x_label, y_label);
    for (k, label) in series.iter().enumerate() {
        legend_entry(&mut s, k, PALETTE[k % PALETTE.len()], label, "legend");
    }
    s.push_str("</svg>\n");
    s
}
