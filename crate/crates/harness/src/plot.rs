//! Static SVG figures: outcome bars, score histograms, top-down flight paths.

use std::fmt::Write;

use airgrasp_core::mission::{Episode, Outcome};
use airgrasp_core::scene::Scene;

use crate::suite::{outcome_fractions, ResultRow};

const PALETTE: [&str; 6] = ["#2b8a3e", "#c92a2a", "#e67700", "#5f3dc4", "#868e96", "#1971c2"];

struct Svg {
    w: f64,
    h: f64,
    body: String,
}

impl Svg {
    fn new(w: f64, h: f64) -> Self {
        Self { w, h, body: String::new() }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
            p.join(" ")
        );
    }

    fn polygon(&mut self, pts: &[(f64, f64)], fill: &str) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r##"<polygon points="{}" fill="{fill}" fill-opacity="0.5" stroke="#343a40" stroke-width="0.5"/>"##,
            p.join(" ")
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}"/>"#);
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.w,
            h = self.h
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn cells(rows: &[ResultRow]) -> Vec<String> {
    let mut c: Vec<String> = rows.iter().map(|r| r.cell.clone()).collect();
    c.dedup();
    c
}

/// Stacked outcome fractions, one bar per cell.
pub fn outcome_chart(rows: &[ResultRow]) -> String {
    let cells = cells(rows);
    let bar = 60.0;
    let gap = 40.0;
    let (left, top, plot_h) = (60.0, 30.0, 300.0);
    let w = left + cells.len() as f64 * (bar + gap) + 180.0;
    let mut svg = Svg::new(w, top + plot_h + 120.0);
    svg.text(w / 2.0, 20.0, 14.0, "middle", "Outcome fractions per cell");
    for k in 0..=4 {
        let y = top + plot_h * (1.0 - k as f64 / 4.0);
        svg.line(left - 5.0, y, left + cells.len() as f64 * (bar + gap), y, "#dee2e6");
        svg.text(left - 8.0, y + 4.0, 10.0, "end", &format!("{}%", k * 25));
    }
    for (i, cell) in cells.iter().enumerate() {
        let x = left + gap / 2.0 + i as f64 * (bar + gap);
        let mut y = top + plot_h;
        for (j, (_, f)) in outcome_fractions(rows, cell).iter().enumerate() {
            let h = f * plot_h;
            y -= h;
            svg.rect(x, y, bar, h, PALETTE[j]);
        }
        let _ = writeln!(
            svg.body,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" font-family="sans-serif" transform="rotate(30 {:.2} {:.2})">{}</text>"#,
            x,
            top + plot_h + 14.0,
            x,
            top + plot_h + 14.0,
            escape(cell)
        );
    }
    let lx = left + cells.len() as f64 * (bar + gap) + 10.0;
    for (j, o) in Outcome::ALL.iter().enumerate() {
        let y = top + 10.0 + j as f64 * 18.0;
        svg.rect(lx, y - 9.0, 12.0, 12.0, PALETTE[j]);
        svg.text(lx + 18.0, y + 1.0, 11.0, "start", o.as_str());
    }
    svg.finish()
}

/// Histogram of executed grasp scores over `[0, 1]`, one series per cell.
pub fn score_histogram(rows: &[ResultRow], bins: usize) -> String {
    let cells = cells(rows);
    let bins = bins.max(1);
    let counts: Vec<Vec<usize>> = cells
        .iter()
        .map(|c| {
            let mut h = vec![0; bins];
            for r in rows.iter().filter(|r| &r.cell == c) {
                if let Some(s) = r.score.as_ref().and_then(|s| s.parse::<f64>().ok()) {
                    h[((s * bins as f64) as usize).min(bins - 1)] += 1;
                }
            }
            h
        })
        .collect();
    let max = counts.iter().flatten().copied().max().unwrap_or(0).max(1);
    let (left, top, plot_w, plot_h) = (50.0, 30.0, 480.0, 260.0);
    let mut svg = Svg::new(left + plot_w + 200.0, top + plot_h + 50.0);
    svg.text((left + plot_w) / 2.0, 20.0, 14.0, "middle", "Executed grasp score");
    let bw = plot_w / bins as f64;
    let sw = bw / cells.len().max(1) as f64;
    for (ci, h) in counts.iter().enumerate() {
        for (b, &n) in h.iter().enumerate() {
            let hh = plot_h * n as f64 / max as f64;
            svg.rect(
                left + b as f64 * bw + ci as f64 * sw,
                top + plot_h - hh,
                sw * 0.9,
                hh,
                PALETTE[ci % PALETTE.len()],
            );
        }
        let y = top + 10.0 + ci as f64 * 18.0;
        svg.rect(left + plot_w + 10.0, y - 9.0, 12.0, 12.0, PALETTE[ci % PALETTE.len()]);
        svg.text(left + plot_w + 28.0, y + 1.0, 11.0, "start", &cells[ci]);
    }
    svg.line(left, top + plot_h, left + plot_w, top + plot_h, "#343a40");
    for k in 0..=4 {
        let x = left + plot_w * k as f64 / 4.0;
        svg.text(x, top + plot_h + 16.0, 10.0, "middle", &format!("{:.2}", k as f64 / 4.0));
    }
    svg.text(left - 6.0, top + 8.0, 10.0, "end", &max.to_string());
    svg.finish()
}

/// Top-down view of the flight path over object footprints.
pub fn trajectory_view(episode: &Episode, scene: Option<&Scene>) -> String {
    let path: Vec<(f64, f64)> = episode.trace.iter().map(|r| (r.position[0], r.position[1])).collect();
    let mut polys: Vec<(Vec<(f64, f64)>, &str)> = Vec::new();
    if let Some(s) = scene {
        for o in s.objects.iter().filter(|o| o.label != "floor") {
            let fill = if o.is_target {
                "#c92a2a"
            } else if o.is_context {
                "#ced4da"
            } else {
                "#74c0fc"
            };
            for h in &o.hulls {
                polys.push((footprint(h.vertices()), fill));
            }
        }
    }
    let all = path.iter().chain(polys.iter().flat_map(|(p, _)| p.iter()));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = 0.2;
    let size = 500.0;
    let span = (x1 - x0).max(y1 - y0) + 2.0 * pad;
    let map = |(x, y): (f64, f64)| ((x - x0 + pad) / span * size + 20.0, (y1 + pad - y) / span * size + 40.0);
    let mut svg = Svg::new(size + 40.0, size + 60.0);
    svg.text(size / 2.0 + 20.0, 22.0, 14.0, "middle", &format!("Top-down path ({})", episode.result.outcome.as_str()));
    for (p, fill) in &polys {
        let pts: Vec<_> = p.iter().map(|q| map(*q)).collect();
        svg.polygon(&pts, fill);
    }
    let pts: Vec<_> = path.iter().map(|q| map(*q)).collect();
    svg.polyline(&pts, "#1971c2");
    if let Some(&first) = pts.first() {
        svg.circle(first.0, first.1, 4.0, "#2b8a3e");
    }
    if let Some(&last) = pts.last() {
        svg.circle(last.0, last.1, 4.0, "#e67700");
    }
    svg.finish()
}

/// Convex hull of the vertices projected on the ground plane.
fn footprint(vertices: &[nalgebra::Vector3<f64>]) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = vertices.iter().map(|v| (v.x, v.y)).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    if p.len() < 3 {
        return p;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}
