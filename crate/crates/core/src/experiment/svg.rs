//! Minimal hand-written SVG plots.

use std::fmt::Write;

use crate::geometry::ObstacleSet;
use crate::metrics::Stat;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// (label, color, points) of one frontier line.
pub type Series<'a> = (&'a str, &'a str, Vec<(f64, Stat)>);

/// NEPE frontier: one line per schedule with a ±SE band.
pub fn frontier(title: &str, series: &[Series]) -> String {
    let ymax = series
        .iter()
        .flat_map(|(_, _, pts)| pts.iter().map(|(_, s)| s.mean + s.se))
        .fold(1.05_f64, f64::max);
    let ymin = series
        .iter()
        .flat_map(|(_, _, pts)| pts.iter().map(|(_, s)| s.mean - s.se))
        .fold(0.0_f64, f64::min);
    let sx = |x: f64| PAD + x * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - ymin) / (ymax - ymin) * (H - 2.0 * PAD);
    let mut out = String::new();
    header(&mut out, W, H);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(
        out,
        r#"<path d="M{:.1},{:.1} L{:.1},{:.1} L{:.1},{:.1}" fill="none" stroke="black"/>"#,
        sx(0.0),
        sy(ymax),
        sx(0.0),
        sy(ymin),
        sx(1.0),
        sy(ymin)
    );
    for i in 0..=5 {
        let x = i as f64 / 5.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.1}</text>"#, sx(x), H - PAD + 16.0);
        let y = ymin + (ymax - ymin) * i as f64 / 5.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, PAD - 6.0, sy(y) + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">budget fraction B/T</text>"#, W / 2.0, H - 14.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">NEPE</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (i, (name, color, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let band: Vec<String> = pts
            .iter()
            .map(|(x, s)| format!("{:.1},{:.1}", sx(*x), sy(s.mean + s.se)))
            .chain(pts.iter().rev().map(|(x, s)| format!("{:.1},{:.1}", sx(*x), sy(s.mean - s.se))))
            .collect();
        let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> = pts.iter().map(|(x, s)| format!("{:.1},{:.1}", sx(*x), sy(s.mean))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        for (x, s) in pts {
            let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#, sx(*x), sy(s.mean));
        }
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - PAD - 90.0,
            W - PAD - 70.0,
            W - PAD - 64.0,
            ly + 4.0,
            esc(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub struct ScenePath<'a> {
    pub label: String,
    pub color: &'a str,
    pub dashed: bool,
    pub waypoints: Vec<[f64; 2]>,
}

pub struct Rug<'a> {
    pub label: String,
    pub color: &'a str,
    pub events: Vec<usize>,
}

/// Planar scene with obstacles and paths, plus a timeline of projection
/// events per schedule underneath.
pub fn scene(title: &str, obstacles: &ObstacleSet, paths: &[ScenePath], rugs: &[Rug], horizon: usize) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut grow = |p: [f64; 2], r: f64| {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k] - r);
            hi[k] = hi[k].max(p[k] + r);
        }
    };
    for c in &obstacles.circles {
        grow(c.center, c.radius);
    }
    for p in paths {
        for &w in &p.waypoints {
            grow(w, 0.0);
        }
    }
    let margin = 0.3;
    let (x0, x1, y0, y1) = (lo[0] - margin, hi[0] + margin, lo[1] - margin, hi[1] + margin);
    let plot_w = W - 2.0 * PAD;
    let scale = (plot_w / (x1 - x0)).min(260.0 / (y1 - y0));
    let plot_h = (y1 - y0) * scale;
    let rug_top = PAD + plot_h + 30.0;
    let rug_h = 18.0;
    let total_h = rug_top + rug_h * rugs.len() as f64 + 40.0;
    let sx = |x: f64| PAD + (x - x0) * scale;
    let sy = |y: f64| PAD + (y1 - y) * scale;

    let mut out = String::new();
    header(&mut out, W, total_h);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
    for c in &obstacles.circles {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#bbbbbb" stroke="#555555"/>"##,
            sx(c.center[0]),
            sy(c.center[1]),
            c.radius * scale
        );
    }
    for (i, p) in paths.iter().enumerate() {
        let pts: Vec<String> = p.waypoints.iter().map(|w| format!("{:.2},{:.2}", sx(w[0]), sy(w[1]))).collect();
        let dash = if p.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"{dash}/>"#,
            pts.join(" "),
            p.color
        );
        let ly = PAD + plot_h + 14.0;
        let lx = PAD + 150.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 18.0,
            p.color,
            lx + 22.0,
            ly + 4.0,
            esc(&p.label)
        );
    }
    let tx = |t: usize| PAD + 70.0 + (t as f64 + 0.5) / horizon.max(1) as f64 * (plot_w - 70.0);
    for (i, r) in rugs.iter().enumerate() {
        let y = rug_top + rug_h * i as f64;
        let _ = writeln!(out, r#"<text x="{PAD}" y="{:.1}">{}</text>"#, y + 12.0, esc(&r.label));
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#dddddd"/>"##,
            tx(0),
            y + 14.0,
            tx(horizon.saturating_sub(1)),
            y + 14.0
        );
        for &e in &r.events {
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.1}" x2="{:.2}" y2="{:.1}" stroke="{}"/>"#,
                tx(e),
                y + 2.0,
                tx(e),
                y + 14.0,
                r.color
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{:.1}" text-anchor="middle">sampler step (0..{horizon})</text>"#,
        W / 2.0,
        total_h - 12.0
    );
    out.push_str("</svg>\n");
    out
}
