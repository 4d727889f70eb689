//! CSV and SVG output for regions.

use std::fmt::Write as _;

use super::Polygon;
use crate::adcg::{RegionPolyhedron, RowOrigin};

/// One row per facet: `origin,h_1..h_d,rhs` for `H·Δw ≥ h`.
pub fn facets_csv(region: &RegionPolyhedron, dw_names: &[String]) -> String {
    let mut s = String::from("origin");
    for n in dw_names {
        let _ = write!(s, ",{}", csv_field(n));
    }
    s.push_str(",rhs\n");
    for ((row, h), o) in region.h_mat.iter().zip(&region.h).zip(&region.origin) {
        let origin = match o {
            RowOrigin::InitialBox => "box".to_string(),
            RowOrigin::Cut(i) => format!("cut{i}"),
            RowOrigin::Derived => "derived".into(),
        };
        s.push_str(&origin);
        for v in row {
            let _ = write!(s, ",{v:e}");
        }
        let _ = writeln!(s, ",{h:e}");
    }
    s
}

pub fn vertices_csv(poly: &Polygon) -> String {
    let mut s = String::from("index,dw1,dw2\n");
    for (i, v) in poly.vertices.iter().enumerate() {
        let _ = writeln!(s, "{i},{:e},{:e}", v[0], v[1]);
    }
    s
}

/// `dw…,label,residual` rows.
pub fn points_csv(points: &[Vec<f64>], labels: &[&str], residual: &[f64]) -> String {
    let d = points.first().map_or(0, Vec::len);
    let mut s = String::new();
    for j in 0..d {
        let _ = write!(s, "dw{},", j + 1);
    }
    s.push_str("label,residual\n");
    for ((p, l), r) in points.iter().zip(labels).zip(residual) {
        for v in p {
            let _ = write!(s, "{v:e},");
        }
        let _ = writeln!(s, "{l},{r:e}");
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub struct SvgLayer<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub polygon: &'a Polygon,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Overlays polygons (per-unit coordinates, drawn in MW via `base_mva`) and
/// optional colored points. Output carries no timestamps.
pub fn svg_overlay(layers: &[SvgLayer], points: &[([f64; 2], &str)], axes: [&str; 2], base_mva: f64) -> String {
    let (w, h, pad) = (640.0, 520.0, 60.0);
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for l in layers {
        for v in &l.polygon.vertices {
            xs.push(v[0] * base_mva);
            ys.push(v[1] * base_mva);
        }
    }
    for (p, _) in points {
        xs.push(p[0] * base_mva);
        ys.push(p[1] * base_mva);
    }
    let range = |v: &[f64]| -> (f64, f64) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            let m = 0.05 * (hi - lo);
            (lo - m, hi + m)
        } else {
            (-1.0, 1.0)
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{xv:.3}</text>"#, px(xv), h - pad + 16.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{yv:.3}</text>"#, pad - 6.0, py(yv) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{} (MW)</text>"#, w / 2.0, h - 18.0, escape(axes[0]));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{} (MW)</text>"#,
        h / 2.0,
        h / 2.0,
        escape(axes[1])
    );
    for (p, color) in points {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{color}"/>"#, px(p[0] * base_mva), py(p[1] * base_mva));
    }
    for (i, l) in layers.iter().enumerate() {
        if !l.polygon.vertices.is_empty() {
            let pts: Vec<String> =
                l.polygon.vertices.iter().map(|v| format!("{:.2},{:.2}", px(v[0] * base_mva), py(v[1] * base_mva))).collect();
            let _ = writeln!(s, r#"<polygon points="{}" fill="none" stroke="{}" stroke-width="1.8"/>"#, pts.join(" "), l.color);
        }
        let ly = pad + 16.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="3"/>"#, w - pad - 120.0, w - pad - 100.0, l.color);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#, w - pad - 94.0, ly + 4.0, escape(l.name));
    }
    s.push_str("</svg>\n");
    s
}
