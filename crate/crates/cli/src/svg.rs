//! Minimal SVG rendering of traced curves, poles, critical points and tips.

use std::fmt::Write;

use sle0::Complex64;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Default)]
pub struct Scene {
    pub curves: Vec<Vec<Complex64>>,
    pub overlays: Vec<Vec<Complex64>>,
    pub criticals: Vec<f64>,
    pub poles: Vec<Complex64>,
}

impl Scene {
    /// Fixed view box: bounding box of the curves (and critical points)
    /// padded by 10%. The imaginary axis points up.
    pub fn render(&self) -> String {
        let mut xs: Vec<f64> = self.criticals.clone();
        let mut ys: Vec<f64> = vec![0.0];
        for p in self.curves.iter().chain(&self.overlays).flatten() {
            xs.push(p.re);
            ys.push(p.im);
        }
        let (x0, x1) = bounds(&xs);
        let (y0, y1) = bounds(&ys);
        let (w, h) = ((x1 - x0).max(1e-9), (y1 - y0).max(1e-9));
        let (px, py) = (0.1 * w, 0.1 * h);
        let (vx, vy, vw, vh) = (x0 - px, -(y1 + py), w + 2.0 * px, h + 2.0 * py);
        let size = 0.004 * vw.max(vh);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vx:.6} {vy:.6} {vw:.6} {vh:.6}" width="800" height="{:.0}">"##,
            800.0 * vh / vw
        );
        let _ = writeln!(
            s,
            r##"<line x1="{vx:.6}" y1="0" x2="{:.6}" y2="0" stroke="#888" stroke-width="{:.6}"/>"##,
            vx + vw,
            size / 2.0
        );
        for (i, c) in self.curves.iter().enumerate() {
            polyline(&mut s, c, PALETTE[i % PALETTE.len()], size, None);
        }
        for c in &self.overlays {
            polyline(&mut s, c, "#000", 1.5 * size, Some(4.0 * size));
        }
        for &x in &self.criticals {
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.6}" cy="0" r="{:.6}" fill="#000"/>"##,
                2.0 * size
            );
        }
        for z in &self.poles {
            let (cx, cy, r) = (z.re, -z.im, 2.5 * size);
            let _ = writeln!(
                s,
                r##"<path d="M{:.6} {:.6}L{:.6} {:.6}M{:.6} {:.6}L{:.6} {:.6}" stroke="#e377c2" stroke-width="{:.6}"/>"##,
                cx - r,
                cy - r,
                cx + r,
                cy + r,
                cx - r,
                cy + r,
                cx + r,
                cy - r,
                size
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| {
            (a.min(t), b.max(t))
        })
}

fn polyline(s: &mut String, pts: &[Complex64], color: &str, width: f64, dash: Option<f64>) {
    if pts.len() < 2 {
        return;
    }
    let mut d = String::new();
    for p in pts {
        let _ = write!(d, "{:.6},{:.6} ", p.re, -p.im);
    }
    let dash = dash
        .map(|l| format!(r#" stroke-dasharray="{l:.6}""#))
        .unwrap_or_default();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width:.6}"{dash}/>"##,
        d.trim_end()
    );
}
