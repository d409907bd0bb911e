//! Minimal static line charts.

use std::fmt::Write;

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 50.0;
const LEGEND_W: f64 = 130.0;
const COLORS: [&str; 9] =
    ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666", "#1f78b4"];

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// Side-by-side panels sharing the y axis, one legend entry per series.
pub fn render_panels(panels: &[(String, Vec<Series>)], x_label: &str, y_label: &str, reference: Option<f64>) -> String {
    let all = || panels.iter().flat_map(|(_, s)| s.iter().flat_map(|s| s.points.iter().copied()));
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().map(|p| p.1).chain(reference));
    let width = MARGIN + panels.len() as f64 * (PANEL_W + MARGIN) + LEGEND_W;
    let height = PANEL_H + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, (title, series)) in panels.iter().enumerate() {
        let left = MARGIN + k as f64 * (PANEL_W + MARGIN);
        let top = MARGIN;
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * PANEL_W;
        let sy = |y: f64| top + PANEL_H - (y - y0) / (y1 - y0) * PANEL_H;
        let _ = writeln!(out, r#"<rect x="{left}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{title}</text>"#, left + PANEL_W / 2.0, top - 8.0);
        for i in 0..=4 {
            let yv = y0 + (y1 - y0) * i as f64 / 4.0;
            let xv = x0 + (x1 - x0) * i as f64 / 4.0;
            let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{yv:.3}</text>"#, left - 4.0, sy(yv) + 4.0);
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">{xv:.2}</text>"#,
                sx(xv),
                top + PANEL_H + 14.0
            );
        }
        if let Some(r) = reference {
            let _ = writeln!(
                out,
                r##"<line x1="{left}" x2="{}" y1="{y}" y2="{y}" stroke="#999" stroke-dasharray="4 3"/>"##,
                left + PANEL_W,
                y = sy(r)
            );
        }
        for (j, s) in series.iter().enumerate() {
            let color = COLORS[j % COLORS.len()];
            let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            if path.len() > 1 {
                let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
            }
            for &(x, y) in &s.points {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
            left + PANEL_W / 2.0,
            top + PANEL_H + 32.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        MARGIN + PANEL_H / 2.0,
        MARGIN + PANEL_H / 2.0
    );
    if let Some((_, series)) = panels.first() {
        let lx = width - LEGEND_W + 10.0;
        for (j, s) in series.iter().enumerate() {
            let y = MARGIN + 14.0 * j as f64;
            let color = COLORS[j % COLORS.len()];
            let _ = writeln!(out, r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
            let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, lx + 14.0, s.name);
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_circle_per_point() {
        let s = vec![Series { name: "a".into(), points: vec![(0.1, 1.0), (0.3, 2.0)] }];
        let text = render_panels(&[("n = 10".into(), s)], "rho", "rmse", None);
        assert!(text.starts_with("<svg"));
        assert_eq!(text.matches("<circle").count(), 2);
        assert_eq!(text.matches("<polyline").count(), 1);
    }
}
