//! Minimal static SVG 1.1 line charts.

use std::fmt::Write;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A chart with linear axes over the finite points of every series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, pad) = (640.0, 400.0, 56.0);
    let finite = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(fx), h - pad + 16.0, tick(fx));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, pad - 4.0, sy(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, esc(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        esc(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        // break the polyline at non-finite points
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &ser.points {
            if x.is_finite() && y.is_finite() {
                let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                pen_down = true;
            } else {
                pen_down = false;
            }
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        let ly = pad + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            w - pad,
            esc(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let s = line_chart("a<b", "x", "y", &[Series { label: "f", points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)] }]);
        assert!(s.starts_with("<?xml") && s.ends_with("</svg>\n"));
        assert!(s.contains("a&lt;b"));
        assert_eq!(s.matches("<path").count(), 2);
        // the NaN splits the line into two moves
        assert_eq!(s.matches("M").count() - s.matches("MWSNAP").count(), 3);
    }
}
