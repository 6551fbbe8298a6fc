//! Minimal SVG scatter plot: predicted score on X, rater score on Y.

use std::fmt::Write as _;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Renders (predicted, truth) pairs on fixed 0..100 axes with a y = x guide.
/// One `<circle>` per pair.
pub fn scatter_svg(pairs: &[(f64, f64)], title: &str) -> String {
    let plot = SIZE - 2.0 * MARGIN;
    let to_x = |v: f64| MARGIN + v.clamp(0.0, 100.0) / 100.0 * plot;
    let to_y = |v: f64| SIZE - MARGIN - v.clamp(0.0, 100.0) / 100.0 * plot;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    // axes
    let (x0, y0, x1, y1) = (to_x(0.0), to_y(0.0), to_x(100.0), to_y(100.0));
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="gray" stroke-dasharray="4 4"/>"#
    );
    for tick in (0..=100).step_by(20) {
        let t = tick as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{tick}</text>"#,
            to_x(t),
            y0 + 14.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{tick}</text>"#,
            x0 - 6.0,
            to_y(t) + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">Predicted score</text>"#,
        SIZE / 2.0,
        SIZE - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">Rater score</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    for &(p, t) in pairs {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue" fill-opacity="0.7"/>"#,
            to_x(p),
            to_y(t)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
