//! Hand-emitted SVG log-log charts (no plotting dependency; charts are a
//! convenience artifact, never part of acceptance).

use std::fmt::Write;

pub struct Series {
    pub label: String,
    /// (x, y) pairs with positive coordinates; zero/negative values are
    /// dropped from the log-log plot.
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const COLORS: &[&str] = &["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// Render a log-log chart of the series to an SVG 1.1 document.
pub fn log_log_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let (x0, x1, y0, y1) = if finite.is_empty() {
        (-1.0, 1.0, -1.0, 1.0)
    } else {
        let xs: Vec<f64> = finite.iter().map(|p| p.0.log10()).collect();
        let ys: Vec<f64> = finite.iter().map(|p| p.1.log10()).collect();
        let pad = 0.25;
        (
            xs.iter().cloned().fold(f64::MAX, f64::min) - pad,
            xs.iter().cloned().fold(f64::MIN, f64::max) + pad,
            ys.iter().cloned().fold(f64::MAX, f64::min) - pad,
            ys.iter().cloned().fold(f64::MIN, f64::max) + pad,
        )
    };
    let to_px = |lx: f64, ly: f64| -> (f64, f64) {
        let px = MARGIN_L + (lx - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = HEIGHT - MARGIN_B - (ly - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);
        (px, py)
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // Axes box.
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );
    // Decade ticks and gridlines.
    for decade in (x0.ceil() as i64)..=(x1.floor() as i64) {
        let (px, _) = to_px(decade as f64, y0);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{MARGIN_T}" x2="{px:.2}" y2="{}" stroke="#dddddd"/>"##,
            HEIGHT - MARGIN_B
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">1e{decade}</text>"#,
            HEIGHT - MARGIN_B + 18.0
        );
    }
    for decade in (y0.ceil() as i64)..=(y1.floor() as i64) {
        let (_, py) = to_px(x0, decade as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_L}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#dddddd"/>"##,
            WIDTH - MARGIN_R
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">1e{decade}</text>"#,
            MARGIN_L - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
            .map(|&(x, y)| {
                let (px, py) = to_px(x.log10(), y.log10());
                format!("{px:.2},{py:.2}")
            })
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN_R - 90.0,
            MARGIN_T + 16.0 + 14.0 * i as f64,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
