//! Minimal static SVG charts.

use std::fmt::Write as _;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 300.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 3] = ["#3b6ea5", "#d9822b", "#5a9e5a"];

fn frame(title: &str, body: &str, legend: &[&str]) -> String {
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">
<rect width="100%" height="100%" fill="white"/>
<text x="{x}" y="18" text-anchor="middle" font-size="13">{title}</text>
<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>
"#,
        x = WIDTH / 2.0,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN / 2.0,
    );
    s.push_str(body);
    for (i, name) in legend.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        writeln!(
            s,
            r#"<rect x="{x}" y="{y0}" width="10" height="10" fill="{c}" fill-opacity="0.6"/><text x="{tx}" y="{ty}">{name}</text>"#,
            x = WIDTH - 150.0,
            y0 = y - 9.0,
            c = PALETTE[i % PALETTE.len()],
            tx = WIDTH - 135.0,
            ty = y,
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// One bar per value, labeled by index.
pub fn bar_chart(title: &str, values: &[f64]) -> String {
    let max = values.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let span = WIDTH - 1.5 * MARGIN;
    let w = span / values.len().max(1) as f64;
    let h = HEIGHT - 2.0 * MARGIN;
    let mut body = String::new();
    for (i, v) in values.iter().enumerate() {
        let bh = h * v / max;
        writeln!(
            body,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{bw:.1}" height="{bh:.1}" fill="{c}"/>"#,
            x = MARGIN + i as f64 * w + 0.1 * w,
            y = HEIGHT - MARGIN - bh,
            bw = 0.8 * w,
            c = PALETTE[0],
        )
        .unwrap();
    }
    writeln!(body, r#"<text x="{x}" y="{y}">{max:.3}</text>"#, x = 2.0, y = MARGIN).unwrap();
    frame(title, &body, &[])
}

/// Overlaid histograms of several samples normalized to unit mean, so that
/// their spreads are comparable.
pub fn relative_histograms(title: &str, series: &[(&str, &[f64])], bins: usize) -> String {
    let normalized: Vec<Vec<f64>> = series
        .iter()
        .map(|(_, v)| {
            let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
            v.iter().map(|x| if mean > 0.0 { x / mean } else { 0.0 }).collect()
        })
        .collect();
    let hi = normalized.iter().flatten().cloned().fold(0.0, f64::max).max(1e-12);
    let counts: Vec<Vec<usize>> = normalized
        .iter()
        .map(|v| {
            let mut c = vec![0; bins];
            for x in v {
                c[((x / hi * bins as f64) as usize).min(bins - 1)] += 1;
            }
            c
        })
        .collect();
    let top = counts.iter().flatten().cloned().max().unwrap_or(1).max(1) as f64;
    let w = (WIDTH - 1.5 * MARGIN) / bins as f64;
    let h = HEIGHT - 2.0 * MARGIN;
    let mut body = String::new();
    for (k, c) in counts.iter().enumerate() {
        for (i, &n) in c.iter().enumerate() {
            let bh = h * n as f64 / top;
            writeln!(
                body,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{bh:.1}" fill="{col}" fill-opacity="0.6"/>"#,
                x = MARGIN + i as f64 * w,
                y = HEIGHT - MARGIN - bh,
                col = PALETTE[k % PALETTE.len()],
            )
            .unwrap();
        }
    }
    writeln!(
        body,
        r#"<text x="{x}" y="{y}" text-anchor="end">{hi:.2} x mean</text>"#,
        x = WIDTH - MARGIN / 2.0,
        y = HEIGHT - MARGIN + 14.0
    )
    .unwrap();
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    frame(title, &body, &names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_svg_documents() {
        let bars = bar_chart("t", &[1.0, 2.0, 0.5]);
        assert!(bars.starts_with("<svg") && bars.trim_end().ends_with("</svg>"));
        assert_eq!(bars.matches("<rect").count(), 4);
        let a = [1.0, 2.0, 3.0];
        let hist = relative_histograms("h", &[("a", &a), ("b", &a)], 5);
        assert!(hist.contains("a</text>") && hist.contains("b</text>"));
    }
}
