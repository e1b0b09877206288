//! Static SVG histograms of claim scores.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub values: &'a [f64],
}

/// Bin counts over `[lo, hi]`; values outside the range are clamped into
/// the edge bins.
pub fn bin_counts(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<usize> {
    let mut counts = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let b = ((v - lo) / width).floor();
        let b = if b.is_nan() { 0 } else { (b.max(0.0) as usize).min(bins - 1) };
        counts[b] += 1;
    }
    counts
}

/// Overlaid per-series histograms, each normalized to its own total so
/// groups of different sizes are comparable.
pub fn histogram(title: &str, x_label: &str, series: &[Series<'_>], bins: usize, lo: f64, hi: f64) -> String {
    let shares: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let n = s.values.len().max(1) as f64;
            bin_counts(s.values, bins, lo, hi).into_iter().map(|c| c as f64 / n).collect()
        })
        .collect();
    let top = shares.iter().flatten().cloned().fold(0.0, f64::max).max(1e-12);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar_w = plot_w / bins as f64;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    for (s, share) in series.iter().zip(&shares) {
        let _ = writeln!(out, r#"<g fill="{}" fill-opacity="0.5">"#, s.color);
        for (b, &v) in share.iter().enumerate() {
            let h = v / top * plot_h;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                MARGIN + b as f64 * bar_w,
                HEIGHT - MARGIN - h,
                bar_w,
                h
            );
        }
        let _ = writeln!(out, "</g>");
    }
    let base = HEIGHT - MARGIN;
    let _ = writeln!(out, r#"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#, WIDTH - MARGIN);
    let _ = writeln!(out, r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{base}" stroke="black"/>"#);
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let x = MARGIN + frac * plot_w;
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{:.2}</text>"#,
            base + 16.0,
            lo + frac * (hi - lo)
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">share of claims</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let x = WIDTH - MARGIN - 150.0;
        let _ = writeln!(out, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}" fill-opacity="0.5"/>"#, y - 9.0, s.color);
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{} (n={})</text>"#, x + 16.0, escape(s.name), s.values.len());
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_cover_closed_range() {
        assert_eq!(bin_counts(&[0.0, 0.05, 0.5, 1.0, 1.7, -0.2], 10, 0.0, 1.0), [3, 0, 0, 0, 0, 1, 0, 0, 0, 2]);
    }

    #[test]
    fn histogram_is_well_formed() {
        let svg = histogram(
            "a < b",
            "score",
            &[
                Series { name: "independent", color: "#1f77b4", values: &[0.9, 1.0, 1.0] },
                Series { name: "dependent", color: "#ff7f0e", values: &[0.2, 0.4] },
            ],
            20,
            0.0,
            1.0,
        );
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("independent (n=3)"));
        assert_eq!(svg.matches("<g ").count(), 2);
    }
}
