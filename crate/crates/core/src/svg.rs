//! Minimal SVG line and bar charts for the experiment outputs.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str, y: (f64, f64)) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>
<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>
<text x="{}" y="{}" text-anchor="end">{:.3}</text>
<text x="{}" y="{}" text-anchor="end">{:.3}</text>
"#,
        W / 2.0,
        escape(title),
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD,
        W / 2.0,
        H - 12.0,
        escape(xlabel),
        H / 2.0,
        H / 2.0,
        escape(ylabel),
        PAD - 4.0,
        H - PAD,
        y.0,
        PAD - 4.0,
        PAD + 4.0,
        y.1,
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn legend(out: &mut String, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let y = PAD + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            W - PAD - 110.0,
            y - 9.0,
            COLORS[i % COLORS.len()],
            W - PAD - 95.0,
            y,
            escape(l)
        );
    }
}

pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let x = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |v: f64| PAD + (v - x.0) / (x.1 - x.0) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - y.0) / (y.1 - y.0) * (H - 2.0 * PAD);
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, y);
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().filter(|p| p.1.is_finite()).map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, COLORS[i % COLORS.len()], pts.join(" "));
    }
    legend(&mut out, &series.iter().map(|s| s.label).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Grouped bars: one group per category, one bar per series.
pub fn bar_chart(title: &str, ylabel: &str, categories: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let y = (0.0, range(series.iter().flat_map(|s| s.1.iter().copied())).1.max(0.0));
    let y = if y.1 <= 0.0 { (0.0, 1.0) } else { y };
    let group = (W - 2.0 * PAD) / categories.len().max(1) as f64;
    let bar = group * 0.8 / series.len().max(1) as f64;
    let mut out = String::new();
    frame(&mut out, title, "", ylabel, y);
    for (c, name) in categories.iter().enumerate() {
        let gx = PAD + group * c as f64 + group * 0.1;
        for (i, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(0.0);
            if !v.is_finite() {
                continue;
            }
            let h = v / y.1 * (H - 2.0 * PAD);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                gx + bar * i as f64,
                H - PAD - h,
                bar,
                h,
                COLORS[i % COLORS.len()]
            );
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, gx + group * 0.4, H - PAD + 14.0, escape(name));
    }
    legend(&mut out, &series.iter().map(|s| s.0).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_well_formed() {
        let s = line_chart("t", "x", "y", &[Series { label: "a<b", points: vec![(0.0, 1.0), (1.0, 2.0)] }]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a&lt;b"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }

    #[test]
    fn bars_per_category_and_series() {
        let s = bar_chart("t", "y", &["a".into(), "b".into()], &[("s1", vec![1.0, 2.0]), ("s2", vec![0.5, f64::NAN])]);
        assert_eq!(s.matches("<rect").count(), 1 + 3 + 2);
    }

    #[test]
    fn flat_series_does_not_divide_by_zero() {
        let s = line_chart("t", "x", "y", &[Series { label: "a", points: vec![(0.0, 1.0), (0.0, 1.0)] }]);
        assert!(!s.contains("NaN"));
    }
}
