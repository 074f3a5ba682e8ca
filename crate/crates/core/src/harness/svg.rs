//! Minimal SVG scatter and line plots.

use std::fmt::Write;

use crate::numerics::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Triangle,
    Line,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point2>,
    pub color: &'static str,
    pub marker: Marker,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<Point2>, color: &'static str, marker: Marker) -> Self {
        Self {
            label: label.into(),
            points,
            color,
            marker,
        }
    }
}

const SIZE: f64 = 480.0;
const PAD: f64 = 40.0;

/// Renders all series into one plot. With `equal_aspect` both axes share a
/// scale, so circles stay circles.
pub fn render(title: &str, series: &[Series], equal_aspect: bool) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in all {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    if xmin > xmax {
        (xmin, xmax, ymin, ymax) = (-1.0, 1.0, -1.0, 1.0);
    }
    let mut xspan = (xmax - xmin).max(1e-12);
    let mut yspan = (ymax - ymin).max(1e-12);
    if equal_aspect {
        let span = xspan.max(yspan);
        xmin -= (span - xspan) / 2.0;
        ymin -= (span - yspan) / 2.0;
        xspan = span;
        yspan = span;
    }
    let inner = SIZE - 2.0 * PAD;
    let px = |x: f64| PAD + (x - xmin) / xspan * inner;
    let py = |y: f64| SIZE - PAD - (y - ymin) / yspan * inner;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    // Axes through the origin when it is in view, otherwise along the frame.
    let ax = if xmin <= 0.0 && 0.0 <= xmin + xspan { px(0.0) } else { PAD };
    let ay = if ymin <= 0.0 && 0.0 <= ymin + yspan { py(0.0) } else { SIZE - PAD };
    let _ = writeln!(
        svg,
        r##"<line x1="{PAD}" y1="{ay:.2}" x2="{}" y2="{ay:.2}" stroke="#999"/>"##,
        SIZE - PAD
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{ax:.2}" y1="{PAD}" x2="{ax:.2}" y2="{}" stroke="#999"/>"##,
        SIZE - PAD
    );

    for (i, s) in series.iter().enumerate() {
        match s.marker {
            Marker::Line => {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .map(|p| format!("{:.2},{:.2}", px(p[0]), py(p[1])))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    s.color,
                    pts.join(" ")
                );
            }
            Marker::Circle => {
                for p in &s.points {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                        px(p[0]),
                        py(p[1]),
                        s.color
                    );
                }
            }
            Marker::Triangle => {
                for p in &s.points {
                    let (x, y) = (px(p[0]), py(p[1]));
                    let _ = writeln!(
                        svg,
                        r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{}"/>"#,
                        x,
                        y - 4.0,
                        x - 3.5,
                        y + 3.0,
                        x + 3.5,
                        y + 3.0,
                        s.color
                    );
                }
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{}">{}</text>"#,
            PAD + 4.0,
            PAD + 12.0 + 14.0 * i as f64,
            s.color,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_point() {
        let s = Series::new("a<b", vec![[0.0, 0.0], [1.0, 2.0]], "red", Marker::Circle);
        let t = Series::new("tri", vec![[3.0, 1.0]], "blue", Marker::Triangle);
        let l = Series::new("line", vec![[0.0, 0.0], [1.0, 1.0]], "black", Marker::Line);
        let svg = render("demo", &[s, t, l], true);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn handles_empty_and_single_points() {
        assert!(render("empty", &[], false).contains("</svg>"));
        let s = Series::new("one", vec![[5.0, 5.0]], "red", Marker::Circle);
        assert!(!render("one", &[s], false).contains("NaN"));
    }
}
