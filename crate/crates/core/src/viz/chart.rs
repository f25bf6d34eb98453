//! Minimal multi-series line chart.

use super::{class_palette, num, Svg};
use crate::error::{Error, Result};

/// One named line.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Rendering options for [`render_line_chart`].
#[derive(Debug, Clone)]
pub struct LineChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Logarithmic x axis; all x values must then be positive.
    pub log_x: bool,
    pub width: f64,
    pub height: f64,
}

impl LineChartSpec {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        LineChartSpec {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            log_x: false,
            width: 600.0,
            height: 400.0,
        }
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|k| k * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

/// SVG line chart: one `<polyline class="series">` and one
/// `<circle class="point">` per data point for every series. X ticks are
/// placed at the distinct x values of the data.
pub fn render_line_chart(spec: &LineChartSpec) -> Result<String> {
    let all: Vec<(f64, f64)> = spec.series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::validation("line chart without data"));
    }
    if all.iter().any(|(x, y)| !x.is_finite() || !y.is_finite() || (spec.log_x && *x <= 0.0)) {
        return Err(Error::validation("line chart values must be finite (and positive x on a log axis)"));
    }
    let fx = |x: f64| if spec.log_x { x.ln() } else { x };
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(fx(x));
        x1 = x1.max(fx(x));
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = ((y1 - y0) * 0.1).max(0.5);
    let step = nice_step(y1 - y0 + 2.0 * pad);
    let y0 = ((y0 - pad) / step).floor() * step;
    let y1 = ((y1 + pad) / step).ceil() * step;

    let (left, right, top, bottom) = (60.0, 130.0, 36.0, 50.0);
    let pw = spec.width - left - right;
    let ph = spec.height - top - bottom;
    let sx = |x: f64| left + (fx(x) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut svg = Svg::new(spec.width, spec.height);
    svg.text(spec.width / 2.0, 22.0, 14.0, "middle", &spec.title);
    svg.line(format!(
        r##"<rect class="plot-area" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444444"/>"##,
        num(left),
        num(top),
        num(pw),
        num(ph)
    ));
    let mut y = y0;
    while y <= y1 + step * 1e-9 {
        let py = sy(y);
        svg.line(format!(
            r##"<line class="grid" x1="{}" y1="{p}" x2="{}" y2="{p}" stroke="#e0e0e0"/>"##,
            num(left),
            num(left + pw),
            p = num(py)
        ));
        svg.text(left - 6.0, py + 4.0, 10.0, "end", &num(y));
        y += step;
    }
    let mut xs: Vec<f64> = all.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        let px = sx(x);
        svg.line(format!(
            r##"<line class="tick" x1="{p}" y1="{}" x2="{p}" y2="{}" stroke="#444444"/>"##,
            num(top + ph),
            num(top + ph + 5.0),
            p = num(px)
        ));
        svg.text(px, top + ph + 18.0, 10.0, "middle", &num(x));
    }
    svg.text(left + pw / 2.0, spec.height - 10.0, 12.0, "middle", &spec.x_label);
    svg.line(format!(
        r#"<text x="14" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {y})">{}</text>"#,
        super::escape(&spec.y_label),
        y = num(top + ph / 2.0)
    ));
    let colors = class_palette(spec.series.len());
    for (k, s) in spec.series.iter().enumerate() {
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", num(sx(x)), num(sy(y))))
            .collect();
        svg.line(format!(
            r#"<polyline class="series" data-series="{k}" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            path.join(" "),
            colors[k]
        ));
        for &(x, y) in &s.points {
            svg.line(format!(
                r#"<circle class="point" data-series="{k}" cx="{}" cy="{}" r="3" fill="{}"/>"#,
                num(sx(x)),
                num(sy(y)),
                colors[k]
            ));
        }
        let ly = top + 12.0 + 18.0 * k as f64;
        svg.line(format!(
            r#"<line class="legend" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#,
            num(left + pw + 12.0),
            num(left + pw + 32.0),
            colors[k],
            y = num(ly)
        ));
        svg.text(left + pw + 38.0, ly + 4.0, 11.0, "start", &s.name);
    }
    Ok(svg.finish())
}
