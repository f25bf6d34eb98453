//! Class-colored scatter plots of 2D embeddings.

use super::{class_palette, num, Svg};
use crate::error::{check_dim, Error, Result};
use crate::mds::Embedding2D;
use crate::Scalar;

const MARKER_RADIUS: f64 = 3.0;

/// Rendering options for [`render_scatter`].
#[derive(Debug, Clone)]
pub struct ScatterSpec<'a, F> {
    pub embedding: &'a Embedding2D<F>,
    pub labels: &'a [usize],
    pub class_colors: Vec<String>,
    pub class_names: Vec<String>,
    /// Fraction of the plot side left empty around the points.
    pub padding: f64,
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
}

impl<'a, F: Scalar> ScatterSpec<'a, F> {
    /// 500 × 500 canvas, 8 % padding, default class palette.
    pub fn new(embedding: &'a Embedding2D<F>, labels: &'a [usize], class_count: usize) -> Self {
        ScatterSpec {
            embedding,
            labels,
            class_colors: class_palette(class_count),
            class_names: (0..class_count).map(|c| format!("class {c}")).collect(),
            padding: 0.08,
            width: 500.0,
            height: 500.0,
            title: None,
        }
    }
}

/// SVG document with one `<circle class="marker">` per point. Both axes
/// share one scale so distances are not distorted; the point cloud is
/// centred in the canvas.
pub fn render_scatter<F: Scalar>(spec: &ScatterSpec<'_, F>) -> Result<String> {
    let pts = &spec.embedding.coordinates;
    if pts.is_empty() {
        return Err(Error::validation("scatter plot of zero points"));
    }
    check_dim(pts.len(), spec.labels.len())?;
    if let Some(&c) = spec.labels.iter().find(|&&c| c >= spec.class_colors.len()) {
        return Err(Error::validation(format!("no color for class {c}")));
    }
    if !(0.0..0.5).contains(&spec.padding) {
        return Err(Error::validation("padding must be in [0, 0.5)"));
    }
    let top = if spec.title.is_some() { 24.0 } else { 0.0 };
    let (w, h) = (spec.width, spec.height - top);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a].wide());
            hi[a] = hi[a].max(p[a].wide());
        }
    }
    let span = [hi[0] - lo[0], hi[1] - lo[1]];
    let usable = [w * (1.0 - 2.0 * spec.padding), h * (1.0 - 2.0 * spec.padding)];
    let scale = [usable[0] / span[0], usable[1] / span[1]]
        .into_iter()
        .filter(|s| s.is_finite())
        .fold(f64::INFINITY, f64::min);
    let scale = if scale.is_finite() { scale } else { 0.0 };
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let mut svg = Svg::new(spec.width, spec.height);
    if let Some(title) = &spec.title {
        svg.text(spec.width / 2.0, 16.0, 14.0, "middle", title);
    }
    svg.line(format!(
        r##"<rect class="plot-area" x="0.5" y="{}" width="{}" height="{}" fill="none" stroke="#cccccc"/>"##,
        num(top + 0.5),
        num(w - 1.0),
        num(h - 1.0)
    ));
    for (p, &c) in pts.iter().zip(spec.labels) {
        let x = w / 2.0 + (p[0].wide() - mid[0]) * scale;
        let y = top + h / 2.0 - (p[1].wide() - mid[1]) * scale;
        svg.line(format!(
            r#"<circle class="marker" data-class="{c}" cx="{}" cy="{}" r="{MARKER_RADIUS}" fill="{}" fill-opacity="0.8"/>"#,
            num(x),
            num(y),
            spec.class_colors[c]
        ));
    }
    let mut ly = top + 14.0;
    for (c, name) in spec.class_names.iter().enumerate().take(spec.class_colors.len()) {
        svg.line(format!(
            r#"<rect class="legend" x="8" y="{}" width="10" height="10" fill="{}"/>"#,
            num(ly - 9.0),
            spec.class_colors[c]
        ));
        svg.text(22.0, ly, 11.0, "start", name);
        ly += 15.0;
    }
    Ok(svg.finish())
}
