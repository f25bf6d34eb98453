//! Polar-area (coxcomb) rendering of a labeled SOM.
//!
//! Every neuron gets one cell at its grid position. Attribute `j` is drawn
//! as a wedge spanning `2π/M` radians starting at twelve o'clock and going
//! clockwise, with radius `r_max·√w̃_j`, so wedge area is proportional to
//! the displayed weight `w̃_j`. The cell frame takes the neuron's class
//! color.

use std::f64::consts::PI;

use super::{attribute_palette, class_palette, num, Svg};
use crate::error::{Error, Result};
use crate::som::LabeledSom;
use crate::Scalar;

const MIN_CELL: f64 = 40.0;
const DEFAULT_CELL: f64 = 90.0;
const LEGEND_WIDTH: f64 = 170.0;
const MARGIN: f64 = 10.0;

/// Rendering options for [`render_som_grid`].
#[derive(Debug, Clone)]
pub struct CoxcombSpec<'a, F> {
    pub som: &'a LabeledSom<F>,
    pub width: f64,
    pub height: f64,
    pub attribute_colors: Vec<String>,
    pub class_colors: Vec<String>,
    pub attribute_names: Vec<String>,
    pub class_names: Vec<String>,
    pub legend: bool,
    pub title: Option<String>,
}

impl<'a, F: Scalar> CoxcombSpec<'a, F> {
    /// Default palettes and a canvas with 90 px cells plus a legend.
    pub fn new(som: &'a LabeledSom<F>, attribute_names: Vec<String>) -> Self {
        let g = som.grid();
        CoxcombSpec {
            som,
            width: 2.0 * MARGIN + g.cols() as f64 * DEFAULT_CELL + LEGEND_WIDTH,
            height: 2.0 * MARGIN + (g.rows() as f64 * DEFAULT_CELL).max(legend_height(g.dim(), som.class_count())),
            attribute_colors: attribute_palette(g.dim()),
            class_colors: class_palette(som.class_count()),
            attribute_names,
            class_names: (0..som.class_count()).map(|c| format!("class {c}")).collect(),
            legend: true,
            title: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let g = self.som.grid();
        if self.attribute_colors.len() != g.dim() {
            return Err(Error::validation(format!(
                "{} attribute colors for {} attributes",
                self.attribute_colors.len(),
                g.dim()
            )));
        }
        if self.class_colors.len() != self.som.class_count() {
            return Err(Error::validation(format!(
                "{} class colors for {} classes",
                self.class_colors.len(),
                self.som.class_count()
            )));
        }
        if self.legend && (self.attribute_names.len() != g.dim() || self.class_names.len() != self.som.class_count()) {
            return Err(Error::validation("legend needs one name per attribute and per class"));
        }
        let (w, h) = self.grid_area();
        if w < g.cols() as f64 * MIN_CELL || h < g.rows() as f64 * MIN_CELL {
            return Err(Error::validation("canvas too small for 40 px cells"));
        }
        Ok(())
    }

    fn grid_area(&self) -> (f64, f64) {
        let legend = if self.legend { LEGEND_WIDTH } else { 0.0 };
        let title = if self.title.is_some() { 24.0 } else { 0.0 };
        (self.width - 2.0 * MARGIN - legend, self.height - 2.0 * MARGIN - title)
    }
}

fn legend_height(attributes: usize, classes: usize) -> f64 {
    (attributes + classes) as f64 * 17.0 + 18.0
}

/// Per-attribute min-max scaling of the grid weights into `[0, 1]`;
/// attributes constant over the grid display as `0.5`. Row-major `L × M`.
pub fn display_weights<F: Scalar>(som: &LabeledSom<F>) -> Vec<f64> {
    let g = som.grid();
    let m = g.dim();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for w in g.neurons() {
        for j in 0..m {
            lo[j] = lo[j].min(w[j].wide());
            hi[j] = hi[j].max(w[j].wide());
        }
    }
    g.neurons()
        .flat_map(|w| {
            (0..m)
                .map(|j| {
                    if hi[j] > lo[j] {
                        (w[j].wide() - lo[j]) / (hi[j] - lo[j])
                    } else {
                        0.5
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn wedge_path(cx: f64, cy: f64, r: f64, start: f64, end: f64) -> String {
    let point = |a: f64| (cx + r * a.sin(), cy - r * a.cos());
    if end - start >= 2.0 * PI - 1e-12 {
        let (x0, y0) = point(start);
        let (x1, y1) = point(start + PI);
        return format!(
            "M {} {} A {r} {r} 0 1 1 {} {} A {r} {r} 0 1 1 {} {} Z",
            num(x0),
            num(y0),
            num(x1),
            num(y1),
            num(x0),
            num(y0),
            r = num(r)
        );
    }
    let (x0, y0) = point(start);
    let (x1, y1) = point(end);
    let large = u8::from(end - start > PI);
    format!(
        "M {} {} L {} {} A {r} {r} 0 {large} 1 {} {} Z",
        num(cx),
        num(cy),
        num(x0),
        num(y0),
        num(x1),
        num(y1),
        r = num(r)
    )
}

/// SVG document with one coxcomb per neuron.
///
/// Each wedge is a `<path class="wedge">` carrying `data-neuron`,
/// `data-attr`, `data-w` (displayed weight) and `data-r` (radius, full
/// precision); each cell frame is a `<rect class="frame">`.
pub fn render_som_grid<F: Scalar>(spec: &CoxcombSpec<'_, F>) -> Result<String> {
    spec.validate()?;
    let g = spec.som.grid();
    let m = g.dim();
    let (area_w, area_h) = spec.grid_area();
    let cell = (area_w / g.cols() as f64).min(area_h / g.rows() as f64);
    let r_max = 0.42 * cell;
    let top = MARGIN + if spec.title.is_some() { 24.0 } else { 0.0 };
    let shown = display_weights(spec.som);
    let mut svg = Svg::new(spec.width, spec.height);
    if let Some(title) = &spec.title {
        svg.text(spec.width / 2.0, MARGIN + 14.0, 14.0, "middle", title);
    }
    for l in 0..g.neuron_count() {
        let (p, q) = g.coords(l);
        let x = MARGIN + q as f64 * cell;
        let y = top + p as f64 * cell;
        let class = spec.som.neuron_label(l);
        svg.line(format!(
            r#"<rect class="frame" data-neuron="{l}" data-class="{class}" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{}" stroke-width="3"/>"#,
            num(x + 2.0),
            num(y + 2.0),
            num(cell - 4.0),
            num(cell - 4.0),
            spec.class_colors[class]
        ));
        let (cx, cy) = (x + cell / 2.0, y + cell / 2.0);
        let step = 2.0 * PI / m as f64;
        for j in 0..m {
            let w = shown[l * m + j];
            let r = r_max * w.sqrt();
            svg.line(format!(
                r#"<path class="wedge" data-neuron="{l}" data-attr="{j}" data-w="{w}" data-r="{r}" d="{}" fill="{}" stroke="white" stroke-width="0.5"/>"#,
                wedge_path(cx, cy, r, j as f64 * step, (j + 1) as f64 * step),
                spec.attribute_colors[j]
            ));
        }
    }
    if spec.legend {
        let lx = MARGIN + g.cols() as f64 * cell + 16.0;
        let mut ly = top + 10.0;
        for j in 0..m {
            svg.line(format!(
                r#"<rect class="legend" x="{}" y="{}" width="12" height="12" fill="{}"/>"#,
                num(lx),
                num(ly),
                spec.attribute_colors[j]
            ));
            let label = format!("{}: {}", j + 1, spec.attribute_names[j]);
            svg.text(lx + 18.0, ly + 10.5, 11.0, "start", &label);
            ly += 17.0;
        }
        ly += 8.0;
        for (c, name) in spec.class_names.iter().enumerate() {
            svg.line(format!(
                r#"<rect class="legend" x="{}" y="{}" width="12" height="12" fill="none" stroke="{}" stroke-width="3"/>"#,
                num(lx),
                num(ly),
                spec.class_colors[c]
            ));
            svg.text(lx + 18.0, ly + 10.5, 11.0, "start", name);
            ly += 17.0;
        }
    }
    Ok(svg.finish())
}
