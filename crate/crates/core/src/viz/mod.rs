//! Standalone SVG output: coxcomb grids of SOM weights, MDS scatter plots
//! and accuracy-versus-tree-count line charts.

mod chart;
mod coxcomb;
mod scatter;

use std::fmt::Write;

pub use chart::{render_line_chart, LineChartSpec, Series};
pub use coxcomb::{display_weights, render_som_grid, CoxcombSpec};
pub use scatter::{render_scatter, ScatterSpec};

/// Class colors: red and blue first, then a fixed cycle.
pub const CLASS_CYCLE: [&str; 8] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999",
];

/// `n` class colors, repeating the cycle when `n > 8`.
pub fn class_palette(n: usize) -> Vec<String> {
    (0..n).map(|c| CLASS_CYCLE[c % CLASS_CYCLE.len()].to_string()).collect()
}

/// `n` attribute colors with evenly spaced hues.
pub fn attribute_palette(n: usize) -> Vec<String> {
    (0..n)
        .map(|j| hsl_hex(360.0 * j as f64 / n.max(1) as f64, 0.6, 0.55))
        .collect()
}

fn hsl_hex(h: f64, s: f64, l: f64) -> String {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

/// Fixed-precision number for SVG geometry: six decimals, trailing zeros
/// trimmed, never `-0`.
pub(crate) fn num(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    let r = if r == 0.0 { 0.0 } else { r };
    let mut s = format!("{r:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) struct Svg {
    body: String,
}

impl Svg {
    pub(crate) fn new(width: f64, height: f64) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = num(width),
            h = num(height)
        );
        let _ = writeln!(
            body,
            r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
            num(width),
            num(height)
        );
        Svg { body }
    }

    pub(crate) fn line(&mut self, element: impl AsRef<str>) {
        self.body.push_str(element.as_ref());
        self.body.push('\n');
    }

    pub(crate) fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        self.line(format!(
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{}" text-anchor="{anchor}">{}</text>"#,
            num(x),
            num(y),
            num(size),
            escape(content)
        ));
    }

    pub(crate) fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}
