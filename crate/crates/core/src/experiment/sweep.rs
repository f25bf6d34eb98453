//! Accuracy of RF and RF-SOM as a function of the number of trees.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{run_experiment_methods, ExperimentConfig, Method, MethodSummary, REPORT_SCHEMA_VERSION};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::viz::{render_line_chart, LineChartSpec, Series};
use crate::Scalar;

pub const DEFAULT_TREE_COUNTS: [usize; 6] = [10, 20, 50, 100, 200, 500];

/// Results at one tree count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub trees: usize,
    pub rf: MethodSummary,
    pub rfsom: MethodSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per (tree count, method).
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>6} {:<8} {:>8} {:>8}", "trees", "method", "mean", "std");
        for p in &self.points {
            for m in [&p.rf, &p.rfsom] {
                let _ = writeln!(
                    out,
                    "{:>6} {:<8} {:>8.2} {:>8.2}",
                    p.trees,
                    m.method.display_name(),
                    m.mean,
                    m.std
                );
            }
        }
        out
    }

    /// Mean accuracy against tree count on a logarithmic axis.
    pub fn to_svg(&self) -> Result<String> {
        let mut spec = LineChartSpec::new(
            format!("{}: accuracy vs. number of trees", self.config.dataset),
            "number of trees T",
            "mean accuracy [%]",
        );
        spec.log_x = true;
        for (name, pick) in [("RF", true), ("RF-SOM", false)] {
            spec.series.push(Series {
                name: name.into(),
                points: self
                    .points
                    .iter()
                    .map(|p| (p.trees as f64, if pick { p.rf.mean } else { p.rfsom.mean }))
                    .collect(),
            });
        }
        render_line_chart(&spec)
    }
}

/// Runs the RF and RF-SOM experiment once per entry of `tree_counts`.
pub fn tree_sweep<F: Scalar>(data: &Dataset<F>, cfg: &ExperimentConfig, tree_counts: &[usize]) -> Result<SweepReport> {
    if tree_counts.is_empty() {
        return Err(Error::validation("tree count list is empty"));
    }
    let mut points = Vec::with_capacity(tree_counts.len());
    for &t in tree_counts {
        let mut c = cfg.clone();
        c.trees = t;
        let report = run_experiment_methods(data, &c, &[Method::Rf, Method::Rfsom])?;
        let mut methods = report.methods.into_iter();
        let rf = methods.next().expect("RF summary");
        let rfsom = methods.next().expect("RF-SOM summary");
        points.push(SweepPoint { trees: t, rf, rfsom });
    }
    Ok(SweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        points,
    })
}
