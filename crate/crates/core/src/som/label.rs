//! Post-training neuron labeling and BMU classification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{neighbourhood, BmuFinder, SomGrid, SomHyperParams};
use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::Scalar;

/// How a labeled map was trained; informational only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomProvenance {
    pub hyperparams: SomHyperParams,
    pub init_seed: u64,
    pub shuffle_seed: u64,
}

/// A trained map whose neurons carry class labels.
///
/// `class_mass[ℓ·C + c]` is the summed neighbourhood value neuron `ℓ`
/// received from class `c` during labeling; each neuron's label is the
/// argmax of its row (ties to the lowest class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LabeledDoc<F>", into = "LabeledDoc<F>")]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct LabeledSom<F> {
    grid: SomGrid<F>,
    neuron_labels: Vec<usize>,
    class_mass: Vec<f64>,
    class_count: usize,
    alpha_label: f64,
    provenance: Option<SomProvenance>,
}

impl<F: Scalar> LabeledSom<F> {
    pub fn grid(&self) -> &SomGrid<F> {
        &self.grid
    }

    pub fn neuron_labels(&self) -> &[usize] {
        &self.neuron_labels
    }

    pub fn neuron_label(&self, neuron: usize) -> usize {
        self.neuron_labels[neuron]
    }

    /// Row-major `L × C` accumulated neighbourhood sums.
    pub fn class_mass(&self) -> &[f64] {
        &self.class_mass
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn alpha_label(&self) -> f64 {
        self.alpha_label
    }

    pub fn provenance(&self) -> Option<&SomProvenance> {
        self.provenance.as_ref()
    }

    pub fn with_provenance(mut self, provenance: SomProvenance) -> Self {
        self.provenance = Some(provenance);
        self
    }
}

fn argmax_low(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Labels every neuron with the class that contributes the most
/// neighbourhood mass at width `alpha_label`, BMUs located by `finder`.
pub fn label_som<F: Scalar, B: BmuFinder<F> + ?Sized>(
    grid: SomGrid<F>,
    data: &Dataset<F>,
    finder: &B,
    alpha_label: f64,
) -> Result<LabeledSom<F>> {
    if data.n_samples() == 0 {
        return Err(Error::validation("cannot label a map with no samples"));
    }
    if !(alpha_label.is_finite() && alpha_label > 0.0) {
        return Err(Error::validation("labeling width must be positive"));
    }
    check_dim(grid.dim(), data.n_attributes())?;
    let bmus = (0..data.n_samples())
        .into_par_iter()
        .map(|i| finder.find_bmu(&grid, data.row(i)))
        .collect::<Result<Vec<_>>>()?;
    let l_count = grid.neuron_count();
    let c_count = data.class_count();
    let mut class_mass = vec![0.0; l_count * c_count];
    for (i, &bmu) in bmus.iter().enumerate() {
        let c = data.label(i);
        let at = grid.coords(bmu);
        for l in 0..l_count {
            class_mass[l * c_count + c] += neighbourhood(alpha_label, at, grid.coords(l));
        }
    }
    let neuron_labels = class_mass.chunks(c_count).map(argmax_low).collect();
    Ok(LabeledSom {
        grid,
        neuron_labels,
        class_mass,
        class_count: c_count,
        alpha_label,
        provenance: None,
    })
}

/// Label of the BMU of `x`.
pub fn classify<F: Scalar, B: BmuFinder<F> + ?Sized>(labeled: &LabeledSom<F>, x: &[F], finder: &B) -> Result<usize> {
    check_dim(labeled.grid.dim(), x.len())?;
    Ok(labeled.neuron_labels[finder.find_bmu(&labeled.grid, x)?])
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
struct LabeledDoc<F> {
    grid: SomGrid<F>,
    class_count: usize,
    neuron_labels: Vec<usize>,
    class_mass: Vec<Vec<f64>>,
    alpha_label: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<SomProvenance>,
}

impl<F: Scalar> From<LabeledSom<F>> for LabeledDoc<F> {
    fn from(s: LabeledSom<F>) -> Self {
        LabeledDoc {
            class_mass: s.class_mass.chunks(s.class_count).map(<[f64]>::to_vec).collect(),
            grid: s.grid,
            class_count: s.class_count,
            neuron_labels: s.neuron_labels,
            alpha_label: s.alpha_label,
            provenance: s.provenance,
        }
    }
}

impl<F: Scalar> TryFrom<LabeledDoc<F>> for LabeledSom<F> {
    type Error = Error;

    fn try_from(d: LabeledDoc<F>) -> Result<Self> {
        let l = d.grid.neuron_count();
        check_dim(l, d.neuron_labels.len())?;
        check_dim(l, d.class_mass.len())?;
        if d.class_count < 2 || d.class_mass.iter().any(|r| r.len() != d.class_count) {
            return Err(Error::validation("class_mass rows must have class_count ≥ 2 entries"));
        }
        for (row, &label) in d.class_mass.iter().zip(&d.neuron_labels) {
            if label != argmax_low(row) {
                return Err(Error::validation("neuron label disagrees with class_mass"));
            }
        }
        Ok(LabeledSom {
            grid: d.grid,
            neuron_labels: d.neuron_labels,
            class_mass: d.class_mass.concat(),
            class_count: d.class_count,
            alpha_label: d.alpha_label,
            provenance: d.provenance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::som::{init_grid, train_som, EuclideanBmu};

    fn data(rows: &[[f64; 2]], labels: &[usize], c: usize) -> Dataset<f64> {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Dataset::from_rows(&rows, labels.to_vec(), c).unwrap()
    }

    #[test]
    fn single_class_labels_everything() {
        let d = data(&[[0.0, 0.0], [1.0, 1.0], [0.5, 0.2]], &[0, 0, 1], 2).subset(&[0, 1]);
        let g = init_grid(3, 3, &d, 0).unwrap();
        let s = label_som(g, &d, &EuclideanBmu, 0.1).unwrap();
        assert!(s.neuron_labels().iter().all(|&c| c == 0));
    }

    #[test]
    fn one_sample_one_neuron() {
        let d = data(&[[0.0, 0.0], [1.0, 1.0]], &[0, 1], 2).subset(&[1]);
        let g = SomGrid::new(1, 1, 2, vec![0.3, 0.3]).unwrap();
        let s = label_som(g, &d, &EuclideanBmu, 0.1).unwrap();
        assert_eq!(s.neuron_labels(), &[1]);
    }

    #[test]
    fn symmetric_mass_ties_low() {
        let d = data(&[[0.0, 0.0], [0.0, 0.0]], &[1, 0], 2);
        let g = SomGrid::new(1, 2, 2, vec![0.0, 0.0, 5.0, 5.0]).unwrap();
        let s = label_som(g, &d, &EuclideanBmu, 0.1).unwrap();
        assert_eq!(s.neuron_labels(), &[0, 0]);
        assert_eq!(s.class_mass()[0], s.class_mass()[1]);
    }

    #[test]
    fn labels_match_mass_and_classify() {
        let rows: Vec<[f64; 2]> = (0..30).map(|i| [(i % 2) as f64 + 0.01 * i as f64, 0.5]).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let d = data(&rows, &labels, 2);
        let g = init_grid(3, 3, &d, 4).unwrap();
        let p = SomHyperParams {
            e_stop: 20,
            ..Default::default()
        };
        let g = train_som(g, &d, &p, 1).unwrap();
        let s = label_som(g, &d, &EuclideanBmu, p.alpha0).unwrap();
        for (l, row) in s.class_mass().chunks(2).enumerate() {
            assert_eq!(s.neuron_label(l), argmax_low(row));
        }
        for l in 0..9 {
            let w = s.grid().weight(l).to_vec();
            assert_eq!(classify(&s, &w, &EuclideanBmu).unwrap(), s.neuron_label(l));
        }
        let x = [3.0, -1.0];
        let c = classify(&s, &x, &EuclideanBmu).unwrap();
        assert!(c < 2);
        assert_eq!(c, classify(&s, &x, &EuclideanBmu).unwrap());
        assert!(classify(&s, &[1.0], &EuclideanBmu).is_err());

        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<LabeledSom<f64>>(&text).unwrap(), s);
    }
}
