//! Whole-dataset visualizations: SOM and RF-SOM coxcomb grids plus MDS
//! scatter plots from Euclidean distances and from RF dissimilarities.

use std::fs;
use std::path::{Path, PathBuf};

use super::{train_fold_models, ExperimentConfig, Method};
use crate::dataset::{apply_normalization, Dataset};
use crate::error::{Error, Result};
use crate::mds::{classical_mds, euclidean_distance_matrix, DistanceMatrix, Embedding2D};
use crate::som::LabeledSom;
use crate::viz::{render_scatter, render_som_grid, CoxcombSpec, ScatterSpec};
use crate::Scalar;

/// The four SVG documents, plus the share of negative eigenvalue mass of
/// each MDS input.
#[derive(Debug, Clone, PartialEq)]
pub struct Visualizations {
    pub som: String,
    pub rfsom: String,
    pub mds: String,
    pub rfmds: String,
    pub mds_negative_mass: f64,
    pub rfmds_negative_mass: f64,
}

impl Visualizations {
    /// `(file name, contents)` following the `<dataset>_<method>.svg`
    /// convention.
    pub fn files(&self, dataset: &str) -> [(String, &str); 4] {
        [
            (format!("{dataset}_som.svg"), self.som.as_str()),
            (format!("{dataset}_rfsom.svg"), self.rfsom.as_str()),
            (format!("{dataset}_mds.svg"), self.mds.as_str()),
            (format!("{dataset}_rfmds.svg"), self.rfmds.as_str()),
        ]
    }

    pub fn write_to(&self, dir: &Path, dataset: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.files(dataset)
            .into_iter()
            .map(|(name, body)| {
                let path = dir.join(name);
                fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

fn coxcomb<F: Scalar>(som: &LabeledSom<F>, data: &Dataset<F>, title: String) -> Result<String> {
    let mut spec = CoxcombSpec::new(som, data.attribute_names().to_vec());
    spec.class_names = data.class_names().to_vec();
    spec.title = Some(title);
    spec.height += 24.0;
    render_som_grid(&spec)
}

fn scatter<F: Scalar>(e: &Embedding2D<F>, data: &Dataset<F>, title: String) -> Result<String> {
    let mut spec = ScatterSpec::new(e, data.labels(), data.class_count());
    spec.class_names = data.class_names().to_vec();
    spec.title = Some(title);
    spec.height += 24.0;
    render_scatter(&spec)
}

/// Trains on the full dataset with the first configured seed and renders
/// all four panels.
pub fn visualize<F: Scalar>(data: &Dataset<F>, cfg: &ExperimentConfig) -> Result<Visualizations> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let norm = cfg.normalization_for(data);
    let data = apply_normalization(data, &norm)?;
    let models = train_fold_models(&data, norm, cfg, seed, &[Method::Som, Method::Rfsom])?;
    let name = &cfg.dataset;
    let som = models.som.as_ref().expect("SOM requested");
    let rfsom = models.rfsom.as_ref().expect("RF-SOM requested");

    let euclid = classical_mds(&euclidean_distance_matrix(data.rows())?)?;
    let prox = models.forest.proximity_matrix(data.rows())?;
    let rf = classical_mds(&DistanceMatrix::from_proximity(&prox)?)?;

    Ok(Visualizations {
        som: coxcomb(som, &data, format!("{name}: SOM"))?,
        rfsom: coxcomb(rfsom, &data, format!("{name}: RF-SOM"))?,
        mds: scatter(&euclid, &data, format!("{name}: MDS (Euclidean)"))?,
        rfmds: scatter(&rf, &data, format!("{name}: RF-MDS"))?,
        mds_negative_mass: euclid.negative_mass,
        rfmds_negative_mass: rf.negative_mass,
    })
}
