//! Trained models persisted as JSON bundles.

use serde::{Deserialize, Serialize};

use super::{train_fold_models, ExperimentConfig, Method};
use crate::dataset::{apply_normalization, Dataset, NormalizationParams};
use crate::error::{check_dim, Error, Result};
use crate::forest::RandomForest;
use crate::rfsom::RfBmu;
use crate::som::{classify, EuclideanBmu, LabeledSom};
use crate::Scalar;

/// Version tag written into model bundles.
pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// The classifier inside a bundle, tagged by `method`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub enum TrainedModel<F> {
    Rf { forest: RandomForest<F> },
    Som { som: LabeledSom<F> },
    Rfsom { forest: RandomForest<F>, som: LabeledSom<F> },
}

/// A trained classifier with the preprocessing and names it was fitted
/// with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct ModelBundle<F> {
    pub schema_version: u32,
    pub attribute_names: Vec<String>,
    pub class_names: Vec<String>,
    pub normalization: NormalizationParams<F>,
    pub model: TrainedModel<F>,
}

impl<F: Scalar> ModelBundle<F> {
    pub fn method(&self) -> Method {
        match self.model {
            TrainedModel::Rf { .. } => Method::Rf,
            TrainedModel::Som { .. } => Method::Som,
            TrainedModel::Rfsom { .. } => Method::Rfsom,
        }
    }

    pub fn n_attributes(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses a bundle, rejecting other schema versions before looking at
    /// the body.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::validation("model bundle has no schema_version"))?;
        if found != u64::from(BUNDLE_SCHEMA_VERSION) {
            return Err(Error::SchemaVersion {
                expected: BUNDLE_SCHEMA_VERSION,
                found: u32::try_from(found).unwrap_or(u32::MAX),
            });
        }
        let bundle: ModelBundle<F> = serde_json::from_value(value)?;
        check_dim(bundle.n_attributes(), bundle.normalization.n_attributes())?;
        Ok(bundle)
    }
}

/// Trains `method` on the whole of `data` with the first configured seed.
pub fn train_model<F: Scalar>(data: &Dataset<F>, method: Method, cfg: &ExperimentConfig) -> Result<ModelBundle<F>> {
    cfg.validate()?;
    let norm = cfg.normalization_for(data);
    let normalized = apply_normalization(data, &norm)?;
    let models = train_fold_models(&normalized, norm, cfg, cfg.seeds[0], &[method])?;
    let model = match method {
        Method::Rf => TrainedModel::Rf { forest: models.forest },
        Method::Som => TrainedModel::Som {
            som: models.som.expect("SOM requested"),
        },
        Method::Rfsom => TrainedModel::Rfsom {
            forest: models.forest,
            som: models.rfsom.expect("RF-SOM requested"),
        },
    };
    Ok(ModelBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        attribute_names: data.attribute_names().to_vec(),
        class_names: data.class_names().to_vec(),
        normalization: models.normalization,
        model,
    })
}

/// Predicted class index of every raw row.
pub fn predict<'a, F: Scalar, I>(bundle: &ModelBundle<F>, rows: I) -> Result<Vec<usize>>
where
    I: IntoIterator<Item = &'a [F]>,
{
    let frozen = match &bundle.model {
        TrainedModel::Rfsom { forest, som } => Some(RfBmu::frozen(forest, som.grid())?),
        _ => None,
    };
    let mut z = Vec::with_capacity(bundle.n_attributes());
    rows.into_iter()
        .map(|x| {
            check_dim(bundle.n_attributes(), x.len())?;
            z.clear();
            z.extend_from_slice(x);
            bundle.normalization.normalize_row(&mut z)?;
            match &bundle.model {
                TrainedModel::Rf { forest } => forest.predict(&z),
                TrainedModel::Som { som } => classify(som, &z, &EuclideanBmu),
                TrainedModel::Rfsom { som, .. } => classify(som, &z, frozen.as_ref().expect("finder built")),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset<f64> {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 10) as f64, 5.0 * (i / 10) as f64]).collect();
        let labels = (0..30).map(|i| usize::from(i % 10 >= 5)).collect();
        Dataset::from_rows(&rows, labels, 2).unwrap()
    }

    fn cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::new("toy", 2, 3);
        c.trees = 10;
        c.som.e_stop = 10;
        c
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let d = data();
        for method in Method::ALL {
            let b = train_model(&d, method, &cfg()).unwrap();
            assert_eq!(b.method(), method);
            let p = predict(&b, d.rows()).unwrap();
            assert_eq!(p.len(), 30);
            let back = ModelBundle::<f64>::from_json(&b.to_json().unwrap()).unwrap();
            assert_eq!(back, b);
            assert_eq!(predict(&back, d.rows()).unwrap(), p);
        }
    }

    #[test]
    fn schema_and_dimension_errors() {
        let d = data();
        let b = train_model(&d, Method::Rf, &cfg()).unwrap();
        let text = b.to_json().unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert!(matches!(
            ModelBundle::<f64>::from_json(&text),
            Err(Error::SchemaVersion { expected: 1, found: 2 })
        ));
        let wide = [1.0, 2.0, 3.0];
        assert!(matches!(predict(&b, [&wide[..]]), Err(Error::Dimension { .. })));
    }
}
