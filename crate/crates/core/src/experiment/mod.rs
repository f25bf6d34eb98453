//! Cross-validated comparison of RF, Euclidean SOM and RF-SOM, tree-count
//! sweeps, whole-dataset visualizations and persisted model bundles.

mod bundle;
mod sweep;
mod visualize;

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bundle::{predict, train_model, ModelBundle, TrainedModel, BUNDLE_SCHEMA_VERSION};
pub use sweep::{tree_sweep, SweepPoint, SweepReport, DEFAULT_TREE_COUNTS};
pub use visualize::{visualize, Visualizations};

use crate::dataset::{apply_normalization, fit_minmax, stratified_folds, Dataset, Normalization, NormalizationParams};
use crate::error::{Error, Result};
use crate::forest::{train_forest, Bootstrap, ForestParams, RandomForest};
use crate::rfsom::{train_rfsom, RfBmu};
use crate::som::{classify, init_grid, label_som, train_som, EuclideanBmu, LabeledSom, SomGrid, SomHyperParams};
use crate::Scalar;

/// Version tag written into experiment and sweep reports.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Classifier evaluated by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rf,
    Som,
    Rfsom,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rf, Method::Som, Method::Rfsom];

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Rf => "RF",
            Method::Som => "SOM",
            Method::Rfsom => "RF-SOM",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" => Ok(Method::Rf),
            "som" => Ok(Method::Som),
            "rfsom" | "rf-som" => Ok(Method::Rfsom),
            _ => Err(Error::validation(format!("unknown method {s:?} (expected rf, som or rfsom)"))),
        }
    }
}

/// Everything that determines an experiment besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Used in report headers and output file names.
    pub dataset: String,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub trees: usize,
    /// `None` means `max(1, ⌊√M⌋)`.
    pub attributes_per_split: Option<usize>,
    pub som: SomHyperParams,
    /// Labeling width; `None` uses `α₀`.
    pub alpha_label: Option<f64>,
    pub folds: usize,
    pub seeds: Vec<u64>,
    pub normalization: Normalization,
}

impl ExperimentConfig {
    /// Defaults for a `rows × cols` map: 100 trees, 10 folds, seed 1,
    /// min-max normalization.
    pub fn new(dataset: impl Into<String>, grid_rows: usize, grid_cols: usize) -> Self {
        ExperimentConfig {
            dataset: dataset.into(),
            grid_rows,
            grid_cols,
            trees: 100,
            attributes_per_split: None,
            som: SomHyperParams::default(),
            alpha_label: None,
            folds: 10,
            seeds: vec![1],
            normalization: Normalization::MinMax,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::validation("grid dimensions must be ≥ 1"));
        }
        if self.trees == 0 {
            return Err(Error::validation("tree count must be ≥ 1"));
        }
        if self.folds < 2 {
            return Err(Error::validation("fold count must be ≥ 2"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("at least one seed is required"));
        }
        if let Some(a) = self.alpha_label {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::validation("labeling width must be positive"));
            }
        }
        self.som.validate()
    }

    fn alpha_label(&self) -> f64 {
        self.alpha_label.unwrap_or(self.som.alpha0)
    }

    fn forest_params(&self, seed: u64) -> ForestParams {
        ForestParams {
            tree_count: self.trees,
            attributes_per_split: self.attributes_per_split,
            bootstrap: Bootstrap::Full,
            seed,
            shared_tree_stream: false,
        }
    }

    fn normalization_for<F: Scalar>(&self, data: &Dataset<F>) -> NormalizationParams<F> {
        match self.normalization {
            Normalization::MinMax => fit_minmax(data),
            Normalization::None => NormalizationParams::identity(data.n_attributes()),
        }
    }
}

/// Shape of the evaluated dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub samples: usize,
    pub attributes: usize,
    pub classes: usize,
}

/// Fold accuracies of one method under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Percent, ordered by fold index.
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
}

/// Accuracy of one method across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub per_seed: Vec<SeedResult>,
    /// Average of the per-seed means.
    pub mean: f64,
    /// Average of the per-seed standard deviations.
    pub std: f64,
}

/// Wall-clock seconds spent per method, summed over folds and seeds.
/// Never part of the serialized report, which must stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub forest_seconds: f64,
    pub som_seconds: f64,
    pub rfsom_seconds: f64,
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub data: DatasetInfo,
    pub std_definition: String,
    pub methods: Vec<MethodSummary>,
    #[serde(skip)]
    pub timings: Timings,
}

impl ExperimentReport {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Aligned plain-text summary table.
    pub fn to_table(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "dataset {} (N={}, M={}, C={}), grid {}x{}, T={}, {}-fold CV, seeds {:?}",
            c.dataset, self.data.samples, self.data.attributes, self.data.classes, c.grid_rows, c.grid_cols,
            c.trees, c.folds, c.seeds
        );
        let _ = writeln!(out, "{:<8} {:>8} {:>8}", "method", "mean", "std");
        for m in &self.methods {
            let _ = writeln!(out, "{:<8} {:>8.2} {:>8.2}", m.method.display_name(), m.mean, m.std);
        }
        if c.seeds.len() > 1 {
            let _ = writeln!(out, "\nper seed:");
            for m in &self.methods {
                for s in &m.per_seed {
                    let _ = writeln!(
                        out,
                        "{:<8} seed {:<6} {:>8.2} {:>8.2}",
                        m.method.display_name(),
                        s.seed,
                        s.mean,
                        s.std
                    );
                }
            }
        }
        out
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Everything trained inside one cross-validation fold.
#[derive(Debug, Clone)]
pub struct FoldModels<F> {
    pub normalization: NormalizationParams<F>,
    pub forest: RandomForest<F>,
    /// Grid handed to Euclidean SOM training.
    pub som_initial: Option<SomGrid<F>>,
    /// Grid handed to RF-SOM training.
    pub rfsom_initial: Option<SomGrid<F>>,
    pub som: Option<LabeledSom<F>>,
    pub rfsom: Option<LabeledSom<F>>,
    pub forest_seconds: f64,
    pub som_seconds: f64,
    pub rfsom_seconds: f64,
}

/// Trains the requested models on (already normalized) `train` with the
/// fold seed `seed`. SOM and RF-SOM start from the same initial grid.
pub fn train_fold_models<F: Scalar>(
    train: &Dataset<F>,
    normalization: NormalizationParams<F>,
    cfg: &ExperimentConfig,
    seed: u64,
    methods: &[Method],
) -> Result<FoldModels<F>> {
    let clock = Instant::now();
    let forest = train_forest(train, &cfg.forest_params(seed))?;
    let forest_seconds = clock.elapsed().as_secs_f64();
    let wants = |m| methods.contains(&m);
    let initial = if wants(Method::Som) || wants(Method::Rfsom) {
        Some(init_grid(cfg.grid_rows, cfg.grid_cols, train, seed)?)
    } else {
        None
    };
    let alpha = cfg.alpha_label();
    let mut models = FoldModels {
        normalization,
        forest,
        som_initial: None,
        rfsom_initial: None,
        som: None,
        rfsom: None,
        forest_seconds,
        som_seconds: 0.0,
        rfsom_seconds: 0.0,
    };
    if let (true, Some(grid)) = (wants(Method::Som), &initial) {
        let clock = Instant::now();
        models.som_initial = Some(grid.clone());
        let trained = train_som(grid.clone(), train, &cfg.som, seed)?;
        models.som = Some(label_som(trained, train, &EuclideanBmu, alpha)?);
        models.som_seconds = clock.elapsed().as_secs_f64();
    }
    if let (true, Some(grid)) = (wants(Method::Rfsom), initial) {
        let clock = Instant::now();
        models.rfsom_initial = Some(grid.clone());
        let trained = train_rfsom(grid, &models.forest, train, &cfg.som, seed)?;
        let finder = RfBmu::frozen(&models.forest, &trained)?;
        models.rfsom = Some(label_som(trained, train, &finder, alpha)?);
        models.rfsom_seconds = clock.elapsed().as_secs_f64();
    }
    Ok(models)
}

fn percent_correct(predicted: &[usize], truth: &[usize]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    100.0 * hits as f64 / truth.len() as f64
}

/// Accuracies of one (seed, fold) unit, in the order of `methods`.
struct FoldOutcome {
    accuracies: Vec<f64>,
    timings: Timings,
}

fn evaluate_fold<F: Scalar>(
    data: &Dataset<F>,
    cfg: &ExperimentConfig,
    train_idx: &[usize],
    test_idx: &[usize],
    seed: u64,
    methods: &[Method],
) -> Result<FoldOutcome> {
    let clock = Instant::now();
    let train_raw = data.subset(train_idx);
    let norm = cfg.normalization_for(&train_raw);
    let train = apply_normalization(&train_raw, &norm)?;
    let test = apply_normalization(&data.subset(test_idx), &norm)?;
    let models = train_fold_models(&train, norm, cfg, seed, methods)?;
    let truth = test.labels();
    let mut accuracies = Vec::with_capacity(methods.len());
    for &m in methods {
        let predicted = match m {
            Method::Rf => test
                .rows()
                .map(|x| models.forest.predict(x))
                .collect::<Result<Vec<_>>>()?,
            Method::Som => {
                let som = models.som.as_ref().expect("SOM trained when requested");
                test.rows()
                    .map(|x| classify(som, x, &EuclideanBmu))
                    .collect::<Result<Vec<_>>>()?
            }
            Method::Rfsom => {
                let som = models.rfsom.as_ref().expect("RF-SOM trained when requested");
                let finder = RfBmu::frozen(&models.forest, som.grid())?;
                test.rows()
                    .map(|x| classify(som, x, &finder))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        accuracies.push(percent_correct(&predicted, truth));
    }
    Ok(FoldOutcome {
        accuracies,
        timings: Timings {
            total_seconds: clock.elapsed().as_secs_f64(),
            forest_seconds: models.forest_seconds,
            som_seconds: models.som_seconds,
            rfsom_seconds: models.rfsom_seconds,
        },
    })
}

/// Stratified K-fold cross-validation of all three methods, repeated per
/// seed. Fold `k` under seed `s` trains with seed `s + k`.
pub fn run_experiment<F: Scalar>(data: &Dataset<F>, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_methods(data, cfg, &Method::ALL)
}

/// [`run_experiment`] restricted to `methods`.
pub fn run_experiment_methods<F: Scalar>(
    data: &Dataset<F>,
    cfg: &ExperimentConfig,
    methods: &[Method],
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::validation("no methods requested"));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let splits = cfg
        .seeds
        .iter()
        .map(|&s| stratified_folds(data, cfg.folds, s))
        .collect::<Result<Vec<_>>>()?;
    let units: Vec<(usize, usize)> = (0..cfg.seeds.len())
        .flat_map(|s| (0..cfg.folds).map(move |k| (s, k)))
        .collect();
    let outcomes = units
        .par_iter()
        .map(|&(s, k)| {
            let split = &splits[s];
            let seed = cfg.seeds[s].wrapping_add(k as u64);
            evaluate_fold(data, cfg, &split.train_indices(k), &split.test_indices(k), seed, &methods)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut timings = Timings::default();
    for o in &outcomes {
        timings.total_seconds += o.timings.total_seconds;
        timings.forest_seconds += o.timings.forest_seconds;
        timings.som_seconds += o.timings.som_seconds;
        timings.rfsom_seconds += o.timings.rfsom_seconds;
    }
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let per_seed: Vec<SeedResult> = cfg
                .seeds
                .iter()
                .enumerate()
                .map(|(s, &seed)| {
                    let fold_accuracies: Vec<f64> = outcomes[s * cfg.folds..(s + 1) * cfg.folds]
                        .iter()
                        .map(|o| o.accuracies[mi])
                        .collect();
                    let (mean, std) = mean_std(&fold_accuracies);
                    SeedResult {
                        seed,
                        fold_accuracies,
                        mean,
                        std,
                    }
                })
                .collect();
            let n = per_seed.len() as f64;
            MethodSummary {
                method,
                mean: per_seed.iter().map(|s| s.mean).sum::<f64>() / n,
                std: per_seed.iter().map(|s| s.std).sum::<f64>() / n,
                per_seed,
            }
        })
        .collect();
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        data: DatasetInfo {
            samples: data.n_samples(),
            attributes: data.n_attributes(),
            classes: data.class_count(),
        },
        std_definition: "population standard deviation over fold accuracies, averaged over seeds".into(),
        methods: summaries,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset<f64> {
        let rows = vec![vec![0.0, 0.1], vec![1.0, 0.9], vec![0.1, 0.0], vec![0.9, 1.0]];
        Dataset::from_rows(&rows, vec![0, 1, 0, 1], 2).unwrap()
    }

    fn quick(name: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(name, 2, 2);
        cfg.trees = 5;
        cfg.folds = 2;
        cfg.som.e_stop = 5;
        cfg
    }

    #[test]
    fn two_fold_toy_accuracies_are_multiples_of_half() {
        let r = run_experiment(&toy(), &quick("toy")).unwrap();
        assert_eq!(r.methods.len(), 3);
        for m in &r.methods {
            for a in &m.per_seed[0].fold_accuracies {
                assert!([0.0, 50.0, 100.0].contains(a), "{a}");
            }
        }
    }

    #[test]
    fn summary_recomputes_from_folds() {
        let mut cfg = quick("toy");
        cfg.seeds = vec![3, 9];
        let r = run_experiment(&toy(), &cfg).unwrap();
        for m in &r.methods {
            let means: Vec<f64> = m.per_seed.iter().map(|s| mean_std(&s.fold_accuracies).0).collect();
            let stds: Vec<f64> = m.per_seed.iter().map(|s| mean_std(&s.fold_accuracies).1).collect();
            assert!((m.mean - means.iter().sum::<f64>() / 2.0).abs() < 1e-12);
            assert!((m.std - stds.iter().sum::<f64>() / 2.0).abs() < 1e-12);
        }
        assert!(r.to_table().contains("RF-SOM"));
    }

    #[test]
    fn reports_are_reproducible() {
        let a = run_experiment(&toy(), &quick("toy")).unwrap().to_json().unwrap();
        let b = run_experiment(&toy(), &quick("toy")).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("seconds"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = quick("toy");
        cfg.folds = 1;
        assert!(run_experiment(&toy(), &cfg).is_err());
        let mut cfg = quick("toy");
        cfg.seeds.clear();
        assert!(run_experiment(&toy(), &cfg).is_err());
        assert!(run_experiment_methods(&toy(), &quick("toy"), &[]).is_err());
    }

    #[test]
    fn method_names() {
        assert_eq!("RF-SOM".parse::<Method>().unwrap(), Method::Rfsom);
        assert_eq!("som".parse::<Method>().unwrap(), Method::Som);
        assert!("knn".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::Rfsom).unwrap(), "\"rfsom\"");
    }
}
