//! SOM training and classification with Random-Forest dissimilarity as the
//! BMU criterion.
//!
//! The BMU of `x` is the neuron with the smallest `Dis(x, W_ℓ) = 1 −
//! Prox(x, W_ℓ)`, i.e. the neuron sharing a leaf with `x` in the largest
//! number of trees (ties to the lowest index). The weight update itself is
//! the ordinary attribute-space rule.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::dataset::{apply_normalization, fit_minmax, Dataset, Normalization, NormalizationParams};
use crate::error::{check_dim, Error, Result};
use crate::forest::{train_forest, ForestParams, LeafIdCache, RandomForest};
use crate::som::{
    self, init_grid, label_som, run_training, BmuFinder, LabeledSom, SomGrid, SomHyperParams, SomProvenance,
    TrainingSearch,
};
use crate::Scalar;

/// Version tag written into serialized RF-SOM models.
pub const RFSOM_SCHEMA_VERSION: u32 = 1;

/// Index of the largest count, ties to the lowest index.
fn argmax_count(counts: impl Iterator<Item = usize>) -> usize {
    let mut best = 0;
    let mut best_count = None;
    for (l, c) in counts.enumerate() {
        if best_count.is_none_or(|b| c > b) {
            best = l;
            best_count = Some(c);
        }
    }
    best
}

fn shared(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x == y).count()
}

/// BMU search by RF dissimilarity, with a traversal counter.
///
/// A finder created by [`frozen`](Self::frozen) keeps the leaf ids of one
/// grid's neurons and only routes the query when asked about that grid.
pub struct RfBmu<'a, F> {
    forest: &'a RandomForest<F>,
    frozen: Option<(Vec<F>, LeafIdCache)>,
    traversals: AtomicUsize,
}

impl<'a, F: Scalar> RfBmu<'a, F> {
    pub fn new(forest: &'a RandomForest<F>) -> Self {
        RfBmu {
            forest,
            frozen: None,
            traversals: AtomicUsize::new(0),
        }
    }

    /// Finder with the neurons of `grid` routed once up front.
    pub fn frozen(forest: &'a RandomForest<F>, grid: &SomGrid<F>) -> Result<Self> {
        check_dim(forest.attribute_count(), grid.dim())?;
        let cache = forest.leaf_id_cache(grid.neurons())?;
        let finder = RfBmu {
            forest,
            frozen: Some((grid.weights().to_vec(), cache)),
            traversals: AtomicUsize::new(grid.neuron_count() * forest.tree_count()),
        };
        Ok(finder)
    }

    /// Tree traversals performed so far.
    pub fn traversals(&self) -> usize {
        self.traversals.load(Ordering::Relaxed)
    }

    pub fn reset_traversals(&self) {
        self.traversals.store(0, Ordering::Relaxed);
    }
}

impl<F: Scalar> BmuFinder<F> for RfBmu<'_, F> {
    fn find_bmu(&self, grid: &SomGrid<F>, x: &[F]) -> Result<usize> {
        check_dim(self.forest.attribute_count(), grid.dim())?;
        check_dim(grid.dim(), x.len())?;
        let t = self.forest.tree_count();
        let mut query = vec![0u32; t];
        let mut routed = self.forest.route_into(x, &mut query);
        let bmu = match &self.frozen {
            Some((weights, cache)) if weights.as_slice() == grid.weights() => {
                argmax_count((0..cache.rows()).map(|l| shared(&query, cache.row(l))))
            }
            _ => {
                let mut neuron = vec![0u32; t];
                argmax_count(grid.neurons().map(|w| {
                    routed += self.forest.route_into(w, &mut neuron);
                    shared(&query, &neuron)
                }))
            }
        };
        self.traversals.fetch_add(routed, Ordering::Relaxed);
        Ok(bmu)
    }
}

/// RF-dissimilarity BMU of `x`: routes `x` and all `L` neurons through
/// every tree, `(L + 1)·T` traversals.
pub fn find_bmu_rf<F: Scalar>(forest: &RandomForest<F>, grid: &SomGrid<F>, x: &[F]) -> Result<usize> {
    RfBmu::new(forest).find_bmu(grid, x)
}

/// How RF-SOM training locates BMUs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfSearchMode {
    /// Keeps each neuron's leaf in every tree together with a bound on how
    /// far the neuron may move before that leaf can change. When the bound
    /// is exhausted the neuron is tested against its old leaf region and
    /// re-routed only if it left it. Training samples are routed once.
    #[default]
    Cached,
    /// Routes the sample and all neurons through every tree at every
    /// presentation.
    Fresh,
}

struct FreshSearch<'a, F> {
    forest: &'a RandomForest<F>,
    query: Vec<u32>,
    neuron: Vec<u32>,
}

impl<F: Scalar> TrainingSearch<F> for FreshSearch<'_, F> {
    fn bmu(&mut self, grid: &SomGrid<F>, _sample: usize, x: &[F]) -> usize {
        self.forest.route_into(x, &mut self.query);
        let (forest, query, neuron) = (self.forest, &self.query, &mut self.neuron);
        argmax_count(grid.neurons().map(|w| {
            forest.route_into(w, neuron);
            shared(query, neuron)
        }))
    }
}

struct CachedSearch<'a, F> {
    forest: &'a RandomForest<F>,
    samples: LeafIdCache,
    /// `N × T` routing margins of the training samples.
    sample_margins: Vec<f64>,
    /// `L × T` leaf ids of the neurons.
    leaves: Vec<u32>,
    /// `L × T` remaining displacement before the leaf must be recomputed;
    /// negative means stale.
    budgets: Vec<f64>,
    /// Relative safety factor absorbing rounding in the budget arithmetic.
    keep: f64,
    /// Absolute rounding allowance of one update step.
    guard: f64,
    current: usize,
}

impl<'a, F: Scalar> CachedSearch<'a, F> {
    fn new(forest: &'a RandomForest<F>, data: &Dataset<F>, grid: &SomGrid<F>, presentations: usize) -> Result<Self> {
        let t = forest.tree_count();
        let slack = (8.0 * presentations as f64 * f64::EPSILON).max(1e-9);
        let mut sample_margins = Vec::with_capacity(data.n_samples() * t);
        for x in data.rows() {
            sample_margins.extend(forest.trees().iter().map(|tree| tree.route_with_margin(x).1));
        }
        let scale = data
            .attributes()
            .iter()
            .chain(grid.weights())
            .fold(1.0f64, |m, v| m.max(v.wide().abs()));
        Ok(CachedSearch {
            forest,
            samples: forest.leaf_id_cache(data.rows())?,
            sample_margins,
            leaves: vec![0; grid.neuron_count() * t],
            budgets: vec![-1.0; grid.neuron_count() * t],
            keep: 1.0 - slack,
            guard: 8.0 * F::epsilon().wide() * scale,
            current: 0,
        })
    }
}

impl<F: Scalar> TrainingSearch<F> for CachedSearch<'_, F> {
    fn bmu(&mut self, grid: &SomGrid<F>, sample: usize, _x: &[F]) -> usize {
        self.current = sample;
        let t = self.forest.tree_count();
        let trees = self.forest.trees();
        let query = self.samples.row(sample);
        let (leaves, budgets, keep) = (&mut self.leaves, &mut self.budgets, self.keep);
        argmax_count(grid.neurons().enumerate().map(|(l, w)| {
            let span = l * t..(l + 1) * t;
            let leaf = &mut leaves[span.clone()];
            let budget = &mut budgets[span];
            for k in 0..t {
                if budget[k] < 0.0 {
                    budget[k] = match trees[k].leaf_margin(leaf[k] as usize, w) {
                        Some(margin) => margin * keep,
                        None => {
                            let (id, margin) = trees[k].route_with_margin(w);
                            leaf[k] = id as u32;
                            margin * keep
                        }
                    };
                }
            }
            shared(query, leaf)
        }))
    }

    fn tracks_shifts(&self) -> bool {
        true
    }

    /// Every neuron moved towards the current sample. Where it shares the
    /// sample's leaf, it stays inside that (convex) region at a distance of
    /// at least the smaller of the two margins.
    fn moved(&mut self, shifts: &[f64]) {
        let t = self.forest.tree_count();
        let query = self.samples.row(self.current);
        let qm = &self.sample_margins[self.current * t..(self.current + 1) * t];
        let (keep, guard) = (self.keep, self.guard);
        for ((budget, leaf), &s) in self.budgets.chunks_exact_mut(t).zip(self.leaves.chunks_exact(t)).zip(shifts) {
            for k in 0..t {
                let b = budget[k];
                let along = b - s;
                budget[k] = if leaf[k] == query[k] {
                    let inside = if b < qm[k] * keep { b } else { qm[k] * keep } - guard;
                    if inside > along {
                        inside
                    } else {
                        along
                    }
                } else {
                    along
                };
            }
        }
    }
}

/// Trains `grid` with RF-dissimilarity BMU search and the usual update rule.
pub fn train_rfsom<F: Scalar>(
    grid: SomGrid<F>,
    forest: &RandomForest<F>,
    data: &Dataset<F>,
    params: &SomHyperParams,
    seed: u64,
) -> Result<SomGrid<F>> {
    train_rfsom_with_mode(grid, forest, data, params, seed, RfSearchMode::Cached)
}

/// [`train_rfsom`] with an explicit BMU search mode. Both modes produce
/// bit-identical grids.
pub fn train_rfsom_with_mode<F: Scalar>(
    grid: SomGrid<F>,
    forest: &RandomForest<F>,
    data: &Dataset<F>,
    params: &SomHyperParams,
    seed: u64,
    mode: RfSearchMode,
) -> Result<SomGrid<F>> {
    check_dim(forest.attribute_count(), data.n_attributes())?;
    check_dim(grid.dim(), data.n_attributes())?;
    match mode {
        RfSearchMode::Fresh => {
            let t = forest.tree_count();
            let mut search = FreshSearch {
                forest,
                query: vec![0; t],
                neuron: vec![0; t],
            };
            run_training(grid, data, params, seed, &mut search)
        }
        RfSearchMode::Cached => {
            let presentations = data.n_samples() * params.e_stop;
            let mut search = CachedSearch::new(forest, data, &grid, presentations)?;
            run_training(grid, data, params, seed, &mut search)
        }
    }
}

/// Everything needed to build an [`RfSomModel`] from raw data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfSomConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub forest: ForestParams,
    pub som: SomHyperParams,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub normalization: Normalization,
    /// Labeling width; `None` uses `α₀`.
    pub alpha_label: Option<f64>,
}

/// A forest, an RF-SOM labeled with RF-dissimilarity BMUs, and the
/// normalization both were fitted under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct RfSomModel<F> {
    pub forest: RandomForest<F>,
    pub labeled: LabeledSom<F>,
    pub normalization: NormalizationParams<F>,
}

impl<F: Scalar> RfSomModel<F> {
    pub fn new(forest: RandomForest<F>, labeled: LabeledSom<F>, normalization: NormalizationParams<F>) -> Result<Self> {
        check_dim(forest.attribute_count(), labeled.grid().dim())?;
        check_dim(forest.attribute_count(), normalization.n_attributes())?;
        if forest.class_count() != labeled.class_count() {
            return Err(Error::validation("forest and SOM disagree on class count"));
        }
        Ok(RfSomModel {
            forest,
            labeled,
            normalization,
        })
    }

    /// Class of the RF BMU of raw attribute vector `x`.
    pub fn classify(&self, x: &[F]) -> Result<usize> {
        let mut z = x.to_vec();
        self.normalization.normalize_row(&mut z)?;
        som::classify(&self.labeled, &z, &RfBmu::new(&self.forest))
    }

    /// Classifies many raw rows, routing the neurons only once.
    pub fn classify_batch<'r, I>(&self, rows: I) -> Result<Vec<usize>>
    where
        I: IntoIterator<Item = &'r [F]>,
    {
        let finder = RfBmu::frozen(&self.forest, self.labeled.grid())?;
        let mut z = Vec::new();
        rows.into_iter()
            .map(|x| {
                z.clear();
                z.extend_from_slice(x);
                self.normalization.normalize_row(&mut z)?;
                som::classify(&self.labeled, &z, &finder)
            })
            .collect()
    }
}

/// Fits normalization, trains the forest, trains and labels an RF-SOM.
pub fn build_rfsom_classifier<F: Scalar>(data: &Dataset<F>, config: &RfSomConfig) -> Result<RfSomModel<F>> {
    let normalization = match config.normalization {
        Normalization::MinMax => fit_minmax(data),
        Normalization::None => NormalizationParams::identity(data.n_attributes()),
    };
    let data = apply_normalization(data, &normalization)?;
    let forest = train_forest(&data, &config.forest)?;
    let grid = init_grid(config.grid_rows, config.grid_cols, &data, config.init_seed)?;
    let grid = train_rfsom(grid, &forest, &data, &config.som, config.shuffle_seed)?;
    let finder = RfBmu::frozen(&forest, &grid)?;
    let alpha = config.alpha_label.unwrap_or(config.som.alpha0);
    let labeled = label_som(grid.clone(), &data, &finder, alpha)?.with_provenance(SomProvenance {
        hyperparams: config.som,
        init_seed: config.init_seed,
        shuffle_seed: config.shuffle_seed,
    });
    RfSomModel::new(forest, labeled, normalization)
}
