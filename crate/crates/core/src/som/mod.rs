//! Self-Organising Maps on a rectangular `P × Q` lattice.
//!
//! Training presents every sample once per epoch in a freshly shuffled
//! order. For each presentation the best matching unit (BMU) is located and
//! every neuron moves toward the sample by `η(e)·h·(x − W)`, where
//!
//! * `η(e) = η₀·exp(−e·λ_η)` is the learning rate,
//! * `α(e) = α₀·exp(−(e_stop − e)·λ_α)` is the neighbourhood width,
//! * `h = exp(−α(e)·‖(r, v) − (p, q)‖²)` compares grid positions.

mod label;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use label::{classify, label_som, LabeledSom, SomProvenance};

use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::seed::{self, Purpose};
use crate::Scalar;

/// Training schedule of a SOM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomHyperParams {
    pub e_stop: usize,
    pub eta0: f64,
    pub lambda_eta: f64,
    pub alpha0: f64,
    pub lambda_alpha: f64,
}

impl Default for SomHyperParams {
    fn default() -> Self {
        SomHyperParams {
            e_stop: 200,
            eta0: 0.1,
            lambda_eta: 0.0345,
            alpha0: 0.1,
            lambda_alpha: 0.008,
        }
    }
}

impl SomHyperParams {
    /// Rates must be finite and strictly positive. `e_stop = 0` is accepted
    /// and means an empty schedule.
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("eta0", self.eta0),
            ("lambda_eta", self.lambda_eta),
            ("alpha0", self.alpha0),
            ("lambda_alpha", self.lambda_alpha),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `η(e) = η₀·exp(−e·λ_η)`.
pub fn learning_rate(params: &SomHyperParams, epoch: usize) -> f64 {
    params.eta0 * (-(epoch as f64) * params.lambda_eta).exp()
}

/// `α(e) = α₀·exp(−(e_stop − e)·λ_α)`; grows toward `α₀` at `e = e_stop`.
pub fn neighbourhood_width(params: &SomHyperParams, epoch: usize) -> f64 {
    let remaining = params.e_stop as f64 - epoch as f64;
    params.alpha0 * (-remaining * params.lambda_alpha).exp()
}

/// `exp(−α·((r − p)² + (v − q)²))`.
pub fn neighbourhood(alpha: f64, bmu: (usize, usize), neuron: (usize, usize)) -> f64 {
    (-alpha * grid_distance_sq(bmu, neuron) as f64).exp()
}

fn grid_distance_sq(a: (usize, usize), b: (usize, usize)) -> usize {
    let dr = a.0.abs_diff(b.0);
    let dc = a.1.abs_diff(b.1);
    dr * dr + dc * dc
}

/// `(x − w)ᵀ(x − w)`.
pub fn squared_euclidean<F: Scalar>(x: &[F], w: &[F]) -> Result<F> {
    check_dim(w.len(), x.len())?;
    Ok(sq_dist(x, w))
}

#[inline]
pub(crate) fn sq_dist<F: Scalar>(x: &[F], w: &[F]) -> F {
    x.iter()
        .zip(w)
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .fold(F::zero(), |acc, v| acc + v)
}

/// Neuron weights of a `P × Q` map. Neuron `(p, q)` has linear index
/// `ℓ = p·Q + q`; weights are stored row-major as an `L × M` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDoc<F>", into = "GridDoc<F>")]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct SomGrid<F> {
    rows: usize,
    cols: usize,
    dim: usize,
    weights: Vec<F>,
}

impl<F: Scalar> SomGrid<F> {
    pub fn new(rows: usize, cols: usize, dim: usize, weights: Vec<F>) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::validation("grid rows, cols and dim must be ≥ 1"));
        }
        check_dim(rows * cols * dim, weights.len())?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::validation("grid weights must be finite"));
        }
        Ok(SomGrid {
            rows,
            cols,
            dim,
            weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Weight vector length `M`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `L = P·Q`.
    pub fn neuron_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, p: usize, q: usize) -> usize {
        assert!(p < self.rows && q < self.cols, "grid position out of range");
        p * self.cols + q
    }

    pub fn coords(&self, neuron: usize) -> (usize, usize) {
        (neuron / self.cols, neuron % self.cols)
    }

    pub fn weight(&self, neuron: usize) -> &[F] {
        &self.weights[neuron * self.dim..(neuron + 1) * self.dim]
    }

    pub fn neurons(&self) -> impl ExactSizeIterator<Item = &[F]> + '_ {
        self.weights.chunks_exact(self.dim)
    }

    /// Row-major `L × M` weights.
    pub fn weights(&self) -> &[F] {
        &self.weights
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
struct GridDoc<F> {
    rows: usize,
    cols: usize,
    dim: usize,
    weights: Vec<F>,
}

impl<F: Scalar> From<SomGrid<F>> for GridDoc<F> {
    fn from(g: SomGrid<F>) -> Self {
        GridDoc {
            rows: g.rows,
            cols: g.cols,
            dim: g.dim,
            weights: g.weights,
        }
    }
}

impl<F: Scalar> TryFrom<GridDoc<F>> for SomGrid<F> {
    type Error = Error;

    fn try_from(d: GridDoc<F>) -> Result<Self> {
        SomGrid::new(d.rows, d.cols, d.dim, d.weights)
    }
}

/// Random `P × Q` grid with each weight uniform in the range of its
/// attribute over `data`.
pub fn init_grid<F: Scalar>(rows: usize, cols: usize, data: &Dataset<F>, seed: u64) -> Result<SomGrid<F>> {
    let m = data.n_attributes();
    let mut lo = vec![F::infinity(); m];
    let mut hi = vec![F::neg_infinity(); m];
    for row in data.rows() {
        for j in 0..m {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let mut rng = seed::stream(seed, Purpose::GridInit, 0);
    let count = rows * cols;
    let mut weights = Vec::with_capacity(count * m);
    for _ in 0..count {
        for j in 0..m {
            weights.push(if hi[j] > lo[j] {
                rng.gen_range(lo[j]..=hi[j])
            } else {
                lo[j]
            });
        }
    }
    SomGrid::new(rows, cols, m, weights)
}

/// Lowest-index neuron minimising the squared Euclidean distance to `x`.
pub fn find_bmu_euclidean<F: Scalar>(grid: &SomGrid<F>, x: &[F]) -> Result<usize> {
    check_dim(grid.dim, x.len())?;
    Ok(euclidean_bmu(grid, x))
}

pub(crate) fn euclidean_bmu<F: Scalar>(grid: &SomGrid<F>, x: &[F]) -> usize {
    let mut best = 0;
    let mut best_d = F::infinity();
    for (l, w) in grid.neurons().enumerate() {
        let d = sq_dist(x, w);
        if d < best_d {
            best_d = d;
            best = l;
        }
    }
    best
}

/// Applies `W ← W + η·h·(x − W)` to every neuron, with `h` relative to the
/// grid position of `bmu` at width `alpha`.
pub fn update_weights<F: Scalar>(grid: &mut SomGrid<F>, x: &[F], bmu: usize, eta: f64, alpha: f64) -> Result<()> {
    check_dim(grid.dim, x.len())?;
    if bmu >= grid.neuron_count() {
        return Err(Error::validation(format!("BMU index {bmu} out of range")));
    }
    let kernel = Kernel::new(grid.rows, grid.cols, eta, alpha);
    kernel.apply(grid, x, bmu, None);
    Ok(())
}

/// `η·h` for every grid offset at one (η, α) pair.
pub(crate) struct Kernel {
    cols: usize,
    /// Indexed by `|Δp|·Q + |Δq|`.
    coefficients: Vec<f64>,
}

impl Kernel {
    pub(crate) fn new(rows: usize, cols: usize, eta: f64, alpha: f64) -> Self {
        let mut kernel = Kernel {
            cols,
            coefficients: vec![0.0; rows * cols],
        };
        kernel.set(eta, alpha);
        kernel
    }

    /// Recomputes the coefficients in place.
    pub(crate) fn set(&mut self, eta: f64, alpha: f64) {
        for (k, c) in self.coefficients.iter_mut().enumerate() {
            *c = eta * neighbourhood(alpha, (0, 0), (k / self.cols, k % self.cols));
        }
    }

    /// Moves every neuron toward `x`. When `shifts` is given, records each
    /// neuron's largest per-coordinate displacement.
    pub(crate) fn apply<F: Scalar>(&self, grid: &mut SomGrid<F>, x: &[F], bmu: usize, mut shifts: Option<&mut [f64]>) {
        let (r, v) = grid.coords(bmu);
        let cols = grid.cols;
        let dim = grid.dim;
        for (l, w) in grid.weights.chunks_exact_mut(dim).enumerate() {
            let (p, q) = (l / cols, l % cols);
            let c = F::lit(self.coefficients[r.abs_diff(p) * self.cols + v.abs_diff(q)]);
            match shifts.as_deref_mut() {
                None => {
                    for (wj, &xj) in w.iter_mut().zip(x) {
                        *wj += c * (xj - *wj);
                    }
                }
                Some(s) => {
                    let mut moved = 0.0f64;
                    for (wj, &xj) in w.iter_mut().zip(x) {
                        let old = *wj;
                        *wj += c * (xj - old);
                        moved = moved.max((wj.wide() - old.wide()).abs());
                    }
                    s[l] = moved;
                }
            }
        }
    }
}

/// BMU search strategy used by the shared training loop.
pub(crate) trait TrainingSearch<F: Scalar> {
    /// BMU of training sample `sample` (whose attributes are `x`).
    fn bmu(&mut self, grid: &SomGrid<F>, sample: usize, x: &[F]) -> usize;

    /// Whether [`moved`](Self::moved) wants per-neuron displacements.
    fn tracks_shifts(&self) -> bool {
        false
    }

    /// Called after every update with each neuron's L∞ displacement.
    fn moved(&mut self, _shifts: &[f64]) {}
}

struct EuclideanSearch;

impl<F: Scalar> TrainingSearch<F> for EuclideanSearch {
    fn bmu(&mut self, grid: &SomGrid<F>, _sample: usize, x: &[F]) -> usize {
        euclidean_bmu(grid, x)
    }
}

/// The training loop shared by the Euclidean SOM and RF-SOM.
pub(crate) fn run_training<F: Scalar, S: TrainingSearch<F>>(
    mut grid: SomGrid<F>,
    data: &Dataset<F>,
    params: &SomHyperParams,
    seed: u64,
    search: &mut S,
) -> Result<SomGrid<F>> {
    params.validate()?;
    check_dim(grid.dim, data.n_attributes())?;
    let mut rng = seed::stream(seed, Purpose::Shuffle, 0);
    let mut order: Vec<usize> = (0..data.n_samples()).collect();
    let mut shifts = search.tracks_shifts().then(|| vec![0.0; grid.neuron_count()]);
    let mut kernel = Kernel::new(grid.rows, grid.cols, 0.0, 0.0);
    for epoch in 0..params.e_stop {
        kernel.set(learning_rate(params, epoch), neighbourhood_width(params, epoch));
        order.shuffle(&mut rng);
        for &i in &order {
            let x = data.row(i);
            let bmu = search.bmu(&grid, i, x);
            kernel.apply(&mut grid, x, bmu, shifts.as_deref_mut());
            if let Some(s) = &shifts {
                search.moved(s);
            }
        }
    }
    Ok(grid)
}

/// Trains a SOM with Euclidean BMU search.
pub fn train_som<F: Scalar>(grid: SomGrid<F>, data: &Dataset<F>, params: &SomHyperParams, seed: u64) -> Result<SomGrid<F>> {
    run_training(grid, data, params, seed, &mut EuclideanSearch)
}

/// Strategy locating the BMU of an arbitrary vector on a fixed grid.
pub trait BmuFinder<F: Scalar>: Sync {
    fn find_bmu(&self, grid: &SomGrid<F>, x: &[F]) -> Result<usize>;
}

/// Squared Euclidean distance in attribute space.
#[derive(Debug, Clone, Copy, Default)]
pub struct EuclideanBmu;

impl<F: Scalar> BmuFinder<F> for EuclideanBmu {
    fn find_bmu(&self, grid: &SomGrid<F>, x: &[F]) -> Result<usize> {
        find_bmu_euclidean(grid, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(rows: usize, cols: usize, weights: Vec<Vec<f64>>) -> SomGrid<f64> {
        let dim = weights[0].len();
        SomGrid::new(rows, cols, dim, weights.concat()).unwrap()
    }

    fn blobs() -> Dataset<f64> {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let c = (i % 2) as f64;
                vec![c + 0.01 * i as f64, 2.0 * c - 0.02 * i as f64, 0.5]
            })
            .collect();
        let labels = (0..40).map(|i| i % 2).collect();
        Dataset::from_rows(&rows, labels, 2).unwrap()
    }

    #[test]
    fn schedule_values() {
        let p = SomHyperParams::default();
        assert_eq!(learning_rate(&p, 0), 0.1);
        assert_abs_diff_eq!(learning_rate(&p, 20), 0.1 * (-0.69f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(learning_rate(&p, 20), 0.050158, epsilon = 1e-6);
        assert_abs_diff_eq!(learning_rate(&p, 199), 0.1 * (-6.8655f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(learning_rate(&p, 199), 1.0432e-4, epsilon = 1e-8);
        assert_eq!(neighbourhood_width(&p, 200), 0.1);
        assert_abs_diff_eq!(neighbourhood_width(&p, 0), 0.020190, epsilon = 1e-6);
        assert_abs_diff_eq!(neighbourhood_width(&p, 100), 0.044933, epsilon = 1e-6);
    }

    #[test]
    fn neighbourhood_values() {
        assert_eq!(neighbourhood(0.1, (2, 3), (2, 3)), 1.0);
        assert_abs_diff_eq!(neighbourhood(0.1, (0, 0), (1, 1)), 0.818731, epsilon = 1e-6);
        assert_eq!(neighbourhood(0.3, (4, 4), (2, 4)), neighbourhood(0.3, (4, 4), (6, 4)));
        let far = neighbourhood(0.1, (0, 0), (3, 2));
        assert!(far > 0.0 && far < 1.0);
    }

    #[test]
    fn squared_euclidean_examples() {
        assert_eq!(squared_euclidean(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        assert_eq!(squared_euclidean(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(squared_euclidean(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 25.0);
        assert!(squared_euclidean(&[3.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn euclidean_bmu_examples() {
        let g = grid(1, 2, vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(find_bmu_euclidean(&g, &[0.9, 0.9]).unwrap(), 1);
        assert_eq!(find_bmu_euclidean(&g, &[0.0, 0.0]).unwrap(), 0);
        let same = grid(2, 2, vec![vec![0.3, 0.3]; 4]);
        assert_eq!(find_bmu_euclidean(&same, &[5.0, -1.0]).unwrap(), 0);
        assert!(find_bmu_euclidean(&g, &[0.0]).is_err());
    }

    #[test]
    fn update_examples() {
        let mut g = grid(1, 1, vec![vec![0.0, 2.0]]);
        update_weights(&mut g, &[1.0, 1.0], 0, 1.0, 0.5).unwrap();
        assert_eq!(g.weight(0), &[1.0, 1.0]);

        let mut g = grid(1, 2, vec![vec![1.0], vec![0.0]]);
        update_weights(&mut g, &[1.0], 1, 0.1, 0.2).unwrap();
        assert_eq!(g.weight(0), &[1.0]);

        // neuron at grid distance² = 2 from the BMU: h = exp(−0.2)
        let mut g = grid(2, 2, vec![vec![0.0]; 4]);
        update_weights(&mut g, &[1.0], 0, 0.1, 0.1).unwrap();
        assert_abs_diff_eq!(g.weight(3)[0], 0.081873, epsilon = 1e-6);
        assert!(update_weights(&mut g, &[1.0], 4, 0.1, 0.1).is_err());
    }

    #[test]
    fn index_coords_bijection() {
        let g = grid(3, 4, vec![vec![0.0]; 12]);
        for l in 0..12 {
            let (p, q) = g.coords(l);
            assert_eq!(g.index(p, q), l);
        }
        assert_eq!(g.coords(5), (1, 1));
    }

    #[test]
    fn init_is_deterministic_and_in_range() {
        let d = blobs();
        let a = init_grid(7, 7, &d, 3).unwrap();
        let b = init_grid(7, 7, &d, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.neuron_count(), 49);
        assert_ne!(a, init_grid(7, 7, &d, 4).unwrap());
        for w in a.neurons() {
            assert!((0.0..=1.39).contains(&w[0]));
            assert_eq!(w[2], 0.5);
        }
    }

    #[test]
    fn empty_schedule_leaves_grid_unchanged() {
        let d = blobs();
        let g = init_grid(3, 3, &d, 1).unwrap();
        let p = SomHyperParams {
            e_stop: 0,
            ..Default::default()
        };
        assert_eq!(train_som(g.clone(), &d, &p, 9).unwrap(), g);
    }

    #[test]
    fn single_sample_bmu_converges() {
        let d = Dataset::from_rows(&[vec![0.7, 0.2], vec![0.0, 0.0]], vec![0, 1], 2).unwrap();
        let one = d.subset(&[0]);
        let mut g = grid(2, 2, vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 0.0]]);
        let x = one.row(0).to_vec();
        let p = SomHyperParams {
            e_stop: 1,
            ..Default::default()
        };
        let mut last = f64::INFINITY;
        for e in 0..30 {
            g = train_som(g, &one, &p, e).unwrap();
            let bmu = find_bmu_euclidean(&g, &x).unwrap();
            let d = squared_euclidean(&x, g.weight(bmu)).unwrap();
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn training_is_deterministic() {
        let d = blobs();
        let g = init_grid(3, 3, &d, 1).unwrap();
        let p = SomHyperParams {
            e_stop: 15,
            ..Default::default()
        };
        let a = train_som(g.clone(), &d, &p, 5).unwrap();
        assert_eq!(a, train_som(g.clone(), &d, &p, 5).unwrap());
        assert_ne!(a, train_som(g, &d, &p, 6).unwrap());
    }

    #[test]
    fn grid_json_round_trip() {
        let g = init_grid(2, 3, &blobs(), 2).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<SomGrid<f64>>(&text).unwrap(), g);
        assert!(serde_json::from_str::<SomGrid<f64>>(r#"{"rows":1,"cols":1,"dim":2,"weights":[1.0]}"#).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32, (i % 3) as f32]).collect();
        let d = Dataset::from_rows(&rows, (0..10).map(|i| i % 2).collect(), 2).unwrap();
        let g = init_grid(2, 2, &d, 0).unwrap();
        let p = SomHyperParams {
            e_stop: 5,
            ..Default::default()
        };
        let t = train_som(g, &d, &p, 0).unwrap();
        assert!(t.weights().iter().all(|w| w.is_finite()));
    }

    proptest! {
        #[test]
        fn schedules_are_monotone(e in 0usize..199) {
            let p = SomHyperParams::default();
            prop_assert!(learning_rate(&p, e + 1) < learning_rate(&p, e));
            prop_assert!(neighbourhood_width(&p, e + 1) > neighbourhood_width(&p, e));
        }

        #[test]
        fn update_moves_every_neuron_toward_x(
            w in prop::collection::vec(-5.0f64..5.0, 12),
            x in prop::collection::vec(-5.0f64..5.0, 3),
            bmu in 0usize..4,
            eta in 0.01f64..1.0,
            alpha in 0.01f64..2.0,
        ) {
            let mut g = SomGrid::new(2, 2, 3, w.clone()).unwrap();
            update_weights(&mut g, &x, bmu, eta, alpha).unwrap();
            for (l, before) in w.chunks(3).enumerate() {
                for j in 0..3 {
                    prop_assert!((g.weight(l)[j] - x[j]).abs() <= (before[j] - x[j]).abs());
                }
            }
        }
    }
}
