//! Random Forest classification and RF proximities.
//!
//! Trees are grown on bootstrap samples with `m` attributes drawn at every
//! node and split by maximal information gain, until nodes are pure. Two
//! samples are *proximate* in a tree when they reach the same leaf;
//! `Prox(i, j)` is the fraction of trees where that happens and
//! `Dis(i, j) = 1 − Prox(i, j)`.

mod entropy;
mod tree;

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use entropy::{entropy, information_gain};
pub use tree::{DecisionTree, TreeNode};

use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::seed::{self, Purpose};
use crate::Scalar;

/// Version tag written into serialized forests.
pub const FOREST_SCHEMA_VERSION: u32 = 1;

/// How each tree's training sample is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bootstrap {
    /// `N` draws with replacement.
    #[default]
    Full,
    /// `n` draws with replacement.
    Size(usize),
    /// Every tree sees the full training set once.
    Disabled,
}

/// Forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub tree_count: usize,
    /// Attributes sampled per split; `None` means `max(1, ⌊√M⌋)`.
    pub attributes_per_split: Option<usize>,
    #[serde(default)]
    pub bootstrap: Bootstrap,
    pub seed: u64,
    /// Test hook: every tree draws from the same RNG stream, so all trees
    /// are identical.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub shared_tree_stream: bool,
}

impl ForestParams {
    pub fn new(tree_count: usize, seed: u64) -> Self {
        ForestParams {
            tree_count,
            attributes_per_split: None,
            bootstrap: Bootstrap::Full,
            seed,
            shared_tree_stream: false,
        }
    }
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams::new(100, 0)
    }
}

/// `max(1, ⌊√M⌋)`.
pub fn default_attributes_per_split(attribute_count: usize) -> usize {
    ((attribute_count as f64).sqrt().floor() as usize).max(1)
}

/// A trained ensemble of decision trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ForestDoc<F>", into = "ForestDoc<F>")]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct RandomForest<F> {
    trees: Vec<DecisionTree<F>>,
    attributes_per_split: usize,
    class_count: usize,
    attribute_count: usize,
    seed: u64,
    bootstrap: Bootstrap,
}

/// Trains a forest on `data`.
pub fn train_forest<F: Scalar>(data: &Dataset<F>, params: &ForestParams) -> Result<RandomForest<F>> {
    let m_total = data.n_attributes();
    let m = params
        .attributes_per_split
        .unwrap_or_else(|| default_attributes_per_split(m_total));
    if params.tree_count == 0 {
        return Err(Error::validation("tree count must be ≥ 1"));
    }
    if m == 0 || m > m_total {
        return Err(Error::validation(format!(
            "attributes per split must be in [1, {m_total}], got {m}"
        )));
    }
    let n = data.n_samples();
    let draws = match params.bootstrap {
        Bootstrap::Full => Some(n),
        Bootstrap::Size(k) if k >= 1 => Some(k),
        Bootstrap::Size(_) => return Err(Error::validation("bootstrap size must be ≥ 1")),
        Bootstrap::Disabled => None,
    };
    let trees = (0..params.tree_count)
        .into_par_iter()
        .map(|t| {
            let stream = if params.shared_tree_stream { 0 } else { t as u64 };
            let mut rng = seed::stream(params.seed, Purpose::Forest, stream);
            let samples = match draws {
                Some(k) => (0..k).map(|_| rng.gen_range(0..n)).collect(),
                None => (0..n).collect(),
            };
            DecisionTree::grow(data, samples, m, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        trees,
        attributes_per_split: m,
        class_count: data.class_count(),
        attribute_count: m_total,
        seed: params.seed,
        bootstrap: params.bootstrap,
    })
}

impl<F: Scalar> RandomForest<F> {
    pub fn trees(&self) -> &[DecisionTree<F>] {
        &self.trees
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn attributes_per_split(&self) -> usize {
        self.attributes_per_split
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn attribute_count(&self) -> usize {
        self.attribute_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mode of the per-tree votes; ties go to the lowest class index.
    pub fn predict(&self, x: &[F]) -> Result<usize> {
        check_dim(self.attribute_count, x.len())?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[F]) -> usize {
        let mut votes = vec![0usize; self.class_count];
        for tree in &self.trees {
            votes[tree.predict(x)] += 1;
        }
        entropy::majority(&votes)
    }

    /// Leaf reached by `x` in every tree.
    pub fn leaf_ids(&self, x: &[F]) -> Result<Vec<usize>> {
        check_dim(self.attribute_count, x.len())?;
        Ok(self.trees.iter().map(|t| t.route(x)).collect())
    }

    /// Routes `x` through every tree, writing leaf ids into `out`. Returns
    /// the number of tree traversals performed.
    #[inline]
    pub(crate) fn route_into(&self, x: &[F], out: &mut [u32]) -> usize {
        for (slot, tree) in out.iter_mut().zip(&self.trees) {
            *slot = tree.route(x) as u32;
        }
        self.trees.len()
    }

    /// Leaf ids of every row, one traversal per (row, tree).
    pub fn leaf_id_cache<'a, I>(&self, rows: I) -> Result<LeafIdCache>
    where
        I: IntoIterator<Item = &'a [F]>,
    {
        let t = self.tree_count();
        let mut ids = Vec::new();
        let mut n = 0;
        for row in rows {
            check_dim(self.attribute_count, row.len())?;
            let start = ids.len();
            ids.resize(start + t, 0);
            self.route_into(row, &mut ids[start..]);
            n += 1;
        }
        Ok(LeafIdCache {
            tree_count: t,
            rows: n,
            ids,
        })
    }

    /// `Prox(i, j)` = (trees where rows i and j share a leaf) / T.
    pub fn proximity_matrix<'a, I>(&self, rows: I) -> Result<ProximityMatrix<F>>
    where
        I: IntoIterator<Item = &'a [F]>,
    {
        let cache = self.leaf_id_cache(rows)?;
        let n = cache.rows;
        if n == 0 {
            return Err(Error::validation("proximity matrix of zero rows"));
        }
        let t = F::count(self.tree_count());
        let mut values = vec![F::zero(); n * n];
        for i in 0..n {
            values[i * n + i] = F::one();
            for j in i + 1..n {
                let p = F::count(cache.shared_leaves(i, j)) / t;
                values[i * n + j] = p;
                values[j * n + i] = p;
            }
        }
        Ok(ProximityMatrix {
            n,
            tree_count: self.tree_count(),
            values,
        })
    }

    /// `1 − Prox(query, reference_r)` for every reference. A cache built by
    /// [`leaf_id_cache`](Self::leaf_id_cache) over the same references
    /// avoids re-routing them.
    pub fn dissimilarity_row<'a, I>(&self, query: &[F], references: I, cache: Option<&LeafIdCache>) -> Result<Vec<F>>
    where
        I: IntoIterator<Item = &'a [F]>,
    {
        check_dim(self.attribute_count, query.len())?;
        let owned;
        let cache = match cache {
            Some(c) => {
                if c.tree_count != self.tree_count() {
                    return Err(Error::validation("leaf cache built by a different forest"));
                }
                let count = references.into_iter().count();
                check_dim(c.rows, count)?;
                c
            }
            None => {
                owned = self.leaf_id_cache(references)?;
                &owned
            }
        };
        let mut q = vec![0u32; self.tree_count()];
        self.route_into(query, &mut q);
        let t = F::count(self.tree_count());
        Ok((0..cache.rows)
            .map(|r| {
                let shared = q.iter().zip(cache.row(r)).filter(|(a, b)| a == b).count();
                F::one() - F::count(shared) / t
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Leaf ids of a set of rows: `rows × T`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafIdCache {
    tree_count: usize,
    rows: usize,
    ids: Vec<u32>,
}

impl LeafIdCache {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn tree_count(&self) -> usize {
        self.tree_count
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ids[i * self.tree_count..(i + 1) * self.tree_count]
    }

    /// Number of trees in which rows `i` and `j` share a leaf.
    pub fn shared_leaves(&self, i: usize, j: usize) -> usize {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .filter(|(a, b)| a == b)
            .count()
    }
}

/// Symmetric co-leaf frequency matrix with unit diagonal; every entry is an
/// exact `k / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix<F> {
    n: usize,
    tree_count: usize,
    values: Vec<F>,
}

impl<F: Scalar> ProximityMatrix<F> {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn tree_count(&self) -> usize {
        self.tree_count
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.values[i * self.n + j]
    }

    /// Row-major `n × n` values.
    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// `1 − Prox`, elementwise.
    pub fn dissimilarities(&self) -> Vec<F> {
        self.values.iter().map(|&p| F::one() - p).collect()
    }

    /// Writes the matrix as headerless CSV, one row per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.values.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
struct ForestDoc<F> {
    schema_version: u32,
    tree_count: usize,
    attributes_per_split: usize,
    class_count: usize,
    attribute_count: usize,
    seed: u64,
    bootstrap: Bootstrap,
    trees: Vec<tree::TreeDoc<F>>,
}

impl<F: Scalar> From<RandomForest<F>> for ForestDoc<F> {
    fn from(f: RandomForest<F>) -> Self {
        ForestDoc {
            schema_version: FOREST_SCHEMA_VERSION,
            tree_count: f.trees.len(),
            attributes_per_split: f.attributes_per_split,
            class_count: f.class_count,
            attribute_count: f.attribute_count,
            seed: f.seed,
            bootstrap: f.bootstrap,
            trees: f.trees.iter().map(DecisionTree::to_doc).collect(),
        }
    }
}

impl<F: Scalar> TryFrom<ForestDoc<F>> for RandomForest<F> {
    type Error = Error;

    fn try_from(doc: ForestDoc<F>) -> Result<Self> {
        if doc.schema_version != FOREST_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: FOREST_SCHEMA_VERSION,
                found: doc.schema_version,
            });
        }
        if doc.trees.is_empty() || doc.trees.len() != doc.tree_count {
            return Err(Error::validation("tree_count disagrees with trees"));
        }
        if doc.attributes_per_split == 0 || doc.attributes_per_split > doc.attribute_count {
            return Err(Error::validation("attributes_per_split out of range"));
        }
        let trees = doc
            .trees
            .into_iter()
            .map(|t| DecisionTree::from_doc(t, doc.attribute_count, doc.class_count))
            .collect::<Result<Vec<_>>>()?;
        Ok(RandomForest {
            trees,
            attributes_per_split: doc.attributes_per_split,
            class_count: doc.class_count,
            attribute_count: doc.attribute_count,
            seed: doc.seed,
            bootstrap: doc.bootstrap,
        })
    }
}
