#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfsom_core::dataset::{load_csv, Dataset, LabelColumn};
use rfsom_core::forest::{DecisionTree, RandomForest, TreeNode};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn load(name: &str) -> Dataset<f64> {
    let path = repo_root().join("data").join(format!("{name}.csv"));
    load_csv(path, &LabelColumn::Last, true).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random labelled data with `classes` classes, every class present.
pub fn random_data(rng: &mut ChaCha8Rng, n: usize, m: usize, classes: usize) -> Dataset<f64> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| (rng.gen_range(0..20) as f64) / 4.0).collect())
        .collect();
    let labels = (0..n)
        .map(|i| if i < classes { i } else { rng.gen_range(0..classes) })
        .collect();
    Dataset::from_rows(&rows, labels, classes).unwrap()
}

/// Leaf reached by `x`, following the node array directly.
pub fn walk(tree: &DecisionTree<f64>, x: &[f64]) -> usize {
    let nodes = tree.nodes();
    let mut i = 0;
    loop {
        match nodes[i] {
            TreeNode::Split {
                attribute,
                threshold,
                left,
                right,
            } => i = if x[attribute] <= threshold { left } else { right },
            TreeNode::Leaf { leaf_id, .. } => return leaf_id,
        }
    }
}

/// Number of trees in which `a` and `b` land in the same leaf.
pub fn shared_leaves(forest: &RandomForest<f64>, a: &[f64], b: &[f64]) -> usize {
    forest.trees().iter().filter(|t| walk(t, a) == walk(t, b)).count()
}

/// Full `n × n` proximity matrix of `rows`, counted pairwise.
pub fn proximity_oracle(forest: &RandomForest<f64>, rows: &[Vec<f64>]) -> Vec<f64> {
    let t = forest.tree_count() as f64;
    let n = rows.len();
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = shared_leaves(forest, &rows[i], &rows[j]) as f64 / t;
        }
    }
    p
}

/// Index of the smallest value, ties to the lowest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}
