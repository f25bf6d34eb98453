//! Fully grown classification trees with axis-aligned threshold splits.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::entropy::{children_entropy, entropy_with_total, majority};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::Scalar;

/// Splits whose information gain does not exceed this are treated as
/// zero-gain (rounding noise of the entropy decomposition).
const MIN_GAIN: f64 = 1e-12;

/// A node in the flat node array of a [`DecisionTree`]. Child references are
/// indices into that array.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<F> {
    /// Sample goes `left` iff `x[attribute] <= threshold`.
    Split {
        attribute: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
    Leaf {
        class: usize,
        leaf_id: usize,
    },
}

/// A binary decision tree. The root is `nodes[0]`; leaf ids are contiguous
/// `0..leaf_count` in pre-order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<F> {
    nodes: Vec<TreeNode<F>>,
    leaf_classes: Vec<usize>,
    steps: Vec<Step<F>>,
    /// `bounds[boxes[id].0..boxes[id].1]` is the region of leaf `id`.
    boxes: Vec<(u32, u32)>,
    bounds: Vec<Bound<F>>,
}

/// `lo < x[attribute] <= hi` along one attribute of a leaf region.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bound<F> {
    attribute: u32,
    lo: F,
    hi: F,
}

fn leaf_regions<F: Scalar>(nodes: &[TreeNode<F>], leaf_count: usize) -> (Vec<(u32, u32)>, Vec<Bound<F>>) {
    fn walk<F: Scalar>(
        nodes: &[TreeNode<F>],
        i: usize,
        path: &mut Vec<Bound<F>>,
        boxes: &mut [(u32, u32)],
        bounds: &mut Vec<Bound<F>>,
    ) {
        match nodes[i] {
            TreeNode::Leaf { leaf_id, .. } => {
                let start = bounds.len() as u32;
                bounds.extend_from_slice(path);
                boxes[leaf_id] = (start, bounds.len() as u32);
            }
            TreeNode::Split {
                attribute,
                threshold,
                left,
                right,
            } => {
                let pos = path.iter().position(|b| b.attribute as usize == attribute);
                let k = pos.unwrap_or_else(|| {
                    path.push(Bound {
                        attribute: attribute as u32,
                        lo: F::neg_infinity(),
                        hi: F::infinity(),
                    });
                    path.len() - 1
                });
                let saved = path[k];
                path[k].hi = saved.hi.min(threshold);
                walk(nodes, left, path, boxes, bounds);
                path[k] = saved;
                path[k].lo = saved.lo.max(threshold);
                walk(nodes, right, path, boxes, bounds);
                path[k] = saved;
                if pos.is_none() {
                    path.pop();
                }
            }
        }
    }
    let mut boxes = vec![(0, 0); leaf_count];
    let mut bounds = Vec::new();
    walk(nodes, 0, &mut Vec::new(), &mut boxes, &mut bounds);
    (boxes, bounds)
}

const LEAF: u32 = u32::MAX;

/// Compact routing node: `next[0]` is the left child (or the leaf id when
/// `attribute == LEAF`), `next[1]` the right child.
#[derive(Debug, Clone, PartialEq)]
struct Step<F> {
    attribute: u32,
    threshold: F,
    next: [u32; 2],
}

fn compile<F: Scalar>(nodes: &[TreeNode<F>]) -> Vec<Step<F>> {
    nodes
        .iter()
        .map(|n| match *n {
            TreeNode::Split {
                attribute,
                threshold,
                left,
                right,
            } => Step {
                attribute: attribute as u32,
                threshold,
                next: [left as u32, right as u32],
            },
            TreeNode::Leaf { leaf_id, .. } => Step {
                attribute: LEAF,
                threshold: F::zero(),
                next: [leaf_id as u32, leaf_id as u32],
            },
        })
        .collect()
}

impl<F: Scalar> DecisionTree<F> {
    pub fn nodes(&self) -> &[TreeNode<F>] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_classes.len()
    }

    /// Class label of leaf `leaf_id`.
    pub fn leaf_class(&self, leaf_id: usize) -> usize {
        self.leaf_classes[leaf_id]
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn walk<F>(nodes: &[TreeNode<F>], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Terminal leaf id reached by `x`. `x` must have the training width.
    #[inline]
    pub fn route(&self, x: &[F]) -> usize {
        let mut s = &self.steps[0];
        while s.attribute != LEAF {
            let right = x[s.attribute as usize] > s.threshold;
            s = &self.steps[s.next[usize::from(right)] as usize];
        }
        s.next[0] as usize
    }

    /// Like [`route`](Self::route), also returning the smallest distance
    /// `|x[j] − threshold|` over the decisions on the path. Any point whose
    /// coordinates each move by strictly less than that margin (and by no
    /// more than it for decisions taken to the left) reaches the same leaf.
    #[inline]
    pub(crate) fn route_with_margin(&self, x: &[F]) -> (usize, f64) {
        let mut s = &self.steps[0];
        let mut margin = f64::INFINITY;
        while s.attribute != LEAF {
            let v = x[s.attribute as usize];
            let d = (v.wide() - s.threshold.wide()).abs();
            margin = if d < margin { d } else { margin };
            s = &self.steps[s.next[usize::from(v > s.threshold)] as usize];
        }
        (s.next[0] as usize, margin)
    }

    /// When `x` lies in the region of leaf `leaf_id`, the distance from
    /// `x` to that region's boundary along the constrained attributes.
    #[inline]
    pub(crate) fn leaf_margin(&self, leaf_id: usize, x: &[F]) -> Option<f64> {
        let (a, b) = self.boxes[leaf_id];
        let mut margin = f64::INFINITY;
        let mut inside = true;
        for r in &self.bounds[a as usize..b as usize] {
            let v = x[r.attribute as usize];
            inside &= r.lo < v && v <= r.hi;
            let d = v.wide() - r.lo.wide();
            let u = r.hi.wide() - v.wide();
            let d = if u < d { u } else { d };
            margin = if d < margin { d } else { margin };
        }
        inside.then_some(margin)
    }

    /// Class predicted for `x`.
    #[inline]
    pub fn predict(&self, x: &[F]) -> usize {
        self.leaf_classes[self.route(x)]
    }

    /// Grows a tree on `samples` (indices into `data`, duplicates allowed),
    /// choosing each split among `m` randomly drawn attributes.
    pub(crate) fn grow<R: Rng>(data: &Dataset<F>, samples: Vec<usize>, m: usize, rng: &mut R) -> Self {
        let mut builder = Builder {
            data,
            m,
            rng,
            nodes: Vec::new(),
            leaf_classes: Vec::new(),
            scratch: Vec::new(),
        };
        let mut samples = samples;
        builder.grow(&mut samples);
        DecisionTree::assemble(builder.nodes, builder.leaf_classes)
    }

    fn assemble(nodes: Vec<TreeNode<F>>, leaf_classes: Vec<usize>) -> Self {
        let (boxes, bounds) = leaf_regions(&nodes, leaf_classes.len());
        DecisionTree {
            steps: compile(&nodes),
            boxes,
            bounds,
            nodes,
            leaf_classes,
        }
    }

    /// Rebuilds a tree from a node array, validating structure.
    pub(crate) fn from_nodes(nodes: Vec<TreeNode<F>>, attribute_count: usize, class_count: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::validation("tree has no nodes"));
        }
        let mut leaf_classes = vec![usize::MAX; nodes.len()];
        let mut leaves = 0;
        let mut referenced = vec![false; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match node {
                TreeNode::Split {
                    attribute,
                    threshold,
                    left,
                    right,
                } => {
                    if *attribute >= attribute_count || !threshold.is_finite() {
                        return Err(Error::validation(format!("invalid split at node {i}")));
                    }
                    for &child in [left, right] {
                        if child <= i || child >= nodes.len() || referenced[child] {
                            return Err(Error::validation(format!(
                                "invalid child reference {child} at node {i}"
                            )));
                        }
                        referenced[child] = true;
                    }
                }
                TreeNode::Leaf { class, leaf_id } => {
                    if *class >= class_count {
                        return Err(Error::validation(format!("leaf class {class} out of range")));
                    }
                    if *leaf_id >= nodes.len() || leaf_classes[*leaf_id] != usize::MAX {
                        return Err(Error::validation(format!("duplicate leaf id {leaf_id}")));
                    }
                    leaf_classes[*leaf_id] = *class;
                    leaves += 1;
                }
            }
        }
        leaf_classes.truncate(leaves);
        if leaf_classes.contains(&usize::MAX) {
            return Err(Error::validation("leaf ids are not contiguous"));
        }
        if referenced.iter().skip(1).any(|r| !r) {
            return Err(Error::validation("tree contains unreachable nodes"));
        }
        Ok(DecisionTree::assemble(nodes, leaf_classes))
    }
}

struct Builder<'a, F, R> {
    data: &'a Dataset<F>,
    m: usize,
    rng: &'a mut R,
    nodes: Vec<TreeNode<F>>,
    leaf_classes: Vec<usize>,
    scratch: Vec<(F, usize)>,
}

struct BestSplit<F> {
    gain: f64,
    attribute: usize,
    threshold: F,
}

impl<F: Scalar, R: Rng> Builder<'_, F, R> {
    fn grow(&mut self, samples: &mut [usize]) -> usize {
        let c = self.data.class_count();
        let mut counts = vec![0usize; c];
        for &i in samples.iter() {
            counts[self.data.label(i)] += 1;
        }
        let at = self.nodes.len();
        let pure = counts.iter().filter(|&&k| k > 0).count() <= 1;
        let split = if pure || samples.len() < 2 {
            None
        } else {
            self.best_split(samples, &counts)
        };
        match split {
            None => {
                let leaf_id = self.leaf_classes.len();
                let class = majority(&counts);
                self.leaf_classes.push(class);
                self.nodes.push(TreeNode::Leaf { class, leaf_id });
            }
            Some(BestSplit {
                attribute,
                threshold,
                ..
            }) => {
                self.nodes.push(TreeNode::Leaf {
                    class: 0,
                    leaf_id: 0,
                });
                let data = self.data;
                let mid = partition(samples, |&i| data.row(i)[attribute] <= threshold);
                let (l, r) = samples.split_at_mut(mid);
                let left = self.grow(l);
                let right = self.grow(r);
                self.nodes[at] = TreeNode::Split {
                    attribute,
                    threshold,
                    left,
                    right,
                };
            }
        }
        at
    }

    /// Best (attribute, threshold) among `m` sampled attributes. Candidates
    /// are midpoints between consecutive distinct values; ties prefer the
    /// lower attribute index, then the lower threshold.
    fn best_split(&mut self, samples: &[usize], parent: &[usize]) -> Option<BestSplit<F>> {
        let total_attrs = self.data.n_attributes();
        let mut attrs = index::sample(self.rng, total_attrs, self.m).into_vec();
        attrs.sort_unstable();

        let n = samples.len();
        let c = parent.len();
        let mut best: Option<BestSplit<F>> = None;
        let mut left = vec![0usize; c];
        let mut right = vec![0usize; c];
        let two = F::one() + F::one();
        let parent_entropy = entropy_with_total(parent, n);

        for &j in &attrs {
            self.scratch.clear();
            self.scratch
                .extend(samples.iter().map(|&i| (self.data.row(i)[j], self.data.label(i))));
            self.scratch
                .sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite attributes"));
            if self.scratch[0].0 == self.scratch[n - 1].0 {
                continue;
            }
            left.iter_mut().for_each(|v| *v = 0);
            right.copy_from_slice(parent);
            for k in 0..n - 1 {
                let (v, label) = self.scratch[k];
                left[label] += 1;
                right[label] -= 1;
                let next = self.scratch[k + 1].0;
                if v == next {
                    continue;
                }
                let gain = parent_entropy - children_entropy(&left, &right, n);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = v + (next - v) / two;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit {
                        gain,
                        attribute: j,
                        threshold,
                    });
                }
            }
        }
        best.filter(|b| b.gain > MIN_GAIN)
    }
}

/// In-place partition; returns the number of elements satisfying `pred`,
/// which end up first. Relative order within each side is not kept.
fn partition<T, P: Fn(&T) -> bool>(v: &mut [T], pred: P) -> usize {
    let mut i = 0;
    for j in 0..v.len() {
        if pred(&v[j]) {
            v.swap(i, j);
            i += 1;
        }
    }
    i
}

/// Nested JSON form of a tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub(crate) struct NodeDoc<F> {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    attribute: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    threshold: Option<F>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    left: Option<Box<NodeDoc<F>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    right: Option<Box<NodeDoc<F>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    class: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    leaf_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub(crate) struct TreeDoc<F> {
    node_count: usize,
    leaf_count: usize,
    root: NodeDoc<F>,
}

impl<F: Scalar> DecisionTree<F> {
    pub(crate) fn to_doc(&self) -> TreeDoc<F> {
        fn build<F: Scalar>(nodes: &[TreeNode<F>], i: usize) -> NodeDoc<F> {
            match &nodes[i] {
                TreeNode::Split {
                    attribute,
                    threshold,
                    left,
                    right,
                } => NodeDoc {
                    attribute: Some(*attribute),
                    threshold: Some(*threshold),
                    left: Some(Box::new(build(nodes, *left))),
                    right: Some(Box::new(build(nodes, *right))),
                    class: None,
                    leaf_id: None,
                },
                TreeNode::Leaf { class, leaf_id } => NodeDoc {
                    attribute: None,
                    threshold: None,
                    left: None,
                    right: None,
                    class: Some(*class),
                    leaf_id: Some(*leaf_id),
                },
            }
        }
        TreeDoc {
            node_count: self.node_count(),
            leaf_count: self.leaf_count(),
            root: build(&self.nodes, 0),
        }
    }

    pub(crate) fn from_doc(doc: TreeDoc<F>, attribute_count: usize, class_count: usize) -> Result<Self> {
        fn flatten<F: Scalar>(doc: NodeDoc<F>, out: &mut Vec<TreeNode<F>>) -> Result<usize> {
            let at = out.len();
            match doc {
                NodeDoc {
                    attribute: Some(attribute),
                    threshold: Some(threshold),
                    left: Some(l),
                    right: Some(r),
                    class: None,
                    leaf_id: None,
                } => {
                    out.push(TreeNode::Leaf {
                        class: 0,
                        leaf_id: 0,
                    });
                    let left = flatten(*l, out)?;
                    let right = flatten(*r, out)?;
                    out[at] = TreeNode::Split {
                        attribute,
                        threshold,
                        left,
                        right,
                    };
                }
                NodeDoc {
                    attribute: None,
                    threshold: None,
                    left: None,
                    right: None,
                    class: Some(class),
                    leaf_id: Some(leaf_id),
                } => out.push(TreeNode::Leaf { class, leaf_id }),
                _ => return Err(Error::validation("node is neither a split nor a leaf")),
            }
            Ok(at)
        }
        let mut nodes = Vec::with_capacity(doc.node_count);
        flatten(doc.root, &mut nodes)?;
        let tree = Self::from_nodes(nodes, attribute_count, class_count)?;
        if tree.node_count() != doc.node_count || tree.leaf_count() != doc.leaf_count {
            return Err(Error::validation("node or leaf count disagrees with tree body"));
        }
        Ok(tree)
    }
}
