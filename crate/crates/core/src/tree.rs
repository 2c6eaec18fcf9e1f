//! Binary decision tree on numeric features with the gain-ratio criterion.

use nalgebra::{DMatrix, Dim, Matrix, RawStorage, U1};
use serde::{Deserialize, Serialize};

use crate::dataset::Class;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_gain_ratio: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 12, min_samples_split: 2, min_gain_ratio: 1e-7 }
    }
}

const SPLIT_INFO_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum Node<T: Real> {
    Leaf { class: Class, minority_fraction: f64, samples: usize },
    Split { feature: usize, threshold: T, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<T: Real> {
    nodes: Vec<Node<T>>,
    n_features: usize,
}

/// Best split found at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: f64,
    pub gain_ratio: f64,
}

fn entropy(minority: usize, majority: usize) -> f64 {
    let n = (minority + majority) as f64;
    [minority, majority]
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Information gain and gain ratio of splitting `(min, maj)` counts into
/// `left` and `right`.
pub fn gain_ratio(left: (usize, usize), right: (usize, usize)) -> (f64, f64) {
    let nl = (left.0 + left.1) as f64;
    let nr = (right.0 + right.1) as f64;
    let n = nl + nr;
    let parent = entropy(left.0 + right.0, left.1 + right.1);
    let children = (nl / n) * entropy(left.0, left.1) + (nr / n) * entropy(right.0, right.1);
    let gain = (parent - children).max(0.0);
    let split_info = entropy(left.0 + left.1, right.0 + right.1).max(SPLIT_INFO_FLOOR);
    (gain, gain / split_info)
}

fn counts(y: &[Class], rows: &[usize]) -> (usize, usize) {
    let m = rows.iter().filter(|&&i| y[i].is_minority()).count();
    (m, rows.len() - m)
}

/// Scans every feature and every midpoint between consecutive distinct
/// values. The first best (feature order, then threshold order) wins ties.
pub fn best_split<T: Real>(x: &DMatrix<T>, y: &[Class], rows: &[usize]) -> Option<SplitCandidate<T>> {
    let (tot_min, tot_maj) = counts(y, rows);
    let mut best: Option<SplitCandidate<T>> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[(a, f)].partial_cmp(&x[(b, f)]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let (mut lmin, mut lmaj) = (0usize, 0usize);
        for w in 0..order.len() - 1 {
            if y[order[w]].is_minority() {
                lmin += 1;
            } else {
                lmaj += 1;
            }
            let (a, b) = (x[(order[w], f)], x[(order[w + 1], f)]);
            if a == b {
                continue;
            }
            let (gain, ratio) = gain_ratio((lmin, lmaj), (tot_min - lmin, tot_maj - lmaj));
            if best.is_none_or(|bst| ratio > bst.gain_ratio) {
                let threshold = (a + b) * lit(0.5);
                best = Some(SplitCandidate { feature: f, threshold, gain, gain_ratio: ratio });
            }
        }
    }
    best
}

fn leaf<T: Real>(y: &[Class], rows: &[usize]) -> Node<T> {
    let (m, j) = counts(y, rows);
    Node::Leaf {
        class: if m >= j { Class::Minority } else { Class::Majority },
        minority_fraction: m as f64 / rows.len() as f64,
        samples: rows.len(),
    }
}

/// Grows a tree on the rows of `x`. Leaves take the majority class of their
/// rows, minority on ties.
pub fn train_tree<T: Real>(x: &DMatrix<T>, y: &[Class], params: &TreeParams) -> Result<DecisionTree<T>> {
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("cannot train a tree on zero samples".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::Shape(format!("{} labels for {} rows", y.len(), x.nrows())));
    }
    if params.max_depth < 1 {
        return Err(Error::InvalidArgument("max_depth must be >= 1".into()));
    }
    let mut nodes: Vec<Node<T>> = Vec::new();
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, (0..x.nrows()).collect(), 0)];
    nodes.push(leaf(y, &stack[0].1));
    while let Some((id, rows, depth)) = stack.pop() {
        let (m, j) = counts(y, &rows);
        if m == 0 || j == 0 || depth >= params.max_depth || rows.len() < params.min_samples_split.max(2) {
            continue;
        }
        let Some(split) = best_split(x, y, &rows) else { continue };
        if split.gain_ratio < params.min_gain_ratio || (params.min_gain_ratio > 0.0 && split.gain <= 0.0) {
            continue;
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| x[(i, split.feature)] <= split.threshold);
        let left = nodes.len();
        nodes.push(leaf(y, &left_rows));
        let right = nodes.len();
        nodes.push(leaf(y, &right_rows));
        nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        stack.push((right, right_rows, depth + 1));
        stack.push((left, left_rows, depth + 1));
    }
    Ok(DecisionTree { nodes, n_features: x.ncols() })
}

impl<T: Real> DecisionTree<T> {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn go<T: Real>(nodes: &[Node<T>], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Leaf label and leaf minority share for one sample.
    pub fn predict_row<C, S>(&self, row: &Matrix<T, U1, C, S>) -> Result<(Class, f64)>
    where
        C: Dim,
        S: RawStorage<T, U1, C>,
    {
        if row.ncols() != self.n_features {
            return Err(Error::Shape(format!("tree expects {} features, got {}", self.n_features, row.ncols())));
        }
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { class, minority_fraction, .. } => return Ok((*class, *minority_fraction)),
                Node::Split { feature, threshold, left, right } => {
                    id = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<T>) -> Result<Vec<Class>> {
        x.row_iter().map(|r| self.predict_row(&r).map(|p| p.0)).collect()
    }
}
