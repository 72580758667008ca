use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{FeaturesPerSplit, ForestConfig, Predictor};
use crate::criterion::{best_threshold, Threshold, GAIN_EPSILON};
use crate::dataset::{DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node<T> {
    Leaf {
        class: u8,
        counts: [usize; 2],
    },
    /// `value <= threshold` goes to `left`.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// Binary classification tree stored as a node arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<T> {
    nodes: Vec<Node<T>>,
    n_features: usize,
}

impl<T: Scalar> DecisionTree<T> {
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of split nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub(crate) fn classify(&self, features: &[T]) -> u8 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class, .. } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if features[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

impl<T: Scalar> Predictor<T> for DecisionTree<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, features: &[T]) -> Result<u8> {
        super::check_width(features, self.n_features)?;
        Ok(self.classify(features))
    }
}

/// Grows a tree on the whole of `d`.
pub fn train_tree<T: Scalar>(d: &Dataset<T>, cfg: &ForestConfig, tree_seed: u64) -> Result<DecisionTree<T>> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(grow(d.points(), d.n_features(), (0..d.len()).collect(), cfg, tree_seed))
}

pub(super) fn features_per_split(cfg: &ForestConfig, n_features: usize) -> usize {
    match cfg.features_per_split {
        FeaturesPerSplit::Auto => {
            if n_features == 0 {
                0
            } else {
                (n_features as f64).log2().floor() as usize + 1
            }
        }
        FeaturesPerSplit::Count(k) => k,
    }
    .min(n_features)
    .max(1.min(n_features))
}

/// Grows a tree over `rows` (indices into `points`, duplicates allowed).
pub(super) fn grow<T: Scalar>(
    points: &[DataPoint<T>],
    n_features: usize,
    mut rows: Vec<usize>,
    cfg: &ForestConfig,
    tree_seed: u64,
) -> DecisionTree<T> {
    let mut builder = Builder {
        points,
        cfg,
        n_features,
        k: features_per_split(cfg, n_features),
        rng: seed::rng(tree_seed),
        nodes: Vec::new(),
        column: Vec::with_capacity(rows.len()),
        order: (0..n_features).collect(),
    };
    builder.build(&mut rows, 0);
    DecisionTree {
        nodes: builder.nodes,
        n_features,
    }
}

struct Builder<'a, T> {
    points: &'a [DataPoint<T>],
    cfg: &'a ForestConfig,
    n_features: usize,
    k: usize,
    rng: Rng,
    nodes: Vec<Node<T>>,
    column: Vec<(T, u8)>,
    order: Vec<usize>,
}

impl<T: Scalar> Builder<'_, T> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let mut counts = [0usize; 2];
        for &r in rows.iter() {
            counts[self.points[r].label as usize] += 1;
        }
        let id = self.nodes.len();
        let class = u8::from(counts[1] > counts[0]);
        self.nodes.push(Node::Leaf { class, counts });

        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_reached = self.cfg.max_depth.is_some_and(|m| depth >= m);
        let too_small = rows.len() < 2 * self.cfg.min_samples_leaf.max(1);
        if pure || depth_reached || too_small {
            return id;
        }
        let Some((feature, split)) = self.choose_split(rows) else {
            return id;
        };

        let mut n_left = 0;
        for i in 0..rows.len() {
            if self.points[rows[i]].features[feature] <= split.value {
                rows.swap(i, n_left);
                n_left += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(n_left);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold: split.value,
            left,
            right,
        };
        id
    }

    /// Evaluates `k` randomly drawn features; when none of them yields a
    /// positive gain, keeps drawing until one does or all are exhausted.
    /// Among evaluated features the highest gain wins, ties to the lowest
    /// feature index. If no feature has a positive gain but some feature
    /// still separates the rows, the lowest such feature is split at its
    /// first threshold so consistent data can always be fitted.
    fn choose_split(&mut self, rows: &[usize]) -> Option<(usize, Threshold<T>)> {
        self.order.shuffle(&mut self.rng);
        let mut best: Option<(usize, Threshold<T>)> = None;
        let mut fallback: Option<(usize, Threshold<T>)> = None;
        for (evaluated, pos) in (0..self.n_features).enumerate() {
            if evaluated >= self.k && best.is_some() {
                break;
            }
            let feature = self.order[pos];
            self.column.clear();
            self.column
                .extend(rows.iter().map(|&r| (self.points[r].features[feature], self.points[r].label)));
            let Some(t) = best_threshold(&mut self.column, self.cfg.min_samples_leaf) else {
                continue;
            };
            if t.gain <= GAIN_EPSILON {
                if fallback.as_ref().is_none_or(|(f, _)| feature < *f) {
                    fallback = Some((feature, t));
                }
                continue;
            }
            let better = match &best {
                None => true,
                Some((bf, bt)) => t.gain > bt.gain || (t.gain == bt.gain && feature < *bf),
            };
            if better {
                best = Some((feature, t));
            }
        }
        best.or(fallback)
    }
}
