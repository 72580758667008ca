//! Random forests of information-gain decision trees.
//!
//! Each tree owns a seed derived from the forest seed and its index, so the
//! trained forest does not depend on how tree construction is scheduled
//! across threads.

mod tree;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{round_count, DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{self, stream};

pub use tree::{train_tree, DecisionTree, Node};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturesPerSplit {
    /// `floor(log2 |f|) + 1`
    Auto,
    Count(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub features_per_split: FeaturesPerSplit,
    /// `None` grows trees until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Bootstrap sample size as a fraction of the training set.
    pub bootstrap_fraction: f64,
    /// When false every tree sees the full training set in order.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            features_per_split: FeaturesPerSplit::Auto,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap_fraction: 1.0,
            bootstrap: true,
            seed: 1,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter("min_samples_leaf must be at least 1".into()));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bootstrap_fraction {} not in (0, 1]",
                self.bootstrap_fraction
            )));
        }
        if self.features_per_split == FeaturesPerSplit::Count(0) {
            return Err(Error::InvalidParameter("features_per_split must be at least 1".into()));
        }
        Ok(())
    }
}

/// Anything that labels a feature vector.
pub trait Predictor<T: Scalar> {
    fn n_features(&self) -> usize;

    fn predict(&self, features: &[T]) -> Result<u8>;

    fn predict_point(&self, p: &DataPoint<T>) -> Result<u8> {
        self.predict(&p.features)
    }
}

pub(crate) fn check_width<T>(features: &[T], expected: usize) -> Result<()> {
    if features.len() != expected {
        return Err(Error::FeatureCount {
            index: 0,
            found: features.len(),
            expected,
        });
    }
    Ok(())
}

/// Majority label of a vote tally; an exact tie goes to class 0.
pub fn majority(votes: [usize; 2]) -> u8 {
    u8::from(votes[1] > votes[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest<T> {
    trees: Vec<DecisionTree<T>>,
    config: ForestConfig,
    n_features: usize,
}

impl<T: Scalar> RandomForest<T> {
    pub fn trees(&self) -> &[DecisionTree<T>] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// Per-class tree votes.
    pub fn votes(&self, features: &[T]) -> Result<[usize; 2]> {
        check_width(features, self.n_features)?;
        let mut votes = [0usize; 2];
        for t in &self.trees {
            votes[t.classify(features) as usize] += 1;
        }
        Ok(votes)
    }

    /// Builds a forest from already trained trees.
    pub fn from_trees(trees: Vec<DecisionTree<T>>, config: ForestConfig) -> Result<Self> {
        let n_features = trees.first().map(|t| t.n_features()).ok_or(Error::EmptyDataset)?;
        if trees.iter().any(|t| t.n_features() != n_features) {
            return Err(Error::InvalidParameter("trees disagree on feature count".into()));
        }
        Ok(RandomForest {
            trees,
            config,
            n_features,
        })
    }

    /// Debug dump of the tree topology and thresholds.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl<T: Scalar> Predictor<T> for RandomForest<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, features: &[T]) -> Result<u8> {
        Ok(majority(self.votes(features)?))
    }
}

/// Seed of tree `index` of a forest seeded with `forest_seed`.
pub fn tree_seed(forest_seed: u64, index: usize) -> u64 {
    seed::derive(forest_seed, stream::TREE, index as u64)
}

/// Trains `cfg.n_trees` trees, each on its own bootstrap sample of
/// `round(bootstrap_fraction * |d|)` rows drawn with replacement. Trees are
/// built on the current rayon pool.
pub fn train_forest<T: Scalar>(d: &Dataset<T>, cfg: &ForestConfig) -> Result<RandomForest<T>> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = d.len();
    let sample_size = round_count(cfg.bootstrap_fraction * n as f64).max(1);
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let ts = tree_seed(cfg.seed, i);
            let rows: Vec<usize> = if cfg.bootstrap {
                let mut rng = seed::rng(seed::derive(ts, stream::BOOTSTRAP, 0));
                (0..sample_size).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            tree::grow(d.points(), d.n_features(), rows, cfg, ts)
        })
        .collect();
    Ok(RandomForest {
        trees,
        config: *cfg,
        n_features: d.n_features(),
    })
}

/// Percentage of `test` points that `model` labels correctly.
pub fn accuracy<T: Scalar, P: Predictor<T> + ?Sized>(model: &P, test: &Dataset<T>) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for p in test.points() {
        if model.predict_point(p)? == p.label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(u8, usize);

    impl Predictor<f64> for Constant {
        fn n_features(&self) -> usize {
            self.1
        }
        fn predict(&self, _: &[f64]) -> Result<u8> {
            Ok(self.0)
        }
    }

    fn stump(class: u8) -> DecisionTree<f64> {
        let d = Dataset::from_points(vec![DataPoint::new(vec![0.0], class)]).unwrap();
        train_tree(&d, &ForestConfig::default(), 0).unwrap()
    }

    fn noisy_blobs(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = seed::rng(seed);
        let points = (0..n)
            .map(|i| {
                let y = (i % 2) as u8;
                let shift = if y == 1 { 1.0 } else { 0.0 };
                let f = (0..4).map(|_| rng.gen::<f64>() + shift * rng.gen::<f64>()).collect();
                DataPoint::new(f, y)
            })
            .collect();
        Dataset::from_points(points).unwrap()
    }

    #[test]
    fn votes_and_tie_break() {
        let f = RandomForest::from_trees(vec![stump(1), stump(1), stump(1)], ForestConfig::default()).unwrap();
        assert_eq!(f.predict(&[3.0]).unwrap(), 1);
        let f = RandomForest::from_trees(vec![stump(1), stump(0)], ForestConfig::default()).unwrap();
        assert_eq!(f.votes(&[3.0]).unwrap(), [1, 1]);
        assert_eq!(f.predict(&[3.0]).unwrap(), 0);
        let mut trees = vec![stump(1); 17];
        trees.extend(vec![stump(0); 8]);
        let f = RandomForest::from_trees(trees, ForestConfig::default()).unwrap();
        assert_eq!(f.votes(&[0.0]).unwrap(), [8, 17]);
        assert_eq!(f.predict(&[0.0]).unwrap(), 1);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let f = RandomForest::from_trees(vec![stump(1)], ForestConfig::default()).unwrap();
        assert!(matches!(f.predict(&[1.0, 2.0]), Err(Error::FeatureCount { .. })));
    }

    #[test]
    fn accuracy_counts() {
        let points = vec![
            DataPoint::new(vec![0.0], 0),
            DataPoint::new(vec![0.0], 1),
            DataPoint::new(vec![0.0], 1),
            DataPoint::new(vec![0.0], 1),
        ];
        let d = Dataset::from_points(points).unwrap();
        assert_eq!(accuracy(&Constant(0, 1), &d).unwrap(), 25.0);
        assert_eq!(accuracy(&Constant(1, 1), &d).unwrap(), 75.0);
        let empty = Dataset::<f64>::from_points(Vec::new()).unwrap();
        assert!(accuracy(&Constant(0, 1), &empty).is_err());
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        for n in [10usize, 11, 101] {
            let d = noisy_blobs(n, 1);
            let zeros = d.class_counts()[0];
            let acc = accuracy(&Constant(0, 4), &d).unwrap();
            assert_eq!(acc, 100.0 * zeros as f64 / n as f64);
            assert!((acc - 50.0).abs() <= 100.0 / n as f64);
        }
    }

    #[test]
    fn single_unbagged_tree_forest_equals_tree() {
        let d = noisy_blobs(60, 2);
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            ..ForestConfig::default()
        };
        let forest = train_forest(&d, &cfg).unwrap();
        let tree = train_tree(&d, &cfg, tree_seed(cfg.seed, 0)).unwrap();
        assert_eq!(forest.trees(), &[tree]);
    }

    #[test]
    fn training_is_deterministic_across_pools() {
        let d = noisy_blobs(200, 3);
        let cfg = ForestConfig {
            n_trees: 24,
            ..ForestConfig::default()
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| train_forest(&d, &cfg)).unwrap();
        let b = four.install(|| train_forest(&d, &cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_give_different_trees() {
        let d = noisy_blobs(200, 4);
        let f = train_forest(
            &d,
            &ForestConfig {
                n_trees: 10,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let probe = noisy_blobs(100, 5);
        let first: Vec<u8> = probe.points().iter().map(|p| f.trees()[0].classify(&p.features)).collect();
        let differs = f.trees()[1..]
            .iter()
            .any(|t| probe.points().iter().zip(&first).any(|(p, &y)| t.classify(&p.features) != y));
        assert!(differs);
    }

    #[test]
    fn config_validation() {
        let d = noisy_blobs(10, 6);
        for bad in [
            ForestConfig {
                n_trees: 0,
                ..ForestConfig::default()
            },
            ForestConfig {
                bootstrap_fraction: 0.0,
                ..ForestConfig::default()
            },
            ForestConfig {
                min_samples_leaf: 0,
                ..ForestConfig::default()
            },
        ] {
            assert!(train_forest(&d, &bad).is_err());
        }
    }

    #[test]
    fn json_dump_has_topology() {
        let d = noisy_blobs(20, 7);
        let f = train_forest(
            &d,
            &ForestConfig {
                n_trees: 2,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
        assert_eq!(v["trees"].as_array().unwrap().len(), 2);
        assert!(v["trees"][0]["nodes"][0]["type"].is_string());
    }
}
