//! Tabular binary-classification datasets: validation, class balancing,
//! train/test splitting and information-gain feature ranking.

mod csv_io;
mod infogain;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

pub use csv_io::{load_csv, read_csv};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint<T> {
    pub features: Vec<T>,
    pub label: u8,
}

impl<T: Scalar> DataPoint<T> {
    pub fn new(features: Vec<T>, label: u8) -> Self {
        DataPoint { features, label }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Poisoned,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    points: Vec<DataPoint<T>>,
    feature_names: Vec<String>,
    label_name: String,
    /// Raw label strings for classes 0 and 1.
    class_names: [String; 2],
    provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            seed: 0,
            stratified: true,
        }
    }
}

impl<T: Scalar> Dataset<T> {
    /// Builds an original dataset after checking that every point has one
    /// finite value per feature name and a label in {0, 1}.
    pub fn new(points: Vec<DataPoint<T>>, feature_names: Vec<String>) -> Result<Self> {
        let width = feature_names.len();
        for (index, p) in points.iter().enumerate() {
            if p.features.len() != width {
                return Err(Error::FeatureCount {
                    index,
                    found: p.features.len(),
                    expected: width,
                });
            }
            if p.label > 1 {
                return Err(Error::InvalidLabel(p.label));
            }
            if let Some(col) = p.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonNumericFeature {
                    row: index,
                    column: feature_names[col].clone(),
                    value: p.features[col].to_string(),
                });
            }
        }
        Ok(Dataset {
            points,
            feature_names,
            label_name: "label".to_string(),
            class_names: ["0".to_string(), "1".to_string()],
            provenance: Provenance::Original,
        })
    }

    /// Like [`Dataset::new`] with generated feature names `f0, f1, ...`.
    pub fn from_points(points: Vec<DataPoint<T>>) -> Result<Self> {
        let width = points.first().map_or(0, |p| p.features.len());
        Self::new(points, (0..width).map(|i| format!("f{i}")).collect())
    }

    pub fn with_class_names(mut self, label_name: impl Into<String>, class_names: [String; 2]) -> Self {
        self.label_name = label_name.into();
        self.class_names = class_names;
        self
    }

    pub fn points(&self) -> &[DataPoint<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn class_names(&self) -> &[String; 2] {
        &self.class_names
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for p in &self.points {
            counts[p.label as usize] += 1;
        }
        counts
    }

    /// Observed `[min, max]` of a feature, optionally restricted to one class.
    /// `None` when no point qualifies.
    pub fn feature_range(&self, feature: usize, class: Option<u8>) -> Option<(T, T)> {
        self.points
            .iter()
            .filter(|p| class.is_none_or(|c| p.label == c))
            .map(|p| p.features[feature])
            .fold(None, |acc, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    /// Same schema, new points. Used by transformations that keep validity.
    pub(crate) fn derive(&self, points: Vec<DataPoint<T>>, provenance: Provenance) -> Self {
        Dataset {
            points,
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
            class_names: self.class_names.clone(),
            provenance,
        }
    }

    /// Points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let points = indices
            .iter()
            .map(|&i| {
                self.points.get(i).cloned().ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: self.points.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.derive(points, self.provenance))
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Result<Self> {
        if let Some(&bad) = features.iter().find(|&&f| f >= self.n_features()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.n_features(),
            });
        }
        let points = self
            .points
            .iter()
            .map(|p| DataPoint::new(features.iter().map(|&f| p.features[f]).collect(), p.label))
            .collect();
        let mut out = self.derive(points, self.provenance);
        out.feature_names = features.iter().map(|&f| self.feature_names[f].clone()).collect();
        Ok(out)
    }

    /// Undersamples the majority class down to the minority cardinality.
    /// Minority points are all kept and the original row order is preserved.
    pub fn balance_classes(&self, seed: u64) -> Result<Self> {
        let counts = self.class_counts();
        for class in 0..2u8 {
            if counts[class as usize] == 0 {
                return Err(Error::EmptyClass(class));
            }
        }
        let majority = if counts[1] > counts[0] { 1u8 } else { 0u8 };
        let target = counts[0].min(counts[1]);
        let majority_rows: Vec<usize> = self.rows_of(majority);
        let mut rng = seed::rng(seed);
        let mut keep: Vec<usize> = sample(&mut rng, majority_rows.len(), target)
            .into_iter()
            .map(|i| majority_rows[i])
            .chain(self.rows_of(1 - majority))
            .collect();
        keep.sort_unstable();
        self.select(&keep)
    }

    fn rows_of(&self, class: u8) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.label == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// Row indices of the train and test parts, each ascending.
    ///
    /// `|test| = floor(test_fraction * |d|)`. With stratification every class
    /// contributes `floor(test_fraction * n_c)` rows, and any shortfall is
    /// handed to the classes with the largest fractional remainders.
    pub fn split_indices(&self, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "test fraction {} not in (0, 1)",
                spec.test_fraction
            )));
        }
        let n = self.len();
        let n_test = floor_count(spec.test_fraction * n as f64);
        if n_test == 0 || n_test >= n {
            return Err(Error::InvalidSplit(format!(
                "fraction {} of {n} points leaves an empty train or test part",
                spec.test_fraction
            )));
        }
        let mut rng = seed::rng(spec.seed);
        let mut test = if spec.stratified {
            let groups = [self.rows_of(0), self.rows_of(1)];
            let exact: Vec<f64> = groups.iter().map(|g| spec.test_fraction * g.len() as f64).collect();
            let mut quota: Vec<usize> = exact.iter().map(|&e| floor_count(e)).collect();
            let mut by_remainder = [0usize, 1];
            by_remainder.sort_by(|&a, &b| {
                let ra = exact[a] - quota[a] as f64;
                let rb = exact[b] - quota[b] as f64;
                rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
            });
            let mut missing = n_test - quota.iter().sum::<usize>();
            for &c in by_remainder.iter().cycle() {
                if missing == 0 {
                    break;
                }
                if quota[c] < groups[c].len() {
                    quota[c] += 1;
                    missing -= 1;
                }
            }
            let mut picked = Vec::with_capacity(n_test);
            for (group, &q) in groups.iter().zip(&quota) {
                let mut shuffled = group.clone();
                shuffled.shuffle(&mut rng);
                picked.extend_from_slice(&shuffled[..q]);
            }
            picked
        } else {
            sample(&mut rng, n, n_test).into_vec()
        };
        test.sort_unstable();
        let mut in_test = vec![false; n];
        for &i in &test {
            in_test[i] = true;
        }
        let train = (0..n).filter(|&i| !in_test[i]).collect();
        Ok((train, test))
    }

    pub fn split_train_test(&self, spec: &SplitSpec) -> Result<(Self, Self)> {
        let (train, test) = self.split_indices(spec)?;
        Ok((self.select(&train)?, self.select(&test)?))
    }

    /// Information gain of each feature at its best midpoint threshold.
    pub fn info_gains(&self) -> Vec<f64> {
        infogain::gains(self)
    }

    /// The `k` most informative features, by descending gain, ties broken
    /// by ascending index.
    pub fn info_gain_rank(&self, k: usize) -> Result<Vec<usize>> {
        if k > self.n_features() {
            return Err(Error::TooManyFeatures {
                requested: k,
                available: self.n_features(),
            });
        }
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(infogain::rank(&self.info_gains(), k))
    }

    /// Count of points per distinct label, keyed by raw class name.
    pub fn class_summary(&self) -> BTreeMap<String, usize> {
        let counts = self.class_counts();
        self.class_names.iter().cloned().zip(counts).collect()
    }
}

/// Round-half-up count for `rate * size`, tolerant to representation error.
pub(crate) fn round_count(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

fn floor_count(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}
