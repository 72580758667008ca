//! Hash-partitioned ensembles of random forests.
//!
//! Training points are routed to `N` disjoint partitions by hashing their
//! feature values, then dealt round-robin into `N` equally sized training
//! sets, one per forest. Predictions are combined by majority vote.

use std::io::Write;

use md5::{Digest, Md5};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{check_width, majority, train_forest, ForestConfig, Predictor, RandomForest};
use crate::scalar::Scalar;
use crate::seed::{self, stream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[non_exhaustive]
pub enum HashAlgorithm {
    #[default]
    Md5,
}

impl HashAlgorithm {
    pub fn digest(self, text: &str) -> Vec<u8> {
        match self {
            HashAlgorithm::Md5 => Md5::digest(text.as_bytes()).to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_models: usize,
    pub hash_algorithm: HashAlgorithm,
    pub forest: ForestConfig,
}

impl EnsembleConfig {
    pub fn new(n_models: usize, forest: ForestConfig) -> Self {
        EnsembleConfig {
            n_models,
            hash_algorithm: HashAlgorithm::Md5,
            forest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_models == 0 {
            return Err(Error::InvalidParameter("number of models must be at least 1".into()));
        }
        self.forest.validate()
    }

    /// Non-fatal configuration remarks.
    pub fn warnings(&self) -> Vec<String> {
        if self.n_models.is_multiple_of(2) {
            vec![format!(
                "even number of models ({}); vote ties resolve to class 0",
                self.n_models
            )]
        } else {
            Vec::new()
        }
    }
}

/// Concatenates the canonical decimal rendering of each feature, without
/// separators. The label is not part of the string.
///
/// Distinct points can collide (`<1, 23>` and `<12, 3>` both give `"123"`)
/// and then always share a partition.
pub fn serialize_point<T: Scalar>(features: &[T]) -> String {
    features.iter().map(|v| v.canonical()).collect()
}

/// Digest of the serialized point read as an unsigned big-endian integer,
/// reduced modulo `n`. Index `k` is the 1-based partition `k + 1`.
pub fn hash_partition_index<T: Scalar>(features: &[T], n: usize, alg: HashAlgorithm) -> usize {
    assert!(n >= 1, "partition count must be positive");
    let digest = alg.digest(&serialize_point(features));
    let modulus = n as u128;
    // Horner over 64-bit limbs keeps this correct for digests wider than u128.
    let mut rem: u128 = 0;
    for chunk in digest.chunks(8) {
        let mut limb = 0u128;
        for &b in chunk {
            limb = (limb << 8) | b as u128;
        }
        rem = ((rem << (8 * chunk.len())) | limb) % modulus;
    }
    rem as usize
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    n_models: usize,
    /// Hash partition of every point.
    partition_of: Vec<usize>,
    /// Training set of every point.
    training_set_of: Vec<usize>,
    /// Point indices of each training set, in dealing order.
    training_sets: Vec<Vec<usize>>,
}

impl PartitionAssignment {
    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn partition_of(&self) -> &[usize] {
        &self.partition_of
    }

    pub fn training_set_of(&self) -> &[usize] {
        &self.training_set_of
    }

    pub fn training_sets(&self) -> &[Vec<usize>] {
        &self.training_sets
    }

    /// Point indices of each partition, ascending.
    pub fn partitions(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.n_models];
        for (i, &p) in self.partition_of.iter().enumerate() {
            parts[p].push(i);
        }
        parts
    }

    /// Audit export: `point_index,partition,training_set` (0-based).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["point_index", "partition", "training_set"])?;
        for (i, (p, t)) in self.partition_of.iter().zip(&self.training_set_of).enumerate() {
            w.write_record([i.to_string(), p.to_string(), t.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Hashes every point into a partition, then walks the partitions in
/// ascending order (points in dataset order within each) dealing them to
/// training sets `0, 1, ..., N-1, 0, ...` with one global counter.
pub fn build_assignment<T: Scalar>(d: &Dataset<T>, cfg: &EnsembleConfig) -> Result<PartitionAssignment> {
    cfg.validate()?;
    let n = cfg.n_models;
    if d.len() < n {
        return Err(Error::TooFewPoints {
            points: d.len(),
            models: n,
        });
    }
    let partition_of: Vec<usize> = d
        .points()
        .iter()
        .map(|p| hash_partition_index(&p.features, n, cfg.hash_algorithm))
        .collect();
    Ok(deal(partition_of, n))
}

fn deal(partition_of: Vec<usize>, n: usize) -> PartitionAssignment {
    let mut members = vec![Vec::new(); n];
    for (i, &p) in partition_of.iter().enumerate() {
        members[p].push(i);
    }
    let mut training_set_of = vec![0; partition_of.len()];
    let mut training_sets = vec![Vec::new(); n];
    for (counter, point) in members.into_iter().flatten().enumerate() {
        let set = counter % n;
        training_set_of[point] = set;
        training_sets[set].push(point);
    }
    PartitionAssignment {
        n_models: n,
        partition_of,
        training_set_of,
        training_sets,
    }
}

/// Forest configuration of ensemble member `index`. Member 0 is also the
/// configuration of the monolithic model, which makes a one-member ensemble
/// identical to it.
pub fn member_config(base: &ForestConfig, index: usize) -> ForestConfig {
    ForestConfig {
        seed: seed::derive(base.seed, stream::MEMBER, index as u64),
        ..*base
    }
}

/// Single forest over the whole training set.
pub fn train_monolithic<T: Scalar>(d: &Dataset<T>, forest: &ForestConfig) -> Result<RandomForest<T>> {
    train_forest(d, &member_config(forest, 0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel<T> {
    forests: Vec<RandomForest<T>>,
    assignment: PartitionAssignment,
    config: EnsembleConfig,
    n_features: usize,
}

impl<T: Scalar> EnsembleModel<T> {
    pub fn forests(&self) -> &[RandomForest<T>] {
        &self.forests
    }

    pub fn assignment(&self) -> &PartitionAssignment {
        &self.assignment
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    /// One vote per forest.
    pub fn member_predictions(&self, features: &[T]) -> Result<Vec<u8>> {
        check_width(features, self.n_features)?;
        self.forests.iter().map(|f| f.predict(features)).collect()
    }
}

impl<T: Scalar> Predictor<T> for EnsembleModel<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, features: &[T]) -> Result<u8> {
        let mut votes = [0usize; 2];
        for y in self.member_predictions(features)? {
            votes[y as usize] += 1;
        }
        Ok(majority(votes))
    }
}

/// Trains forest `i` on training set `i`. Members train concurrently on the
/// current rayon pool; the result does not depend on scheduling.
pub fn train_ensemble<T: Scalar>(d: &Dataset<T>, cfg: &EnsembleConfig) -> Result<EnsembleModel<T>> {
    let assignment = build_assignment(d, cfg)?;
    train_with_assignment(d, cfg, assignment)
}

/// Like [`train_ensemble`] with an assignment already built for `d`.
pub fn train_with_assignment<T: Scalar>(
    d: &Dataset<T>,
    cfg: &EnsembleConfig,
    assignment: PartitionAssignment,
) -> Result<EnsembleModel<T>> {
    cfg.validate()?;
    if assignment.n_models != cfg.n_models || assignment.partition_of.len() != d.len() {
        return Err(Error::InvalidParameter("assignment does not match dataset and configuration".into()));
    }
    let forests = assignment
        .training_sets()
        .par_iter()
        .enumerate()
        .map(|(i, rows)| train_forest(&d.select(rows)?, &member_config(&cfg.forest, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel {
        forests,
        assignment,
        config: *cfg,
        n_features: d.n_features(),
    })
}
