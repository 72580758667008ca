//! The evaluation process: split, poison, build training sets, train the
//! monolithic and ensemble models on clean and poisoned data, test them on
//! the held-out split and report the accuracy change `delta`.
//!
//! All randomness derives from one master seed (see [`crate::seed`]):
//!
//! * split seed: `derive(seed, SPLIT, 0)`, or `derive(seed, SPLIT, r)` per
//!   repetition `r` when `resplit` is set
//! * poisoning seed of repetition `r`: `derive(seed, POISON, r)`
//! * training seed of repetition `r`: `derive(seed, TRAIN, r)`, shared by the
//!   clean and poisoned models so they differ only by their data
//! * data/feature subsetting: `derive(seed, SUBSET, 0)`

pub mod meter;
mod report;
mod sweep;
mod table;

use std::collections::BTreeMap;

use md5::{Digest, Md5};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::{round_count, Dataset, SplitSpec};
use crate::ensemble::{build_assignment, train_monolithic, train_with_assignment, EnsembleConfig, HashAlgorithm};
use crate::error::{Error, Result};
use crate::forest::{accuracy, ForestConfig};
use crate::poison::{poison, Perturbation, PoisonSpec};
use crate::scalar::Scalar;
use crate::seed::{self, stream};

pub use meter::{meter, Measurement};
pub use report::{read_summary_csv, write_repetition_csv, write_summary_csv, SummaryRow};
pub use sweep::{run_sweep, Coordinate, Grid, SweepOutcome};
pub use table::{render_tables, Metric};

/// Accuracy change of a model trained on poisoned data relative to the same
/// model trained on clean data. Negative means the poisoning hurt.
pub fn delta(acc_poisoned: f64, acc_clean: f64) -> f64 {
    acc_poisoned - acc_clean
}

pub const DEFAULT_SEED: u64 = 20_240_101;
pub const DEFAULT_REPETITIONS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Source description, echoed into reports.
    pub dataset: Option<String>,
    pub test_fraction: f64,
    pub stratified: bool,
    /// Draw a fresh train/test split for every repetition.
    pub resplit: bool,
    pub perturbation: Perturbation,
    pub epsilon_p: f64,
    /// Ignored for label flipping.
    pub epsilon_f: f64,
    pub n_models: usize,
    pub hash_algorithm: HashAlgorithm,
    /// Forest hyperparameters; the seed field is replaced per repetition.
    pub forest: ForestConfig,
    pub repetitions: usize,
    pub seed: u64,
    /// Percentage of training points kept (seeded subsample).
    pub data_percent: f64,
    /// Percentage of features kept (seeded subsample).
    pub feature_percent: f64,
    pub meter_resources: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            test_fraction: 0.2,
            stratified: true,
            resplit: false,
            perturbation: Perturbation::LabelFlipping,
            epsilon_p: 0.0,
            epsilon_f: 0.0,
            n_models: 1,
            hash_algorithm: HashAlgorithm::Md5,
            forest: ForestConfig::default(),
            repetitions: DEFAULT_REPETITIONS,
            seed: DEFAULT_SEED,
            data_percent: 100.0,
            feature_percent: 100.0,
            meter_resources: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        for (name, v) in [("data_percent", self.data_percent), ("feature_percent", self.feature_percent)] {
            if !(v > 0.0 && v <= 100.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside (0, 100]")));
            }
        }
        self.poison_spec(0).validate()?;
        self.ensemble_config(0).validate()
    }

    pub fn split_spec(&self, repetition: usize) -> SplitSpec {
        let index = if self.resplit { repetition as u64 } else { 0 };
        SplitSpec {
            test_fraction: self.test_fraction,
            stratified: self.stratified,
            seed: seed::derive(self.seed, stream::SPLIT, index),
        }
    }

    pub fn poison_spec(&self, repetition: usize) -> PoisonSpec {
        PoisonSpec {
            kind: self.perturbation,
            epsilon_p: self.epsilon_p,
            epsilon_f: if self.perturbation.uses_features() { self.epsilon_f } else { 0.0 },
            seed: seed::derive(self.seed, stream::POISON, repetition as u64),
        }
    }

    pub fn train_seed(&self, repetition: usize) -> u64 {
        seed::derive(self.seed, stream::TRAIN, repetition as u64)
    }

    pub fn ensemble_config(&self, repetition: usize) -> EnsembleConfig {
        EnsembleConfig {
            n_models: self.n_models,
            hash_algorithm: self.hash_algorithm,
            forest: ForestConfig {
                seed: self.train_seed(repetition),
                ..self.forest
            },
        }
    }
}

/// Accuracies of one model family trained on clean and on poisoned data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub acc_clean: f64,
    pub acc_poisoned: f64,
    pub delta: f64,
}

impl Outcome {
    pub fn new(acc_clean: f64, acc_poisoned: f64) -> Self {
        Outcome {
            acc_clean,
            acc_poisoned,
            delta: delta(acc_poisoned, acc_clean),
        }
    }

    /// Field-wise mean of the accuracies; `delta` is recomputed from them.
    pub fn mean(outcomes: &[Outcome]) -> Self {
        let n = outcomes.len().max(1) as f64;
        let clean = outcomes.iter().map(|o| o.acc_clean).sum::<f64>() / n;
        let poisoned = outcomes.iter().map(|o| o.acc_poisoned).sum::<f64>() / n;
        Outcome::new(clean, poisoned)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub repetition: usize,
    pub split_seed: u64,
    pub poison_seed: u64,
    pub train_seed: u64,
    pub poisoned_points: usize,
    pub poisoned_features: usize,
    /// MD5 of the held-out test set rendered as CSV.
    pub test_digest: String,
    pub monolithic: Outcome,
    pub ensemble: Outcome,
}

/// Per-step measurements of one repetition, keyed by step name.
pub type StepMeasurements = BTreeMap<String, Measurement>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ExperimentConfig,
    pub train_size: usize,
    pub test_size: usize,
    pub n_features: usize,
    /// Means over repetitions.
    pub monolithic: Outcome,
    pub ensemble: Outcome,
    pub repetitions: Vec<RepetitionReport>,
    /// Wall/CPU/memory per repetition. Not serialized with the report since
    /// it varies between otherwise identical runs.
    #[serde(skip)]
    pub resources: Vec<StepMeasurements>,
}

impl EvaluationReport {
    fn from_repetitions(
        config: ExperimentConfig,
        sizes: (usize, usize, usize),
        repetitions: Vec<RepetitionReport>,
        resources: Vec<StepMeasurements>,
    ) -> Self {
        let mono: Vec<Outcome> = repetitions.iter().map(|r| r.monolithic).collect();
        let ens: Vec<Outcome> = repetitions.iter().map(|r| r.ensemble).collect();
        EvaluationReport {
            config,
            train_size: sizes.0,
            test_size: sizes.1,
            n_features: sizes.2,
            monolithic: Outcome::mean(&mono),
            ensemble: Outcome::mean(&ens),
            repetitions,
            resources,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Mean of each step's measurements over repetitions. Optional fields
    /// are averaged only when every repetition reported them.
    pub fn mean_resources(&self) -> StepMeasurements {
        let mut out = StepMeasurements::new();
        let n = self.resources.len();
        if n == 0 {
            return out;
        }
        for step in self.resources[0].keys() {
            let ms: Vec<&Measurement> = self.resources.iter().filter_map(|r| r.get(step)).collect();
            let k = ms.len() as f64;
            let cpu: Option<Vec<f64>> = ms.iter().map(|m| m.cpu_user_seconds).collect();
            let mem: Option<Vec<u64>> = ms.iter().map(|m| m.peak_memory_bytes).collect();
            out.insert(
                step.clone(),
                Measurement {
                    wall_seconds: ms.iter().map(|m| m.wall_seconds).sum::<f64>() / k,
                    cpu_user_seconds: cpu.map(|v| v.iter().sum::<f64>() / k),
                    peak_memory_bytes: mem.and_then(|v| v.into_iter().max()),
                },
            );
        }
        out
    }

    pub fn resources_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Resources<'a> {
            mean: StepMeasurements,
            repetitions: &'a [StepMeasurements],
        }
        Ok(serde_json::to_string_pretty(&Resources {
            mean: self.mean_resources(),
            repetitions: &self.resources,
        })? + "\n")
    }
}

fn test_digest<T: Scalar>(test: &Dataset<T>) -> Result<String> {
    let mut buf = Vec::new();
    test.write_csv(&mut buf)?;
    Ok(Md5::digest(&buf).iter().map(|b| format!("{b:02x}")).collect())
}

fn timed<R>(enabled: bool, f: impl FnOnce() -> R) -> (R, Measurement) {
    if enabled {
        meter(f)
    } else {
        let start = std::time::Instant::now();
        let out = f();
        (
            out,
            Measurement {
                wall_seconds: start.elapsed().as_secs_f64(),
                ..Measurement::default()
            },
        )
    }
}

/// Applies the configured point and feature subsampling. Feature selection
/// applies to both parts; point selection only to the training part.
fn subset<T: Scalar>(cfg: &ExperimentConfig, train: Dataset<T>, test: Dataset<T>) -> Result<(Dataset<T>, Dataset<T>)> {
    let mut rng = seed::rng(seed::derive(cfg.seed, stream::SUBSET, 0));
    let (mut train, mut test) = (train, test);
    if cfg.feature_percent < 100.0 {
        let nf = train.n_features();
        let k = round_count(cfg.feature_percent * nf as f64 / 100.0).clamp(1, nf);
        let mut keep = sample(&mut rng, nf, k).into_vec();
        keep.sort_unstable();
        train = train.select_features(&keep)?;
        test = test.select_features(&keep)?;
    }
    if cfg.data_percent < 100.0 {
        let n = train.len();
        let k = round_count(cfg.data_percent * n as f64 / 100.0).clamp(1, n);
        let mut keep = sample(&mut rng, n, k).into_vec();
        keep.sort_unstable();
        train = train.select(&keep)?;
    }
    Ok((train, test))
}

/// Runs the full process for one configuration.
pub fn run_experiment<T: Scalar>(d: &Dataset<T>, cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    let mut reports = run_group(d, cfg, &[cfg.n_models])?;
    Ok(reports.pop().expect("one report per ensemble size"))
}

/// Runs one configuration for several ensemble sizes at once. The split,
/// poisoned training set and monolithic models are shared by all sizes;
/// reports come back in the order of `n_models`.
pub fn run_group<T: Scalar>(d: &Dataset<T>, cfg: &ExperimentConfig, n_models: &[usize]) -> Result<Vec<EvaluationReport>> {
    let configs: Vec<ExperimentConfig> = n_models
        .iter()
        .map(|&n| ExperimentConfig {
            n_models: n,
            ..cfg.clone()
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let meter_on = cfg.meter_resources;
    let mut reps: Vec<Vec<RepetitionReport>> = vec![Vec::new(); configs.len()];
    let mut resources: Vec<Vec<StepMeasurements>> = vec![Vec::new(); configs.len()];
    let mut sizes = (0, 0, 0);
    let mut cached_split: Option<(Dataset<T>, Dataset<T>)> = None;

    for r in 0..cfg.repetitions {
        let mut shared = StepMeasurements::new();
        let split_spec = cfg.split_spec(r);
        let (train, test) = match (&cached_split, cfg.resplit) {
            (Some(parts), false) => parts.clone(),
            _ => {
                let (parts, m) = timed(meter_on, || -> Result<_> {
                    let (train, test) = d.split_train_test(&split_spec)?;
                    subset(cfg, train, test)
                });
                shared.insert("split".into(), m);
                let parts = parts.map_err(Error::in_step("split"))?;
                cached_split = Some(parts.clone());
                parts
            }
        };
        sizes = (train.len(), test.len(), train.n_features());
        let digest = test_digest(&test)?;

        let poison_spec = cfg.poison_spec(r);
        let (poisoned, m) = timed(meter_on, || poison(&train, &poison_spec));
        shared.insert("poison".into(), m);
        let (poisoned, targets) = poisoned.map_err(Error::in_step("poison"))?;

        let forest_cfg = ForestConfig {
            seed: cfg.train_seed(r),
            ..cfg.forest
        };
        let (mono_clean, m) = timed(meter_on, || train_monolithic(&train, &forest_cfg));
        shared.insert("train_monolithic_clean".into(), m);
        let (mono_poisoned, m) = timed(meter_on, || train_monolithic(&poisoned, &forest_cfg));
        shared.insert("train_monolithic_poisoned".into(), m);
        let mono_clean = mono_clean.map_err(Error::in_step("train"))?;
        let mono_poisoned = mono_poisoned.map_err(Error::in_step("train"))?;
        let (mono, m) = timed(meter_on, || -> Result<Outcome> {
            Ok(Outcome::new(accuracy(&mono_clean, &test)?, accuracy(&mono_poisoned, &test)?))
        });
        shared.insert("test_monolithic".into(), m);
        let mono = mono.map_err(Error::in_step("test"))?;
        drop((mono_clean, mono_poisoned));

        for (slot, c) in configs.iter().enumerate() {
            let mut steps = shared.clone();
            let ens_cfg = c.ensemble_config(r);
            let mut ensemble_for = |data: &Dataset<T>, tag: &str| -> Result<_> {
                let (assignment, m) = timed(meter_on, || build_assignment(data, &ens_cfg));
                steps.insert(format!("assignment_{tag}"), m);
                let assignment = assignment.map_err(Error::in_step("assignment"))?;
                let (model, m) = timed(meter_on, || train_with_assignment(data, &ens_cfg, assignment));
                steps.insert(format!("train_ensemble_{tag}"), m);
                model.map_err(Error::in_step("train"))
            };
            let ens_clean = ensemble_for(&train, "clean")?;
            let ens_poisoned = ensemble_for(&poisoned, "poisoned")?;
            let (ens, m) = timed(meter_on, || -> Result<Outcome> {
                Ok(Outcome::new(accuracy(&ens_clean, &test)?, accuracy(&ens_poisoned, &test)?))
            });
            steps.insert("test_ensemble".into(), m);
            let ens = ens.map_err(Error::in_step("test"))?;

            reps[slot].push(RepetitionReport {
                repetition: r,
                split_seed: split_spec.seed,
                poison_seed: poison_spec.seed,
                train_seed: forest_cfg.seed,
                poisoned_points: targets.point_indices.len(),
                poisoned_features: if c.perturbation.uses_features() {
                    targets.feature_indices.len()
                } else {
                    0
                },
                test_digest: digest.clone(),
                monolithic: mono,
                ensemble: ens,
            });
            resources[slot].push(steps);
        }

        if test_digest(&test)? != digest {
            return Err(Error::Step {
                step: "test",
                source: Box::new(Error::InvalidParameter("held-out test set changed during the run".into())),
            });
        }
    }

    Ok(configs
        .into_iter()
        .zip(reps)
        .zip(resources)
        .map(|((c, r), res)| EvaluationReport::from_repetitions(c, sizes, r, res))
        .collect())
}
