//! CSV renderings of evaluation reports.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{EvaluationReport, Outcome};
use crate::error::{Error, Result};
use crate::poison::Perturbation;

/// One averaged row per configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub perturbation: Perturbation,
    pub epsilon_p: f64,
    /// Empty for label flipping.
    pub epsilon_f: Option<f64>,
    pub n_models: usize,
    pub data_percent: f64,
    pub feature_percent: f64,
    pub repetitions: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub n_features: usize,
    pub mono_acc_clean: f64,
    pub mono_acc_poisoned: f64,
    pub mono_delta: f64,
    pub ens_acc_clean: f64,
    pub ens_acc_poisoned: f64,
    pub ens_delta: f64,
}

impl SummaryRow {
    pub fn from_report(r: &EvaluationReport) -> Self {
        let c = &r.config;
        SummaryRow {
            perturbation: c.perturbation,
            epsilon_p: c.epsilon_p,
            epsilon_f: c.perturbation.uses_features().then_some(c.epsilon_f),
            n_models: c.n_models,
            data_percent: c.data_percent,
            feature_percent: c.feature_percent,
            repetitions: r.repetitions.len(),
            train_size: r.train_size,
            test_size: r.test_size,
            n_features: r.n_features,
            mono_acc_clean: r.monolithic.acc_clean,
            mono_acc_poisoned: r.monolithic.acc_poisoned,
            mono_delta: r.monolithic.delta,
            ens_acc_clean: r.ensemble.acc_clean,
            ens_acc_poisoned: r.ensemble.acc_poisoned,
            ens_delta: r.ensemble.delta,
        }
    }

    pub fn monolithic(&self) -> Outcome {
        Outcome {
            acc_clean: self.mono_acc_clean,
            acc_poisoned: self.mono_acc_poisoned,
            delta: self.mono_delta,
        }
    }

    pub fn ensemble(&self) -> Outcome {
        Outcome {
            acc_clean: self.ens_acc_clean,
            acc_poisoned: self.ens_acc_poisoned,
            delta: self.ens_delta,
        }
    }
}

#[derive(Serialize)]
struct RepetitionRow {
    perturbation: Perturbation,
    epsilon_p: f64,
    epsilon_f: Option<f64>,
    n_models: usize,
    data_percent: f64,
    feature_percent: f64,
    repetition: usize,
    poisoned_points: usize,
    poisoned_features: usize,
    mono_acc_clean: f64,
    mono_acc_poisoned: f64,
    mono_delta: f64,
    ens_acc_clean: f64,
    ens_acc_poisoned: f64,
    ens_delta: f64,
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

/// One row per (configuration, repetition).
pub fn write_repetition_csv<'a, W: Write>(reports: impl IntoIterator<Item = &'a EvaluationReport>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        let c = &r.config;
        for rep in &r.repetitions {
            w.serialize(RepetitionRow {
                perturbation: c.perturbation,
                epsilon_p: c.epsilon_p,
                epsilon_f: c.perturbation.uses_features().then_some(c.epsilon_f),
                n_models: c.n_models,
                data_percent: c.data_percent,
                feature_percent: c.feature_percent,
                repetition: rep.repetition,
                poisoned_points: rep.poisoned_points,
                poisoned_features: rep.poisoned_features,
                mono_acc_clean: rep.monolithic.acc_clean,
                mono_acc_poisoned: rep.monolithic.acc_poisoned,
                mono_delta: rep.monolithic.delta,
                ens_acc_clean: rep.ensemble.acc_clean,
                ens_acc_poisoned: rep.ensemble.acc_poisoned,
                ens_delta: rep.ensemble.delta,
            })?;
        }
    }
    flush(w)
}

pub fn write_summary_csv<'a, W: Write>(reports: impl IntoIterator<Item = &'a EvaluationReport>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        w.serialize(SummaryRow::from_report(r))?;
    }
    flush(w)
}

pub fn read_summary_csv<R: Read>(reader: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Serialize)]
struct ResourceRow<'a> {
    coordinate: &'a str,
    repetition: usize,
    step: &'a str,
    wall_seconds: f64,
    cpu_user_seconds: Option<f64>,
    peak_memory_bytes: Option<u64>,
}

/// Per-step measurements, one row per (configuration, repetition, step).
/// Empty cells mark measurements the platform could not provide.
pub(crate) fn write_resources_csv<'a, W: Write>(
    reports: impl IntoIterator<Item = (String, &'a EvaluationReport)>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (id, r) in reports {
        for (rep, steps) in r.resources.iter().enumerate() {
            for (step, m) in steps {
                w.serialize(ResourceRow {
                    coordinate: &id,
                    repetition: rep,
                    step,
                    wall_seconds: m.wall_seconds,
                    cpu_user_seconds: m.cpu_user_seconds,
                    peak_memory_bytes: m.peak_memory_bytes,
                })?;
            }
        }
    }
    flush(w)
}
