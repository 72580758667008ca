//! Parameter sweeps over ensemble size, perturbation and poisoning rates,
//! with resumable per-coordinate output.
//!
//! Output directory layout:
//!
//! ```text
//! sweep.json                  grid and base configuration
//! coordinates/<id>.json       report of one coordinate (deterministic)
//! coordinates/<id>.resources.json
//! results.csv                 one row per (coordinate, repetition)
//! summary.csv                 one averaged row per coordinate
//! table_<group>.csv           epsilon_p rows x N columns, delta and accuracy
//! series_delta.csv            delta vs epsilon_p per N
//! resources.csv               per-step wall/CPU/memory measurements
//! series_resources.csv        training time/CPU/memory vs N, |D|%, |f|%
//! failures.csv                only when some coordinates failed
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{write_repetition_csv, write_resources_csv, write_summary_csv};
use super::{run_group, EvaluationReport, ExperimentConfig, StepMeasurements};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::poison::Perturbation;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_models: Vec<usize>,
    pub perturbations: Vec<Perturbation>,
    pub epsilon_points: Vec<f64>,
    pub epsilon_features: Vec<f64>,
    pub data_percent: Vec<f64>,
    pub feature_percent: Vec<f64>,
    pub repetitions: Option<usize>,
    pub seed: Option<u64>,
}

impl Grid {
    /// Parses the `key = v1, v2, ...` format. Blank lines and `#` comments
    /// are ignored. `n_models`, `perturbations` and `epsilon_points` are
    /// required; `epsilon_features` is required when a feature perturbation
    /// is listed.
    pub fn parse(text: &str) -> Result<Grid> {
        let mut seen: BTreeMap<String, (usize, Vec<String>)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, values) = line.split_once('=').ok_or_else(|| Error::Grid {
                line: line_no,
                message: "expected `key = value, ...`".into(),
            })?;
            let key = key.trim().to_string();
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                return Err(Error::Grid {
                    line: line_no,
                    message: format!("`{key}` has no values"),
                });
            }
            if seen.insert(key.clone(), (line_no, values)).is_some() {
                return Err(Error::Grid {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }

        fn list<V: std::str::FromStr>(entry: Option<&(usize, Vec<String>)>, key: &str) -> Result<Option<Vec<V>>> {
            let Some((line, values)) = entry else { return Ok(None) };
            values
                .iter()
                .map(|v| {
                    v.parse().map_err(|_| Error::Grid {
                        line: *line,
                        message: format!("bad value `{v}` for `{key}`"),
                    })
                })
                .collect::<Result<Vec<V>>>()
                .map(Some)
        }
        fn single<V: std::str::FromStr>(entry: Option<&(usize, Vec<String>)>, key: &str) -> Result<Option<V>> {
            match list::<V>(entry, key)? {
                None => Ok(None),
                Some(mut v) if v.len() == 1 => Ok(v.pop()),
                Some(_) => Err(Error::Grid {
                    line: entry.map_or(0, |e| e.0),
                    message: format!("`{key}` takes a single value"),
                }),
            }
        }

        const KEYS: [&str; 8] = [
            "n_models",
            "perturbations",
            "epsilon_points",
            "epsilon_features",
            "data_percent",
            "feature_percent",
            "repetitions",
            "seed",
        ];
        if let Some((key, (line, _))) = seen.iter().find(|(k, _)| !KEYS.contains(&k.as_str())) {
            return Err(Error::Grid {
                line: *line,
                message: format!("unknown key `{key}`"),
            });
        }
        let required = |key: &str| Error::Grid {
            line: 0,
            message: format!("missing required key `{key}`"),
        };
        let perturbations: Vec<Perturbation> = list(seen.get("perturbations"), "perturbations")?.ok_or_else(|| required("perturbations"))?;
        let needs_features = perturbations.iter().any(|k| k.uses_features());
        let epsilon_features = list(seen.get("epsilon_features"), "epsilon_features")?;
        if needs_features && epsilon_features.is_none() {
            return Err(required("epsilon_features"));
        }
        let grid = Grid {
            n_models: list(seen.get("n_models"), "n_models")?.ok_or_else(|| required("n_models"))?,
            perturbations,
            epsilon_points: list(seen.get("epsilon_points"), "epsilon_points")?.ok_or_else(|| required("epsilon_points"))?,
            epsilon_features: epsilon_features.unwrap_or_default(),
            data_percent: list(seen.get("data_percent"), "data_percent")?.unwrap_or_else(|| vec![100.0]),
            feature_percent: list(seen.get("feature_percent"), "feature_percent")?.unwrap_or_else(|| vec![100.0]),
            repetitions: single(seen.get("repetitions"), "repetitions")?,
            seed: single(seen.get("seed"), "seed")?,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(Error::Grid { line: 0, message });
        if self.n_models.contains(&0) {
            return bad("n_models must be at least 1".into());
        }
        for (key, values) in [("epsilon_points", &self.epsilon_points), ("epsilon_features", &self.epsilon_features)] {
            if let Some(v) = values.iter().find(|v| !(0.0..=100.0).contains(*v)) {
                return bad(format!("{key} value {v} outside [0, 100]"));
            }
        }
        for (key, values) in [("data_percent", &self.data_percent), ("feature_percent", &self.feature_percent)] {
            if let Some(v) = values.iter().find(|&&v| !(v > 0.0 && v <= 100.0)) {
                return bad(format!("{key} value {v} outside (0, 100]"));
            }
        }
        if self.repetitions == Some(0) {
            return bad("repetitions must be at least 1".into());
        }
        Ok(())
    }

    /// All coordinates in output order: perturbation, data %, feature %,
    /// epsilon_f, epsilon_p, N (each in grid order). Label flipping gets one
    /// coordinate per epsilon_p regardless of the feature rates.
    pub fn coordinates(&self) -> Vec<Coordinate> {
        let mut out = Vec::new();
        for &kind in &self.perturbations {
            let feature_rates: Vec<Option<f64>> = if kind.uses_features() {
                self.epsilon_features.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for &dp in &self.data_percent {
                for &fp in &self.feature_percent {
                    for &ef in &feature_rates {
                        for &ep in &self.epsilon_points {
                            for &n in &self.n_models {
                                out.push(Coordinate {
                                    perturbation: kind,
                                    epsilon_p: ep,
                                    epsilon_f: ef,
                                    n_models: n,
                                    data_percent: dp,
                                    feature_percent: fp,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub perturbation: Perturbation,
    pub epsilon_p: f64,
    pub epsilon_f: Option<f64>,
    pub n_models: usize,
    pub data_percent: f64,
    pub feature_percent: f64,
}

impl Coordinate {
    /// File-name-safe identifier, e.g. `zeroing_p10_f35_n21`.
    pub fn id(&self) -> String {
        let mut id = format!("{}_p{}", self.perturbation, self.epsilon_p);
        if let Some(ef) = self.epsilon_f {
            id += &format!("_f{ef}");
        }
        id += &format!("_n{}", self.n_models);
        if self.data_percent != 100.0 {
            id += &format!("_d{}", self.data_percent);
        }
        if self.feature_percent != 100.0 {
            id += &format!("_x{}", self.feature_percent);
        }
        id
    }

    /// Identifier of everything but the ensemble size.
    pub(crate) fn group_id(&self) -> String {
        Coordinate { n_models: 1, ..*self }.id().replace("_n1", "")
    }

    pub fn config(&self, base: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            perturbation: self.perturbation,
            epsilon_p: self.epsilon_p,
            epsilon_f: self.epsilon_f.unwrap_or(0.0),
            n_models: self.n_models,
            data_percent: self.data_percent,
            feature_percent: self.feature_percent,
            ..base.clone()
        }
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    /// Every coordinate with its report or failure message, in grid order.
    pub results: Vec<(Coordinate, std::result::Result<EvaluationReport, String>)>,
    /// Coordinates loaded from a previous run instead of recomputed.
    pub skipped: usize,
}

impl SweepOutcome {
    pub fn reports(&self) -> impl Iterator<Item = &EvaluationReport> {
        self.results.iter().filter_map(|(_, r)| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (&Coordinate, &String)> {
        self.results.iter().filter_map(|(c, r)| r.as_ref().err().map(|e| (c, e)))
    }
}

#[derive(Serialize, Deserialize, PartialEq)]
struct Manifest {
    grid: Grid,
    base: ExperimentConfig,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn load_existing(dir: &Path, c: &Coordinate) -> Option<EvaluationReport> {
    let text = fs::read_to_string(dir.join(format!("{}.json", c.id()))).ok()?;
    let mut report: EvaluationReport = serde_json::from_str(&text).ok()?;
    if let Ok(res) = fs::read_to_string(dir.join(format!("{}.resources.json", c.id()))) {
        #[derive(Deserialize)]
        struct Resources {
            repetitions: Vec<StepMeasurements>,
        }
        if let Ok(r) = serde_json::from_str::<Resources>(&res) {
            report.resources = r.repetitions;
        }
    }
    Some(report)
}

/// Runs every grid coordinate. Coordinates sharing everything but `N` are
/// computed together (one split, one poisoning and one pair of monolithic
/// models per repetition). With `out` set, reports are written as they
/// complete and coordinates already present there are loaded instead of
/// recomputed. A failing group is recorded and the sweep goes on.
pub fn run_sweep<T: Scalar>(d: &Dataset<T>, grid: &Grid, base: &ExperimentConfig, out: Option<&Path>) -> Result<SweepOutcome> {
    grid.validate()?;
    let coords = grid.coordinates();
    if coords.is_empty() {
        return Err(Error::Grid {
            line: 0,
            message: "grid has no coordinates".into(),
        });
    }
    let base = ExperimentConfig {
        repetitions: grid.repetitions.unwrap_or(base.repetitions),
        seed: grid.seed.unwrap_or(base.seed),
        ..base.clone()
    };
    let coord_dir = out.map(|o| o.join("coordinates"));
    if let (Some(out), Some(coord_dir)) = (out, &coord_dir) {
        fs::create_dir_all(coord_dir).map_err(|e| Error::io(coord_dir, e))?;
        let manifest = Manifest {
            grid: grid.clone(),
            base: base.clone(),
        };
        let path = out.join("sweep.json");
        if let Ok(existing) = fs::read_to_string(&path) {
            let previous: Option<Manifest> = serde_json::from_str(&existing).ok();
            if previous.as_ref() != Some(&manifest) {
                return Err(Error::InvalidParameter(format!(
                    "{} holds a different sweep; use a fresh output directory",
                    out.display()
                )));
            }
        }
        write_file(&path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    }

    let mut groups: Vec<(String, Vec<Coordinate>)> = Vec::new();
    for c in &coords {
        let key = c.group_id();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(*c),
            None => groups.push((key, vec![*c])),
        }
    }

    let mut done: BTreeMap<String, std::result::Result<EvaluationReport, String>> = BTreeMap::new();
    let mut skipped = 0;
    for (_, members) in &groups {
        let mut missing = Vec::new();
        for c in members {
            match coord_dir.as_deref().and_then(|dir| load_existing(dir, c)) {
                Some(r) => {
                    skipped += 1;
                    done.insert(c.id(), Ok(r));
                }
                None => missing.push(*c),
            }
        }
        if missing.is_empty() {
            continue;
        }
        let ns: Vec<usize> = missing.iter().map(|c| c.n_models).collect();
        let results: Vec<std::result::Result<EvaluationReport, String>> = match run_group(d, &missing[0].config(&base), &ns) {
            Ok(reports) => reports.into_iter().map(Ok).collect(),
            // One bad N sinks the whole group; retry members alone so the
            // failure lands only on the coordinates that cause it.
            Err(e) if missing.len() == 1 => vec![Err(e.to_string())],
            Err(_) => missing
                .iter()
                .map(|c| {
                    run_group(d, &c.config(&base), &[c.n_models])
                        .map(|mut r| r.remove(0))
                        .map_err(|e| e.to_string())
                })
                .collect(),
        };
        for (c, r) in missing.iter().zip(results) {
            if let (Some(dir), Ok(r)) = (&coord_dir, &r) {
                write_file(&dir.join(format!("{}.json", c.id())), &r.to_json()?)?;
                write_file(&dir.join(format!("{}.resources.json", c.id())), &r.resources_json()?)?;
            }
            done.insert(c.id(), r);
        }
    }

    let results: Vec<_> = coords
        .iter()
        .map(|c| (*c, done.remove(&c.id()).expect("every coordinate was processed")))
        .collect();
    let outcome = SweepOutcome { results, skipped };
    if let Some(out) = out {
        write_outputs(out, grid, &outcome)?;
    }
    Ok(outcome)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_outputs(out: &Path, grid: &Grid, outcome: &SweepOutcome) -> Result<()> {
    let reports: Vec<&EvaluationReport> = outcome.reports().collect();
    write_repetition_csv(reports.iter().copied(), create(&out.join("results.csv"))?)?;
    write_summary_csv(reports.iter().copied(), create(&out.join("summary.csv"))?)?;
    write_tables(out, grid, outcome)?;
    write_delta_series(out, outcome)?;
    let with_ids = outcome
        .results
        .iter()
        .filter_map(|(c, r)| r.as_ref().ok().map(|r| (c.id(), r)));
    write_resources_csv(with_ids, create(&out.join("resources.csv"))?)?;
    write_resource_series(out, outcome)?;

    let failures_path = out.join("failures.csv");
    let failures: Vec<_> = outcome.failures().collect();
    if failures.is_empty() {
        let _ = fs::remove_file(&failures_path);
    } else {
        let mut w = csv::Writer::from_writer(create(&failures_path)?);
        w.write_record(["coordinate", "error"])?;
        for (c, e) in failures {
            w.write_record([c.id().as_str(), e.as_str()])?;
        }
        w.flush().map_err(|e| Error::io(&failures_path, e))?;
    }
    Ok(())
}

/// Table-shaped CSV per (perturbation, epsilon_f, data %, feature %):
/// rows are epsilon_p, columns are N with the monolithic model as N = 1.
fn write_tables(out: &Path, grid: &Grid, outcome: &SweepOutcome) -> Result<()> {
    let mut tables: Vec<(String, Vec<(&Coordinate, &EvaluationReport)>)> = Vec::new();
    for (c, r) in &outcome.results {
        let Ok(r) = r else { continue };
        let key = c.group_id().replacen(&format!("_p{}", c.epsilon_p), "", 1);
        match tables.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push((c, r)),
            None => tables.push((key, vec![(c, r)])),
        }
    }
    let ns: Vec<usize> = grid.n_models.iter().copied().filter(|&n| n != 1).collect();
    for (key, cells) in tables {
        let mut w = csv::Writer::from_writer(create(&out.join(format!("table_{key}.csv")))?);
        let mut header = vec!["epsilon_p".to_string(), "N=1 delta".into(), "N=1 accuracy".into()];
        for n in &ns {
            header.push(format!("N={n} delta"));
            header.push(format!("N={n} accuracy"));
        }
        w.write_record(&header)?;
        for &ep in &grid.epsilon_points {
            let row: Vec<_> = cells.iter().filter(|(c, _)| c.epsilon_p == ep).collect();
            let Some((_, first)) = row.first() else { continue };
            let mut record = vec![ep.to_string(), first.monolithic.delta.to_string(), first.monolithic.acc_poisoned.to_string()];
            for n in &ns {
                match row.iter().find(|(c, _)| c.n_models == *n) {
                    Some((_, r)) => {
                        record.push(r.ensemble.delta.to_string());
                        record.push(r.ensemble.acc_poisoned.to_string());
                    }
                    None => record.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

fn write_delta_series(out: &Path, outcome: &SweepOutcome) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        perturbation: Perturbation,
        epsilon_f: Option<f64>,
        data_percent: f64,
        feature_percent: f64,
        n_models: usize,
        epsilon_p: f64,
        delta: f64,
        acc_clean: f64,
        acc_poisoned: f64,
    }
    let mut w = csv::Writer::from_writer(create(&out.join("series_delta.csv"))?);
    let mut monolithic_done = std::collections::BTreeSet::new();
    for (c, r) in &outcome.results {
        let Ok(r) = r else { continue };
        let row = |n, o: &super::Outcome| Row {
            perturbation: c.perturbation,
            epsilon_f: c.epsilon_f,
            data_percent: c.data_percent,
            feature_percent: c.feature_percent,
            n_models: n,
            epsilon_p: c.epsilon_p,
            delta: o.delta,
            acc_clean: o.acc_clean,
            acc_poisoned: o.acc_poisoned,
        };
        if monolithic_done.insert(c.group_id()) {
            w.serialize(row(1, &r.monolithic))?;
        }
        if c.n_models != 1 {
            w.serialize(row(c.n_models, &r.ensemble))?;
        }
    }
    w.flush().map_err(|e| Error::io(out, e))
}

fn write_resource_series(out: &Path, outcome: &SweepOutcome) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        n_models: usize,
        data_percent: f64,
        feature_percent: f64,
        perturbation: Perturbation,
        epsilon_p: f64,
        epsilon_f: Option<f64>,
        train_wall_seconds: f64,
        train_cpu_user_seconds: Option<f64>,
        peak_memory_bytes: Option<u64>,
    }
    let mut w = csv::Writer::from_writer(create(&out.join("series_resources.csv"))?);
    let mut monolithic_done = std::collections::BTreeSet::new();
    for (c, r) in &outcome.results {
        let Ok(r) = r else { continue };
        let mean = r.mean_resources();
        let row = |n: usize, train: &str, assignment: Option<&str>| {
            let t = mean.get(train).copied().unwrap_or_default();
            let peak = [Some(train), assignment]
                .into_iter()
                .flatten()
                .filter_map(|s| mean.get(s).and_then(|m| m.peak_memory_bytes))
                .max();
            Row {
                n_models: n,
                data_percent: c.data_percent,
                feature_percent: c.feature_percent,
                perturbation: c.perturbation,
                epsilon_p: c.epsilon_p,
                epsilon_f: c.epsilon_f,
                train_wall_seconds: t.wall_seconds,
                train_cpu_user_seconds: t.cpu_user_seconds,
                peak_memory_bytes: peak,
            }
        };
        if monolithic_done.insert(c.group_id()) {
            w.serialize(row(1, "train_monolithic_clean", None))?;
        }
        if c.n_models != 1 {
            w.serialize(row(c.n_models, "train_ensemble_clean", Some("assignment_clean")))?;
        }
    }
    w.flush().map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL_GRID: &str = "
        # full settings grid
        n_models = 3, 5, 7, 9, 11, 13, 15, 17, 19, 21
        perturbations = zeroing, noising, out-of-ranging, label-flipping
        epsilon_points = 10, 15, 20, 25, 30, 35
        epsilon_features = 10, 15, 20, 25, 30, 35
    ";

    #[test]
    fn full_grid_size() {
        let g = Grid::parse(FULL_GRID).unwrap();
        assert_eq!(g.coordinates().len(), 10 * (3 * 36 + 6));
        assert_eq!(g.data_percent, vec![100.0]);
        assert_eq!(g.repetitions, None);
    }

    #[test]
    fn singleton_grid() {
        let g = Grid::parse("n_models = 3\nperturbations = label-flipping\nepsilon_points = 10\n").unwrap();
        let c = g.coordinates();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].id(), "label-flipping_p10_n3");
        assert_eq!(c[0].group_id(), "label-flipping_p10");
    }

    #[test]
    fn coordinate_ids() {
        let c = Coordinate {
            perturbation: Perturbation::OutOfRanging,
            epsilon_p: 12.5,
            epsilon_f: Some(35.0),
            n_models: 21,
            data_percent: 50.0,
            feature_percent: 100.0,
        };
        assert_eq!(c.id(), "out-of-ranging_p12.5_f35_n21_d50");
        assert_eq!(c.group_id(), "out-of-ranging_p12.5_f35_d50");
    }

    #[test]
    fn parse_errors() {
        let cases = [
            ("n_models = 3\nperturbations = zeroing\nepsilon_points = 10\n", "epsilon_features"),
            ("n_models = 3\nepsilon_points = 10\n", "perturbations"),
            ("n_models = 3\nperturbations = flipping\nepsilon_points = 10\n", "bad value"),
            ("n_models = 3\nn_models = 5\n", "duplicate"),
            ("colour = red\n", "unknown key"),
            ("n_models 3\n", "expected"),
            ("n_models = 0\nperturbations = label-flipping\nepsilon_points = 10\n", "at least 1"),
            ("n_models = 3\nperturbations = label-flipping\nepsilon_points = 110\n", "outside"),
            ("n_models = 3\nperturbations = label-flipping\nepsilon_points = 10\nseed = 1, 2\n", "single value"),
            ("n_models =\n", "no values"),
        ];
        for (text, needle) in cases {
            let err = Grid::parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }
}
