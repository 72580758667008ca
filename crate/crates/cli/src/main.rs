use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand};
use hashens::dataset::load_csv;
use hashens::ensemble::build_assignment;
use hashens::pipeline::{
    read_summary_csv, render_tables, run_experiment, run_sweep, write_repetition_csv, write_summary_csv, ExperimentConfig,
    Grid, Metric, DEFAULT_REPETITIONS, DEFAULT_SEED,
};
use hashens::{Dataset, ForestConfig, Perturbation};

#[derive(Parser)]
#[command(name = "hashens", version, about = "Hash-based random-forest ensembles under training-set poisoning")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Balance classes and/or keep the top-K features by information gain.
    Prepare {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        label: String,
        /// Undersample the majority class to the minority size.
        #[arg(long)]
        balance: bool,
        /// Keep only the K most informative features.
        #[arg(long, value_name = "K")]
        infogain: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment: poison, train both models, report delta.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        /// Label column (default: last column).
        #[arg(long)]
        label: Option<String>,
        #[arg(long, value_name = "KIND")]
        perturbation: Perturbation,
        #[arg(long, value_name = "P")]
        epsilon_points: f64,
        /// Required unless the perturbation is label-flipping.
        #[arg(long, value_name = "F")]
        epsilon_features: Option<f64>,
        #[arg(long, value_name = "N")]
        n_models: usize,
        #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
        repetitions: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every coordinate of a grid file, resuming into an existing output directory.
    Sweep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        grid: PathBuf,
        /// Base seed; a `seed` entry in the grid file takes precedence.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print result tables from a run or sweep output directory.
    Table {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, default_value = "delta")]
        metric: Metric,
    },
}

#[derive(clap::Args)]
struct Common {
    /// Trees per forest.
    #[arg(long, default_value_t = ForestConfig::default().n_trees)]
    trees: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Draw a new train/test split in every repetition.
    #[arg(long)]
    resplit: bool,
}

impl Common {
    fn config(&self, dataset: &Path, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            dataset: Some(dataset.display().to_string()),
            test_fraction: self.test_fraction,
            resplit: self.resplit,
            forest: ForestConfig {
                n_trees: self.trees,
                ..ForestConfig::default()
            },
            seed,
            ..ExperimentConfig::default()
        }
    }
}

fn last_column(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or("");
    match header.rsplit(',').next().map(|c| c.trim().trim_matches('"')) {
        Some(c) if !c.is_empty() => Ok(c.to_string()),
        _ => bail!("{}: no header row", path.display()),
    }
}

fn load(path: &Path, label: Option<&str>) -> Result<Dataset> {
    let label = match label {
        Some(l) => l.to_string(),
        None => last_column(path)?,
    };
    load_csv(path, &label).with_context(|| format!("loading {}", path.display()))
}

fn counts(d: &Dataset) -> String {
    let [a, b] = d.class_counts();
    let names = d.class_names();
    format!("{} points ({}: {a}, {}: {b}), {} features", d.len(), names[0], names[1], d.n_features())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn prepare(dataset: &Path, label: &str, balance: bool, infogain: Option<usize>, seed: u64, out: &Path) -> Result<()> {
    let mut d = load(dataset, Some(label))?;
    println!("before: {}", counts(&d));
    if balance {
        d = d.balance_classes(seed)?;
    }
    if let Some(k) = infogain {
        let mut keep = d.info_gain_rank(k)?;
        keep.sort_unstable();
        d = d.select_features(&keep)?;
    }
    println!("after:  {}", counts(&d));
    d.save_csv(out)?;
    Ok(())
}

fn run(d: &Dataset, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    for w in cfg.ensemble_config(0).warnings() {
        eprintln!("warning: {w}");
    }
    let report = run_experiment(d, cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("report.json"), report.to_json()?)?;
    fs::write(out.join("resources.json"), report.resources_json()?)?;
    write_repetition_csv([&report], create(&out.join("results.csv"))?)?;
    write_summary_csv([&report], create(&out.join("summary.csv"))?)?;

    let (train, _) = d.split_train_test(&cfg.split_spec(0))?;
    build_assignment(&train, &cfg.ensemble_config(0))?.write_csv(create(&out.join("assignment_clean.csv"))?)?;

    let (m, e) = (&report.monolithic, &report.ensemble);
    println!(
        "{} eps_p={} N={}: monolithic delta={:.3} ({:.3} -> {:.3}), ensemble delta={:.3} ({:.3} -> {:.3})",
        cfg.perturbation, cfg.epsilon_p, cfg.n_models, m.delta, m.acc_clean, m.acc_poisoned, e.delta, e.acc_clean, e.acc_poisoned
    );
    Ok(())
}

fn sweep(d: &Dataset, grid_path: &Path, base: &ExperimentConfig, out: &Path) -> Result<ExitCode> {
    let text = fs::read_to_string(grid_path).with_context(|| format!("reading {}", grid_path.display()))?;
    let grid = Grid::parse(&text).with_context(|| format!("parsing {}", grid_path.display()))?;
    let outcome = run_sweep(d, &grid, base, Some(out))?;
    let total = outcome.results.len();
    let failed: Vec<_> = outcome.failures().collect();
    for (c, e) in &failed {
        eprintln!("failed {}: {e}", c.id());
    }
    println!(
        "{total} coordinates: {} computed, {} reused, {} failed",
        total - outcome.skipped - failed.len(),
        outcome.skipped,
        failed.len()
    );
    Ok(if failed.len() == total { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn table(dir: &Path, metric: Metric) -> Result<()> {
    let path = dir.join("summary.csv");
    let file = fs::File::open(&path).with_context(|| format!("{} holds no results", dir.display()))?;
    let rows = read_summary_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
    if rows.is_empty() {
        bail!("{} has no rows", path.display());
    }
    print!("{}", render_tables(&rows, metric));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Prepare {
            dataset,
            label,
            balance,
            infogain,
            seed,
            out,
        } => prepare(&dataset, &label, balance, infogain, seed, &out).map(|_| ExitCode::SUCCESS),
        Command::Run {
            dataset,
            label,
            perturbation,
            epsilon_points,
            epsilon_features,
            n_models,
            repetitions,
            seed,
            common,
            out,
        } => {
            if perturbation.uses_features() && epsilon_features.is_none() {
                Cli::command()
                    .error(
                        clap::error::ErrorKind::MissingRequiredArgument,
                        format!("--epsilon-features is required for {perturbation}"),
                    )
                    .exit();
            }
            let cfg = ExperimentConfig {
                perturbation,
                epsilon_p: epsilon_points,
                epsilon_f: epsilon_features.unwrap_or(0.0),
                n_models,
                repetitions,
                ..common.config(&dataset, seed)
            };
            load(&dataset, label.as_deref())
                .and_then(|d| run(&d, &cfg, &out))
                .map(|_| ExitCode::SUCCESS)
        }
        Command::Sweep {
            dataset,
            label,
            grid,
            seed,
            common,
            out,
        } => load(&dataset, label.as_deref()).and_then(|d| sweep(&d, &grid, &common.config(&dataset, seed), &out)),
        Command::Table { input, metric } => table(&input, metric).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
