//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcn::GcnConfig;
use crate::gradcheck::run_gradient_check;
use crate::homophily::HomophilyReport;
use crate::io::{
    load_dataset, load_report, save_dataset, save_report, write_scores_csv, AnalysisReport,
    DatasetSummary, Decisions, QuadrantSection, RunMetadata, RunReport, REPORT_SCHEMA_VERSION,
};
use crate::protocol::{run_grid, ExperimentResult, FeatureMode, GridConfig, ModelKind};
use crate::quadrant::{
    assign_quadrants, averaged_class_metrics, quadrant_summary, Thresholds, DEFAULT_F1_THRESHOLD,
    DEFAULT_HOMOPHILY_THRESHOLD,
};
use crate::synth::{generate_dataset, SyntheticSpec};
use crate::tuning::tune;

pub const THREADS_ENV: &str = "DIAGNOSE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "gcn-diagnose",
    version,
    about = "Diagnose when graph structure helps node classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Homophily report for a dataset container.
    Analyze {
        dir: PathBuf,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate the experiment grid.
    Run(RunArgs),
    /// Quadrant assignment from a results file.
    Quadrant {
        results: PathBuf,
        #[arg(long, default_value_t = DEFAULT_HOMOPHILY_THRESHOLD)]
        homophily_threshold: f64,
        #[arg(long, default_value_t = DEFAULT_F1_THRESHOLD)]
        f1_threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic planted-partition dataset container.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        homophily: f64,
        #[arg(long)]
        degree: f64,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        signal: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the GCN gradients.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Hyperparameter search over the fixed search spaces.
    Tune {
        dir: PathBuf,
        /// Masking rate in percent.
        #[arg(long, default_value_t = 0)]
        masking: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "gcn,lr,svm")]
    models: Vec<ModelKind>,
    /// Masking rates in percent.
    #[arg(long, value_delimiter = ',', default_value = "0,50,90")]
    masking: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "original")]
    features: Vec<FeatureMode>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of replicate seeds, starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write a tidy per-class F1 table.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
}

fn masking_rates(pcts: &[u32]) -> Result<Vec<f64>> {
    pcts.iter()
        .map(|&p| {
            if p >= 100 {
                Err(Error::InvalidParameter {
                    name: "masking",
                    reason: format!("{p}% hides every training label"),
                })
            } else {
                Ok(p as f64 / 100.0)
            }
        })
        .collect()
}

fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => save_report(value, path),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(value).expect("report types serialize")
            );
            Ok(())
        }
    }
}

/// Quadrant section for a finished grid, or `None` when the grid lacks the
/// GCN/LR cells at all three masking rates.
pub fn quadrant_section(
    homophily: &HomophilyReport,
    grid: &ExperimentResult,
    thresholds: Thresholds,
) -> Result<Option<QuadrantSection>> {
    let averages = match averaged_class_metrics(grid) {
        Ok(a) => a,
        Err(Error::MissingCell(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let assignment = assign_quadrants(
        &homophily.per_class,
        &averages.lr_f1,
        &averages.delta_f1,
        thresholds,
    )?;
    let summary = quadrant_summary(&assignment);
    Ok(Some(QuadrantSection {
        assignment,
        summary,
    }))
}

fn run(args: RunArgs) -> Result<()> {
    let dataset = load_dataset(&args.dir)?;
    let cfg = GridConfig {
        models: args.models,
        masking_rates: masking_rates(&args.masking)?,
        feature_modes: args.features,
        seeds: (0..args.seeds.max(1))
            .map(|k| args.seed.wrapping_add(k))
            .collect(),
        gcn: GcnConfig {
            hidden: args.hidden,
            dropout_rate: args.dropout,
            learning_rate: args.lr,
            weight_decay: args.weight_decay,
            max_epochs: args.epochs,
            patience: args.patience,
            seed: args.seed,
        },
        ..GridConfig::default()
    };
    let grid = run_grid(&dataset, &cfg)?;
    let homophily = HomophilyReport::compute(&dataset.graph, &dataset.labels, dataset.num_classes)?;
    let quadrant = quadrant_section(&homophily, &grid, Thresholds::default())?;
    for cell in grid.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "warning: cell {} m={} {} seed={} failed: {}",
            cell.model,
            cell.masking_rate,
            cell.feature_mode,
            cell.seed,
            cell.error.as_deref().unwrap_or_default()
        );
    }
    if let Some(csv) = &args.csv {
        write_scores_csv(&grid, csv)?;
    }
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: DatasetSummary::of(&dataset),
        homophily,
        decisions: Decisions::for_config(&cfg),
        grid,
        quadrant,
        metadata: RunMetadata::now(),
    };
    save_report(&report, &args.out)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Analyze { dir, out } => {
            let dataset = load_dataset(&dir)?;
            let report = AnalysisReport {
                schema_version: REPORT_SCHEMA_VERSION,
                dataset: DatasetSummary::of(&dataset),
                homophily: HomophilyReport::compute(
                    &dataset.graph,
                    &dataset.labels,
                    dataset.num_classes,
                )?,
            };
            emit(&report, out.as_ref())
        }
        Command::Run(args) => run(args),
        Command::Quadrant {
            results,
            homophily_threshold,
            f1_threshold,
            out,
        } => {
            let report = load_report(&results)?;
            let thresholds = Thresholds {
                homophily: homophily_threshold,
                f1: f1_threshold,
            };
            let section = quadrant_section(&report.homophily, &report.grid, thresholds)?.ok_or_else(|| {
                Error::MissingCell("results need gcn and lr cells at masking 0, 50 and 90 with original features".into())
            })?;
            emit(&section, out.as_ref())
        }
        Command::Synth {
            n,
            classes,
            homophily,
            degree,
            dim,
            signal,
            seed,
            out,
        } => {
            let spec = SyntheticSpec::new(n, classes, homophily, degree)
                .with_features(dim, signal)
                .with_seed(seed);
            save_dataset(&generate_dataset(&spec)?, &out)
        }
        Command::Gradcheck { instances, seed } => {
            let report = run_gradient_check(instances, seed)?;
            for (k, inst) in report.instances.iter().enumerate() {
                println!(
                    "instance {k:3}: n={:2} d={} h={} C={} coords={:3} max_rel={:.3e} {}",
                    inst.n,
                    inst.d,
                    inst.hidden,
                    inst.classes,
                    inst.coordinates_checked,
                    inst.max_rel_error,
                    if inst.failures == 0 { "ok" } else { "FAIL" }
                );
            }
            println!("max relative error {:.3e}", report.max_rel_error);
            if report.passed {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name: "gradients",
                    reason: "finite-difference check failed".into(),
                })
            }
        }
        Command::Tune {
            dir,
            masking,
            seed,
            out,
        } => {
            let dataset = load_dataset(&dir)?;
            let rate = masking_rates(&[masking])?[0];
            emit(&tune(&dataset, rate, seed)?, out.as_ref())
        }
    }
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&k| k > 0)
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns 0 on success, 2 for usage errors and 1 for runtime failures.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match thread_cap() {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => {
                eprintln!("error: cannot build worker pool: {e}");
                return 1;
            }
        },
        None => execute(cli.command),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
