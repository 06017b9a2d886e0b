//! Trial-parallel execution with an order-stable merge, and output files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::{CliError, Result};
use crate::experiments::{series, trial_seed, Trial};
use crate::plot::{alpha_scatter, plot_points, write_plot_csv, PlotPoint};
use crate::summary::{summarize, Summary};
use crate::table::{Metadata, ResultTable, Row};

pub const RESULTS_FILE: &str = "results.csv";
pub const PLOT_FILE: &str = "plot.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub plot: Vec<PlotPoint>,
    pub summary: Summary,
    pub metadata: Metadata,
}

/// Runs every (series, trial) pair; `jobs` bounds the worker count.
///
/// Rows come out in (series, trial) order whatever the worker count.
pub fn run(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    let all_series = series(cfg);
    let work: Vec<(usize, usize)> = (0..all_series.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let execute = || {
        work.par_iter()
            .map(|&(s, t)| {
                Trial {
                    cfg,
                    series: &all_series[s],
                    trial: t,
                    seed: trial_seed(cfg.seed, s, t),
                }
                .run()
            })
            .collect::<Result<Vec<Vec<Row>>>>()
    };
    let per_trial = match jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {j} workers: {e}")))?
            .install(execute)?,
        None => execute()?,
    };

    let table = ResultTable {
        config_hash: cfg.hash(),
        rows: per_trial.into_iter().flatten().collect(),
    };
    table.check_bounds()?;

    let mut plot = plot_points(cfg.experiment, &table.rows);
    if cfg.experiment == ExperimentId::Fig6Alpha {
        plot.extend(alpha_scatter(&table.rows));
    }
    let bandwidth = match cfg.experiment {
        ExperimentId::KpcaDemo => cfg.kpca.components,
        _ => cfg.bandwidth,
    };
    let summary = summarize(&table, Some(bandwidth))?;
    let metadata = Metadata {
        config_hash: table.config_hash.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.as_str().to_string(),
        rows: table.rows.len(),
        bandwidth,
        config: serde_json::to_value(cfg)?,
    };
    Ok(RunOutput {
        table,
        plot,
        summary,
        metadata,
    })
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| CliError::io(path, e))
}

/// Writes the results, plot series, summary and metadata into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    // Re-check right before anything reaches disk.
    out.table.check_bounds()?;
    let experiment = ExperimentId::parse(&out.metadata.experiment)?;

    let results = dir.join(RESULTS_FILE);
    out.table.write_csv(create(&results)?)?;
    let plot = dir.join(PLOT_FILE);
    write_plot_csv(experiment, &out.plot, create(&plot)?)?;
    let summary = dir.join(SUMMARY_FILE);
    serde_json::to_writer_pretty(create(&summary)?, &out.summary)?;
    let metadata = dir.join(METADATA_FILE);
    serde_json::to_writer_pretty(create(&metadata)?, &out.metadata)?;
    Ok(vec![results, plot, summary, metadata])
}

/// Reads a results CSV and summarizes it, taking the bandwidth from the
/// neighbouring `metadata.json` when there is one.
pub fn summarize_file(path: &Path) -> Result<Summary> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let table = ResultTable::read_csv(file)?;
    let meta_path = path.with_file_name(METADATA_FILE);
    let bandwidth = match fs::read_to_string(&meta_path) {
        Ok(text) => {
            let meta: Metadata = serde_json::from_str(&text)?;
            if meta.config_hash != table.config_hash {
                return Err(CliError::Check(format!(
                    "{} belongs to config {}, table has {}",
                    meta_path.display(),
                    meta.config_hash,
                    table.config_hash
                )));
            }
            Some(meta.bandwidth)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(CliError::io(meta_path, e)),
    };
    summarize(&table, bandwidth)
}
