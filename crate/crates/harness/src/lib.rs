//! Seeded experiment runner for the `multiclock` simulator.
//!
//! A run loads a TOML configuration, compiles the pulse sequences of the
//! chosen experiment, simulates them shot by shot and feeds the estimation
//! pipeline. Outputs are plain text: a long-format result table, a report in
//! text and JSON form, the representative compiled sequence and the
//! effective configuration. All randomness derives from the configured seed
//! through the streams `(seed, experiment, point)` → `(…, "laser", shot)` and
//! `(…, "spam", shot, site)`, so identical inputs give byte-identical files.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod report;
pub mod selftest;
pub mod table;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, ExperimentKind, Overrides, Validated};
pub use error::{HarnessError, HarnessResult};
pub use experiments::{run, RunOutput};
pub use report::Report;
pub use table::{ResultRow, ResultTable};

pub const RESULTS_FILE: &str = "results.csv";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const SEQUENCE_FILE: &str = "sequence.txt";
pub const CONFIG_FILE: &str = "config.toml";
pub const SHOTS_FILE: &str = "shots.csv";

/// A finished run and where its files went.
#[derive(Debug, Clone)]
pub struct Completed {
    pub output: RunOutput,
    pub out_dir: PathBuf,
}

/// Loads, overrides, validates, runs and writes.
pub fn execute(config_path: &Path, overrides: &Overrides) -> HarnessResult<Completed> {
    let mut config = ExperimentConfig::load(config_path)?;
    config.apply(overrides);
    execute_config(&config)
}

pub fn execute_config(config: &ExperimentConfig) -> HarnessResult<Completed> {
    let v = config.validate()?;
    let output = run(config, &v)?;
    let out_dir = v.output_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(v.kind.name()));
    write_outputs(&output, config, &out_dir)?;
    Ok(Completed { output, out_dir })
}

pub fn write_outputs(output: &RunOutput, config: &ExperimentConfig, dir: &Path) -> HarnessResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| HarnessError::io(path, e))
    };
    write(RESULTS_FILE, &output.table.to_csv())?;
    write(REPORT_TEXT_FILE, &output.report.to_text())?;
    write(REPORT_JSON_FILE, &output.report.to_json())?;
    // The output location is left out so that identical runs written to
    // different directories stay byte-identical.
    let echoed = ExperimentConfig { output_dir: None, ..config.clone() };
    write(CONFIG_FILE, &echoed.to_toml())?;
    if let Some(seq) = &output.sequence {
        write(SEQUENCE_FILE, &seq.to_text())?;
    }
    if let Some(shots) = &output.shot_table {
        write(SHOTS_FILE, &shots.to_text())?;
    }
    Ok(())
}
