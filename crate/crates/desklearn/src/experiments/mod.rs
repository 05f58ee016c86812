//! Seeded, reproducible desk-scale experiments: the engine behind the CLI
//! subcommands. Each runner returns an [`ExperimentRun`] of step metrics and
//! summary values and can write them as `metrics.csv` (`step,metric,value`)
//! plus `summary.json`.

mod bpe_run;
mod calc;
mod char_gpt;
mod ddpm2d;
mod hopfield_run;
mod kmeans_run;
mod vae2d;
mod xor;

pub use bpe_run::{run_bpe_decode, run_bpe_encode, run_bpe_train, BOOK_CORPUS};
pub use calc::{calc_anchors, run_calc, CalcRequest};
pub use char_gpt::{run_char_gpt, CharGptOptions};
pub use ddpm2d::{run_ddpm2d, Ddpm2dOptions, DiffusionDataset};
pub use hopfield_run::{run_hopfield, HopfieldOptions};
pub use kmeans_run::{run_kmeans, KMeansOptions};
pub use vae2d::{run_vae2d, Vae2dOptions};
pub use xor::{run_xor, XorOptions};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Common experiment settings. A fixed seed makes a run deterministic
/// within one build.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// Directory for `metrics.csv` and `summary.json`; `None` keeps results
    /// in memory only.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self { name: name.into(), seed, out_dir: None }
    }

    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = Some(dir.into());
        self
    }
}

/// Step metrics plus a summary map, both written deterministically.
#[derive(Debug, Clone, Default)]
pub struct ExperimentRun {
    rows: Vec<(u64, String, f64)>,
    summary: BTreeMap<String, serde_json::Value>,
}

impl ExperimentRun {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn log(&mut self, step: u64, metric: impl Into<String>, value: f64) {
        self.rows.push((step, metric.into(), value));
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<serde_json::Value>) {
        self.summary.insert(key.into(), value.into());
    }

    pub fn rows(&self) -> &[(u64, String, f64)] {
        &self.rows
    }

    /// Values a metric took, in logging order.
    pub fn series(&self, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|(_, m, _)| m == metric)
            .map(|(_, _, v)| *v)
            .collect()
    }

    pub fn summary(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.summary
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(serde_json::Value::as_f64)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.summary.get(key).and_then(serde_json::Value::as_str)
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("step,metric,value\n");
        for (step, metric, value) in &self.rows {
            out.push_str(&format!("{step},{metric},{value}\n"));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// Write `metrics.csv` and `summary.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        Ok(())
    }

    /// Write outputs if the config names a directory.
    pub fn finish(self, config: &ExperimentConfig) -> Result<ExperimentRun> {
        if let Some(dir) = &config.out_dir {
            self.write_to(dir)?;
        }
        Ok(self)
    }
}
