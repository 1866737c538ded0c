use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use margin_maxer::dataset::{self, LoadOptions, DEFAULT_SEED};
use margin_maxer::optimizers::{Schedule, Warmup};
use margin_maxer::reference::SolveMethod;
use margin_maxer::{Dataset, SyntheticSpec};
use serde::{Deserialize, Serialize};

/// Where the data comes from: a generator spec or a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    File {
        path: PathBuf,
        #[serde(default)]
        rescale: bool,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic(spec) => Ok(spec.generate()?),
            DatasetSource::File { path, rescale } => {
                dataset::load_csv(path, LoadOptions { rescale: *rescale })
                    .with_context(|| format!("loading {}", path.display()))
            }
        }
    }

    pub fn synthetic(&self) -> Option<&SyntheticSpec> {
        match self {
            DatasetSource::Synthetic(s) => Some(s),
            DatasetSource::File { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Gd,
    Ngd,
    Prgd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Ngd => "ngd",
            Algorithm::Prgd => "prgd",
        }
    }
}

fn default_eta() -> f64 {
    1.0
}

fn default_budget() -> usize {
    100_000
}

fn default_stride() -> usize {
    1
}

/// A single experiment. Optional fields are filled in by [`resolve`], and
/// the resolved document reruns the experiment exactly.
///
/// [`resolve`]: ExperimentConfig::resolve
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub algorithm: Algorithm,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub warmup: Warmup,
    #[serde(default)]
    pub schedule: Schedule,
    /// Iterations for GD/NGD; accelerated-phase iterations for PRGD.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub stop_gap: Option<f64>,
    #[serde(default = "default_stride")]
    pub log_stride: usize,
    #[serde(default)]
    pub out_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Reference solver for margin gaps; exact for synthetic data, dual
    /// otherwise.
    #[serde(default)]
    pub reference: Option<SolveMethod>,
    /// `(t_min, t_max)` for the rate fits; the whole run when absent.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    /// Column name in comparisons; the algorithm name when absent.
    #[serde(default)]
    pub label: Option<String>,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource, algorithm: Algorithm) -> Self {
        Self {
            dataset,
            algorithm,
            eta: default_eta(),
            warmup: Warmup::default(),
            schedule: Schedule::default(),
            budget: default_budget(),
            stop_gap: None,
            log_stride: default_stride(),
            out_path: None,
            seed: None,
            reference: None,
            fit_window: None,
            label: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Materializes defaults. A seed given here (from `--seed`) wins over the
    /// config's own; the chosen seed is written into a synthetic spec.
    pub fn resolve(mut self, seed_override: Option<u64>) -> Result<Self> {
        let seed = seed_override
            .or(self.seed)
            .or(self.dataset.synthetic().map(|s| s.seed))
            .unwrap_or(DEFAULT_SEED);
        self.seed = Some(seed);
        if let DatasetSource::Synthetic(spec) = &mut self.dataset {
            spec.seed = seed;
        }
        if self.reference.is_none() {
            self.reference = Some(match self.dataset {
                DatasetSource::Synthetic(_) => SolveMethod::Exact,
                DatasetSource::File { .. } => SolveMethod::Dual,
            });
        }
        if self.label.is_none() {
            self.label = Some(self.algorithm.name().to_string());
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate().context("dataset")?;
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            bail!("eta: must be a positive finite number, got {}", self.eta);
        }
        if self.budget == 0 {
            bail!("budget: must be at least 1");
        }
        if let Some(g) = self.stop_gap {
            if !(g > 0.0) {
                bail!("stop_gap: must be positive, got {g}");
            }
        }
        if self.log_stride == 0 {
            bail!("log_stride: must be at least 1");
        }
        if self.algorithm == Algorithm::Prgd {
            if self.warmup.steps == 0 {
                bail!("warmup.steps: PRGD needs at least one warm-up step to leave the origin");
            }
            self.schedule.validate().context("schedule")?;
        }
        if let Some((lo, hi)) = self.fit_window {
            if !(lo < hi) {
                bail!("fit_window: need t_min < t_max, got ({lo}, {hi})");
            }
        }
        if self.reference == Some(SolveMethod::Exact) && self.dataset.synthetic().is_none() {
            bail!("reference: the exact solver only applies to synthetic datasets");
        }
        Ok(())
    }
}
