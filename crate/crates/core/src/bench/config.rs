use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Delimiter, SineSpec, TargetColumn};
use crate::error::{Error, Result};
use crate::loss::{LossConfig, Variant};
use crate::nn::DEFAULT_HEAD_BIAS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Sine,
    SkewNormal,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    /// Label used in reports; catalog presets set it to the dataset name.
    pub name: String,
    pub path: Option<PathBuf>,
    pub target: TargetColumn,
    pub delimiter: Delimiter,
    /// Columns dropped from the features (besides the target).
    pub ignore_columns: Vec<usize>,
    /// Generator settings for the synthetic sources.
    pub synthetic: SineSpec,
    /// Fresh held-out samples drawn per split for synthetic sources.
    pub holdout_n: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Sine,
            name: "sine".into(),
            path: None,
            target: TargetColumn::default(),
            delimiter: Delimiter::Comma,
            ignore_columns: Vec::new(),
            synthetic: SineSpec::default(),
            holdout_n: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    /// Initial (upper, lower) head biases on the standardized target scale.
    pub head_bias_init: (f64, f64),
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![50],
            head_bias_init: DEFAULT_HEAD_BIAS,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Per-epoch learning-rate multiplier.
    pub decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    /// Share of the training portion held out for early stopping; zero
    /// disables early stopping.
    pub validation_fraction: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            decay: 0.995,
            batch_size: 100,
            max_epochs: 2000,
            patience: 50,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitPlan {
    pub count: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            count: 20,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub dir: Option<PathBuf>,
    pub persist_predictions: bool,
    /// Keep every n-th epoch of each member's loss curve.
    pub loss_curve_stride: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            dir: None,
            persist_predictions: true,
            loss_curve_stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub ensemble_size: usize,
    pub splits: SplitPlan,
    pub report: ReportConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
            ensemble_size: 5,
            splits: SplitPlan::default(),
            report: ReportConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.loss.variant = variant;
        self
    }

    /// Checks every field; nothing is trained before this passes.
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let d = &self.dataset;
        match d.source {
            DataSource::File => {
                if d.path.is_none() {
                    return Err(Error::Config("file dataset needs a path".into()));
                }
            }
            DataSource::Sine | DataSource::SkewNormal => {
                if d.synthetic.n < 2 {
                    return Err(Error::Config("synthetic dataset needs n >= 2".into()));
                }
                if !(d.synthetic.x_low < d.synthetic.x_high) {
                    return Err(Error::Config("synthetic x range is empty".into()));
                }
                if d.holdout_n == 0 {
                    return Err(Error::Config("synthetic holdout_n must be positive".into()));
                }
            }
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        let (u, l) = self.model.head_bias_init;
        if !(u.is_finite() && l.is_finite()) {
            return Err(Error::Config("head bias init must be finite".into()));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(o.decay > 0.0 && o.decay <= 1.0) {
            return Err(Error::Config("decay must lie in (0, 1]".into()));
        }
        if o.batch_size == 0 || o.max_epochs == 0 {
            return Err(Error::Config(
                "batch size and max epochs must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&o.validation_fraction) {
            return Err(Error::Config(
                "validation fraction must lie in [0, 1)".into(),
            ));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble size must be at least 1".into()));
        }
        if self.splits.count == 0 {
            return Err(Error::Config("split count must be at least 1".into()));
        }
        if !(self.splits.test_fraction > 0.0 && self.splits.test_fraction < 1.0) {
            return Err(Error::Config("test fraction must lie in (0, 1)".into()));
        }
        if self.report.loss_curve_stride == 0 {
            return Err(Error::Config("loss curve stride must be positive".into()));
        }
        Ok(())
    }
}
