//! Experiment configuration files (strict JSON).
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::CostModel;
use crate::data::{load_csv, load_idx, synth_dataset, Dataset, SynthKind, SynthSpec};
use crate::error::{Error, Result};
use crate::mc::McConfig;
use crate::nn::{default_cnn_decls, resolve_layers, LayerDecl, LayerSpec, MaskMode, ScaleMode};
use crate::train::TrainConfig;

/// Where a dataset comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Csv {
        path: PathBuf,
    },
    Synthetic {
        kind: SynthKind,
        n: usize,
        classes: usize,
        image_size: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl DataSource {
    /// Load the data, resolving relative paths against `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        match self {
            DataSource::Idx { images, labels } => load_idx(base.join(images), base.join(labels)),
            DataSource::Csv { path } => load_csv(base.join(path), None),
            DataSource::Synthetic {
                kind,
                n,
                classes,
                image_size,
                seed,
            } => synth_dataset(
                &SynthSpec {
                    kind: *kind,
                    n: *n,
                    classes: *classes,
                    image_size: *image_size,
                },
                *seed,
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<DataSource>,
    pub test: Option<DataSource>,
    pub ood: Option<DataSource>,
    /// Use only the first `n` samples of the corresponding set.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub ood_limit: Option<usize>,
    /// Class count; inferred from the training labels when absent.
    pub classes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub passes: usize,
    pub lambdas: Vec<usize>,
    pub drop_probs: Vec<f64>,
    pub seed: u64,
    pub mode: MaskMode,
    pub scale_mode: ScaleMode,
    pub cost_model: CostModel,
    /// Rotation angles in degrees for the rotation probe.
    pub angles: Vec<f64>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            passes: 25,
            lambdas: vec![0],
            drop_probs: vec![0.1],
            seed: 0,
            mode: MaskMode::Dropconnect,
            scale_mode: ScaleMode::Inverted,
            cost_model: CostModel::Flops,
            angles: vec![0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0],
        }
    }
}

impl InferenceConfig {
    /// Settings for one `(λ, p, seed)` point.
    pub fn mc(&self, lambda_frozen: usize, drop_prob: f64, seed: u64) -> McConfig {
        McConfig {
            passes: self.passes,
            lambda_frozen,
            drop_prob,
            mode: self.mode,
            scale_mode: self.scale_mode,
            seed,
            keep_passes: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.passes == 0 {
            return Err(Error::config("inference.passes must be at least 1"));
        }
        if self.lambdas.is_empty() || self.drop_probs.is_empty() {
            return Err(Error::config("inference.lambdas and inference.drop_probs must be non-empty"));
        }
        for &p in &self.drop_probs {
            crate::nn::MaskPlan::new(p, 0, self.mode, self.scale_mode)?;
        }
        if self.angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::config("inference.angles must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(Error::config(format!("unknown output format `{s}` (json|csv)"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub model: Option<PathBuf>,
    pub results: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

/// A complete experiment description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub data: DataConfig,
    /// Layer list; the default CNN when absent.
    #[serde(default)]
    pub architecture: Option<Vec<LayerDecl>>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative paths refer to; set by [`ExperimentConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parse and validate a config string. Unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.inference.validate()
    }

    /// Resolve a path from the config against its directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    fn load_set(&self, src: &Option<DataSource>, limit: Option<usize>, what: &str) -> Result<Dataset> {
        let src = src
            .as_ref()
            .ok_or_else(|| Error::config(format!("config has no data.{what} source")))?;
        let d = src.load(&self.base_dir)?;
        let d = match limit {
            Some(n) => d.take(n),
            None => d,
        };
        match self.data.classes {
            Some(c) => d.with_classes(c),
            None => Ok(d),
        }
    }

    pub fn train_set(&self) -> Result<Dataset> {
        self.load_set(&self.data.train, self.data.train_limit, "train")
    }

    pub fn test_set(&self) -> Result<Dataset> {
        self.load_set(&self.data.test, self.data.test_limit, "test")
    }

    pub fn ood_set(&self) -> Result<Dataset> {
        self.load_set(&self.data.ood, self.data.ood_limit, "ood")
    }

    /// Concrete layers for the given input shape and class count.
    pub fn layers(&self, input_shape: &[usize], classes: usize) -> Result<Vec<LayerSpec>> {
        let decls = match &self.architecture {
            Some(d) => d.clone(),
            None => default_cnn_decls(classes),
        };
        resolve_layers(input_shape, &decls).map_err(|e| match e {
            Error::Dimension(m) => Error::Config(format!("architecture: {m}")),
            other => other,
        })
    }
}
