//! Experiment configuration files.
//!
//! Configs are TOML with nested sections. Unknown keys are rejected, every
//! semantic problem is collected before anything runs, and relative data
//! paths resolve against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, load_mnist_idx, Dataset};
use crate::diagnostics::{quadratic_federation, two_client_quadratic};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};
use crate::partition::{self, ClientShard, LabelMode, PartitionSpec, SizeMode};
use crate::protocol::{AlgorithmConfig, Federation, ParticipationSpec, ProtocolConfig, Variant};
use crate::seed::{derive_seed, Purpose};

/// Environment variable that overrides `output.dir`.
pub const OUT_DIR_ENV: &str = "FEDELASTIC_OUT_DIR";

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// IDX files, optionally gzipped.
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_images: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_labels: Option<PathBuf>,
    },
    /// Gaussian class clusters; the last `test_examples` draws form the test set.
    SyntheticClassification {
        num_classes: usize,
        input_dim: usize,
        examples: usize,
        #[serde(default = "one")]
        class_separation: f64,
        #[serde(default)]
        test_examples: usize,
    },
    /// One linear-regression dataset per client with shifted ground truth.
    SyntheticRegression {
        clients: usize,
        input_dim: usize,
        examples_per_client: usize,
        heterogeneity: f64,
        noise: f64,
    },
    /// Two diagonal quadratic clients with opposite minima.
    Quadratic { scale: f64 },
}

impl DataConfig {
    /// Whether the data comes pre-split per client (no `[partition]`).
    fn is_per_client(&self) -> bool {
        matches!(
            self,
            DataConfig::SyntheticRegression { .. } | DataConfig::Quadratic { .. }
        )
    }

    fn is_classification(&self) -> bool {
        matches!(
            self,
            DataConfig::Mnist { .. } | DataConfig::SyntheticClassification { .. }
        )
    }

    fn validate(&self, errors: &mut Vec<String>) {
        match self {
            DataConfig::Mnist {
                test_images,
                test_labels,
                ..
            } => {
                if test_images.is_some() != test_labels.is_some() {
                    errors.push("data.test_images and data.test_labels must be given together".into());
                }
            }
            DataConfig::SyntheticClassification {
                num_classes,
                input_dim,
                examples,
                class_separation,
                ..
            } => {
                if *num_classes < 2 {
                    errors.push("data.num_classes must be at least 2".into());
                }
                if *input_dim == 0 {
                    errors.push("data.input_dim must be positive".into());
                }
                if *examples == 0 {
                    errors.push("data.examples must be positive".into());
                }
                if !class_separation.is_finite() {
                    errors.push("data.class_separation must be finite".into());
                }
            }
            DataConfig::SyntheticRegression {
                clients,
                input_dim,
                examples_per_client,
                heterogeneity,
                noise,
            } => {
                for (key, v) in [
                    ("clients", clients),
                    ("input_dim", input_dim),
                    ("examples_per_client", examples_per_client),
                ] {
                    if *v == 0 {
                        errors.push(format!("data.{key} must be positive"));
                    }
                }
                if !(heterogeneity.is_finite() && noise.is_finite() && *noise >= 0.0) {
                    errors.push("data.heterogeneity and data.noise must be finite, noise >= 0".into());
                }
            }
            DataConfig::Quadratic { scale } => {
                if !scale.is_finite() {
                    errors.push("data.scale must be finite".into());
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub mode: LabelMode,
    pub clients: usize,
    #[serde(default)]
    pub sizes: SizeMode,
    /// Defaults to the experiment seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write `shards.json` with every client's example indices.
    #[serde(default)]
    pub export_shards: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs/default"),
            export_shards: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Record a convergence trace against the exact global optimum.
    #[serde(default)]
    pub convex_mode: bool,
    /// Solve every client each round for `ε_t` and the sign term.
    #[serde(default)]
    pub heavy: bool,
    /// Seeds averaged in heavy mode.
    #[serde(default = "five")]
    pub seeds: usize,
    #[serde(default = "twenty")]
    pub early_round: usize,
    #[serde(default = "two_hundred")]
    pub late_round: usize,
    /// Record `‖h − mean(caches)‖∞` each FedDyn round.
    #[serde(default = "yes")]
    pub track_h_identity: bool,
}

fn five() -> usize {
    5
}

fn twenty() -> usize {
    20
}

fn two_hundred() -> usize {
    200
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            convex_mode: false,
            heavy: false,
            seeds: 5,
            early_round: 20,
            late_round: 200,
            track_h_identity: true,
        }
    }
}

fn default_participation() -> ParticipationSpec {
    ParticipationSpec::full()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    pub rounds: usize,
    /// Evaluate every this many rounds (and after the last); 0 = last only.
    #[serde(default)]
    pub eval_every: usize,
    /// Worker threads for client solves.
    #[serde(default = "one_usize")]
    pub threads: usize,
    pub data: DataConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionConfig>,
    pub model: ModelKind,
    pub algorithm: AlgorithmConfig,
    #[serde(default = "default_participation")]
    pub participation: ParticipationSpec,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub variant: Option<Variant>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub rounds: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.variant {
            self.algorithm.variant = v;
        }
        if let Some(v) = o.lambda1 {
            self.algorithm.lambda1 = v;
        }
        if let Some(v) = o.lambda2 {
            self.algorithm.lambda2 = v;
        }
        if let Some(v) = o.epsilon {
            self.algorithm.epsilon = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.threads {
            self.threads = v;
        }
        if let Some(v) = o.rounds {
            self.rounds = v;
        }
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
    }

    /// Every problem with the config, each naming its key.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        self.data.validate(&mut errors);
        errors.extend(self.algorithm.validate());
        errors.extend(self.participation.validate());
        if self.threads == 0 {
            errors.push("threads must be at least 1".into());
        }
        match (&self.partition, self.data.is_per_client()) {
            (Some(_), true) => {
                errors.push("partition must be omitted: this data type is already split per client".into())
            }
            (None, false) => errors.push("partition section is required for this data type".into()),
            (Some(p), false) => errors.extend(self.partition_spec_for(p).validate()),
            (None, true) => {}
        }
        let classifier = !matches!(self.model, ModelKind::LinearRegression { .. });
        if self.data.is_classification() != classifier {
            errors.push(if classifier {
                "model.type must be linear_regression for regression data".into()
            } else {
                "model.type must be a classifier (logistic_regression or mlp) for classification data".into()
            });
        }
        let classes = match &self.data {
            DataConfig::Mnist { .. } => Some(10),
            DataConfig::SyntheticClassification { num_classes, .. } => Some(*num_classes),
            _ => None,
        };
        let model_classes = match &self.model {
            ModelKind::LogisticRegression { num_classes, .. } | ModelKind::Mlp { num_classes, .. } => {
                Some(*num_classes)
            }
            ModelKind::LinearRegression { .. } => None,
        };
        if let (Some(c), Some(mc)) = (classes, model_classes) {
            if c != mc {
                errors.push(format!("model.num_classes = {mc} but the data has {c} classes"));
            }
        }
        if matches!(self.data, DataConfig::Quadratic { .. })
            && self.model != (ModelKind::LinearRegression { bias: false })
        {
            errors.push("quadratic data needs model = { type = \"linear_regression\", bias = false }".into());
        }
        if let ModelKind::Mlp { hidden, .. } = &self.model {
            if hidden.contains(&0) {
                errors.push("model.hidden widths must be positive".into());
            }
        }
        let d = &self.diagnostics;
        if d.convex_mode && matches!(self.model, ModelKind::Mlp { .. }) {
            errors.push("diagnostics.convex_mode needs a linear or logistic model".into());
        }
        if d.heavy && !d.convex_mode {
            errors.push("diagnostics.heavy requires diagnostics.convex_mode = true".into());
        }
        if d.seeds == 0 {
            errors.push("diagnostics.seeds must be at least 1".into());
        }
        if d.early_round == 0 || d.early_round >= d.late_round {
            errors.push("diagnostics.early_round must be positive and below diagnostics.late_round".into());
        }
        errors
    }

    pub fn validated(self) -> Result<Self> {
        let errors = self.validate();
        if errors.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(errors))
        }
    }

    fn partition_spec_for(&self, p: &PartitionConfig) -> PartitionSpec {
        PartitionSpec {
            mode: p.mode,
            clients: p.clients,
            sizes: p.sizes,
            seed: p.seed.unwrap_or(self.seed),
        }
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            algorithm: self.algorithm.clone(),
            participation: self.participation.clone(),
            rounds: self.rounds,
            seed: self.seed,
            eval_every: self.eval_every,
            track_h_identity: self.diagnostics.track_h_identity,
        }
    }

    /// Label used in output files.
    pub fn label(&self) -> &'static str {
        self.algorithm.label()
    }

    /// Loads and partitions the data. Relative paths resolve against `base`.
    pub fn build_federation(&self, base: &Path) -> Result<Federation> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let data_seed = derive_seed(self.seed, Purpose::Data, 0, 0);
        let (train, test): (Option<Dataset>, Option<Dataset>) = match &self.data {
            DataConfig::Mnist {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                let train = load_mnist_idx(resolve(train_images), resolve(train_labels))?;
                let test = match (test_images, test_labels) {
                    (Some(i), Some(l)) => Some(load_mnist_idx(resolve(i), resolve(l))?),
                    _ => None,
                };
                (Some(train), test)
            }
            DataConfig::SyntheticClassification {
                num_classes,
                input_dim,
                examples,
                class_separation,
                test_examples,
            } => {
                let all = data::make_synthetic(
                    *num_classes,
                    *input_dim,
                    examples + test_examples,
                    *class_separation,
                    data_seed,
                )?;
                let (train, test) = all.split_at(*examples);
                (Some(train), (*test_examples > 0).then_some(test))
            }
            DataConfig::SyntheticRegression {
                clients,
                input_dim,
                examples_per_client,
                heterogeneity,
                noise,
            } => {
                let sets = data::make_regression_clients(
                    *clients,
                    *input_dim,
                    *examples_per_client,
                    *heterogeneity,
                    *noise,
                    data_seed,
                )?;
                let spec = ModelSpec {
                    kind: self.model.clone(),
                    input_dim: *input_dim,
                };
                return Ok(Federation {
                    spec,
                    shards: sets
                        .into_iter()
                        .enumerate()
                        .map(|(k, d)| ClientShard::standalone(k, d))
                        .collect(),
                    test: None,
                });
            }
            DataConfig::Quadratic { scale } => {
                let mut fed = quadratic_federation(&two_client_quadratic(*scale))?;
                fed.spec.kind = self.model.clone();
                return Ok(fed);
            }
        };
        let train = train.expect("classification data always has a training set");
        let spec = ModelSpec {
            kind: self.model.clone(),
            input_dim: train.input_dim(),
        };
        spec.validate()?;
        let p = self
            .partition
            .as_ref()
            .ok_or_else(|| Error::Config("partition section is required for this data type".into()))?;
        let shards = partition::split(&train, &self.partition_spec_for(p))?;
        Ok(Federation { spec, shards, test })
    }
}

/// A parsed config plus where it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Directory relative data paths resolve against.
    pub base_dir: PathBuf,
    pub source_path: Option<PathBuf>,
    /// Exact bytes of the config file (hashed into the manifest).
    pub source_text: String,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config =
            ExperimentConfig::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(LoadedConfig {
            config,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            source_path: Some(path.to_path_buf()),
            source_text: text,
        })
    }

    pub fn from_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        Ok(LoadedConfig {
            config: ExperimentConfig::from_toml(text)?,
            base_dir: base_dir.into(),
            source_path: None,
            source_text: text.to_string(),
        })
    }

    /// Applies overrides, then the output-directory environment variable.
    pub fn with_overrides(mut self, overrides: &Overrides) -> Self {
        self.config.apply(overrides);
        if overrides.out.is_none() {
            if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
                self.config.output.dir = PathBuf::from(dir);
            }
        }
        self
    }
}
