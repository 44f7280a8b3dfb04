//! JSON experiment and suite configuration.

use std::path::{Path, PathBuf};

use cna_core::analysis::{DEFAULT_BINS, DEFAULT_PROBE};
use cna_core::data::MAX_CORRUPTION;
use cna_core::metrics::{CnaInputs, EntropyConfig, RangeMode};
use cna_core::nn::{Aggregation, LayerSpec, OptimizerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Image/label IDX pairs for training and test data.
    Idx {
        name: String,
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_limit: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_limit: Option<usize>,
        /// When set, the limits keep a seeded uniform sample instead of the
        /// leading items.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subset_seed: Option<u64>,
    },
    /// Standard-normal inputs with uniformly random labels.
    Gaussian {
        #[serde(default = "gaussian_name")]
        name: String,
        n_train: usize,
        n_test: usize,
        seed: u64,
    },
}

fn gaussian_name() -> String {
    "gaussian".into()
}

impl DatasetSpec {
    pub fn name(&self) -> &str {
        match self {
            DatasetSpec::Idx { name, .. } | DatasetSpec::Gaussian { name, .. } => name,
        }
    }

    /// Entropy settings used when the metric options leave them unset:
    /// 256 bins on `[0, 1]` for pixel data, per-datapoint ranges for noise.
    pub fn default_entropy(&self) -> EntropyConfig {
        match self {
            DatasetSpec::Idx { .. } => EntropyConfig::default(),
            DatasetSpec::Gaussian { .. } => EntropyConfig {
                range: RangeMode::PerDatapoint,
                ..EntropyConfig::default()
            },
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            ..
        } = self
        {
            for p in [train_images, train_labels, test_images, test_labels] {
                *p = resolve(base, p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArchitectureSpec {
    /// Dense layers of the given hidden widths, each followed by ReLU.
    Mlp { hidden: Vec<usize> },
    /// Convolutions (each followed by ReLU), then dense hidden layers.
    Cnn {
        channels: Vec<usize>,
        #[serde(default = "default_kernel")]
        kernel: usize,
        #[serde(default = "default_stride")]
        stride: usize,
        #[serde(default)]
        hidden: Vec<usize>,
    },
    /// An explicit layer list; the input and output widths must fit the data.
    Layers { layers: Vec<LayerSpec> },
}

fn default_kernel() -> usize {
    3
}

fn default_stride() -> usize {
    1
}

impl ArchitectureSpec {
    pub fn default_name(&self) -> &'static str {
        match self {
            ArchitectureSpec::Mlp { .. } => "mlp",
            ArchitectureSpec::Cnn { .. } => "cnn",
            ArchitectureSpec::Layers { .. } => "custom",
        }
    }

    /// Layer list for inputs of `input_shape` and `classes` outputs.
    pub fn layers(&self, input_shape: &[usize], classes: usize) -> Result<Vec<LayerSpec>> {
        let flat: usize = input_shape.iter().product();
        let dense_stack = |mut width: usize, hidden: &[usize], specs: &mut Vec<LayerSpec>| {
            for &h in hidden {
                specs.push(LayerSpec::dense(width, h));
                specs.push(LayerSpec::Relu);
                width = h;
            }
            specs.push(LayerSpec::dense(width, classes));
        };
        match self {
            ArchitectureSpec::Mlp { hidden } => {
                let mut specs = Vec::new();
                dense_stack(flat, hidden, &mut specs);
                Ok(specs)
            }
            ArchitectureSpec::Cnn {
                channels,
                kernel,
                stride,
                hidden,
            } => {
                let mut shape = match *input_shape {
                    [h, w] => vec![1, h, w],
                    [c, h, w] => vec![c, h, w],
                    _ => {
                        return Err(CliError::Config(format!(
                            "cnn needs image inputs, got item shape {input_shape:?}"
                        )))
                    }
                };
                let mut specs = Vec::new();
                for &c in channels {
                    let conv = LayerSpec::conv2d(shape[0], c, *kernel, *stride);
                    shape = conv.output_shape(&shape)?;
                    specs.push(conv);
                    specs.push(LayerSpec::Relu);
                }
                specs.push(LayerSpec::Flatten);
                dense_stack(shape.iter().product(), hidden, &mut specs);
                Ok(specs)
            }
            ArchitectureSpec::Layers { layers } => Ok(layers.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub init: u64,
    pub shuffle: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { init: 1, shuffle: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    /// Unset means the dataset's default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyConfig>,
    pub aggregation: Aggregation,
    pub include_output: bool,
    pub cna_inputs: CnaInputs,
    /// Entropy bins for the binned error curves.
    pub bins: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            entropy: None,
            aggregation: Aggregation::Mean,
            include_output: false,
            cna_inputs: CnaInputs::Test,
            bins: DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeOptions {
    pub size: usize,
    pub seed: u64,
    /// Record every neuron instead of per-layer aggregates.
    pub full: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            size: DEFAULT_PROBE,
            seed: 3,
            full: false,
        }
    }
}

fn default_batch() -> usize {
    64
}

fn default_interval() -> u64 {
    1
}

fn default_optimizer() -> OptimizerConfig {
    OptimizerConfig::adam(1e-3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub corruption: f64,
    #[serde(default)]
    pub corruption_seed: u64,
    pub architecture: ArchitectureSpec,
    /// Label stored in run records; defaults to the architecture kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch_name: Option<String>,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub epochs: u64,
    #[serde(default = "default_interval")]
    pub snapshot_interval: u64,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub metrics: MetricOptions,
    #[serde(default)]
    pub probe: ProbeOptions,
    #[serde(default)]
    pub record_trajectory: bool,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Reads, validates and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = read_json(path)?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        self.dataset.resolve(base);
        self.output_dir = resolve(base, &self.output_dir);
    }

    pub fn arch_name(&self) -> &str {
        self.arch_name.as_deref().unwrap_or(self.architecture.default_name())
    }

    pub fn entropy(&self) -> EntropyConfig {
        self.metrics.entropy.unwrap_or_else(|| self.dataset.default_entropy())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.snapshot_interval < 1 {
            return fail("snapshot_interval must be at least 1".into());
        }
        if !(0.0..=MAX_CORRUPTION).contains(&self.corruption) {
            return fail(format!("corruption {} outside [0, {MAX_CORRUPTION}]", self.corruption));
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        if self.probe.size < 2 {
            return fail("probe.size must be at least 2".into());
        }
        if self.metrics.bins < 2 {
            return fail("metrics.bins must be at least 2".into());
        }
        self.entropy().validate()?;
        self.optimizer.validate()?;
        if let DatasetSpec::Gaussian { n_train, n_test, .. } = self.dataset {
            if n_train == 0 || n_test == 0 {
                return fail("gaussian dataset needs n_train and n_test of at least 1".into());
            }
        }
        Ok(())
    }
}

/// Training settings shared by every suite cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellTemplate {
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub epochs: u64,
    #[serde(default = "default_interval")]
    pub snapshot_interval: u64,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub corruption_seed: u64,
    #[serde(default)]
    pub metrics: MetricOptions,
    #[serde(default)]
    pub probe: ProbeOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArchitecture {
    pub name: String,
    #[serde(flatten)]
    pub spec: ArchitectureSpec,
}

/// A single cell outside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraCell {
    pub dataset: DatasetSpec,
    pub architecture: NamedArchitecture,
    #[serde(default)]
    pub corruption: f64,
    /// Overrides the template's epoch count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub output_dir: PathBuf,
    pub template: CellTemplate,
    pub datasets: Vec<DatasetSpec>,
    pub corruptions: Vec<f64>,
    pub architectures: Vec<NamedArchitecture>,
    #[serde(default)]
    pub extra: Vec<ExtraCell>,
}

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.output_dir = resolve(&base, &cfg.output_dir);
        for d in &mut cfg.datasets {
            d.resolve(&base);
        }
        for e in &mut cfg.extra {
            e.dataset.resolve(&base);
        }
        if let Some(c) = cfg.corruptions.iter().find(|c| !(0.0..=MAX_CORRUPTION).contains(*c)) {
            return Err(CliError::Config(format!("corruption {c} outside [0, {MAX_CORRUPTION}]")));
        }
        Ok(cfg)
    }

    /// Every cell as `(directory name, experiment config)`, grid first.
    pub fn cells(&self) -> Vec<(String, ExperimentConfig)> {
        let mut out = Vec::new();
        let mut push = |dataset: &DatasetSpec, arch: &NamedArchitecture, corruption: f64, extra: Option<&ExtraCell>| {
            let name = format!("{}-{}-c{:.2}", dataset.name(), arch.name, corruption);
            let t = &self.template;
            let cfg = ExperimentConfig {
                dataset: dataset.clone(),
                corruption,
                corruption_seed: t.corruption_seed,
                architecture: arch.spec.clone(),
                arch_name: Some(arch.name.clone()),
                optimizer: extra.and_then(|e| e.optimizer).unwrap_or(t.optimizer),
                batch_size: t.batch_size,
                epochs: extra.and_then(|e| e.epochs).unwrap_or(t.epochs),
                snapshot_interval: t.snapshot_interval,
                seeds: t.seeds,
                metrics: t.metrics,
                probe: t.probe,
                record_trajectory: false,
                output_dir: self.output_dir.join(&name),
            };
            out.push((name, cfg));
        };
        for d in &self.datasets {
            for &c in &self.corruptions {
                for a in &self.architectures {
                    push(d, a, c, None);
                }
            }
        }
        for e in &self.extra {
            push(&e.dataset, &e.architecture, e.corruption, Some(e));
        }
        out
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"dataset": {"kind": "gaussian", "n_train": 10, "n_test": 5, "seed": 1},
                "architecture": {"kind": "mlp", "hidden": [8]},
                "epochs": 2, "output_dir": "out"}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.snapshot_interval, 1);
        assert_eq!(cfg.probe.size, 256);
        assert_eq!(cfg.arch_name(), "mlp");
        assert_eq!(cfg.entropy().range, RangeMode::PerDatapoint);
    }

    #[test]
    fn invalid_values_rejected() {
        let base = r#"{"dataset": {"kind": "gaussian", "n_train": 10, "n_test": 5, "seed": 1},
                "architecture": {"kind": "mlp", "hidden": [8]}, "output_dir": "o", "#;
        for tail in [
            r#""epochs": 1, "snapshot_interval": 0}"#,
            r#""epochs": 1, "corruption": 0.6}"#,
            r#""epochs": 0}"#,
        ] {
            let cfg: ExperimentConfig = serde_json::from_str(&format!("{base}{tail}")).unwrap();
            assert!(matches!(cfg.validate(), Err(CliError::Config(_))), "{tail}");
        }
        assert!(serde_json::from_str::<ExperimentConfig>(&format!("{base}\"epochs\": 1, \"typo\": 1}}")).is_err());
    }

    #[test]
    fn cnn_layers_fit_mnist_shape() {
        let arch = ArchitectureSpec::Cnn {
            channels: vec![4, 8],
            kernel: 3,
            stride: 2,
            hidden: vec![32],
        };
        let specs = arch.layers(&[28, 28], 10).unwrap();
        // 28 -> 13 -> 6
        assert_eq!(specs[5], LayerSpec::dense(8 * 6 * 6, 32));
        assert!(arch.layers(&[784], 10).is_err());
    }

    #[test]
    fn suite_cells_cover_grid_and_extras() {
        let suite: SuiteConfig = serde_json::from_str(
            r#"{"output_dir": "s", "template": {"epochs": 1},
                "datasets": [{"kind": "gaussian", "name": "a", "n_train": 4, "n_test": 4, "seed": 1},
                             {"kind": "gaussian", "name": "b", "n_train": 4, "n_test": 4, "seed": 2}],
                "corruptions": [0.0, 0.1, 0.3],
                "architectures": [{"name": "mlp", "kind": "mlp", "hidden": [4]}],
                "extra": [{"dataset": {"kind": "gaussian", "n_train": 4, "n_test": 4, "seed": 3},
                           "architecture": {"name": "wide", "kind": "mlp", "hidden": [16]}, "epochs": 5}]}"#,
        )
        .unwrap();
        let cells = suite.cells();
        assert_eq!(cells.len(), 7);
        assert_eq!(cells[1].0, "a-mlp-c0.10");
        assert_eq!(cells[6].0, "gaussian-wide-c0.00");
        assert_eq!(cells[6].1.epochs, 5);
    }
}
