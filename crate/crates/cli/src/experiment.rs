//! The `train` command: a resumable training run that snapshots metrics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cna_core::analysis::{binned_error_curves, complexity_bins, RunRecord, Trajectory};
use cna_core::data::{corrupt_labels, gaussian_noise_split, load_idx, load_idx_prefix, LabeledDataset};
use cna_core::metrics::{entropies, gap_metrics, CnaConfig};
use cna_core::nn::{
    build_network_with, evaluate, load_checkpoint, save_checkpoint, train_epoch_observed, Checkpoint,
    DepthSelection, Network, Optimizer,
};
use cna_core::rng::{stream, substream, Purpose};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::csvio::{write_csv, CurveRow, CURVES_SCHEMA};
use crate::error::{CliError, Result};
use crate::fsutil::{write_atomic, write_json};

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const PROGRESS_FILE: &str = "progress.json";
pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const RECORDS_DIR: &str = "records";

pub fn record_path(dir: &Path, epoch: u64) -> PathBuf {
    dir.join(RECORDS_DIR).join(format!("epoch-{epoch:04}.json"))
}

/// Training and test sets described by `spec`.
pub fn load_datasets(spec: &DatasetSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    match spec {
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            train_limit,
            test_limit,
            subset_seed,
            ..
        } => match subset_seed {
            None => Ok((
                load_idx_prefix(train_images, train_labels, *train_limit)?,
                load_idx_prefix(test_images, test_labels, *test_limit)?,
            )),
            Some(seed) => Ok((
                sampled(load_idx(train_images, train_labels)?, *train_limit, *seed, 0),
                sampled(load_idx(test_images, test_labels)?, *test_limit, *seed, 1),
            )),
        },
        DatasetSpec::Gaussian { n_train, n_test, seed, .. } => Ok(gaussian_noise_split(*n_train, *n_test, *seed)?),
    }
}

/// A sorted uniform sample of `limit` items drawn from substream `index`.
fn sampled(ds: LabeledDataset, limit: Option<usize>, seed: u64, index: u64) -> LabeledDataset {
    match limit {
        Some(n) if n < ds.len() => {
            let mut rng = substream(seed, Purpose::Split, index);
            let mut idx = sample(&mut rng, ds.len(), n).into_vec();
            idx.sort_unstable();
            ds.subset(&idx)
        }
        _ => ds,
    }
}

/// Datasets with the configured corruption applied to the training labels.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = load_datasets(&cfg.dataset)?;
    if train.item_shape() != test.item_shape() {
        return Err(CliError::Data(format!(
            "train items {:?} and test items {:?} differ in shape",
            train.item_shape(),
            test.item_shape()
        )));
    }
    let train = if cfg.corruption > 0.0 {
        corrupt_labels(&train, cfg.corruption, cfg.corruption_seed)?
    } else {
        train
    };
    Ok((train, test))
}

pub fn build_model(cfg: &ExperimentConfig, train: &LabeledDataset) -> Result<Network> {
    let specs = cfg.architecture.layers(train.item_shape(), train.classes)?;
    let depth = DepthSelection {
        include_output: cfg.metrics.include_output,
    };
    let net = build_network_with(train.item_shape(), &specs, cfg.seeds.init, depth)?;
    if net.classes() != train.classes {
        return Err(CliError::Config(format!(
            "network emits {} classes, data has {}",
            net.classes(),
            train.classes
        )));
    }
    if net.depth() < 2 {
        return Err(CliError::Config(format!(
            "CNA needs at least 2 depths, the architecture has {}; add a hidden layer or set metrics.include_output",
            net.depth()
        )));
    }
    Ok(net)
}

pub fn cna_config(cfg: &ExperimentConfig) -> CnaConfig {
    CnaConfig {
        entropy: cfg.entropy(),
        aggregation: cfg.metrics.aggregation,
    }
}

/// Fixed, sorted sample of test indices.
pub fn probe_indices(n: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut idx = sample(&mut stream(seed, Purpose::Probe), n, size.min(n)).into_vec();
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochProgress {
    pub epoch: u64,
    /// Mean minibatch loss during the epoch.
    pub epoch_loss: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    /// Test misclassifications as a string of `0`/`1`.
    pub test_errors: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub epochs: Vec<EpochProgress>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    /// Epochs trained by this invocation.
    pub trained: u64,
    pub final_record: Option<RunRecord>,
}

/// Runs (or resumes) the experiment in `cfg.output_dir`, calling `log` with
/// one line per epoch.
pub fn run_training(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<TrainSummary> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    let config_path = dir.join(CONFIG_FILE);
    let config_bytes = {
        let mut b = serde_json::to_vec_pretty(cfg).expect("config serializes");
        b.push(b'\n');
        b
    };
    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    let resuming = checkpoint_path.exists();
    if resuming {
        let stored = std::fs::read(&config_path).unwrap_or_default();
        if stored != config_bytes {
            return Err(CliError::Config(format!(
                "{} holds a run with a different configuration",
                dir.display()
            )));
        }
    }

    let (train, test) = prepare_data(cfg)?;
    let cna_cfg = cna_config(cfg);
    let test_alphas = entropies(&test.inputs, &cna_cfg.entropy)?;
    let bins = complexity_bins(&test_alphas, cfg.metrics.bins)?;
    let probe = test.inputs.select_rows(&probe_indices(test.len(), cfg.probe.size, cfg.probe.seed));

    let (mut net, mut opt, start, mut progress, mut trajectory) = if resuming {
        let ck = load_checkpoint(&checkpoint_path)?;
        if ck.shuffle_seed != cfg.seeds.shuffle {
            return Err(CliError::Config("checkpoint shuffle seed differs from the configuration".into()));
        }
        let progress: Progress = read_state(&dir.join(PROGRESS_FILE))?;
        let trajectory = if cfg.record_trajectory {
            Some(read_state::<Trajectory>(&dir.join(TRAJECTORY_FILE))?)
        } else {
            None
        };
        (ck.network, ck.optimizer, ck.epoch, progress, trajectory)
    } else {
        let net = build_model(cfg, &train)?;
        let opt = Optimizer::new(cfg.optimizer, &net);
        let trajectory = if cfg.record_trajectory {
            Some(Trajectory::for_network(&net, &probe, &cna_cfg.entropy, cna_cfg.aggregation, cfg.probe.full)?)
        } else {
            None
        };
        write_atomic(&config_path, &config_bytes)?;
        (net, opt, 0, Progress::default(), trajectory)
    };
    if progress.epochs.len() as u64 != start {
        return Err(CliError::Data(format!(
            "{} records {} epochs but the checkpoint is at epoch {start}",
            dir.join(PROGRESS_FILE).display(),
            progress.epochs.len()
        )));
    }

    let mut final_record = None;
    for epoch in start..cfg.epochs {
        let mut observer = |info: &cna_core::nn::StepInfo, net: &Network| -> cna_core::Result<()> {
            match trajectory.as_mut() {
                Some(t) => t.record(net, &probe, info.step, info.loss),
                None => Ok(()),
            }
        };
        let stats = train_epoch_observed(
            &mut net,
            &mut opt,
            &train,
            cfg.batch_size.min(train.len()),
            cfg.seeds.shuffle,
            epoch,
            &mut observer,
        )?;
        let train_eval = evaluate(&net, &train)?;
        let test_eval = evaluate(&net, &test)?;
        let done = epoch + 1;
        progress.epochs.push(EpochProgress {
            epoch: done,
            epoch_loss: stats.mean_loss,
            train_loss: train_eval.mean_loss,
            train_acc: train_eval.accuracy,
            test_loss: test_eval.mean_loss,
            test_acc: test_eval.accuracy,
            test_errors: test_eval.errors.iter().map(|&e| if e { '1' } else { '0' }).collect(),
        });

        let mut line = format!(
            "epoch {done}/{}: loss {:.4}, train acc {:.4}, test acc {:.4}",
            cfg.epochs, train_eval.mean_loss, train_eval.accuracy, test_eval.accuracy
        );
        if done % cfg.snapshot_interval == 0 || done == cfg.epochs {
            let metrics = gap_metrics(&net, &train, &test, &cna_cfg, cfg.metrics.cna_inputs)?;
            let mut record = RunRecord::new(
                cfg.dataset.name(),
                cfg.arch_name(),
                cfg.corruption,
                done,
                train_eval.accuracy,
                test_eval.accuracy,
                metrics.set,
            )?;
            let p = progress.epochs.last().expect("just pushed");
            record.extra = extras(cfg, p, &metrics);
            write_json(&record_path(dir, done), &record)?;
            if let Some(c) = metrics.set.cna {
                line.push_str(&format!(", cna {c:.4}"));
            }
            final_record = Some(record);
        }
        write_curves(dir, &progress, &bins)?;
        if let Some(t) = &trajectory {
            write_json(&dir.join(TRAJECTORY_FILE), t)?;
        }
        write_json(&dir.join(PROGRESS_FILE), &progress)?;
        let ck = Checkpoint {
            network: net,
            optimizer: opt,
            epoch: done,
            shuffle_seed: cfg.seeds.shuffle,
        };
        save_checkpoint(&ck, &checkpoint_path)?;
        (net, opt) = (ck.network, ck.optimizer);
        log(&line);
    }
    Ok(TrainSummary {
        trained: cfg.epochs.saturating_sub(start),
        final_record,
    })
}

fn extras(
    cfg: &ExperimentConfig,
    p: &EpochProgress,
    metrics: &cna_core::metrics::GapMetrics,
) -> BTreeMap<String, serde_json::Value> {
    let mut extra = BTreeMap::new();
    extra.insert("train_loss".into(), json!(p.train_loss));
    extra.insert("test_loss".into(), json!(p.test_loss));
    extra.insert("epoch_loss".into(), json!(p.epoch_loss));
    if let Some(m) = &metrics.margin {
        extra.insert("margin".into(), serde_json::to_value(m).expect("margin serializes"));
    }
    if !metrics.undefined.is_empty() {
        let reasons: BTreeMap<&str, &str> = metrics.undefined.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        extra.insert("undefined".into(), json!(reasons));
    }
    extra.insert(
        "seeds".into(),
        json!({"init": cfg.seeds.init, "shuffle": cfg.seeds.shuffle, "corruption": cfg.corruption_seed}),
    );
    extra
}

fn write_curves(dir: &Path, progress: &Progress, bins: &cna_core::analysis::BinAssignment) -> Result<()> {
    let flags: Vec<Vec<bool>> = progress
        .epochs
        .iter()
        .map(|p| p.test_errors.bytes().map(|b| b == b'1').collect())
        .collect();
    let curves = binned_error_curves(&flags, bins)?;
    let mut rows = Vec::new();
    for (e, p) in progress.epochs.iter().enumerate() {
        for (b, c) in curves.curves.iter().enumerate() {
            rows.push(CurveRow {
                epoch: p.epoch,
                bin: b,
                mean_error: c[e],
            });
        }
    }
    write_csv(&dir.join(CURVES_FILE), CURVES_SCHEMA, &rows)
}

fn read_state<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// The `metrics` command: the gap metrics of a saved network on a dataset.
pub fn checkpoint_metrics(checkpoint: &Path, data: &str) -> Result<serde_json::Value> {
    let ck = load_checkpoint(checkpoint)?;
    let spec: DatasetSpec = if data.trim_start().starts_with('{') {
        serde_json::from_str(data).map_err(|e| CliError::Config(format!("dataset spec: {e}")))?
    } else {
        let path = Path::new(data);
        let mut spec: DatasetSpec = crate::config::read_json(path)?;
        if let DatasetSpec::Idx { .. } = spec {
            let mut wrapper = serde_json::to_value(&spec).expect("spec serializes");
            let base = path.parent().unwrap_or(Path::new("."));
            for key in ["train_images", "train_labels", "test_images", "test_labels"] {
                let p = Path::new(wrapper[key].as_str().unwrap_or_default()).to_path_buf();
                if p.is_relative() {
                    wrapper[key] = json!(base.join(p));
                }
            }
            spec = serde_json::from_value(wrapper).expect("resolved spec");
        }
        spec
    };
    let (train, test) = load_datasets(&spec)?;
    let sibling = checkpoint.parent().map(|d| d.join(CONFIG_FILE));
    let run_cfg: Option<ExperimentConfig> = match sibling {
        Some(p) if p.exists() => Some(crate::config::read_json(&p)?),
        _ => None,
    };
    let (cna_cfg, inputs) = match &run_cfg {
        Some(c) => (cna_config(c), c.metrics.cna_inputs),
        None => (
            CnaConfig {
                entropy: spec.default_entropy(),
                ..CnaConfig::default()
            },
            Default::default(),
        ),
    };
    let net = &ck.network;
    let metrics = gap_metrics(net, &train, &test, &cna_cfg, inputs)?;
    let (train_eval, test_eval) = (evaluate(net, &train)?, evaluate(net, &test)?);
    let undefined: BTreeMap<&str, &str> = metrics.undefined.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    Ok(json!({
        "epoch": ck.epoch,
        "train_acc": train_eval.accuracy,
        "test_acc": test_eval.accuracy,
        "gap": train_eval.accuracy - test_eval.accuracy,
        "metrics": metrics.set,
        "margin": metrics.margin,
        "undefined": undefined,
    }))
}
