//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Every key is listed in [`KEYS`]; anything else is rejected before work
//! starts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::clustering::ClusterKind;
use crate::data::{CellCounts, Manifest, SyntheticSpec};
use crate::error::{Error, Result};
use crate::features::Extractor;
use crate::nn::LossWeights;
use crate::trainer::{Phase, PhaseKind, RefreshMode};

use super::experiment::{CombinedMode, DataSource, ExperimentConfig, Method};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "global seed; every random stream derives from it"),
    ("attempts", "seeded end-to-end repetitions for `run` and `evaluate`"),
    (
        "methods",
        "comma list of moment18x4, moment12x4, rawspace12x50, pca30, ae-rec, ae-clu, ae-both",
    ),
    ("data.source", "`synthetic` or `files`"),
    ("data.dir", "dataset directory when data.source = files"),
    ("data.runs_file", "long-format series file inside data.dir"),
    ("data.labels_file", "label file inside data.dir"),
    (
        "data.resample",
        "draw a fresh synthetic dataset per attempt (true/false)",
    ),
    ("synthetic.low", "low-wear run counts as train,validation,test"),
    ("synthetic.high", "high-wear run counts as train,validation,test"),
    ("synthetic.series_length", "samples per generated series"),
    ("synthetic.noise_scale", "white sensor noise"),
    (
        "synthetic.redundant_noise",
        "drift scale of the label-free slurry and rotation channels",
    ),
    (
        "synthetic.regime_share",
        "share of the wear bin set by the discrete regime",
    ),
    ("synthetic.regime_shift", "pressure offset between regimes"),
    ("synthetic.run_noise", "per-run channel offset blurring the regimes"),
    ("synthetic.label_noise", "label noise as a fraction of the bin width"),
    ("extract.extractor", "feature recipe written by `extract`"),
    ("train.encoder", "encoder layer sizes, e.g. 600,500,100"),
    (
        "train.phases",
        "schedule for `train`, e.g. reconstruction:1000,clustering:1000",
    ),
    (
        "train.reconstruction_iterations",
        "reconstruction cap in the `run` ladder",
    ),
    ("train.clustering_iterations", "clustering cap in the `run` ladder"),
    ("train.combined_mode", "`sequential` or `simultaneous` for ae-both"),
    ("train.learning_rate", "SGD step size"),
    ("train.momentum", "momentum coefficient in [0, 1)"),
    ("train.batch_size", "samples per weight update"),
    ("train.cluster_batch", "samples per cluster refresh"),
    ("train.cluster_kind", "`kmeans` or `igmm`"),
    ("train.clusters", "K for kmeans, initial T for igmm"),
    (
        "train.prune_threshold",
        "mixture weight below which a cluster is dropped",
    ),
    ("train.sigma", "shared cluster standard deviation"),
    (
        "train.weight_reconstruction",
        "reconstruction loss weight in combined phases",
    ),
    ("train.weight_clustering", "clustering loss weight in combined phases"),
    ("train.refresh_period", "weight steps between cluster refreshes"),
    ("train.refresh_mode", "`minibatch` or `full`"),
    ("regression.lambda", "ridge penalty; 0 is plain least squares"),
    ("evaluate.network", "checkpoint whose latent space `evaluate` scores"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub extractor: Extractor,
    pub phases: Vec<Phase>,
    pub network: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let experiment = ExperimentConfig::default();
        let phases = vec![
            Phase::new(PhaseKind::Reconstruction, experiment.reconstruction_iterations),
            Phase::new(PhaseKind::Clustering, experiment.clustering_iterations),
        ];
        RunConfig {
            experiment,
            extractor: Extractor::RawSpace12x50,
            phases,
            network: None,
        }
    }
}

/// Splits text into `key -> value`, rejecting malformed lines, unknown keys
/// and duplicates.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim();
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", n + 1)));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn triple(key: &str, value: &str) -> Result<[usize; 3]> {
    let v: Vec<usize> = list(key, value)?;
    v.try_into()
        .map_err(|_| Error::Config(format!("`{key}` needs three counts: train,validation,test")))
}

fn phases(value: &str) -> Result<Vec<Phase>> {
    value
        .split(',')
        .map(|item| {
            let (kind, n) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("`train.phases`: expected kind:iterations, got `{item}`")))?;
            Ok(Phase::new(kind.parse()?, parse("train.phases", n)?))
        })
        .collect()
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut spec = SyntheticSpec::default();
        let mut source = "synthetic".to_string();
        let mut dir = None;
        let mut manifest = Manifest::default();
        let mut explicit_phases = false;
        let mut weights = LossWeights::default();
        {
            let ex = &mut cfg.experiment;
            for (key, v) in pairs {
                let v = v.as_str();
                let k = key.as_str();
                match k {
                    "seed" => ex.seed = parse(k, v)?,
                    "attempts" => ex.attempts = parse(k, v)?,
                    "methods" => ex.methods = list::<Method>(k, v).map_err(config_err)?,
                    "data.source" => source = v.to_string(),
                    "data.dir" => dir = Some(PathBuf::from(v)),
                    "data.runs_file" => manifest.runs_file = PathBuf::from(v),
                    "data.labels_file" => manifest.labels_file = PathBuf::from(v),
                    "data.resample" => ex.resample_data = parse(k, v)?,
                    "synthetic.low" => spec.counts.low = triple(k, v)?,
                    "synthetic.high" => spec.counts.high = triple(k, v)?,
                    "synthetic.series_length" => spec.series_length = parse(k, v)?,
                    "synthetic.noise_scale" => spec.noise_scale = parse(k, v)?,
                    "synthetic.redundant_noise" => spec.redundant_noise = parse(k, v)?,
                    "synthetic.regime_share" => spec.regime_share = parse(k, v)?,
                    "synthetic.regime_shift" => spec.regime_shift = parse(k, v)?,
                    "synthetic.run_noise" => spec.run_noise = parse(k, v)?,
                    "synthetic.label_noise" => spec.label_noise = parse(k, v)?,
                    "extract.extractor" => cfg.extractor = v.parse().map_err(config_err)?,
                    "train.encoder" => ex.encoder_sizes = list(k, v)?,
                    "train.phases" => {
                        cfg.phases = phases(v).map_err(config_err)?;
                        explicit_phases = true;
                    }
                    "train.reconstruction_iterations" => ex.reconstruction_iterations = parse(k, v)?,
                    "train.clustering_iterations" => ex.clustering_iterations = parse(k, v)?,
                    "train.combined_mode" => ex.combined_mode = v.parse()?,
                    "train.learning_rate" => ex.train.learning_rate = parse(k, v)?,
                    "train.momentum" => ex.train.momentum = parse(k, v)?,
                    "train.batch_size" => ex.train.batch_size = parse(k, v)?,
                    "train.cluster_batch" => ex.train.cluster_batch = parse(k, v)?,
                    "train.cluster_kind" => ex.train.cluster_kind = v.parse::<ClusterKind>().map_err(config_err)?,
                    "train.clusters" => ex.train.clusters = parse(k, v)?,
                    "train.prune_threshold" => ex.train.prune_threshold = Some(parse(k, v)?),
                    "train.sigma" => ex.train.sigma = parse(k, v)?,
                    "train.weight_reconstruction" => weights.reconstruction = parse(k, v)?,
                    "train.weight_clustering" => weights.clustering = parse(k, v)?,
                    "train.refresh_period" => ex.train.refresh_period = parse(k, v)?,
                    "train.refresh_mode" => ex.train.refresh_mode = v.parse::<RefreshMode>()?,
                    "regression.lambda" => ex.lambda = parse(k, v)?,
                    "evaluate.network" => cfg.network = Some(PathBuf::from(v)),
                    _ => unreachable!("parse_pairs only admits listed keys"),
                }
            }
            ex.train.loss_weights = weights;
            ex.data = match source.as_str() {
                "synthetic" => {
                    if spec.counts.total() == 0 {
                        return Err(Error::Config("synthetic dataset has no runs".into()));
                    }
                    DataSource::Synthetic(spec)
                }
                "files" => DataSource::Files {
                    dir: dir.ok_or_else(|| Error::Config("data.source = files needs data.dir".into()))?,
                    manifest,
                },
                other => return Err(Error::Config(format!("unknown data.source `{other}`"))),
            };
        }
        if !explicit_phases {
            cfg.phases = vec![
                Phase::new(PhaseKind::Reconstruction, cfg.experiment.reconstruction_iterations),
                Phase::new(PhaseKind::Clustering, cfg.experiment.clustering_iterations),
            ];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate().map_err(config_err)
    }

    /// Every key with its effective value, for the report snapshot.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let ex = &self.experiment;
        let t = &ex.train;
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", ex.seed.to_string());
        put("attempts", ex.attempts.to_string());
        put(
            "methods",
            ex.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(","),
        );
        put("data.resample", ex.resample_data.to_string());
        match &ex.data {
            DataSource::Synthetic(s) => {
                put("data.source", "synthetic".into());
                put("synthetic.low", join(&s.counts.low));
                put("synthetic.high", join(&s.counts.high));
                put("synthetic.series_length", s.series_length.to_string());
                put("synthetic.noise_scale", s.noise_scale.to_string());
                put("synthetic.redundant_noise", s.redundant_noise.to_string());
                put("synthetic.regime_share", s.regime_share.to_string());
                put("synthetic.regime_shift", s.regime_shift.to_string());
                put("synthetic.run_noise", s.run_noise.to_string());
                put("synthetic.label_noise", s.label_noise.to_string());
            }
            DataSource::Files { dir, manifest } => {
                put("data.source", "files".into());
                put("data.dir", dir.display().to_string());
                put("data.runs_file", manifest.runs_file.display().to_string());
                put("data.labels_file", manifest.labels_file.display().to_string());
            }
        }
        put("extract.extractor", self.extractor.name().to_string());
        put("train.encoder", join(&ex.encoder_sizes));
        put(
            "train.phases",
            self.phases
                .iter()
                .map(|p| format!("{}:{}", p.kind, p.iterations))
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "train.reconstruction_iterations",
            ex.reconstruction_iterations.to_string(),
        );
        put("train.clustering_iterations", ex.clustering_iterations.to_string());
        put(
            "train.combined_mode",
            match ex.combined_mode {
                CombinedMode::Sequential => "sequential",
                CombinedMode::Simultaneous => "simultaneous",
            }
            .into(),
        );
        put("train.learning_rate", t.learning_rate.to_string());
        put("train.momentum", t.momentum.to_string());
        put("train.batch_size", t.batch_size.to_string());
        put("train.cluster_batch", t.cluster_batch.to_string());
        put("train.cluster_kind", t.cluster_kind.to_string());
        put("train.clusters", t.clusters.to_string());
        put("train.prune_threshold", t.prune_threshold().to_string());
        put("train.sigma", t.sigma.to_string());
        put("train.weight_reconstruction", t.loss_weights.reconstruction.to_string());
        put("train.weight_clustering", t.loss_weights.clustering.to_string());
        put("train.refresh_period", t.refresh_period.to_string());
        put(
            "train.refresh_mode",
            match t.refresh_mode {
                RefreshMode::Minibatch => "minibatch",
                RefreshMode::Full => "full",
            }
            .into(),
        );
        put("regression.lambda", ex.lambda.to_string());
        if let Some(p) = &self.network {
            put("evaluate.network", p.display().to_string());
        }
        m
    }

    /// Convenience for tests and small runs.
    pub fn with_synthetic_counts(mut self, low: [usize; 3], high: [usize; 3]) -> Self {
        if let DataSource::Synthetic(spec) = &mut self.experiment.data {
            spec.counts = CellCounts { low, high };
        }
        self
    }
}
