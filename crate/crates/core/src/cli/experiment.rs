//! The baseline and autoencoder ladder behind `run`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{
    generate_synthetic, load_dataset, DatasetSplit, Manifest, Split, SyntheticSpec, VariablePreset, Wear,
};
use crate::error::{Error, Result};
use crate::features::{extract_moments, extract_rawspace, fit_pca, FeatureVector, Normalizer};
use crate::nn::{init_network, Network};
use crate::regression::{evaluate_per_wear, fit_per_wear, RmseRow};
use crate::seed::{derive_seed, Stream};
use crate::trainer::{encode_dataset, reuse_weights, train, Phase, PhaseKind, TrainConfig, TrainFailure, TrainReport};

pub const PCA_COMPONENTS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "moment18x4")]
    Moment18x4,
    #[serde(rename = "moment12x4")]
    Moment12x4,
    #[serde(rename = "rawspace12x50")]
    RawSpace12x50,
    #[serde(rename = "pca30")]
    Pca30,
    #[serde(rename = "ae-rec")]
    AeReconstruction,
    #[serde(rename = "ae-clu")]
    AeClustering,
    #[serde(rename = "ae-both")]
    AeBoth,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Moment18x4,
        Method::Moment12x4,
        Method::RawSpace12x50,
        Method::Pca30,
        Method::AeReconstruction,
        Method::AeClustering,
        Method::AeBoth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Moment18x4 => "moment18x4",
            Method::Moment12x4 => "moment12x4",
            Method::RawSpace12x50 => "rawspace12x50",
            Method::Pca30 => "pca30",
            Method::AeReconstruction => "ae-rec",
            Method::AeClustering => "ae-clu",
            Method::AeBoth => "ae-both",
        }
    }

    /// Row label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Moment18x4 => "Moment18x4",
            Method::Moment12x4 => "Moment12x4",
            Method::RawSpace12x50 => "RawSpace12x50",
            Method::Pca30 => "PCA30",
            Method::AeReconstruction => "AE + reconstruction",
            Method::AeClustering => "AE + clustering",
            Method::AeBoth => "AE + both",
        }
    }

    pub fn is_autoencoder(self) -> bool {
        matches!(self, Method::AeReconstruction | Method::AeClustering | Method::AeBoth)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// How the second loss joins the first in `ae-both`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinedMode {
    /// Reconstruction phase, then a clustering-only phase.
    Sequential,
    /// Reconstruction phase, then a phase minimizing the weighted sum.
    Simultaneous,
}

impl FromStr for CombinedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(CombinedMode::Sequential),
            "simultaneous" => Ok(CombinedMode::Simultaneous),
            _ => Err(Error::Config(format!("unknown combined mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Files { dir: PathBuf, manifest: Manifest },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub seed: u64,
    pub attempts: usize,
    pub methods: Vec<Method>,
    pub encoder_sizes: Vec<usize>,
    /// Phases are ignored; the ladder builds its own schedules.
    pub train: TrainConfig,
    pub reconstruction_iterations: usize,
    pub clustering_iterations: usize,
    pub combined_mode: CombinedMode,
    pub lambda: f64,
    /// Draw a fresh synthetic dataset for every attempt.
    pub resample_data: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(SyntheticSpec::default()),
            seed: 0,
            attempts: 10,
            methods: Method::ALL.to_vec(),
            encoder_sizes: vec![600, 500, 100],
            train: TrainConfig::default(),
            reconstruction_iterations: 1000,
            clustering_iterations: 1000,
            combined_mode: CombinedMode::Sequential,
            lambda: 0.0,
            resample_data: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.attempts == 0 {
            return Err(Error::Config("attempts must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.encoder_sizes.len() < 2 || self.encoder_sizes.contains(&0) {
            return Err(Error::Config("encoder sizes need at least two positive entries".into()));
        }
        if self.encoder_sizes[0] != 600 && self.methods.iter().any(|m| m.is_autoencoder()) {
            return Err(Error::Config(format!(
                "the autoencoder reads 600-dim raw features, but encoder input is {}",
                self.encoder_sizes[0]
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.train.validate()
    }

    /// The dataset used by `attempt`.
    pub fn dataset(&self, attempt: usize) -> Result<DatasetSplit> {
        match &self.data {
            DataSource::Synthetic(spec) => {
                let index = if self.resample_data { attempt as u64 } else { 0 };
                generate_synthetic(&SyntheticSpec {
                    seed: derive_seed(self.seed, Stream::Data, index),
                    ..spec.clone()
                })
            }
            DataSource::Files { dir, manifest } => load_dataset(dir, manifest),
        }
    }
}

/// Training record for one autoencoder variant in one attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub attempt: usize,
    pub method: Method,
    pub report: TrainReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttemptResult {
    pub rows: Vec<RmseRow>,
    pub training: Vec<TrainRecord>,
}

/// Features for every run with labelled wear, split into the regression
/// training pool (train plus validation) and the test set.
#[derive(Debug, Clone)]
pub struct Pools {
    pub pool: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
}

impl Pools {
    fn from(all: Vec<FeatureVector>) -> Self {
        let (test, pool) = all
            .into_iter()
            .filter(|f| f.wear() != Wear::Unknown)
            .partition(|f| f.split() == Split::Test);
        Pools { pool, test }
    }

    fn map(&self, f: impl Fn(&FeatureVector) -> Result<FeatureVector>) -> Result<Pools> {
        Ok(Pools {
            pool: self.pool.iter().map(&f).collect::<Result<_>>()?,
            test: self.test.iter().map(&f).collect::<Result<_>>()?,
        })
    }
}

fn extract_all(ds: &DatasetSplit, f: impl Fn(&crate::data::WaferRun) -> Result<FeatureVector>) -> Result<Pools> {
    Ok(Pools::from(ds.runs().iter().map(f).collect::<Result<Vec<_>>>()?))
}

/// Raw 600-dim features scaled by a normalizer fit on the training pool.
pub fn normalized_rawspace(ds: &DatasetSplit) -> Result<Pools> {
    let raw = extract_all(ds, extract_rawspace)?;
    let norm = Normalizer::fit(&raw.pool)?;
    raw.map(|f| norm.apply(f))
}

/// Encodes normalized raw features; high-wear runs go through the reused weights.
pub fn latent_pools(net: &Network, raw: &Pools) -> Result<Pools> {
    let high = reuse_weights(net);
    raw.map(|f| {
        let n = if f.wear() == Wear::High { &high } else { net };
        Ok(encode_dataset(n, std::slice::from_ref(f))?.remove(0))
    })
}

fn score(method: Method, attempt: usize, pools: &Pools, lambda: f64, rows: &mut Vec<RmseRow>) -> Result<()> {
    score_named(method.as_str(), attempt, pools, lambda, rows)
}

/// Per-wear regression on `pools`, one row per wear group.
pub fn score_named(name: &str, attempt: usize, pools: &Pools, lambda: f64, rows: &mut Vec<RmseRow>) -> Result<()> {
    let models = fit_per_wear(&pools.pool, lambda)?;
    for (wear, eval) in evaluate_per_wear(&models, &pools.test)? {
        rows.push(RmseRow {
            method: name.to_string(),
            attempt,
            wear,
            rmse: eval.rmse,
            n: eval.n,
        });
    }
    Ok(())
}

/// Error raised inside an attempt, with whatever finished before it.
#[derive(Debug)]
pub struct AttemptFailure {
    pub error: Error,
    pub partial: AttemptResult,
}

impl From<Error> for AttemptFailure {
    fn from(error: Error) -> Self {
        AttemptFailure {
            error,
            partial: AttemptResult::default(),
        }
    }
}

/// Runs every configured method once on `ds`.
pub fn run_attempt(
    config: &ExperimentConfig,
    ds: &DatasetSplit,
    attempt: usize,
) -> Result<AttemptResult, AttemptFailure> {
    let mut out = AttemptResult::default();
    match run_attempt_into(config, ds, attempt, &mut out) {
        Ok(()) => Ok(out),
        Err(error) => Err(AttemptFailure { error, partial: out }),
    }
}

fn run_attempt_into(
    config: &ExperimentConfig,
    ds: &DatasetSplit,
    attempt: usize,
    out: &mut AttemptResult,
) -> Result<()> {
    let wants = |m: Method| config.methods.contains(&m);
    let lambda = config.lambda;

    if wants(Method::Moment18x4) {
        let p = extract_all(ds, |r| extract_moments(r, VariablePreset::All18))?;
        score(Method::Moment18x4, attempt, &p, lambda, &mut out.rows)?;
    }
    if wants(Method::Moment12x4) {
        let p = extract_all(ds, |r| extract_moments(r, VariablePreset::UsagePressure12))?;
        score(Method::Moment12x4, attempt, &p, lambda, &mut out.rows)?;
    }
    let needs_raw = config
        .methods
        .iter()
        .any(|m| !matches!(m, Method::Moment18x4 | Method::Moment12x4));
    if !needs_raw {
        return Ok(());
    }
    let raw = normalized_rawspace(ds)?;
    if wants(Method::RawSpace12x50) {
        score(Method::RawSpace12x50, attempt, &raw, lambda, &mut out.rows)?;
    }
    if wants(Method::Pca30) {
        let train: Vec<Vec<f64>> = raw.pool.iter().map(|f| f.values().to_vec()).collect();
        let pca = fit_pca(&train, PCA_COMPONENTS)?;
        let p = raw.map(|f| pca.project(f))?;
        score(Method::Pca30, attempt, &p, lambda, &mut out.rows)?;
    }

    // Autoencoders learn on low-wear runs only; high wear reuses the weights.
    let ae_train: Vec<&FeatureVector> = raw.pool.iter().filter(|f| f.wear() == Wear::Low).collect();
    let init = || {
        init_network(
            &config.encoder_sizes,
            derive_seed(config.seed, Stream::Init, attempt as u64),
        )
    };
    let run_seed = derive_seed(config.seed, Stream::Attempts, attempt as u64);
    let fit =
        |method: Method, net: Network, phases: Vec<Phase>, salt: u64, out: &mut AttemptResult| -> Result<Network> {
            let cfg = TrainConfig {
                phases,
                seed: derive_seed(run_seed, Stream::Shuffle, salt),
                ..config.train.clone()
            };
            match train(net, &ae_train, &cfg) {
                Ok(t) => {
                    out.training.push(TrainRecord {
                        attempt,
                        method,
                        report: t.report,
                    });
                    Ok(t.network)
                }
                Err(TrainFailure { error, report }) => {
                    out.training.push(TrainRecord {
                        attempt,
                        method,
                        report,
                    });
                    Err(error)
                }
            }
        };
    let latent_score = |method: Method, net: &Network, out: &mut AttemptResult| -> Result<()> {
        score(method, attempt, &latent_pools(net, &raw)?, lambda, &mut out.rows)
    };

    let rec_phase = Phase::new(PhaseKind::Reconstruction, config.reconstruction_iterations);
    let second = match config.combined_mode {
        CombinedMode::Sequential => PhaseKind::Clustering,
        CombinedMode::Simultaneous => PhaseKind::Combined,
    };
    if wants(Method::AeReconstruction) || wants(Method::AeBoth) {
        let rec = fit(Method::AeReconstruction, init()?, vec![rec_phase], 0, out)?;
        if wants(Method::AeReconstruction) {
            latent_score(Method::AeReconstruction, &rec, out)?;
        }
        if wants(Method::AeBoth) {
            let both = fit(
                Method::AeBoth,
                rec,
                vec![Phase::new(second, config.clustering_iterations)],
                1,
                out,
            )?;
            latent_score(Method::AeBoth, &both, out)?;
        }
    }
    if wants(Method::AeClustering) {
        let clu = fit(
            Method::AeClustering,
            init()?,
            vec![Phase::new(PhaseKind::Clustering, config.clustering_iterations)],
            2,
            out,
        )?;
        latent_score(Method::AeClustering, &clu, out)?;
    }
    out.rows.sort_by_key(|r| (Method::from_str(&r.method).ok(), r.wear));
    Ok(())
}
