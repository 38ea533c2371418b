//! Phase-scheduled autoencoder training with interleaved cluster re-estimation.
//!
//! An iteration is one minibatch weight update. Clustering phases start by
//! encoding the whole training pool, seeding the cluster model with kmeans++
//! and fitting it to convergence; after that the model is refreshed from a
//! small re-encoded minibatch every `refresh_period` weight steps.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{igmm_fit, init_clusters, kmeans_fit, ClusterKind, ClusterModel, MinibatchState};
use crate::error::{Error, Result};
use crate::features::{Extractor, FeatureVector};
use crate::nn::{abc_gradients, sgd_momentum_step, LossWeights, Network, DEFAULT_LEARNING_RATE, DEFAULT_MOMENTUM};
use crate::seed::{derive_seed, rng_from_seed, Stream};

/// Iteration cap per loss used by the default schedules.
pub const DEFAULT_ITERATIONS: usize = 1000;
/// Full-batch iterations when a clustering phase seeds its model.
const INITIAL_FIT_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Reconstruction,
    Clustering,
    /// Both loss terms summed in every update.
    Combined,
}

impl PhaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseKind::Reconstruction => "reconstruction",
            PhaseKind::Clustering => "clustering",
            PhaseKind::Combined => "combined",
        }
    }

    fn uses_clusters(self) -> bool {
        self != PhaseKind::Reconstruction
    }
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reconstruction" => Ok(PhaseKind::Reconstruction),
            "clustering" => Ok(PhaseKind::Clustering),
            "combined" => Ok(PhaseKind::Combined),
            _ => Err(Error::Config(format!("unknown phase `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub iterations: usize,
}

impl Phase {
    pub fn new(kind: PhaseKind, iterations: usize) -> Self {
        Phase { kind, iterations }
    }
}

/// How the cluster model is re-estimated during a clustering phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefreshMode {
    /// One running-count step on `cluster_batch` freshly encoded samples.
    Minibatch,
    /// Re-encode the whole pool and refit to convergence from the current means.
    Full,
}

impl FromStr for RefreshMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minibatch" => Ok(RefreshMode::Minibatch),
            "full" => Ok(RefreshMode::Full),
            _ => Err(Error::Config(format!("unknown refresh mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub phases: Vec<Phase>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub cluster_batch: usize,
    pub cluster_kind: ClusterKind,
    /// K for Kmeans, initial T for the mixture.
    pub clusters: usize,
    /// Defaults to `1 / (10 T)` when unset.
    pub prune_threshold: Option<f64>,
    pub sigma: f64,
    pub loss_weights: LossWeights,
    pub seed: u64,
    pub refresh_period: usize,
    pub refresh_mode: RefreshMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            phases: vec![
                Phase::new(PhaseKind::Reconstruction, DEFAULT_ITERATIONS),
                Phase::new(PhaseKind::Clustering, DEFAULT_ITERATIONS),
            ],
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            batch_size: 2,
            cluster_batch: 40,
            cluster_kind: ClusterKind::Kmeans,
            clusters: 2,
            prune_threshold: None,
            sigma: 1.0,
            loss_weights: LossWeights::default(),
            seed: 0,
            refresh_period: 25,
            refresh_mode: RefreshMode::Minibatch,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 || self.cluster_batch == 0 || self.refresh_period == 0 {
            return bad("batch sizes and refresh period must be positive".into());
        }
        if self.clusters == 0 {
            return bad("need at least one cluster".into());
        }
        if let Some(t) = self.prune_threshold {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("prune threshold must lie in (0, 1), got {t}"));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        let w = self.loss_weights;
        if !(w.reconstruction >= 0.0 && w.clustering >= 0.0) {
            return bad("loss weights must be >= 0".into());
        }
        Ok(())
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold.unwrap_or(1.0 / (10.0 * self.clusters as f64))
    }

    /// Short hex digest of the JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Global iteration index across phases, starting at 0.
    pub iter: usize,
    pub phase: PhaseKind,
    /// Minibatch losses; a term not evaluated in this phase reads 0.
    pub reconstruction: f64,
    pub clustering: f64,
}

impl TracePoint {
    /// The loss the phase optimizes.
    pub fn loss(&self, w: LossWeights) -> f64 {
        match self.phase {
            PhaseKind::Reconstruction => self.reconstruction,
            PhaseKind::Clustering => self.clustering,
            PhaseKind::Combined => w.reconstruction * self.reconstruction + w.clustering * self.clustering,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub trace: Vec<TracePoint>,
    pub clusters: Option<ClusterModel>,
    pub wall_time_s: f64,
    pub seed: u64,
    pub config_hash: String,
    pub loss_weights: LossWeights,
    /// Cluster fits and refreshes performed; zero for reconstruction-only runs.
    pub cluster_updates: usize,
    pub failure: Option<String>,
}

impl TrainReport {
    pub fn write_trace_csv(&self, mut out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["iter", "phase", "loss"])?;
        for p in &self.trace {
            w.write_record([
                p.iter.to_string(),
                p.phase.as_str().to_string(),
                format!("{}", p.loss(self.loss_weights)),
            ])?;
        }
        w.flush().map_err(|e| Error::io("loss trace", e))?;
        Ok(())
    }
}

/// Training stopped early; the report covers every iteration that completed.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub report: TrainReport,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "training aborted after {} iterations: {}",
            self.report.trace.len(),
            self.error
        )
    }
}

impl std::error::Error for TrainFailure {}

impl From<TrainFailure> for Error {
    fn from(f: TrainFailure) -> Self {
        f.error
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub network: Network,
    pub clusters: Option<ClusterModel>,
    pub report: TrainReport,
}

/// Endless reshuffled pass over `0..n`.
struct Sampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(n: usize, seed: u64) -> Self {
        let mut s = Sampler {
            order: (0..n).collect(),
            pos: n,
            rng: rng_from_seed(seed),
        };
        s.refill();
        s
    }

    fn refill(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        (0..k)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.refill();
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

fn encode_all<X: AsRef<[f64]>>(net: &Network, x: &[X]) -> Result<Vec<Vec<f64>>> {
    x.iter().map(|v| net.encode(v.as_ref())).collect()
}

fn fit_clusters(config: &TrainConfig, start: &ClusterModel, z: &[Vec<f64>]) -> Result<(ClusterModel, Vec<usize>)> {
    let fit = match config.cluster_kind {
        ClusterKind::Kmeans => kmeans_fit(start, z, INITIAL_FIT_ITERATIONS)?,
        ClusterKind::Igmm => igmm_fit(start, z, INITIAL_FIT_ITERATIONS, Some(config.prune_threshold()))?,
    };
    Ok((fit.model, fit.assignments))
}

/// Runs `config.phases` in order on `features`, updating `net` in place.
#[allow(clippy::result_large_err)]
pub fn train<X: AsRef<[f64]>>(net: Network, features: &[X], config: &TrainConfig) -> Result<Trained, TrainFailure> {
    let started = Instant::now();
    let mut report = TrainReport {
        trace: Vec::new(),
        clusters: None,
        wall_time_s: 0.0,
        seed: config.seed,
        config_hash: config.hash(),
        loss_weights: config.loss_weights,
        cluster_updates: 0,
        failure: None,
    };
    let mut net = net;
    let result = run_phases(&mut net, features, config, &mut report);
    report.wall_time_s = started.elapsed().as_secs_f64();
    match result {
        Ok(clusters) => {
            report.clusters = clusters.clone();
            Ok(Trained {
                network: net,
                clusters,
                report,
            })
        }
        Err(error) => {
            report.failure = Some(error.to_string());
            Err(TrainFailure { error, report })
        }
    }
}

fn run_phases<X: AsRef<[f64]>>(
    net: &mut Network,
    features: &[X],
    config: &TrainConfig,
    report: &mut TrainReport,
) -> Result<Option<ClusterModel>> {
    config.validate()?;
    if let Some(bad) = features.iter().find(|x| x.as_ref().len() != net.input_dim()) {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: bad.as_ref().len(),
        });
    }
    let total: usize = config.phases.iter().map(|p| p.iterations).sum();
    if total > 0 && features.is_empty() {
        return Err(Error::invalid("no training features"));
    }
    let mut batches = Sampler::new(features.len(), derive_seed(config.seed, Stream::Shuffle, 0));
    let mut cluster_draws = Sampler::new(features.len(), derive_seed(config.seed, Stream::Clusters, u64::MAX));
    let mut clusters: Option<ClusterModel> = None;
    let mut iter = 0;

    for (phase_index, phase) in config.phases.iter().enumerate() {
        if phase.iterations == 0 {
            continue;
        }
        let mut state = None;
        if phase.kind.uses_clusters() {
            let z = encode_all(net, features)?;
            let k = config.clusters.min(z.len());
            let seed = derive_seed(config.seed, Stream::Clusters, phase_index as u64);
            let start = init_clusters(&z, k, config.cluster_kind, config.sigma, seed)?;
            let (model, assignments) = fit_clusters(config, &start, &z)?;
            report.cluster_updates += 1;
            state = Some(MinibatchState::new(model, &assignments));
        }
        let weights = match phase.kind {
            PhaseKind::Reconstruction => LossWeights::RECONSTRUCTION,
            PhaseKind::Clustering => LossWeights::CLUSTERING,
            PhaseKind::Combined => config.loss_weights,
        };

        for step in 0..phase.iterations {
            if let Some(st) = state.as_mut() {
                if step > 0 && step % config.refresh_period == 0 {
                    match config.refresh_mode {
                        RefreshMode::Minibatch => {
                            let idx = cluster_draws.take(config.cluster_batch.min(features.len()));
                            let z = idx
                                .iter()
                                .map(|&i| net.encode(features[i].as_ref()))
                                .collect::<Result<Vec<_>>>()?;
                            st.step(&z, Some(config.prune_threshold()))?;
                        }
                        RefreshMode::Full => {
                            let z = encode_all(net, features)?;
                            let (model, assignments) = fit_clusters(config, st.model(), &z)?;
                            *st = MinibatchState::new(model, &assignments);
                        }
                    }
                    report.cluster_updates += 1;
                }
            }

            let idx = batches.take(config.batch_size);
            let batch: Vec<&[f64]> = idx.iter().map(|&i| features[i].as_ref()).collect();
            let targets = match state.as_ref() {
                Some(st) => Some(
                    batch
                        .iter()
                        .map(|x| st.model().nearest_mean(&net.encode(x)?).map(<[f64]>::to_vec))
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            let target_refs: Option<Vec<&[f64]>> = targets.as_ref().map(|t| t.iter().map(Vec::as_slice).collect());
            let (grads, losses) = abc_gradients(net, &batch, target_refs.as_deref(), weights)?;
            if !(losses.reconstruction.is_finite() && losses.clustering.is_finite()) {
                return Err(Error::Numeric(format!("non-finite loss at iteration {iter}")));
            }
            sgd_momentum_step(net, &grads, config.learning_rate, config.momentum)?;
            report.trace.push(TracePoint {
                iter,
                phase: phase.kind,
                reconstruction: losses.reconstruction,
                clustering: losses.clustering,
            });
            iter += 1;
        }
        if let Some(st) = state {
            clusters = Some(st.into_model());
        }
    }
    Ok(clusters)
}

/// Latent vectors for `features`, in input order and tagged `Latent`.
pub fn encode_dataset(net: &Network, features: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
    features
        .iter()
        .map(|f| f.with_values(net.encode(f.values())?, Extractor::Latent))
        .collect()
}

/// Deep copy with zeroed velocities, for reuse on another wear regime.
pub fn reuse_weights(net: &Network) -> Network {
    net.reuse_weights()
}

/// Mean `½‖z − B*‖²` of `features` under `model`.
pub fn clustering_term<X: AsRef<[f64]>>(net: &Network, features: &[X], model: &ClusterModel) -> Result<f64> {
    let mut total = 0.0;
    for x in features {
        let z = net.encode(x.as_ref())?;
        let b = model.nearest_mean(&z)?;
        total += 0.5 * z.iter().zip(b).map(|(a, c)| (a - c).powi(2)).sum::<f64>();
    }
    Ok(total / features.len().max(1) as f64)
}
