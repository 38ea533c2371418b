//! Latent-space clustering: Kmeans and an infinite Gaussian mixture fit by
//! hard-assignment EM with weight-based pruning.
//!
//! All clusters share one constant variance, so the mixture's per-sample
//! score reduces to `ln π_k − ½‖z − B_k‖²` and Kmeans is the special case of
//! uniform weights. Ties always go to the lowest cluster index.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterKind {
    Kmeans,
    Igmm,
}

impl fmt::Display for ClusterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterKind::Kmeans => "kmeans",
            ClusterKind::Igmm => "igmm",
        })
    }
}

impl FromStr for ClusterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(ClusterKind::Kmeans),
            "igmm" => Ok(ClusterKind::Igmm),
            _ => Err(Error::invalid(format!("unknown cluster kind `{s}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ClusterModelRecord {
    kind: ClusterKind,
    t_active: usize,
    sigma: f64,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
}

/// Cluster means with mixture weights and a shared variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ClusterModelRecord", try_from = "ClusterModelRecord")]
pub struct ClusterModel {
    kind: ClusterKind,
    means: Vec<Vec<f64>>,
    weights: Vec<f64>,
    sigma: f64,
}

impl From<ClusterModel> for ClusterModelRecord {
    fn from(m: ClusterModel) -> Self {
        ClusterModelRecord {
            kind: m.kind,
            t_active: m.means.len(),
            sigma: m.sigma,
            weights: m.weights,
            means: m.means,
        }
    }
}

impl TryFrom<ClusterModelRecord> for ClusterModel {
    type Error = Error;

    fn try_from(r: ClusterModelRecord) -> Result<Self> {
        if r.t_active != r.means.len() {
            return Err(Error::Format(format!(
                "t_active {} disagrees with {} means",
                r.t_active,
                r.means.len()
            )));
        }
        ClusterModel::new(r.kind, r.means, r.weights, r.sigma)
    }
}

impl ClusterModel {
    pub fn new(kind: ClusterKind, means: Vec<Vec<f64>>, weights: Vec<f64>, sigma: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::invalid("a cluster model needs at least one mean"));
        }
        let dim = means[0].len();
        if means.iter().any(|m| m.len() != dim) {
            return Err(Error::invalid("cluster means differ in dimension"));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite cluster mean".into()));
        }
        if weights.len() != means.len() {
            return Err(Error::invalid("one mixture weight per cluster is required"));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::invalid("mixture weights must lie in [0, 1]"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(ClusterModel {
            kind,
            means,
            weights,
            sigma,
        })
    }

    /// A model with uniform weights.
    pub fn with_means(kind: ClusterKind, means: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let t = means.len().max(1);
        Self::new(kind, means, vec![1.0 / t as f64; t], sigma)
    }

    pub fn kind(&self) -> ClusterKind {
        self.kind
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn t_active(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Index of the mean used as a sample's clustering target.
    pub fn nearest_index(&self, z: &[f64]) -> Result<usize> {
        match self.kind {
            ClusterKind::Kmeans => Ok(argmin_distance(&self.means, z)),
            ClusterKind::Igmm => igmm_best(self, z),
        }
    }

    pub fn nearest_mean(&self, z: &[f64]) -> Result<&[f64]> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(&self.means[self.nearest_index(z)?])
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn argmin_distance(means: &[Vec<f64>], z: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, m) in means.iter().enumerate() {
        let d = squared_distance(m, z);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

fn igmm_score(weight: f64, mean: &[f64], z: &[f64]) -> f64 {
    weight.ln() - 0.5 * squared_distance(mean, z)
}

fn igmm_best(model: &ClusterModel, z: &[f64]) -> Result<usize> {
    if let Some(k) = model.weights.iter().position(|w| *w <= 0.0) {
        return Err(Error::Numeric(format!(
            "active cluster {k} has zero mixture weight; prune before assigning"
        )));
    }
    let mut best = 0;
    let mut best_s = f64::NEG_INFINITY;
    for (k, (m, w)) in model.means.iter().zip(&model.weights).enumerate() {
        let s = igmm_score(*w, m, z);
        if s > best_s {
            best = k;
            best_s = s;
        }
    }
    Ok(best)
}

fn check_dims<Z: AsRef<[f64]>>(model: &ClusterModel, z: &[Z]) -> Result<()> {
    if let Some(bad) = z.iter().find(|v| v.as_ref().len() != model.dim()) {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: bad.as_ref().len(),
        });
    }
    Ok(())
}

fn check_assignments<Z>(model: &ClusterModel, z: &[Z], assignments: &[usize]) -> Result<()> {
    if assignments.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: assignments.len(),
        });
    }
    if let Some(bad) = assignments.iter().find(|a| **a >= model.t_active()) {
        return Err(Error::invalid(format!(
            "assignment to cluster {bad} but only {} are active",
            model.t_active()
        )));
    }
    Ok(())
}

/// Squared-distance nearest mean for every sample.
pub fn kmeans_assign<Z: AsRef<[f64]>>(model: &ClusterModel, z: &[Z]) -> Result<Vec<usize>> {
    check_dims(model, z)?;
    Ok(z.iter().map(|v| argmin_distance(&model.means, v.as_ref())).collect())
}

/// Per-cluster sums and counts; summation runs in sample order.
fn accumulate<Z: AsRef<[f64]>>(model: &ClusterModel, z: &[Z], assignments: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; model.dim()]; model.t_active()];
    let mut counts = vec![0usize; model.t_active()];
    for (v, &k) in z.iter().zip(assignments) {
        counts[k] += 1;
        sums[k].iter_mut().zip(v.as_ref()).for_each(|(s, x)| *s += x);
    }
    (sums, counts)
}

fn updated_means(model: &ClusterModel, sums: Vec<Vec<f64>>, counts: &[usize]) -> Vec<Vec<f64>> {
    sums.into_iter()
        .zip(counts)
        .zip(&model.means)
        .map(|((s, &c), old)| {
            if c == 0 {
                old.clone()
            } else {
                s.into_iter().map(|x| x / c as f64).collect()
            }
        })
        .collect()
}

/// Moves each mean to the centroid of its samples; empty clusters keep their mean.
pub fn kmeans_update<Z: AsRef<[f64]>>(model: &ClusterModel, z: &[Z], assignments: &[usize]) -> Result<ClusterModel> {
    check_dims(model, z)?;
    check_assignments(model, z, assignments)?;
    let (sums, counts) = accumulate(model, z, assignments);
    let means = updated_means(model, sums, &counts);
    ClusterModel::new(model.kind, means, model.weights.clone(), model.sigma)
}

/// Hard E-step: `argmax_k ln π_k − ½‖z − B_k‖²`.
pub fn igmm_e_step<Z: AsRef<[f64]>>(model: &ClusterModel, z: &[Z]) -> Result<Vec<usize>> {
    check_dims(model, z)?;
    z.iter().map(|v| igmm_best(model, v.as_ref())).collect()
}

/// Closed-form M-step: centroids and assignment fractions. `σ` is left unchanged.
pub fn igmm_m_step<Z: AsRef<[f64]>>(model: &ClusterModel, z: &[Z], assignments: &[usize]) -> Result<ClusterModel> {
    check_dims(model, z)?;
    check_assignments(model, z, assignments)?;
    if z.is_empty() {
        return Err(Error::invalid("M-step needs at least one sample"));
    }
    let (sums, counts) = accumulate(model, z, assignments);
    let total: usize = counts.iter().sum();
    let weights = counts.iter().map(|c| *c as f64 / total as f64).collect();
    let means = updated_means(model, sums, &counts);
    ClusterModel::new(model.kind, means, weights, model.sigma)
}

/// Drops clusters whose weight is below `threshold` and renormalizes.
///
/// The heaviest cluster always survives. Returns the model and the original
/// indices of the kept clusters.
pub fn prune_clusters(model: &ClusterModel, threshold: f64) -> Result<(ClusterModel, Vec<usize>)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!(
            "prune threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let mut keep: Vec<usize> = (0..model.t_active())
        .filter(|&k| model.weights[k] >= threshold)
        .collect();
    if keep.is_empty() {
        let heaviest = model
            .weights
            .iter()
            .enumerate()
            .fold(0, |best, (k, w)| if *w > model.weights[best] { k } else { best });
        keep.push(heaviest);
    }
    let total: f64 = keep.iter().map(|&k| model.weights[k]).sum();
    let weights = if total > 0.0 {
        keep.iter().map(|&k| model.weights[k] / total).collect()
    } else {
        vec![1.0 / keep.len() as f64; keep.len()]
    };
    let means = keep.iter().map(|&k| model.means[k].clone()).collect();
    Ok((ClusterModel::new(model.kind, means, weights, model.sigma)?, keep))
}

/// `Σ_n ‖z_n − B_{ς(n)}‖²`.
pub fn kmeans_objective<Z: AsRef<[f64]>>(model: &ClusterModel, z: &[Z], assignments: &[usize]) -> f64 {
    z.iter()
        .zip(assignments)
        .map(|(v, &k)| squared_distance(v.as_ref(), &model.means[k]))
        .sum()
}

/// Hard-assignment log-likelihood `Σ_n ln π_{ς(n)} − ½‖z_n − B_{ς(n)}‖²`.
pub fn hard_em_objective<Z: AsRef<[f64]>>(model: &ClusterModel, z: &[Z], assignments: &[usize]) -> f64 {
    z.iter()
        .zip(assignments)
        .map(|(v, &k)| igmm_score(model.weights[k], &model.means[k], v.as_ref()))
        .sum()
}

/// Seeds `k` means from `sample` with kmeans++ (distance-squared weighting).
///
/// Mixture weights start uniform at `1/k`.
pub fn init_clusters<Z: AsRef<[f64]>>(
    sample: &[Z],
    k: usize,
    kind: ClusterKind,
    sigma: f64,
    seed: u64,
) -> Result<ClusterModel> {
    if k == 0 {
        return Err(Error::invalid("need at least one cluster"));
    }
    if k > sample.len() {
        return Err(Error::invalid(format!(
            "cannot seed {k} clusters from {} samples",
            sample.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut chosen = vec![rng.random_range(0..sample.len())];
    let mut d2: Vec<f64> = sample
        .iter()
        .map(|v| squared_distance(v.as_ref(), sample[chosen[0]].as_ref()))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 {
                    pick = Some(i);
                    if target < *d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total implies a positive entry")
        } else {
            // Every sample coincides with a chosen seed: fall back to unused indices.
            (0..sample.len())
                .find(|i| !chosen.contains(i))
                .expect("k <= sample size")
        };
        chosen.push(next);
        for (d, v) in d2.iter_mut().zip(sample) {
            *d = d.min(squared_distance(v.as_ref(), sample[next].as_ref()));
        }
    }
    let means = chosen.iter().map(|&i| sample[i].as_ref().to_vec()).collect();
    ClusterModel::with_means(kind, means, sigma)
}

/// Result of a full-batch clustering fit.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: ClusterModel,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Objective after every iteration.
    pub objective_trace: Vec<f64>,
}

/// Full-batch Lloyd iterations until assignments stop changing.
pub fn kmeans_fit<Z: AsRef<[f64]>>(model: &ClusterModel, z: &[Z], max_iter: usize) -> Result<Fit> {
    let mut model = model.clone();
    let mut assignments = kmeans_assign(&model, z)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        model = kmeans_update(&model, z, &assignments)?;
        let next = kmeans_assign(&model, z)?;
        trace.push(kmeans_objective(&model, z, &next));
        let done = next == assignments;
        assignments = next;
        if done {
            break;
        }
    }
    Ok(Fit {
        model,
        assignments,
        iterations,
        objective_trace: trace,
    })
}

/// Full-batch hard EM with pruning after every M-step.
///
/// With `threshold = None` only clusters that lost every sample are dropped,
/// which leaves the objective unchanged.
pub fn igmm_fit<Z: AsRef<[f64]>>(
    model: &ClusterModel,
    z: &[Z],
    max_iter: usize,
    threshold: Option<f64>,
) -> Result<Fit> {
    let mut model = model.clone();
    let mut assignments = igmm_e_step(&model, z)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        model = igmm_m_step(&model, z, &assignments)?;
        let t_before = model.t_active();
        let (pruned, kept) = prune_clusters(&model, threshold.unwrap_or(f64::MIN_POSITIVE))?;
        model = pruned;
        let remapped: Vec<usize> = assignments
            .iter()
            .map(|a| kept.iter().position(|k| k == a))
            .collect::<Option<Vec<_>>>()
            .unwrap_or_default();
        let next = igmm_e_step(&model, z)?;
        trace.push(hard_em_objective(&model, z, &next));
        let done = model.t_active() == t_before && next == remapped;
        assignments = next;
        if done {
            break;
        }
    }
    Ok(Fit {
        model,
        assignments,
        iterations,
        objective_trace: trace,
    })
}

/// Running-count minibatch re-estimation.
///
/// Each cluster keeps the number of samples it has absorbed; a minibatch
/// sample assigned to `k` moves `B_k` toward it by `1 / count_k`. Mixture
/// weights are the normalized counts, so a cluster missing from one small
/// batch keeps its weight instead of dropping to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MinibatchState {
    model: ClusterModel,
    counts: Vec<f64>,
}

impl MinibatchState {
    /// Starts from a fitted model and the sample counts behind it.
    pub fn new(model: ClusterModel, assignments: &[usize]) -> Self {
        let mut counts = vec![0.0; model.t_active()];
        for a in assignments {
            counts[*a] += 1.0;
        }
        // A seed that attracted nothing still needs a finite step size.
        counts.iter_mut().for_each(|c| *c = f64::max(*c, 1.0));
        MinibatchState { model, counts }
    }

    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn into_model(self) -> ClusterModel {
        self.model
    }

    /// One assign-then-update pass over `z`, followed by pruning for iGMM.
    pub fn step<Z: AsRef<[f64]>>(&mut self, z: &[Z], prune_threshold: Option<f64>) -> Result<()> {
        let assignments = match self.model.kind {
            ClusterKind::Kmeans => kmeans_assign(&self.model, z)?,
            ClusterKind::Igmm => igmm_e_step(&self.model, z)?,
        };
        let mut means = self.model.means.clone();
        for (v, &k) in z.iter().zip(&assignments) {
            self.counts[k] += 1.0;
            let rate = 1.0 / self.counts[k];
            means[k]
                .iter_mut()
                .zip(v.as_ref())
                .for_each(|(m, x)| *m += rate * (x - *m));
        }
        let weights = match self.model.kind {
            ClusterKind::Kmeans => self.model.weights.clone(),
            ClusterKind::Igmm => {
                let total: f64 = self.counts.iter().sum();
                self.counts.iter().map(|c| c / total).collect()
            }
        };
        self.model = ClusterModel::new(self.model.kind, means, weights, self.model.sigma)?;
        if let (ClusterKind::Igmm, Some(th)) = (self.model.kind, prune_threshold) {
            let (pruned, kept) = prune_clusters(&self.model, th)?;
            self.counts = kept.iter().map(|&k| self.counts[k]).collect();
            self.model = pruned;
        }
        Ok(())
    }
}
