use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Extractor, FeatureVector};

/// Principal directions of a training set.
///
/// `basis` holds one unit-norm component per row, ordered by descending
/// eigenvalue. Each component's largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    mean: Vec<f64>,
    basis: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

/// Fits `n_components` directions from the population covariance of `train`.
pub fn fit_pca(train: &[Vec<f64>], n_components: usize) -> Result<PcaModel> {
    let n = train.len();
    if n_components == 0 {
        return Err(Error::invalid("PCA needs at least one component"));
    }
    if n < n_components {
        return Err(Error::invalid(format!(
            "PCA with {n_components} components needs at least as many samples, got {n}"
        )));
    }
    let d = train[0].len();
    if n_components > d {
        return Err(Error::invalid(format!(
            "cannot keep {n_components} components of {d}-dim data"
        )));
    }
    if let Some(bad) = train.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }

    let mut mean = vec![0.0; d];
    for v in train {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| train[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / n as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut basis = Vec::with_capacity(n_components);
    let mut eigenvalues = Vec::with_capacity(n_components);
    for &idx in order.iter().take(n_components) {
        let mut dir: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = dir
            .iter()
            .enumerate()
            .fold(
                (0, 0.0f64),
                |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best },
            )
            .0;
        if dir[pivot] < 0.0 {
            dir.iter_mut().for_each(|v| *v = -*v);
        }
        basis.push(dir);
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        mean,
        basis,
        eigenvalues,
    })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.basis.len()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn project_values(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: v.len(),
            });
        }
        Ok(self
            .basis
            .iter()
            .map(|dir| {
                dir.iter()
                    .zip(v.iter().zip(&self.mean))
                    .map(|(g, (x, m))| g * (x - m))
                    .sum()
            })
            .collect())
    }

    /// Maps coordinates back to the input space; uses the leading `coords.len()` components.
    pub fn reconstruct(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() > self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                got: coords.len(),
            });
        }
        let mut out = self.mean.clone();
        for (c, dir) in coords.iter().zip(&self.basis) {
            for (o, g) in out.iter_mut().zip(dir) {
                *o += c * g;
            }
        }
        Ok(out)
    }

    /// Projects a feature vector; the result is tagged `PCA30` when 30 components are kept.
    pub fn project(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        let coords = self.project_values(fv.values())?;
        let tag = if coords.len() == 30 {
            Extractor::Pca30
        } else {
            Extractor::Latent
        };
        fv.with_values(coords, tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use rand::Rng;

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect()
    }

    // Cyclic Jacobi eigenvalue iteration for a small symmetric matrix.
    #[allow(clippy::needless_range_loop)]
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for row in a.iter_mut() {
                        let (akp, akq) = (row[p], row[q]);
                        row[p] = c * akp - s * akq;
                        row[q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    #[test]
    fn rank_one_data() {
        let dir: Vec<f64> = (0..600).map(|j| ((j * 37 % 11) as f64 - 5.0) / 10.0).collect();
        let base: Vec<f64> = (0..600).map(|j| (j % 7) as f64).collect();
        let train: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = (i as f64 - 19.5) * 0.1;
                base.iter().zip(&dir).map(|(b, g)| b + t * g).collect()
            })
            .collect();
        let model = fit_pca(&train, 30).unwrap();
        let ev = model.eigenvalues();
        assert!(ev[0] > 0.0);
        for e in &ev[1..] {
            assert!(*e <= 1e-8 * ev[0], "{e} vs {}", ev[0]);
        }
    }

    #[test]
    fn lossless_for_rank_thirty_data() {
        let mut rng = rng_from_seed(3);
        let dirs = random_rows(30, 600, 11);
        let offset: Vec<f64> = (0..600).map(|_| rng.random::<f64>()).collect();
        let train: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                let coef: Vec<f64> = (0..30).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                (0..600)
                    .map(|j| offset[j] + coef.iter().zip(&dirs).map(|(c, d)| c * d[j]).sum::<f64>())
                    .collect()
            })
            .collect();
        let model = fit_pca(&train, 30).unwrap();
        for v in train.iter().take(10) {
            let back = model.reconstruct(&model.project_values(v).unwrap()).unwrap();
            let err = v.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "{err}");
        }
    }

    #[test]
    fn captured_variance_matches_gram_oracle() {
        // 20 x 600: the nonzero spectrum of the covariance equals that of the
        // 20 x 20 Gram matrix of the centered rows, scaled by 1/n.
        let n = 20;
        let train = random_rows(n, 600, 5);
        let k = 10;
        let model = fit_pca(&train, k).unwrap();

        let mean: Vec<f64> = (0..600)
            .map(|j| train.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let centered: Vec<Vec<f64>> = train
            .iter()
            .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
            .collect();
        let gram: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
                    .collect()
            })
            .collect();
        let oracle = jacobi_eigenvalues(gram);
        let want: f64 = oracle[..k].iter().sum();
        let got: f64 = model.eigenvalues().iter().sum();
        assert!((want - got).abs() < 1e-9 * want, "{want} vs {got}");
        for (a, b) in model.eigenvalues().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn basis_is_orthonormal_and_sorted() {
        let train = random_rows(45, 600, 8);
        let model = fit_pca(&train, 30).unwrap();
        let g = model.basis();
        let mut worst = 0.0f64;
        for i in 0..30 {
            for j in 0..30 {
                let dot: f64 = g[i].iter().zip(&g[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        assert!(worst <= 1e-8, "{worst}");
        assert!(model.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        assert!(model.eigenvalues().iter().all(|e| *e >= 0.0));
        for dir in g {
            let (i, _) = dir
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
            assert!(dir[i] > 0.0);
        }
    }

    #[test]
    fn reconstruction_error_shrinks_with_more_components() {
        let train = random_rows(40, 50, 2);
        let model = fit_pca(&train, 30).unwrap();
        let v = &train[3];
        let coords = model.project_values(v).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..=30 {
            let back = model.reconstruct(&coords[..k]).unwrap();
            let err: f64 = v.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(err <= last + 1e-12);
            last = err;
        }
    }

    #[test]
    fn too_few_samples() {
        let train = random_rows(29, 600, 1);
        assert!(fit_pca(&train, 30).is_err());
        assert!(fit_pca(&train, 0).is_err());
    }

    #[test]
    fn deterministic_fit() {
        let train = random_rows(35, 80, 4);
        assert_eq!(fit_pca(&train, 30).unwrap(), fit_pca(&train, 30).unwrap());
    }
}
