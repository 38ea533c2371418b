//! Linear least squares from feature or latent vectors to MRR, and RMSE.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Wear;
use crate::error::{Error, Result};

/// Ridge used when the unregularized normal system is not positive definite.
pub const FALLBACK_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    coefficients: Vec<f64>,
    intercept: f64,
    /// Ridge actually used in the solve.
    lambda: f64,
}

impl RegressionModel {
    pub fn new(coefficients: Vec<f64>, intercept: f64, lambda: f64) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) || !intercept.is_finite() {
            return Err(Error::Numeric("non-finite regression coefficients".into()));
        }
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::invalid(format!("ridge must be >= 0, got {lambda}")));
        }
        Ok(RegressionModel {
            coefficients,
            intercept,
            lambda,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.intercept + self.coefficients.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

pub fn predict<X: AsRef<[f64]>>(model: &RegressionModel, x: &[X]) -> Result<Vec<f64>> {
    x.iter().map(|v| model.predict_one(v.as_ref())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub rmse: f64,
    pub n: usize,
    /// `y − ŷ` per sample, in input order.
    pub residuals: Vec<f64>,
}

pub fn rmse_of(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

pub fn evaluate<X: AsRef<[f64]>>(model: &RegressionModel, x: &[X], y: &[f64]) -> Result<EvalResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    let yhat = predict(model, x)?;
    let residuals: Vec<f64> = y.iter().zip(&yhat).map(|(a, b)| a - b).collect();
    Ok(EvalResult {
        rmse: rmse_of(&residuals),
        n: residuals.len(),
        residuals,
    })
}

/// In-place Cholesky `A = L Lᵀ` on a dense row-major matrix; `None` if not
/// numerically positive definite.
fn cholesky(a: &mut [f64], n: usize) -> Option<()> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1.0);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d.is_nan() || d <= scale * 1e-13 {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Some(())
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Minimizes `Σ(y − Xw − b)² + λ‖w‖²` with an unpenalized intercept.
///
/// The problem is solved on centered data. If the system is singular at the
/// requested `λ = 0`, the solve is retried with [`FALLBACK_RIDGE`] and the
/// model records that value.
pub fn fit_ols<X: AsRef<[f64]>>(x: &[X], y: &[f64], lambda: f64) -> Result<RegressionModel> {
    if x.is_empty() {
        return Err(Error::invalid("cannot fit a regression on empty data"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("ridge must be >= 0, got {lambda}")));
    }
    let d = x[0].as_ref().len();
    if let Some(bad) = x.iter().find(|v| v.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.as_ref().len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().flat_map(|v| v.as_ref()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite regression input".into()));
    }

    let n = x.len() as f64;
    let mut x_mean = vec![0.0; d];
    for v in x {
        x_mean.iter_mut().zip(v.as_ref()).for_each(|(m, a)| *m += a / n);
    }
    let y_mean = y.iter().sum::<f64>() / n;

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for (v, yi) in x.iter().zip(y) {
        centered
            .iter_mut()
            .zip(v.as_ref())
            .zip(&x_mean)
            .for_each(|((c, a), m)| *c = a - m);
        let r = yi - y_mean;
        for i in 0..d {
            let ci = centered[i];
            rhs[i] += ci * r;
            for j in 0..=i {
                gram[i * d + j] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[j * d + i] = gram[i * d + j];
        }
    }

    let attempt = |lam: f64| -> Option<Vec<f64>> {
        let mut a = gram.clone();
        for i in 0..d {
            a[i * d + i] += lam;
        }
        cholesky(&mut a, d)?;
        let mut w = rhs.clone();
        cholesky_solve(&a, d, &mut w);
        Some(w)
    };

    let (w, used) = match attempt(lambda) {
        Some(w) => (w, lambda),
        None if lambda == 0.0 => match attempt(FALLBACK_RIDGE) {
            Some(w) => (w, FALLBACK_RIDGE),
            None => {
                // Scale the ridge to the Gram diagonal so all-zero columns still solve.
                let lam = FALLBACK_RIDGE * (0..d).map(|i| gram[i * d + i]).fold(1.0, f64::max);
                (
                    attempt(lam).ok_or_else(|| Error::Numeric("normal equations are singular".into()))?,
                    lam,
                )
            }
        },
        None => {
            return Err(Error::Numeric(format!(
                "normal equations are singular at ridge {lambda}"
            )))
        }
    };
    let intercept = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    RegressionModel::new(w, intercept, used)
}

/// Labelled sample for per-wear fitting.
pub trait Labelled {
    fn features(&self) -> &[f64];
    fn label(&self) -> f64;
    fn wear(&self) -> Wear;
}

impl Labelled for crate::features::FeatureVector {
    fn features(&self) -> &[f64] {
        self.values()
    }

    fn label(&self) -> f64 {
        self.mrr()
    }

    fn wear(&self) -> Wear {
        crate::features::FeatureVector::wear(self)
    }
}

/// Independent low- and high-wear models; a group with no samples yields `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerWear {
    pub low: Option<RegressionModel>,
    pub high: Option<RegressionModel>,
}

impl PerWear {
    pub fn get(&self, wear: Wear) -> Option<&RegressionModel> {
        match wear {
            Wear::Low => self.low.as_ref(),
            Wear::High => self.high.as_ref(),
            Wear::Unknown => None,
        }
    }

    /// Wear groups that had nothing to fit.
    pub fn absent(&self) -> Vec<Wear> {
        [Wear::Low, Wear::High]
            .into_iter()
            .filter(|w| self.get(*w).is_none())
            .collect()
    }
}

/// Fits one model per wear group on `pool`; runs of unknown wear are ignored.
///
/// The caller passes the training pool only (train plus validation).
pub fn fit_per_wear<S: Labelled>(pool: &[S], lambda: f64) -> Result<PerWear> {
    let fit = |wear: Wear| -> Result<Option<RegressionModel>> {
        let group: Vec<&S> = pool.iter().filter(|s| s.wear() == wear).collect();
        if group.is_empty() {
            return Ok(None);
        }
        let x: Vec<&[f64]> = group.iter().map(|s| s.features()).collect();
        let y: Vec<f64> = group.iter().map(|s| s.label()).collect();
        fit_ols(&x, &y, lambda).map(Some)
    };
    Ok(PerWear {
        low: fit(Wear::Low)?,
        high: fit(Wear::High)?,
    })
}

/// Evaluates each present model on the test samples of its wear group.
pub fn evaluate_per_wear<S: Labelled>(models: &PerWear, test: &[S]) -> Result<Vec<(Wear, EvalResult)>> {
    let mut out = Vec::new();
    for wear in [Wear::Low, Wear::High] {
        let Some(model) = models.get(wear) else { continue };
        let group: Vec<&S> = test.iter().filter(|s| s.wear() == wear).collect();
        if group.is_empty() {
            continue;
        }
        let x: Vec<&[f64]> = group.iter().map(|s| s.features()).collect();
        let y: Vec<f64> = group.iter().map(|s| s.label()).collect();
        out.push((wear, evaluate(model, &x, &y)?));
    }
    Ok(out)
}

/// One row of the RMSE table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub method: String,
    pub attempt: usize,
    pub wear: Wear,
    pub rmse: f64,
    pub n: usize,
}

pub fn write_rmse_csv(mut out: impl Write, rows: &[RmseRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(["method", "attempt", "wear", "rmse", "n"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.attempt.to_string(),
            r.wear.as_str().to_string(),
            format!("{}", r.rmse),
            r.n.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("rmse.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::Rng;

    fn sse(m: &RegressionModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(v, t)| (t - m.predict_one(v).unwrap()).powi(2))
            .sum()
    }

    #[test]
    fn exact_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.7]).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v[0] + 3.0).collect();
        let m = fit_ols(&x, &y, 0.0).unwrap();
        assert!((m.coefficients()[0] - 2.0).abs() < 1e-8);
        assert!((m.intercept() - 3.0).abs() < 1e-8);
        assert_eq!(m.lambda(), 0.0);
        assert!(evaluate(&m, &x, &y).unwrap().rmse < 1e-10);
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![4.5; 6];
        let m = fit_ols(&x, &y, 0.0).unwrap();
        for p in predict(&m, &x).unwrap() {
            assert!((p - 4.5).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_system_falls_back_to_ridge() {
        // Duplicated column makes XᵀX singular.
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| 1.0 + i as f64).collect();
        let m = fit_ols(&x, &y, 0.0).unwrap();
        assert!(m.lambda() > 0.0);
        assert!(evaluate(&m, &x, &y).unwrap().rmse < 1e-6);

        // All-constant features: intercept carries the mean.
        let x = vec![vec![1.0, 1.0]; 5];
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let m = fit_ols(&x, &y, 0.0).unwrap();
        assert!((m.predict_one(&[1.0, 1.0]).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn matches_pseudo_inverse() {
        let mut rng = rng_from_seed(17);
        let x: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 1.5 - v[0] + 0.3 * v[2] + 2.0 * v[4] + rng.random::<f64>() * 0.1)
            .collect();
        let m = fit_ols(&x, &y, 0.0).unwrap();

        let a = DMatrix::from_fn(30, 6, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
        let b = DVector::from_vec(y.clone());
        let beta = a.pseudo_inverse(1e-14).unwrap() * b;
        assert!((m.intercept() - beta[0]).abs() < 1e-6);
        for j in 0..5 {
            assert!((m.coefficients()[j] - beta[j + 1]).abs() < 1e-6);
        }
    }

    #[test]
    fn rmse_hand_values() {
        let m = RegressionModel::new(vec![1.0], 0.0, 0.0).unwrap();
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]];
        let y = vec![2.0, 1.0, 3.0, 7.0, 5.0];
        // Residuals 1, -1, 0, 3, 0.
        let r = evaluate(&m, &x, &y).unwrap();
        assert!((r.rmse - (11.0f64 / 5.0).sqrt()).abs() < 1e-15);
        assert_eq!(r.residuals, vec![1.0, -1.0, 0.0, 3.0, 0.0]);

        let shifted: Vec<f64> = x.iter().map(|v| v[0] - 2.5).collect();
        assert!((evaluate(&m, &x, &shifted).unwrap().rmse - 2.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let m = RegressionModel::new(vec![1.0, 2.0], 0.0, 0.0).unwrap();
        assert!(m.predict_one(&[1.0]).is_err());
        assert!(fit_ols::<Vec<f64>>(&[], &[], 0.0).is_err());
        assert!(fit_ols(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 2.0], 0.0).is_err());
    }

    struct S(Vec<f64>, f64, Wear);

    impl Labelled for S {
        fn features(&self) -> &[f64] {
            &self.0
        }
        fn label(&self) -> f64 {
            self.1
        }
        fn wear(&self) -> Wear {
            self.2
        }
    }

    #[test]
    fn per_wear_missing_group_and_isolation() {
        let low: Vec<S> = (0..10)
            .map(|i| S(vec![i as f64], 60.0 + i as f64 * 1.3, Wear::Low))
            .collect();
        let models = fit_per_wear(&low, 0.0).unwrap();
        assert!(models.high.is_none());
        assert_eq!(models.absent(), vec![Wear::High]);

        let mut mixed = low;
        mixed.extend((0..10).map(|i| S(vec![i as f64 * 3.0], 150.0 + i as f64, Wear::High)));
        mixed.push(S(vec![0.0], 120.0, Wear::Unknown));
        let both = fit_per_wear(&mixed, 0.0).unwrap();
        assert_eq!(both.low, models.low);
        assert!(both.high.is_some());
    }

    #[test]
    fn separate_models_beat_pooled_fit() {
        let mut rng = rng_from_seed(5);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for i in 0..200 {
            let x: f64 = rng.random();
            let (wear, y) = if i % 2 == 0 {
                (Wear::Low, 60.0 + 30.0 * x)
            } else {
                (Wear::High, 190.0 - 40.0 * x)
            };
            let s = S(vec![x], y + rng.random::<f64>(), wear);
            if i < 140 {
                train.push(s)
            } else {
                test.push(s)
            }
        }
        let separate = fit_per_wear(&train, 0.0).unwrap();
        let x: Vec<&[f64]> = train.iter().map(|s| s.features()).collect();
        let y: Vec<f64> = train.iter().map(|s| s.label()).collect();
        let pooled = fit_ols(&x, &y, 0.0).unwrap();
        for (wear, r) in evaluate_per_wear(&separate, &test).unwrap() {
            let g: Vec<&S> = test.iter().filter(|s| s.wear() == wear).collect();
            let gx: Vec<&[f64]> = g.iter().map(|s| s.features()).collect();
            let gy: Vec<f64> = g.iter().map(|s| s.label()).collect();
            assert!(r.rmse < evaluate(&pooled, &gx, &gy).unwrap().rmse);
        }
    }

    #[test]
    fn rmse_csv_layout() {
        let rows = vec![RmseRow {
            method: "moment12x4".into(),
            attempt: 0,
            wear: Wear::Low,
            rmse: 1.25,
            n: 4,
        }];
        let mut buf = Vec::new();
        write_rmse_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,attempt,wear,rmse,n\nmoment12x4,0,low,1.25,4\n"
        );
    }

    proptest! {
        #[test]
        fn fitted_coefficients_are_a_minimum(seed in 0u64..10_000, d in 1usize..4, j in 0usize..4, sign in prop::bool::ANY) {
            let mut rng = rng_from_seed(seed);
            let x: Vec<Vec<f64>> = (0..12).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
            let y: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 10.0).collect();
            let m = fit_ols(&x, &y, 0.0).unwrap();
            prop_assume!(m.lambda() == 0.0);
            let base = sse(&m, &x, &y);
            let mut c = m.coefficients().to_vec();
            c[j % d] += if sign { 1e-3 } else { -1e-3 };
            let p = RegressionModel::new(c, m.intercept(), 0.0).unwrap();
            prop_assert!(sse(&p, &x, &y) >= base - 1e-12 * base.max(1.0));
        }

        #[test]
        fn rmse_identity(res in prop::collection::vec(-100.0f64..100.0, 1..40)) {
            let r = rmse_of(&res);
            prop_assert!(r >= 0.0);
            let ss: f64 = res.iter().map(|v| v * v).sum();
            prop_assert!((r * r * res.len() as f64 - ss).abs() <= 1e-9 * ss.max(1e-300));
            prop_assert_eq!(r == 0.0, res.iter().all(|v| *v == 0.0));
        }
    }
}
