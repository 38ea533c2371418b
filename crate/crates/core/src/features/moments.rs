use serde::{Deserialize, Serialize};

use crate::data::{VariablePreset, WaferRun};
use crate::error::{Error, Result};

use super::{Extractor, FeatureVector};

/// Population central moments of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    /// Plain (non-excess) kurtosis.
    pub kurtosis: f64,
}

impl Moments {
    pub fn to_array(self) -> [f64; 4] {
        [self.mean, self.std, self.skewness, self.kurtosis]
    }
}

/// Mean, population standard deviation, skewness and kurtosis.
///
/// A flat series has `std == 0`; its skewness and kurtosis are reported as 0.
pub fn central_moments(series: &[f64]) -> Result<Moments> {
    if series.len() < 2 {
        return Err(Error::invalid(format!(
            "central moments need at least 2 samples, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite sample in series".into()));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    // Relative guard: rounding in the mean can leave a tiny m2 on flat input.
    let scale = series.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    if std <= 1e-12 * scale {
        return Ok(Moments {
            mean,
            std: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
        });
    }
    Ok(Moments {
        mean,
        std,
        skewness: m3 / (m2 * std),
        kurtosis: m4 / (m2 * m2),
    })
}

/// Concatenates `(mean, std, skew, kurt)` for each preset variable in canonical order.
pub fn extract_moments(run: &WaferRun, preset: VariablePreset) -> Result<FeatureVector> {
    let vars = preset.variables();
    let mut values = Vec::with_capacity(4 * vars.len());
    for var in &vars {
        let series = run.series(*var).ok_or_else(|| Error::MissingVariable {
            run_id: run.run_id().to_string(),
            variable: var.name().to_string(),
        })?;
        values.extend(central_moments(series)?.to_array());
    }
    let extractor = match preset {
        VariablePreset::All18 => Extractor::Moment18x4,
        VariablePreset::UsagePressure12 => Extractor::Moment12x4,
    };
    FeatureVector::from_run(run, values, extractor)
}
