use crate::data::{VariablePreset, WaferRun};
use crate::error::{Error, Result};

use super::{Extractor, FeatureVector};

/// Series length every channel is harmonized to before downsampling.
pub const RAW_LENGTH: usize = 400;
/// Downsampling factor.
pub const BLOCK: usize = 8;
/// Per-channel length after downsampling.
pub const REDUCED_LENGTH: usize = RAW_LENGTH / BLOCK;

fn resample_linear(series: &[f64], len: usize) -> Vec<f64> {
    let n = series.len();
    if n == len {
        return series.to_vec();
    }
    let scale = (n - 1) as f64 / (len - 1) as f64;
    (0..len)
        .map(|k| {
            let pos = k as f64 * scale;
            let i = (pos.floor() as usize).min(n - 2);
            let frac = pos - i as f64;
            series[i] * (1.0 - frac) + series[i + 1] * frac
        })
        .collect()
}

/// Resamples to 400 points and averages consecutive blocks of 8, giving 50 values.
pub fn downsample_series(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < BLOCK {
        return Err(Error::invalid(format!(
            "series of length {} is shorter than the downsampling block {BLOCK}",
            series.len()
        )));
    }
    let full = resample_linear(series, RAW_LENGTH);
    Ok(full
        .chunks_exact(BLOCK)
        .map(|c| c.iter().sum::<f64>() / BLOCK as f64)
        .collect())
}

/// Unnormalized 600-dim concatenation of the 12 usage/pressure channels.
///
/// Feed the result through a [`super::Normalizer`] fit on training runs.
pub fn extract_rawspace(run: &WaferRun) -> Result<FeatureVector> {
    let vars = VariablePreset::UsagePressure12.variables();
    let mut values = Vec::with_capacity(vars.len() * REDUCED_LENGTH);
    for var in vars {
        let series = run.series(var).ok_or_else(|| Error::MissingVariable {
            run_id: run.run_id().to_string(),
            variable: var.name().to_string(),
        })?;
        values.extend(downsample_series(series)?);
    }
    FeatureVector::from_run(run, values, Extractor::RawSpace12x50)
}
