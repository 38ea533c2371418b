//! Fixed-length feature vectors from wafer runs.

mod moments;
mod normalize;
mod pca;
mod rawspace;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Split, WaferRun, Wear};
use crate::error::{Error, Result};

pub use moments::{central_moments, extract_moments, Moments};
pub use normalize::Normalizer;
pub use pca::{fit_pca, PcaModel};
pub use rawspace::{downsample_series, extract_rawspace, BLOCK, RAW_LENGTH, REDUCED_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Extractor {
    Moment18x4,
    Moment12x4,
    RawSpace12x50,
    Pca30,
    Latent,
}

impl Extractor {
    /// Output dimension, or `None` for latent vectors whose width is the encoder's.
    pub fn dim(self) -> Option<usize> {
        match self {
            Extractor::Moment18x4 => Some(72),
            Extractor::Moment12x4 => Some(48),
            Extractor::RawSpace12x50 => Some(600),
            Extractor::Pca30 => Some(30),
            Extractor::Latent => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Extractor::Moment18x4 => "Moment18x4",
            Extractor::Moment12x4 => "Moment12x4",
            Extractor::RawSpace12x50 => "RawSpace12x50",
            Extractor::Pca30 => "PCA30",
            Extractor::Latent => "Latent",
        }
    }
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Extractor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "moment18x4" => Ok(Extractor::Moment18x4),
            "moment12x4" => Ok(Extractor::Moment12x4),
            "rawspace12x50" => Ok(Extractor::RawSpace12x50),
            "pca30" => Ok(Extractor::Pca30),
            "latent" => Ok(Extractor::Latent),
            _ => Err(Error::invalid(format!("unknown extractor `{s}`"))),
        }
    }
}

/// A feature vector tagged with the run it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    run_id: String,
    values: Vec<f64>,
    extractor: Extractor,
    mrr: f64,
    split: Split,
    wear: Wear,
}

impl FeatureVector {
    pub fn new(
        run_id: impl Into<String>,
        values: Vec<f64>,
        extractor: Extractor,
        mrr: f64,
        split: Split,
        wear: Wear,
    ) -> Result<Self> {
        if let Some(dim) = extractor.dim() {
            if values.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: values.len(),
                });
            }
        }
        let run_id = run_id.into();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite {extractor} feature for run `{run_id}`"
            )));
        }
        Ok(FeatureVector {
            run_id,
            values,
            extractor,
            mrr,
            split,
            wear,
        })
    }

    pub(crate) fn from_run(run: &WaferRun, values: Vec<f64>, extractor: Extractor) -> Result<Self> {
        Self::new(run.run_id(), values, extractor, run.mrr(), run.split(), run.wear())
    }

    /// Same provenance, new values.
    pub fn with_values(&self, values: Vec<f64>, extractor: Extractor) -> Result<Self> {
        Self::new(self.run_id.clone(), values, extractor, self.mrr, self.split, self.wear)
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn extractor(&self) -> Extractor {
        self.extractor
    }

    pub fn mrr(&self) -> f64 {
        self.mrr
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn wear(&self) -> Wear {
        self.wear
    }
}

/// Writes `run_id,mrr,f0..f{D-1}` rows.
impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub fn write_features_csv(mut out: impl Write, features: &[FeatureVector]) -> Result<()> {
    let dim = features.first().map_or(0, FeatureVector::dim);
    let io = |e| Error::io("<features>", e);
    let mut header = String::from("run_id,mrr");
    for i in 0..dim {
        header.push_str(&format!(",f{i}"));
    }
    writeln!(out, "{header}").map_err(io)?;
    for fv in features {
        if fv.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: fv.dim(),
            });
        }
        let mut line = format!("{},{}", fv.run_id, fv.mrr);
        for v in &fv.values {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}
