//! Seeded synthetic stand-in for the CMP dataset.
//!
//! Each run draws three hidden factors:
//!
//! * a discrete pressure regime `g ∈ {0, 1}`,
//! * a continuous consumable-usage level `u ∈ [0, 1]`,
//! * a nuisance phase `φ ∈ [0, 1]` that moves the pressure profile in time
//!   and has no effect on the label.
//!
//! The label is a monotone map of `(g, u)` into the run's wear bin:
//!
//! ```text
//! s   = regime_share * g + (1 - regime_share) * u
//! MRR = lo + (hi - lo) * clamp(0.05 + 0.9 * s + label_noise * N(0, 1), 0, 1)
//! ```
//!
//! Usage channels are counters whose level and slope grow with `u`. Pressure
//! channels carry a plateau whose level is shifted by `regime_shift * g` and
//! whose onset and height are set by `φ`. Every usage and pressure channel
//! also gets its own per-run offset of scale `run_noise`, so the two regimes
//! form distinct but overlapping clusters rather than a linearly trivial split. Slurry and rotation channels are label-free: a
//! random per-run operating level plus a random walk scaled by
//! `redundant_noise`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DatasetSplit, Family, Split, Variable, WaferRun, Wear};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Run counts per (split, wear) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    /// Low wear runs for train, validation, test.
    pub low: [usize; 3],
    /// High wear runs for train, validation, test.
    pub high: [usize; 3],
}

impl CellCounts {
    pub fn uniform(n: usize) -> Self {
        CellCounts {
            low: [n; 3],
            high: [n; 3],
        }
    }

    pub fn get(&self, split: Split, wear: Wear) -> usize {
        let idx = split as usize;
        match wear {
            Wear::Low => self.low[idx],
            Wear::High => self.high[idx],
            Wear::Unknown => 0,
        }
    }

    pub fn total(&self) -> usize {
        self.low.iter().chain(self.high.iter()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub counts: CellCounts,
    pub series_length: usize,
    /// Standard deviation of white sensor noise.
    pub noise_scale: f64,
    /// Scale of the label-free drift on slurry and rotation channels.
    pub redundant_noise: f64,
    /// Share of the wear bin explained by the discrete regime.
    pub regime_share: f64,
    /// Pressure offset separating the two regimes.
    pub regime_shift: f64,
    /// Standard deviation of the per-run pressure offset that blurs the regimes.
    pub run_noise: f64,
    /// Label noise as a fraction of the wear-bin width.
    pub label_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            counts: CellCounts {
                low: [600, 150, 150],
                high: [120, 30, 30],
            },
            series_length: 400,
            noise_scale: 0.05,
            redundant_noise: 1.0,
            regime_share: 0.85,
            regime_shift: 1.0,
            run_noise: 0.4,
            label_noise: 0.02,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.series_length < 2 {
            return Err(Error::invalid("series_length must be at least 2"));
        }
        for (name, v) in [("noise_scale", self.noise_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("redundant_noise", self.redundant_noise),
            ("regime_shift", self.regime_shift),
            ("run_noise", self.run_noise),
            ("label_noise", self.label_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.regime_share) {
            return Err(Error::invalid("regime_share must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Factors {
    regime: f64,
    usage: f64,
    phase: f64,
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn mrr_for(spec: &SyntheticSpec, wear: Wear, f: Factors, rng: &mut impl Rng) -> f64 {
    let (lo, hi) = wear.bin().expect("generated cells are low or high wear");
    let s = spec.regime_share * f.regime + (1.0 - spec.regime_share) * f.usage;
    let frac = (0.05 + 0.9 * s + spec.label_noise * normal(rng)).clamp(0.0, 1.0);
    (lo + (hi - lo) * frac).clamp(lo, hi)
}

fn series_for(spec: &SyntheticSpec, var: Variable, f: Factors, rng: &mut impl Rng) -> Vec<f64> {
    let len = spec.series_length;
    let idx = var as usize;
    let time = |k: usize| k as f64 / (len - 1) as f64;
    match var.family() {
        Family::Usage => {
            let ch = idx as f64;
            let level = (1.0 + 0.2 * ch) * (0.4 * f.usage + spec.run_noise * normal(rng));
            let slope = (0.2 + 0.05 * ch) * (0.5 + 0.4 * f.usage);
            (0..len)
                .map(|k| level + slope * time(k) + spec.noise_scale * normal(rng))
                .collect()
        }
        Family::Pressure => {
            let ch = (idx - 6) as f64;
            let base = 1.0 + 0.1 * ch;
            let onset = 0.15 + 0.5 * f.phase;
            let height = 0.3 * (1.0 + f.phase) * (1.0 + 0.15 * ch);
            let shift = spec.regime_shift * (1.0 + 0.2 * ch) * f.regime + spec.run_noise * normal(rng);
            (0..len)
                .map(|k| {
                    let t = time(k);
                    let ramp = 0.5 * (1.0 + ((t - onset) * 40.0).tanh());
                    base + shift + height * ramp + spec.noise_scale * normal(rng)
                })
                .collect()
        }
        Family::Slurry | Family::Rotation => {
            let level = 1.0 + spec.redundant_noise * normal(rng);
            let freq = 2.0 + (idx % 3) as f64;
            let amp = 0.2 * spec.redundant_noise.max(spec.noise_scale) * rng.random::<f64>();
            let mut walk = 0.0;
            let step = spec.redundant_noise / (len as f64).sqrt();
            (0..len)
                .map(|k| {
                    walk += step * normal(rng);
                    level + walk + amp * (2.0 * PI * freq * time(k)).sin() + spec.noise_scale * normal(rng)
                })
                .collect()
        }
    }
}

/// Generates a dataset honoring `spec.counts`; identical specs give identical output.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut runs = Vec::with_capacity(spec.counts.total());
    for split in Split::ALL {
        for wear in [Wear::Low, Wear::High] {
            for i in 0..spec.counts.get(split, wear) {
                let factors = Factors {
                    regime: if rng.random::<bool>() { 1.0 } else { 0.0 },
                    usage: rng.random::<f64>(),
                    phase: rng.random::<f64>(),
                };
                let mrr = mrr_for(spec, wear, factors, &mut rng);
                let series: BTreeMap<_, _> = Variable::ALL
                    .iter()
                    .map(|v| (*v, series_for(spec, *v, factors, &mut rng)))
                    .collect();
                let id = format!("{}-{}-{i:05}", split.as_str(), wear.as_str());
                runs.push(WaferRun::new(id, series, mrr, split)?);
            }
        }
    }
    DatasetSplit::new(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            seed,
            counts: CellCounts::uniform(10),
            series_length: 40,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_synthetic(&small(1)).unwrap();
        let b = generate_synthetic(&small(1)).unwrap();
        assert_eq!(a, b);
        let bits = |d: &DatasetSplit| -> Vec<u64> {
            d.runs()
                .iter()
                .flat_map(|r| {
                    let mut v = vec![r.mrr().to_bits()];
                    for var in r.variables() {
                        v.extend(r.series(var).unwrap().iter().map(|x| x.to_bits()));
                    }
                    v
                })
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn different_seeds_differ() {
        let a: Vec<f64> = generate_synthetic(&small(1))
            .unwrap()
            .runs()
            .iter()
            .map(|r| r.mrr())
            .collect();
        let b: Vec<f64> = generate_synthetic(&small(2))
            .unwrap()
            .runs()
            .iter()
            .map(|r| r.mrr())
            .collect();
        assert_ne!(a, b);
    }

    #[test]
    fn counts_and_bins_are_honored() {
        let spec = SyntheticSpec {
            counts: CellCounts {
                low: [7, 0, 3],
                high: [2, 4, 0],
            },
            series_length: 16,
            ..small(5)
        };
        let ds = generate_synthetic(&spec).unwrap();
        assert_eq!(ds.len(), 16);
        assert_eq!(ds.counts().get(Split::Train, Wear::Low), 7);
        assert_eq!(ds.counts().get(Split::Validation, Wear::Low), 0);
        assert_eq!(ds.counts().get(Split::Test, Wear::Low), 3);
        assert_eq!(ds.counts().get(Split::Validation, Wear::High), 4);
        for run in ds.runs() {
            let (lo, hi) = run.wear().bin().unwrap();
            assert!((lo..=hi).contains(&run.mrr()));
            assert_eq!(run.series(Variable::HeadRotation).unwrap().len(), 16);
        }
    }

    #[test]
    fn default_series_length_is_400() {
        assert_eq!(SyntheticSpec::default().series_length, 400);
    }

    #[test]
    fn low_wear_cells_stay_in_bin_even_with_heavy_label_noise() {
        let spec = SyntheticSpec {
            counts: CellCounts {
                low: [40, 0, 0],
                high: [0, 0, 0],
            },
            label_noise: 2.0,
            ..small(9)
        };
        for run in generate_synthetic(&spec).unwrap().runs() {
            assert!((50.0..=100.0).contains(&run.mrr()));
            assert_eq!(run.wear(), Wear::Low);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate_synthetic(&SyntheticSpec {
            noise_scale: 0.0,
            ..small(1)
        })
        .is_err());
        assert!(generate_synthetic(&SyntheticSpec {
            series_length: 1,
            ..small(1)
        })
        .is_err());
        assert!(generate_synthetic(&SyntheticSpec {
            regime_share: 1.5,
            ..small(1)
        })
        .is_err());
    }
}
