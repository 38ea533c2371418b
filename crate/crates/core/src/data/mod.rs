//! Wafer-run datasets: ingestion, partitioning and synthetic generation.

mod csv_io;
mod synthetic;
mod variable;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_dataset, read_dataset, write_dataset, Manifest};
pub use synthetic::{generate_synthetic, CellCounts, SyntheticSpec};
pub use variable::{Family, Variable, VariablePreset};

/// Closed MRR interval for low wear runs.
pub const LOW_WEAR_BIN: (f64, f64) = (50.0, 100.0);
/// Closed MRR interval for high wear runs.
pub const HIGH_WEAR_BIN: (f64, f64) = (140.0, 200.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wear {
    Low,
    High,
    Unknown,
}

impl Wear {
    pub const ALL: [Wear; 3] = [Wear::Low, Wear::High, Wear::Unknown];

    /// Wear bin of an MRR value; values outside both bins are `Unknown`.
    pub fn from_mrr(mrr: f64) -> Wear {
        if (LOW_WEAR_BIN.0..=LOW_WEAR_BIN.1).contains(&mrr) {
            Wear::Low
        } else if (HIGH_WEAR_BIN.0..=HIGH_WEAR_BIN.1).contains(&mrr) {
            Wear::High
        } else {
            Wear::Unknown
        }
    }

    pub fn bin(self) -> Option<(f64, f64)> {
        match self {
            Wear::Low => Some(LOW_WEAR_BIN),
            Wear::High => Some(HIGH_WEAR_BIN),
            Wear::Unknown => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Wear::Low => "low",
            Wear::High => "high",
            Wear::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Wear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One polishing run: a set of named sensor series plus its MRR label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaferRun {
    run_id: String,
    series: BTreeMap<Variable, Vec<f64>>,
    mrr: f64,
    split: Split,
    wear: Wear,
}

impl WaferRun {
    /// Builds a full 18-variable run, validating every series.
    pub fn new(
        run_id: impl Into<String>,
        series: BTreeMap<Variable, Vec<f64>>,
        mrr: f64,
        split: Split,
    ) -> Result<Self> {
        let run_id = run_id.into();
        if let Some(missing) = Variable::ALL.iter().find(|v| !series.contains_key(v)) {
            return Err(Error::MissingVariable {
                run_id,
                variable: missing.name().to_string(),
            });
        }
        Self::from_parts(run_id, series, mrr, split)
    }

    fn from_parts(run_id: String, series: BTreeMap<Variable, Vec<f64>>, mrr: f64, split: Split) -> Result<Self> {
        for (var, values) in &series {
            if values.len() < 2 {
                return Err(Error::Data(format!(
                    "run `{run_id}`, variable `{var}`: series needs at least 2 samples, got {}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    run_id,
                    variable: var.name().to_string(),
                });
            }
        }
        if !mrr.is_finite() || mrr < 0.0 {
            return Err(Error::Data(format!(
                "run `{run_id}`: MRR must be finite and non-negative, got {mrr}"
            )));
        }
        Ok(WaferRun {
            run_id,
            series,
            mrr,
            split,
            wear: Wear::from_mrr(mrr),
        })
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
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

    pub fn series(&self, var: Variable) -> Option<&[f64]> {
        self.series.get(&var).map(Vec::as_slice)
    }

    /// Variables present, in canonical order.
    pub fn variables(&self) -> impl Iterator<Item = Variable> + '_ {
        self.series.keys().copied()
    }

    pub fn n_variables(&self) -> usize {
        self.series.len()
    }

    /// Applies `f` to every sample of every series.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<WaferRun> {
        let series = self
            .series
            .iter()
            .map(|(k, v)| (*k, v.iter().map(|x| f(*x)).collect()))
            .collect();
        Self::from_parts(self.run_id.clone(), series, self.mrr, self.split)
    }

    /// Returns a copy restricted to exactly `vars`.
    pub fn select_variables(&self, vars: &[Variable]) -> Result<WaferRun> {
        let mut series = BTreeMap::new();
        for var in vars {
            let values = self.series.get(var).ok_or_else(|| Error::MissingVariable {
                run_id: self.run_id.clone(),
                variable: var.name().to_string(),
            })?;
            series.insert(*var, values.clone());
        }
        Ok(WaferRun {
            run_id: self.run_id.clone(),
            series,
            mrr: self.mrr,
            split: self.split,
            wear: self.wear,
        })
    }

    /// Like [`WaferRun::select_variables`] but takes variable names.
    pub fn select_by_name<S: AsRef<str>>(&self, names: &[S]) -> Result<WaferRun> {
        let vars = names
            .iter()
            .map(|n| n.as_ref().parse::<Variable>())
            .collect::<Result<Vec<_>>>()?;
        self.select_variables(&vars)
    }

    pub fn select_preset(&self, preset: VariablePreset) -> Result<WaferRun> {
        self.select_variables(&preset.variables())
    }
}

/// Per-(split, wear) run tallies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts(BTreeMap<(Split, Wear), usize>);

impl Counts {
    pub fn get(&self, split: Split, wear: Wear) -> usize {
        self.0.get(&(split, wear)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((Split, Wear), usize)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }
}

/// An ordered collection of runs with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    runs: Vec<WaferRun>,
    counts: Counts,
}

impl DatasetSplit {
    pub fn new(runs: Vec<WaferRun>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(runs.len());
        let mut counts = Counts::default();
        for run in &runs {
            if !seen.insert(run.run_id.as_str()) {
                return Err(Error::Data(format!("duplicate run_id `{}`", run.run_id)));
            }
            *counts.0.entry((run.split, run.wear)).or_default() += 1;
        }
        Ok(DatasetSplit { runs, counts })
    }

    pub fn runs(&self) -> &[WaferRun] {
        &self.runs
    }

    pub fn counts(&self) -> &Counts {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Runs whose split is in `splits` and whose wear equals `wear`, in dataset order.
    pub fn select<'a>(&'a self, splits: &'a [Split], wear: Wear) -> impl Iterator<Item = &'a WaferRun> + 'a {
        self.runs
            .iter()
            .filter(move |r| splits.contains(&r.split) && r.wear == wear)
    }

    pub fn into_runs(self) -> Vec<WaferRun> {
        self.runs
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn flat_run(id: &str, mrr: f64, split: Split, len: usize) -> WaferRun {
        let series = Variable::ALL
            .iter()
            .enumerate()
            .map(|(i, v)| (*v, (0..len).map(|t| (i * len + t) as f64).collect()))
            .collect();
        WaferRun::new(id, series, mrr, split).unwrap()
    }

    #[test]
    fn wear_bins_are_closed_and_disjoint() {
        assert_eq!(Wear::from_mrr(50.0), Wear::Low);
        assert_eq!(Wear::from_mrr(75.0), Wear::Low);
        assert_eq!(Wear::from_mrr(100.0), Wear::Low);
        assert_eq!(Wear::from_mrr(120.0), Wear::Unknown);
        assert_eq!(Wear::from_mrr(140.0), Wear::High);
        assert_eq!(Wear::from_mrr(150.0), Wear::High);
        assert_eq!(Wear::from_mrr(200.0), Wear::High);
        assert_eq!(Wear::from_mrr(49.9), Wear::Unknown);
        assert_eq!(Wear::from_mrr(200.1), Wear::Unknown);
    }

    #[test]
    fn missing_variable_is_named() {
        let mut series: BTreeMap<_, _> = Variable::ALL.iter().map(|v| (*v, vec![0.0, 1.0])).collect();
        series.remove(&Variable::HeadRotation);
        let err = WaferRun::new("r1", series, 70.0, Split::Train).unwrap_err();
        assert!(err.to_string().contains("HEAD_ROTATION"), "{err}");
    }

    #[test]
    fn nan_sample_is_rejected() {
        let mut series: BTreeMap<_, _> = Variable::ALL.iter().map(|v| (*v, vec![0.0, 1.0])).collect();
        series.insert(Variable::StageRotation, vec![0.0, f64::NAN]);
        let err = WaferRun::new("r9", series, 70.0, Split::Train).unwrap_err();
        match err {
            Error::NonFinite { run_id, variable } => {
                assert_eq!(run_id, "r9");
                assert_eq!(variable, "STAGE_ROTATION");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn twelve_var_selection() {
        let run = flat_run("a", 70.0, Split::Train, 4);
        let sel = run.select_preset(VariablePreset::UsagePressure12).unwrap();
        assert_eq!(sel.n_variables(), 12);
        assert!(sel
            .variables()
            .all(|v| matches!(v.family(), Family::Usage | Family::Pressure)));
        assert_eq!(
            sel.series(Variable::UsageOfDresser),
            run.series(Variable::UsageOfDresser)
        );
    }

    #[test]
    fn selecting_all_is_identity() {
        let run = flat_run("a", 70.0, Split::Train, 4);
        let names: Vec<_> = Variable::ALL.iter().map(|v| v.name()).collect();
        assert_eq!(run.select_by_name(&names).unwrap(), run);
    }

    #[test]
    fn misspelled_filter_is_named() {
        let run = flat_run("a", 70.0, Split::Train, 4);
        let err = run
            .select_by_name(&["USAGE_OF_DRESSER", "CENTRE_AIR_BAG_PRESSURE"])
            .unwrap_err();
        assert!(err.to_string().contains("CENTRE_AIR_BAG_PRESSURE"));
    }

    #[test]
    fn counts_partition_the_runs() {
        let runs = vec![
            flat_run("a", 70.0, Split::Train, 3),
            flat_run("b", 150.0, Split::Train, 3),
            flat_run("c", 120.0, Split::Test, 3),
            flat_run("d", 60.0, Split::Validation, 3),
        ];
        let ds = DatasetSplit::new(runs).unwrap();
        assert_eq!(ds.counts().get(Split::Train, Wear::Low), 1);
        assert_eq!(ds.counts().get(Split::Train, Wear::High), 1);
        assert_eq!(ds.counts().get(Split::Test, Wear::Unknown), 1);
        assert_eq!(ds.counts().total(), ds.len());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let runs = vec![
            flat_run("a", 70.0, Split::Train, 3),
            flat_run("a", 80.0, Split::Test, 3),
        ];
        assert!(DatasetSplit::new(runs).is_err());
    }
}
