//! Long-format CSV ingestion and export.
//!
//! `runs.csv` holds one sample per row (`run_id,split,variable,t,value`) and
//! `labels.csv` one MRR per run (`run_id,mrr`).

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetSplit, Split, Variable, WaferRun};
use crate::error::{Error, Result};

const RUNS_HEADER: [&str; 5] = ["run_id", "split", "variable", "t", "value"];
const LABELS_HEADER: [&str; 2] = ["run_id", "mrr"];

/// File names of a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs_file: PathBuf,
    pub labels_file: PathBuf,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            runs_file: PathBuf::from("runs.csv"),
            labels_file: PathBuf::from("labels.csv"),
        }
    }
}

pub fn load_dataset(dir: &Path, manifest: &Manifest) -> Result<DatasetSplit> {
    let open = |name: &Path| {
        let path = dir.join(name);
        File::open(&path).map(BufReader::new).map_err(|e| Error::io(path, e))
    };
    read_dataset(open(&manifest.runs_file)?, open(&manifest.labels_file)?)
}

fn check_header(found: &csv::StringRecord, expected: &[&str], file: &str) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Data(format!(
            "{file}: expected header `{}`, found `{}`",
            expected.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

struct PendingRun {
    split: Split,
    series: BTreeMap<Variable, Vec<Option<f64>>>,
}

pub fn read_dataset(runs: impl Read, labels: impl Read) -> Result<DatasetSplit> {
    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, PendingRun> = HashMap::new();

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(runs);
    check_header(reader.headers()?, &RUNS_HEADER, "runs")?;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        let line = line_of(&record);
        let run_id = &record[0];
        let split: Split = record[1].parse()?;
        let variable: Variable = record[2].parse()?;
        let t: usize = record[3]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bad sample index `{}`", &record[3])))?;
        let value: f64 = record[4]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bad value `{}`", &record[4])))?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                run_id: run_id.to_string(),
                variable: variable.name().to_string(),
            });
        }

        let entry = match pending.get_mut(run_id) {
            Some(entry) => entry,
            None => {
                order.push(run_id.to_string());
                pending.entry(run_id.to_string()).or_insert(PendingRun {
                    split,
                    series: BTreeMap::new(),
                })
            }
        };
        if entry.split != split {
            return Err(Error::Data(format!(
                "line {line}: run `{run_id}` tagged with both `{}` and `{split}`",
                entry.split
            )));
        }
        let series = entry.series.entry(variable).or_default();
        if series.len() <= t {
            series.resize(t + 1, None);
        }
        if series[t].replace(value).is_some() {
            return Err(Error::Data(format!(
                "line {line}: duplicate sample t={t} for run `{run_id}`, variable `{variable}`"
            )));
        }
    }

    let mut mrr: HashMap<String, f64> = HashMap::new();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(labels);
    check_header(reader.headers()?, &LABELS_HEADER, "labels")?;
    while reader.read_record(&mut record)? {
        let line = line_of(&record);
        let value: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("labels line {line}: bad mrr `{}`", &record[1])))?;
        if !pending.contains_key(&record[0]) {
            return Err(Error::Data(format!(
                "labels line {line}: run `{}` has no series",
                &record[0]
            )));
        }
        if mrr.insert(record[0].to_string(), value).is_some() {
            return Err(Error::Data(format!(
                "labels line {line}: duplicate run `{}`",
                &record[0]
            )));
        }
    }

    let mut out = Vec::with_capacity(order.len());
    for run_id in order {
        let run = pending.remove(&run_id).expect("every ordered id is pending");
        let label = *mrr
            .get(&run_id)
            .ok_or_else(|| Error::Data(format!("run `{run_id}` has no MRR label")))?;
        let mut series = BTreeMap::new();
        for (var, samples) in run.series {
            let values = samples
                .into_iter()
                .enumerate()
                .map(|(t, v)| {
                    v.ok_or_else(|| Error::Data(format!("run `{run_id}`, variable `{var}`: missing sample t={t}")))
                })
                .collect::<Result<Vec<_>>>()?;
            series.insert(var, values);
        }
        out.push(WaferRun::new(run_id, series, label, run.split)?);
    }
    DatasetSplit::new(out)
}

/// Writes `dataset` into `dir` using the manifest's file names.
pub fn write_dataset(dir: &Path, manifest: &Manifest, dataset: &DatasetSplit) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &Path| {
        let path = dir.join(name);
        File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
    };

    let runs_path = dir.join(&manifest.runs_file);
    let mut runs = create(&manifest.runs_file)?;
    writeln!(runs, "{}", RUNS_HEADER.join(",")).map_err(|e| Error::io(&runs_path, e))?;
    for run in dataset.runs() {
        for var in run.variables() {
            for (t, v) in run.series(var).unwrap_or_default().iter().enumerate() {
                writeln!(runs, "{},{},{},{t},{v}", run.run_id(), run.split(), var)
                    .map_err(|e| Error::io(&runs_path, e))?;
            }
        }
    }
    runs.flush().map_err(|e| Error::io(&runs_path, e))?;

    let labels_path = dir.join(&manifest.labels_file);
    let mut labels = create(&manifest.labels_file)?;
    writeln!(labels, "{}", LABELS_HEADER.join(",")).map_err(|e| Error::io(&labels_path, e))?;
    for run in dataset.runs() {
        writeln!(labels, "{},{}", run.run_id(), run.mrr()).map_err(|e| Error::io(&labels_path, e))?;
    }
    labels.flush().map_err(|e| Error::io(&labels_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Wear;

    fn fixture(runs: &[(&str, &str, f64)], poison: Option<(&str, &str)>) -> (String, String) {
        let mut body = String::from("run_id,split,variable,t,value\n");
        let mut labels = String::from("run_id,mrr\n");
        for (id, split, mrr) in runs {
            for (i, var) in Variable::ALL.iter().enumerate() {
                for t in 0..3 {
                    let value = match poison {
                        Some((pid, pvar)) if pid == *id && pvar == var.name() && t == 1 => "NaN".to_string(),
                        _ => format!("{}", i as f64 + 0.5 * t as f64),
                    };
                    body.push_str(&format!("{id},{split},{var},{t},{value}\n"));
                }
            }
            labels.push_str(&format!("{id},{mrr}\n"));
        }
        (body, labels)
    }

    #[test]
    fn three_run_fixture() {
        let (runs, labels) = fixture(
            &[
                ("w1", "train", 75.0),
                ("w2", "validation", 150.0),
                ("w3", "test", 120.0),
            ],
            None,
        );
        let ds = read_dataset(runs.as_bytes(), labels.as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        let r = &ds.runs()[0];
        assert_eq!(r.run_id(), "w1");
        assert_eq!(r.split(), Split::Train);
        assert_eq!(r.wear(), Wear::Low);
        assert_eq!(r.series(Variable::UsageOfDresser).unwrap(), &[1.0, 1.5, 2.0]);
        assert_eq!(ds.runs()[1].wear(), Wear::High);
        assert_eq!(ds.runs()[1].split(), Split::Validation);
        assert_eq!(ds.runs()[2].wear(), Wear::Unknown);
    }

    #[test]
    fn nan_sample_names_run_and_variable() {
        let (runs, labels) = fixture(
            &[("w1", "train", 75.0), ("w2", "test", 80.0)],
            Some(("w2", "CENTER_AIR_BAG_PRESSURE")),
        );
        let err = read_dataset(runs.as_bytes(), labels.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("w2") && msg.contains("CENTER_AIR_BAG_PRESSURE"), "{msg}");
    }

    #[test]
    fn missing_variable_column_is_schema_error() {
        let (runs, labels) = fixture(&[("w1", "train", 75.0)], None);
        let runs: String = runs
            .lines()
            .filter(|l| !l.contains(",RIPPLE_AIR_BAG_PRESSURE,"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = read_dataset(runs.as_bytes(), labels.as_bytes()).unwrap_err();
        assert!(
            matches!(&err, Error::MissingVariable { variable, .. } if variable == "RIPPLE_AIR_BAG_PRESSURE"),
            "{err}"
        );
    }

    #[test]
    fn rows_may_arrive_out_of_order() {
        let (runs, labels) = fixture(&[("w1", "train", 75.0)], None);
        let mut lines: Vec<&str> = runs.lines().collect();
        let header = lines.remove(0);
        lines.reverse();
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let a = read_dataset(runs.as_bytes(), labels.as_bytes()).unwrap();
        let b = read_dataset(shuffled.as_bytes(), labels.as_bytes()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaps_and_bad_headers_are_rejected() {
        let (runs, labels) = fixture(&[("w1", "train", 75.0)], None);
        let gapped: String = runs
            .lines()
            .filter(|l| !l.ends_with(",HEAD_ROTATION,1,17.5"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(read_dataset(gapped.as_bytes(), labels.as_bytes()).is_err());

        let bad = runs.replacen("run_id,split", "id,split", 1);
        assert!(read_dataset(bad.as_bytes(), labels.as_bytes()).is_err());

        assert!(read_dataset(runs.as_bytes(), "run_id,mrr\n".as_bytes()).is_err());
    }

    #[test]
    fn write_then_read_round_trips() {
        let (runs, labels) = fixture(&[("a", "train", 61.25), ("b", "test", 187.0)], None);
        let ds = read_dataset(runs.as_bytes(), labels.as_bytes()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest::default();
        write_dataset(dir.path(), &manifest, &ds).unwrap();
        let back = load_dataset(dir.path(), &manifest).unwrap();
        assert_eq!(ds, back);
    }
}
