//! Experiment report: JSON snapshot, rendered tables and CSV side files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Wear;
use crate::error::{Error, Result};
use crate::regression::{write_rmse_csv, RmseRow};

use super::config::RunConfig;
use super::experiment::{run_attempt, Method, TrainRecord};

pub const REPORT_FILE: &str = "report.json";
pub const TABLES_FILE: &str = "tables.txt";
pub const TRACE_FILE: &str = "loss_trace.csv";
pub const RMSE_FILE: &str = "rmse.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";

/// Histogram bin width in MRR units.
pub const HIST_WIDTH: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

/// RMSE of one method on one wear group across attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub wear: Wear,
    /// One value per attempt, in attempt order.
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 with a single attempt.
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// False when an attempt failed; everything before the failure is kept.
    pub complete: bool,
    pub failure: Option<String>,
    pub attempts_completed: usize,
    pub config: BTreeMap<String, String>,
    pub environment: Environment,
    pub rows: Vec<RmseRow>,
    pub summary: Vec<Summary>,
    pub histogram: Vec<HistBin>,
    pub training: Vec<TrainRecord>,
}

fn method_order(name: &str) -> (usize, String) {
    let idx = Method::from_str(name)
        .ok()
        .and_then(|m| Method::ALL.iter().position(|x| *x == m))
        .unwrap_or(Method::ALL.len());
    (idx, name.to_string())
}

fn label(name: &str) -> String {
    Method::from_str(name)
        .map(|m| m.label().to_string())
        .unwrap_or_else(|_| name.to_string())
}

type Groups = BTreeMap<((usize, String), Wear), Vec<(usize, f64)>>;

/// Groups rows by method and wear; methods follow the canonical order.
pub fn summarize(rows: &[RmseRow]) -> Vec<Summary> {
    let mut groups: Groups = BTreeMap::new();
    for r in rows {
        groups
            .entry((method_order(&r.method), r.wear))
            .or_default()
            .push((r.attempt, r.rmse));
    }
    groups
        .into_iter()
        .map(|(((_, method), wear), mut v)| {
            v.sort_by_key(|(a, _)| *a);
            let values: Vec<f64> = v.into_iter().map(|(_, x)| x).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = if values.len() > 1 {
                (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Summary {
                method,
                wear,
                values,
                mean,
                std,
            }
        })
        .collect()
}

/// Counts labels in 5-unit bins over both wear ranges. The last bin of each
/// range is closed on the right; labels outside both ranges are dropped.
pub fn histogram(labels: impl IntoIterator<Item = f64>) -> Vec<HistBin> {
    let mut bins: Vec<HistBin> = [Wear::Low, Wear::High]
        .into_iter()
        .filter_map(Wear::bin)
        .flat_map(|(lo, hi)| {
            let n = ((hi - lo) / HIST_WIDTH).round() as usize;
            (0..n).map(move |i| HistBin {
                lo: lo + i as f64 * HIST_WIDTH,
                hi: lo + (i + 1) as f64 * HIST_WIDTH,
                count: 0,
            })
        })
        .collect();
    for y in labels {
        let Some((lo, hi)) = Wear::from_mrr(y).bin() else {
            continue;
        };
        let i = bins.iter().position(|b| b.lo == lo).expect("every wear range has bins");
        let n = ((hi - lo) / HIST_WIDTH).round() as usize;
        let k = (((y - lo) / HIST_WIDTH).floor() as usize).min(n - 1);
        bins[i + k].count += 1;
    }
    bins
}

/// Byte offset of a 1-based line and column in `text`.
pub fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

impl ExperimentReport {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Format(format!(
                "report parse error at byte {}: {e}",
                byte_offset(text, e.line(), e.column())
            ))
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text tables: feature baselines, autoencoder objectives, then
    /// per-attempt values.
    pub fn render_tables(&self) -> String {
        let mut by_method: Vec<(String, BTreeMap<Wear, &Summary>)> = Vec::new();
        for s in &self.summary {
            match by_method.last_mut() {
                Some((m, map)) if *m == s.method => {
                    map.insert(s.wear, s);
                }
                _ => by_method.push((s.method.clone(), BTreeMap::from([(s.wear, s)]))),
            }
        }
        let cell = |map: &BTreeMap<Wear, &Summary>, w: Wear| match map.get(&w) {
            Some(s) => format!("{:.3} ± {:.3}", s.mean, s.std),
            None => "-".to_string(),
        };
        let is_ae = |m: &str| Method::from_str(m).map(Method::is_autoencoder).unwrap_or(true);
        let mut out = String::new();
        if !self.complete {
            let _ = writeln!(
                out,
                "INCOMPLETE after {} attempt(s): {}\n",
                self.attempts_completed,
                self.failure.as_deref().unwrap_or("unknown failure")
            );
        }
        for (title, ae) in [("Feature baselines", false), ("Autoencoder objectives", true)] {
            let rows: Vec<_> = by_method.iter().filter(|(m, _)| is_ae(m) == ae).collect();
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(out, "{title} (test RMSE, mean ± std over attempts)");
            let _ = writeln!(out, "{:<22} {:>18} {:>18}", "method", "low wear", "high wear");
            for (m, map) in rows {
                let _ = writeln!(
                    out,
                    "{:<22} {:>18} {:>18}",
                    label(m),
                    cell(map, Wear::Low),
                    cell(map, Wear::High)
                );
            }
            out.push('\n');
        }
        if !self.summary.is_empty() {
            let _ = writeln!(out, "Per-attempt test RMSE");
            for s in &self.summary {
                let vals: Vec<String> = s.values.iter().map(|v| format!("{v:.3}")).collect();
                let _ = writeln!(
                    out,
                    "{:<22} {:<5} {}",
                    label(&s.method),
                    s.wear.as_str(),
                    vals.join(" ")
                );
            }
        }
        out
    }

    pub fn write_trace_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["attempt", "method", "iter", "phase", "loss"])?;
        for rec in &self.training {
            for p in &rec.report.trace {
                w.write_record([
                    rec.attempt.to_string(),
                    rec.method.as_str().to_string(),
                    p.iter.to_string(),
                    p.phase.as_str().to_string(),
                    format!("{}", p.loss(rec.report.loss_weights)),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(TRACE_FILE, e))?;
        Ok(())
    }

    pub fn write_histogram_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lo", "hi", "count"])?;
        for b in &self.histogram {
            w.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(HISTOGRAM_FILE, e))?;
        Ok(())
    }

    /// Writes the tables and CSV files derived from the report.
    pub fn write_derived(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(TABLES_FILE);
        fs::write(&path, self.render_tables()).map_err(|e| Error::io(&path, e))?;
        let create = |name: &str| {
            let path = dir.join(name);
            fs::File::create(&path)
                .map(std::io::BufWriter::new)
                .map_err(|e| Error::io(&path, e))
        };
        write_rmse_csv(create(RMSE_FILE)?, &self.rows)?;
        self.write_trace_csv(create(TRACE_FILE)?)?;
        self.write_histogram_csv(create(HISTOGRAM_FILE)?)?;
        Ok(())
    }

    /// Writes `report.json` and every derived file.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(REPORT_FILE);
        fs::write(&path, self.to_json()?).map_err(|e| Error::io(&path, e))?;
        self.write_derived(dir)
    }
}

/// Runs every attempt. A failing attempt stops the run; the report keeps
/// what finished and the error is returned alongside it.
pub fn run_experiment(cfg: &RunConfig) -> (ExperimentReport, Option<Error>) {
    let ex = &cfg.experiment;
    let mut report = ExperimentReport {
        complete: false,
        failure: None,
        attempts_completed: 0,
        config: cfg.snapshot(),
        environment: Environment::current(),
        rows: Vec::new(),
        summary: Vec::new(),
        histogram: Vec::new(),
        training: Vec::new(),
    };
    let mut labels = Vec::new();
    let mut error = None;
    for attempt in 0..ex.attempts {
        let ds = match ex.dataset(attempt) {
            Ok(ds) => ds,
            Err(e) => {
                error = Some(e);
                break;
            }
        };
        if attempt == 0 || ex.resample_data {
            labels.extend(ds.runs().iter().map(|r| r.mrr()));
        }
        match run_attempt(ex, &ds, attempt) {
            Ok(r) => {
                report.rows.extend(r.rows);
                report.training.extend(r.training);
                report.attempts_completed += 1;
            }
            Err(f) => {
                report.rows.extend(f.partial.rows);
                report.training.extend(f.partial.training);
                error = Some(f.error);
                break;
            }
        }
    }
    report.complete = error.is_none();
    report.failure = error.as_ref().map(|e| e.to_string());
    report.summary = summarize(&report.rows);
    report.histogram = histogram(labels);
    (report, error)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, attempt: usize, wear: Wear, rmse: f64) -> RmseRow {
        RmseRow {
            method: method.into(),
            attempt,
            wear,
            rmse,
            n: 4,
        }
    }

    fn report(rows: Vec<RmseRow>) -> ExperimentReport {
        ExperimentReport {
            complete: true,
            failure: None,
            attempts_completed: 2,
            config: BTreeMap::from([("seed".into(), "1".into())]),
            environment: Environment::current(),
            summary: summarize(&rows),
            rows,
            histogram: histogram([52.0, 99.0]),
            training: Vec::new(),
        }
    }

    #[test]
    fn summary_mean_and_sample_std() {
        let rows = vec![
            row("ae-both", 1, Wear::Low, 3.0),
            row("moment12x4", 0, Wear::High, 2.0),
            row("ae-both", 0, Wear::Low, 1.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s[0].method, "moment12x4");
        assert_eq!(s[0].std, 0.0);
        assert_eq!(s[1].values, vec![1.0, 3.0]);
        assert_eq!(s[1].mean, 2.0);
        assert!((s[1].std - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram([50.0, 54.99, 55.0, 100.0, 120.0, 140.0, 200.0, 197.5]);
        assert_eq!(h.len(), 10 + 12);
        assert_eq!((h[0].lo, h[0].hi, h[0].count), (50.0, 55.0, 2));
        assert_eq!(h[1].count, 1);
        assert_eq!((h[9].lo, h[9].hi, h[9].count), (95.0, 100.0, 1));
        assert_eq!((h[10].lo, h[10].count), (140.0, 1));
        assert_eq!((h[21].hi, h[21].count), (200.0, 2));
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 7);
    }

    #[test]
    fn json_round_trip() {
        let r = report(vec![row("pca30", 0, Wear::Low, 1.5)]);
        assert_eq!(ExperimentReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn parse_error_names_byte_offset() {
        let text = "{\n  \"complete\": tru\n}";
        let err = ExperimentReport::from_json(text).unwrap_err().to_string();
        let at: usize = err
            .split("byte ")
            .nth(1)
            .unwrap()
            .split(':')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        // The bad literal starts at offset 16; serde reports where it gave up inside it.
        assert!((16..=20).contains(&at), "{err}");
    }

    #[test]
    fn offsets() {
        let t = "ab\ncde\nf";
        assert_eq!(byte_offset(t, 1, 1), 0);
        assert_eq!(byte_offset(t, 2, 2), 4);
        assert_eq!(byte_offset(t, 3, 1), 7);
        assert_eq!(byte_offset(t, 9, 9), t.len());
    }

    #[test]
    fn tables_have_both_sections() {
        let r = report(vec![
            row("moment18x4", 0, Wear::Low, 4.0),
            row("moment18x4", 0, Wear::High, 5.0),
            row("ae-rec", 0, Wear::Low, 2.5),
        ]);
        let t = r.render_tables();
        assert!(t.contains("Feature baselines"));
        assert!(t.contains("Autoencoder objectives"));
        assert!(t.contains("4.000 ± 0.000"));
        assert!(t
            .lines()
            .any(|l| l.starts_with("AE + reconstruction") && l.trim_end().ends_with('-')));
        let mut r = r;
        r.complete = false;
        r.failure = Some("numeric failure: boom".into());
        assert!(r.render_tables().starts_with("INCOMPLETE"));
    }

    #[test]
    fn derived_files() {
        let dir = tempfile::tempdir().unwrap();
        report(vec![row("pca30", 0, Wear::Low, 1.5)])
            .write_all(dir.path())
            .unwrap();
        for f in [REPORT_FILE, TABLES_FILE, TRACE_FILE, RMSE_FILE, HISTOGRAM_FILE] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let trace = fs::read_to_string(dir.path().join(TRACE_FILE)).unwrap();
        assert_eq!(trace, "attempt,method,iter,phase,loss\n");
        let hist = fs::read_to_string(dir.path().join(HISTOGRAM_FILE)).unwrap();
        assert!(hist.starts_with("lo,hi,count\n50,55,1\n"));
    }
}
