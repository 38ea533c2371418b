//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

pub mod config;
pub mod experiment;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::data::{write_dataset, DatasetSplit, Manifest, VariablePreset, Wear};
use crate::error::{Error, Result};
use crate::features::{extract_moments, fit_pca, write_features_csv, Extractor, FeatureVector};
use crate::nn::{init_network, read_checkpoint, write_checkpoint, Network};
use crate::regression::{write_rmse_csv, RmseRow};
use crate::seed::{derive_seed, Stream};
use crate::trainer::{train, TrainConfig, TrainFailure, TrainReport};

use config::RunConfig;
use experiment::{latent_pools, normalized_rawspace, run_attempt, score_named, DataSource, PCA_COMPONENTS};
use report::{run_experiment, summarize, ExperimentReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub const FEATURES_FILE: &str = "features.csv";
pub const NETWORK_FILE: &str = "network.ckpt";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => EXIT_CONFIG,
            Error::Numeric(_) | Error::DimensionMismatch { .. } => EXIT_NUMERIC,
            _ => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cmp-abc",
    version,
    about = "Autoencoder clustering features for MRR regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite an existing dataset in `generate`.
    #[arg(long, global = true)]
    pub force: bool,
    #[arg(long, global = true)]
    pub attempts: Option<usize>,
    /// Restrict to these methods (comma separated or repeated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub method: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset.
    Generate,
    /// Extract features with `extract.extractor`.
    Extract,
    /// Train one autoencoder on `train.phases`.
    Train,
    /// Score feature baselines and, with `evaluate.network`, a checkpoint.
    Evaluate,
    /// Run every method over all attempts and write the report.
    Run,
    /// Re-render tables and CSV files from a saved report.
    Report {
        /// A report.json file or the directory holding one.
        path: PathBuf,
    },
}

impl Cli {
    /// Config file plus command-line overrides, validated as one.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                config::parse_pairs(&text)?
            }
            None => Default::default(),
        };
        if let Some(s) = self.seed {
            pairs.insert("seed".into(), s.to_string());
        }
        if let Some(a) = self.attempts {
            pairs.insert("attempts".into(), a.to_string());
        }
        if !self.method.is_empty() {
            pairs.insert("methods".into(), self.method.join(","));
        }
        RunConfig::from_pairs(&pairs)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Report { path } = &cli.command {
        let out = cmd_report(path, cli.out.as_deref())?;
        print!("{}", out.render_tables());
        return Ok(());
    }
    let cfg = cli.run_config()?;
    let out = cli.out_dir();
    match &cli.command {
        Command::Generate => {
            let ds = cmd_generate(&cfg, &out, cli.force)?;
            println!("wrote {} runs to {}", ds.len(), out.display());
        }
        Command::Extract => {
            let n = cmd_extract(&cfg, &out)?;
            println!("wrote {n} feature vectors to {}", out.join(FEATURES_FILE).display());
        }
        Command::Train => {
            let r = cmd_train(&cfg, &out)?;
            println!("trained {} iterations in {:.1}s", r.trace.len(), r.wall_time_s);
        }
        Command::Evaluate => {
            let rows = cmd_evaluate(&cfg, &out)?;
            for s in summarize(&rows) {
                println!("{:<14} {:<5} {:.3}", s.method, s.wear.as_str(), s.mean);
            }
        }
        Command::Run => {
            let (report, err) = cmd_run(&cfg, &out)?;
            print!("{}", report.render_tables());
            if let Some(e) = err {
                return Err(e);
            }
        }
        Command::Report { .. } => unreachable!(),
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes the attempt-0 synthetic dataset. Refuses to replace existing files
/// unless `force` is set.
pub fn cmd_generate(cfg: &RunConfig, out: &Path, force: bool) -> Result<DatasetSplit> {
    if !matches!(cfg.experiment.data, DataSource::Synthetic(_)) {
        return Err(Error::Config("generate needs data.source = synthetic".into()));
    }
    let manifest = Manifest::default();
    for f in [&manifest.runs_file, &manifest.labels_file] {
        let p = out.join(f);
        if p.exists() && !force {
            return Err(Error::Config(format!(
                "{} exists; pass --force to overwrite",
                p.display()
            )));
        }
    }
    let ds = cfg.experiment.dataset(0)?;
    ensure_dir(out)?;
    write_dataset(out, &manifest, &ds)?;
    Ok(ds)
}

fn load_network(cfg: &RunConfig) -> Result<Network> {
    let path = cfg
        .network
        .as_ref()
        .ok_or_else(|| Error::Config("latent features need evaluate.network".into()))?;
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

/// Extracts `extract.extractor` features for every run of the attempt-0
/// dataset. Normalizers and PCA are fit on the train and validation runs.
pub fn cmd_extract(cfg: &RunConfig, out: &Path) -> Result<usize> {
    let ds = cfg.experiment.dataset(0)?;
    let features: Vec<FeatureVector> = match cfg.extractor {
        Extractor::Moment18x4 => ds
            .runs()
            .iter()
            .map(|r| extract_moments(r, VariablePreset::All18))
            .collect::<Result<_>>()?,
        Extractor::Moment12x4 => ds
            .runs()
            .iter()
            .map(|r| extract_moments(r, VariablePreset::UsagePressure12))
            .collect::<Result<_>>()?,
        Extractor::RawSpace12x50 => {
            let p = normalized_rawspace(&ds)?;
            p.pool.into_iter().chain(p.test).collect()
        }
        Extractor::Pca30 => {
            let p = normalized_rawspace(&ds)?;
            let train: Vec<Vec<f64>> = p.pool.iter().map(|f| f.values().to_vec()).collect();
            let pca = fit_pca(&train, PCA_COMPONENTS)?;
            p.pool
                .iter()
                .chain(&p.test)
                .map(|f| pca.project(f))
                .collect::<Result<_>>()?
        }
        Extractor::Latent => {
            let p = latent_pools(&load_network(cfg)?, &normalized_rawspace(&ds)?)?;
            p.pool.into_iter().chain(p.test).collect()
        }
    };
    ensure_dir(out)?;
    write_features_csv(create(&out.join(FEATURES_FILE))?, &features)?;
    Ok(features.len())
}

/// Trains one autoencoder on low-wear raw features of the attempt-0 dataset
/// using `train.phases`. Writes the checkpoint, clusters, report and trace.
/// On a numeric failure the partial report is still written.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<TrainReport> {
    let ex = &cfg.experiment;
    let ds = ex.dataset(0)?;
    let raw = normalized_rawspace(&ds)?;
    let low: Vec<&FeatureVector> = raw.pool.iter().filter(|f| f.wear() == Wear::Low).collect();
    let net = init_network(&ex.encoder_sizes, derive_seed(ex.seed, Stream::Init, 0))?;
    let tc = TrainConfig {
        phases: cfg.phases.clone(),
        seed: derive_seed(ex.seed, Stream::Shuffle, 0),
        ..ex.train.clone()
    };
    tc.validate().map_err(|e| Error::Config(e.to_string()))?;
    ensure_dir(out)?;
    let write_report = |r: &TrainReport| -> Result<()> {
        fs::write(out.join(TRAIN_REPORT_FILE), serde_json::to_string_pretty(r)?)
            .map_err(|e| Error::io(out.join(TRAIN_REPORT_FILE), e))?;
        r.write_trace_csv(create(&out.join(report::TRACE_FILE))?)
    };
    match train(net, &low, &tc) {
        Ok(t) => {
            write_checkpoint(&t.network, create(&out.join(NETWORK_FILE))?)?;
            if let Some(c) = &t.clusters {
                fs::write(out.join(CLUSTERS_FILE), serde_json::to_string_pretty(c)?)
                    .map_err(|e| Error::io(out.join(CLUSTERS_FILE), e))?;
            }
            write_report(&t.report)?;
            Ok(t.report)
        }
        Err(TrainFailure { error, report }) => {
            write_report(&report)?;
            Err(error)
        }
    }
}

/// Scores the configured feature baselines and, when `evaluate.network` is
/// set, the checkpoint's latent space (method `checkpoint`). Autoencoder
/// methods are skipped; they are trained by `run`.
pub fn cmd_evaluate(cfg: &RunConfig, out: &Path) -> Result<Vec<RmseRow>> {
    let mut ex = cfg.experiment.clone();
    ex.methods.retain(|m| !m.is_autoencoder());
    let net = cfg.network.as_ref().map(|_| load_network(cfg)).transpose()?;
    if ex.methods.is_empty() && net.is_none() {
        return Err(Error::Config(
            "evaluate needs a feature baseline in methods or evaluate.network".into(),
        ));
    }
    let mut rows = Vec::new();
    for attempt in 0..ex.attempts {
        let ds = ex.dataset(attempt)?;
        if !ex.methods.is_empty() {
            rows.extend(run_attempt(&ex, &ds, attempt).map_err(|f| f.error)?.rows);
        }
        if let Some(net) = &net {
            let p = latent_pools(net, &normalized_rawspace(&ds)?)?;
            score_named("checkpoint", attempt, &p, ex.lambda, &mut rows)?;
        }
    }
    ensure_dir(out)?;
    write_rmse_csv(create(&out.join(report::RMSE_FILE))?, &rows)?;
    Ok(rows)
}

/// Runs the full experiment and writes every report file, including a
/// partial report when an attempt fails. `Err` only for I/O problems.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<(ExperimentReport, Option<Error>)> {
    let (report, err) = run_experiment(cfg);
    report.write_all(out)?;
    Ok((report, err))
}

/// Reads a saved report and rewrites its derived files into `out`, or next
/// to the report when `out` is `None`.
pub fn cmd_report(path: &Path, out: Option<&Path>) -> Result<ExperimentReport> {
    let file = if path.is_dir() {
        path.join(report::REPORT_FILE)
    } else {
        path.to_path_buf()
    };
    let report = ExperimentReport::read(&file)?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => file.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    report.write_derived(&dir)?;
    Ok(report)
}
