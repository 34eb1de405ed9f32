//! Subcommand definitions and their implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use twindann::data::{save_dataset, ClassLabel, Dataset, Standardizer};
use twindann::metrics::MetricsReport;
use twindann::models::{load_checkpoint, save_checkpoint, Checkpoint, ModelKind};
use twindann::training::{evaluate, fit, EpochRecord};
use twindann::{Error, Result};

use crate::config::{ExperimentConfig, Overrides};
use crate::experiment::{
    obtain_corpus, prepare, run_ablation, run_benchmark, run_config, Corpus, DataSource,
};
use crate::report::{to_json, AblationReport, BenchmarkReport, Header, CODE_VERSION};

#[derive(Debug, Parser)]
#[command(
    name = "twindann",
    version,
    about = "Digital-twin fault diagnosis with domain-adversarial training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a source and target corpus and write it to --out.
    Generate(CommonArgs),
    /// Fit one model and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on the source or target domain of a corpus.
    Eval(EvalArgs),
    /// Fit every model for every seed and report target-domain accuracy.
    Benchmark(BenchArgs),
    /// Benchmark, then retrain on 70% of the labeled target set alone.
    Ablate(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment TOML file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "TWINDANN_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Existing corpus instead of a synthetic one.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Simulated trajectories per class, source domain.
    #[arg(long)]
    pub source_traj: Option<usize>,
    /// Total target samples (a multiple of 9 keeps classes balanced).
    #[arg(long)]
    pub target_traj: Option<usize>,
    /// Magnitude of the alternating per-joint gain error of the target domain.
    #[arg(long)]
    pub gap_gain: Option<f64>,
    /// Target-domain sensor noise std in metres.
    #[arg(long)]
    pub gap_noise: Option<f64>,
    /// Target-domain actuator lag time constant in seconds.
    #[arg(long)]
    pub gap_lag: Option<f64>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    /// Corpus seed for synthetic data.
    #[arg(long)]
    pub data_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value = "dann")]
    pub model: ModelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalDomain {
    Source,
    Target,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint sidecar written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "target")]
    pub on: EvalDomain,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',', default_value = "cnn,tcn,dann")]
    pub models: Vec<ModelKind>,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seeds: self.seeds.clone(),
            epochs: self.epochs,
            source_traj: self.source_traj,
            target_traj: self.target_traj,
            gap_gain: self.gap_gain,
            gap_noise: self.gap_noise,
            gap_lag: self.gap_lag,
            seq_len: self.seq_len,
            data_seed: self.data_seed,
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn data_source(&self) -> DataSource {
        match &self.corpus {
            Some(path) => DataSource::Path { path: path.clone() },
            None => DataSource::Synthetic,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn class_counts_line(name: &str, ds: &Dataset) -> String {
    let counts = ds.class_counts();
    let body: Vec<String> = ClassLabel::all()
        .map(|c| format!("{}={}", c.name(), counts[c.id()]))
        .collect();
    format!("{name}: {} samples [{}]", ds.len(), body.join(", "))
}

/// Runs one subcommand and returns what it prints.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Benchmark(a) => benchmark(&a),
        Command::Ablate(a) => ablate(&a),
    }
}

pub fn generate(a: &CommonArgs) -> Result<String> {
    let cfg = a.resolve()?;
    let corpus = obtain_corpus(&DataSource::Synthetic, &cfg)?;
    create_dir(&a.out)?;
    save_dataset(&corpus.source, &a.out.join("source.json"))?;
    save_dataset(&corpus.target, &a.out.join("target.json"))?;
    let mut s = String::new();
    writeln!(s, "{}", class_counts_line("source", &corpus.source)).unwrap();
    writeln!(s, "{}", class_counts_line("target", &corpus.target)).unwrap();
    writeln!(s, "wrote {}", a.out.display()).unwrap();
    Ok(s)
}

/// Stored in the checkpoint next to the parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainExtra {
    pub code_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub standardizer: Standardizer,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

pub fn checkpoint_path(out: &Path, kind: ModelKind) -> PathBuf {
    out.join(format!("{}.json", kind.name()))
}

pub fn train(a: &TrainArgs) -> Result<String> {
    let cfg = a.common.resolve()?;
    let corpus = obtain_corpus(&a.common.data_source(), &cfg)?;
    let seed = cfg.train.seeds[0];
    let prep = prepare(&corpus, seed)?;
    let train_cfg = run_config(a.model, &cfg.train);
    let features = prep.target.features_only();
    let out = fit(
        a.model,
        &cfg.model,
        &train_cfg,
        seed,
        &prep.train,
        &prep.val,
        &features,
    )?;
    create_dir(&a.common.out)?;
    let path = checkpoint_path(&a.common.out, a.model);
    let best_epoch = out.history.best_epoch;
    let val = out
        .history
        .epochs
        .get(best_epoch)
        .and_then(|e| e.val_accuracy);
    let extra = TrainExtra {
        code_version: CODE_VERSION.into(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        standardizer: prep.stats,
        best_epoch,
        history: out.history.epochs,
    };
    let epochs = extra.history.len();
    save_checkpoint(
        &Checkpoint {
            network: out.best,
            config: cfg.model,
            seed,
            extra: serde_json::to_value(&extra).expect("extra serialises"),
        },
        &path,
    )?;
    let mut s = String::new();
    write!(
        s,
        "{} seed {seed}: {epochs} epochs, best epoch {best_epoch}",
        a.model.display_name()
    )
    .unwrap();
    if let Some(v) = val {
        write!(s, ", source val accuracy {:.2}%", 100.0 * v).unwrap();
    }
    writeln!(s, "\nwrote {}", path.display()).unwrap();
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub code_version: &'static str,
    pub model: ModelKind,
    pub seed: u64,
    pub checkpoint_config_hash: String,
    pub domain: EvalDomain,
    pub provenance: twindann::data::Provenance,
    pub metrics: MetricsReport,
}

pub fn eval(a: &EvalArgs) -> Result<String> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let extra: TrainExtra =
        serde_json::from_value(ckpt.extra.clone()).map_err(|e| Error::Load {
            path: a.checkpoint.clone(),
            message: format!("checkpoint was not written by `train`: {e}"),
        })?;
    // The corpus defaults to the one the checkpoint was trained on.
    let mut cfg = if a.common.config.is_some() {
        a.common.resolve()?
    } else {
        extra.config.clone()
    };
    cfg.apply(&a.common.overrides());
    cfg.validate()?;
    let Corpus { source, target } = obtain_corpus(&a.common.data_source(), &cfg)?;
    let mut ds = match a.on {
        EvalDomain::Source => source,
        EvalDomain::Target => target,
    };
    if ds.is_empty() {
        return Err(Error::Config(
            format!("corpus has no {:?} samples to evaluate", a.on).to_lowercase(),
        ));
    }
    extra.standardizer.apply(&mut ds);
    let metrics = evaluate(&ckpt.network, &ds, cfg.train.eval_batch_size)?;
    let kind = ckpt.network.kind();
    let report = EvalReport {
        code_version: CODE_VERSION,
        model: kind,
        seed: ckpt.seed,
        checkpoint_config_hash: extra.config_hash,
        domain: a.on,
        provenance: ds.provenance.clone(),
        metrics,
    };
    create_dir(&a.common.out)?;
    let name = match a.on {
        EvalDomain::Source => "source",
        EvalDomain::Target => "target",
    };
    let path = a
        .common
        .out
        .join(format!("eval_{}_{name}.json", kind.name()));
    write_file(&path, &to_json(&report))?;
    Ok(format!(
        "{} on {name}: accuracy {:.2}% over {} samples, macro F1 {:.3}\nwrote {}\n",
        kind.display_name(),
        100.0 * report.metrics.accuracy,
        report.metrics.n,
        report.metrics.macro_f1,
        path.display()
    ))
}

fn dedup(models: &[ModelKind]) -> Result<Vec<ModelKind>> {
    let mut out = Vec::new();
    for &m in models {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no models selected".into()));
    }
    Ok(out)
}

fn benchmark_impl(a: &BenchArgs) -> Result<(ExperimentConfig, Corpus, BenchmarkReport)> {
    let cfg = a.common.resolve()?;
    let corpus = obtain_corpus(&a.common.data_source(), &cfg)?;
    let models = dedup(&a.models)?;
    let runs = run_benchmark(&corpus, &cfg, &models, a.jobs)?;
    let header = Header::new(&cfg, &corpus.source.provenance, &corpus.target.provenance);
    let report = BenchmarkReport::build(header, runs)?;
    create_dir(&a.common.out)?;
    write_file(&a.common.out.join("benchmark.json"), &to_json(&report))?;
    write_file(&a.common.out.join("benchmark.txt"), &report.to_text())?;
    Ok((cfg, corpus, report))
}

pub fn benchmark(a: &BenchArgs) -> Result<String> {
    Ok(benchmark_impl(a)?.2.to_text())
}

pub fn ablate(a: &BenchArgs) -> Result<String> {
    let (cfg, corpus, bench) = benchmark_impl(a)?;
    let (splits, runs) = run_ablation(&corpus, &cfg, &bench.runs, a.jobs)?;
    let report = AblationReport::build(bench.header.clone(), splits, runs);
    write_file(&a.common.out.join("ablation.json"), &to_json(&report))?;
    let text = report.to_text();
    write_file(&a.common.out.join("ablation.txt"), &text)?;
    Ok(format!("{}\n{text}", bench.to_text()))
}
