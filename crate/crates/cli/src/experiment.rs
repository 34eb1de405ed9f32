//! Benchmark and ablation protocols over a source/target corpus.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twindann::data::{
    generate_corpus, import_csv_dir, load_dataset, split, split_unstratified, standardize, Dataset,
    DomainLabel, Provenance, SplitRatio, Standardizer, DEFAULT_CSV_LEN,
};
use twindann::metrics::MetricsReport;
use twindann::models::{ModelKind, Network};
use twindann::training::{evaluate, fit, EpochRecord, TrainConfig, TrainMode};
use twindann::{Error, Result};

use crate::config::ExperimentConfig;

/// Where the corpus comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Generated from the `[twin]` and `[corpus]` configuration.
    Synthetic,
    /// A directory holding `source.json` + `target.json`, a CSV import
    /// directory, or one native manifest holding both domains.
    Path { path: PathBuf },
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub source: Dataset,
    /// Labeled target set; only its features reach training.
    pub target: Dataset,
}

impl Corpus {
    pub fn seq_len(&self) -> Option<usize> {
        self.source.seq_len().or(self.target.seq_len())
    }
}

fn by_domain(ds: Dataset) -> (Dataset, Dataset) {
    let (mut src, mut tgt) = (Vec::new(), Vec::new());
    for s in ds.samples {
        match s.domain {
            DomainLabel::Source => src.push(s),
            DomainLabel::Target => tgt.push(s),
        }
    }
    let wrap = |samples, note: &str| Dataset {
        samples,
        provenance: ds.provenance.derived(note),
    };
    (wrap(src, "source domain"), wrap(tgt, "target domain"))
}

/// `seq_len` applies to CSV imports only.
pub fn load_corpus(path: &Path, seq_len: Option<usize>) -> Result<Corpus> {
    let missing = |what: &str| Error::Load {
        path: path.to_path_buf(),
        message: format!(
            "no {what} found; expected source.json + target.json, a manifest.csv directory, \
             or a corpus manifest (run `twindann generate` to create one)"
        ),
    };
    if !path.exists() {
        return Err(missing("corpus"));
    }
    let native_pair = (path.join("source.json"), path.join("target.json"));
    let (source, target) = if path.is_dir() && native_pair.0.is_file() {
        let target = if native_pair.1.is_file() {
            load_dataset(&native_pair.1)?
        } else {
            Dataset {
                samples: Vec::new(),
                provenance: Provenance::Loaded {
                    path: native_pair.1.display().to_string(),
                },
            }
        };
        (load_dataset(&native_pair.0)?, target)
    } else if path.is_dir() {
        if !path.join("manifest.csv").is_file() {
            return Err(missing("corpus files"));
        }
        by_domain(import_csv_dir(path, seq_len.unwrap_or(DEFAULT_CSV_LEN))?)
    } else {
        by_domain(load_dataset(path)?)
    };
    if source.is_empty() {
        return Err(Error::Load {
            path: path.to_path_buf(),
            message: "corpus has no source-domain samples".into(),
        });
    }
    Ok(Corpus { source, target })
}

pub fn obtain_corpus(source: &DataSource, cfg: &ExperimentConfig) -> Result<Corpus> {
    match source {
        DataSource::Synthetic => {
            let (source, target) = generate_corpus(
                &cfg.twin,
                cfg.corpus.source_trajectories,
                cfg.corpus.target_trajectories,
                cfg.corpus.data_seed,
            )?;
            Ok(Corpus { source, target })
        }
        DataSource::Path { path } => load_corpus(path, Some(cfg.twin.seq_len)),
    }
}

/// Training configuration actually used for `kind`: DANN trains
/// adversarially on 16 source + 16 target samples per step; baselines train
/// source-only on the same 16-sample source half.
pub fn run_config(kind: ModelKind, base: &TrainConfig) -> TrainConfig {
    match kind {
        ModelKind::Dann => TrainConfig {
            mode: TrainMode::Dann,
            ..base.clone()
        },
        _ => TrainConfig {
            mode: TrainMode::SourceOnly,
            batch_size: (base.batch_size / 2).max(1),
            ..base.clone()
        },
    }
}

/// Source split 9:1 and standardisation fitted on the source train part.
pub struct PreparedRun {
    pub train: Dataset,
    pub val: Dataset,
    pub target: Dataset,
    pub stats: Standardizer,
}

pub fn prepare(corpus: &Corpus, seed: u64) -> Result<PreparedRun> {
    let (mut train, mut val) = split(&corpus.source, SplitRatio::NINE_TO_ONE, seed)?;
    let mut target = corpus.target.clone();
    let stats = standardize(&mut train, &mut [&mut val, &mut target])?;
    Ok(PreparedRun {
        train,
        val,
        target,
        stats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalEpoch {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

/// One fitted model: scores at the selected epoch and at the last one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelKind,
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub source_batch: usize,
    pub target_batch: usize,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test: MetricsReport,
    pub final_epoch: FinalEpoch,
    pub history: Vec<EpochRecord>,
    #[serde(skip)]
    pub network: Option<Network>,
    #[serde(skip)]
    pub stats: Option<Standardizer>,
}

fn accuracy(net: &Network, ds: &Dataset, batch: usize) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    Ok(evaluate(net, ds, batch)?.accuracy)
}

pub fn run_one(
    corpus: &Corpus,
    cfg: &ExperimentConfig,
    kind: ModelKind,
    seed: u64,
) -> Result<RunRecord> {
    if corpus.target.is_empty() {
        return Err(Error::Config(
            "benchmark needs a labeled target set for testing".into(),
        ));
    }
    let prep = prepare(corpus, seed)?;
    let train_cfg = run_config(kind, &cfg.train);
    let features = prep.target.features_only();
    let out = fit(
        kind,
        &cfg.model,
        &train_cfg,
        seed,
        &prep.train,
        &prep.val,
        &features,
    )?;
    let eb = train_cfg.eval_batch_size;
    let (source_batch, target_batch) = out
        .history
        .batch_composition
        .unwrap_or((train_cfg.batch_size.min(prep.train.len()), 0));
    Ok(RunRecord {
        model: kind,
        seed,
        epochs: train_cfg.epochs,
        best_epoch: out.history.best_epoch,
        source_batch,
        target_batch,
        train_accuracy: accuracy(&out.best, &prep.train, eb)?,
        val_accuracy: accuracy(&out.best, &prep.val, eb)?,
        test: evaluate(&out.best, &prep.target, eb)?,
        final_epoch: FinalEpoch {
            train_accuracy: accuracy(&out.last, &prep.train, eb)?,
            val_accuracy: accuracy(&out.last, &prep.val, eb)?,
            test_accuracy: accuracy(&out.last, &prep.target, eb)?,
        },
        history: out.history.epochs,
        network: Some(out.best),
        stats: Some(prep.stats),
    })
}

/// Runs `(model, seed)` jobs on at most `jobs` threads; results come back in
/// input order regardless of scheduling.
pub fn run_parallel<T, F>(tasks: &[(ModelKind, u64)], jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(ModelKind, u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| tasks.par_iter().map(|&(k, s)| f(k, s)).collect())
}

pub fn tasks(models: &[ModelKind], seeds: &[u64]) -> Vec<(ModelKind, u64)> {
    models
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect()
}

pub fn run_benchmark(
    corpus: &Corpus,
    cfg: &ExperimentConfig,
    models: &[ModelKind],
    jobs: usize,
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    run_parallel(&tasks(models, &cfg.train.seeds), jobs, |k, s| {
        run_one(corpus, cfg, k, s)
    })
}

/// Per-seed 7:3 split of the labeled target set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetSplit {
    pub seed: u64,
    pub stratified: bool,
    pub train: usize,
    pub test: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationRecord {
    pub model: ModelKind,
    pub seed: u64,
    /// Trained on target-train only; final-epoch parameters.
    pub only_real: MetricsReport,
    pub only_real_train_accuracy: f64,
    /// The twin-supported benchmark model of the same seed on the same test part.
    pub twin_supported: MetricsReport,
}

pub fn split_target(target: &Dataset, seed: u64) -> Result<(Dataset, Dataset, bool)> {
    match split(target, SplitRatio::SEVEN_TO_THREE, seed) {
        Ok((a, b)) => Ok((a, b, true)),
        Err(Error::Stratification { .. }) => {
            let (a, b) = split_unstratified(target, SplitRatio::SEVEN_TO_THREE, seed)?;
            Ok((a, b, false))
        }
        Err(e) => Err(e),
    }
}

/// Trains each model on 70% of the labeled target set and scores it, next to
/// the twin-supported model from `benchmark`, on the remaining 30%.
pub fn run_ablation(
    corpus: &Corpus,
    cfg: &ExperimentConfig,
    benchmark: &[RunRecord],
    jobs: usize,
) -> Result<(Vec<TargetSplit>, Vec<AblationRecord>)> {
    let seeds = &cfg.train.seeds;
    let splits = seeds
        .iter()
        .map(|&s| split_target(&corpus.target, s).map(|(a, b, strat)| (s, a, b, strat)))
        .collect::<Result<Vec<_>>>()?;
    let models: Vec<ModelKind> = {
        let mut m: Vec<ModelKind> = Vec::new();
        for r in benchmark {
            if !m.contains(&r.model) {
                m.push(r.model);
            }
        }
        m
    };
    let records = run_parallel(&tasks(&models, seeds), jobs, |kind, seed| {
        let (_, raw_train, raw_test, _) =
            splits.iter().find(|s| s.0 == seed).expect("split per seed");
        let mut train = raw_train.clone();
        let mut test = raw_test.clone();
        standardize(&mut train, &mut [&mut test])?;
        // No source/target composition here: the configured batch applies.
        let only_cfg = TrainConfig {
            mode: TrainMode::SourceOnly,
            ..cfg.train.clone()
        };
        let none = train.subset(&[], "no validation");
        let out = fit(
            kind,
            &cfg.model,
            &only_cfg,
            seed,
            &train,
            &none,
            &Default::default(),
        )?;
        let eb = only_cfg.eval_batch_size;
        let twin = benchmark
            .iter()
            .find(|r| r.model == kind && r.seed == seed)
            .ok_or_else(|| Error::Contract(format!("no benchmark run for {kind} seed {seed}")))?;
        let (Some(net), Some(stats)) = (&twin.network, &twin.stats) else {
            return Err(Error::Contract(
                "benchmark record without parameters".into(),
            ));
        };
        let mut twin_test = raw_test.clone();
        stats.apply(&mut twin_test);
        Ok(AblationRecord {
            model: kind,
            seed,
            only_real: evaluate(&out.last, &test, eb)?,
            only_real_train_accuracy: evaluate(&out.last, &train, eb)?.accuracy,
            twin_supported: evaluate(net, &twin_test, eb)?,
        })
    })?;
    let splits = splits
        .into_iter()
        .map(|(seed, a, b, stratified)| TargetSplit {
            seed,
            stratified,
            train: a.len(),
            test: b.len(),
        })
        .collect();
    Ok((splits, records))
}
