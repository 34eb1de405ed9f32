//! JSON reports and plain-text tables. Nothing here depends on wall-clock
//! time, so identical runs produce identical bytes.

use std::fmt::Write as _;

use serde::Serialize;
use twindann::data::{ClassLabel, Provenance};
use twindann::metrics::{aggregate, AggregateReport, MeanStd};
use twindann::models::ModelKind;
use twindann::Result;

use crate::config::ExperimentConfig;
use crate::experiment::{AblationRecord, RunRecord, TargetSplit};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fields shared by every report.
#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub code_version: &'static str,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub source_provenance: Provenance,
    pub target_provenance: Provenance,
    /// Target features are used for adaptation and are also the test set.
    pub transductive: bool,
}

impl Header {
    pub fn new(cfg: &ExperimentConfig, source: &Provenance, target: &Provenance) -> Self {
        Self {
            code_version: CODE_VERSION,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            seeds: cfg.train.seeds.clone(),
            source_provenance: source.clone(),
            target_provenance: target.clone(),
            transductive: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    /// Source minibatch size and target minibatch size per step.
    pub batch_composition: (usize, usize),
    pub test: AggregateReport,
    pub final_epoch_test_accuracy: MeanStd,
    pub train_accuracy: MeanStd,
    pub val_accuracy: MeanStd,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkReport {
    #[serde(flatten)]
    pub header: Header,
    pub models: Vec<ModelSummary>,
    pub runs: Vec<RunRecord>,
}

fn models_in<T>(items: &[T], kind: impl Fn(&T) -> ModelKind) -> Vec<ModelKind> {
    let mut out: Vec<ModelKind> = Vec::new();
    for it in items {
        if !out.contains(&kind(it)) {
            out.push(kind(it));
        }
    }
    out
}

impl BenchmarkReport {
    pub fn build(header: Header, runs: Vec<RunRecord>) -> Result<Self> {
        let mut models = Vec::new();
        for kind in models_in(&runs, |r| r.model) {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.model == kind).collect();
            let tests: Vec<_> = mine.iter().map(|r| r.test.clone()).collect();
            let stat = |f: fn(&RunRecord) -> f64| {
                MeanStd::of(&mine.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            models.push(ModelSummary {
                model: kind,
                batch_composition: (mine[0].source_batch, mine[0].target_batch),
                test: aggregate(&tests)?,
                final_epoch_test_accuracy: stat(|r| r.final_epoch.test_accuracy),
                train_accuracy: stat(|r| r.train_accuracy),
                val_accuracy: stat(|r| r.val_accuracy),
            });
        }
        Ok(Self {
            header,
            models,
            runs,
        })
    }

    pub fn summary(&self, kind: ModelKind) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model == kind)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let single = self.header.seeds.len() < 2;
        writeln!(
            s,
            "twindann {} | config {}",
            self.header.code_version,
            &self.header.config_hash[..12]
        )
        .unwrap();
        writeln!(
            s,
            "seeds {:?}; target set is used for adaptation and for testing",
            self.header.seeds
        )
        .unwrap();
        if single {
            writeln!(s, "single run: standard deviations are not defined").unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "Table I. Test accuracy on the target domain (%)").unwrap();
        writeln!(
            s,
            "{:<8} {:>14} {:>14} {:>14} {:>9}",
            "Model", "Best epoch", "Final epoch", "Source val", "Batch"
        )
        .unwrap();
        for m in &self.models {
            writeln!(
                s,
                "{:<8} {:>14} {:>14} {:>14} {:>9}",
                m.model.display_name(),
                m.test.accuracy.percent(),
                m.final_epoch_test_accuracy.percent(),
                m.val_accuracy.percent(),
                format!("{}+{}", m.batch_composition.0, m.batch_composition.1),
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(
            s,
            "Table II. Per-class scores on the target domain (precision / recall / F1)"
        )
        .unwrap();
        write!(s, "{:<28}", "Class").unwrap();
        for m in &self.models {
            write!(s, " {:>20}", m.model.display_name()).unwrap();
        }
        writeln!(s).unwrap();
        for class in ClassLabel::all() {
            let c = class.id();
            write!(s, "{:<28}", class.name()).unwrap();
            for m in &self.models {
                let cell = format!(
                    "{:.2}/{:.2}/{:.2}",
                    m.test.precision[c].mean, m.test.recall[c].mean, m.test.f1[c].mean
                );
                write!(s, " {cell:>20}").unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationSummary {
    pub model: ModelKind,
    pub only_real: MeanStd,
    pub twin_supported: MeanStd,
    pub only_real_train_accuracy: MeanStd,
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationReport {
    #[serde(flatten)]
    pub header: Header,
    pub splits: Vec<TargetSplit>,
    pub models: Vec<AblationSummary>,
    pub runs: Vec<AblationRecord>,
}

impl AblationReport {
    pub fn build(header: Header, splits: Vec<TargetSplit>, runs: Vec<AblationRecord>) -> Self {
        let models = models_in(&runs, |r| r.model)
            .into_iter()
            .map(|kind| {
                let mine: Vec<&AblationRecord> = runs.iter().filter(|r| r.model == kind).collect();
                let stat = |f: fn(&AblationRecord) -> f64| {
                    MeanStd::of(&mine.iter().map(|r| f(r)).collect::<Vec<_>>())
                };
                AblationSummary {
                    model: kind,
                    only_real: stat(|r| r.only_real.accuracy),
                    twin_supported: stat(|r| r.twin_supported.accuracy),
                    only_real_train_accuracy: stat(|r| r.only_real_train_accuracy),
                }
            })
            .collect();
        Self {
            header,
            splits,
            models,
            runs,
        }
    }

    pub fn summary(&self, kind: ModelKind) -> Option<&AblationSummary> {
        self.models.iter().find(|m| m.model == kind)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "twindann {} | config {}",
            self.header.code_version,
            &self.header.config_hash[..12]
        )
        .unwrap();
        if let Some(sp) = self.splits.first() {
            writeln!(
                s,
                "target split {}:{} per seed{}",
                sp.train,
                sp.test,
                if self.splits.iter().all(|x| x.stratified) {
                    " (stratified)"
                } else {
                    " (not stratified)"
                }
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(
            s,
            "Table III. Test accuracy on the held-out target part (%)"
        )
        .unwrap();
        writeln!(
            s,
            "{:<8} {:>16} {:>16} {:>16}",
            "Model", "Only real", "Twin-supported", "Real train"
        )
        .unwrap();
        for m in &self.models {
            writeln!(
                s,
                "{:<8} {:>16} {:>16} {:>16}",
                m.model.display_name(),
                m.only_real.percent(),
                m.twin_supported.percent(),
                m.only_real_train_accuracy.percent(),
            )
            .unwrap();
        }
        writeln!(
            s,
            "Real train is accuracy on the target-only training part; a large gap to \
             Only real indicates overfitting of the small training set."
        )
        .unwrap();
        s
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s
}
