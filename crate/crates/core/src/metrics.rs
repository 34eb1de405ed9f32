//! Classification scores and multi-run aggregation.
//!
//! Multi-class precision/recall/F1 are one-vs-rest per class. Any ratio whose
//! denominator is zero is reported as 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row = true class, column = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Correct predictions over all predictions.
    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::UndefinedMetric("accuracy")),
            n => Ok(self.trace() as f64 / n as f64),
        }
    }

    pub fn precision_recall_f1(&self, class: usize) -> ClassScores {
        let tp = self.counts[class][class];
        let predicted: u64 = self.counts.iter().map(|row| row[class]).sum();
        let actual: u64 = self.counts[class].iter().sum();
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        ClassScores {
            precision,
            recall,
            f1: f1_score(precision, recall),
            support: actual,
        }
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    let den = precision + recall;
    if den == 0.0 {
        0.0
    } else if precision == recall {
        precision
    } else {
        2.0 * precision * recall / den
    }
}

/// Tallies `(truth, pred)` pairs into a `classes × classes` matrix.
pub fn confusion(truth: &[usize], pred: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::Shape {
            op: "confusion",
            lhs: vec![truth.len()],
            rhs: vec![pred.len()],
        });
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (&t, &p) in truth.iter().zip(pred) {
        for label in [t, p] {
            if label >= classes {
                return Err(Error::Index {
                    what: "class label",
                    index: label,
                    bound: classes,
                });
            }
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_f1: f64,
    pub n: u64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        let accuracy = cm.accuracy()?;
        let per_class: Vec<ClassScores> = (0..cm.classes())
            .map(|c| cm.precision_recall_f1(c))
            .collect();
        let macro_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / per_class.len().max(1) as f64;
        Ok(Self {
            accuracy,
            per_class,
            macro_f1,
            n: cm.total(),
            confusion: cm,
        })
    }

    pub fn from_predictions(truth: &[usize], pred: &[usize], classes: usize) -> Result<Self> {
        Self::from_confusion(confusion(truth, pred, classes)?)
    }
}

/// Mean and sample standard deviation of one metric over runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample (n−1) deviation; a single value gets std 0.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: 0.0,
            };
        }
        // Shifted by the first value so equal inputs give mean == value.
        let pivot = values[0];
        let mean = pivot + values.iter().map(|v| v - pivot).sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }

    /// `mm.mm±ss.ss` with the fractions scaled to percent.
    pub fn percent(&self) -> String {
        format!("{:.2}±{:.2}", 100.0 * self.mean, 100.0 * self.std)
    }

    /// `0.mm±0.ss` on the raw scale.
    pub fn fraction(&self) -> String {
        format!("{:.2}±{:.2}", self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    /// False when only one run was aggregated; every `std` is then 0.
    pub std_defined: bool,
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    pub precision: Vec<MeanStd>,
    pub recall: Vec<MeanStd>,
    pub f1: Vec<MeanStd>,
}

/// Per-metric mean ± sample std over runs, each run weighted equally.
pub fn aggregate(reports: &[MetricsReport]) -> Result<AggregateReport> {
    let Some(first) = reports.first() else {
        return Err(Error::Contract(
            "aggregate needs at least one report".into(),
        ));
    };
    let classes = first.per_class.len();
    if reports.iter().any(|r| r.per_class.len() != classes) {
        return Err(Error::Contract("reports disagree on class count".into()));
    }
    let over =
        |f: &dyn Fn(&MetricsReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    let per_class = |f: fn(&ClassScores) -> f64| -> Vec<MeanStd> {
        (0..classes)
            .map(|c| over(&|r: &MetricsReport| f(&r.per_class[c])))
            .collect()
    };
    Ok(AggregateReport {
        runs: reports.len(),
        std_defined: reports.len() >= 2,
        accuracy: over(&|r| r.accuracy),
        macro_f1: over(&|r| r.macro_f1),
        precision: per_class(|s| s.precision),
        recall: per_class(|s| s.recall),
        f1: per_class(|s| s.f1),
    })
}
