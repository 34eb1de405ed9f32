//! Adversarial training.
//!
//! One DANN step minimises `L_y(source) + L_d(source ∪ target)` where the
//! domain loss reaches the feature extractor through the gradient-reversal
//! node. The label and domain heads therefore descend their own losses while
//! the feature extractor ascends the domain loss, scaled by λ.

mod adam;
mod config;
mod schedule;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::{TrainConfig, TrainMode};
pub use schedule::{alpha, GammaSchedule};

use crate::autodiff::{Tape, Tensor, Var};
use crate::data::{make_batches, Batch, BatchMode, Dataset, DomainLabel, TargetFeatures};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::models::{DannParams, ModelConfig, ModelKind, Network};
use crate::rng::{derive_seed, tag};
use crate::NUM_CLASSES;

/// Scalar losses of one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub label: f64,
    pub domain: Option<f64>,
}

/// Nodes of the DANN objective recorded on a tape.
pub struct DannGraph {
    pub label_loss: Var,
    pub domain_loss: Var,
    pub total: Var,
}

fn concat_inputs(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 3 || sb.len() != 3 || sa[1..] != sb[1..] {
        return Err(Error::Shape {
            op: "concat batches",
            lhs: sa.to_vec(),
            rhs: sb.to_vec(),
        });
    }
    let mut data = a.data().to_vec();
    data.extend_from_slice(b.data());
    Tensor::new(vec![sa[0] + sb[0], sa[1], sa[2]], data)
}

/// Records `L_y` on the source rows and `L_d` on all rows through the
/// reversal node. `total` is `L_y + weight·L_d`, or `L_y` alone when the
/// weight is 0.
pub fn dann_graph(
    params: &DannParams,
    tape: &mut Tape,
    source: &Batch,
    target: &Batch,
    lambda: f64,
    domain_loss_weight: f64,
) -> Result<DannGraph> {
    let labels = source
        .labels
        .as_ref()
        .ok_or_else(|| Error::Contract("source batch carries no class labels".into()))?;
    if target.labels.is_some() {
        return Err(Error::Contract(
            "target batch carries class labels; target labels must never reach training".into(),
        ));
    }
    let n_src = source.len();
    let x = tape.constant(concat_inputs(&source.inputs, &target.inputs)?);
    let f = params.feature_extract(tape, x)?;
    let f_src = tape.slice_rows(f, 0, n_src)?;
    let class_logits = params.predict_label(tape, f_src)?;
    let label_loss = tape.cross_entropy(class_logits, labels)?;

    let domain_logits = params.predict_domain(tape, f, lambda)?;
    let mut domains = vec![DomainLabel::Source.id(); n_src];
    domains.extend(std::iter::repeat_n(DomainLabel::Target.id(), target.len()));
    let domain_loss = tape.cross_entropy(domain_logits, &domains)?;
    let total = if domain_loss_weight == 0.0 {
        label_loss
    } else {
        let weighted = tape.scale(domain_loss, domain_loss_weight);
        tape.add(label_loss, weighted)?
    };
    Ok(DannGraph {
        label_loss,
        domain_loss,
        total,
    })
}

/// One saddle-point update of all three parameter sets.
pub fn dann_step(
    params: &mut DannParams,
    source: &Batch,
    target: &Batch,
    lambda: f64,
    domain_loss_weight: f64,
    state: &mut AdamState,
    lr: f64,
) -> Result<StepLosses> {
    let mut tape = Tape::new();
    let graph = dann_graph(
        params,
        &mut tape,
        source,
        target,
        lambda,
        domain_loss_weight,
    )?;
    let grads = tape.backward(graph.total)?;
    let mut ps = params.parameters_mut();
    ps.iter_mut().for_each(|p| p.zero_grad());
    grads.accumulate_into(&tape, ps.iter_mut().map(|p| &mut **p));
    adam_step(&mut ps, state, lr)?;
    Ok(StepLosses {
        label: tape.value(graph.label_loss).item(),
        domain: Some(tape.value(graph.domain_loss).item()),
    })
}

/// One label-loss-only update.
pub fn source_step(
    net: &mut Network,
    source: &Batch,
    state: &mut AdamState,
    lr: f64,
) -> Result<StepLosses> {
    let labels = source
        .labels
        .as_ref()
        .ok_or_else(|| Error::Contract("source batch carries no class labels".into()))?;
    let mut tape = Tape::new();
    let x = tape.constant(source.inputs.clone());
    let logits = net.class_logits(&mut tape, x)?;
    let loss = tape.cross_entropy(logits, labels)?;
    let grads = tape.backward(loss)?;
    let mut ps = net.parameters_mut();
    ps.iter_mut().for_each(|p| p.zero_grad());
    grads.accumulate_into(&tape, ps.iter_mut().map(|p| &mut **p));
    adam_step(&mut ps, state, lr)?;
    Ok(StepLosses {
        label: tape.value(loss).item(),
        domain: None,
    })
}

/// Predicted class per sample, forward-only, in stored order.
pub fn predict_classes(net: &Network, dataset: &Dataset, batch_size: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(dataset.len());
    for idx in make_batches(dataset.len(), batch_size, None, BatchMode::Eval)? {
        let batch = dataset.batch(&idx)?;
        out.extend(net.predict(&batch.inputs)?.argmax_rows());
    }
    Ok(out)
}

/// Confusion matrix and scores of `net` on a labeled dataset.
pub fn evaluate(net: &Network, dataset: &Dataset, batch_size: usize) -> Result<MetricsReport> {
    let truth = dataset.labels()?;
    let pred = predict_classes(net, dataset, batch_size)?;
    MetricsReport::from_predictions(&truth, &pred, NUM_CLASSES)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lambda: f64,
    /// Mean source label loss over the epoch's steps.
    pub label_loss: f64,
    /// Mean domain loss (dann mode only).
    pub domain_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters `fit` returns as `best`.
    pub best_epoch: usize,
    /// Source and target samples per DANN step.
    pub batch_composition: Option<(usize, usize)>,
}

impl RunHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

pub struct FitOutcome {
    /// Parameters at the epoch with the best validation accuracy (earliest on
    /// ties); the final epoch when no validation data was given.
    pub best: Network,
    pub last: Network,
    pub history: RunHistory,
}

/// Endless reshuffled walk over the target features.
struct TargetCycle {
    seed: u64,
    round: u64,
    order: Vec<usize>,
    pos: usize,
    n: usize,
}

impl TargetCycle {
    fn new(n: usize, seed: u64) -> Self {
        Self {
            seed,
            round: 0,
            order: Vec::new(),
            pos: 0,
            n,
        }
    }

    fn take(&mut self, k: usize) -> Result<Vec<usize>> {
        if self.pos + k > self.order.len() {
            let round_seed = derive_seed(self.seed, &[tag("target"), self.round]);
            self.order = make_batches(self.n, self.n, Some(round_seed), BatchMode::Eval)?
                .into_iter()
                .flatten()
                .collect();
            self.round += 1;
            self.pos = 0;
        }
        let idx = self.order[self.pos..self.pos + k].to_vec();
        self.pos += k;
        Ok(idx)
    }
}

/// Trains one model from `seed`.
///
/// The target set enters only as [`TargetFeatures`], which has no label
/// field. `val` may be empty, in which case the final epoch is selected.
pub fn fit(
    kind: ModelKind,
    model_config: &ModelConfig,
    config: &TrainConfig,
    seed: u64,
    train: &Dataset,
    val: &Dataset,
    target: &TargetFeatures,
) -> Result<FitOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("source training set is empty".into()));
    }
    let dann = config.mode == TrainMode::Dann;
    if dann && kind != ModelKind::Dann {
        return Err(Error::Config(format!("{kind} cannot train in dann mode")));
    }
    if dann && target.is_empty() {
        return Err(Error::Config(
            "dann mode needs unlabeled target features".into(),
        ));
    }
    let mut net = Network::init(kind, model_config, seed)?;
    let mut state = AdamState::new(config.adam, net.parameters());
    let lr = config.learning_rate;

    let full = if dann {
        config.batch_size / 2
    } else {
        config.batch_size
    };
    let src_batch = full.min(train.len());
    let tgt_batch = full.min(target.len());
    let mut cycle = TargetCycle::new(target.len(), seed);

    let mut history = RunHistory {
        batch_composition: dann.then_some((src_batch, tgt_batch)),
        ..RunHistory::default()
    };
    let mut best: Option<(f64, Network)> = None;

    for epoch in 0..config.epochs {
        let lambda = config.lambda_schedule.at_epoch(epoch, config.epochs);
        let epoch_seed = derive_seed(seed, &[tag("source"), epoch as u64]);
        let batches = make_batches(train.len(), src_batch, Some(epoch_seed), BatchMode::Train)?;
        let (mut label_sum, mut domain_sum) = (0.0, 0.0);
        for idx in &batches {
            let source = train.batch(idx)?;
            let losses = match (&mut net, dann) {
                (Network::Dann(params), true) => {
                    let target_batch = target.batch(&cycle.take(tgt_batch)?)?;
                    dann_step(
                        params,
                        &source,
                        &target_batch,
                        lambda,
                        config.domain_loss_weight,
                        &mut state,
                        lr,
                    )?
                }
                (net, _) => source_step(net, &source, &mut state, lr)?,
            };
            label_sum += losses.label;
            domain_sum += losses.domain.unwrap_or(0.0);
        }
        let steps = batches.len().max(1) as f64;
        let val_accuracy = if val.is_empty() {
            None
        } else {
            let acc = evaluate(&net, val, config.eval_batch_size)?.accuracy;
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, net.clone()));
                history.best_epoch = epoch;
            }
            Some(acc)
        };
        history.epochs.push(EpochRecord {
            epoch,
            lambda,
            label_loss: label_sum / steps,
            domain_loss: dann.then_some(domain_sum / steps),
            val_accuracy,
        });
    }
    if best.is_none() {
        history.best_epoch = config.epochs - 1;
    }
    let best = best.map(|(_, n)| n).unwrap_or_else(|| net.clone());
    Ok(FitOutcome {
        best,
        last: net,
        history,
    })
}
