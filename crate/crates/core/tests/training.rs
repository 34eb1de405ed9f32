use twindann::autodiff::{Parameter, Tape};
use twindann::data::{generate_corpus, standardize, Batch, Dataset, TargetFeatures, TwinConfig};
use twindann::models::{DannParams, ModelConfig, ModelKind, Network};
use twindann::training::{
    adam_step, alpha, dann_graph, dann_step, evaluate, fit, source_step, AdamConfig, AdamState,
    GammaSchedule, TrainConfig, TrainMode,
};
use twindann::Error;

fn small_corpus(seq_len: usize, source_traj: usize, target: usize) -> (Dataset, Dataset) {
    let cfg = TwinConfig {
        seq_len,
        ..TwinConfig::default()
    };
    let (mut src, mut tgt) = generate_corpus(&cfg, source_traj, target, 5).unwrap();
    standardize(&mut src, &mut [&mut tgt]).unwrap();
    (src, tgt)
}

fn batches(src: &Dataset, tgt: &Dataset, n: usize) -> (Batch, Batch) {
    let idx: Vec<usize> = (0..n).collect();
    (
        src.batch(&idx).unwrap(),
        tgt.features_only().batch(&idx).unwrap(),
    )
}

fn short_config(mode: TrainMode, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        mode,
        ..TrainConfig::default()
    }
}

#[test]
fn schedule_matches_closed_form() {
    assert_eq!(alpha(0, 250), 0.0);
    let s = GammaSchedule::default();
    assert!((s.at_progress(0.5) - 0.986614).abs() < 1e-6);
    assert!((s.at_progress(1.0) - 0.9999092).abs() < 1e-6);
    assert!((alpha(250, 250) - 0.9999092).abs() < 1e-6);
    let values: Vec<f64> = (0..=250).map(|e| alpha(e, 250)).collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    assert!(values.iter().all(|&a| (0.0..1.0).contains(&a)));
}

#[test]
fn labeled_target_batch_is_rejected() {
    let (src, tgt) = small_corpus(30, 2, 18);
    let idx: Vec<usize> = (0..4).collect();
    let source = src.batch(&idx).unwrap();
    let leaked = tgt.batch(&idx).unwrap();
    let mut params = DannParams::init(Default::default(), 32, 0).unwrap();
    let mut state = AdamState::new(AdamConfig::default(), params.parameters());
    let err = dann_step(&mut params, &source, &leaked, 0.5, 1.0, &mut state, 1e-3).unwrap_err();
    assert!(matches!(err, Error::Contract(_)), "{err}");
}

fn feature_grads(
    params: &DannParams,
    source: &Batch,
    target: &Batch,
    lambda: f64,
    weight: f64,
) -> Vec<Parameter> {
    let mut tape = Tape::new();
    let g = dann_graph(params, &mut tape, source, target, lambda, weight).unwrap();
    let grads = tape.backward(g.total).unwrap();
    let mut copy = params.clone();
    let mut ps = copy.parameters_mut();
    ps.iter_mut().for_each(|p| p.zero_grad());
    grads.accumulate_into(&tape, ps.into_iter());
    copy.feature.parameters().into_iter().cloned().collect()
}

#[test]
fn lambda_zero_leaves_backbone_gradient_at_source_only_value() {
    let (src, tgt) = small_corpus(30, 2, 18);
    let (source, target) = batches(&src, &tgt, 8);
    let params = DannParams::init(Default::default(), 32, 4).unwrap();
    let adversarial = feature_grads(&params, &source, &target, 0.0, 1.0);
    let label_only = feature_grads(&params, &source, &target, 0.0, 0.0);
    assert_eq!(adversarial, label_only);
}

#[test]
fn domain_path_reaches_backbone_negated() {
    let (src, tgt) = small_corpus(30, 2, 18);
    let (source, target) = batches(&src, &tgt, 8);
    let params = DannParams::init(Default::default(), 32, 4).unwrap();
    let lambda = 1.0;
    let total = feature_grads(&params, &source, &target, lambda, 1.0);
    let label = feature_grads(&params, &source, &target, lambda, 0.0);

    // Unreversed domain gradient through the same backbone pass.
    let mut tape = Tape::new();
    let mut inputs = source.inputs.data().to_vec();
    inputs.extend_from_slice(target.inputs.data());
    let shape = vec![16, 6, source.inputs.shape()[2]];
    let x = tape.constant(twindann::autodiff::Tensor::new(shape, inputs).unwrap());
    let f = params.feature_extract(&mut tape, x).unwrap();
    let plain = tape.identity(f);
    let logits = params.domain_head.forward(&mut tape, plain).unwrap();
    let domains: Vec<usize> = (0..16).map(|i| usize::from(i >= 8)).collect();
    let ld = tape.cross_entropy(logits, &domains).unwrap();
    let grads = tape.backward(ld).unwrap();
    let mut copy = params.clone();
    let mut ps = copy.parameters_mut();
    ps.iter_mut().for_each(|p| p.zero_grad());
    grads.accumulate_into(&tape, ps.into_iter());
    let unreversed: Vec<Parameter> = copy.feature.parameters().into_iter().cloned().collect();

    for ((t, l), u) in total.iter().zip(&label).zip(&unreversed) {
        let scale = u
            .grad
            .data()
            .iter()
            .chain(l.grad.data())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..t.numel() {
            let domain_part = t.grad.data()[i] - l.grad.data()[i];
            let want = -lambda * u.grad.data()[i];
            assert!(
                (domain_part - want).abs() <= 1e-12 * scale,
                "{}[{i}]",
                t.name
            );
        }
    }
}

fn domain_loss(params: &DannParams, source: &Batch, target: &Batch) -> f64 {
    let mut tape = Tape::new();
    let g = dann_graph(params, &mut tape, source, target, 1.0, 1.0).unwrap();
    tape.value(g.domain_loss).item()
}

fn label_loss(params: &DannParams, source: &Batch, target: &Batch) -> f64 {
    let mut tape = Tape::new();
    let g = dann_graph(params, &mut tape, source, target, 1.0, 1.0).unwrap();
    tape.value(g.label_loss).item()
}

#[test]
fn domain_head_descends_domain_loss() {
    let (src, tgt) = small_corpus(30, 2, 18);
    let (source, target) = batches(&src, &tgt, 8);
    let mut params = DannParams::init(Default::default(), 32, 8).unwrap();
    let before = domain_loss(&params, &source, &target);
    let mut tape = Tape::new();
    let g = dann_graph(&params, &mut tape, &source, &target, 1.0, 1.0).unwrap();
    let grads = tape.backward(g.total).unwrap();
    let mut head = params.domain_head.parameters_mut();
    head.iter_mut().for_each(|p| p.zero_grad());
    grads.accumulate_into(&tape, head.iter_mut().map(|p| &mut **p));
    let mut state = AdamState::new(AdamConfig::default(), head.iter().map(|p| &**p));
    adam_step(&mut head, &mut state, 1e-3).unwrap();
    assert!(domain_loss(&params, &source, &target) < before);
}

/// One joint step with λ = 1 over 20 initialisations: label predictor and
/// domain classifier descend their losses, while the backbone update on its
/// own raises the domain loss on average.
#[test]
fn dann_step_realises_the_saddle_update() {
    let (src, tgt) = small_corpus(30, 2, 18);
    let (source, target) = batches(&src, &tgt, 8);
    let (mut head_visible, mut backbone_mediated, mut label_change) = (0.0, 0.0, 0.0);
    for seed in 0..20 {
        let before = DannParams::init(Default::default(), 32, 100 + seed).unwrap();
        let mut after = before.clone();
        let mut state = AdamState::new(AdamConfig::default(), after.parameters());
        dann_step(&mut after, &source, &target, 1.0, 1.0, &mut state, 1e-3).unwrap();

        let ld0 = domain_loss(&before, &source, &target);
        let mut new_head = before.clone();
        new_head.domain_head = after.domain_head.clone();
        let mut new_backbone = before.clone();
        new_backbone.feature = after.feature.clone();
        let mut new_label = before.clone();
        new_label.label_head = after.label_head.clone();

        head_visible += domain_loss(&new_head, &source, &target) - ld0;
        backbone_mediated += domain_loss(&new_backbone, &source, &target) - ld0;
        label_change +=
            label_loss(&new_label, &source, &target) - label_loss(&before, &source, &target);
    }
    assert!(head_visible < 0.0, "{head_visible}");
    assert!(label_change < 0.0, "{label_change}");
    assert!(backbone_mediated > 0.0, "{backbone_mediated}");
}

#[test]
fn source_only_overfits_ten_samples() {
    let (src, tgt) = small_corpus(40, 2, 9);
    let ten = src.subset(&(0..10).collect::<Vec<_>>(), "ten");
    let empty = ten.subset(&[], "none");
    let cfg = short_config(TrainMode::SourceOnly, 200);
    let out = fit(
        ModelKind::Cnn,
        &ModelConfig::default(),
        &cfg,
        0,
        &ten,
        &empty,
        &tgt.features_only(),
    )
    .unwrap();
    assert_eq!(out.history.len(), 200);
    let report = evaluate(&out.last, &ten, 64).unwrap();
    assert_eq!(report.accuracy, 1.0);
}

#[test]
fn history_length_matches_default_epochs() {
    let (src, tgt) = small_corpus(20, 1, 9);
    let cfg = TrainConfig::default();
    assert_eq!(cfg.epochs, 250);
    let out = fit(
        ModelKind::Dann,
        &ModelConfig::default(),
        &cfg,
        1,
        &src,
        &src,
        &tgt.features_only(),
    )
    .unwrap();
    assert_eq!(out.history.len(), 250);
    assert_eq!(out.history.batch_composition, Some((9, 9)));
    let lambdas: Vec<f64> = out.history.epochs.iter().map(|e| e.lambda).collect();
    assert_eq!(lambdas[0], 0.0);
    assert!(lambdas.windows(2).all(|w| w[0] <= w[1]));
    let best = out.history.best_epoch;
    let best_acc = out.history.epochs[best].val_accuracy.unwrap();
    for e in &out.history.epochs {
        let acc = e.val_accuracy.unwrap();
        assert!(acc < best_acc || (acc == best_acc && e.epoch >= best));
    }
}

#[test]
fn equal_seeds_give_identical_runs() {
    let (src, tgt) = small_corpus(30, 2, 18);
    let cfg = short_config(TrainMode::Dann, 3);
    let run = || {
        fit(
            ModelKind::Dann,
            &ModelConfig::default(),
            &cfg,
            9,
            &src,
            &src,
            &tgt.features_only(),
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.history, b.history);
    assert_eq!(a.last, b.last);
    assert_eq!(a.best, b.best);
}

#[test]
fn target_labels_never_influence_training() {
    let (src, tgt) = small_corpus(30, 2, 18);
    let mut poisoned = tgt.clone();
    for s in &mut poisoned.samples {
        s.class_label = None;
    }
    let mut shuffled = tgt.clone();
    shuffled.samples.iter_mut().enumerate().for_each(|(i, s)| {
        s.class_label = Some(twindann::data::ClassLabel::new((i * 5 + 3) % 9).unwrap());
    });
    let cfg = short_config(TrainMode::Dann, 2);
    let run = |t: &TargetFeatures| {
        fit(
            ModelKind::Dann,
            &ModelConfig::default(),
            &cfg,
            3,
            &src,
            &src,
            t,
        )
        .unwrap()
    };
    let reference = run(&tgt.features_only());
    for other in [&poisoned, &shuffled] {
        let out = run(&other.features_only());
        assert_eq!(out.history, reference.history);
        assert_eq!(out.last, reference.last);
    }
}

#[test]
fn dann_mode_needs_target_features() {
    let (src, _) = small_corpus(30, 2, 18);
    let cfg = short_config(TrainMode::Dann, 1);
    let err = fit(
        ModelKind::Dann,
        &ModelConfig::default(),
        &cfg,
        0,
        &src,
        &src,
        &TargetFeatures::default(),
    )
    .err()
    .unwrap();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn zero_domain_weight_reproduces_source_only_training() {
    let (src, tgt) = small_corpus(30, 3, 18);
    let epochs = 3;
    let dann_cfg = TrainConfig {
        domain_loss_weight: 0.0,
        ..short_config(TrainMode::Dann, epochs)
    };
    let cnn_cfg = TrainConfig {
        batch_size: 16,
        ..short_config(TrainMode::SourceOnly, epochs)
    };
    let m = ModelConfig::default();
    let dann = fit(
        ModelKind::Dann,
        &m,
        &dann_cfg,
        6,
        &src,
        &src,
        &tgt.features_only(),
    )
    .unwrap();
    let cnn = fit(
        ModelKind::Cnn,
        &m,
        &cnn_cfg,
        6,
        &src,
        &src,
        &tgt.features_only(),
    )
    .unwrap();
    let (Network::Dann(d), Network::Cnn(c)) = (&dann.last, &cnn.last) else {
        unreachable!()
    };
    assert_eq!(d.feature, c.feature);
    assert_eq!(d.label_head, c.label_head);
    let losses = |h: &twindann::training::RunHistory| {
        h.epochs.iter().map(|e| e.label_loss).collect::<Vec<_>>()
    };
    assert_eq!(losses(&dann.history), losses(&cnn.history));
}

#[test]
fn source_step_reduces_label_loss_on_its_batch() {
    let (src, _) = small_corpus(30, 2, 9);
    let batch = src.batch(&(0..12).collect::<Vec<_>>()).unwrap();
    let mut net = Network::init(ModelKind::Cnn, &ModelConfig::default(), 2).unwrap();
    let mut state = AdamState::new(AdamConfig::default(), net.parameters());
    let first = source_step(&mut net, &batch, &mut state, 1e-3)
        .unwrap()
        .label;
    let mut last = first;
    for _ in 0..10 {
        last = source_step(&mut net, &batch, &mut state, 1e-3)
            .unwrap()
            .label;
    }
    assert!(last < first);
}

#[test]
fn evaluate_constant_predictor_and_purity() {
    let (src, _) = small_corpus(30, 3, 9);
    let mut net = Network::init(ModelKind::Cnn, &ModelConfig::default(), 0).unwrap();
    for p in net.parameters_mut() {
        p.value.fill(0.0);
    }
    let a = evaluate(&net, &src, 7).unwrap();
    assert!((a.accuracy - 1.0 / 9.0).abs() < 1e-12);
    assert_eq!(a, evaluate(&net, &src, 7).unwrap());
    assert_eq!(a, evaluate(&net, &src, 64).unwrap());
}
