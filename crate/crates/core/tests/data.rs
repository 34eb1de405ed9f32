use proptest::prelude::*;
use twindann::data::{
    generate_corpus, load_dataset, make_batches, save_dataset, simulate_sample, simulate_trace,
    split, standardize, BatchMode, ClassLabel, DomainLabel, FaultMode, GapConfig, SplitRatio,
    TwinConfig,
};

fn cfg(seq_len: usize) -> TwinConfig {
    TwinConfig {
        seq_len,
        ..TwinConfig::default()
    }
}

#[test]
fn paper_scale_corpus_sizes() {
    let (src, tgt) = generate_corpus(&cfg(1000), 400, 90, 0).unwrap();
    assert_eq!(src.len(), 3600);
    assert_eq!(src.class_counts(), [400; 9]);
    assert_eq!(tgt.len(), 90);
    assert_eq!(tgt.class_counts(), [10; 9]);
    assert!(src
        .samples
        .iter()
        .all(|s| s.domain == DomainLabel::Source && s.seq_len == 1000));
    assert!(tgt.samples.iter().all(|s| s.domain == DomainLabel::Target));
    assert!(src
        .samples
        .iter()
        .chain(&tgt.samples)
        .all(|s| s.features.iter().all(|v| v.is_finite())));

    let (train, val) = split(&src, SplitRatio::NINE_TO_ONE, 0).unwrap();
    assert_eq!((train.len(), val.len()), (3240, 360));
    assert_eq!(train.class_counts(), [360; 9]);
    assert_eq!(val.class_counts(), [40; 9]);
    let batches = make_batches(train.len(), 16, Some(1), BatchMode::Train).unwrap();
    assert_eq!(batches.len(), 202);
}

#[test]
fn one_trajectory_gives_one_sample_per_class() {
    let (src, _) = generate_corpus(&cfg(50), 1, 0, 3).unwrap();
    let labels = src.labels().unwrap();
    assert_eq!(labels, (0..9).collect::<Vec<_>>());
}

#[test]
fn stuck_joint_has_zero_variance_after_onset() {
    let c = cfg(200);
    for motor in 0..4 {
        for seed in 0..5 {
            let class = ClassLabel::fault(motor, FaultMode::Stuck).unwrap();
            let tr = simulate_trace(&c, class, DomainLabel::Source, seed).unwrap();
            let t0 = tr.onset.unwrap();
            let (lo, hi) = c.onset_range();
            assert!((lo..=hi).contains(&t0));
            let held = tr.realized_joints[t0][motor];
            assert!(tr.realized_joints[t0..].iter().all(|q| q[motor] == held));
        }
    }
    assert_eq!(cfg(1000).onset_range(), (100, 900));
}

#[test]
fn steady_state_offset_matches_configuration() {
    let c = cfg(200);
    for motor in 0..4 {
        let expected = c.fault.steady_state_fraction * 2.0 * c.half_range[motor];
        for seed in 0..5 {
            let class = ClassLabel::fault(motor, FaultMode::SteadyStateError).unwrap();
            let faulty = simulate_trace(&c, class, DomainLabel::Source, seed).unwrap();
            let healthy =
                simulate_trace(&c, ClassLabel::HEALTHY, DomainLabel::Source, seed).unwrap();
            let t0 = faulty.onset.unwrap();
            let n = (c.seq_len - t0) as f64;
            let mean_error = |tr: &twindann::data::SimulationTrace| {
                tr.desired_joints[t0..]
                    .iter()
                    .zip(&tr.realized_joints[t0..])
                    .map(|(d, r)| d[motor] - r[motor])
                    .sum::<f64>()
                    / n
            };
            let shift = (mean_error(&healthy) - mean_error(&faulty)).abs();
            assert!(
                (shift - expected).abs() <= 0.01 * expected,
                "motor {motor}: {shift} vs {expected}"
            );
        }
    }
}

#[test]
fn motors_five_and_six_never_fault() {
    let c = cfg(100);
    for class in ClassLabel::all() {
        for domain in [DomainLabel::Source, DomainLabel::Target] {
            let tr = simulate_trace(&c, class, domain, 17).unwrap();
            for t in 0..c.seq_len {
                for j in 4..6 {
                    assert_eq!(tr.realized_joints[t][j], tr.tracked_joints[t][j]);
                }
            }
        }
    }
    assert!(ClassLabel::fault(4, FaultMode::Stuck).is_err());
}

#[test]
fn zero_gap_makes_target_equal_source() {
    let c = TwinConfig {
        gap: GapConfig::NONE,
        ..cfg(120)
    };
    for class in ClassLabel::all() {
        let s = simulate_sample(&c, class, DomainLabel::Source, 99).unwrap();
        let t = simulate_sample(&c, class, DomainLabel::Target, 99).unwrap();
        assert_eq!(s.features, t.features);
        assert_eq!(s.class_label, t.class_label);
    }
    let gapped = cfg(120);
    let s = simulate_sample(&gapped, ClassLabel::HEALTHY, DomainLabel::Source, 99).unwrap();
    let t = simulate_sample(&gapped, ClassLabel::HEALTHY, DomainLabel::Target, 99).unwrap();
    assert_ne!(s.features, t.features);
}

#[test]
fn corpus_generation_is_deterministic() {
    let a = generate_corpus(&cfg(60), 3, 9, 42).unwrap();
    let b = generate_corpus(&cfg(60), 3, 9, 42).unwrap();
    let c = generate_corpus(&cfg(60), 3, 9, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.0.samples, c.0.samples);
}

#[test]
fn standardisation_uses_training_statistics_only() {
    let (src, tgt) = generate_corpus(&cfg(80), 4, 18, 1).unwrap();
    let (mut train, mut val) = split(&src, SplitRatio::NINE_TO_ONE, 1).unwrap();
    let mut target = tgt.clone();
    let stats = standardize(&mut train, &mut [&mut val, &mut target]).unwrap();
    let rows: Vec<&[f64]> = train
        .samples
        .iter()
        .flat_map(|s| s.features.chunks(6))
        .collect();
    let n = rows.len() as f64;
    for col in 0..6 {
        let mean = rows.iter().map(|r| r[col]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[col] - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-10, "column {col} mean {mean}");
        assert!(
            (var.sqrt() - 1.0).abs() < 1e-10,
            "column {col} std {}",
            var.sqrt()
        );
    }
    // Same map on the target: undo it and recover the raw features.
    for (raw, z) in tgt.samples.iter().zip(&target.samples) {
        for (i, (&r, &v)) in raw.features.iter().zip(&z.features).enumerate() {
            let col = i % 6;
            assert!((v * stats.std[col] + stats.mean[col] - r).abs() < 1e-12);
        }
    }
}

#[test]
fn native_format_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = generate_corpus(&cfg(40), 2, 9, 8).unwrap();
    for (name, ds) in [("source", &src), ("target", &tgt)] {
        let path = dir.path().join(format!("{name}.json"));
        save_dataset(ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(&back, ds);
        let again = dir.path().join(format!("{name}2.json"));
        save_dataset(&back, &again).unwrap();
        assert_eq!(
            std::fs::read(path.with_extension("bin")).unwrap(),
            std::fs::read(again.with_extension("bin")).unwrap()
        );
    }
}

#[test]
fn label_names_follow_table_order() {
    let names: Vec<String> = ClassLabel::all().map(|c| c.name().to_string()).collect();
    assert_eq!(names[0], "Healthy");
    assert_eq!(names[1], "Motor 1 Stuck");
    assert_eq!(names[2], "Motor 1 Steady state error");
    assert_eq!(names[8], "Motor 4 Steady state error");
    assert_eq!("Motor 3 Stuck".parse::<ClassLabel>().unwrap().id(), 5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_is_stratified_partition(per_class in 2usize..30, seed in any::<u64>()) {
        let mut samples = Vec::new();
        for class in ClassLabel::all() {
            for k in 0..per_class {
                samples.push(twindann::data::SequenceSample::new(
                    vec![(class.id() * 100 + k) as f64; 6 * 2], 2, Some(class), DomainLabel::Source,
                ).unwrap());
            }
        }
        let ds = twindann::data::Dataset {
            samples,
            provenance: twindann::data::Provenance::Loaded { path: "mem".into() },
        };
        for ratio in [SplitRatio::NINE_TO_ONE, SplitRatio::SEVEN_TO_THREE] {
            let (a, b) = split(&ds, ratio, seed).unwrap();
            prop_assert_eq!(a.len() + b.len(), ds.len());
            let mut keys: Vec<u64> = a.samples.iter().chain(&b.samples).map(|s| s.features[0] as u64).collect();
            keys.sort_unstable();
            let mut want: Vec<u64> = ds.samples.iter().map(|s| s.features[0] as u64).collect();
            want.sort_unstable();
            prop_assert_eq!(keys, want);
            let counts = b.class_counts();
            prop_assert!(counts.iter().all(|&c| c == counts[0] && c >= 1 && c < per_class));
            let (a2, b2) = split(&ds, ratio, seed).unwrap();
            prop_assert_eq!(a2, a);
            prop_assert_eq!(b2, b);
        }
    }

    #[test]
    fn batches_cover_each_index_at_most_once(
        n in 0usize..200, size in 1usize..40, seed in proptest::option::of(any::<u64>()),
        train in any::<bool>(),
    ) {
        let mode = if train { BatchMode::Train } else { BatchMode::Eval };
        let batches = make_batches(n, size, seed, mode).unwrap();
        let mut seen = vec![false; n];
        for b in &batches {
            prop_assert!(b.len() <= size);
            if train { prop_assert_eq!(b.len(), size); }
            for &i in b {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        let covered = seen.iter().filter(|&&s| s).count();
        prop_assert_eq!(covered, if train { n / size * size } else { n });
        if seed.is_none() {
            let flat: Vec<usize> = batches.into_iter().flatten().collect();
            prop_assert!(flat.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
