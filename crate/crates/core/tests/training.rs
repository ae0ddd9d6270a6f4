use ultralif::autodiff::Tape;
use ultralif::encoding::{make_blobs, Dataset, InputEncoding};
use ultralif::network::{loss, Mode, Network, NetworkSpec};
use ultralif::neurons::NeuronKind;
use ultralif::training::{ablate_epsilon, evaluate, train, Adam, EpsMode, TrainConfig};

fn blobs() -> Dataset {
    let mut d = make_blobs(2, 200, 2, 0.1, 11).unwrap();
    // Blob coordinates are already centred; present them unscaled.
    d.mean = 0.0;
    d.std = 1.0;
    d
}

fn micro_spec(kind: NeuronKind) -> NetworkSpec {
    let mut spec = NetworkSpec::new(2, 2, kind);
    spec.hidden = vec![8];
    spec.timesteps = 1;
    spec
}

fn micro_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 5,
        batch: 16,
        lr0: 1e-2,
        encoding: InputEncoding::Analog,
        ..Default::default()
    }
}

#[test]
fn micro_run_fits_separable_blobs() {
    let data = blobs();
    let out = train(
        &micro_spec(NeuronKind::UltraLif),
        &data,
        &data,
        &micro_cfg(),
    )
    .unwrap();
    assert_eq!(out.summary.final_acc, 1.0, "{:#?}", out.metrics);
    assert_eq!(out.metrics.rows.len(), 5);
    assert!(out
        .metrics
        .rows
        .windows(2)
        .all(|w| w[0].epoch + 1 == w[1].epoch));
}

#[test]
fn same_seed_same_bytes() {
    let data = blobs();
    let spec = micro_spec(NeuronKind::UltraDlif);
    let a = train(&spec, &data, &data, &micro_cfg()).unwrap();
    let b = train(&spec, &data, &data, &micro_cfg()).unwrap();
    assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
    assert_eq!(a.network, b.network);
    let other = TrainConfig {
        seed: 7,
        ..micro_cfg()
    };
    let c = train(&spec, &data, &data, &other).unwrap();
    assert_ne!(a.metrics.to_csv(), c.metrics.to_csv());
}

#[test]
fn sparsity_penalty_lowers_spike_rate() {
    let data = blobs();
    let spec = micro_spec(NeuronKind::UltraLif);
    let dense = train(&spec, &data, &data, &micro_cfg()).unwrap();
    let sparse_cfg = TrainConfig {
        lambda: 0.1,
        ..micro_cfg()
    };
    let sparse = train(&spec, &data, &data, &sparse_cfg).unwrap();
    assert!(
        sparse.summary.final_spike_soft < dense.summary.final_spike_soft,
        "{} vs {}",
        sparse.summary.final_spike_soft,
        dense.summary.final_spike_soft
    );
}

#[test]
fn one_adam_step_lowers_first_batch_loss() {
    let data = blobs().head(16);
    let net = Network::new(micro_spec(NeuronKind::UltraLif), 42).unwrap();
    let frames = vec![data.images.map(|x| x)];
    let eval = |net: &Network| {
        let tape = Tape::new();
        let bound = net.bind(&tape);
        let rec = net
            .forward(&tape, &bound, &frames, Mode::Train, false)
            .unwrap();
        let root = loss(&rec, &data.labels, 0.0).unwrap();
        let value = root.item().unwrap();
        (value, bound.gradients(&tape.backward(root).unwrap()))
    };
    let (before, grads) = eval(&net);
    let mut stepped = net.clone();
    Adam::new(&stepped.params)
        .step(&mut stepped.params, &grads, 1e-3)
        .unwrap();
    stepped.project_eps();
    let (after, _) = eval(&stepped);
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn eps_stays_clamped_every_epoch() {
    let data = blobs();
    let cfg = TrainConfig {
        lr0: 0.5,
        ..micro_cfg()
    };
    let out = train(&micro_spec(NeuronKind::UltraDplif), &data, &data, &cfg).unwrap();
    for row in &out.metrics.rows {
        for &e in &row.eps {
            assert!((0.1 - 1e-12..=20.0 + 1e-12).contains(&e), "{e}");
        }
    }
    assert!(out.summary.eps_within_clamp);
}

#[test]
fn ablation_contract() {
    let data = blobs();
    let cfg = TrainConfig {
        epochs: 2,
        ..micro_cfg()
    };
    let report = ablate_epsilon(
        &micro_spec(NeuronKind::UltraLif),
        &data,
        &data,
        &cfg,
        &[0.5, 2.0],
        true,
    )
    .unwrap();
    assert_eq!(report.rows.len(), 3);
    for row in &report.rows[..2] {
        assert_eq!(row.setting, "fixed");
        assert!((row.final_eps[0] - row.initial_eps).abs() < 1e-12);
    }
    let learned = &report.rows[2];
    assert_eq!(learned.setting, "learned");
    assert!(learned.eps_within_clamp);
    assert!((0.1..=20.0).contains(&learned.final_eps[0]));
    assert!(ablate_epsilon(
        &micro_spec(NeuronKind::Lif),
        &data,
        &data,
        &cfg,
        &[1.0],
        false
    )
    .is_err());
}

#[test]
fn baselines_report_equal_soft_and_hard_rates() {
    let data = blobs();
    let cfg = TrainConfig {
        epochs: 1,
        ..micro_cfg()
    };
    let out = train(&micro_spec(NeuronKind::AdaLif), &data, &data, &cfg).unwrap();
    let r = &out.metrics.rows[0];
    assert_eq!(r.spike_soft, r.spike_hard);
    assert!(r.eps.is_empty());
    let hard = evaluate(
        &out.network,
        &data,
        InputEncoding::Analog,
        64,
        42,
        Mode::EvalHard,
    );
    assert!(hard.is_err());
}

#[test]
fn fixed_eps_mode_freezes_temperature() {
    let data = blobs();
    let cfg = TrainConfig {
        eps_mode: EpsMode::Fixed(0.7),
        epochs: 2,
        ..micro_cfg()
    };
    let out = train(&micro_spec(NeuronKind::UltraPlif), &data, &data, &cfg).unwrap();
    assert!(out
        .metrics
        .rows
        .iter()
        .all(|r| (r.eps[0] - 0.7).abs() < 1e-12));
    assert!(!out.network.params.get("hidden0.log_eps").unwrap().trainable);
}
