use nmhash::data::{default_synthetic, generate_synthetic, FeatureDataset};
use nmhash::trainer::{
    leave_one_out_profile, prepare_dataset, run_variant, train, train_baseline, train_progressive,
    ExperimentConfig, Readout, Stage, Trainer, Variant,
};
use nmhash::Error;

fn small_config(variant: Variant) -> ExperimentConfig {
    ExperimentConfig {
        b_in: 12,
        b_out: 8,
        m: 2,
        base_epochs: 3,
        n0_epochs: 1,
        n1_epochs: 2,
        batch_size: 32,
        hidden_dims: vec![32],
        n_query: 40,
        n_validation: Some(30),
        seed: 3,
        variant,
        ..Default::default()
    }
    .for_variant(variant)
}

fn small_data(cfg: &ExperimentConfig) -> FeatureDataset {
    let raw = generate_synthetic(4, 8, 60, 1.0, 11).unwrap();
    prepare_dataset(cfg, &raw).unwrap()
}

#[test]
fn progressive_run_lands_exactly_on_b_out() {
    let cfg = small_config(Variant::Full);
    let ds = small_data(&cfg);
    let (net, graph, report) = train_progressive(&cfg, &ds).unwrap();
    assert_eq!(net.output_dim(), 12);
    assert_eq!(graph.n_nodes(), 12);
    assert_eq!(graph.n_groups(), 8);
    let bits: Vec<usize> = report.bit_reduction.iter().map(|p| p.effective_bits).collect();
    assert_eq!(bits.first(), Some(&12));
    assert_eq!(bits.last(), Some(&8));
    assert!(bits.windows(2).all(|w| w[1] < w[0]), "{bits:?}");
    for r in &report.rounds {
        assert!(r.m_used >= 1 && r.m_used <= cfg.m);
        assert!(r.max_score_sum_drift < 1e-12);
        assert_eq!(r.active_loss_trace.len(), cfg.n0_epochs * ds.indices(nmhash::data::Role::Train).len().div_ceil(32));
    }
    assert_eq!(report.final_metrics.as_ref().unwrap().effective_bits, 8);
    assert_eq!(report.leave_one_out.as_ref().unwrap().drops.len(), 8);
}

#[test]
fn equal_widths_skip_merging() {
    let mut cfg = small_config(Variant::Full);
    cfg.b_in = 8;
    let ds = small_data(&cfg);
    let (_, graph, report) = train_progressive(&cfg, &ds).unwrap();
    assert!(report.rounds.is_empty());
    assert_eq!(graph.n_groups(), 8);
    assert!(graph.groups().iter().all(|g| g.len() == 1));

    // with no rounds the full schedule is plain training on the same seed
    let mut base = cfg.clone();
    base.variant = Variant::Baseline;
    let (net, base_report) = train_baseline(&base, &ds).unwrap();
    let (full_net, _, _) = train_progressive(&cfg, &ds).unwrap();
    assert_eq!(net, full_net);
    assert_eq!(base_report.epoch_losses, report.epoch_losses);
}

#[test]
fn zero_base_epochs_keep_the_initialization() {
    let mut cfg = small_config(Variant::Baseline);
    cfg.base_epochs = 0;
    let ds = small_data(&cfg);
    let (net, report) = train_baseline(&cfg, &ds).unwrap();
    let (trained, _) = train(&cfg, &ds).unwrap();
    assert_eq!(net, trained.net);
    assert!(report.epoch_losses.is_empty());
    assert_eq!(net.layer_dims(), vec![8, 32, 8]);
    let fresh = Trainer::new(&cfg, &ds).unwrap();
    assert_eq!(&fresh.state().model.net, &net);
}

#[test]
fn baseline_loss_falls_early() {
    let raw = default_synthetic().unwrap();
    let cfg = ExperimentConfig {
        b_in: 12,
        b_out: 12,
        variant: Variant::Baseline,
        base_epochs: 6,
        seed: 1,
        ..Default::default()
    };
    let ds = prepare_dataset(&cfg, &raw).unwrap();
    let (_, report) = train_baseline(&cfg, &ds).unwrap();
    assert!(report.epoch_losses[5] < report.epoch_losses[0], "{:?}", report.epoch_losses);
}

#[test]
fn reruns_are_identical() {
    for v in Variant::ALL {
        let cfg = small_config(v);
        let ds = small_data(&cfg);
        let a = train(&cfg, &ds).unwrap();
        let b = train(&cfg, &ds).unwrap();
        assert_eq!(a.1.to_json(), b.1.to_json(), "{v}");
        assert_eq!(a.0, b.0, "{v}");
    }
}

#[test]
fn dropout_at_rate_zero_matches_baseline() {
    let mut cfg = small_config(Variant::Dropout);
    cfg.dropout_rate = 0.0;
    let ds = small_data(&cfg);
    let (model, report) = train(&cfg, &ds).unwrap();
    let base_cfg = ExperimentConfig {
        variant: Variant::Baseline,
        ..cfg.clone()
    };
    let (net, base) = train_baseline(&base_cfg, &ds).unwrap();
    assert_eq!(model.net, net);
    assert_eq!(report.epoch_losses, base.epoch_losses);
}

#[test]
fn select_without_reduction_is_baseline() {
    let mut cfg = small_config(Variant::Select);
    cfg.b_in = 8;
    cfg.base_epochs = 4;
    let ds = small_data(&cfg);
    let (model, report) = train(&cfg, &ds).unwrap();
    assert!(report.selected_bits.is_none());
    let base_cfg = ExperimentConfig {
        variant: Variant::Baseline,
        ..cfg.clone()
    };
    let (net, _) = train_baseline(&base_cfg, &ds).unwrap();
    assert_eq!(model.net, net);
}

#[test]
fn select_keeps_b_out_bits() {
    let cfg = small_config(Variant::Select);
    let ds = small_data(&cfg);
    let (model, report) = train(&cfg, &ds).unwrap();
    let kept = report.selected_bits.unwrap();
    assert_eq!(kept.len(), 8);
    assert!(kept.windows(2).all(|w| w[0] < w[1]));
    assert!(matches!(model.readout, Readout::Select { n_outputs: 12, .. }));
    // fine-tuning gets the rounds' worth of frozen epochs
    assert_eq!(report.epoch_losses.len(), cfg.base_epochs + cfg.nominal_rounds() * cfg.n1_epochs);
}

#[test]
fn random_variant_is_seeded() {
    let cfg = small_config(Variant::Random);
    let ds = small_data(&cfg);
    let a = run_variant(&cfg, &ds).unwrap();
    let b = run_variant(&cfg, &ds).unwrap();
    let groups = |r: &nmhash::trainer::RunReport| -> Vec<Vec<Vec<usize>>> {
        r.rounds.iter().map(|x| x.merged_groups.clone()).collect()
    };
    assert_eq!(groups(&a), groups(&b));
    assert!(a.rounds.iter().all(|r| r.active_loss_trace.is_empty()));
    assert_eq!(a.final_metrics.unwrap().effective_bits, 8);
}

#[test]
fn fc_layer_appends_an_affine_map() {
    let cfg = small_config(Variant::FcLayer);
    let ds = small_data(&cfg);
    let (model, report) = train(&cfg, &ds).unwrap();
    assert_eq!(model.net.layer_dims(), vec![8, 32, 12, 8]);
    assert_eq!(model.effective_bits(), 8);
    assert_eq!(report.final_metrics.unwrap().effective_bits, 8);
}

#[test]
fn matched_budget_for_fixed_length_variants() {
    let cfg = small_config(Variant::Full);
    let full = train(&cfg, &small_data(&cfg)).unwrap().1;
    let base_cfg = cfg.for_variant(Variant::Baseline);
    let base = train(&base_cfg, &small_data(&base_cfg)).unwrap().1;
    assert_eq!(full.epoch_losses.len(), base.epoch_losses.len());
}

#[test]
fn entry_points_check_their_variant() {
    let cfg = small_config(Variant::Full);
    let ds = small_data(&cfg);
    assert!(matches!(train_baseline(&cfg, &ds), Err(Error::Config(_))));
    assert!(matches!(run_variant(&cfg, &ds), Err(Error::Config(_))));
    let base = small_config(Variant::Baseline);
    assert!(matches!(train_progressive(&base, &ds), Err(Error::Config(_))));
    let mut wide = small_config(Variant::Baseline);
    wide.b_in = 10;
    assert!(matches!(train_baseline(&wide, &ds), Err(Error::Config(_))));
}

#[test]
fn merging_needs_a_validation_split() {
    let mut cfg = small_config(Variant::Full);
    cfg.n_validation = Some(0);
    let ds = small_data(&cfg);
    assert!(matches!(Trainer::new(&cfg, &ds), Err(Error::Config(_))));
    let mut cfg = small_config(Variant::Full);
    cfg.b_out = 13;
    assert!(matches!(Trainer::new(&cfg, &small_data(&small_config(Variant::Full))), Err(Error::Config(_))));
}

#[test]
fn stage_machine_walks_the_schedule() {
    let cfg = small_config(Variant::Full);
    let ds = small_data(&cfg);
    let mut t = Trainer::new(&cfg, &ds).unwrap();
    assert_eq!(t.state().stage, Stage::Base { done: 0 });
    t.run_epochs(cfg.base_epochs).unwrap();
    assert_eq!(t.state().stage, Stage::Active { round: 1, done: 0 });
    t.run_epochs(cfg.n0_epochs).unwrap();
    assert_eq!(t.state().stage, Stage::Frozen { round: 1, done: 0 });
    while t.step().unwrap() {}
    assert!(t.is_finished());
    assert!(!t.step().unwrap());
}

#[test]
fn leave_one_out_profile_matches_report() {
    let cfg = small_config(Variant::Baseline);
    let ds = small_data(&cfg);
    let (model, report) = train(&cfg, &ds).unwrap();
    let profile = leave_one_out_profile(&model, &ds).unwrap();
    assert_eq!(Some(&profile), report.leave_one_out.as_ref());
    assert_eq!(profile.drops.len(), 8);

    let mut one_bit = cfg.clone();
    one_bit.b_in = 1;
    one_bit.b_out = 1;
    one_bit.base_epochs = 0;
    let (m1, r1) = train(&one_bit, &ds).unwrap();
    assert!(r1.leave_one_out.is_none());
    assert!(matches!(leave_one_out_profile(&m1, &ds), Err(Error::InvalidArgument(_))));
}

#[test]
fn twelve_bit_baseline_separates_default_classes() {
    let raw = default_synthetic().unwrap();
    let budget = ExperimentConfig {
        b_in: 24,
        b_out: 16,
        ..Default::default()
    }
    .backbone_epoch_budget();
    let cfg = ExperimentConfig {
        b_in: 12,
        b_out: 12,
        variant: Variant::Baseline,
        base_epochs: budget,
        seed: 1,
        ..Default::default()
    };
    let ds = prepare_dataset(&cfg, &raw).unwrap();
    let (_, report) = train_baseline(&cfg, &ds).unwrap();
    let map = report.final_map().unwrap();
    assert!(map >= 0.95, "MAP {map}");
}
