use phasealign::data::prep::{prepare_units, to_window_set};
use phasealign::data::{prepare_split, Domain, MultivariateSeries, PhaseLabel, PrepConfig, WindowSet};
use phasealign::methods::gradcheck::check_method_gradients;
use phasealign::methods::step::domain_phase_class;
use phasealign::methods::{
    adapt_batch_norm, build_model, build_model_with, compute_mk_mmd, embed, forward_backward, predict_rul, train,
    train_method, train_source_only, GrlMode, Method, Mlp, MmdConfig, ModelBundle, SoftGating, StepBatch, TrainConfig,
};
use phasealign::nn::{bce, Activation, BnMode, Parameterized, Sgd, Tensor};
use phasealign::synth::{FleetSpec, FlightClass};
use phasealign::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

mod common;

use common::{tiny_batch, toy_set, toy_unit};

fn params_equal(a: &mut ModelBundle, b: &mut ModelBundle) -> bool {
    let pa = a.params_mut();
    let pb = b.params_mut();
    pa.len() == pb.len() && pa.iter().zip(pb.iter()).all(|(x, y)| x.data() == y.data())
}

fn cfg(method: Method, seed: u64, epochs: usize, batch: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: batch,
        ..TrainConfig::for_method(method, seed)
    }
}

#[test]
fn every_method_gradient_matches_finite_differences() {
    let batch = tiny_batch();
    let mut cases: Vec<(String, TrainConfig)> = Method::ALL
        .iter()
        .filter(|&&m| m != Method::OpsDannSoft)
        .map(|&m| (m.to_string(), TrainConfig::for_method(m, 3)))
        .collect();
    for gating in [SoftGating::Coupled, SoftGating::Oracle] {
        let c = TrainConfig {
            soft_gating: gating,
            lambda_z: 0.7,
            ..TrainConfig::for_method(Method::OpsDannSoft, 3)
        };
        cases.push((format!("ops-dann-soft/{gating:?}"), c));
    }
    cases.push((
        "ops-dann-hard/n_p=1".into(),
        TrainConfig {
            n_phases: 1,
            ..TrainConfig::for_method(Method::OpsDannHard, 3)
        },
    ));
    for (name, c) in cases {
        let mut model = build_model_with(c.method, c.n_phases, c.seed);
        let report = check_method_gradients(&mut model, &batch, &c, 1e-5, 24).unwrap();
        assert!(report.max_rel_error < 1e-4, "{name}: {report:?}");
    }
}

#[test]
fn ops_hard_with_one_phase_reproduces_dann() {
    let src = toy_set(Domain::Source, 2, 200, 50, 0.0, 5);
    let tgt = toy_set(Domain::Target, 2, 200, 50, 0.4, 6);
    let dann = train(&src, Some(&tgt), &cfg(Method::Dann, 11, 2, 64)).unwrap();
    let hard_cfg = TrainConfig {
        n_phases: 1,
        ..cfg(Method::OpsDannHard, 11, 2, 64)
    };
    let hard = train(&src, Some(&tgt), &hard_cfg).unwrap();
    assert_eq!(dann.steps.len(), hard.steps.len());
    for (a, b) in dann.steps.iter().zip(&hard.steps) {
        assert!((a.rul - b.rul).abs() <= 1e-12);
        assert!((a.domain[0] - b.domain[0]).abs() <= 1e-12);
    }
    let (mut a, mut b) = (dann.model, hard.model);
    assert!(params_equal(&mut a, &mut b));
}

#[test]
fn ops_soft_with_oracle_gates_reproduces_hard_discriminator_losses() {
    let src = toy_set(Domain::Source, 2, 200, 50, 0.0, 5);
    let tgt = toy_set(Domain::Target, 2, 200, 50, 0.4, 6);
    let hard = train(&src, Some(&tgt), &cfg(Method::OpsDannHard, 4, 2, 64)).unwrap();
    let soft_cfg = TrainConfig {
        soft_gating: SoftGating::Oracle,
        lambda_z: 0.0,
        ..cfg(Method::OpsDannSoft, 4, 2, 64)
    };
    let soft = train(&src, Some(&tgt), &soft_cfg).unwrap();
    for (a, b) in hard.steps.iter().zip(&soft.steps) {
        for (x, y) in a.domain.iter().zip(&b.domain) {
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }

    // With the classifier loss switched on, the first step still agrees.
    let batch = tiny_batch();
    let mut h = build_model(Method::OpsDannHard, 9);
    let mut s = build_model(Method::OpsDannSoft, 9);
    let c = TrainConfig {
        soft_gating: SoftGating::Oracle,
        ..TrainConfig::for_method(Method::OpsDannSoft, 9)
    };
    let lh = forward_backward(
        &mut h,
        &batch,
        &TrainConfig::for_method(Method::OpsDannHard, 9),
        GrlMode::Plain,
        false,
    )
    .unwrap();
    let ls = forward_backward(&mut s, &batch, &c, GrlMode::Plain, false).unwrap();
    for (x, y) in lh.domain.iter().zip(&ls.domain) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn dann_with_zero_rho_trains_like_source_only() {
    let src = toy_set(Domain::Source, 2, 200, 50, 0.0, 5);
    let tgt = toy_set(Domain::Target, 2, 200, 50, 0.4, 6);
    let so = train_source_only(&src, &cfg(Method::SourceOnly, 2, 2, 64)).unwrap();
    let dcfg = TrainConfig {
        rho: Some(0.0),
        ..cfg(Method::Dann, 2, 2, 64)
    };
    let dann = train(&src, Some(&tgt), &dcfg).unwrap();
    for (a, b) in so.steps.iter().zip(&dann.steps) {
        assert_eq!(a.rul, b.rul);
    }
    let mut a = so.model;
    let mut b = dann.model;
    let fa = a.feature_extractor.params_mut();
    let fb = b.feature_extractor.params_mut();
    assert!(fa.iter().zip(fb.iter()).all(|(x, y)| x.data() == y.data()));
}

#[test]
fn mmd_with_zero_weight_trains_like_source_only() {
    let src = toy_set(Domain::Source, 2, 200, 50, 0.0, 5);
    let tgt = toy_set(Domain::Target, 2, 200, 50, 0.4, 6);
    let so = train_source_only(&src, &cfg(Method::SourceOnly, 2, 2, 64)).unwrap();
    let mcfg = TrainConfig {
        lambda_d: 0.0,
        ..cfg(Method::MkMmd, 2, 2, 64)
    };
    let mmd = train(&src, Some(&tgt), &mcfg).unwrap();
    let (mut a, mut b) = (so.model, mmd.model);
    assert!(params_equal(&mut a, &mut b));
}

#[test]
fn closed_gate_leaves_discriminator_untouched() {
    let src = toy_set(Domain::Source, 1, 120, 50, 0.0, 1);
    let tgt = toy_set(Domain::Target, 1, 120, 50, 0.3, 2);
    let steady = |w: &WindowSet| {
        (0..w.len())
            .filter(|&i| w.phase(i) == PhaseLabel::Steady)
            .take(4)
            .collect::<Vec<_>>()
    };
    let s = src.gather(&steady(&src)).unwrap();
    let t = tgt.gather(&steady(&tgt)).unwrap();
    let mut phase = s.phase.clone();
    phase.extend_from_slice(&t.phase);
    let batch = StepBatch {
        x: Tensor::concat_rows(&[&s.x, &t.x]).unwrap(),
        n_source: s.x.dim(0),
        rul: s.rul.unwrap(),
        phase,
    };
    let c = TrainConfig::for_method(Method::OpsDannHard, 0);
    let mut model = build_model(Method::OpsDannHard, 0);
    model.zero_grad();
    let losses = forward_backward(&mut model, &batch, &c, GrlMode::Reversed { rho: 0.5 }, true).unwrap();
    assert_eq!(losses.domain[0], 0.0);
    assert_eq!(losses.domain[2], 0.0);
    assert!(losses.domain[1] > 0.0);
    for h in [0, 2] {
        for p in model.discriminators[h].params_mut() {
            assert!(p.grad().is_none_or(|g| g.iter().all(|&v| v == 0.0)));
        }
    }
    assert!(model.discriminators[1].params_mut()[0]
        .grad()
        .unwrap()
        .iter()
        .any(|&v| v != 0.0));
}

fn fe_grads(model: &mut ModelBundle) -> Vec<f64> {
    model
        .feature_extractor
        .params_mut()
        .iter()
        .flat_map(|p| p.grad().map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; p.len()]))
        .collect()
}

#[test]
fn reversal_scales_discriminator_gradient_by_minus_rho() {
    let batch = tiny_batch();
    for method in [Method::Dann, Method::OpsDannHard, Method::MultiClassOpsDann] {
        let c = TrainConfig::for_method(method, 1);
        let grads = |grl| {
            let mut m = build_model(method, 1);
            m.zero_grad();
            forward_backward(&mut m, &batch, &c, grl, true).unwrap();
            fe_grads(&mut m)
        };
        let base = grads(GrlMode::Reversed { rho: 0.0 });
        let plain = grads(GrlMode::Plain);
        let rho = 0.37;
        let rev = grads(GrlMode::Reversed { rho });
        let scale = plain.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..base.len() {
            let disc = plain[i] - base[i];
            let reversed = rev[i] - base[i];
            assert!((reversed + rho * disc).abs() <= 1e-10 * scale, "{method} entry {i}");
        }
    }
}

#[test]
fn adabn_replaces_statistics_only() {
    let src = toy_set(Domain::Source, 2, 200, 50, 0.0, 5);
    let tgt = toy_set(Domain::Target, 2, 200, 50, 0.5, 6);
    let out = train(&src, Some(&tgt), &cfg(Method::Adabn, 3, 2, 64)).unwrap();
    let mut before = out.model.clone();
    let mut after = out.model;
    adapt_batch_norm(&mut after, &tgt, 37).unwrap();
    assert!(params_equal(&mut before, &mut after));

    // exact mean/variance of the first conv output over all target windows
    let conv = &after.feature_extractor.convs[0];
    let z = conv
        .forward(&tgt.gather(&(0..tgt.len()).collect::<Vec<_>>()).unwrap().x)
        .unwrap();
    let (mean, var) = phasealign::nn::BatchNorm1d::channel_stats(&z);
    let bn = &after.feature_extractor.bns.as_ref().unwrap()[0];
    for c in 0..mean.len() {
        assert!((bn.running_mean[c] - mean[c]).abs() < 1e-6);
        assert!((bn.running_var[c] - var[c]).abs() < 1e-6);
    }
    let bn0 = &before.feature_extractor.bns.as_ref().unwrap()[0];
    assert!(bn0
        .running_mean
        .iter()
        .zip(&bn.running_mean)
        .any(|(a, b)| (a - b).abs() > 1e-3));
}

#[test]
fn adabn_on_source_distribution_barely_changes_predictions() {
    // Full-batch training: every batch statistic is a population statistic,
    // so the running averages differ from the exact pass only by their lag.
    let src = toy_set(Domain::Source, 1, 150, 50, 0.0, 5);
    let c = TrainConfig {
        alpha0: 0.01,
        ..cfg(Method::Adabn, 3, 400, src.len())
    };
    let twin = src.without_rul();
    let out = train_method(&src, &twin, &c).unwrap();
    let mut unadapted = train(&src, Some(&twin), &c).unwrap().model;
    let mut adapted = out.model;
    let a = predict_rul(&mut unadapted, &src, 256).unwrap();
    let b = predict_rul(&mut adapted, &src, 256).unwrap();
    let rmse = (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
    assert!(rmse < 1e-3, "prediction shift {rmse}");
}

#[test]
fn discriminator_separates_linear_toy_domains() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 200;
    let x = Tensor::from_fn([n, 50], |i| {
        let row = i / 50;
        let noise: f64 = rng.sample(StandardNormal);
        let offset = if row < n / 2 { -0.5 } else { 0.5 };
        noise * 0.3 + if i % 50 < 5 { offset } else { 0.0 }
    });
    let labels: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect();
    let mut head = Mlp::xavier(&[50, 50, 30, 1], Activation::Sigmoid, &mut ChaCha8Rng::seed_from_u64(1));
    let mut opt = Sgd::new(0.05, 0.9).unwrap();
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        head.zero_grad();
        let cache = head.forward(&x).unwrap();
        let (l, g) = bce(cache.output.data(), &labels, None).unwrap();
        head.backward(&cache, &Tensor::new([n, 1], g).unwrap()).unwrap();
        opt.step(&mut head.params_mut()).unwrap();
        last = l;
    }
    assert!(last < std::f64::consts::LN_2, "BCE {last}");
}

#[test]
fn source_only_loss_decreases_on_three_windows() {
    let set = toy_set(Domain::Source, 1, 52, 50, 0.0, 8);
    assert_eq!(set.len(), 3);
    let out = train_source_only(&set, &cfg(Method::SourceOnly, 0, 100, 3)).unwrap();
    assert_eq!(out.steps.len(), 100);
    let first = out.steps[0].rul;
    let last = out.steps[99].rul;
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn training_is_deterministic() {
    let src = toy_set(Domain::Source, 2, 150, 50, 0.0, 5);
    let tgt = toy_set(Domain::Target, 2, 150, 50, 0.4, 6);
    for method in [Method::SourceOnly, Method::OpsDannSoft, Method::MkMmd] {
        let c = cfg(method, 17, 1, 32);
        let mut a = train_method(&src, &tgt, &c).unwrap().model;
        let mut b = train_method(&src, &tgt, &c).unwrap().model;
        assert!(params_equal(&mut a, &mut b), "{method}");
    }
}

#[test]
fn domain_phase_class_encoding() {
    assert_eq!(domain_phase_class(false, PhaseLabel::Steady.index()), 1);
    assert_eq!(domain_phase_class(true, PhaseLabel::Descending.index()), 5);
    let mut model = build_model(Method::MultiClassOpsDann, 0);
    let batch = tiny_batch();
    let f = model.feature_extractor.embed(&batch.x).unwrap();
    let out = model.discriminators[0].predict(&f).unwrap();
    for row in out.data().chunks(6) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn uniform_gates_weight_every_sample_equally() {
    // With ẑ = (⅓, ⅓, ⅓) for every row, each head's gated loss is the plain
    // mean BCE over the whole batch.
    let batch = tiny_batch();
    let mut model = build_model(Method::OpsDannSoft, 2);
    let clf = model.phase_classifier.as_mut().unwrap();
    for layer in &mut clf.layers {
        layer.weight.data_mut().fill(0.0);
        layer.bias.data_mut().fill(0.0);
    }
    let c = TrainConfig::for_method(Method::OpsDannSoft, 2);
    let losses = forward_backward(&mut model, &batch, &c, GrlMode::Plain, false).unwrap();
    let (f, _) = model.feature_extractor.forward(&batch.x, BnMode::Train).unwrap();
    let d: Vec<f64> = (0..4).map(|i| if i < 2 { 0.0 } else { 1.0 }).collect();
    for h in 0..3 {
        let p = model.discriminators[h].predict(&f).unwrap();
        let (expected, _) = bce(p.data(), &d, None).unwrap();
        assert!((losses.domain[h] - expected).abs() < 1e-12);
    }
}

#[test]
fn labelled_target_is_rejected() {
    let src = toy_set(Domain::Source, 1, 100, 50, 0.0, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut leaked = toy_unit(1, 100, Domain::Target, 0.0, &mut rng);
    leaked.rul = Some(vec![0.5; 100]);
    let tgt = WindowSet::new(vec![leaked], 50, 1).unwrap();
    for method in [Method::Dann, Method::Adabn] {
        let err = train_method(&src, &tgt, &cfg(method, 0, 1, 16)).unwrap_err();
        assert!(matches!(err, Error::TargetLabelsPresent), "{err}");
    }
}

#[test]
fn mmd_training_reduces_feature_discrepancy() {
    let src = toy_set(Domain::Source, 2, 200, 50, 0.0, 5);
    let tgt = toy_set(Domain::Target, 2, 200, 50, 0.6, 6);
    let all = |w: &WindowSet| (0..w.len()).step_by(5).collect::<Vec<_>>();
    let src_eval = src.subset(&all(&src));
    let tgt_eval = tgt.subset(&all(&tgt));
    let mmd_of = |m: &mut ModelBundle| {
        let a = embed(m, &src_eval, 128).unwrap();
        let b = embed(m, &tgt_eval, 128).unwrap();
        compute_mk_mmd(&a, &b, &MmdConfig::default()).unwrap()
    };
    let c = TrainConfig {
        lambda_d: 5.0,
        ..cfg(Method::MkMmd, 1, 6, 32)
    };
    let mut initial = build_model(Method::MkMmd, 1);
    let before = mmd_of(&mut initial);
    let mut trained = train_method(&src, &tgt, &c).unwrap().model;
    let after = mmd_of(&mut trained);
    assert!(after < before, "{before} -> {after}");
}

fn small_fleet(class: FlightClass, units: u32, seed: u64) -> Vec<MultivariateSeries> {
    let mut spec = FleetSpec::new(class, units, seed);
    spec.degradation.total_cycles = (10, 12);
    spec.degradation.cycle_stride = 2;
    spec.generate().unwrap().into_series()
}

#[test]
fn phase_classifier_learns_held_out_flights() {
    let prep = PrepConfig {
        window_stride: 10,
        ..PrepConfig::default()
    };
    let split = prepare_split(
        &small_fleet(FlightClass::Short, 2, 1),
        &small_fleet(FlightClass::Long, 2, 2),
        &prep,
    )
    .unwrap();
    let c = TrainConfig {
        alpha0: 0.01,
        lambda_d: 0.03,
        ..cfg(Method::OpsDannSoft, 5, 60, 64)
    };
    let mut model = train_method(&split.source, &split.target.without_rul(), &c)
        .unwrap()
        .model;
    let (mut correct, mut total) = (0, 0);
    for (class, seed) in [
        (FlightClass::Short, 7),
        (FlightClass::Medium, 9),
        (FlightClass::Long, 8),
    ] {
        let units = prepare_units(&small_fleet(class, 1, seed), &prep).unwrap();
        let held = to_window_set(&units, &split.scaler, Domain::Target, &prep).unwrap();
        let x = held.gather(&(0..held.len()).collect::<Vec<_>>()).unwrap();
        let f = model.feature_extractor.embed(&x.x).unwrap();
        let probs = model.phase_classifier.as_ref().unwrap().predict(&f).unwrap();
        correct += probs
            .data()
            .chunks(3)
            .zip(&x.phase)
            .filter(|(row, &z)| {
                row.iter()
                    .cloned()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap()
                    .0
                    == z
            })
            .count();
        total += x.phase.len();
    }
    let acc = correct as f64 / total as f64;
    assert!(acc > 0.95, "accuracy {acc} over {total} windows");
}
