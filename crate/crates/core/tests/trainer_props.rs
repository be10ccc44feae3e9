use mfvi::models::{synth_sparse_logistic, Curvature, LogisticModel, QuadraticOracleModel};
use mfvi::trainer::{
    epoch, hybrid_coeffs, p_nonzero, quadratic_form_value, sieve_map, train, TrainConfig, TrainState,
};
use mfvi::{quadratic_approx, LossModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA0: f64 = 6.906754778648554; // log 999

proptest! {
    #[test]
    fn sieve_preserves_order(
        zeta in prop::collection::vec(-20.0f64..20.0, 1..200),
        f0 in 0.0f64..1.0,
        share in 0.0f64..1.0,
    ) {
        let f1 = (1.0 - f0) * share;
        let out = sieve_map(&zeta, f0, f1, LAMBDA0, -LAMBDA0).unwrap();
        for i in 0..zeta.len() {
            for j in 0..zeta.len() {
                if zeta[i] < zeta[j] {
                    prop_assert!(out[i] <= out[j] + 1e-12 * (1.0 + out[j].abs()));
                }
            }
        }
    }

    #[test]
    fn sieve_hits_zero_fraction(
        zeta in prop::collection::vec(-20.0f64..20.0, 10..300),
        f0 in 0.0f64..0.99,
        share in 0.0f64..1.0,
    ) {
        let d = zeta.len() as f64;
        let f1 = (1.0 - f0) * share;
        let out = sieve_map(&zeta, f0, f1, LAMBDA0, -LAMBDA0).unwrap();
        let below = out.iter().filter(|&&z| p_nonzero(z) < 0.001).count() as f64 / d;
        prop_assert!((below - f0).abs() <= 2.0 / d, "fraction {} vs {}", below, f0);
    }
}

#[test]
fn hybrid_moments_preserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // exponential(1): mean 1, variance 1
    let draw = |rng: &mut ChaCha8Rng| -(1.0 - rng.random::<f64>()).ln();
    for (n0, n1) in [(8u64, 1u64), (8, 4), (8, 8), (8, 12)] {
        let hc = hybrid_coeffs(n0, n1).unwrap();
        let reps = 10_000;
        let v: Vec<f64> = (0..reps)
            .map(|_| {
                let a0: f64 = (0..n0).map(|_| draw(&mut rng)).sum();
                let a1: f64 = (0..n1).map(|_| draw(&mut rng)).sum();
                hc.blend(a0, a1)
            })
            .collect();
        let r = reps as f64;
        let m = v.iter().sum::<f64>() / r;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r - 1.0);
        let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / r;
        let n = n0.max(n1) as f64;
        assert!((m - n).abs() <= 3.0 * (var / r).sqrt(), "({n0},{n1}) mean {m}");
        assert!((var - n).abs() <= 3.0 * ((m4 - var * var) / r).sqrt(), "({n0},{n1}) var {var}");
    }
}

fn small_problem() -> LogisticModel {
    let (data, _) = synth_sparse_logistic(24, 4, 200, 1.0, 3).unwrap();
    LogisticModel::new(data, 1.0 / 0.09).unwrap()
}

fn config(n_epochs: u32) -> TrainConfig {
    TrainConfig {
        n_epochs,
        f0_target: 0.75,
        ..TrainConfig::default()
    }
}

#[test]
fn moments_and_shift_bookkeeping() {
    let model = small_problem();
    let cfg = config(4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut state = TrainState::init(&cfg, model.n_cases(), vec![0.0; 24], &mut rng).unwrap();
    epoch(&mut state, &model, &mut rng).unwrap();
    let probe: Vec<f64> = (0..24).map(|i| 0.1 * i as f64 - 1.0).collect();
    for case in 0..50 {
        let before = quadratic_form_value(state.j0, &state.g0, &state.h0, &state.mu, &probe);
        let q = quadratic_approx(&model, case, &state.mu, &state.sigma, state.k, cfg.n_pairs).unwrap();
        state.k += cfg.n_pairs as u64;
        state.variational_update(&q, 1.0 + case as f64 / 200.0).unwrap();
        let after = quadratic_form_value(state.j0, &state.g0, &state.h0, &state.mu, &probe);
        assert!((before - after).abs() <= 1e-10 * before.abs().max(1.0), "{before} vs {after}");
        for i in 0..24 {
            let p = state.p_nz[i];
            assert_eq!(state.mu[i], p * state.nu[i]);
            let s2 = p * (1.0 - p) * state.nu[i].powi(2) + p * state.tau[i].powi(2);
            assert!((state.sigma[i].powi(2) - s2).abs() <= 1e-12 * s2.max(1e-300));
            assert!(state.sigma[i] >= 0.0 && state.tau[i] >= 0.0);
        }
    }
}

#[test]
fn final_epoch_is_frozen() {
    let model = small_problem();
    let cfg = config(4);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut state = TrainState::init(&cfg, model.n_cases(), vec![0.0; 24], &mut rng).unwrap();
    for _ in 0..3 {
        epoch(&mut state, &model, &mut rng).unwrap();
    }
    let rounded: Vec<f64> = state.p_nz.iter().map(|&p| if p >= 0.5 { 1.0 } else { 0.0 }).collect();

    // step through the last epoch by hand
    let mut manual = state.clone();
    manual.epoch = 3;
    manual.r_nz = Some(rounded.clone());
    for case in 0..model.n_cases() {
        let q = quadratic_approx(&model, case, &manual.mu, &manual.sigma, manual.k, cfg.n_pairs).unwrap();
        manual.k += cfg.n_pairs as u64;
        manual.variational_update(&q, 3.0 + case as f64 / 200.0).unwrap();
        assert_eq!(manual.p_nz, rounded);
        for i in 0..24 {
            if rounded[i] == 0.0 {
                assert_eq!(manual.mu[i], 0.0);
                assert_eq!(manual.sigma[i], 0.0);
            }
        }
    }

    epoch(&mut state, &model, &mut rng).unwrap();
    assert_eq!(state.r_nz.as_ref(), Some(&rounded));
    assert_eq!(state.p_nz, rounded);
    let zeros = rounded.iter().filter(|&&r| r == 0.0).count();
    assert!(zeros >= 18, "{zeros} realized zeros");
}

#[test]
fn training_is_seeded_and_improves() {
    let model = small_problem();
    let cfg = config(6);
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut losses = Vec::new();
        let s = train(&cfg, &model, vec![0.0; 24], &mut rng, |_, st| {
            losses.push(st.j_train);
            Ok(())
        })
        .unwrap();
        (s, losses)
    };
    let (a, la) = run(5);
    let (b, lb) = run(5);
    assert_eq!(la, lb);
    assert_eq!(a.mu, b.mu);
    assert!(la.iter().all(|j| j.is_finite()));
    assert!(la.last().unwrap() < la.first().unwrap(), "{la:?}");
}

#[test]
fn quadratic_target_is_approached() {
    let target = [1.5, -2.0, 0.5];
    let model = QuadraticOracleModel::new(Curvature::Diagonal(vec![1.0; 3]), target.iter().map(|t| -t).collect(), 0.0)
        .unwrap()
        .with_cases(64);
    let cfg = TrainConfig {
        f0_target: 0.0,
        f1_target: 1.0,
        n_epochs: 6,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = train(&cfg, &model, vec![0.0; 3], &mut rng, |_, _| Ok(())).unwrap();
    for i in 0..3 {
        assert!((s.nu[i] - target[i]).abs() < 0.05 * target[i].abs(), "{:?}", s.nu);
    }
}
