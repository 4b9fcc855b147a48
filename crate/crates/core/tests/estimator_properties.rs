mod common;

use cavity_pqs::estimator::{backward_filter, forward_filter, smooth};
use cavity_pqs::{Direction, FockModel, ModelParams, PhotonDistribution, Sample};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pqs_matches_path_sum_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let n_max = rand::Rng::random_range(&mut rng, 2..=4);
        let len = rand::Rng::random_range(&mut rng, 2..=6);
        let p = random_params(&mut rng, n_max);
        let samples = random_samples(&mut rng, &p, len, 3);
        let prior = random_distribution(&mut rng, n_max);
        let terminal = random_distribution(&mut rng, n_max);
        let model = FockModel::new(p.clone()).unwrap();
        let traj = smooth(
            &model,
            &samples,
            &PhotonDistribution::from_probs(prior.clone()).unwrap(),
            &PhotonDistribution::from_probs(terminal.clone()).unwrap(),
        )
        .unwrap();
        let expected = path_sum_posteriors(&p, &samples, &prior, &terminal);
        for (s, want) in expected.iter().enumerate() {
            let d = max_rel_diff(traj.pqs[s].probs(), want);
            assert!(d < 1e-9, "s={s} rel diff {d:e}");
        }
    }
}

#[test]
fn forward_end_and_backward_start_are_path_sum_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = random_params(&mut rng, 3);
    let samples = random_samples(&mut rng, &p, 5, 2);
    let uniform = vec![1.0 / 3.0; 3];
    let model = FockModel::new(p.clone()).unwrap();
    let traj = smooth(
        &model,
        &samples,
        &PhotonDistribution::from_probs(uniform.clone()).unwrap(),
        &PhotonDistribution::uniform(3),
    )
    .unwrap();
    let expected = path_sum_posteriors(&p, &samples, &uniform, &uniform);
    assert!(max_rel_diff(traj.forward[5].probs(), &expected[5]) < 1e-12);
    assert!(max_rel_diff(traj.backward[0].probs(), &expected[0]) < 1e-12);
}

#[test]
fn record_likelihood_is_constant_along_the_record() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = ModelParams::default();
    let model = FockModel::new(p.clone()).unwrap();
    let samples = random_samples(&mut rng, &p, 300, 2);
    let traj = smooth(
        &model,
        &samples,
        &PhotonDistribution::uniform(25),
        &PhotonDistribution::uniform(25),
    )
    .unwrap();
    let l0 = traj.log_likelihood_at(0);
    for s in 0..traj.len() {
        let l = traj.log_likelihood_at(s);
        assert!(((l - l0) / l0).abs() < 1e-9, "s={s}: {l} vs {l0}");
    }
}

#[test]
fn empty_record_leaves_uniform_effect_uniform() {
    let model = FockModel::new(ModelParams::default()).unwrap();
    let b = backward_filter(&model, &vec![Sample::empty(); 50], &PhotonDistribution::uniform(25)).unwrap();
    for d in &b.dists {
        for &x in d.probs() {
            assert!((x - 0.04).abs() < 1e-14);
        }
    }
}

#[test]
fn delta_one_decays_like_the_exact_semigroup() {
    let p = ModelParams::default();
    let model = FockModel::new(p.clone()).unwrap();
    let steps = 1200;
    let f = forward_filter(&model, &vec![Sample::empty(); steps], &PhotonDistribution::fock(25, 1).unwrap()).unwrap();
    let k = generator_matrix(&p);
    let mut delta = vec![0.0; 25];
    delta[1] = 1.0;
    for s in [100, 500, 1200] {
        let exact = mat_vec(&expm(&k, s as f64 * p.t_sample), &delta);
        let approx = f.dists[s].probs();
        for n in 0..3 {
            assert!((approx[n] - exact[n]).abs() < 2e-3, "s={s} n={n}: {} vs {}", approx[n], exact[n]);
        }
    }
}

#[test]
fn incompatible_record_is_reported_with_its_sample() {
    let p = ModelParams { fringe_offset: 0.0, fringe_contrast: 1.0, phases: vec![std::f64::consts::PI / 2.0], n_thermal: 0.0, ..ModelParams::default() };
    let model = FockModel::new(p).unwrap();
    let g = cavity_pqs::AtomDetection { outcome: cavity_pqs::Outcome::G, phase_index: 0 };
    let mut samples = vec![Sample::empty(); 4];
    samples[2].detections = vec![g];
    // P(g | n = 0) = (1 + sin(-pi/2)) / 2 = 0.
    let err = forward_filter(&model, &samples, &PhotonDistribution::fock(25, 0).unwrap()).unwrap_err();
    assert!(matches!(err, cavity_pqs::Error::InconsistentRecord { sample: 2 }), "{err:?}");
}

fn arb_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagator_adjoint_pairing(u in arb_vec(25), v in arb_vec(25)) {
        let model = FockModel::new(ModelParams::default()).unwrap();
        let mut tu = vec![0.0; 25];
        let mut tv = vec![0.0; 25];
        model.propagator().apply(&u, &mut tu, Direction::Backward);
        model.propagator().apply(&v, &mut tv, Direction::Forward);
        let lhs: f64 = tu.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&tv).map(|(a, b)| a * b).sum();
        let scale: f64 = u.iter().map(|x| x.abs()).sum::<f64>() * v.iter().map(|x| x.abs()).sum::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn every_pass_stays_normalized(seed in any::<u64>(), len in 1usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ModelParams::default();
        let model = FockModel::new(p.clone()).unwrap();
        let samples = random_samples(&mut rng, &p, len, 3);
        let traj = smooth(&model, &samples, &PhotonDistribution::uniform(25), &PhotonDistribution::uniform(25)).unwrap();
        for d in traj.forward.iter().chain(&traj.backward).chain(&traj.pqs) {
            prop_assert!((d.total() - 1.0).abs() < 1e-12);
            prop_assert!(d.probs().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn smoothing_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ModelParams::default();
        let model = FockModel::new(p.clone()).unwrap();
        let samples = random_samples(&mut rng, &p, 80, 2);
        let a = smooth(&model, &samples, &PhotonDistribution::uniform(25), &PhotonDistribution::uniform(25)).unwrap();
        let b = smooth(&model, &samples, &PhotonDistribution::uniform(25), &PhotonDistribution::uniform(25)).unwrap();
        for (x, y) in a.pqs.iter().zip(&b.pqs) {
            prop_assert_eq!(x.probs(), y.probs());
        }
    }
}
