mod support;

use nalgebra::DMatrix;
use nclangevin::experiments::{run_experiment, ExperimentSpec, Method, Scenario};
use nclangevin::models::{dsm_fit_affine, Component, GmmModel};
use nclangevin::rng::Stream;
use nclangevin::samplers::{
    basic_langevin_update, half_denoise_update, noise_corrected_update, run_chain, SamplerConfig,
};
use nclangevin::theory::stationary_covariance;
use proptest::prelude::*;
use support::*;

fn pass(check: Check) {
    match check {
        Ok(detail) => eprintln!("{detail}"),
        Err(detail) => panic!("{detail}"),
    }
}

#[test]
fn chain_reductions_are_bit_exact() {
    pass(check_reductions());
}

#[test]
fn score_matches_finite_difference() {
    pass(check_score_fd());
}

#[test]
fn hidden_langevin_covariance_identity() {
    pass(check_hidden_langevin());
}

#[test]
fn kde_mass_is_conserved() {
    pass(check_kde_mass());
}

#[test]
fn binned_conditional_expectations() {
    pass(check_conditional_expectation());
}

#[test]
fn dsm_recovers_noisy_precision() {
    pass(check_dsm_recovery());
}

#[test]
fn tweedie_beats_noise_variance() {
    pass(check_tweedie_mse());
}

#[test]
fn contraction_bound_holds() {
    pass(check_contraction_bound());
}

#[test]
fn closed_form_matches_recursion() {
    pass(check_closed_form_vs_recursion(50, 71));
}

#[test]
fn dsm_error_shrinks_with_samples() {
    let data = GmmModel::gaussian(2, 1.0).unwrap();
    let target = -1.0 / 1.3;
    let rms = |n: usize| {
        let total: f64 = (0..24u64)
            .map(|seed| {
                let s = data.exact_sample(n, &mut Stream::new(seed, 1)).unwrap();
                let fit = dsm_fit_affine(&s, 0.3, &mut Stream::new(seed, 3)).unwrap();
                let err = fit.matrix() - DMatrix::identity(2, 2) * target;
                err.iter().map(|v| v * v).sum::<f64>()
            })
            .sum();
        (total / 24.0).sqrt()
    };
    let ratio = rms(2_000) / rms(8_000);
    assert!((1.4..=2.9).contains(&ratio), "ratio {ratio}");
}

#[test]
fn noise_corrected_tail_matches_stationary_value() {
    let noisy = GmmModel::gaussian(1, 1.0).unwrap().noisy_model(0.3).unwrap();
    let chain = run_chain(&SamplerConfig::noise_corrected(0.15, 0.3, 1_000_000, 3).unwrap(), &noisy).unwrap();
    let tail = chain.tail_samples(0.3).unwrap();
    let var = nclangevin::analysis::covariance(&tail).unwrap()[(0, 0)];
    let expected = stationary_covariance(&DMatrix::from_element(1, 1, 1.3), 0.15, 0.3).unwrap()[(0, 0)];
    assert!((var / expected - 1.0).abs() < 0.02, "{var} vs {expected}");
}

#[test]
fn ground_truth_floor_is_stable_across_seeds() {
    let floors: Vec<f64> = (0..3).map(|seed| ground_truth_floor(2, 300_000, 100 + seed)).collect();
    let mean = floors.iter().sum::<f64>() / floors.len() as f64;
    assert!(mean > 0.0);
    for f in &floors {
        assert!((f / mean - 1.0).abs() < 0.2, "{floors:?}");
    }
}

fn small_gmm_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::defaults(Scenario::GmmBias);
    spec.n_steps = 20_000;
    spec.replicates = 2;
    spec
}

#[test]
fn reports_are_deterministic() {
    let spec = small_gmm_spec();
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.grids, b.grids);
}

#[test]
fn ground_truth_floor_is_method_and_level_independent() {
    let spec = small_gmm_spec();
    let full = run_experiment(&spec).unwrap();
    let mut only = spec.clone();
    only.methods = vec![Method::GroundTruth];
    let alone = run_experiment(&only).unwrap();
    let hi = full.row(Method::GroundTruth, 0.3).unwrap();
    let lo = full.row(Method::GroundTruth, 0.1).unwrap();
    assert_eq!(hi.distance, lo.distance);
    assert_eq!(hi.distance, alone.row(Method::GroundTruth, 0.3).unwrap().distance);
    assert!(hi.distance > 0.0);
}

#[test]
fn oracle_arms_differ_only_through_step_size() {
    let spec = small_gmm_spec();
    for s2 in [0.3, 0.1] {
        let config = Method::Oracle.sampler_config(s2, spec.mu_at(s2), 10, 1).unwrap().unwrap();
        assert_eq!(config.mu, s2 / 2.0);
        assert_eq!(config.sigma2, 0.0);
        assert!(!Method::Oracle.uses_noisy_score());
    }
}

fn arb_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, dim)
}

fn arb_model() -> impl Strategy<Value = GmmModel> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(dim, k)| {
        prop::collection::vec((0.1f64..1.0, arb_vec(dim), 0.2f64..2.0), k).prop_map(move |parts| {
            let total: f64 = parts.iter().map(|p| p.0).sum();
            let components = parts
                .into_iter()
                .map(|(w, mean, variance)| Component { weight: w / total, mean, variance })
                .collect();
            GmmModel::new(dim, components).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn update_reductions(
        x in arb_vec(3), n in arb_vec(3), nu in arb_vec(3), mu in 0.01f64..0.5, s2 in 0.01f64..1.0,
    ) {
        let model = GmmModel::gaussian(3, 1.0).unwrap().noisy_model(0.2).unwrap();
        let (mut a, mut b, mut noisy, mut grad) = (vec![0.0; 3], vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]);
        basic_langevin_update(&model, mu, &x, &nu, &mut grad, &mut a).unwrap();
        noise_corrected_update(&model, mu, 0.0, &x, &n, &nu, &mut noisy, &mut grad, &mut b).unwrap();
        prop_assert_eq!(&a, &b);
        half_denoise_update(&model, s2, &x, &n, &mut noisy, &mut grad, &mut a).unwrap();
        noise_corrected_update(&model, s2 / 2.0, s2, &x, &n, &nu, &mut noisy, &mut grad, &mut b).unwrap();
        prop_assert_eq!(&a, &b);
    }

    #[test]
    fn random_mixture_scores_match_finite_difference(model in arb_model(), seed in 0u64..1000) {
        prop_assert!(max_score_fd_error(&model, 10, seed) < 1e-5);
    }

    #[test]
    fn noisy_model_composes(model in arb_model(), a in 0.0f64..1.0, b in 0.0f64..1.0, p in arb_vec(3)) {
        let p = &p[..model.dim()];
        let twice = model.noisy_model(a).unwrap().noisy_model(b).unwrap();
        let once = model.noisy_model(a + b).unwrap();
        prop_assert!((twice.log_pdf(p).unwrap() - once.log_pdf(p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_recursion_random(seed in 0u64..10_000) {
        prop_assert!(check_closed_form_vs_recursion(3, seed).is_ok());
    }
}

#[test]
fn first_order_residual_is_second_order() {
    let residual = |s2: f64| {
        let mu = s2 / 2.0;
        let report = nclangevin::theory::gaussian_theory_report(&DMatrix::identity(1, 1), mu, s2, nclangevin::theory::Arm::Proposed).unwrap();
        report.bias[(0, 0)] - report.predicted_first_order_bias[(0, 0)]
    };
    for s2 in [0.3, 0.1, 0.03] {
        let shrink = residual(s2) / residual(s2 / 4.0);
        assert!((shrink / 16.0 - 1.0).abs() < 0.3, "sigma2 {s2}: {shrink}");
    }
}
