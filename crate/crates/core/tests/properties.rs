use hermite_equiv::experiment::{run_experiment, run_trial, ExperimentConfig};
use hermite_equiv::hermite::{
    activation_second_moment, build_equivalent_activation, hermite_coefficients, hermite_eval,
    residual_coefficient, ActivationKind, QuadratureRule,
};
use hermite_equiv::lab::{bulk_operator, spike_bulk_decompose, structure_bulk_split};
use hermite_equiv::linalg::norm;
use hermite_equiv::mixture::{
    build_mixture, build_xi, cov_sqrt_apply, mixture_covariance, CovarianceSpec, MixtureDescriptor,
    ScalingSpec, Spike, XiMode,
};
use hermite_equiv::network::{
    gradient_step, init_network, ridge_dual, ridge_objective_gradient, ridge_primal,
};
use hermite_equiv::rng::Stream;
use ndarray::Array2;
use proptest::prelude::*;

fn activation() -> impl Strategy<Value = ActivationKind> {
    prop_oneof![
        Just(ActivationKind::Relu),
        Just(ActivationKind::Tanh),
        Just(ActivationKind::Sigmoid),
        Just(ActivationKind::Identity),
        prop::collection::vec(-1.0f64..1.0, 1..5).prop_map(ActivationKind::Polynomial),
    ]
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn spiked_cov(n: usize, thetas: &[f64], stream: &mut Stream) -> CovarianceSpec {
    let raw: Vec<_> = thetas.iter().map(|_| stream.normal_vec(n)).collect();
    let (basis, _) = hermite_equiv::linalg::orthonormal_basis(&raw);
    let spikes = basis
        .into_iter()
        .zip(thetas)
        .map(|(direction, &theta)| Spike { theta, direction })
        .collect();
    CovarianceSpec::new(n, spikes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn second_moment_matching(act in activation(), b in 0.2f64..3.0, l in 1usize..9) {
        let rule = QuadratureRule::default();
        let h = build_equivalent_activation(&act, b, l).unwrap();
        let target = activation_second_moment(&act, b, &rule).unwrap();
        let got = h.second_moment(&rule);
        prop_assert!((got - target).abs() <= 1e-8 * (1.0 + target), "{got} vs {target}");
    }

    #[test]
    fn parseval_residual_is_nonincreasing(act in activation(), b in 0.2f64..3.0) {
        let rule = QuadratureRule::default();
        let coeffs = hermite_coefficients(&act, b, 10, &rule).unwrap();
        let mut prev = f64::INFINITY;
        for l in 1..=10 {
            let r = residual_coefficient(&act, b, &coeffs[..l], &rule).unwrap();
            prop_assert!(r <= prev + 1e-10, "l = {l}: {r} > {prev}");
            prev = r;
        }
    }

    #[test]
    fn recurrence_matches_explicit_polynomials(x in -6.0f64..6.0) {
        let explicit = [
            1.0,
            x,
            x * x - 1.0,
            x.powi(3) - 3.0 * x,
            x.powi(4) - 6.0 * x * x + 3.0,
            x.powi(5) - 10.0 * x.powi(3) + 15.0 * x,
        ];
        for (j, e) in explicit.iter().enumerate() {
            let h = hermite_eval(j, x).unwrap();
            prop_assert!((h - e).abs() <= 1e-10 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn spikes_are_orthonormal_and_trace_is_exact(n in 4usize..40, d in 1usize..4, theta in 0.1f64..50.0, seed in any::<u64>()) {
        let d = d.min(n - 1);
        let mut s = Stream::new(seed);
        let thetas: Vec<f64> = (0..d).map(|i| theta * (1.0 + i as f64)).collect();
        let cov = spiked_cov(n, &thetas, &mut s);
        for (i, a) in cov.spikes().iter().enumerate() {
            for (j, b) in cov.spikes().iter().enumerate() {
                let expected = f64::from(u8::from(i == j));
                prop_assert!((a.direction.dot(&b.direction) - expected).abs() <= 1e-10);
            }
        }
        prop_assert!((cov.trace() - (n as f64 + thetas.iter().sum::<f64>())).abs() <= 1e-9 * cov.trace());
        let dense = cov.dense_sqrt_by_eigen();
        let z = s.normal_vec(n);
        let diff = &cov_sqrt_apply(&cov, z.view()) - &dense.dot(&z);
        prop_assert!(norm(diff.view()) <= 1e-9 * (1.0 + norm(z.view())));
    }

    #[test]
    fn scaling_product_is_n_to_beta(alpha in 0.0f64..=1.0, beta in 0.0f64..=1.0, n in 1usize..5000) {
        let s = ScalingSpec::new(alpha, beta, n).unwrap();
        let target = (n as f64).powf(beta);
        prop_assert!((s.eta() * s.spike_scale() - target).abs() <= 1e-9 * target);
    }

    #[test]
    fn target_direction_norm(beta in 0.0f64..=1.0, c in 0.1f64..5.0, seed in any::<u64>(), aligned in any::<bool>()) {
        let scaling = ScalingSpec::new(0.5, beta, 60).unwrap();
        let mut s = Stream::new(seed);
        let spec = build_mixture(&MixtureDescriptor::default(), &scaling, &mut s).unwrap();
        let mode = if aligned { XiMode::SpikeAligned } else { XiMode::RandomDirection };
        let xi = build_xi(&spec, mode, c, &mut s).unwrap();
        let root = mixture_covariance(&spec).unwrap().sqrt_spectral_norm;
        prop_assert!((norm(xi.view()) - c / root).abs() <= 1e-9 * c / root);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ridge_is_stationary_and_primal_equals_dual(m in 1usize..40, k in 1usize..40, log_lambda in -6.0f64..2.0, seed in any::<u64>()) {
        let mut s = Stream::new(seed);
        let phi = s.normal_matrix(m, k);
        let y = s.normal_vec(m);
        let lambda = 10f64.powf(log_lambda);
        let p = ridge_primal(phi.view(), y.view(), lambda).unwrap();
        let d = ridge_dual(phi.view(), y.view(), lambda).unwrap();
        let scale = 1.0 + norm(p.view());
        prop_assert!(norm(ridge_objective_gradient(phi.view(), y.view(), p.view(), lambda).view()) <= 1e-8 * scale);
        prop_assert!(norm((&p - &d).view()) <= 1e-8 * scale);
    }

    #[test]
    fn ridge_norm_shrinks_with_lambda(m in 2usize..30, k in 2usize..30, seed in any::<u64>()) {
        let mut s = Stream::new(seed);
        let phi = s.normal_matrix(m, k);
        let y = s.normal_vec(m);
        let mut prev = f64::INFINITY;
        for e in -6..=2 {
            let w = ridge_primal(phi.view(), y.view(), 10f64.powi(e)).unwrap();
            let nw = norm(w.view());
            prop_assert!(nw <= prev * (1.0 + 1e-9));
            prev = nw;
        }
    }

    #[test]
    fn decompositions_are_exact(act in activation(), eta in 0.1f64..20.0, theta in 0.5f64..20.0, seed in any::<u64>()) {
        let (n, k, m) = (16, 12, 24);
        let mut s = Stream::new(seed);
        let cov = spiked_cov(n, &[theta], &mut s);
        let init = init_network(n, k, cov.trace(), &mut s).unwrap();
        let mut x = s.normal_matrix(m, n);
        cov.sqrt_apply_rows(x.view_mut());
        let y = x.column(0).mapv(f64::tanh);
        let (g, f_hat) = gradient_step(&init, x.view(), y.view(), eta, &act).unwrap();
        prop_assert!(max_abs(&(&f_hat - &(&init.f + &(&g * eta)))) <= 1e-12 * (1.0 + max_abs(&f_hat)));
        let d = spike_bulk_decompose(g.view(), init.w.view(), x.view(), y.view(), &act).unwrap();
        prop_assert!(max_abs(&(&d.reconstruct() - &g)) <= 1e-12 * (1.0 + max_abs(&g)));
        let f_perp = bulk_operator(init.f.view(), (&d.delta * eta).view());
        let z = s.normal_vec(n);
        let sp = structure_bulk_split(f_hat.view(), f_perp.view(), &cov, d.v.view(), z.view()).unwrap();
        let recon = sp.gamma.dot(&sp.kappa) + &sp.z_perp;
        prop_assert!(norm((&recon - &z).view()) <= 1e-10);
        prop_assert!(sp.gamma.t().dot(&sp.z_perp).iter().all(|v| v.abs() <= 1e-8));
        let lhs = f_hat.dot(&cov.sqrt_apply(z.view()));
        let rhs = sp.f_perp.dot(&sp.z_perp) + &sp.a_struct;
        prop_assert!(norm((&lhs - &rhs).view()) <= 1e-8 * (1.0 + norm(lhs.view())));
    }
}

fn small_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::baseline(24);
    cfg.m = 20;
    cfg.k = 16;
    cfg.trials = 3;
    cfg.base_seed = seed;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn training_error_never_exceeds_zero_predictor(seed in any::<u64>(), act in prop_oneof![Just(ActivationKind::Relu), Just(ActivationKind::Tanh), Just(ActivationKind::Sigmoid)], log_lambda in -5.0f64..1.0) {
        let mut cfg = small_config(seed);
        cfg.activation = act;
        cfg.lambda = 10f64.powf(log_lambda);
        let data = hermite_equiv::experiment::synthetic_trial_data(&cfg, seed).unwrap();
        let zero = data.ridge.y.iter().map(|v| v * v).sum::<f64>() / (2.0 * cfg.m as f64);
        let r = hermite_equiv::experiment::train_and_evaluate(&cfg, &data, seed).unwrap();
        prop_assert!(r.t_nn <= zero * (1.0 + 1e-12));
        prop_assert!(r.t_nn >= 0.0 && r.g_nn >= 0.0 && r.t_hermite >= 0.0 && r.g_hermite >= 0.0);
    }

    #[test]
    fn runs_are_deterministic_across_worker_counts(seed in any::<u64>()) {
        let cfg = small_config(seed);
        let pool = |t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
        let one = pool(1).install(|| run_experiment(&cfg).unwrap().to_csv());
        let four = pool(4).install(|| run_experiment(&cfg).unwrap().to_csv());
        prop_assert_eq!(one, four);
        prop_assert_eq!(run_trial(&cfg, 1).unwrap(), run_trial(&cfg, 1).unwrap());
    }

    #[test]
    fn config_round_trips_through_json(seed in any::<u64>(), trials in 1usize..50, lambda in 0.0f64..10.0) {
        let mut cfg = small_config(seed);
        cfg.trials = trials;
        cfg.lambda = lambda;
        prop_assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
