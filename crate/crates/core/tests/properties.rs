use proptest::prelude::*;

use rbcast_core::asymptotic::{asymptotic_throughput_with, beta_over_lambda, Bisection};
use rbcast_core::bounds::{finite_lower_bound, k_zero};
use rbcast_core::spectral::tilted;
use rbcast_core::{
    asymptotic_throughput, memoryless_asymptotic, rate_function, rate_function_memoryless, BlockRatio, ChannelModel,
    GilbertElliott,
};

fn chain() -> impl Strategy<Value = ChannelModel> {
    (1u32..=3).prop_flat_map(|order| {
        prop::collection::vec(0.05f64..0.95, 1usize << order)
            .prop_map(move |p| ChannelModel::from_success_probabilities(order, p).unwrap())
    })
}

fn ge() -> impl Strategy<Value = GilbertElliott> {
    (0.05f64..0.95, 0.05f64..0.95).prop_map(|(a, b)| GilbertElliott::new(a, b).unwrap())
}

/// Dense power iteration, written independently of the library's sparse one.
fn dense_spectral_radius(m: &[Vec<f64>]) -> f64 {
    let dim = m.len();
    let mut x = vec![1.0; dim];
    let mut rho = 0.0;
    for _ in 0..20_000 {
        let y: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| m[i][j] * x[j]).sum()).collect();
        let norm = y.iter().cloned().fold(0.0, f64::max);
        x = y.iter().map(|v| v / norm).collect();
        rho = norm;
    }
    rho
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn untilted_root_is_one(model in chain()) {
        let rho = tilted(&model, 0.0).unwrap().perron_root().unwrap();
        prop_assert!((rho - 1.0).abs() < 1e-10, "{rho}");
    }

    #[test]
    fn stationary_is_fixed_point(model in chain()) {
        let pi = model.stationary_distribution().unwrap();
        let m = model.transition_matrix().unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for u in 0..pi.len() {
            let v: f64 = (0..pi.len()).map(|s| pi[s] * m[s][u]).sum();
            prop_assert!((v - pi[u]).abs() < 1e-10);
        }
        let gamma: f64 = pi.iter().enumerate().filter(|(u, _)| u & 1 == 1).map(|(_, p)| p).sum();
        prop_assert!((gamma - model.gamma()).abs() < 1e-10);
    }

    #[test]
    fn root_matches_dense_iteration(model in chain(), theta in -3.0f64..3.0) {
        let t = tilted(&model, theta).unwrap();
        let reference = dense_spectral_radius(&t.to_dense());
        let rho = t.perron_root().unwrap();
        prop_assert!((rho / reference - 1.0).abs() < 1e-9, "{rho} vs {reference}");
    }

    #[test]
    fn two_state_closed_form_matches_iteration(g in ge(), theta in -50.0f64..50.0) {
        let model = g.model().unwrap();
        let t = tilted(&model, theta).unwrap();
        let closed = t.log_perron_root().unwrap();
        let iterated = t.log_perron_root_iterative().unwrap();
        prop_assert!((closed - iterated).abs() < 1e-10 * closed.abs().max(1.0), "{closed} vs {iterated}");
    }

    #[test]
    fn log_root_is_convex_in_theta(model in chain(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let f = |th: f64| tilted(&model, th).unwrap().log_perron_root().unwrap();
        let mid = f(0.5 * (a + b));
        prop_assert!(mid <= 0.5 * (f(a) + f(b)) + 1e-10);
    }

    #[test]
    fn log_root_slope_at_zero_is_gamma(model in chain()) {
        let f = |th: f64| tilted(&model, th).unwrap().log_perron_root().unwrap();
        let h = 1e-5;
        let slope = (f(h) - f(-h)) / (2.0 * h);
        prop_assert!((slope - model.gamma()).abs() < 1e-6);
    }

    #[test]
    fn rate_function_nonnegative_convex_zero_at_mean(model in chain(), a in 0.02f64..0.98, b in 0.02f64..0.98) {
        let lam = |x: f64| rate_function(&model, x).unwrap().value;
        prop_assert!(lam(a) >= 0.0);
        prop_assert!(lam(0.5 * (a + b)) <= 0.5 * (lam(a) + lam(b)) + 1e-9);
        prop_assert!(lam(model.gamma()) < 1e-10);
    }

    #[test]
    fn memoryless_rate_function_matches_closed_form(gamma in 0.05f64..0.95, beta in 0.01f64..0.99) {
        let model = ChannelModel::memoryless(gamma).unwrap();
        let numeric = rate_function(&model, beta).unwrap().value;
        prop_assert!((numeric - rate_function_memoryless(gamma, beta)).abs() < 1e-8);
    }

    #[test]
    fn solver_residual_and_bracket(model in chain(), c in 0.1f64..200.0) {
        let r = asymptotic_throughput(&model, BlockRatio::Finite(c)).unwrap();
        prop_assert!(r.beta > 0.0 && r.beta < model.gamma());
        let lam = rate_function(&model, r.beta).unwrap().value;
        prop_assert!((c * lam - r.beta).abs() < 1e-8);
        // a narrow or misplaced initial bracket does not change the answer
        let other = asymptotic_throughput_with(
            &model,
            BlockRatio::Finite(c),
            &Bisection { bracket: Some((0.3 * model.gamma(), 0.4 * model.gamma())), ..Bisection::default() },
        )
        .unwrap();
        prop_assert!((other.beta - r.beta).abs() < 1e-9);
    }

    #[test]
    fn solver_is_monotone_in_c(model in chain(), c in 0.1f64..100.0, dc in 0.01f64..50.0) {
        let lo = asymptotic_throughput(&model, BlockRatio::Finite(c)).unwrap().beta;
        let hi = asymptotic_throughput(&model, BlockRatio::Finite(c + dc)).unwrap().beta;
        prop_assert!(hi >= lo - 1e-10);
    }

    #[test]
    fn beta_over_lambda_increases(model in chain(), a in 0.05f64..0.95, b in 0.05f64..0.95) {
        let g = model.gamma();
        let (x, y) = (a.min(b) * g, a.max(b) * g);
        prop_assume!(y - x > 1e-3);
        prop_assert!(beta_over_lambda(&model, x).unwrap() < beta_over_lambda(&model, y).unwrap());
    }

    #[test]
    fn memoryless_paths_agree(gamma in 0.05f64..0.95, c in 0.5f64..100.0) {
        let model = ChannelModel::memoryless(gamma).unwrap();
        let numeric = asymptotic_throughput(&model, BlockRatio::Finite(c)).unwrap().beta;
        prop_assert!((numeric - memoryless_asymptotic(gamma, c)).abs() < 1e-9);
    }

    #[test]
    fn k_zero_is_minimal(g in ge()) {
        let m = k_zero(g.p01(), g.p10()).unwrap();
        let partial = |m: u64| (0..=m).map(|d| (1.0 - g.p10()).powi(d as i32) * g.p10()).sum::<f64>() + g.p01();
        prop_assert!(partial(m) >= 1.0 - 1e-11);
        if m > 0 {
            prop_assert!(partial(m - 1) < 1.0 - 1e-13);
        }
        // K0 = 0 exactly when the channel is not positively correlated
        prop_assert_eq!(m == 0, g.p01() + g.p10() >= 1.0 - 1e-12);
    }

    #[test]
    fn bound_is_below_gamma_and_monotone(g in ge(), n in 2u64..200, k in 1u64..150) {
        let r = finite_lower_bound(&g, n, k).unwrap();
        prop_assert!(r.our_bound > 0.0 && r.our_bound < g.gamma());
        // more packets per block at fixed n never hurts the bound
        let more_k = finite_lower_bound(&g, n, k + 1).unwrap();
        prop_assert!(more_k.our_bound >= r.our_bound - 1e-10);
        // more receivers at fixed k never helps it
        let more_n = finite_lower_bound(&g, n + 1, k).unwrap();
        prop_assert!(more_n.our_bound <= r.our_bound + 1e-10);
    }
}

#[test]
fn rate_function_on_a_grid() {
    for gamma in [0.25, 0.5, 0.75] {
        let model = ChannelModel::memoryless(gamma).unwrap();
        for i in 1..20 {
            let beta = i as f64 / 20.0;
            let numeric = rate_function(&model, beta).unwrap().value;
            assert!((numeric - rate_function_memoryless(gamma, beta)).abs() < 1e-8, "gamma={gamma} beta={beta}");
        }
    }
}

#[test]
fn closed_regimes() {
    let model = ChannelModel::gilbert_elliott(0.4, 0.4).unwrap();
    assert_eq!(asymptotic_throughput(&model, BlockRatio::Finite(0.0)).unwrap().beta, 0.0);
    let inf = asymptotic_throughput(&model, BlockRatio::Unbounded).unwrap();
    assert_eq!(inf.beta, 0.5);
    assert!(!inf.attained);
}
