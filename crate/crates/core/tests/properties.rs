use levy_impulse::numerics::mean_se;
use levy_impulse::prelude::*;
use levy_impulse::process::simulate_for;
use levy_impulse::rng::substream;
use levy_impulse::simulate::Strategy as Policy;
use levy_impulse::transform::{check_unimodal_fn, hat_h};
use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig, Strategy};

fn spectrally_positive() -> impl Strategy<Value = LevyModel<f64>> {
    (-1.0..1.0f64, 0.0..2.0f64, 0.5..4.0f64, 0.5..3.0f64).prop_filter_map("positive mean", |(d, s2, rate, eta)| {
        LevyModel::new(d, s2, rate, Some(JumpLaw::ExponentialUp { eta }))
            .ok()
            .filter(|m| m.mean_rate().is_ok_and(|v| v > 0.2) && m.has_downward_movement())
    })
}

fn brownian() -> impl Strategy<Value = LevyModel<f64>> {
    (0.2..3.0f64, 0.2..4.0f64).prop_map(|(d, s2)| LevyModel::brownian(d, s2).unwrap())
}

fn quadratic(k: f64) -> PayoffSpec<f64> {
    PayoffSpec::new(Gamma::Linear { c: 1.0 }, RunningCost::monomial(2, 1.0), k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn g_function_is_monotone(m in brownian(), k in 0.05..5.0f64) {
        let sol = solve(&m, &quadratic(k), &SolveOptions::default()).unwrap();
        prop_assert!(sol.g_function.is_monotone(1e-9));
        prop_assert!(sol.cycle_residual.abs() <= 1e-8 * (1.0 + k));
    }

    #[test]
    fn ladder_normalization(m in spectrally_positive()) {
        let l = build_ladder_system(&m, &LadderOptions::default()).unwrap();
        let resid = l.delta_h + l.pi_bar_h.jump_mass() - l.mean_rate;
        prop_assert!(resid.abs() <= 1e-6 * l.mean_rate.max(1.0));
    }

    #[test]
    fn laplace_exponent_vanishes_at_q(m in brownian()) {
        let q = levy_impulse::ladder::kill_rate_q(&m).unwrap();
        prop_assert!(m.laplace_exponent(q).unwrap().abs() <= 1e-9 * (1.0 + q * q));
        prop_assert!(m.laplace_exponent(q / 2.0).unwrap() < 0.0);
        prop_assert!(m.laplace_exponent(2.0 * q).unwrap() > 0.0);
    }

    #[test]
    fn hat_h_of_constant_is_constant(m in spectrally_positive(), c in -5.0..5.0f64) {
        let l = build_ladder_system(&m, &LadderOptions::default()).unwrap();
        let hh = hat_h(&l, &RunningCost::constant(c)).unwrap();
        for x in [-4.0, 0.0, 3.0] {
            prop_assert_eq!(hh.eval(x), c);
        }
    }

    #[test]
    fn scale_covariance(m in brownian(), k in 0.1..3.0f64, c in 0.2..5.0f64) {
        let base = solve(&m, &quadratic(k), &SolveOptions::default()).unwrap();
        let scaled = solve(&m, &quadratic(k).scaled(c), &SolveOptions::default()).unwrap();
        prop_assert!((scaled.rho_star - c * base.rho_star).abs() <= 1e-7 * c * (1.0 + base.rho_star.abs()));
        prop_assert!((scaled.s - base.s).abs() <= 1e-6);
        prop_assert!((scaled.big_s - base.big_s).abs() <= 1e-6);
    }

    #[test]
    fn unimodality_finds_vertex(a in -5.0..5.0f64, w in 0.1..4.0f64, top in -3.0..3.0f64) {
        let u = check_unimodal_fn(|x: f64| top - w * (x - a) * (x - a), -10.0, 10.0, 0.01).unwrap();
        prop_assert!((u.a - a).abs() <= 1e-6);
        prop_assert!((u.g_max - top).abs() <= 1e-9);
    }

    #[test]
    fn bimodal_is_rejected(gap in 2.0..6.0f64) {
        let g = |x: f64| (-(x + gap).powi(2)).exp() + (-(x - gap).powi(2)).exp();
        prop_assert!(check_unimodal_fn(g, -10.0, 10.0, 0.01).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn wald_identity_at_fixed_time(m in spectrally_positive(), seed in 0u64..1000) {
        let t = 2.0;
        let xs: Vec<f64> = (0..4000u64)
            .map(|i| simulate_for(&m, 0.0, t, 1e-3, &mut substream(seed, i), &mut ()))
            .collect();
        let (mean, se) = mean_se(&xs);
        prop_assert!((mean - t * m.mean_rate().unwrap()).abs() <= 5.0 * se);
    }

    #[test]
    fn simulation_is_deterministic(m in spectrally_positive(), seed in 0u64..1000) {
        let opts = SimOptions { n_cycles: 300, seed, ..Default::default() };
        let st = Policy::Band { s: -0.5, big_s: 1.0 };
        let a = run_policy(&m, &quadratic(1.0), &st, &opts).unwrap();
        let b = run_policy(&m, &quadratic(1.0), &st, &opts).unwrap();
        prop_assert_eq!(a.j_hat.to_bits(), b.j_hat.to_bits());
        prop_assert_eq!(a.se.to_bits(), b.se.to_bits());
    }
}

#[test]
fn f32_models_solve() {
    let m = LevyModel::<f32>::brownian(1.0, 2.0).unwrap();
    let p = PayoffSpec::new(Gamma::Linear { c: 1.0 }, RunningCost::monomial(2, 1.0), 4.0 / 3.0).unwrap();
    let opts = SolveOptions::<f32> {
        rho_tol: 1e-6,
        g_tol: 1e-5,
        ..Default::default()
    };
    let sol = solve(&m, &p, &opts).unwrap();
    assert!((sol.rho_star + 1.0).abs() < 1e-3, "{}", sol.rho_star);
}
