mod common;

use common::*;
use proptest::prelude::*;
use vfpgi::models::growth::GrowthModel;
use vfpgi::models::pakes_mcguire::PmParams;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boxed_map_fixed_points_are_kkt_points(m in -1000i32..2000, lambda in 1e-3f64..1.0) {
        let c = m as f64 / 1000.0;
        prop_assert_eq!(boxed_fixed_points_match_kkt(c, lambda), Ok(()));
    }

    #[test]
    fn spectral_step_identities(
        s in prop::collection::vec(-1e3f64..1e3, 2..12),
        y_seed in prop::collection::vec(-1e3f64..1e3, 12),
        c in prop_oneof![1e-6f64..1e6, -1e6f64..-1e-6],
    ) {
        let y = &y_seed[..s.len()];
        prop_assert_eq!(alpha_identities(&s, y, c), Ok(()));
    }

    #[test]
    fn cournot_first_order_conditions(
        eta in 1.2f64..3.0,
        mc in prop::collection::vec(0.2f64..5.0, 1..5),
        xi in 0.0f64..6.0,
    ) {
        prop_assert_eq!(cournot_checks(eta, &mc, xi), Ok(()));
    }

    #[test]
    fn logit_first_order_conditions(w in prop::collection::vec(1usize..=19, 1..5)) {
        let p = PmParams::benchmark(w.len(), 0.0);
        prop_assert_eq!(logit_checks(&p, &w), Ok(()));
    }

    #[test]
    fn invest_game_gradient_matches_fd(j in 1usize..=2, share in 0.2f64..2.0, s in 0usize..50) {
        let gap = invest_game_gradient_gap(j, share, &[s]).unwrap();
        prop_assert!(gap <= 1e-6, "gap {}", gap);
    }

    #[test]
    fn pm_gradient_matches_fd(j in 1usize..=2, theta2 in 0.0f64..2.0, scale in 0.1f64..20.0, i in 0.05f64..3.0) {
        let gap = pm_gradient_gap(j, theta2, scale, i).unwrap();
        prop_assert!(gap <= 1e-6, "gap {}", gap);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pm_analytic_investment_matches_grid(v2 in 0.0f64..50.0, dv in 0.0f64..25.0) {
        let p = PmParams::benchmark(1, 0.0);
        prop_assert_eq!(pm_analytic_vs_grid(&p, v2 + dv, v2), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn growth_gradient_matches_fd(elastic in any::<bool>(), shift in -0.05f64..0.05, s in 0usize..100) {
        let m = if elastic { GrowthModel::elastic() } else { GrowthModel::inelastic() }.unwrap();
        let gap = growth_gradient_gap(&m, shift, &[s]).unwrap();
        prop_assert!(gap <= 1e-6, "gap {}", gap);
    }
}

#[test]
fn quadrature_is_exact_up_to_degree_2n_minus_1() {
    for order in 1..=32 {
        assert_eq!(quadrature_moments_exact(order), Ok(()));
    }
}

#[test]
fn closed_form_and_newton_best_responses_agree() {
    for (j, scale) in [(1, 2.0), (1, 8.0), (2, 4.0)] {
        let gap = pm_inner_solvers_agree(j, scale).unwrap();
        assert!(gap < 1e-8, "J={j}, scale={scale}: gap {gap}");
    }
}
