use proptest::prelude::*;

use slowfast::chaos::{hermite_poly, scaling_alpha, ChaosExpansion};
use slowfast::diagram::{count_bound, enumerate_pairings, product_expectation_cov};
use slowfast::gaussian_noise::sample_wiener_values;
use slowfast::grid::TimeGrid;
use slowfast::martingale::{bar_variance, conditional_hermite, hermite_addition};
use slowfast::rde::{solve_rde, FieldPreset, VectorFieldFamily};
use slowfast::rng;
use slowfast::rough_path::{chen_defect, geometric_defect, Flavor, Increments, RoughPathLift};

fn brute_force_pairings(degrees: &[usize]) -> u64 {
    // stubs labelled by node; pair the first free stub with every admissible partner
    fn go(free: &mut Vec<usize>) -> u64 {
        if free.is_empty() {
            return 1;
        }
        let a = free.remove(0);
        let mut total = 0;
        for i in 0..free.len() {
            if free[i] != a {
                let b = free.remove(i);
                total += go(free);
                free.insert(i, b);
            }
        }
        free.insert(0, a);
        total
    }
    let mut stubs: Vec<usize> = degrees.iter().enumerate().flat_map(|(l, &k)| std::iter::repeat_n(l, k)).collect();
    go(&mut stubs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairing_totals_match_brute_force(degrees in prop::collection::vec(1usize..4, 2..5)) {
        let e = enumerate_pairings(&degrees).unwrap();
        prop_assert_eq!(e.total, brute_force_pairings(&degrees));
        let grouped: u64 = e.graphs.iter().map(|g| g.multiplicity).sum();
        prop_assert_eq!(grouped, e.total);
    }

    #[test]
    fn pairing_totals_respect_the_bound(degrees in prop::collection::vec(1usize..5, 2..5)) {
        let e = enumerate_pairings(&degrees).unwrap();
        // the bound is attained for two equal nodes; allow for the rounding of √(k!)²
        prop_assert!(e.total as f64 <= count_bound(&degrees).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn two_node_product_is_m_factorial_rho_power(m in 1usize..8, rho in -1.0f64..1.0) {
        let v = product_expectation_cov(&[m, m], |_, _| rho).unwrap();
        let exact = (1..=m).map(|k| k as f64).product::<f64>() * rho.powi(m as i32);
        prop_assert!((v - exact).abs() <= 1e-12 * exact.abs().max(1.0));
    }

    #[test]
    fn hermite_addition_reproduces_the_polynomial(m in 0usize..7, theta in 0.0f64..1.5, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let (a, b) = (theta.cos(), theta.sin());
        let direct = hermite_poly(m, a * x + b * y);
        prop_assert!((hermite_addition(m, a, b, x, y).unwrap() - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn conditional_hermite_scales_the_polynomial(m in 1usize..6, a in 0.01f64..1.0, x in -3.0f64..3.0) {
        let v = conditional_hermite(m, a, a * x).unwrap();
        prop_assert!((v - a.powi(m as i32) * hermite_poly(m, x)).abs() < 1e-9 * hermite_poly(m, x).abs().max(1.0));
    }

    #[test]
    fn chen_holds_for_random_lifts(seed in 0u64..1000, d in 1usize..4, ito in any::<bool>()) {
        let grid = TimeGrid::over(1.0, 24).unwrap();
        let paths: Vec<Vec<f64>> = (0..d).map(|i| sample_wiener_values(&grid, &mut rng::substream(seed, i as u64))).collect();
        let flavor = if ito { Flavor::Ito } else { Flavor::Stratonovich };
        let lift = RoughPathLift::wiener(grid, &paths, flavor).unwrap();
        for (s, u, t) in [(0, 5, 24), (3, 4, 5), (2, 13, 20)] {
            prop_assert!(chen_defect(&lift, s, u, t) <= 1e-12);
        }
        if !ito {
            prop_assert!(geometric_defect(&lift, 1, 22) <= 1e-12);
        }
    }

    #[test]
    fn effective_lift_keeps_chen(seed in 0u64..1000, a in prop::collection::vec(-1.0f64..1.0, 4)) {
        let grid = TimeGrid::over(1.0, 16).unwrap();
        let paths: Vec<Vec<f64>> = (0..2).map(|i| sample_wiener_values(&grid, &mut rng::substream(seed, i))).collect();
        let lift = RoughPathLift::wiener(grid, &paths, Flavor::Ito).unwrap().with_area(a).unwrap();
        prop_assert!(chen_defect(&lift, 0, 7, 16) <= 1e-12);
        prop_assert!(lift.level1(0, 16).len() == 2);
    }

    #[test]
    fn decomposition_is_on_the_unit_circle(h in 0.55f64..0.95, t in 0.5f64..30.0) {
        let d = bar_variance(h, 0.0, t).unwrap();
        prop_assert!((d.a * d.a + d.b * d.b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn alpha_grows_as_eps_shrinks(eps in 1e-4f64..0.25, h_star in -2.0f64..0.99) {
        prop_assert!(scaling_alpha(eps, h_star).unwrap() > scaling_alpha(2.0 * eps, h_star).unwrap());
    }

    #[test]
    fn linear_rde_is_exponential_of_the_driver(seed in 0u64..500, scale in -1.0f64..1.0) {
        let grid = TimeGrid::over(1.0, 64).unwrap();
        let w = sample_wiener_values(&grid, &mut rng::substream(seed, 0));
        let lift = RoughPathLift::wiener(grid, &[w.clone()], Flavor::Stratonovich).unwrap();
        let fam = VectorFieldFamily::from_presets(1, &[FieldPreset::Linear { scale }]).unwrap();
        let x = solve_rde(&lift, &fam, &[1.0], false).unwrap();
        let exact = (scale * w[64]).exp();
        prop_assert!((x.endpoint()[0] - exact).abs() < 0.05 * exact);
    }
}

#[test]
fn expansion_of_a_hermite_polynomial_is_exact() {
    let g = ChaosExpansion::hermite(4);
    assert_eq!(g.rank, Some(4));
    assert!(g.is_centred());
    assert_eq!(g.coeff(4), 1.0);
}
