//! Randomised invariants.

use num_complex::Complex64;
use proptest::prelude::*;

use fractal_fourier::bounds::{prop48_conditions, three_set_condition, two_set_condition};
use fractal_fourier::dimension::{similarity_dimension_set, DimensionProfile};
use fractal_fourier::fourier::{
    mu_hat, mu_hat_with, pushforward_hat_order0, pushforward_hat_order1, EvalOptions, PushforwardMap,
};
use fractal_fourier::ifs::{Budget, SelfSimilarIfs};
use fractal_fourier::FractalError;

/// Random IFS on the line with 2..=4 maps, ratios in [0.1, 0.6] summing to
/// at most 1 so the walk stays within budget.
fn line_ifs() -> impl Strategy<Value = SelfSimilarIfs> {
    (2usize..=4)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0.1f64..0.6, -1.0f64..1.0), n),
                prop::collection::vec(0.1f64..1.0, n),
            )
        })
        .prop_filter_map("degenerate or heavily overlapping", |(maps, w)| {
            if maps.iter().map(|m| m.0).sum::<f64>() > 1.0 {
                return None;
            }
            let total: f64 = w.iter().sum();
            let w: Vec<f64> = w.iter().map(|x| x / total).collect();
            SelfSimilarIfs::on_line(&maps, &w).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moran_root_solves_the_equation(rs in prop::collection::vec(0.05f64..0.7, 2..6)) {
        let s = similarity_dimension_set(&rs).unwrap();
        let sum: f64 = rs.iter().map(|r| r.powf(s)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(s > 0.0);
    }

    #[test]
    fn transform_is_conjugate_symmetric_and_bounded(ifs in line_ifs(), xi in -200.0f64..200.0) {
        let a = mu_hat(&ifs, &[xi], 1e-6).unwrap();
        let b = mu_hat(&ifs, &[-xi], 1e-6).unwrap();
        prop_assert!((a.value - b.value.conj()).norm() <= a.error_bound + b.error_bound);
        prop_assert!(a.value.norm() <= 1.0 + a.error_bound);
        prop_assert!(a.error_bound <= 1e-6);
    }

    /// μ̂(ξ) = Σ pᵢ e^{−2πiξtᵢ} μ̂(rᵢξ) for maps x ↦ rᵢx + tᵢ.
    #[test]
    fn transform_satisfies_the_self_similarity_identity(ifs in line_ifs(), xi in -100.0f64..100.0) {
        let tol = 1e-7;
        let lhs = mu_hat(&ifs, &[xi], tol).unwrap();
        let mut rhs = Complex64::new(0.0, 0.0);
        let mut err = lhs.error_bound;
        for (m, &p) in ifs.maps().iter().zip(ifs.weights()) {
            let inner = mu_hat(&ifs, &[m.ratio() * xi], tol).unwrap();
            let phase = -2.0 * std::f64::consts::PI * xi * m.translation()[0];
            rhs += p * Complex64::from_polar(1.0, phase) * inner.value;
            err += p * inner.error_bound;
        }
        prop_assert!((lhs.value - rhs).norm() <= err + 1e-12);
    }

    #[test]
    fn pushforward_schemes_agree(xi in 1.0f64..3000.0) {
        let ifs = SelfSimilarIfs::cantor();
        let map = PushforwardMap::square(1);
        let opts = EvalOptions::new(1e-5);
        let a = pushforward_hat_order0(&ifs, &map, &[xi], &opts).unwrap();
        let b = pushforward_hat_order1(&ifs, &map, &[xi], &opts).unwrap();
        prop_assert!((a.value - b.value).norm() <= a.error_bound + b.error_bound);
    }

    #[test]
    fn set_conditions_are_symmetric(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0) {
        prop_assert_eq!(two_set_condition(a, b).unwrap().holds, two_set_condition(b, a).unwrap().holds);
        let h = three_set_condition(a, b, c).unwrap().holds;
        prop_assert_eq!(h, three_set_condition(c, a, b).unwrap().holds);
        prop_assert_eq!(h, three_set_condition(b, c, a).unwrap().holds);
    }

    #[test]
    fn measure_condition_is_monotone(a in 0.05f64..0.9, b in 0.05f64..0.9, d in 0.0f64..0.1, ad in any::<bool>()) {
        if prop48_conditions(a, b, ad).unwrap().holds {
            prop_assert!(prop48_conditions(a + d, b + d, ad).unwrap().holds);
        }
    }

    #[test]
    fn ordered_profiles_validate(k in 1usize..4, u in prop::collection::vec(0.0f64..=1.0, 4)) {
        let ks = u[0] * k as f64;
        let k2 = u[1] * ks;
        let di = k2 * (0.5 + 0.5 * u[2]);
        let k1 = k2 * 0.5 + (di - k2 * 0.5) * u[3];
        prop_assert!(DimensionProfile::manual(k, k2, ks, di).with_kappa1(k1).validated().is_ok());
    }
}

#[test]
fn exhausted_budget_is_an_error() {
    let opts = EvalOptions::new(1e-9).with_budget(Budget::new(10));
    let err = mu_hat_with(&SelfSimilarIfs::uniform_unit(), &[5000.0], &opts).unwrap_err();
    assert!(matches!(err, FractalError::ResourceExceeded { .. }));
    assert_eq!(err.exit_code(), 4);
}
