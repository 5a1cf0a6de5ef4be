use basin_forge::integrator::PerturbationSpec;
use basin_forge::robust_map::{dist_inf, find_sink, Map3, PerturbedMap, RobustMap, DEFAULT_LAMBDA};
use basin_forge::tm::catalog;
use proptest::prelude::*;

fn configs() -> impl Strategy<Value = [f64; 3]> {
    (0u32..200, 0u32..200, 1u32..=2).prop_map(|(a, b, q)| [f64::from(a), f64::from(b), f64::from(q)])
}

fn offset() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-0.25f64..=0.25)
}

proptest! {
    #[test]
    fn unperturbed_map_contracts_near_configurations(p in configs(), a in offset(), b in offset()) {
        let f = RobustMap::new(catalog::erase(), DEFAULT_LAMBDA).unwrap();
        let x: [f64; 3] = std::array::from_fn(|i| p[i] + a[i]);
        let y: [f64; 3] = std::array::from_fn(|i| p[i] + b[i]);
        prop_assert!(dist_inf(f.apply(x), f.apply(y)) <= DEFAULT_LAMBDA * dist_inf(x, y) + 1e-12);
    }

    #[test]
    fn perturbed_lipschitz_ratio_is_below_lambda_plus_theta(
        p in configs(), a in offset(), b in offset(), alpha in 0.0f64..0.3, w in prop::array::uniform3(-1.0f64..=1.0),
    ) {
        let base = RobustMap::new(catalog::erase(), DEFAULT_LAMBDA).unwrap();
        let g = PerturbedMap::new(base, PerturbationSpec::sinusoidal(alpha, 3).with_weights(w.to_vec()));
        let x: [f64; 3] = std::array::from_fn(|i| p[i] + a[i]);
        let y: [f64; 3] = std::array::from_fn(|i| p[i] + b[i]);
        let d = dist_inf(x, y);
        prop_assume!(d > 1e-9);
        let ratio = dist_inf(g.apply(x), g.apply(y)) / d;
        prop_assert!(ratio <= DEFAULT_LAMBDA + g.theta() + 1e-9, "ratio {ratio}, θ = {}", g.theta());
    }

    #[test]
    fn perturbed_sink_stays_close(alpha in 0.0f64..0.2, w in prop::array::uniform3(-1.0f64..=1.0), which in 0usize..3) {
        let (_, m) = &catalog::all()[which];
        let base = RobustMap::new(m.clone(), DEFAULT_LAMBDA).unwrap();
        let xh = base.halting_point();
        let g = PerturbedMap::new(base, PerturbationSpec::sinusoidal(alpha, 3).with_weights(w.to_vec()));
        let s = find_sink(&g, xh, 1e-12).unwrap();
        // ‖s_g − s‖ ≤ λ‖s_g − s‖ + δ on the plateau around s
        prop_assert!(dist_inf(s.point, xh) <= g.delta() / (1.0 - DEFAULT_LAMBDA) + 1e-12);
        prop_assert!(s.moduli.iter().all(|&r| r < DEFAULT_LAMBDA + g.theta() + 1e-9));
    }
}

#[test]
fn sink_shift_grows_with_perturbation_size() {
    let base = RobustMap::new(catalog::binary_increment(), DEFAULT_LAMBDA).unwrap();
    let xh = base.halting_point();
    let mut last = 0.0;
    for alpha in [0.0, 0.01, 0.02, 0.05, 0.1, 0.2] {
        let spec = PerturbationSpec::sinusoidal(alpha, 3).with_weights(vec![0.3, -0.8, 1.0]);
        let s = find_sink(&PerturbedMap::new(base.clone(), spec), xh, 1e-13).unwrap();
        let shift = dist_inf(s.point, xh);
        assert!(shift >= last, "α = {alpha}: {shift} < {last}");
        last = shift;
    }
    assert!(last > 0.0);
}
