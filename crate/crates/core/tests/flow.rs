use std::sync::Arc;

use basin_forge::integrator::analysis::{TrackingOptions, GATED_H_MAX};
use basin_forge::integrator::{
    integrate, integrate_with_events, track_against_discrete, Event, PerturbationSpec, Tolerances, VectorField,
};
use basin_forge::ode_system::{
    build_field, choose_c, halting_point, Field, Forcing, ScalarMap, Stage, TargetingField, TargetingSpec,
};
use basin_forge::robust_map::{RobustMap, DEFAULT_LAMBDA};
use basin_forge::tm::catalog;
use proptest::prelude::*;

fn robust_c() -> f64 {
    choose_c(&TargetingSpec::new(0.0, 1.0 / 16.0), true).unwrap()
}

#[test]
fn halting_point_is_an_exact_equilibrium() {
    for (name, m) in catalog::all() {
        let f = build_field(&m, Stage::Full, robust_c(), DEFAULT_LAMBDA).unwrap();
        let xh = halting_point(&m);
        let mut out = [1.0; 7];
        f.eval(&xh, &mut out);
        assert_eq!(out, [0.0; 7], "{name}");

        let traj = integrate(&f, &xh, 10.0, &Tolerances::default().with_h_max(GATED_H_MAX)).unwrap();
        assert_eq!(traj.last_state(), &xh[..]);
    }
}

fn assert_jacobian_matches(f: &Field, x: &[f64]) -> Result<(), TestCaseError> {
    const H: f64 = 1e-6;
    let n = f.dim();
    let j = f.jacobian(x);
    let (mut up, mut down) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += H;
        xm[k] -= H;
        f.eval(&xp, &mut up);
        f.eval(&xm, &mut down);
        for i in 0..n {
            let fd = (up[i] - down[i]) / (2.0 * H);
            prop_assert!(
                (fd - j[(i, k)]).abs() <= 1e-5 * (1.0 + fd.abs()),
                "∂{i}/∂{k} at {x:?}: {} vs {fd}",
                j[(i, k)]
            );
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_matches_finite_differences(
        x in prop::collection::vec(-0.5f64..3.0, 7),
        six in any::<bool>(),
    ) {
        let m = catalog::binary_increment();
        let stage = if six { Stage::Six } else { Stage::Full };
        let f = build_field(&m, stage, 1.0, DEFAULT_LAMBDA).unwrap();
        assert_jacobian_matches(&f, &x)?;
    }
}

#[test]
fn pair_stage_tracks_integer_maps() {
    const GAMMA: f64 = 0.25;
    // the targeting error tends to γ from below for long jumps, closer
    // than the solver's accuracy at magnitude 10⁴
    const SOLVER: f64 = 1e-6;
    let c = choose_c(&TargetingSpec::new(0.0, GAMMA), false).unwrap();
    let tape = ScalarMap::MachineTape(Arc::new(RobustMap::new(catalog::erase(), DEFAULT_LAMBDA).unwrap()));
    let cases = [
        (ScalarMap::Affine { a: 1.0, b: 1.0 }, 0.0),
        (ScalarMap::Affine { a: -1.0, b: 5.0 }, 2.0),
        (tape, 98_765.0),
    ];
    let tol = Tolerances::new(1e-10, 1e-10).with_h_max(GATED_H_MAX);
    for (case, (map, x0)) in cases.into_iter().enumerate() {
        let field = Field::pair(map.clone(), c);
        let name = format!("case {case}");
        let traj = integrate(&field, &[x0, x0, 0.0], 30.5, &tol).unwrap();
        let mut exact = x0;
        for k in 0..=30 {
            let z = traj.at(f64::from(k)).unwrap();
            assert!((z[0] - exact).abs() <= GAMMA + SOLVER, "{name}: z1({k}) = {} vs {exact}", z[0]);
            for s in 0..=8 {
                let t = f64::from(k) + f64::from(s) / 16.0;
                let z = traj.at(t).unwrap();
                assert!((z[1] - exact).abs() <= GAMMA + SOLVER, "{name}: z2({t}) = {} vs {exact}", z[1]);
            }
            exact = map.eval(exact);
        }
    }
}

#[test]
fn clock_rate_stays_within_a_quarter_of_one() {
    let m = catalog::erase();
    let mf = f64::from(m.num_states());
    let base = build_field(&m, Stage::Full, robust_c(), DEFAULT_LAMBDA).unwrap();
    for weight in [1.0, -1.0] {
        let mut w = vec![0.0; 7];
        w[6] = weight;
        let g = base.perturb(PerturbationSpec::constant(0.25, 7).with_weights(w)).unwrap();
        let x0 = [0.0, 35.0, 1.0, 0.0, 35.0, 1.0, 0.0];
        let traj = integrate(&g, &x0, 6.0, &Tolerances::new(1e-9, 1e-9).with_h_max(GATED_H_MAX)).unwrap();
        let mut checked = 0;
        let mut f = [0.0; 7];
        for x in &traj.states {
            if x[5] < mf - 3.0 / 16.0 {
                g.eval(x, &mut f);
                assert!((0.75..=1.25).contains(&f[6]), "z' = {} at {x:?}", f[6]);
                checked += 1;
            }
        }
        assert!(checked > 50);
    }
}

#[test]
fn event_times_do_not_depend_on_the_step_sequence() {
    let spec = TargetingSpec::new(3.0, 0.25);
    let c = choose_c(&spec, false).unwrap();
    let field = TargetingField {
        spec,
        c,
        forcing: Forcing::Sine { amplitude: 0.1, omega: 7.0, phase: 0.3 },
    };
    let times: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 50.0, 1.0 / 128.0]
        .iter()
        .map(|&h| {
            let tol = Tolerances::new(1e-12, 1e-12).with_h_max(h);
            let ev = [Event::new(0, |_, x: &[f64]| 0.5 - (x[0] - 3.0).abs()).terminal()];
            let traj = integrate_with_events(&field, &[0.0, 0.0], 0.5, &tol, &ev).unwrap();
            traj.first_event(0).expect("event fires").t
        })
        .collect();
    let spread = times.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - times.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread <= 1e-8, "{times:?}");
}

#[test]
fn increment_halts_in_the_flow() {
    let m = catalog::binary_increment();
    let field = build_field(&m, Stage::Full, robust_c(), DEFAULT_LAMBDA).unwrap();
    let rep = track_against_discrete(&field, &m, 5, 1000, &TrackingOptions::default()).unwrap();
    let steps = rep.steps_to_halt.unwrap() as f64;
    assert!(rep.max_deviation <= 0.25, "{}", rep.max_deviation);
    let te = rep.entry_time.expect("enters B(x_halt, 1/8)");
    // after the last step the clock decays from about K at unit rate
    assert!(te <= steps + 1.0 + (8.0 * (steps + 1.0)).ln(), "entry at {te} after {steps} steps");
    assert!(rep.max_after_entry <= 0.125);
}
