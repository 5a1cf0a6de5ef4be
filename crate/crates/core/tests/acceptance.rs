//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion, and exits non-zero if any failed.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use basin_forge::integrator::analysis::{TrackingOptions, GATED_H_MAX};
use basin_forge::integrator::{integrate, track_against_discrete, PerturbationSpec, Tolerances, VectorField};
use basin_forge::ode_system::{
    build_field, choose_c, halting_point, Field, Forcing, Stage, TargetingField, TargetingSpec,
};
use basin_forge::planar::{
    brute_force_classify, catalog as fields, compute_basin, hausdorff, polyline_dist, Attractor,
    BasinOptions, BasinReport, CellLabel, PlanarField,
};
use basin_forge::robust_map::{
    basin_membership, dist_inf, find_sink, iterate_tracked, Map3, PerturbedMap, RobustMap, Verdict,
    DEFAULT_LAMBDA,
};
use basin_forge::tm::{catalog as machines, EncodedConfig, TuringMachine};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn test_machines() -> [(&'static str, TuringMachine); 3] {
    [
        ("erase", machines::erase()),
        ("loop", machines::forever_right()),
        ("increment", machines::binary_increment()),
    ]
}

/// Distinct configurations reachable in at most `steps` steps from the
/// encodings of w = 0..=w_max.
fn reachable(m: &TuringMachine, w_max: u64, steps: usize) -> Vec<EncodedConfig> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for w in 0..=w_max {
        for c in m.orbit(&m.encode_input(w), steps) {
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
    }
    out
}

/// The random map perturbation used by criteria 3 and 4: `family` 0, 1, 2
/// is constant, sinusoidal or Gaussian tail with C⁰ bound at most 0.1.
fn map_perturbation(family: usize, rng: &mut ChaCha8Rng) -> PerturbationSpec {
    let spec = match family {
        0 => PerturbationSpec::constant(0.1, 3),
        1 => PerturbationSpec::sinusoidal(0.1, 3),
        _ => PerturbationSpec::gaussian_tail(10f64.ln(), 3),
    };
    spec.randomized(rng, &[true; 3], 5.0)
}

const EPS: f64 = 0.2;

fn discrete_exactness() -> Outcome {
    let mut checked = 0;
    for (name, m) in test_machines() {
        let f = RobustMap::new(m.clone(), DEFAULT_LAMBDA).map_err(|e| e.to_string())?;
        for c in reachable(&m, 50, 200) {
            let x = c.to_f64().ok_or_else(|| format!("{name}: {c} does not fit in f64"))?;
            let want = m.step(&c).map_err(|e| e.to_string())?;
            let want = want.to_f64().ok_or_else(|| format!("{name}: successor of {c} too large"))?;
            let got = f.apply(x);
            ensure(got == want, || format!("{name}: f̄{x:?} = {got:?}, step gives {want:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} reachable configurations, all exact"))
}

fn contraction() -> Outcome {
    const SLACK: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut centers = Vec::new();
    for (_, m) in test_machines() {
        let all = reachable(&m, 50, 200);
        let stride = (all.len() / 17).max(1);
        centers.extend(all.iter().step_by(stride).take(17).map(|c| (m.clone(), c.to_f64().unwrap())));
    }
    centers.truncate(50);
    ensure(centers.len() == 50, || format!("only {} centers", centers.len()))?;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (m, p) in &centers {
        let f = RobustMap::new(m.clone(), DEFAULT_LAMBDA).unwrap();
        for _ in 0..20 {
            let mut ball = || -> [f64; 3] { std::array::from_fn(|i| p[i] + rng.gen_range(-0.25..=0.25)) };
            let (x, x0) = (ball(), ball());
            let lhs = dist_inf(f.apply(x), f.apply(x0));
            let rhs = f.lambda() * dist_inf(x, x0) + SLACK;
            worst = worst.max(lhs - rhs);
            ensure(lhs <= rhs, || format!("pair {x:?}, {x0:?}: {lhs:e} > {rhs:e}"))?;
        }
    }
    Ok(format!("1000 pairs, max(lhs - rhs) = {worst:.3e}"))
}

fn perturbed_tracking() -> Outcome {
    const SLACK: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (name, m) in test_machines() {
        let base = RobustMap::new(m.clone(), DEFAULT_LAMBDA).unwrap();
        for family in 0..3 {
            for _ in 0..20 {
                let g = PerturbedMap::new(base.clone(), map_perturbation(family, &mut rng));
                ensure(g.delta() <= 0.1 + 1e-15, || format!("delta {} > 0.1", g.delta()))?;
                for w in [0u64, 7, 35, 50] {
                    let start = m.encode_input(w);
                    let x0 = start.to_f64().unwrap();
                    let track = iterate_tracked(&g, &m, x0, &start, 100);
                    ensure(track.len() == 101, || format!("{name} w={w}: orbit left the f64 range"))?;
                    let dev = track.iter().map(|s| s.deviation).fold(0.0, f64::max);
                    worst = worst.max(dev);
                    ensure(dev <= EPS + SLACK, || format!("{name} w={w} family {family}: deviation {dev}"))?;
                    runs += 1;
                }
            }
        }
    }
    Ok(format!("{runs} tracked orbits of 100 steps, max deviation {worst:.4} <= {EPS}"))
}

fn halting_correspondence() -> Outcome {
    const ORACLE_BUDGET: u64 = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut decided = 0;
    for (name, m) in test_machines() {
        let base = RobustMap::new(m.clone(), DEFAULT_LAMBDA).unwrap();
        let xh = base.halting_point();
        for p in 0..10 {
            let g = PerturbedMap::new(base.clone(), map_perturbation(p % 3, &mut rng));
            ensure(g.within_budget(EPS), || format!("perturbation {p} outside the budget"))?;
            let sink = find_sink(&g, xh, 1e-12).map_err(|e| format!("{name}: {e}"))?;
            for w in 0..=50u64 {
                let oracle = m.run(w, ORACLE_BUDGET);
                let j_max = 10 * oracle.steps_used.max(1) as usize;
                let v = basin_membership(&g, sink.point, w, EPS, j_max).verdict;
                ensure((v == Verdict::In) == oracle.halted, || {
                    format!("{name} w={w} perturbation {p}: verdict {v:?}, oracle halted = {}", oracle.halted)
                })?;
                decided += 1;
            }
        }
    }
    Ok(format!("{decided} (machine, w, perturbation) triples agree with the oracle"))
}

fn targeting_bounds() -> Outcome {
    const GAMMA: f64 = 0.25;
    const RHO: f64 = 0.125;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tol = Tolerances::new(1e-10, 1e-10).with_h_max(GATED_H_MAX);
    let (mut worst_free, mut worst_forced): (f64, f64) = (0.0, 0.0);
    for i in 0..100 {
        let b = rng.gen_range(-5.0..=5.0);
        let x0 = b + rng.gen_range(-4.0..=4.0);
        let spec = TargetingSpec::new(b, GAMMA);
        let c = choose_c(&spec, false).map_err(|e| e.to_string())?;
        let window = spec.t1 - spec.t0;
        let end = |forcing: Forcing| -> Result<f64, String> {
            let field = TargetingField { spec: spec.clone(), c, forcing };
            let traj = integrate(&field, &[x0, spec.t0], window, &tol).map_err(|e| e.to_string())?;
            Ok((traj.last_state()[0] - b).abs())
        };
        let free = end(Forcing::None)?;
        worst_free = worst_free.max(free);
        ensure(free < GAMMA, || format!("sample {i}: |x(t1) - b| = {free}"))?;

        let forcing = if i % 2 == 0 {
            Forcing::Constant(RHO * rng.gen_range(-1.0..=1.0))
        } else {
            Forcing::Sine {
                amplitude: RHO * rng.gen_range(-1.0..=1.0),
                omega: rng.gen_range(0.0..=40.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        };
        ensure(forcing.sup() <= RHO, || "forcing exceeds rho".into())?;
        let forced = end(forcing)?;
        worst_forced = worst_forced.max(forced);
        let bound = GAMMA + RHO * window;
        ensure(forced < bound, || format!("sample {i}: perturbed error {forced} >= {bound}"))?;
    }
    Ok(format!("max error {worst_free:.4} < 1/4 unperturbed, {worst_forced:.4} < 5/16 with forcing"))
}

fn robust_c() -> f64 {
    choose_c(&TargetingSpec::new(0.0, 1.0 / 16.0), true).expect("valid spec")
}

fn full_field(m: &TuringMachine, c: f64) -> Field {
    build_field(m, Stage::Full, c, DEFAULT_LAMBDA).expect("valid field")
}

fn ode_tracking() -> Outcome {
    const MAX_DEV: f64 = 0.25;
    const BALL: f64 = 0.125;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let erase = machines::erase();
    let field = full_field(&erase, robust_c());
    let mut offset = || -> [f64; 7] { std::array::from_fn(|_| rng.gen_range(-0.125..=0.125)) };
    let runs: [(u64, [f64; 7], Option<PerturbationSpec>); 3] = [
        (35, [0.0; 7], None),
        (35, offset(), Some(PerturbationSpec::sinusoidal(1.0 / 16.0, 7))),
        (7, offset(), Some(PerturbationSpec::constant(0.125, 7))),
    ];
    let mut notes = Vec::new();
    for (w, off, pert) in runs {
        let g = match pert {
            Some(p) => field.perturb(p.randomized(&mut rng, &[true; 7], 0.0)).map_err(|e| e.to_string())?,
            None => field.clone(),
        };
        let opts = TrackingOptions { offset: off, entry_radius: BALL, ..TrackingOptions::default() };
        let rep = track_against_discrete(&g, &erase, w, 1000, &opts).map_err(|e| e.to_string())?;
        let steps = rep.steps_to_halt.ok_or("erase did not halt")?;
        ensure(rep.max_deviation <= MAX_DEV, || format!("w={w}: deviation {}", rep.max_deviation))?;
        ensure(rep.deviations.len() as u64 == steps, || format!("w={w}: {} clock crossings", rep.deviations.len()))?;
        let te = rep.entry_time.ok_or_else(|| format!("w={w}: never entered B(x_halt, 1/8)"))?;
        ensure(te <= steps as f64 + 3.0, || format!("w={w}: entry at t = {te}, {steps} steps"))?;
        ensure(rep.max_after_entry <= BALL, || format!("w={w}: left the ball, {}", rep.max_after_entry))?;
        notes.push(format!("w={w} dev {:.3} entry t={te:.2}", rep.max_deviation));
    }

    let looping = machines::forever_right();
    let field = full_field(&looping, robust_c());
    let opts = TrackingOptions { entry_radius: 0.25, t_max: 50.0, ..TrackingOptions::default() };
    let rep = track_against_discrete(&field, &looping, 5, 60, &opts).map_err(|e| e.to_string())?;
    ensure(rep.entry_time.is_none(), || format!("loop entered B(x_halt, 1/4) at {:?}", rep.entry_time))?;
    ensure(rep.t_end >= 50.0, || format!("loop run stopped at t = {}", rep.t_end))?;
    notes.push(format!("loop stays {:.3} away", rep.min_halt_distance));
    Ok(notes.join("; "))
}

fn sink_certificate() -> Outcome {
    let erase = machines::erase();
    let xh = halting_point(&erase);
    let unit = full_field(&erase, 1.0);
    let a = unit.jacobian_at_halt();
    let err = (a.clone() + nalgebra::DMatrix::identity(7, 7)).amax();
    ensure(err <= 1e-9, || format!("|A + I| = {err:e}"))?;
    let top = a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    ensure(top <= -1.0 + 1e-9, || format!("largest eigenvalue real part {top}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = f64::from(erase.num_states());
    let mut worst: f64 = f64::NEG_INFINITY;
    for field in [unit, full_field(&erase, robust_c())] {
        for _ in 0..10_000 {
            let mut x: [f64; 7] = std::array::from_fn(|i| xh[i] + rng.gen_range(-0.25..=0.25));
            // gate saturated: the clock brake is fully on
            x[5] = rng.gen_range(m - 0.125..=m + 0.25);
            let mut f = [0.0; 7];
            field.eval(&x, &mut f);
            let d: Vec<f64> = (0..7).map(|i| x[i] - xh[i]).collect();
            let inner: f64 = (0..7).map(|i| f[i] * d[i]).sum();
            let norm2: f64 = d.iter().map(|v| v * v).sum();
            worst = worst.max(inner + norm2);
            ensure(inner <= -norm2 + 1e-12, || format!("<f(x), x - x_halt> = {inner} > -{norm2} at {x:?}"))?;
        }
    }
    Ok(format!("|A + I| = {err:.1e}, top eigenvalue {top}, max(<f,d> + |d|^2) = {worst:.3e}"))
}

fn perturbed_sink() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let erase = machines::erase();
    let xh = halting_point(&erase);
    let field = full_field(&erase, robust_c());
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let spec = match i % 3 {
            0 => PerturbationSpec::constant(1.0 / 16.0, 7),
            1 => PerturbationSpec::sinusoidal(1.0 / 32.0, 7),
            _ => PerturbationSpec::gaussian_tail(5.0, 7).with_center(xh.to_vec()),
        }
        .randomized(&mut rng, &[true; 7], 0.5);
        ensure(spec.c1_norm() <= 1.0 / 16.0, || format!("perturbation {i}: norm {}", spec.c1_norm()))?;
        let g = field.perturb(spec).map_err(|e| e.to_string())?;
        let sink = g.find_sink(&xh, 1e-12).map_err(|e| format!("perturbation {i}: {e}"))?;
        let shift = (0..7).map(|k| (sink.point[k] - xh[k]).abs()).fold(0.0, f64::max);
        worst = worst.max(shift);
        ensure(shift < 1.0 / 16.0, || format!("perturbation {i}: sink moved {shift}"))?;
        ensure(sink.real_parts.iter().all(|&r| r < 0.0), || format!("perturbation {i}: {:?}", sink.real_parts))?;
    }
    Ok(format!("20 sinks found, max shift {worst:.4} < 1/16"))
}

fn planar_vs_oracle() -> Outcome {
    const LEVEL: u32 = 8;
    const K: u32 = 8;
    const SNAP: f64 = 0.05;
    const T_ORACLE: f64 = 200.0;
    let cases = [(fields::f2(), 1usize), (fields::reversed_van_der_pol(1.0), 0), (fields::rotated_sink(), 0)];
    let mut notes = Vec::new();
    for (field, target) in cases {
        let rep = compute_basin(&field, target, &BasinOptions::new(K).with_level(LEVEL)).map_err(|e| e.to_string())?;
        let attractors: Vec<Attractor> = rep
            .inventory
            .sinks()
            .iter()
            .enumerate()
            .map(|(j, s)| Attractor::Point { sink: j, at: s.equilibrium })
            .collect();
        let oracle = brute_force_classify(&field, LEVEL, T_ORACLE, &attractors, SNAP, Some(target));
        let agree = rep.raster.agreement(&oracle).map_err(|e| e.to_string())?;
        let h = hausdorff(&rep.raster.target_complement(), &oracle.target_complement()).map_err(|e| e.to_string())?;
        let bound = 1.0 / f64::from(K) + rep.raster.cell_size() * std::f64::consts::SQRT_2;
        ensure(agree.fraction() >= 0.99, || format!("{}: agreement {:.4}", field.name(), agree.fraction()))?;
        ensure(h <= bound, || format!("{}: Hausdorff {h:.4} > {bound:.4}", field.name()))?;
        notes.push(format!("{} agree {:.4} H {h:.3}<={bound:.3}", field.name(), agree.fraction()));
    }
    Ok(notes.join("; "))
}

fn f2_report(field: &PlanarField) -> Result<BasinReport, String> {
    compute_basin(field, 1, &BasinOptions::new(8)).map_err(|e| e.to_string())
}

fn gamma_soundness() -> Outcome {
    const TUBE: f64 = 0.125;
    const ON_AXIS: f64 = 1e-2;
    let rep = f2_report(&fields::f2())?;
    ensure(!rep.gammas.is_empty(), || "no stable manifold traced".into())?;
    let off_axis = rep.gammas.iter().flatten().map(|p| p[0].abs()).fold(0.0, f64::max);
    ensure(off_axis <= ON_AXIS, || format!("Γ strays {off_axis:e} from x = 0"))?;
    let r = &rep.raster;
    let mut far_timeouts = 0;
    for (idx, &l) in r.labels.iter().enumerate() {
        let c = r.center(idx);
        if l == CellLabel::Unknown && rep.gammas.iter().all(|g| polyline_dist(c, g) > TUBE) {
            far_timeouts += 1;
        }
    }
    ensure(far_timeouts == 0, || format!("{far_timeouts} timeouts outside the Γ tube"))?;
    Ok(format!("|x| <= {off_axis:.1e} on Γ, {} timeouts in total, none outside the tube", rep.timeouts))
}

fn structural_stability() -> Outcome {
    const SINK_MOVE: f64 = 0.1;
    const BAND: f64 = 0.1;
    let f2 = fields::f2();
    let base = f2_report(&f2)?;
    let base_sinks: Vec<[f64; 2]> = base.inventory.sinks().iter().map(|s| s.equilibrium).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_move, mut changed, mut compared): (f64, usize, usize) = (0.0, 0, 0);
    for i in 0..10 {
        let spec = match i % 3 {
            0 => PerturbationSpec::constant(0.05, 2),
            1 => PerturbationSpec::sinusoidal(0.025, 2),
            _ => PerturbationSpec::gaussian_tail(4.5, 2),
        }
        .randomized(&mut rng, &[true; 2], 1.0);
        ensure(spec.c1_norm() <= 0.05, || format!("perturbation {i}: norm {}", spec.c1_norm()))?;
        let g = f2.clone().with_perturbation(spec).map_err(|e| e.to_string())?;
        let rep = f2_report(&g).map_err(|e| format!("perturbation {i}: {e}"))?;
        ensure(rep.inventory.psi_n() == 2, || format!("perturbation {i}: Ψ_N = {}", rep.inventory.psi_n()))?;
        for s in rep.inventory.sinks() {
            let moved = base_sinks
                .iter()
                .map(|b| (s.equilibrium[0] - b[0]).hypot(s.equilibrium[1] - b[1]))
                .fold(f64::INFINITY, f64::min);
            worst_move = worst_move.max(moved);
            ensure(moved < SINK_MOVE, || format!("perturbation {i}: a sink moved {moved}"))?;
        }
        for (idx, (&a, &b)) in base.raster.labels.iter().zip(&rep.raster.labels).enumerate() {
            if !(a.is_definite() && b.is_definite()) {
                continue;
            }
            compared += 1;
            if a != b {
                changed += 1;
                let c = base.raster.center(idx);
                let d = base.gammas.iter().map(|g| polyline_dist(c, g)).fold(f64::INFINITY, f64::min);
                ensure(d <= BAND, || format!("perturbation {i}: label change at {c:?}, {d:.3} from Γ"))?;
            }
        }
    }
    Ok(format!("Ψ_N = 2 throughout, sinks moved <= {worst_move:.4}, {changed} of {compared} definite labels changed"))
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { name: "discrete exactness", budget: secs(5), run: discrete_exactness },
        Criterion { name: "contraction", budget: secs(5), run: contraction },
        Criterion { name: "perturbed tracking", budget: secs(30), run: perturbed_tracking },
        Criterion { name: "halting correspondence", budget: secs(60), run: halting_correspondence },
        Criterion { name: "targeting bounds", budget: secs(10), run: targeting_bounds },
        Criterion { name: "ODE tracking", budget: secs(120), run: ode_tracking },
        Criterion { name: "sink certificate", budget: secs(10), run: sink_certificate },
        Criterion { name: "perturbed sink", budget: secs(30), run: perturbed_sink },
        Criterion { name: "planar basins vs oracle", budget: secs(300), run: planar_vs_oracle },
        Criterion { name: "Γ soundness", budget: secs(60), run: gamma_soundness },
        Criterion { name: "structural stability", budget: secs(300), run: structural_stability },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == id.to_string() || c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if took <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; over the time budget"))
            }
        });
        let time = format!("{:.1}s of {}s", took.as_secs_f64(), c.budget.as_secs());
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {}: {detail} ({time})", c.name),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {}: {detail} ({time})", c.name);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
