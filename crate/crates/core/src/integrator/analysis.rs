//! Flow-level diagnostics: Lipschitz estimates, the divergence bound
//! ‖φ_t(x) − φ_t(y)‖ ≤ ‖x − y‖·e^{Lt}, and tracking of the 7-D flow against
//! the discrete machine orbit.

use serde::Serialize;

use super::perturb::row_sum_norm;
use super::{max_dist, solve, Control, Event, EventTracker, IntegratorError, Tolerances, VectorField};
use crate::ode_system::{halting_point, Field, Stage};
use crate::tm::TuringMachine;

/// Sup of ‖Df‖ (max-row-sum norm) over the box [lo, hi], sampled on a grid
/// with `n` points per axis and padded by the observed variation of ‖Df‖
/// between neighbouring nodes (any point is within half a cell of a node).
pub fn lipschitz_estimate(field: &(impl VectorField + ?Sized), lo: &[f64], hi: &[f64], n: usize) -> f64 {
    let d = lo.len();
    assert!(n >= 2 && hi.len() == d && field.dim() == d);
    let total = n.pow(d as u32);
    let spacing: Vec<f64> = (0..d).map(|i| (hi[i] - lo[i]) / (n - 1) as f64).collect();
    let node = |mut idx: usize| -> Vec<f64> {
        let mut p = vec![0.0; d];
        for i in 0..d {
            p[i] = lo[i] + spacing[i] * (idx % n) as f64;
            idx /= n;
        }
        p
    };
    let norms: Vec<f64> = (0..total).map(|k| row_sum_norm(&field.jacobian(&node(k)))).collect();
    let sup = norms.iter().copied().fold(0.0, f64::max);
    // variation of ‖Df‖ along each axis per cell
    let mut variation: f64 = 0.0;
    let mut stride = 1;
    for _ in 0..d {
        for k in 0..total {
            if (k / stride) % n + 1 < n {
                variation = variation.max((norms[k + stride] - norms[k]).abs());
            }
        }
        stride *= n;
    }
    // half a cell in every axis, doubled for safety
    sup + variation * d as f64
}

/// ‖x − y‖∞·e^{Lt}.
pub fn divergence_bound_with(l: f64, x: &[f64], y: &[f64], t: f64) -> f64 {
    let dist = max_dist(x, y);
    if dist == 0.0 {
        return 0.0;
    }
    dist * (l * t).exp()
}

/// Divergence bound with L estimated on the box [lo, hi].
pub fn divergence_bound(
    field: &(impl VectorField + ?Sized),
    lo: &[f64],
    hi: &[f64],
    x: &[f64],
    y: &[f64],
    t: f64,
) -> f64 {
    divergence_bound_with(lipschitz_estimate(field, lo, hi, 9), x, y, t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingReport {
    /// (k, ‖(v₁,v₂,v₃)(z = k) − f_M^[k](0,w,1)‖∞) at each clock-integer time
    /// reached before the halting step.
    pub deviations: Vec<(u64, f64)>,
    pub max_deviation: f64,
    /// Steps the machine needed; `None` if it did not halt within `k_max`.
    pub steps_to_halt: Option<u64>,
    /// First time the flow entered B(x_halt, entry_radius).
    pub entry_time: Option<f64>,
    /// Largest distance to x_halt after the entry time.
    pub max_after_entry: f64,
    /// Closest approach to x_halt over the whole run.
    pub min_halt_distance: f64,
    pub t_end: f64,
}

/// Step cap for gated fields. Between gate windows the field can vanish
/// identically, and without a cap the controller grows steps large enough
/// to jump over a whole active window.
pub const GATED_H_MAX: f64 = 1.0 / 32.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingOptions {
    /// Added to every component of (0,w,1,0,w,1,0) at the start.
    pub offset: [f64; 7],
    pub entry_radius: f64,
    /// Time integrated after entering the ball, to check it stays there.
    pub dwell: f64,
    /// Hard cap on integration time.
    pub t_max: f64,
    pub tol: Tolerances,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self {
            offset: [0.0; 7],
            entry_radius: 0.125,
            dwell: 4.0,
            t_max: 200.0,
            tol: Tolerances::new(1e-9, 1e-9).with_h_max(GATED_H_MAX),
        }
    }
}

/// Runs the full-stage flow from the encoding of input `w` and compares
/// the v-block with the machine orbit whenever the clock z crosses an
/// integer k below the halting step (or k_max). The halting step itself
/// is checked through entry into the ball around x_halt, since the clock
/// stops advancing once the halting state is written.
pub fn track_against_discrete(
    field: &Field,
    machine: &TuringMachine,
    w: u64,
    k_max: u64,
    opts: &TrackingOptions,
) -> Result<TrackingReport, IntegratorError> {
    assert_eq!(field.stage(), Stage::Full, "tracking needs the full stage");
    let oracle = machine.run(w, k_max);
    let steps_to_halt = oracle.halted.then_some(oracle.steps_used);
    let last_k = steps_to_halt.map_or(k_max, |s| s.saturating_sub(1));
    let orbit = machine.orbit(&machine.encode_input(w), last_k as usize);
    let exact: Vec<[f64; 3]> = orbit
        .iter()
        .map(|c| c.to_f64().expect("orbit fits in f64"))
        .collect();

    let wf = w as f64;
    let base = [0.0, wf, 1.0, 0.0, wf, 1.0, 0.0];
    let x0: Vec<f64> = (0..7).map(|i| base[i] + opts.offset[i]).collect();
    let xh = halting_point(machine).to_vec();

    let mut events: Vec<Event<'_>> = (1..=last_k)
        .map(|k| Event::new(k as usize, move |_, x: &[f64]| k as f64 - x[6]))
        .collect();
    const ENTRY: usize = usize::MAX;
    events.push(Event::enter_ball(ENTRY, xh.clone(), opts.entry_radius));

    let dev_at = |k: usize, x: &[f64]| -> f64 {
        (0..3).map(|i| (x[3 + i] - exact[k][i]).abs()).fold(0.0, f64::max)
    };
    let mut deviations = vec![(0, dev_at(0, &x0))];
    let mut tracker = EventTracker::new(&events, 0.0, &x0);
    let mut entry_time = None;
    let mut min_halt_distance = max_dist(&x0, &xh);
    let mut max_after_entry: f64 = 0.0;
    let mut seen_hits = 0;
    let mut absorb = |tracker: &EventTracker<'_, '_>, entry_time: &mut Option<f64>| {
        for hit in &tracker.hits[seen_hits..] {
            if hit.id == ENTRY {
                entry_time.get_or_insert(hit.t);
            } else {
                deviations.push((hit.id as u64, dev_at(hit.id, &hit.state)));
            }
        }
        seen_hits = tracker.hits.len();
    };
    absorb(&tracker, &mut entry_time);

    let t_max = opts.t_max;
    let (_, stats) = solve(field, &x0, 0.0, t_max, &opts.tol, |step| {
        tracker.observe(step);
        absorb(&tracker, &mut entry_time);
        let end = step.eval(step.t1());
        let dist = max_dist(&end, &xh);
        min_halt_distance = min_halt_distance.min(dist);
        match entry_time {
            Some(te) => {
                max_after_entry = max_after_entry.max(dist);
                if step.t1() >= te + opts.dwell {
                    return Control::Stop;
                }
                Control::Continue
            }
            None => Control::Continue,
        }
    })?;
    let max_deviation = deviations.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(TrackingReport {
        deviations,
        max_deviation,
        steps_to_halt,
        entry_time,
        max_after_entry,
        min_halt_distance,
        t_end: stats.t_end,
    })
}
