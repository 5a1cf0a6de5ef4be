//! Adaptive Dormand–Prince 5(4) integration with dense output and event
//! location, plus the perturbation families and flow-level diagnostics.
//!
//! Time-dependent systems are handled by the caller as autonomous systems
//! with time appended as a state component.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod analysis;
pub mod perturb;

pub use analysis::{divergence_bound, lipschitz_estimate, track_against_discrete, TrackingReport};
pub use perturb::{PerturbationKind, PerturbationSpec};

/// An autonomous vector field x′ = f(x).
pub trait VectorField: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], out: &mut [f64]);

    /// Jacobian Df(x); central differences unless overridden.
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut j = DMatrix::zeros(n, n);
        let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
        let mut xp = x.to_vec();
        for k in 0..n {
            let h = 1e-6 * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            self.eval(&xp, &mut fp);
            xp[k] = x[k] - h;
            self.eval(&xp, &mut fm);
            xp[k] = x[k];
            for i in 0..n {
                j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        j
    }
}

/// A field given by a closure, mostly for tests and small experiments.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Field with time reversed: x′ = −f(x).
pub struct Reversed<'a, F: ?Sized>(pub &'a F);

impl<F: VectorField + ?Sized> VectorField for Reversed<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.0.eval(x, out);
        for o in out {
            *o = -*o;
        }
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        -self.0.jacobian(x)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("step size {h:e} underflow at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("state left the admissible region at t = {t}")]
    RegionExit { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step allowed; also caps the first step.
    pub h_max: f64,
    pub max_steps: usize,
    /// Componentwise box |xᵢ| ≤ bound the state must stay in.
    pub region_bound: Option<f64>,
    /// Fixed step size (no error control) when set; used for order checks.
    pub fixed_step: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
            region_bound: None,
            fixed_step: None,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    pub fn with_region(mut self, bound: f64) -> Self {
        self.region_bound = Some(bound);
        self
    }
}

// Dormand–Prince 5(4) tableau; the nodes cᵢ are not needed for autonomous fields.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension of order 4
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Dense-output coefficients of one accepted step on [t0, t0 + h].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    coeffs: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> &[f64] {
        &self.coeffs[0]
    }

    /// State at time t ∈ [t0, t0 + h].
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.coeffs[0].len()];
        self.eval_into(t, &mut out);
        out
    }
}

/// What the observer asks the solver to do after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub t_end: f64,
}

/// Integrates from (t0, x0) up to `t_end`, calling `observer` on every
/// accepted step. Returns the final state and statistics.
pub fn solve(
    field: &(impl VectorField + ?Sized),
    x0: &[f64],
    t0: f64,
    t_end: f64,
    tol: &Tolerances,
    mut observer: impl FnMut(&DenseStep) -> Control,
) -> Result<(Vec<f64>, SolveStats), IntegratorError> {
    let n = field.dim();
    assert_eq!(x0.len(), n, "initial state has wrong dimension");
    let mut stats = SolveStats { accepted: 0, rejected: 0, evaluations: 0, t_end: t0 };
    let mut y = x0.to_vec();
    if t_end <= t0 {
        return Ok((y, stats));
    }
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    field.eval(&y, &mut k[0]);
    stats.evaluations += 1;
    let mut t = t0;
    let mut h = match tol.fixed_step {
        Some(h) => h,
        None => initial_step(field, &y, &k[0], tol, &mut stats),
    }
    .min(tol.h_max)
    .min(t_end - t0);
    let mut err_prev: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(IntegratorError::TooManySteps(tol.max_steps));
        }
        // absorb rounding slivers into the last step
        let final_step = t + h * (1.0 + 1e-9) >= t_end;
        if final_step {
            h = t_end - t;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(IntegratorError::StepUnderflow { t, h });
        }
        // stages 2..7
        let [k1, k2, k3, k4, k5, k6, k7] = &mut k;
        stage(&mut tmp, &y, h, &[(A21, &*k1)]);
        field.eval(&tmp, k2);
        stage(&mut tmp, &y, h, &[(A31, &*k1), (A32, &*k2)]);
        field.eval(&tmp, k3);
        stage(&mut tmp, &y, h, &[(A41, &*k1), (A42, &*k2), (A43, &*k3)]);
        field.eval(&tmp, k4);
        stage(&mut tmp, &y, h, &[(A51, &*k1), (A52, &*k2), (A53, &*k3), (A54, &*k4)]);
        field.eval(&tmp, k5);
        stage(
            &mut tmp,
            &y,
            h,
            &[(A61, &*k1), (A62, &*k2), (A63, &*k3), (A64, &*k4), (A65, &*k5)],
        );
        field.eval(&tmp, k6);
        stage(
            &mut y_new,
            &y,
            h,
            &[(A71, &*k1), (A73, &*k3), (A74, &*k4), (A75, &*k5), (A76, &*k6)],
        );
        field.eval(&y_new, k7);
        stats.evaluations += 6;

        let mut err_norm: f64 = 0.0;
        for i in 0..n {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            let ratio = err[i].abs() / sc;
            // f64::max would drop a NaN, so test it explicitly
            err_norm = if ratio.is_nan() { f64::INFINITY } else { err_norm.max(ratio) };
        }
        if !err_norm.is_finite() {
            if tol.fixed_step.is_some() {
                return Err(IntegratorError::NonFinite { t });
            }
            // overflow inside the step: treat as a hard rejection
            err_norm = 1e10;
        }

        let accept = tol.fixed_step.is_some() || err_norm <= 1.0;
        if accept {
            let mut coeffs: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                coeffs[0][i] = y[i];
                coeffs[1][i] = ydiff;
                coeffs[2][i] = bspl;
                coeffs[3][i] = ydiff - h * k7[i] - bspl;
                coeffs[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let step = DenseStep { t0: t, h, coeffs };
            t = if final_step { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(k1, k7);
            stats.accepted += 1;
            stats.t_end = t;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(IntegratorError::NonFinite { t });
            }
            if let Some(b) = tol.region_bound {
                if y.iter().any(|v| v.abs() > b) {
                    return Err(IntegratorError::RegionExit { t });
                }
            }
            if observer(&step) == Control::Stop || final_step {
                return Ok((y, stats));
            }
            if tol.fixed_step.is_none() {
                // PI step-size control
                let mut fac = 0.9 * err_norm.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                fac = fac.clamp(0.2, 10.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                h = (h * fac).min(tol.h_max);
                err_prev = err_norm.max(1e-4);
            }
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.1, 1.0);
            last_rejected = true;
        }
    }
}

#[inline]
fn stage(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]) {
    for i in 0..out.len() {
        let mut s = 0.0;
        for (a, k) in terms {
            s += a * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

/// Starting step size heuristic of Hairer, Nørsett and Wanner.
fn initial_step(
    field: &(impl VectorField + ?Sized),
    y: &[f64],
    f0: &[f64],
    tol: &Tolerances,
    stats: &mut SolveStats,
) -> f64 {
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| tol.atol + tol.rtol * v.abs()).collect();
    let norm = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    field.eval(&y1, &mut f1);
    stats.evaluations += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

/// Region-entry event: fires when `g(t, x)` becomes ≤ 0. If g ≤ 0 at the
/// initial point, it fires at the initial time.
pub struct Event<'a> {
    pub id: usize,
    pub g: Box<dyn Fn(f64, &[f64]) -> f64 + Sync + 'a>,
    /// Stop integration when this event fires.
    pub terminal: bool,
    /// Fire again after the trajectory leaves and re-enters the region.
    pub repeat: bool,
}

impl<'a> Event<'a> {
    pub fn new(id: usize, g: impl Fn(f64, &[f64]) -> f64 + Sync + 'a) -> Self {
        Self { id, g: Box::new(g), terminal: false, repeat: false }
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }

    pub fn repeating(mut self) -> Self {
        self.repeat = true;
        self
    }

    /// Entry into the closed max-norm ball B(center, radius) over the
    /// first `center.len()` components.
    pub fn enter_ball(id: usize, center: Vec<f64>, radius: f64) -> Self {
        Self::new(id, move |_, x| max_dist(x, &center) - radius)
    }

    /// Exit from the closed max-norm ball B(center, radius).
    pub fn exit_ball(id: usize, center: Vec<f64>, radius: f64) -> Self {
        Self::new(id, move |_, x| radius - max_dist(x, &center))
    }
}

/// Max-norm distance over the components of `c`.
pub fn max_dist(x: &[f64], c: &[f64]) -> f64 {
    c.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventHit {
    pub t: f64,
    pub id: usize,
    pub state: Vec<f64>,
}

/// Absolute accuracy of event times.
pub const EVENT_TIME_TOL: f64 = 1e-10;

/// Tracks event predicates across dense steps.
pub struct EventTracker<'e, 'a> {
    events: &'e [Event<'a>],
    inside: Vec<bool>,
    pub(crate) hits: Vec<EventHit>,
    stopped: bool,
}

impl<'e, 'a> EventTracker<'e, 'a> {
    pub fn new(events: &'e [Event<'a>], t0: f64, x0: &[f64]) -> Self {
        let mut tracker =
            Self { events, inside: vec![false; events.len()], hits: Vec::new(), stopped: false };
        for (i, ev) in events.iter().enumerate() {
            if (ev.g)(t0, x0) <= 0.0 {
                tracker.inside[i] = true;
                tracker.hits.push(EventHit { t: t0, id: ev.id, state: x0.to_vec() });
                tracker.stopped |= ev.terminal;
            }
        }
        tracker
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    pub fn into_hits(self) -> Vec<EventHit> {
        self.hits
    }

    /// Checks the step's end point and locates crossings by bisection on
    /// the dense output. Also samples the step interior so that brief
    /// excursions into a region are not missed.
    pub fn observe(&mut self, step: &DenseStep) -> Control {
        const INTERIOR_SAMPLES: usize = 4;
        let mut found: Vec<(f64, usize)> = Vec::new();
        for (i, ev) in self.events.iter().enumerate() {
            if self.inside[i] && !ev.repeat {
                continue;
            }
            let mut prev_t = step.t0;
            let mut prev_inside = self.inside[i];
            let mut entry = None;
            for s in 1..=INTERIOR_SAMPLES {
                let t = step.t0 + step.h * s as f64 / INTERIOR_SAMPLES as f64;
                let x = step.eval(t);
                let now_inside = (ev.g)(t, &x) <= 0.0;
                if !prev_inside && now_inside {
                    entry = Some(bisect(ev, step, prev_t, t));
                    break;
                }
                prev_inside = now_inside;
                prev_t = t;
            }
            match entry {
                Some(t) => found.push((t, i)),
                None => self.inside[i] = prev_inside,
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, i) in found {
            if self.stopped {
                break;
            }
            let ev = &self.events[i];
            self.inside[i] = true;
            self.hits.push(EventHit { t, id: ev.id, state: step.eval(t) });
            if ev.terminal {
                self.stopped = true;
            }
        }
        // refresh inside flags at the step end for repeating events
        for (i, ev) in self.events.iter().enumerate() {
            if ev.repeat {
                let x = step.eval(step.t1());
                self.inside[i] = (ev.g)(step.t1(), &x) <= 0.0;
            }
        }
        if self.stopped {
            Control::Stop
        } else {
            Control::Continue
        }
    }
}

fn bisect(ev: &Event<'_>, step: &DenseStep, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = vec![0.0; step.start().len()];
    while hi - lo > EVENT_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        step.eval_into(mid, &mut x);
        if (ev.g)(mid, &x) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Dense solution samples with event annotations.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub events: Vec<EventHit>,
    steps: Vec<DenseStep>,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has its initial point")
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has its initial point")
    }

    /// Interpolated state at time t within the integrated range.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        let first = *self.times.first()?;
        if t < first || t > self.t_end() {
            return None;
        }
        if self.steps.is_empty() {
            return Some(self.states[0].clone());
        }
        let idx = self.steps.partition_point(|s| s.t1() < t).min(self.steps.len() - 1);
        Some(self.steps[idx].eval(t))
    }

    pub fn first_event(&self, id: usize) -> Option<&EventHit> {
        self.events.iter().find(|e| e.id == id)
    }

    /// CSV with columns t, x1..xd, event (event id at event rows, empty
    /// otherwise). Event rows are merged in time order.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let d = self.states.first().map_or(0, Vec::len);
        let mut s = String::from("t");
        for i in 1..=d {
            let _ = write!(s, ",x{i}");
        }
        s.push_str(",event\n");
        let mut ev = self.events.iter().peekable();
        for (t, x) in self.times.iter().zip(&self.states) {
            while let Some(e) = ev.next_if(|e| e.t <= *t) {
                write_row(&mut s, e.t, &e.state, Some(e.id));
            }
            write_row(&mut s, *t, x, None);
        }
        for e in ev {
            write_row(&mut s, e.t, &e.state, Some(e.id));
        }
        s
    }
}

fn write_row(s: &mut String, t: f64, x: &[f64], id: Option<usize>) {
    use std::fmt::Write;
    let _ = write!(s, "{t:e}");
    for v in x {
        let _ = write!(s, ",{v:e}");
    }
    match id {
        Some(i) => {
            let _ = writeln!(s, ",{i}");
        }
        None => s.push_str(",\n"),
    }
}

/// Integrates over [0, T] and records every accepted step.
pub fn integrate(
    field: &(impl VectorField + ?Sized),
    x0: &[f64],
    t_final: f64,
    tol: &Tolerances,
) -> Result<Trajectory, IntegratorError> {
    integrate_with_events(field, x0, t_final, tol, &[])
}

/// Integrates over [0, T], recording steps and locating region-entry
/// events to within [`EVENT_TIME_TOL`]. A terminal event ends the run at
/// the event time.
pub fn integrate_with_events(
    field: &(impl VectorField + ?Sized),
    x0: &[f64],
    t_final: f64,
    tol: &Tolerances,
    events: &[Event<'_>],
) -> Result<Trajectory, IntegratorError> {
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        events: Vec::new(),
        steps: Vec::new(),
    };
    let mut tracker = EventTracker::new(events, 0.0, x0);
    if !tracker.stopped() {
        solve(field, x0, 0.0, t_final, tol, |step| {
            let ctl = tracker.observe(step);
            traj.times.push(step.t1());
            traj.states.push(step.eval(step.t1()));
            traj.steps.push(step.clone());
            ctl
        })?;
    }
    traj.events = tracker.into_hits();
    // a terminal event stops the solver on the step containing it; end the
    // samples at the event time instead of the step end
    if let Some(hit) = traj
        .events
        .iter()
        .find(|h| events.iter().any(|e| e.id == h.id && e.terminal))
    {
        if traj.times.len() > 1 {
            traj.times.pop();
            traj.states.pop();
        } else {
            traj.times.clear();
            traj.states.clear();
        }
        traj.times.push(hit.t);
        traj.states.push(hit.state.clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> FnField<impl Fn(&[f64], &mut [f64]) + Sync> {
        FnField { dim: 1, f: |x: &[f64], o: &mut [f64]| o[0] = -x[0] }
    }

    #[test]
    fn exponential_decay() {
        let tr = integrate(&decay(), &[1.0], 1.0, &Tolerances::new(1e-10, 1e-10)).unwrap();
        assert!((tr.last_state()[0] - (-1.0f64).exp()).abs() < 1e-8);
        assert_eq!(tr.t_end(), 1.0);
        // dense output between samples
        let mid = tr.at(0.37).unwrap()[0];
        assert!((mid - (-0.37f64).exp()).abs() < 1e-8);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn fixed_step_order() {
        let err = |h: f64| {
            let tol = Tolerances { fixed_step: Some(h), ..Tolerances::default() };
            let (y, _) = solve(&decay(), &[1.0], 0.0, 1.0, &tol, |_| Control::Continue).unwrap();
            (y[0] - (-1.0f64).exp()).abs()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 > 25.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn event_at_start_and_crossing() {
        let f = decay();
        let tol = Tolerances::new(1e-10, 1e-10);
        let ev = [Event::enter_ball(0, vec![0.0], 2.0)];
        let tr = integrate_with_events(&f, &[1.0], 1.0, &tol, &ev).unwrap();
        assert_eq!(tr.events[0].t, 0.0);

        let ev = [Event::enter_ball(1, vec![0.0], 0.5).terminal()];
        let tr = integrate_with_events(&f, &[1.0], 5.0, &tol, &ev).unwrap();
        let t = tr.first_event(1).unwrap().t;
        assert!((t - 2.0f64.ln()).abs() < 1e-8);
        assert!((tr.t_end() - t).abs() < 1e-15);
    }

    #[test]
    fn region_exit_and_underflow() {
        let blowup = FnField { dim: 1, f: |x: &[f64], o: &mut [f64]| o[0] = x[0] * x[0] };
        let tol = Tolerances::new(1e-8, 1e-8).with_region(1e6);
        let r = integrate(&blowup, &[1.0], 2.0, &tol);
        assert!(matches!(r, Err(IntegratorError::RegionExit { .. })));
        let tol = Tolerances::new(1e-8, 1e-8);
        let r = integrate(&blowup, &[1.0], 2.0, &tol);
        assert!(r.is_err());
    }
}
