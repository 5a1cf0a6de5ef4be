//! Forward classification of points and backward tracing of stable
//! manifolds.

use serde::Serialize;

use super::{
    annulus::CycleKind,
    inventory::{EquilibriumKind, Inventory},
    PlanarError, PlanarField,
};
use crate::integrator::{solve, Control, DenseStep, Reversed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Entered the target sink's trap.
    StatusI,
    /// Entered the trap of sink j (index into [`Inventory::sinks`]).
    StatusII(usize),
    /// Entered the trapping annulus of attracting cycle i (index into
    /// [`Inventory::annuli`]).
    StatusIII(usize),
    /// Left the disk.
    Escaped,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub status: Status,
    pub t: f64,
}

fn status_at(x: [f64; 2], inv: &Inventory, target: usize) -> Option<Status> {
    let sinks = inv.sinks();
    if sinks[target].trap.is_some_and(|t| t.contains(x)) {
        return Some(Status::StatusI);
    }
    for (j, s) in sinks.iter().enumerate() {
        if j != target && s.trap.is_some_and(|t| t.contains(x)) {
            return Some(Status::StatusII(j));
        }
    }
    for (i, a) in inv.annuli.iter().enumerate() {
        if a.kind == CycleKind::Attracting && a.contains(x) {
            return Some(Status::StatusIII(i));
        }
    }
    (x[0].hypot(x[1]) > inv.radius).then_some(Status::Escaped)
}

/// Integrates forward from x until it enters a trapping region, leaves
/// the disk, or `t_max` elapses. Traps are disjoint and invariant, so the
/// first region entered decides the status.
pub fn classify_point(
    x: [f64; 2],
    inv: &Inventory,
    field: &PlanarField,
    t_max: f64,
    target: usize,
) -> Result<Classification, PlanarError> {
    let count = inv.sinks().len();
    if target >= count {
        return Err(PlanarError::BadSink { index: target, count });
    }
    if let Some(status) = status_at(x, inv, target) {
        return Ok(Classification { status, t: 0.0 });
    }
    let mut found = None;
    solve(field, &x, 0.0, t_max, &field.tolerances(), |step: &DenseStep| {
        const SUBSAMPLES: usize = 4;
        for s in 1..=SUBSAMPLES {
            let t = step.t0 + step.h * s as f64 / SUBSAMPLES as f64;
            let y = step.eval(t);
            if let Some(status) = status_at([y[0], y[1]], inv, target) {
                found = Some(Classification { status, t });
                return Control::Stop;
            }
        }
        Control::Continue
    })?;
    Ok(found.unwrap_or(Classification { status: Status::Timeout, t: t_max }))
}

/// Offset of the seeds from the saddle along its stable eigenvector.
pub const MANIFOLD_SEED_OFFSET: f64 = 1e-4;

/// The stable manifold of saddle `saddle` (index into
/// [`Inventory::equilibria`]) as a polyline: both branches are traced by
/// backward integration for time `t` or until they leave the disk or
/// enter B.
pub fn stable_manifold_curve(
    saddle: usize,
    inv: &Inventory,
    field: &PlanarField,
    t: f64,
) -> Result<Vec<[f64; 2]>, PlanarError> {
    let sb = &inv.equilibria[saddle];
    if sb.kind != EquilibriumKind::Saddle {
        return Err(PlanarError::NotASaddle);
    }
    let v = sb.eigen.stable_dir.ok_or(PlanarError::NotASaddle)?;
    let e = sb.equilibrium;
    let mut branches = Vec::with_capacity(2);
    for sign in [-1.0, 1.0] {
        let z = [e[0] + sign * MANIFOLD_SEED_OFFSET * v[0], e[1] + sign * MANIFOLD_SEED_OFFSET * v[1]];
        branches.push(backward_branch(z, saddle, inv, field, t)?);
    }
    let mut curve: Vec<[f64; 2]> = branches[0].iter().rev().copied().collect();
    curve.push(e);
    curve.extend_from_slice(&branches[1]);
    Ok(curve)
}

fn backward_branch(
    z: [f64; 2],
    saddle: usize,
    inv: &Inventory,
    field: &PlanarField,
    t: f64,
) -> Result<Vec<[f64; 2]>, PlanarError> {
    let r = inv.radius;
    let mut pts = vec![z];
    let mut outcome = Ok(());
    let tol = field.tolerances().with_h_max(0.05);
    solve(&Reversed(field), &z, 0.0, t, &tol, |step| {
        let y = step.eval(step.t1());
        let p = [y[0], y[1]];
        if p[0].hypot(p[1]) > r {
            // clip to the boundary circle on the dense output
            let (mut lo, mut hi) = (step.t0, step.t1());
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let m = step.eval(mid);
                if m[0].hypot(m[1]) > r {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let b = step.eval(lo);
            pts.push([b[0], b[1]]);
            return Control::Stop;
        }
        pts.push(p);
        if inv.in_b(p) {
            return Control::Stop;
        }
        for (k, other) in inv.equilibria.iter().enumerate() {
            if k != saddle && other.kind == EquilibriumKind::Saddle && other.in_box(p) {
                outcome = Err(PlanarError::SaddleConnectionSuspected { from: saddle, to: k });
                return Control::Stop;
            }
        }
        Control::Continue
    })?;
    outcome.map(|()| pts)
}
