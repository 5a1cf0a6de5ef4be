//! Periodic orbits located from hints by Poincaré return-map bisection.

use serde::{Deserialize, Serialize};

use super::{dist, in_polygon, polyline_dist, wrap_angle, PlanarError, PlanarField};
use crate::integrator::{solve, Control, Reversed, VectorField};

/// A radial section {center + r(cos a, sin a) : r_in ≤ r ≤ r_out} that the
/// orbit is expected to cross exactly once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusHint {
    pub center: [f64; 2],
    #[serde(default)]
    pub angle: f64,
    pub r_in: f64,
    pub r_out: f64,
}

impl AnnulusHint {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.r_in > 0.0 && self.r_in < self.r_out && self.r_out.is_finite()) {
            return Err(format!("hint radii must satisfy 0 < r_in < r_out, got [{}, {}]", self.r_in, self.r_out));
        }
        Ok(())
    }

    pub fn section_point(&self, r: f64) -> [f64; 2] {
        [self.center[0] + r * self.angle.cos(), self.center[1] + r * self.angle.sin()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleKind {
    Attracting,
    Repelling,
}

/// A trapping annulus around one periodic orbit. IB and OB are closed
/// polygons, each an orbit arc of one revolution closed by a piece of the
/// section, so the region between them is invariant under the flow in
/// the direction in which the cycle attracts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicAnnulus {
    pub hint: AnnulusHint,
    pub kind: CycleKind,
    /// Where the orbit crosses the section, as a distance from the center.
    pub section_radius: f64,
    /// Derivative of the forward return map at the fixed point.
    pub return_derivative: f64,
    pub period: f64,
    pub inner: Vec<[f64; 2]>,
    pub outer: Vec<[f64; 2]>,
    pub margin: f64,
}

impl PeriodicAnnulus {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        in_polygon(x, &self.outer) && !in_polygon(x, &self.inner)
    }

    pub fn boundary_dist(&self, x: [f64; 2]) -> f64 {
        closed_dist(x, &self.inner).min(closed_dist(x, &self.outer))
    }

    pub fn orbit_point(&self) -> [f64; 2] {
        self.hint.section_point(self.section_radius)
    }
}

fn closed_dist(x: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    let mut d = polyline_dist(x, poly);
    if let (Some(a), Some(b)) = (poly.first(), poly.last()) {
        d = d.min(super::seg_dist(x, *b, *a));
    }
    d
}

struct Return {
    r: f64,
    t: f64,
    path: Vec<[f64; 2]>,
}

const RETURN_T_MAX: f64 = 100.0;

/// Largest distance, along the section, from the orbit to IB or OB. A
/// thin annulus keeps B close to the repelling orbits it stands for.
pub const ANNULUS_HALF_WIDTH: f64 = 1.0 / 64.0;
const SUBSAMPLES: usize = 8;

/// First return to the section after one full revolution around the
/// hint center, integrating forward or backward.
fn first_return(field: &PlanarField, hint: &AnnulusHint, r: f64, backward: bool) -> Option<Return> {
    if backward {
        return_along(&Reversed(field), field.radius(), hint, r)
    } else {
        return_along(field, field.radius(), hint, r)
    }
}

fn return_along(
    f: &impl VectorField,
    radius: f64,
    hint: &AnnulusHint,
    r: f64,
) -> Option<Return> {
    let c = hint.center;
    let angle = |x: &[f64]| (x[1] - c[1]).atan2(x[0] - c[0]);
    let x0 = hint.section_point(r);
    let mut path = vec![x0];
    let mut acc = 0.0;
    let mut prev_ang = hint.angle;
    let mut prev_t = 0.0;
    let mut out = None;
    let escape = 4.0 * radius;
    let tol = crate::integrator::Tolerances::new(1e-10, 1e-12).with_h_max(0.1);
    let run = solve(f, &x0, 0.0, RETURN_T_MAX, &tol, |step| {
        for s in 1..=SUBSAMPLES {
            let t = step.t0 + step.h * s as f64 / SUBSAMPLES as f64;
            let x = step.eval(t);
            if x[0].hypot(x[1]) > escape {
                return Control::Stop;
            }
            let d = wrap_angle(angle(&x) - prev_ang);
            if (acc + d).abs() >= std::f64::consts::TAU {
                let (base, from) = (acc, prev_ang);
                let excess = |tau: f64| {
                    let y = step.eval(tau);
                    (base + wrap_angle(angle(&y) - from)).abs() - std::f64::consts::TAU
                };
                let (mut lo, mut hi) = (prev_t, t);
                while hi - lo > 1e-13 * (1.0 + hi.abs()) {
                    let mid = 0.5 * (lo + hi);
                    if excess(mid) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let y = step.eval(hi);
                let hit = [y[0], y[1]];
                path.push(hit);
                out = Some((dist(hit, c), hi));
                return Control::Stop;
            }
            acc += d;
            prev_ang = angle(&x);
            prev_t = t;
            path.push([x[0], x[1]]);
        }
        Control::Continue
    });
    run.ok()?;
    let (r, t) = out?;
    Some(Return { r, t, path })
}

/// Refines each hint to a periodic orbit and builds its trapping annulus.
pub fn locate_periodic_annuli(
    field: &PlanarField,
    hints: &[AnnulusHint],
) -> Result<Vec<PeriodicAnnulus>, PlanarError> {
    hints.iter().enumerate().map(|(i, h)| locate_one(field, i, h)).collect()
}

fn locate_one(
    field: &PlanarField,
    idx: usize,
    hint: &AnnulusHint,
) -> Result<PeriodicAnnulus, PlanarError> {
    const SAMPLES: usize = 9;
    let no_orbit = PlanarError::NoOrbitInHint { hint: idx };
    let rs: Vec<f64> = (0..SAMPLES)
        .map(|i| hint.r_in + (hint.r_out - hint.r_in) * i as f64 / (SAMPLES - 1) as f64)
        .collect();
    // a repelling cycle may send outer points to infinity forward in time,
    // so fall back to the reversed flow, where it attracts
    for backward in [false, true] {
        let disp = |r: f64| first_return(field, hint, r, backward).map(|ret| ret.r - r);
        let Some(d) = rs.iter().map(|&r| disp(r)).collect::<Option<Vec<f64>>>() else {
            continue;
        };
        let brackets: Vec<usize> =
            (0..SAMPLES - 1).filter(|&i| (d[i] > 0.0) != (d[i + 1] > 0.0)).collect();
        match brackets.len() {
            0 => return Err(no_orbit),
            1 => {}
            n => return Err(PlanarError::AmbiguousHint { hint: idx, crossings: n }),
        }
        let (mut lo, mut hi) = (rs[brackets[0]], rs[brackets[0] + 1]);
        let lo_positive = d[brackets[0]] > 0.0;
        while hi - lo > 1e-11 {
            let mid = 0.5 * (lo + hi);
            let dm = disp(mid).ok_or(no_orbit.clone())?;
            if (dm > 0.0) == lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r_star = 0.5 * (lo + hi);
        let h = 1e-5;
        let p_plus = first_return(field, hint, r_star + h, backward).ok_or(no_orbit.clone())?;
        let p_minus = first_return(field, hint, r_star - h, backward).ok_or(no_orbit.clone())?;
        let deriv = (p_plus.r - p_minus.r) / (2.0 * h);
        let forward_deriv = if backward { 1.0 / deriv } else { deriv };
        let kind = if forward_deriv < 1.0 { CycleKind::Attracting } else { CycleKind::Repelling };
        let period = first_return(field, hint, r_star, backward).ok_or(no_orbit.clone())?.t;

        let attract_backward = kind == CycleKind::Repelling;
        let delta = (0.25 * (r_star - hint.r_in).min(hint.r_out - r_star)).min(ANNULUS_HALF_WIDTH);
        let outer = first_return(field, hint, r_star + delta, attract_backward)
            .ok_or(no_orbit.clone())?
            .path;
        let inner = first_return(field, hint, r_star - delta, attract_backward)
            .ok_or(no_orbit.clone())?
            .path;
        let margin = inner
            .iter()
            .map(|p| closed_dist(*p, &outer))
            .chain(outer.iter().map(|p| closed_dist(*p, &inner)))
            .fold(f64::INFINITY, f64::min);
        return Ok(PeriodicAnnulus {
            hint: *hint,
            kind,
            section_radius: r_star,
            return_derivative: forward_deriv,
            period,
            inner,
            outer,
            margin,
        });
    }
    Err(no_orbit)
}

#[cfg(test)]
mod tests {
    use super::super::catalog;
    use super::*;

    #[test]
    fn van_der_pol_cycle_attracts() {
        let f = catalog::van_der_pol(1.0);
        let a = locate_periodic_annuli(&f, f.hints()).unwrap();
        assert_eq!(a.len(), 1);
        let a = &a[0];
        assert_eq!(a.kind, CycleKind::Attracting);
        assert!(a.return_derivative < 1.0 && a.return_derivative > 0.0);
        // classical values for μ = 1: amplitude 2.0086, period 6.6633
        assert!((a.section_radius - 2.008_62).abs() < 1e-4, "{}", a.section_radius);
        assert!((a.period - 6.663_29).abs() < 1e-3, "{}", a.period);
        assert!(a.margin > 0.0);
        assert!(a.contains(a.orbit_point()));
        assert!(!a.contains([0.0, 0.0]));
    }

    #[test]
    fn reversal_swaps_stability() {
        let fwd = locate_periodic_annuli(&catalog::van_der_pol(1.0), catalog::van_der_pol(1.0).hints())
            .unwrap();
        let f = catalog::reversed_van_der_pol(1.0);
        let rev = locate_periodic_annuli(&f, f.hints()).unwrap();
        assert_eq!(rev[0].kind, CycleKind::Repelling);
        assert!(rev[0].return_derivative > 1.0);
        assert!((rev[0].section_radius - fwd[0].section_radius).abs() < 1e-8);
        assert!((rev[0].return_derivative * fwd[0].return_derivative - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gradient_and_spiral_fields_have_no_cycles() {
        assert!(locate_periodic_annuli(&catalog::f2(), &[]).unwrap().is_empty());
        let hint = AnnulusHint { center: [0.0, 0.0], angle: 0.0, r_in: 0.5, r_out: 1.5 };
        assert!(matches!(
            locate_periodic_annuli(&catalog::rotated_sink(), &[hint]),
            Err(PlanarError::NoOrbitInHint { hint: 0 })
        ));
    }
}
