//! Hyperbolic equilibria with certified boxes.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::Serialize;

use super::{
    annulus::{locate_periodic_annuli, CycleKind, PeriodicAnnulus},
    dist, PlanarError, PlanarField,
};

/// Hyperbolicity threshold on |Re λ|.
pub const TOL_HYP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Sink,
    Source,
    Saddle,
}

/// Eigenvalues of Df at an equilibrium, with real eigenvectors for saddles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigen {
    pub re: [f64; 2],
    pub im: [f64; 2],
    pub stable_dir: Option<[f64; 2]>,
    pub unstable_dir: Option<[f64; 2]>,
}

impl Eigen {
    pub fn of(j: [[f64; 2]; 2]) -> Self {
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let disc = 0.25 * tr * tr - det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let (l1, l2) = (0.5 * tr - s, 0.5 * tr + s);
            let mut e = Self { re: [l1, l2], im: [0.0; 2], stable_dir: None, unstable_dir: None };
            if l1 < 0.0 && l2 > 0.0 {
                e.stable_dir = Some(eigenvector(j, l1));
                e.unstable_dir = Some(eigenvector(j, l2));
            }
            e
        } else {
            let s = (-disc).sqrt();
            Self { re: [0.5 * tr; 2], im: [-s, s], stable_dir: None, unstable_dir: None }
        }
    }

    pub fn min_abs_re(&self) -> f64 {
        self.re[0].abs().min(self.re[1].abs())
    }

    fn kind(&self) -> EquilibriumKind {
        match (self.re[0] < 0.0, self.re[1] < 0.0) {
            (true, true) => EquilibriumKind::Sink,
            (false, false) => EquilibriumKind::Source,
            _ => EquilibriumKind::Saddle,
        }
    }
}

fn eigenvector(j: [[f64; 2]; 2], l: f64) -> [f64; 2] {
    let a = [j[0][1], l - j[0][0]];
    let b = [l - j[1][1], j[1][0]];
    let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// The sublevel set {x : (x − c)ᵀP(x − c) ≤ level}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub p: [[f64; 2]; 2],
    pub level: f64,
}

impl Ellipse {
    pub fn value(&self, x: [f64; 2]) -> f64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        self.p[0][0] * d[0] * d[0] + 2.0 * self.p[0][1] * d[0] * d[1] + self.p[1][1] * d[1] * d[1]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.value(x) <= self.level
    }

    /// Boundary point at parameter θ of the ellipse scaled to `level`.
    fn point_at(&self, level: f64, th: f64) -> [f64; 2] {
        // P = LLᵀ, x − c = √level · L⁻ᵀ(cos θ, sin θ)
        let l11 = self.p[0][0].sqrt();
        let l21 = self.p[0][1] / l11;
        let l22 = (self.p[1][1] - l21 * l21).sqrt();
        let (u0, u1) = (th.cos(), th.sin());
        let y1 = u1 / l22;
        let y0 = (u0 - l21 * y1) / l11;
        let s = level.sqrt();
        [self.center[0] + s * y0, self.center[1] + s * y1]
    }

    pub fn boundary(&self, n: usize) -> Vec<[f64; 2]> {
        (0..=n)
            .map(|i| self.point_at(self.level, std::f64::consts::TAU * i as f64 / n as f64))
            .collect()
    }

    /// Half-widths of the bounding box.
    pub fn extents(&self) -> [f64; 2] {
        let det = self.p[0][0] * self.p[1][1] - self.p[0][1] * self.p[0][1];
        [(self.level * self.p[1][1] / det).sqrt(), (self.level * self.p[0][0] / det).sqrt()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumBox {
    pub center: [f64; 2],
    /// Side of the square on which f is injective, so that it holds no
    /// other equilibrium.
    pub side: f64,
    pub kind: EquilibriumKind,
    pub equilibrium: [f64; 2],
    pub eigen: Eigen,
    /// Certified Lyapunov ellipse: forward invariant for sinks, backward
    /// invariant for sources.
    pub trap: Option<Ellipse>,
}

impl EquilibriumBox {
    pub fn in_box(&self, x: [f64; 2]) -> bool {
        let h = 0.5 * self.side;
        (x[0] - self.center[0]).abs() <= h && (x[1] - self.center[1]).abs() <= h
    }
}

/// Everything the classifier needs to know about the field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inventory {
    pub radius: f64,
    pub equilibria: Vec<EquilibriumBox>,
    pub annuli: Vec<PeriodicAnnulus>,
}

impl Inventory {
    /// Equilibria from a `seed_resolution`² Newton grid plus the annuli of
    /// the field's hints.
    pub fn build(field: &PlanarField, seed_resolution: usize) -> Result<Self, PlanarError> {
        let equilibria = find_equilibria(field, seed_resolution)?;
        let annuli = locate_periodic_annuli(field, field.hints())?;
        Ok(Self { radius: field.radius(), equilibria, annuli })
    }

    pub fn sinks(&self) -> Vec<&EquilibriumBox> {
        self.of_kind(EquilibriumKind::Sink)
    }

    pub fn saddles(&self) -> Vec<&EquilibriumBox> {
        self.of_kind(EquilibriumKind::Saddle)
    }

    fn of_kind(&self, kind: EquilibriumKind) -> Vec<&EquilibriumBox> {
        self.equilibria.iter().filter(|e| e.kind == kind).collect()
    }

    /// Number of sinks.
    pub fn psi_n(&self) -> usize {
        self.sinks().len()
    }

    /// Membership in B: source traps and repelling annuli.
    pub fn in_b(&self, x: [f64; 2]) -> bool {
        self.equilibria
            .iter()
            .filter(|e| e.kind == EquilibriumKind::Source)
            .any(|e| e.trap.is_some_and(|t| t.contains(x)))
            || self
                .annuli
                .iter()
                .filter(|a| a.kind == CycleKind::Repelling)
                .any(|a| a.contains(x))
    }

    /// Closed polylines bounding the components of B.
    pub fn b_boundaries(&self) -> Vec<Vec<[f64; 2]>> {
        let mut out = Vec::new();
        for e in &self.equilibria {
            if let (EquilibriumKind::Source, Some(t)) = (e.kind, e.trap) {
                out.push(t.boundary(180));
            }
        }
        for a in self.annuli.iter().filter(|a| a.kind == CycleKind::Repelling) {
            for curve in [&a.inner, &a.outer] {
                let mut c = curve.clone();
                c.extend(curve.first().copied());
                out.push(c);
            }
        }
        out
    }
}

fn mat(j: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1])
}

fn row_sum(m: &Matrix2<f64>) -> f64 {
    (m[(0, 0)].abs() + m[(0, 1)].abs()).max(m[(1, 0)].abs() + m[(1, 1)].abs())
}

/// Damped Newton iteration for f(x) = 0.
fn newton(field: &PlanarField, mut x: [f64; 2]) -> Option<[f64; 2]> {
    let norm = |f: [f64; 2]| f[0].abs().max(f[1].abs());
    let mut f = field.at(x);
    for _ in 0..80 {
        let inv = mat(field.jacobian_at(x)).try_inverse()?;
        let step = inv * nalgebra::Vector2::new(f[0], f[1]);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let y = [x[0] - t * step[0], x[1] - t * step[1]];
            let fy = field.at(y);
            if norm(fy) < norm(f) || norm(f) == 0.0 {
                x = y;
                f = fy;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let scale = 1.0 + x[0].abs().max(x[1].abs());
        if !x[0].is_finite() || !x[1].is_finite() || scale > 1e6 {
            return None;
        }
        if step.norm() * t < 1e-14 * scale || norm(f) < 1e-15 {
            return (norm(f) < 1e-10).then_some(x);
        }
        if !accepted {
            return (norm(f) < 1e-10).then_some(x);
        }
    }
    (norm(f) < 1e-10).then_some(x)
}

/// Multi-start Newton from a `seed_resolution`² grid over the disk, then
/// eigenvalue classification and box certification. Equilibria are
/// sorted by (x, y).
pub fn find_equilibria(
    field: &PlanarField,
    seed_resolution: usize,
) -> Result<Vec<EquilibriumBox>, PlanarError> {
    let r = field.radius();
    let n = seed_resolution.max(2);
    let h = 2.0 * r / n as f64;
    let mut zeros: Vec<[f64; 2]> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let seed = [-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h];
            if seed[0].hypot(seed[1]) > r {
                continue;
            }
            if let Some(z) = newton(field, seed) {
                if z[0].hypot(z[1]) < r && zeros.iter().all(|w| dist(*w, z) > 1e-6) {
                    zeros.push(z);
                }
            }
        }
    }
    zeros.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));

    let mut boxes = Vec::with_capacity(zeros.len());
    for (idx, &z) in zeros.iter().enumerate() {
        let j = field.jacobian_at(z);
        let eigen = Eigen::of(j);
        if eigen.min_abs_re() <= TOL_HYP {
            return Err(PlanarError::NonHyperbolicEquilibrium { at: z, re: eigen.min_abs_re() });
        }
        let kind = eigen.kind();
        let nearest = zeros
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != idx)
            .map(|(_, w)| dist(*w, z))
            .fold(f64::INFINITY, f64::min);
        let room = (0.5 * nearest).min(r - z[0].hypot(z[1])).min(0.5);
        let half = injectivity_half_width(field, z, j, room / std::f64::consts::SQRT_2)
            .ok_or(PlanarError::BoxCertification { at: z })?;
        let trap = match kind {
            EquilibriumKind::Sink => Some(lyapunov_trap(field, z, j, half, 1.0)),
            EquilibriumKind::Source => Some(lyapunov_trap(field, z, j, half, -1.0)),
            EquilibriumKind::Saddle => None,
        };
        let trap = match trap {
            Some(None) => return Err(PlanarError::BoxCertification { at: z }),
            Some(t) => t,
            None => None,
        };
        boxes.push(EquilibriumBox { center: z, side: 2.0 * half, kind, equilibrium: z, eigen, trap });
    }

    // the indices of the equilibria must account for the boundary winding
    let found: i32 = boxes
        .iter()
        .map(|b| if b.kind == EquilibriumKind::Saddle { -1 } else { 1 })
        .sum();
    let winding = field.boundary_winding(3600);
    if found != winding {
        return Err(PlanarError::NewtonMiss { found, winding });
    }
    Ok(boxes)
}

/// Largest half-width (shrinking from `start`) of a square around z on
/// which ‖Df(z)⁻¹(Df(p) − Df(z))‖ ≤ 1/2 at sampled p. On such a square
/// x ↦ x − Df(z)⁻¹f(x) is a contraction, so z is the only zero there.
fn injectivity_half_width(
    field: &PlanarField,
    z: [f64; 2],
    j: [[f64; 2]; 2],
    start: f64,
) -> Option<f64> {
    let a = mat(j);
    let inv = a.try_inverse()?;
    let mut h = start;
    for _ in 0..60 {
        let ok = (0..=8).all(|i| {
            (0..=8).all(|k| {
                let p = [z[0] + h * (i as f64 / 4.0 - 1.0), z[1] + h * (k as f64 / 4.0 - 1.0)];
                row_sum(&(inv * (mat(field.jacobian_at(p)) - a))) <= 0.5
            })
        });
        if ok {
            return Some(h);
        }
        h *= 0.7;
    }
    None
}

/// Solves AᵀP + PA = −I for symmetric P.
fn lyapunov(a: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let [[a11, a12], [a21, a22]] = a;
    let m = Matrix3::new(
        2.0 * a11, 2.0 * a21, 0.0,
        a12, a11 + a22, a21,
        0.0, 2.0 * a12, 2.0 * a22,
    );
    let s = m.lu().solve(&Vector3::new(-1.0, 0.0, -1.0))?;
    let p = [[s[0], s[1]], [s[1], s[2]]];
    (p[0][0] > 0.0 && p[0][0] * p[1][1] - p[0][1] * p[0][1] > 0.0).then_some(p)
}

/// A Lyapunov ellipse around z fitting in the square of half-width
/// `half`, shrunk until sign·⟨∇V, f⟩ < 0 on sampled level curves. With
/// sign = −1 the check is for the reversed flow.
fn lyapunov_trap(
    field: &PlanarField,
    z: [f64; 2],
    j: [[f64; 2]; 2],
    half: f64,
    sign: f64,
) -> Option<Ellipse> {
    let a = [[sign * j[0][0], sign * j[0][1]], [sign * j[1][0], sign * j[1][1]]];
    let p = lyapunov(a)?;
    let mut e = Ellipse { center: z, p, level: 1.0 };
    let ext = e.extents();
    e.level = half * half / ext[0].max(ext[1]).powi(2);
    for _ in 0..60 {
        if decreasing_on_levels(field, &e, sign) {
            return Some(e);
        }
        e.level *= 0.5;
    }
    None
}

fn decreasing_on_levels(field: &PlanarField, e: &Ellipse, sign: f64) -> bool {
    const LEVELS: usize = 8;
    const ANGLES: usize = 180;
    (1..=LEVELS).all(|l| {
        let level = e.level * (l as f64 / LEVELS as f64).powi(2);
        (0..ANGLES).all(|i| {
            let x = e.point_at(level, std::f64::consts::TAU * i as f64 / ANGLES as f64);
            let f = field.at(x);
            let d = [x[0] - e.center[0], x[1] - e.center[1]];
            let grad = [
                e.p[0][0] * d[0] + e.p[0][1] * d[1],
                e.p[0][1] * d[0] + e.p[1][1] * d[1],
            ];
            sign * (grad[0] * f[0] + grad[1] * f[1]) < 0.0
        })
    })
}
