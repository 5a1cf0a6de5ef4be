//! Basins of attraction of sinks of structurally stable planar fields.
//!
//! The pipeline is: build an [`Inventory`] of hyperbolic equilibria (with
//! certified boxes) and hinted periodic orbits (with trapping annuli),
//! trace the stable manifolds of saddles, then classify grid cells by
//! forward integration until they enter a trapping region. Cells near a
//! stable manifold or near the repelling part of the inventory form a
//! margin band whose width is set by the accuracy parameter k.

mod annulus;
mod basin;
mod classify;
mod expr;
mod grid;
mod inventory;

pub use annulus::{locate_periodic_annuli, AnnulusHint, CycleKind, PeriodicAnnulus};
pub use basin::{
    brute_force_classify, compute_basin, compute_basin_with, hausdorff, level_for, Agreement,
    Attractor, BasinOptions,
    BasinReport, BasinRaster, CellLabel, CellSet,
};
pub use classify::{classify_point, stable_manifold_curve, Classification, Status};
pub use expr::{Expr, ExprError};
pub use grid::GridSpec;
pub use inventory::{find_equilibria, Eigen, Ellipse, EquilibriumBox, EquilibriumKind, Inventory};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{IntegratorError, PerturbationSpec, Tolerances, VectorField};
use crate::scalar::{Dual, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanarError {
    #[error("component {component}: {source}")]
    Expr { component: &'static str, source: ExprError },
    #[error("invalid field manifest: {0}")]
    Manifest(String),
    #[error("equilibrium at ({:.6}, {:.6}) is not hyperbolic (|Re λ| = {re:e})", at[0], at[1])]
    NonHyperbolicEquilibrium { at: [f64; 2], re: f64 },
    #[error("equilibria found have total index {found} but the boundary winding is {winding}; retry with finer seeds")]
    NewtonMiss { found: i32, winding: i32 },
    #[error("could not certify a box around ({:.6}, {:.6})", at[0], at[1])]
    BoxCertification { at: [f64; 2] },
    #[error("hint {hint}: no periodic orbit crosses the section")]
    NoOrbitInHint { hint: usize },
    #[error("hint {hint}: {crossings} orbit crossings on the section")]
    AmbiguousHint { hint: usize, crossings: usize },
    #[error("backward orbit from saddle {from} approaches saddle {to}")]
    SaddleConnectionSuspected { from: usize, to: usize },
    #[error("{timeouts} of {cells} classified cells timed out")]
    IncompleteInventory { timeouts: usize, cells: usize },
    #[error("rasters do not share a grid")]
    GridMismatch,
    #[error("sink index {index} out of range ({count} sinks)")]
    BadSink { index: usize, count: usize },
    #[error("equilibrium is not a saddle")]
    NotASaddle,
    #[error("perturbation has dimension {0}, expected 2")]
    PerturbationDim(usize),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    Expressions { fx: String, fy: String },
    Grid { grid: GridSpec },
}

/// On-disk description of a planar field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarManifest {
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub source: FieldSource,
    pub radius: f64,
    #[serde(default)]
    pub hints: Vec<AnnulusHint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Debug, Clone, PartialEq)]
enum Compiled {
    Expressions(Expr, Expr),
    Grid(GridSpec),
}

/// A C¹ field on the disk of radius R, plus its periodic-orbit hints.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarField {
    name: String,
    compiled: Compiled,
    source: FieldSource,
    radius: f64,
    hints: Vec<AnnulusHint>,
    perturbation: Option<PerturbationSpec>,
}

/// Result of sampling ⟨f(x), x⟩ on the boundary circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InwardReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest value of ⟨f(x), x⟩ seen (negative when the field points in).
    pub worst: f64,
}

impl InwardReport {
    pub fn points_inward(&self) -> bool {
        self.violations == 0
    }
}

impl PlanarField {
    pub fn from_manifest(m: PlanarManifest) -> Result<Self, PlanarError> {
        if !(m.radius > 0.0 && m.radius.is_finite()) {
            return Err(PlanarError::Manifest("radius must be positive".into()));
        }
        let compiled = match &m.source {
            FieldSource::Expressions { fx, fy } => Compiled::Expressions(
                Expr::parse(fx).map_err(|source| PlanarError::Expr { component: "fx", source })?,
                Expr::parse(fy).map_err(|source| PlanarError::Expr { component: "fy", source })?,
            ),
            FieldSource::Grid { grid } => {
                grid.validate().map_err(PlanarError::Manifest)?;
                Compiled::Grid(grid.clone())
            }
        };
        for h in &m.hints {
            h.validate().map_err(PlanarError::Manifest)?;
        }
        let mut field = Self {
            name: m.name,
            compiled,
            source: m.source,
            radius: m.radius,
            hints: m.hints,
            perturbation: None,
        };
        if let Some(p) = m.perturbation {
            field = field.with_perturbation(p)?;
        }
        Ok(field)
    }

    pub fn from_json(text: &str) -> Result<Self, PlanarError> {
        let m: PlanarManifest =
            serde_json::from_str(text).map_err(|e| PlanarError::Manifest(e.to_string()))?;
        Self::from_manifest(m)
    }

    pub fn from_exprs(name: &str, fx: &str, fy: &str, radius: f64) -> Result<Self, PlanarError> {
        Self::from_manifest(PlanarManifest {
            name: name.into(),
            source: FieldSource::Expressions { fx: fx.into(), fy: fy.into() },
            radius,
            hints: Vec::new(),
            perturbation: None,
        })
    }

    pub fn manifest(&self) -> PlanarManifest {
        PlanarManifest {
            name: self.name.clone(),
            source: self.source.clone(),
            radius: self.radius,
            hints: self.hints.clone(),
            perturbation: self.perturbation.clone(),
        }
    }

    pub fn with_hints(mut self, hints: Vec<AnnulusHint>) -> Self {
        self.hints = hints;
        self
    }

    /// Adds Δ to the field.
    pub fn with_perturbation(mut self, p: PerturbationSpec) -> Result<Self, PlanarError> {
        if p.dim() != 2 {
            return Err(PlanarError::PerturbationDim(p.dim()));
        }
        self.perturbation = Some(p);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn hints(&self) -> &[AnnulusHint] {
        &self.hints
    }

    pub fn perturbation(&self) -> Option<&PerturbationSpec> {
        self.perturbation.as_ref()
    }

    pub fn eval_generic<T: Scalar>(&self, p: [T; 2]) -> [T; 2] {
        let mut out = match &self.compiled {
            Compiled::Expressions(fx, fy) => [fx.eval(p[0], p[1]), fy.eval(p[0], p[1])],
            Compiled::Grid(g) => g.eval(p[0], p[1]),
        };
        if let Some(d) = &self.perturbation {
            d.add_to(&p, &mut out);
        }
        out
    }

    pub fn at(&self, p: [f64; 2]) -> [f64; 2] {
        self.eval_generic(p)
    }

    /// Exact Jacobian by forward-mode differentiation.
    pub fn jacobian_at(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let [a, b] = self.eval_generic(Dual::<2>::seed(&p));
        [a.d, b.d]
    }

    /// Samples ⟨f(x), x⟩ at `n` equally spaced boundary points.
    pub fn boundary_check(&self, n: usize) -> InwardReport {
        let mut rep = InwardReport { samples: n, violations: 0, worst: f64::NEG_INFINITY };
        for i in 0..n {
            let th = std::f64::consts::TAU * i as f64 / n as f64;
            let x = [self.radius * th.cos(), self.radius * th.sin()];
            let f = self.at(x);
            let ip = f[0] * x[0] + f[1] * x[1];
            rep.worst = rep.worst.max(ip);
            if ip >= 0.0 {
                rep.violations += 1;
            }
        }
        rep
    }

    /// Winding number of f along the boundary circle, sampled at `n`
    /// points. Equals the sum of the indices of the equilibria inside.
    pub fn boundary_winding(&self, n: usize) -> i32 {
        let angle = |i: usize| {
            let th = std::f64::consts::TAU * i as f64 / n as f64;
            let f = self.at([self.radius * th.cos(), self.radius * th.sin()]);
            f[1].atan2(f[0])
        };
        let mut total = 0.0;
        let mut prev = angle(0);
        for i in 1..=n {
            let a = angle(i % n);
            total += wrap_angle(a - prev);
            prev = a;
        }
        (total / std::f64::consts::TAU).round() as i32
    }

    /// Tolerances used for every planar integration.
    pub fn tolerances(&self) -> Tolerances {
        Tolerances::new(1e-9, 1e-12).with_h_max(0.25)
    }
}

impl VectorField for PlanarField {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let f = self.at([x[0], x[1]]);
        out.copy_from_slice(&f);
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let j = self.jacobian_at([x[0], x[1]]);
        DMatrix::from_fn(2, 2, |r, c| j[r][c])
    }
}

/// Maps an angle difference into (−π, π].
pub(crate) fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = a % TAU;
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    a
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Distance from p to the segment [a, b].
pub(crate) fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Distance from p to an open polyline.
pub fn polyline_dist(p: [f64; 2], line: &[[f64; 2]]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [a] => dist(p, *a),
        _ => line.windows(2).map(|w| seg_dist(p, w[0], w[1])).fold(f64::INFINITY, f64::min),
    }
}

/// Even-odd point-in-polygon test; the polygon is implicitly closed.
pub(crate) fn in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// The bundled test fields.
pub mod catalog {
    use super::{AnnulusHint, PlanarField};

    /// x′ = x − x³, y′ = −y on the disk of radius 2: sinks at (±1, 0) and
    /// a saddle at the origin whose stable manifold is the y-axis.
    pub fn f2() -> PlanarField {
        PlanarField::from_exprs("f2", "x - x^3", "-y", 2.0).expect("valid expressions")
    }

    fn vdp_hint() -> AnnulusHint {
        AnnulusHint { center: [0.0, 0.0], angle: 0.0, r_in: 1.0, r_out: 3.0 }
    }

    /// x′ = y, y′ = μ(1 − x²)y − x on the disk of radius 4.
    pub fn van_der_pol(mu: f64) -> PlanarField {
        PlanarField::from_exprs("van_der_pol", "y", &format!("{mu}*(1 - x^2)*y - x"), 4.0)
            .expect("valid expressions")
            .with_hints(vec![vdp_hint()])
    }

    /// Van der Pol with time reversed: a sink at the origin inside a
    /// repelling cycle.
    pub fn reversed_van_der_pol(mu: f64) -> PlanarField {
        PlanarField::from_exprs(
            "reversed_van_der_pol",
            "-y",
            &format!("x - {mu}*(1 - x^2)*y"),
            4.0,
        )
        .expect("valid expressions")
        .with_hints(vec![vdp_hint()])
    }

    /// x′ = −x + y, y′ = −x − y: a global spiral sink.
    pub fn rotated_sink() -> PlanarField {
        PlanarField::from_exprs("rotated_sink", "-x + y", "-x - y", 2.0).expect("valid expressions")
    }

    /// x′ = x, y′ = −y.
    pub fn linear_saddle() -> PlanarField {
        PlanarField::from_exprs("linear_saddle", "x", "-y", 2.0).expect("valid expressions")
    }
}
