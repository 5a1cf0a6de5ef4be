//! The robust extension f̄ : ℝ³ → ℝ³ of a Turing machine's transition map,
//! perturbed iteration experiments, Newton sinks of maps, and the
//! basin-membership decision procedure.
//!
//! Construction: f̄(x) = F(r(x)) + λ·(x − r(x)), where r is componentwise
//! smooth rounding and F evaluates the rule table on rounded configurations.
//! F selects the active rule with products of residue kernels (state kernel
//! of period m, symbol kernel of period b) and applies the move with smooth
//! digit extraction. On a 1/4-neighbourhood of ℕ³ the rounding is constant,
//! so f̄ agrees with the machine there and is affine with linear part λ·I.

use nalgebra::{Complex, DMatrix, DVector, Matrix3, Schur};
use serde::Serialize;
use thiserror::Error;

use crate::integrator::perturb::PerturbationSpec;
use crate::scalar::{Dual, Scalar};
use crate::smooth::{residue_kernel, smooth_div, smooth_mod, smooth_round};
use crate::tm::{EncodedConfig, Move, TuringMachine};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustMapError {
    #[error("contraction constant λ = {0} must lie in (0, 1)")]
    BadLambda(f64),
    #[error("Newton iteration did not converge after {0} iterations")]
    NewtonDiverged(usize),
    #[error("fixed point found but an eigenvalue has modulus {0} >= 1")]
    NotASink(f64),
    #[error("configuration does not fit in f64 exactly")]
    ConfigTooLarge,
    #[error("eigenvalue iteration did not converge")]
    EigenFailed,
}

/// A map ℝ³ → ℝ³ that can be evaluated on any [`Scalar`].
pub trait Map3: Sync {
    fn eval<T: Scalar>(&self, x: [T; 3]) -> [T; 3];

    fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        self.eval(x)
    }

    fn jacobian(&self, x: [f64; 3]) -> Matrix3<f64> {
        let y = self.eval(Dual::<3>::seed(&x));
        Matrix3::from_fn(|i, j| y[i].d[j])
    }
}

#[derive(Debug, Clone, Copy)]
struct RuleRow {
    write: f64,
    right: f64,
    left: f64,
    next: f64,
}

#[derive(Debug, Clone)]
pub struct RobustMap {
    machine: TuringMachine,
    lambda: f64,
    rows: Vec<RuleRow>,
}

/// Default contraction constant.
pub const DEFAULT_LAMBDA: f64 = 0.5;

impl RobustMap {
    pub fn new(machine: TuringMachine, lambda: f64) -> Result<Self, RobustMapError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(RobustMapError::BadLambda(lambda));
        }
        let rows = machine
            .rules()
            .iter()
            .map(|r| RuleRow {
                write: f64::from(r.write),
                right: f64::from(u8::from(r.moves == Move::R)),
                left: f64::from(u8::from(r.moves == Move::L)),
                next: f64::from(r.next),
            })
            .collect();
        Ok(Self { machine, lambda, rows })
    }

    pub fn machine(&self) -> &TuringMachine {
        &self.machine
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The halting configuration (0, 0, m) as a point of ℝ³.
    pub fn halting_point(&self) -> [f64; 3] {
        [0.0, 0.0, f64::from(self.machine.num_states())]
    }

    /// F: the rule table applied to an (approximately) integer configuration.
    pub fn table_map<T: Scalar>(&self, w1: T, w2: T, q: T) -> [T; 3] {
        let m = self.machine.num_states();
        let b = self.machine.base();
        let bf = f64::from(b);
        let zero = T::cst(0.0);

        let sym: Vec<T> = (0..b).map(|a| residue_kernel(b, i64::from(a), w2)).collect();
        let a = sym.iter().enumerate().fold(zero, |acc, (j, k)| acc + *k * j as f64);
        let halt_sel = residue_kernel(m, i64::from(m), q);

        let (mut write, mut right, mut left, mut next) = (zero, zero, zero, zero);
        for s in 1..m {
            let ks = residue_kernel(m, i64::from(s), q);
            if ks.is_exact_zero() {
                continue;
            }
            for (alpha, ka) in sym.iter().enumerate() {
                let sel = ks * *ka;
                let row = self.rows[(s - 1) as usize * b as usize + alpha];
                write = write + sel * row.write;
                right = right + sel * row.right;
                left = left + sel * row.left;
                next = next + sel * row.next;
            }
        }
        write = write + halt_sel * a;
        next = next + halt_sel * f64::from(m);
        let stay = -(right + left) + 1.0;

        let rest = w2 - a;
        let w1_new = stay * w1 + right * (w1 * bf + write) + left * smooth_div(w1, b);
        let w2_new = stay * (rest + write)
            + right * (rest / bf)
            + left * ((rest + write) * bf + smooth_mod(w1, b));
        [w1_new, w2_new, next]
    }

    /// f̄ on an integer configuration, checked against `step` in tests.
    pub fn apply_config(&self, c: &EncodedConfig) -> Result<[f64; 3], RobustMapError> {
        let x = c.to_f64().ok_or(RobustMapError::ConfigTooLarge)?;
        Ok(self.apply(x))
    }
}

impl Map3 for RobustMap {
    fn eval<T: Scalar>(&self, x: [T; 3]) -> [T; 3] {
        let r = x.map(smooth_round);
        let f = self.table_map(r[0], r[1], r[2]);
        std::array::from_fn(|i| f[i] + (x[i] - r[i]) * self.lambda)
    }
}

/// f̄ plus a certified perturbation: g = f̄ + Δ with ‖Δ‖ ≤ δ, ‖DΔ‖ ≤ θ.
#[derive(Debug, Clone)]
pub struct PerturbedMap {
    pub base: RobustMap,
    pub perturbation: Option<PerturbationSpec>,
}

impl PerturbedMap {
    pub fn new(base: RobustMap, perturbation: PerturbationSpec) -> Self {
        assert_eq!(perturbation.dim(), 3, "map perturbations act on ℝ³");
        Self { base, perturbation: Some(perturbation) }
    }

    pub fn unperturbed(base: RobustMap) -> Self {
        Self { base, perturbation: None }
    }

    /// Certified sup-norm bound δ.
    pub fn delta(&self) -> f64 {
        self.perturbation.as_ref().map_or(0.0, PerturbationSpec::c0_bound)
    }

    /// Certified derivative bound θ.
    pub fn theta(&self) -> f64 {
        self.perturbation.as_ref().map_or(0.0, PerturbationSpec::c1_bound)
    }

    /// δ ≤ (1 − λ)ε keeps every iterate within ε of the machine orbit, and
    /// λ + θ < 1 keeps the perturbed halting point a sink.
    pub fn within_budget(&self, eps: f64) -> bool {
        let lambda = self.base.lambda();
        self.delta() <= (1.0 - lambda) * eps && lambda + self.theta() < 1.0
    }
}

impl Map3 for PerturbedMap {
    fn eval<T: Scalar>(&self, x: [T; 3]) -> [T; 3] {
        let mut y = self.base.eval(x);
        if let Some(p) = &self.perturbation {
            p.add_to(&x, &mut y);
        }
        y
    }
}

/// Max-norm distance in ℝ³.
pub fn dist_inf(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackedStep {
    pub j: usize,
    pub deviation: f64,
}

/// Iterates g from `x_bar0` alongside the exact machine orbit from `x0` and
/// reports ‖g^[j](x̄₀) − f_M^[j](x₀)‖ for j = 0..=j_max. Stops early if the
/// exact orbit leaves the range where f64 is exact.
pub fn iterate_tracked(
    g: &impl Map3,
    machine: &TuringMachine,
    x_bar0: [f64; 3],
    x0: &EncodedConfig,
    j_max: usize,
) -> Vec<TrackedStep> {
    let mut out = Vec::with_capacity(j_max + 1);
    let mut x = x_bar0;
    let mut c = x0.clone();
    for j in 0..=j_max {
        let Some(exact) = c.to_f64() else { break };
        out.push(TrackedStep { j, deviation: dist_inf(x, exact) });
        x = g.apply(x);
        c = machine.step(&c).expect("valid configuration");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSink {
    pub point: [f64; 3],
    /// Moduli of the eigenvalues of Dg at the sink.
    pub moduli: Vec<f64>,
    pub iterations: usize,
}

/// Newton's method on h(x) = x − y(x) for a generic finite-dimensional
/// system; `residual` returns h and its Jacobian.
pub(crate) fn newton(
    mut x: DVector<f64>,
    tol: f64,
    max_iter: usize,
    residual: impl Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
) -> Option<(DVector<f64>, usize)> {
    for it in 0..max_iter {
        let (h, jac) = residual(&x);
        if h.amax() <= tol {
            return Some((x, it));
        }
        let step = jac.lu().solve(&h)?;
        x -= &step;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        // stiff systems put the residual's rounding floor above tol
        if step.amax() <= tol * (1.0 + x.amax()) {
            return Some((x, it + 1));
        }
    }
    let (h, _) = residual(&x);
    (h.amax() <= tol).then_some((x, max_iter))
}

/// Eigenvalues through a Schur decomposition with an iteration cap.
/// nalgebra's uncapped `complex_eigenvalues` can cycle forever on badly
/// scaled matrices such as the stiff 7-D Jacobians.
pub(crate) fn eigenvalues(m: DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    [f64::EPSILON, 1e-12].into_iter().find_map(|eps| {
        Schur::try_new(m.clone(), eps, 10_000).map(|s| s.complex_eigenvalues().iter().copied().collect())
    })
}

/// Fixed point of a map by Newton on g(x) − x, certified as a sink by
/// checking that every eigenvalue of Dg has modulus below 1.
pub fn find_sink(g: &impl Map3, seed: [f64; 3], tol: f64) -> Result<MapSink, RobustMapError> {
    const MAX_ITER: usize = 100;
    let (x, iterations) = newton(DVector::from_row_slice(&seed), tol, MAX_ITER, |x| {
        let p = [x[0], x[1], x[2]];
        let y = g.apply(p);
        let jac = g.jacobian(p) - Matrix3::identity();
        let h = DVector::from_fn(3, |i, _| y[i] - p[i]);
        (h, DMatrix::from_fn(3, 3, |i, j| jac[(i, j)]))
    })
    .ok_or(RobustMapError::NewtonDiverged(MAX_ITER))?;
    let point = [x[0], x[1], x[2]];
    let jac = g.jacobian(point);
    let moduli: Vec<f64> = eigenvalues(DMatrix::from_fn(3, 3, |i, j| jac[(i, j)]))
        .ok_or(RobustMapError::EigenFailed)?
        .iter()
        .map(|z| z.norm())
        .collect();
    let worst = moduli.iter().copied().fold(0.0, f64::max);
    if worst >= 1.0 {
        return Err(RobustMapError::NotASink(worst));
    }
    Ok(MapSink { point, moduli, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    In,
    NotYet,
    Escaped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub verdict: Verdict,
    /// Iterations performed before the verdict.
    pub steps: usize,
}

/// Iterates beyond this max-norm are reported as escaped.
pub const ESCAPE_BOUND: f64 = 1e9;

/// Decides whether the encoded input w lies in the basin of the perturbed
/// sink `s_g`: IN once an iterate is within ε/5 of `s_g`, NOT_YET when the
/// budget runs out, ESCAPED on leaving ‖x‖ ≤ 10⁹.
pub fn basin_membership(
    g: &impl Map3,
    s_g: [f64; 3],
    w: u64,
    eps: f64,
    j_max: usize,
) -> Membership {
    let mut x = [0.0, w as f64, 1.0];
    for j in 0..=j_max {
        if dist_inf(x, s_g) <= eps / 5.0 {
            return Membership { verdict: Verdict::In, steps: j };
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > ESCAPE_BOUND) {
            return Membership { verdict: Verdict::Escaped, steps: j };
        }
        if j < j_max {
            x = g.apply(x);
        }
    }
    Membership { verdict: Verdict::NotYet, steps: j_max }
}
