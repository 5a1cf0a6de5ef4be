//! Continuous-time constructions: the targeting equation, the paired
//! iteration systems, and the autonomous 7-D field whose halting
//! configuration is a hyperbolic sink.
//!
//! Time-dependent stages are exposed as autonomous systems with explicit
//! time appended as the last state component (t′ = 1).

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::perturb::PerturbationSpec;
use crate::integrator::VectorField;
use crate::quad::integrate_adaptive;
use crate::robust_map::{eigenvalues, newton, Map3, RobustMap};
use crate::scalar::{Dual, Scalar};
use crate::smooth::{phi, phi_bar, smooth_round, zeta_window, SmoothScalarFn};
use crate::tm::TuringMachine;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("gate integral {0} is not positive")]
    ZeroGateIntegral(f64),
    #[error("unknown stage {0:?}; expected pair, six or full")]
    BadStage(String),
    #[error("invalid targeting spec: {0}")]
    BadSpec(&'static str),
    #[error("perturbation exceeds budget: {0}")]
    BudgetExceeded(String),
    #[error("perturbation dimension {got} does not match field dimension {want}")]
    PerturbationDim { got: usize, want: usize },
    #[error("Newton iteration did not converge")]
    NewtonDiverged,
    #[error("equilibrium has an eigenvalue with real part {0} >= 0")]
    NotASink(f64),
    #[error("eigenvalue iteration did not converge")]
    EigenFailed,
}

/// Parameters of the targeting equation x′ = c(b − x)³φ(t) + ξ(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetingSpec {
    pub target: f64,
    pub gate: SmoothScalarFn,
    pub t0: f64,
    pub t1: f64,
    pub gamma: f64,
    pub rho: f64,
}

impl TargetingSpec {
    /// Gate φ on its half period [0, 1/2].
    pub fn new(target: f64, gamma: f64) -> Self {
        Self { target, gate: SmoothScalarFn::Phi, t0: 0.0, t1: 0.5, gamma, rho: 0.0 }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.t1 > self.t0) {
            return Err(FieldError::BadSpec("t1 must exceed t0"));
        }
        if !(self.gamma > 0.0) {
            return Err(FieldError::BadSpec("gamma must be positive"));
        }
        if !(self.rho >= 0.0) {
            return Err(FieldError::BadSpec("rho must be non-negative"));
        }
        Ok(())
    }

    /// ∫_{t0}^{t1} gate.
    pub fn gate_integral(&self) -> f64 {
        integrate_adaptive(|t| self.gate.value(t), self.t0, self.t1, 1e-13, 1e-15).0
    }
}

/// ∫ φ over one active window, i.e. over [1/4, 1/2].
pub fn phi_integral() -> f64 {
    static I: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *I.get_or_init(|| integrate_adaptive(phi::<f64>, 0.25, 0.5, 1e-13, 1e-15).0)
}

/// c = 1/(2γ²I) or, robustly, 3/(8γ²I); never below 1.
pub fn choose_c_from_integral(gamma: f64, integral: f64, robust: bool) -> Result<f64, FieldError> {
    if !(integral > 0.0) {
        return Err(FieldError::ZeroGateIntegral(integral));
    }
    let g2 = gamma * gamma;
    let c = if robust { 3.0 / (8.0 * g2 * integral) } else { 1.0 / (2.0 * g2 * integral) };
    Ok(c.max(1.0))
}

pub fn choose_c(spec: &TargetingSpec, robust: bool) -> Result<f64, FieldError> {
    spec.validate()?;
    choose_c_from_integral(spec.gamma, spec.gate_integral(), robust)
}

/// Time-dependent forcing ξ(t) for the targeting equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Forcing {
    None,
    Constant(f64),
    Sine { amplitude: f64, omega: f64, phase: f64 },
}

impl Forcing {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Constant(v) => v,
            Self::Sine { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Constant(v) => v.abs(),
            Self::Sine { amplitude, .. } => amplitude.abs(),
        }
    }
}

/// x′ = c(b − x)³·gate(t) + ξ(t) with state (x, t).
#[derive(Debug, Clone)]
pub struct TargetingField {
    pub spec: TargetingSpec,
    pub c: f64,
    pub forcing: Forcing,
}

impl VectorField for TargetingField {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.spec.target - x[0];
        out[0] = self.c * d * d * d * self.spec.gate.value(x[1]) + self.forcing.at(x[1]);
        out[1] = 1.0;
    }
}

/// An integer map ℝ → ℝ iterated by the pair stage.
#[derive(Debug, Clone)]
pub enum ScalarMap {
    /// n ↦ a·n + b
    Affine { a: f64, b: f64 },
    /// n ↦ second component of f̄(0, n, 1).
    MachineTape(Arc<RobustMap>),
}

impl ScalarMap {
    pub fn eval<T: Scalar>(&self, x: T) -> T {
        match self {
            Self::Affine { a, b } => x * *a + *b,
            Self::MachineTape(f) => f.eval([T::cst(0.0), x, T::cst(1.0)])[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pair,
    Six,
    Full,
}

impl FromStr for Stage {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pair" => Ok(Self::Pair),
            "six" => Ok(Self::Six),
            "full" => Ok(Self::Full),
            other => Err(FieldError::BadStage(other.to_string())),
        }
    }
}

impl Stage {
    /// Number of dynamical variables, excluding explicit time.
    pub fn dimension(self) -> usize {
        match self {
            Self::Pair => 2,
            Self::Six => 6,
            Self::Full => 7,
        }
    }

    /// Size of the autonomous state, including explicit time where used.
    pub fn state_dim(self) -> usize {
        match self {
            Self::Pair => 3,
            Self::Six | Self::Full => 7,
        }
    }
}

/// The iteration systems. Stage pair iterates a scalar map, stage six the
/// robust map with explicit time, stage full is the autonomous 7-D system
/// with the clock z.
#[derive(Debug, Clone)]
pub struct Field {
    stage: Stage,
    c: f64,
    map: Option<Arc<RobustMap>>,
    scalar: Option<ScalarMap>,
    perturbation: Option<PerturbationSpec>,
    m: u32,
}

pub fn build_field(machine: &TuringMachine, stage: Stage, c: f64, lambda: f64) -> Result<Field, FieldError> {
    let map = Arc::new(
        RobustMap::new(machine.clone(), lambda).map_err(|_| FieldError::BadSpec("lambda must lie in (0, 1)"))?,
    );
    let scalar = (stage == Stage::Pair).then(|| ScalarMap::MachineTape(map.clone()));
    Ok(Field { stage, c, map: Some(map), scalar, perturbation: None, m: machine.num_states() })
}

/// Components 0..7 of x_halt = (0, 0, m, 0, 0, m, 0).
pub fn halting_point(machine: &TuringMachine) -> [f64; 7] {
    let m = f64::from(machine.num_states());
    [0.0, 0.0, m, 0.0, 0.0, m, 0.0]
}

/// Perturbation budget: C⁰ ≤ 1/4 everywhere and C¹ ≤ 1/16.
pub const C0_BUDGET: f64 = 0.25;
pub const C1_BUDGET: f64 = 1.0 / 16.0;

impl Field {
    /// Stage pair over an arbitrary integer map.
    pub fn pair(map: ScalarMap, c: f64) -> Self {
        Self { stage: Stage::Pair, c, map: None, scalar: Some(map), perturbation: None, m: 0 }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn num_states(&self) -> u32 {
        self.m
    }

    pub fn robust_map(&self) -> Option<&RobustMap> {
        self.map.as_deref()
    }

    pub fn perturbation(&self) -> Option<&PerturbationSpec> {
        self.perturbation.as_ref()
    }

    /// Number of dynamical variables (2, 6 or 7).
    pub fn dimension(&self) -> usize {
        self.stage.dimension()
    }

    /// g = f + Δ with Δ certified within the budget. Components of Δ on the
    /// explicit time variable must be zero.
    pub fn perturb(&self, spec: PerturbationSpec) -> Result<Field, FieldError> {
        let want = self.stage.state_dim();
        if spec.dim() != want {
            return Err(FieldError::PerturbationDim { got: spec.dim(), want });
        }
        if self.stage != Stage::Full && spec.weights[want - 1] != 0.0 {
            return Err(FieldError::BudgetExceeded("time component must not be perturbed".into()));
        }
        if spec.c0_bound() > C0_BUDGET {
            return Err(FieldError::BudgetExceeded(format!("C0 bound {} > 1/4", spec.c0_bound())));
        }
        if spec.c1_bound() > C1_BUDGET {
            return Err(FieldError::BudgetExceeded(format!("C1 bound {} > 1/16", spec.c1_bound())));
        }
        Ok(Field { perturbation: Some(spec), ..self.clone() })
    }

    pub fn eval_generic<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        let c = self.c;
        match self.stage {
            Stage::Pair => {
                let f = self.scalar.as_ref().expect("pair stage has a scalar map");
                let t = x[2];
                let d1 = f.eval(smooth_round(x[1])) - x[0];
                let d2 = smooth_round(x[0]) - x[1];
                out[0] = d1 * d1 * d1 * phi(t) * c;
                out[1] = d2 * d2 * d2 * phi(t + 0.5) * c;
                out[2] = T::cst(1.0);
            }
            Stage::Six => {
                let map = self.map.as_ref().expect("six stage has a machine");
                let t = x[6];
                let target = map.eval([x[3], x[4], x[5]].map(smooth_round));
                let (gu, gv) = (phi(t) * c, phi(t + 0.5) * c);
                for i in 0..3 {
                    let du = target[i] - x[i];
                    out[i] = du * du * du * gu;
                    let dv = smooth_round(x[i]) - x[3 + i];
                    out[3 + i] = dv * dv * dv * gv;
                }
                out[6] = T::cst(1.0);
            }
            Stage::Full => {
                let map = self.map.as_ref().expect("full stage has a machine");
                let m = self.m;
                let mf = f64::from(m);
                let (v3, z) = (x[5], x[6]);
                let target = map.eval([x[3], x[4], x[5]].map(smooth_round));
                let gu = phi_bar(z, v3, m) * c;
                let gv = phi_bar(z + 0.5, v3, m) * c;
                for i in 0..3 {
                    let du = target[i] - x[i];
                    out[i] = (du * du * du + du) * gu;
                    let dv = smooth_round(x[i]) - x[3 + i];
                    out[3 + i] = (dv * dv * dv + dv) * gv;
                }
                out[6] = -(zeta_window(mf - 3.0 / 16.0, mf - 0.125, v3) * (z + 1.0)) + 1.0;
            }
        }
        if let Some(p) = &self.perturbation {
            p.add_to(x, out);
        }
    }

    /// Analytic Jacobian at x_halt: diag(−c·φ̄(0,m) six times,
    /// −ζ_{m−3/16,m−1/8}(m)). Only meaningful for the unperturbed full stage.
    pub fn jacobian_at_halt(&self) -> DMatrix<f64> {
        assert_eq!(self.stage, Stage::Full, "jacobian_at_halt needs the full stage");
        let mf = f64::from(self.m);
        let gate = phi_bar(0.0, mf, self.m);
        let clock = zeta_window(mf - 3.0 / 16.0, mf - 0.125, mf);
        let mut a = DMatrix::zeros(7, 7);
        for i in 0..6 {
            a[(i, i)] = -self.c * gate;
        }
        a[(6, 6)] = -clock;
        a
    }

    /// Equilibrium of the field near `seed` by Newton, certified as a sink
    /// by the real parts of the Jacobian's eigenvalues.
    pub fn find_sink(&self, seed: &[f64], tol: f64) -> Result<FlowSink, FieldError> {
        let n = self.stage.state_dim();
        let (x, iterations) = newton(DVector::from_row_slice(seed), tol, 100, |x| {
            let mut f = vec![0.0; n];
            self.eval(x.as_slice(), &mut f);
            (DVector::from_vec(f), self.jacobian(x.as_slice()))
        })
        .ok_or(FieldError::NewtonDiverged)?;
        let eig = eigenvalues(self.jacobian(x.as_slice())).ok_or(FieldError::EigenFailed)?;
        let real_parts: Vec<f64> = eig.iter().map(|z| z.re).collect();
        let worst = real_parts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if worst >= 0.0 {
            return Err(FieldError::NotASink(worst));
        }
        Ok(FlowSink { point: x.as_slice().to_vec(), real_parts, iterations })
    }

    pub fn manifest(&self, machine_path: &str, gamma: f64) -> FieldManifest {
        FieldManifest {
            machine: machine_path.to_string(),
            stage: self.stage,
            c: self.c,
            lambda: self.map.as_ref().map_or(0.5, |m| m.lambda()),
            gamma,
            m: self.m,
            perturbation: self.perturbation.clone(),
        }
    }
}

impl VectorField for Field {
    fn dim(&self) -> usize {
        self.stage.state_dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.eval_generic(x, out);
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut seeded = [Dual::<7>::constant(0.0); 7];
        for i in 0..n {
            seeded[i] = Dual::var(x[i], i);
        }
        let mut out = [Dual::<7>::constant(0.0); 7];
        self.eval_generic(&seeded[..n], &mut out[..n]);
        DMatrix::from_fn(n, n, |i, j| out[i].d[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSink {
    pub point: Vec<f64>,
    pub real_parts: Vec<f64>,
    pub iterations: usize,
}

/// Everything needed to rebuild a field bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldManifest {
    pub machine: String,
    pub stage: Stage,
    pub c: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
}

impl FieldManifest {
    pub fn build(&self, machine: &TuringMachine) -> Result<Field, FieldError> {
        let field = build_field(machine, self.stage, self.c, self.lambda)?;
        match &self.perturbation {
            Some(p) => field.perturb(p.clone()),
            None => Ok(field),
        }
    }
}
