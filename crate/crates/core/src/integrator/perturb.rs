//! Certified perturbation families added to maps and vector fields.
//!
//! Every family carries analytic bounds on its sup norm (C⁰) and on the
//! sup of its Jacobian in the max-row-sum norm (C¹), both taken over the
//! whole space. The C¹ norm used throughout is ‖Δ‖₁ = C⁰ + C¹.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Δᵢ(x) = α·wᵢ
    Constant,
    /// Δᵢ(x) = α·wᵢ·sin(xᵢ + pᵢ)
    Sinusoidal,
    /// Δᵢ(x) = wᵢ·exp(−α(1 + ‖x − c‖²))
    GaussianTail,
    /// Δᵢ(x) = α·wᵢ·exp(1 − 1/(1 − ‖x − c‖²/ρ²)) inside the ball, 0 outside
    Bump { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub alpha: f64,
    /// Per-component weights in [−1, 1]; a zero weight leaves that
    /// component untouched.
    pub weights: Vec<f64>,
    pub phases: Vec<f64>,
    pub center: Vec<f64>,
}

impl PerturbationSpec {
    fn uniform(kind: PerturbationKind, alpha: f64, dim: usize) -> Self {
        Self {
            kind,
            alpha,
            weights: vec![1.0; dim],
            phases: vec![0.0; dim],
            center: vec![0.0; dim],
        }
    }

    pub fn constant(alpha: f64, dim: usize) -> Self {
        Self::uniform(PerturbationKind::Constant, alpha, dim)
    }

    pub fn sinusoidal(alpha: f64, dim: usize) -> Self {
        Self::uniform(PerturbationKind::Sinusoidal, alpha, dim)
    }

    pub fn gaussian_tail(alpha: f64, dim: usize) -> Self {
        Self::uniform(PerturbationKind::GaussianTail, alpha, dim)
    }

    pub fn bump(alpha: f64, center: Vec<f64>, radius: f64) -> Self {
        let dim = center.len();
        Self { center, ..Self::uniform(PerturbationKind::Bump { radius }, alpha, dim) }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.dim());
        assert!(weights.iter().all(|w| w.abs() <= 1.0), "weights must lie in [-1, 1]");
        self.weights = weights;
        self
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        assert_eq!(center.len(), self.dim());
        self.center = center;
        self
    }

    /// A random member of the family: weights uniform in [−1, 1] on the
    /// components where `mask` is true, uniform phases, and a center drawn
    /// from `center ± spread` in every coordinate.
    pub fn randomized<R: Rng>(
        mut self,
        rng: &mut R,
        mask: &[bool],
        spread: f64,
    ) -> Self {
        for (i, w) in self.weights.iter_mut().enumerate() {
            *w = if mask[i] { rng.gen_range(-1.0..=1.0) } else { 0.0 };
        }
        for p in &mut self.phases {
            *p = rng.gen_range(0.0..std::f64::consts::TAU);
        }
        if spread > 0.0 {
            for c in &mut self.center {
                *c += rng.gen_range(-spread..=spread);
            }
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn max_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Number of coordinates the radial profile depends on.
    fn radial_dim(&self) -> f64 {
        self.dim() as f64
    }

    /// Certified sup-norm bound.
    pub fn c0_bound(&self) -> f64 {
        let w = self.max_weight();
        match self.kind {
            PerturbationKind::Constant | PerturbationKind::Sinusoidal => self.alpha * w,
            PerturbationKind::GaussianTail => w * (-self.alpha).exp(),
            PerturbationKind::Bump { .. } => self.alpha * w,
        }
    }

    /// Certified bound on sup ‖DΔ‖ in the max-row-sum norm.
    pub fn c1_bound(&self) -> f64 {
        let w = self.max_weight();
        let a = self.alpha;
        let sqrt_d = self.radial_dim().sqrt();
        match self.kind {
            PerturbationKind::Constant => 0.0,
            PerturbationKind::Sinusoidal => a * w,
            // ‖∇e^{−α(1+r²)}‖₂ peaks at r² = 1/(2α) with value √(2α)·e^{−α−1/2}
            PerturbationKind::GaussianTail => w * sqrt_d * (2.0 * a).sqrt() * (-a - 0.5).exp(),
            PerturbationKind::Bump { radius } => a * w * sqrt_d * 2.0 / radius * bump_slope_max(),
        }
    }

    /// ‖Δ‖₁ = C⁰ + C¹.
    pub fn c1_norm(&self) -> f64 {
        self.c0_bound() + self.c1_bound()
    }

    /// Adds Δ(x) to `out` componentwise.
    pub fn add_to<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        let a = self.alpha;
        match self.kind {
            PerturbationKind::Constant => {
                for (o, w) in out.iter_mut().zip(&self.weights) {
                    *o = *o + a * w;
                }
            }
            PerturbationKind::Sinusoidal => {
                for i in 0..out.len() {
                    if self.weights[i] != 0.0 {
                        out[i] = out[i] + (x[i] + self.phases[i]).sin() * (a * self.weights[i]);
                    }
                }
            }
            PerturbationKind::GaussianTail => {
                let r2 = self.radius_sq(x);
                let h = ((r2 + 1.0) * (-a)).exp();
                for (o, w) in out.iter_mut().zip(&self.weights) {
                    *o = *o + h * *w;
                }
            }
            PerturbationKind::Bump { radius } => {
                let s = self.radius_sq(x) / (radius * radius);
                if s.value() >= 1.0 {
                    return;
                }
                let h = ((-s + 1.0).powi(-1) * -1.0 + 1.0).exp();
                for (o, w) in out.iter_mut().zip(&self.weights) {
                    *o = *o + h * (a * w);
                }
            }
        }
    }

    fn radius_sq<T: Scalar>(&self, x: &[T]) -> T {
        x.iter()
            .zip(&self.center)
            .fold(T::cst(0.0), |acc, (xi, ci)| {
                let d = *xi - *ci;
                acc + d * d
            })
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.add_to(x, &mut out);
        out
    }

    /// Analytic Jacobian DΔ(x).
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let a = self.alpha;
        let mut j = DMatrix::zeros(n, n);
        match self.kind {
            PerturbationKind::Constant => {}
            PerturbationKind::Sinusoidal => {
                for i in 0..n {
                    j[(i, i)] = a * self.weights[i] * (x[i] + self.phases[i]).cos();
                }
            }
            PerturbationKind::GaussianTail => {
                let r2 = self.radius_sq(x);
                let h = (-a * (1.0 + r2)).exp();
                for i in 0..n {
                    for k in 0..n {
                        j[(i, k)] = self.weights[i] * h * (-2.0 * a * (x[k] - self.center[k]));
                    }
                }
            }
            PerturbationKind::Bump { radius } => {
                let rho2 = radius * radius;
                let s = self.radius_sq(x) / rho2;
                if s < 1.0 {
                    let h = (1.0 - 1.0 / (1.0 - s)).exp();
                    let dh_ds = -h / ((1.0 - s) * (1.0 - s));
                    for i in 0..n {
                        for k in 0..n {
                            let ds = 2.0 * (x[k] - self.center[k]) / rho2;
                            j[(i, k)] = a * self.weights[i] * dh_ds * ds;
                        }
                    }
                }
            }
        }
        j
    }
}

/// Max-row-sum matrix norm, the operator norm induced by the max norm.
pub fn row_sum_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// max over s ∈ (0,1) of √s·e^{1−1/(1−s)}/(1−s)², padded by 1%.
fn bump_slope_max() -> f64 {
    let g = |s: f64| s.sqrt() * (1.0 - 1.0 / (1.0 - s)).exp() / ((1.0 - s) * (1.0 - s));
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // golden-section search on a unimodal profile
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - inv_phi * (hi - lo);
        let b = lo + inv_phi * (hi - lo);
        if g(a) < g(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    1.01 * g(0.5 * (lo + hi))
}
