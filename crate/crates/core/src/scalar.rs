//! Scalar abstraction shared by every evaluator in the crate.
//!
//! All vector fields and maps are written once, generically over [`Scalar`].
//! Instantiated with `f64` they are plain evaluators; instantiated with
//! [`Dual<N>`] they carry an N-dimensional tangent and yield exact Jacobians
//! by forward-mode differentiation. Every nonlinear primitive enters through
//! [`Scalar::chain`], so branchy primitives (plateaus, compact support) only
//! need a value and a derivative at the current point.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;

    fn value(&self) -> f64;

    /// True when the value and every tangent component are exactly zero.
    fn is_exact_zero(&self) -> bool;

    /// Apply a scalar function whose value at `self.value()` is `f` and whose
    /// derivative is produced lazily by `df`.
    fn chain(self, f: f64, df: impl FnOnce() -> f64) -> Self;

    /// Two-argument version of [`Scalar::chain`]: `df` returns the partials
    /// with respect to `self` and `other`.
    fn chain2(self, other: Self, f: f64, df: impl FnOnce() -> (f64, f64)) -> Self;

    fn sin(self) -> Self {
        let v = self.value();
        self.chain(v.sin(), || v.cos())
    }

    fn cos(self) -> Self {
        let v = self.value();
        self.chain(v.cos(), || -v.sin())
    }

    fn exp(self) -> Self {
        let e = self.value().exp();
        self.chain(e, || e)
    }

    fn ln(self) -> Self {
        let v = self.value();
        self.chain(v.ln(), || 1.0 / v)
    }

    fn sqrt(self) -> Self {
        let s = self.value().sqrt();
        self.chain(s, || 0.5 / s)
    }

    fn powi(self, n: i32) -> Self {
        let v = self.value();
        self.chain(v.powi(n), || f64::from(n) * v.powi(n - 1))
    }

    fn powf(self, p: Self) -> Self {
        let (x, y) = (self.value(), p.value());
        let f = x.powf(y);
        self.chain2(p, f, || {
            let dx = if y == 0.0 { 0.0 } else { y * x.powf(y - 1.0) };
            let dy = if x > 0.0 { f * x.ln() } else { 0.0 };
            (dx, dy)
        })
    }

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }

    #[inline]
    fn value(&self) -> f64 {
        *self
    }

    #[inline]
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }

    #[inline]
    fn chain(self, f: f64, _df: impl FnOnce() -> f64) -> Self {
        f
    }

    #[inline]
    fn chain2(self, _other: Self, f: f64, _df: impl FnOnce() -> (f64, f64)) -> Self {
        f
    }
}

/// Forward-mode dual number with an `N`-dimensional tangent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// The `i`-th independent variable with value `v`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }

    /// Seed a whole point as independent variables.
    pub fn seed(x: &[f64; N]) -> [Self; N] {
        std::array::from_fn(|i| Self::var(x[i], i))
    }

    #[inline]
    fn map_d(self, k: f64) -> [f64; N] {
        let mut d = self.d;
        for di in &mut d {
            *di *= k;
        }
        d
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }

    fn value(&self) -> f64 {
        self.v
    }

    fn is_exact_zero(&self) -> bool {
        self.v == 0.0 && self.d.iter().all(|&x| x == 0.0)
    }

    fn chain(self, f: f64, df: impl FnOnce() -> f64) -> Self {
        if self.d.iter().all(|&x| x == 0.0) {
            return Self::constant(f);
        }
        let k = df();
        Self { v: f, d: self.map_d(k) }
    }

    fn chain2(self, other: Self, f: f64, df: impl FnOnce() -> (f64, f64)) -> Self {
        let (a, b) = df();
        let mut d = [0.0; N];
        for (i, di) in d.iter_mut().enumerate() {
            *di = a * self.d[i] + b * other.d[i];
        }
        Self { v: f, d }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (di, oi) in d.iter_mut().zip(o.d) {
            *di += oi;
        }
        Self { v: self.v + o.v, d }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        let mut d = self.d;
        for (di, oi) in d.iter_mut().zip(o.d) {
            *di -= oi;
        }
        Self { v: self.v - o.v, d }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for (i, di) in d.iter_mut().enumerate() {
            *di = self.d[i] * o.v + self.v * o.d[i];
        }
        Self { v: self.v * o.v, d }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        let mut d = [0.0; N];
        for (i, di) in d.iter_mut().enumerate() {
            *di = (self.d[i] - q * o.d[i]) * inv;
        }
        Self { v: q, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { v: -self.v, d: self.map_d(-1.0) }
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(self, o: f64) -> Self {
        Self { v: self.v + o, d: self.d }
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: f64) -> Self {
        Self { v: self.v - o, d: self.d }
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: f64) -> Self {
        Self { v: self.v * o, d: self.map_d(o) }
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: f64) -> Self {
        Self { v: self.v / o, d: self.map_d(1.0 / o) }
    }
}
