//! C∞ scalar building blocks: the bump χ, the smooth step ζ and its windowed
//! form ζ_{a,b}, the periodic gate φ and its halting-aware version φ̄, the
//! smooth rounding r, and residue extraction modulo a base.
//!
//! Plateau branches return exact values by branching on the argument, so
//! `smooth_round(k ± 1/4) == k` and the residue kernels are exactly 0 or 1 at
//! integers. Off-plateau values are only constrained to be smooth and
//! monotone; callers must not rely on them.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{gauss_legendre, integrate_adaptive};
use crate::scalar::{Dual, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothError {
    #[error("degenerate window: a = {a} must be < b = {b}")]
    DegenerateWindow { a: f64, b: f64 },
    #[error("residue base must be at least 2, got {0}")]
    BadBase(u32),
}

#[inline]
fn chi_f64(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        (1.0 / (x * (x - 1.0))).exp()
    }
}

#[inline]
fn chi_prime_f64(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let p = x * (x - 1.0);
        (1.0 / p).exp() * (1.0 - 2.0 * x) / (p * p)
    }
}

/// Bump χ(x) = exp(1/(x(x−1))) on (0,1), zero elsewhere.
pub fn chi<T: Scalar>(x: T) -> T {
    let v = x.value();
    x.chain(chi_f64(v), || chi_prime_f64(v))
}

/// Normalizer c = (∫₀¹ χ)⁻¹, computed once.
pub fn zeta_normalizer() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let (left, _) = integrate_adaptive(chi_f64, 0.0, 0.5, 1e-14, 0.0);
        let (right, _) = integrate_adaptive(chi_f64, 0.5, 1.0, 1e-14, 0.0);
        1.0 / (left + right)
    })
}

const ZETA_PANELS: usize = 1024;

/// Quintic Hermite table of ζ on [0, 1/2]: (ζ, ζ′, ζ″) at each node.
struct ZetaTable {
    h: f64,
    nodes: Vec<[f64; 3]>,
}

fn zeta_table() -> &'static ZetaTable {
    static TABLE: OnceLock<ZetaTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let c = zeta_normalizer();
        let h = 0.5 / ZETA_PANELS as f64;
        let (gx, gw) = gauss_legendre(16);
        let mut nodes = Vec::with_capacity(ZETA_PANELS + 1);
        let mut acc = 0.0;
        nodes.push([0.0, 0.0, 0.0]);
        for i in 0..ZETA_PANELS {
            let lo = i as f64 * h;
            let mid = lo + 0.5 * h;
            let panel: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| w * chi_f64(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h;
            acc += panel;
            let x = (i + 1) as f64 * h;
            nodes.push([c * acc, c * chi_f64(x), c * chi_prime_f64(x)]);
        }
        // ζ(1/2) = 1/2 by symmetry of χ; remove the last ulps of drift so the
        // reflected branch joins continuously.
        let scale = 0.5 / nodes[ZETA_PANELS][0];
        for n in &mut nodes {
            n[0] *= scale;
        }
        ZetaTable { h, nodes }
    })
}

fn zeta_half(x: f64) -> f64 {
    let table = zeta_table();
    let s = x / table.h;
    let i = (s.floor() as usize).min(ZETA_PANELS - 1);
    let t = s - i as f64;
    let h = table.h;
    let [p0, d0, s0] = table.nodes[i];
    let [p1, d1, s1] = table.nodes[i + 1];
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
    h00 * p0 + h10 * h * d0 + h20 * h * h * s0 + h01 * p1 + h11 * h * d1 + h21 * h * h * s1
}

/// ζ near 0, where χ grows too fast for the table. χ decays by about e⁻⁴⁰
/// over [x − 40x², x], so a Gauss–Legendre rule on that window captures the
/// whole integral.
fn zeta_small(x: f64) -> f64 {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (gx, gw) = RULE.get_or_init(|| gauss_legendre(32));
    let lo = (x - 40.0 * x * x).max(0.0);
    let (mid, half) = (0.5 * (x + lo), 0.5 * (x - lo));
    let s: f64 = gx.iter().zip(gw).map(|(t, w)| w * chi_f64(mid + half * t)).sum();
    zeta_normalizer() * s * half
}

const ZETA_SMALL: f64 = 1.0 / 40.0;

fn zeta_f64(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else if x < ZETA_SMALL {
        zeta_small(x)
    } else if x > 1.0 - ZETA_SMALL {
        1.0 - zeta_small(1.0 - x)
    } else if x <= 0.5 {
        zeta_half(x)
    } else {
        1.0 - zeta_half(1.0 - x)
    }
}

/// Smooth Heaviside step: 0 for x ≤ 0, 1 for x ≥ 1, ζ′ = c·χ.
pub fn zeta<T: Scalar>(x: T) -> T {
    let v = x.value();
    x.chain(zeta_f64(v), || zeta_normalizer() * chi_f64(v))
}

/// ζ((x − a)/(b − a)); the caller guarantees `a < b`.
#[inline]
pub(crate) fn zeta_window<T: Scalar>(a: f64, b: f64, x: T) -> T {
    zeta((x - a) / (b - a))
}

/// Windowed smooth step ζ_{a,b}: 0 for x ≤ a, 1 for x ≥ b.
pub fn zeta_ab<T: Scalar>(a: f64, b: f64, x: T) -> Result<T, SmoothError> {
    if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
        return Err(SmoothError::DegenerateWindow { a, b });
    }
    Ok(zeta_window(a, b, x))
}

/// Periodic gate φ(t) = ζ(sin(2πt − π/4) − 1/√2), period 1, identically
/// zero on [0, 1/4] ∪ [1/2, 1] and positive on (1/4, 1/2).
pub fn phi<T: Scalar>(t: T) -> T {
    let frac = t.value() - t.value().floor();
    if frac <= 0.25 || frac >= 0.5 {
        return T::cst(0.0);
    }
    let local = t - t.value().floor();
    let s = (local * (2.0 * PI) - PI / 4.0).sin() - FRAC_1_SQRT_2;
    zeta(s)
}

/// Halting-aware gate φ̄(t, v₃) = φ(t) + ζ_{m−1/4, m−3/16}(v₃).
pub fn phi_bar<T: Scalar>(t: T, v3: T, m: u32) -> T {
    let mf = f64::from(m);
    phi(t) + zeta_window(mf - 0.25, mf - 3.0 / 16.0, v3)
}

/// Smooth rounding: exactly k on |y − k| ≤ 1/4, ζ-interpolated in between.
pub fn smooth_round<T: Scalar>(y: T) -> T {
    let v = y.value();
    let k = v.round();
    if (v - k).abs() <= 0.25 {
        return T::cst(k);
    }
    let fl = v.floor();
    zeta_window(fl + 0.25, fl + 0.75, y) + fl
}

/// Trigonometric interpolation kernel on residues modulo `b`: b-periodic,
/// C∞, and equal to 1 at x ≡ j (mod b) and 0 at every other integer.
pub fn residue_kernel<T: Scalar>(b: u32, j: i64, x: T) -> T {
    let bf = f64::from(b);
    let u = x.value() - j as f64;
    let half = (b - 1) / 2;
    let nyquist = b % 2 == 0;
    let value = if u == u.round() {
        if (u.rem_euclid(bf)) == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let mut s = 1.0;
        for k in 1..=half {
            s += 2.0 * (2.0 * PI * f64::from(k) * u / bf).cos();
        }
        if nyquist {
            s += (PI * u).cos();
        }
        s / bf
    };
    x.chain(value, || {
        let mut d = 0.0;
        for k in 1..=half {
            let w = 2.0 * PI * f64::from(k) / bf;
            d -= 2.0 * w * (w * u).sin();
        }
        if nyquist {
            d -= PI * (PI * u).sin();
        }
        d / bf
    })
}

/// All residue kernels K_0..K_{b−1} evaluated at the same point.
pub fn residue_kernels<T: Scalar>(b: u32, x: T) -> Vec<T> {
    (0..i64::from(b)).map(|j| residue_kernel(b, j, x)).collect()
}

/// Smooth residue: equals `x mod b` exactly when x is within 1/4 of an integer.
pub fn smooth_mod<T: Scalar>(x: T, b: u32) -> T {
    let r = smooth_round(x);
    residue_kernels(b, r)
        .into_iter()
        .enumerate()
        .fold(T::cst(0.0), |acc, (j, k)| acc + k * j as f64)
}

/// Smooth quotient: equals `floor(x / b)` exactly when x is within 1/4 of an integer.
pub fn smooth_div<T: Scalar>(x: T, b: u32) -> T {
    (smooth_round(x) - smooth_mod(x, b)) / f64::from(b)
}

/// Tagged scalar primitive with value and first derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothScalarFn {
    Chi,
    Zeta,
    ZetaAb { a: f64, b: f64 },
    Phi,
    SmoothRound,
    ResidueKernel { b: u32, j: i64 },
}

impl SmoothScalarFn {
    pub fn zeta_ab(a: f64, b: f64) -> Result<Self, SmoothError> {
        if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
            return Err(SmoothError::DegenerateWindow { a, b });
        }
        Ok(Self::ZetaAb { a, b })
    }

    pub fn residue_kernel(b: u32, j: i64) -> Result<Self, SmoothError> {
        if b < 2 {
            return Err(SmoothError::BadBase(b));
        }
        Ok(Self::ResidueKernel { b, j })
    }

    pub fn eval<T: Scalar>(&self, x: T) -> T {
        match *self {
            Self::Chi => chi(x),
            Self::Zeta => zeta(x),
            Self::ZetaAb { a, b } => zeta_window(a, b, x),
            Self::Phi => phi(x),
            Self::SmoothRound => smooth_round(x),
            Self::ResidueKernel { b, j } => residue_kernel(b, j, x),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval(Dual::<1>::var(x, 0)).d[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeta_oracle(x: f64) -> f64 {
        // independent route: adaptive quadrature from 0 to x
        if x <= 0.0 {
            return 0.0;
        }
        let top = x.min(1.0);
        let (num, _) = integrate_adaptive(chi_f64, 0.0, top, 1e-14, 1e-300);
        let (den, _) = integrate_adaptive(chi_f64, 0.0, 1.0, 1e-14, 0.0);
        num / den
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi(-1.0), 0.0);
        assert_eq!(chi(2.0), 0.0);
        assert!((chi(0.5) - (-4.0f64).exp()).abs() < 1e-16);
        assert!((chi(0.5) - 0.018_315_6).abs() < 1e-7);
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta(-3.0), 0.0);
        assert!((zeta(0.5) - 0.5).abs() < 1e-15);
        for m in 2..8u32 {
            let mf = f64::from(m);
            assert_eq!(zeta_ab(mf - 0.25, mf - 3.0 / 16.0, mf).unwrap(), 1.0);
        }
        assert!(matches!(
            zeta_ab(1.0, 1.0, 0.3),
            Err(SmoothError::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn normalizer_matches_high_precision_value() {
        // 1/∫₀¹ exp(1/(x(x−1))) dx, evaluated with 30-digit quadrature
        let c = zeta_normalizer();
        assert!((c - 142.250_375_777_095_87).abs() / c < 1e-10);
    }

    #[test]
    fn zeta_table_matches_adaptive_oracle() {
        for i in 1..200 {
            let x = i as f64 / 200.0;
            let err = (zeta(x) - zeta_oracle(x)).abs();
            assert!(err < 1e-12, "x = {x}, err = {err}");
        }
    }

    #[test]
    fn zeta_is_monotone_and_bounded() {
        let mut prev = zeta(-0.5);
        for i in 0..=10_000 {
            let x = -0.5 + 2.0 * i as f64 / 10_000.0;
            let z = zeta(x);
            assert!((0.0..=1.0).contains(&z));
            assert!(z >= prev, "decrease at {x}");
            prev = z;
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.0), 0.0);
        assert_eq!(phi(17.0 / 4.0), 0.0);
        let mid = phi(3.0 / 8.0);
        let expected = zeta_oracle(1.0 - FRAC_1_SQRT_2);
        assert!((mid - expected).abs() < 1e-12);
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn phi_vanishes_exactly_off_window() {
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            if t <= 0.25 || t >= 0.5 {
                assert_eq!(phi(t), 0.0);
                assert_eq!(phi(t - 3.0), 0.0);
            } else {
                assert!(phi(t) > 0.0, "t = {t}");
            }
        }
    }

    #[test]
    fn phi_bar_examples() {
        assert_eq!(phi_bar(0.1, 1.0, 5), 0.0);
        for m in [2u32, 3, 5] {
            let mf = f64::from(m);
            assert_eq!(phi_bar(0.0, mf, m), 1.0);
            assert_eq!(phi_bar(0.375, mf, m), phi(0.375) + 1.0);
        }
    }

    #[test]
    fn smooth_round_examples() {
        assert_eq!(smooth_round(5.1), 5.0);
        assert_eq!(smooth_round(4.8), 5.0);
        assert!((smooth_round(5.5) - 5.5).abs() < 1e-15);
        assert_eq!(smooth_round(-2.25), -2.0);
        assert_eq!(smooth_round(1e6 + 0.25), 1e6);
    }

    #[test]
    fn smooth_mod_and_div_examples() {
        assert_eq!(smooth_mod(35.0, 10), 5.0);
        assert_eq!(smooth_mod(35.2, 10), 5.0);
        assert_eq!(smooth_div(35.0, 10), 3.0);
        assert_eq!(smooth_div(34.9, 10), 3.0);
        assert_eq!(smooth_mod(7.0, 2), 1.0);
        assert_eq!(smooth_mod(9.0, 3), 0.0);
        assert_eq!(smooth_div(9.0, 3), 3.0);
    }

    #[test]
    fn residue_kernel_is_periodic_and_smooth() {
        for b in [2u32, 3, 7, 10] {
            for j in 0..i64::from(b) {
                let k = SmoothScalarFn::residue_kernel(b, j).unwrap();
                for x in [0.3, 1.7, -2.2, 4.45] {
                    let shifted = k.value(x + f64::from(b));
                    assert!((k.value(x) - shifted).abs() < 1e-12);
                }
            }
        }
    }
}
