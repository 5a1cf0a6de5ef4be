//! Tabulated planar fields with C¹ bicubic (Keys cubic convolution)
//! interpolation.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Samples of (u, v) on the grid (x_min + i·dx, y_min + j·dy), stored
/// row-major: `u[j * nx + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub y_min: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl GridSpec {
    /// Tabulates `f` on the given lattice.
    pub fn sample(
        f: impl Fn(f64, f64) -> [f64; 2],
        (x_min, y_min): (f64, f64),
        (dx, dy): (f64, f64),
        (nx, ny): (usize, usize),
    ) -> Self {
        let mut u = Vec::with_capacity(nx * ny);
        let mut v = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let [a, b] = f(x_min + i as f64 * dx, y_min + j as f64 * dy);
                u.push(a);
                v.push(b);
            }
        }
        Self { x_min, y_min, dx, dy, nx, ny, u, v }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.nx < 4 || self.ny < 4 {
            return Err("grid needs at least 4 samples per axis".into());
        }
        if !(self.dx > 0.0 && self.dy > 0.0) {
            return Err("grid spacing must be positive".into());
        }
        let n = self.nx * self.ny;
        if self.u.len() != n || self.v.len() != n {
            return Err(format!("expected {n} samples per component"));
        }
        if self.u.iter().chain(&self.v).any(|s| !s.is_finite()) {
            return Err("grid samples must be finite".into());
        }
        Ok(())
    }

    /// Interpolated (u, v). Outside the table the edge cells extrapolate.
    pub fn eval<T: Scalar>(&self, x: T, y: T) -> [T; 2] {
        let (i, tx) = locate(x, self.x_min, self.dx, self.nx);
        let (j, ty) = locate(y, self.y_min, self.dy, self.ny);
        let wx = weights(tx);
        let wy = weights(ty);
        let mut out = [T::cst(0.0); 2];
        for (b, wyb) in wy.iter().enumerate() {
            let row = clamp(j + b as isize - 1, self.ny);
            let mut su = T::cst(0.0);
            let mut sv = T::cst(0.0);
            for (a, wxa) in wx.iter().enumerate() {
                let idx = row * self.nx + clamp(i + a as isize - 1, self.nx);
                su = su + *wxa * self.u[idx];
                sv = sv + *wxa * self.v[idx];
            }
            out[0] = out[0] + su * *wyb;
            out[1] = out[1] + sv * *wyb;
        }
        out
    }
}

fn locate<T: Scalar>(x: T, min: f64, h: f64, n: usize) -> (isize, T) {
    let s = (x - min) / h;
    let cell = s.value().floor().clamp(0.0, (n - 2) as f64);
    (cell as isize, s - cell)
}

fn clamp(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Keys kernel (a = −1/2) weights for the four samples around t ∈ [0, 1).
fn weights<T: Scalar>(t: T) -> [T; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        (-t3 + t2 * 2.0 - t) * 0.5,
        (t3 * 3.0 - t2 * 5.0 + 2.0) * 0.5,
        (-t3 * 3.0 + t2 * 4.0 + t) * 0.5,
        (t3 - t2) * 0.5,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quadratics_and_samples() {
        // cubic convolution is exact on quadratics away from the edges
        let g = GridSpec::sample(
            |x, y| [x * x - y, 2.0 * x * y],
            (-2.0, -2.0),
            (0.25, 0.25),
            (17, 17),
        );
        g.validate().unwrap();
        for &(x, y) in &[(0.1, 0.3), (-0.77, 0.41), (1.0, -1.0)] {
            let [u, v] = g.eval(x, y);
            assert!((u - (x * x - y)).abs() < 1e-12, "{u}");
            assert!((v - 2.0 * x * y).abs() < 1e-12);
        }
    }
}
