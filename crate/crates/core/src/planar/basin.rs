//! Basin rasters: inventory-based computation, brute-force oracle, and
//! Hausdorff comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    classify::{classify_point, stable_manifold_curve, Status},
    dist, polyline_dist, Inventory, PlanarError, PlanarField,
};
use crate::integrator::{solve, Control, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "label", content = "index", rename_all = "snake_case")]
pub enum CellLabel {
    /// Cell center outside the disk.
    Outside,
    Sink(usize),
    Cycle(usize),
    Escaped,
    ExcludedB,
    Margin,
    Unknown,
}

impl CellLabel {
    /// A label that asserts where the cell's trajectory goes.
    pub fn is_definite(self) -> bool {
        matches!(self, Self::Sink(_) | Self::Cycle(_) | Self::Escaped)
    }
}

/// Labels on the 2^l × 2^l grid of cells covering [−R, R]². Cell (i, j)
/// has center (−R + (i + ½)h, −R + (j + ½)h) with h = 2R/2^l.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinRaster {
    pub level: u32,
    pub radius: f64,
    pub target: Option<usize>,
    pub labels: Vec<CellLabel>,
}

/// A set of cells of a raster grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    pub level: u32,
    pub radius: f64,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Agreement {
    pub compared: usize,
    pub agreed: usize,
}

impl Agreement {
    pub fn fraction(&self) -> f64 {
        if self.compared == 0 {
            1.0
        } else {
            self.agreed as f64 / self.compared as f64
        }
    }
}

impl BasinRaster {
    pub fn side(&self) -> usize {
        1 << self.level
    }

    pub fn cell_size(&self) -> f64 {
        cell_size(self.radius, self.level)
    }

    pub fn center(&self, idx: usize) -> [f64; 2] {
        cell_center(self.radius, self.level, idx)
    }

    pub fn label_at(&self, x: [f64; 2]) -> Option<CellLabel> {
        let n = self.side();
        let h = self.cell_size();
        let i = ((x[0] + self.radius) / h).floor();
        let j = ((x[1] + self.radius) / h).floor();
        if i < 0.0 || j < 0.0 || i >= n as f64 || j >= n as f64 {
            return None;
        }
        Some(self.labels[j as usize * n + i as usize])
    }

    pub fn count(&self, pred: impl Fn(CellLabel) -> bool) -> usize {
        self.labels.iter().filter(|l| pred(**l)).count()
    }

    fn is_target(&self, l: CellLabel) -> bool {
        matches!((l, self.target), (CellLabel::Sink(j), Some(t)) if j == t)
    }

    fn same_grid(&self, other: &Self) -> Result<(), PlanarError> {
        if self.level != other.level || self.radius != other.radius {
            return Err(PlanarError::GridMismatch);
        }
        Ok(())
    }

    /// Cells labeled with the target sink.
    pub fn target_set(&self) -> CellSet {
        self.cell_set(|l| self.is_target(l))
    }

    /// Disk cells not labeled with the target sink.
    pub fn target_complement(&self) -> CellSet {
        self.cell_set(|l| l != CellLabel::Outside && !self.is_target(l))
    }

    pub fn cell_set(&self, pred: impl Fn(CellLabel) -> bool) -> CellSet {
        CellSet {
            level: self.level,
            radius: self.radius,
            mask: self.labels.iter().map(|l| pred(*l)).collect(),
        }
    }

    /// Agreement with `oracle` on the cells where this raster is neither
    /// outside, in B, nor in the margin band.
    pub fn agreement(&self, oracle: &BasinRaster) -> Result<Agreement, PlanarError> {
        self.same_grid(oracle)?;
        let mut a = Agreement { compared: 0, agreed: 0 };
        for (l, o) in self.labels.iter().zip(&oracle.labels) {
            if matches!(l, CellLabel::Outside | CellLabel::Margin | CellLabel::ExcludedB) {
                continue;
            }
            a.compared += 1;
            a.agreed += usize::from(l == o);
        }
        Ok(a)
    }

    /// Byte code of a label in the PGM output.
    pub fn code(&self, l: CellLabel) -> u8 {
        match l {
            CellLabel::Outside => 0,
            CellLabel::Unknown => 32,
            CellLabel::ExcludedB => 64,
            CellLabel::Margin => 96,
            CellLabel::Escaped => 128,
            CellLabel::Cycle(i) => 160 + i.min(31) as u8,
            _ if self.is_target(l) => 255,
            CellLabel::Sink(j) => 192 + j.min(62) as u8,
        }
    }

    /// Binary PGM, one byte per cell, top row = largest y.
    pub fn to_pgm(&self) -> Vec<u8> {
        let n = self.side();
        let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
        for j in (0..n).rev() {
            out.extend(self.labels[j * n..(j + 1) * n].iter().map(|l| self.code(*l)));
        }
        out
    }

    /// JSON legend describing the PGM codes present and their counts.
    pub fn legend(&self) -> serde_json::Value {
        let mut seen: Vec<(u8, CellLabel, usize)> = Vec::new();
        for l in &self.labels {
            match seen.iter_mut().find(|s| s.1 == *l) {
                Some(s) => s.2 += 1,
                None => seen.push((self.code(*l), *l, 1)),
            }
        }
        seen.sort_by_key(|s| s.0);
        serde_json::json!({
            "level": self.level,
            "side": self.side(),
            "radius": self.radius,
            "cell_size": self.cell_size(),
            "target_sink": self.target,
            "codes": seen.iter().map(|(code, label, count)| serde_json::json!({
                "code": code,
                "label": label,
                "target": self.is_target(*label),
                "cells": count,
            })).collect::<Vec<_>>(),
        })
    }
}

fn cell_size(radius: f64, level: u32) -> f64 {
    2.0 * radius / (1u64 << level) as f64
}

fn cell_center(radius: f64, level: u32, idx: usize) -> [f64; 2] {
    let n = 1usize << level;
    let h = cell_size(radius, level);
    let (i, j) = (idx % n, idx / n);
    [-radius + (i as f64 + 0.5) * h, -radius + (j as f64 + 0.5) * h]
}

/// Smallest level with cell size ≤ 1/(4k).
pub fn level_for(radius: f64, k: u32) -> u32 {
    let mut l = 0;
    while cell_size(radius, l) > 1.0 / (4.0 * k as f64) {
        l += 1;
    }
    l
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinOptions {
    /// Accuracy parameter: the margin band has width 1/k.
    pub k: u32,
    /// Grid level; defaults to the coarsest one with cells ≤ 1/(4k).
    pub level: Option<u32>,
    pub t_max: f64,
    pub seed_resolution: usize,
    /// Backward integration time for stable manifolds.
    pub manifold_t: f64,
}

impl BasinOptions {
    pub fn new(k: u32) -> Self {
        Self { k, level: None, t_max: 200.0, seed_resolution: 24, manifold_t: 50.0 }
    }

    pub fn with_level(mut self, level: u32) -> Self {
        self.level = Some(level);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinReport {
    pub raster: BasinRaster,
    pub inventory: Inventory,
    /// Stable manifolds of the saddles, in inventory order.
    pub gammas: Vec<Vec<[f64; 2]>>,
    /// Cells passed to the classifier.
    pub classified: usize,
    pub timeouts: usize,
}

/// Inventory, stable manifolds, margin band, then parallel classification
/// of the remaining disk cells. `target` indexes [`Inventory::sinks`].
pub fn compute_basin(
    field: &PlanarField,
    target: usize,
    opts: &BasinOptions,
) -> Result<BasinReport, PlanarError> {
    let inv = Inventory::build(field, opts.seed_resolution)?;
    compute_basin_with(field, inv, target, opts)
}

/// [`compute_basin`] with a prebuilt inventory.
pub fn compute_basin_with(
    field: &PlanarField,
    inv: Inventory,
    target: usize,
    opts: &BasinOptions,
) -> Result<BasinReport, PlanarError> {
    let count = inv.sinks().len();
    if target >= count {
        return Err(PlanarError::BadSink { index: target, count });
    }
    let gammas = inv
        .equilibria
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == super::EquilibriumKind::Saddle)
        .map(|(i, _)| stable_manifold_curve(i, &inv, field, opts.manifold_t))
        .collect::<Result<Vec<_>, _>>()?;
    let b_curves = inv.b_boundaries();
    let radius = field.radius();
    let level = opts.level.unwrap_or_else(|| level_for(radius, opts.k));
    let eps = 1.0 / opts.k as f64;
    let n = 1usize << level;

    let labels = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let c = cell_center(radius, level, idx);
            if c[0].hypot(c[1]) > radius {
                return Ok(CellLabel::Outside);
            }
            let near = |curves: &[Vec<[f64; 2]>]| curves.iter().any(|g| polyline_dist(c, g) <= eps);
            if near(&gammas) || near(&b_curves) {
                return Ok(CellLabel::Margin);
            }
            if inv.in_b(c) {
                return Ok(CellLabel::ExcludedB);
            }
            let status = classify_point(c, &inv, field, opts.t_max, target)?.status;
            Ok(match status {
                Status::StatusI => CellLabel::Sink(target),
                Status::StatusII(j) => CellLabel::Sink(j),
                Status::StatusIII(i) => CellLabel::Cycle(i),
                Status::Escaped => CellLabel::Escaped,
                Status::Timeout => CellLabel::Unknown,
            })
        })
        .collect::<Result<Vec<_>, PlanarError>>()?;

    let raster = BasinRaster { level, radius, target: Some(target), labels };
    let classified = raster.count(|l| {
        !matches!(l, CellLabel::Outside | CellLabel::Margin | CellLabel::ExcludedB)
    });
    let timeouts = raster.count(|l| l == CellLabel::Unknown);
    if timeouts * 1000 > classified {
        return Err(PlanarError::IncompleteInventory { timeouts, cells: classified });
    }
    Ok(BasinReport { raster, inventory: inv, gammas, classified, timeouts })
}

/// An attractor known to the oracle, with the label it assigns.
#[derive(Debug, Clone, PartialEq)]
pub enum Attractor {
    Point { sink: usize, at: [f64; 2] },
    Cycle { annulus: usize, path: Vec<[f64; 2]> },
}

impl Attractor {
    fn distance(&self, x: [f64; 2]) -> f64 {
        match self {
            Self::Point { at, .. } => dist(*at, x),
            Self::Cycle { path, .. } => polyline_dist(x, path),
        }
    }

    fn label(&self) -> CellLabel {
        match self {
            Self::Point { sink, .. } => CellLabel::Sink(*sink),
            Self::Cycle { annulus, .. } => CellLabel::Cycle(*annulus),
        }
    }
}

/// Integrates every disk cell center for time `t` and labels it by the
/// nearest attractor within `snap`. Trajectories leaving the disk are
/// labeled escaped; anything else is unknown.
pub fn brute_force_classify(
    field: &PlanarField,
    level: u32,
    t: f64,
    attractors: &[Attractor],
    snap: f64,
    target: Option<usize>,
) -> BasinRaster {
    let radius = field.radius();
    let n = 1usize << level;
    let tol = Tolerances::new(1e-8, 1e-10).with_h_max(1.0);
    let labels = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let c = cell_center(radius, level, idx);
            if c[0].hypot(c[1]) > radius {
                return CellLabel::Outside;
            }
            let mut escaped = false;
            let run = solve(field, &c, 0.0, t, &tol, |step| {
                let y = step.eval(step.t1());
                if y[0].hypot(y[1]) > radius {
                    escaped = true;
                    return Control::Stop;
                }
                Control::Continue
            });
            if escaped {
                return CellLabel::Escaped;
            }
            let Ok((end, _)) = run else {
                return CellLabel::Unknown;
            };
            let end = [end[0], end[1]];
            attractors
                .iter()
                .map(|a| (a.distance(end), a.label()))
                .filter(|(d, _)| *d <= snap)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map_or(CellLabel::Unknown, |(_, l)| l)
        })
        .collect();
    BasinRaster { level, radius, target, labels }
}

/// Symmetric Hausdorff distance between the cell-center sets, exact over
/// the grid (Euclidean distance transform). Infinite if exactly one set
/// is empty.
pub fn hausdorff(a: &CellSet, b: &CellSet) -> Result<f64, PlanarError> {
    if a.level != b.level || a.radius != b.radius || a.mask.len() != b.mask.len() {
        return Err(PlanarError::GridMismatch);
    }
    let (ea, eb) = (a.mask.iter().any(|m| *m), b.mask.iter().any(|m| *m));
    if !ea && !eb {
        return Ok(0.0);
    }
    if ea != eb {
        return Ok(f64::INFINITY);
    }
    let n = 1usize << a.level;
    let directed = |from: &CellSet, to: &CellSet| {
        let d2 = squared_edt(&to.mask, n);
        from.mask
            .iter()
            .zip(&d2)
            .filter(|(m, _)| **m)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max)
    };
    let worst = directed(a, b).max(directed(b, a));
    Ok(worst.sqrt() * cell_size(a.radius, a.level))
}

/// Squared Euclidean distance (in cells) to the nearest set cell, by the
/// separable lower-envelope transform.
fn squared_edt(mask: &[bool], n: usize) -> Vec<f64> {
    let big = 1e20;
    let mut g: Vec<f64> = mask.iter().map(|m| if *m { 0.0 } else { big }).collect();
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            f[j] = g[j * n + i];
        }
        dt1d(&f, &mut d);
        for j in 0..n {
            g[j * n + i] = d[j];
        }
    }
    for j in 0..n {
        f.copy_from_slice(&g[j * n..(j + 1) * n]);
        dt1d(&f, &mut d);
        g[j * n..(j + 1) * n].copy_from_slice(&d);
    }
    g
}

fn dt1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut k = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let inter = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64)
    };
    for q in 1..n {
        let mut s = inter(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = inter(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dx = q as f64 - v[k] as f64;
        *dq = dx * dx + f[v[k]];
    }
}
