// SPDX-License-Identifier: Apache-2.0

//! Exact grid metrics (total variation in the ∫|f₁−f₂| convention, sup
//! distance), one-dimensional Wasserstein-1, characteristic-function
//! distance and two-sided brackets for the Fortet–Mourier distance.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distkit::{CharFn, DistSpec, GridDensity, Law, Samples};
use crate::error::{Error, Result};
use crate::quad::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridTv {
    /// Trapezoid ∫|f₁ − f₂| over the box.
    pub value: f64,
    /// |1 − mass₁| + |1 − mass₂|, bounding what lies outside the box.
    pub mass_defect: f64,
}

fn same_grid(f1: &GridDensity, f2: &GridDensity) -> Result<()> {
    if !f1.grid().same_as(f2.grid()) {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", f1.grid(), f2.grid())));
    }
    Ok(())
}

pub fn tv_grid(f1: &GridDensity, f2: &GridDensity) -> Result<GridTv> {
    same_grid(f1, f2)?;
    let g = f1.grid();
    let value = (0..g.len()).map(|i| (f1.values()[i] - f2.values()[i]).abs() * g.trapezoid_weight(i)).sum();
    Ok(GridTv { value, mass_defect: (1.0 - f1.mass()).abs() + (1.0 - f2.mass()).abs() })
}

pub fn sup_density_dist(f1: &GridDensity, f2: &GridDensity) -> Result<f64> {
    same_grid(f1, f2)?;
    Ok(f1.values().iter().zip(f2.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

const W1_TOL: f64 = 1e-8;

/// ∫|F_a − F_b| for one-dimensional laws.
pub fn w1_1d(a: &Law, b: &Law) -> Result<f64> {
    for l in [a, b] {
        if l.dim() != 1 {
            return Err(Error::UnsupportedDimension { dim: l.dim() });
        }
    }
    match (a, b) {
        (Law::Analytic(x), Law::Analytic(y)) => Ok(w1_analytic(x, y)),
        (Law::Empirical(x), Law::Empirical(y)) => Ok(w1_samples(x.data(), y.data())),
        (Law::Analytic(x), Law::Empirical(y)) | (Law::Empirical(y), Law::Analytic(x)) => Ok(w1_mixed(x, y.data())),
    }
}

fn w1_analytic(a: &DistSpec, b: &DistSpec) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo1, hi1, mut br) = a.support_hint();
    let (lo2, hi2, br2) = b.support_hint();
    br.extend(br2);
    let (lo, hi) = (lo1.min(lo2), hi1.max(hi2));
    if lo >= hi {
        return 0.0;
    }
    let f = |x: f64| (a.cdf(x).unwrap_or(0.0) - b.cdf(x).unwrap_or(0.0)).abs();
    integrate(f, lo, hi, &br, W1_TOL).value
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Exact ∫|F_N − G_M| for two empirical distribution functions.
fn w1_samples(x: &[f64], y: &[f64]) -> f64 {
    let (xs, ys) = (sorted(x), sorted(y));
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = f64::NEG_INFINITY;
    let mut acc = 0.0;
    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(a), Some(b)) => a.min(*b),
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        if prev.is_finite() {
            acc += (i as f64 / n - j as f64 / m).abs() * (next - prev);
        }
        while i < xs.len() && xs[i] == next {
            i += 1;
        }
        while j < ys.len() && ys[j] == next {
            j += 1;
        }
        prev = next;
    }
    acc
}

/// ∫|F − G_N| with F analytic, integrating each gap between order
/// statistics separately (G_N is constant there).
fn w1_mixed(a: &DistSpec, y: &[f64]) -> f64 {
    let ys = sorted(y);
    let n = ys.len();
    let (lo, hi, br) = a.support_hint();
    let cdf = |x: f64| a.cdf(x).unwrap_or(0.0);
    let tol = W1_TOL / (n as f64 + 2.0);
    let left = ys[0];
    let right = ys[n - 1];
    let mut acc = 0.0;
    if lo < left {
        acc += integrate(cdf, lo, left, &br, tol).value;
    }
    if right < hi {
        acc += integrate(|x| 1.0 - cdf(x), right, hi, &br, tol).value;
    }
    let gaps: f64 = (0..n - 1)
        .into_par_iter()
        .map(|k| {
            let (s, e) = (ys[k], ys[k + 1]);
            if e > s {
                let level = (k + 1) as f64 / n as f64;
                integrate(|x| (cdf(x) - level).abs(), s, e, &[], tol).value
            } else {
                0.0
            }
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    acc + gaps
}

/// Frequencies scanned by the CF-based metrics: radii in [0, u_max]
/// (one-dimensional) or the half-square [−u_max, u_max] × [0, u_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqGrid {
    pub u_max: f64,
    pub points: usize,
}

impl Default for FreqGrid {
    fn default() -> Self {
        FreqGrid { u_max: 50.0, points: 2001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witnessed {
    pub value: f64,
    pub witness: Vec<f64>,
    /// Number of ×2 grid refinements performed.
    pub refinements: u32,
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn scan_1d<F: Fn(f64) -> f64 + Sync>(f: &F, u_max: f64, points: usize) -> (f64, f64) {
    (0..points)
        .into_par_iter()
        .map(|i| {
            let u = u_max * i as f64 / (points - 1) as f64;
            (f(u), u)
        })
        .reduce(|| (f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
}

fn golden<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (fc, c)
    } else {
        (fd, d)
    }
}

fn scan_2d<F: Fn(&[f64]) -> f64 + Sync>(
    f: &F,
    cx: f64,
    cy: f64,
    half: f64,
    points: usize,
    y_floor: f64,
) -> (f64, [f64; 2]) {
    (0..points * points)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / points, idx % points);
            let x = cx - half + 2.0 * half * i as f64 / (points - 1) as f64;
            let y = (cy - half + 2.0 * half * j as f64 / (points - 1) as f64).max(y_floor);
            (f(&[x, y]), [x, y])
        })
        .reduce(
            || (f64::NEG_INFINITY, [0.0, 0.0]),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && (b.1[0], b.1[1]) < (a.1[0], a.1[1])) { b } else { a },
        )
}

/// Sup of a nonnegative function of the frequency over the grid, refined by
/// doubling the grid until the relative change is below 10⁻³, then polished
/// locally. The result is a lower estimate of the sup over all frequencies.
pub fn sup_over_freq<F: Fn(&[f64]) -> f64 + Sync>(f: F, dim: usize, grid: &FreqGrid) -> Witnessed {
    let points = grid.points.max(3);
    if dim == 1 {
        let g = |u: f64| f(&[u]);
        let (mut best, mut at) = scan_1d(&g, grid.u_max, points);
        let mut refinements = 0;
        let mut n = points;
        while refinements < 6 {
            n = 2 * n - 1;
            let (b, a) = scan_1d(&g, grid.u_max, n);
            refinements += 1;
            let change = (b - best).abs() / best.abs().max(1e-300);
            if b > best {
                best = b;
                at = a;
            }
            if change < 1e-3 {
                break;
            }
        }
        let h = grid.u_max / (n - 1) as f64;
        let (b, a) = golden(&g, (at - h).max(0.0), (at + h).min(grid.u_max));
        if b > best {
            best = b;
            at = a;
        }
        Witnessed { value: best.max(0.0), witness: vec![at], refinements }
    } else {
        let pts = points.min(401);
        let (mut best, mut at) = scan_2d(&f, 0.0, grid.u_max / 2.0, grid.u_max, pts, 0.0);
        let mut half = grid.u_max;
        let mut refinements = 0;
        for _ in 0..8 {
            half *= 4.0 / (pts - 1) as f64;
            let (b, a) = scan_2d(&f, at[0], at[1], half, 41, 0.0);
            refinements += 1;
            if b > best {
                best = b;
                at = a;
            }
        }
        Witnessed { value: best.max(0.0), witness: at.to_vec(), refinements }
    }
}

/// Grid estimate of sup_u |φ₁(u) − φ₂(u)| (a lower estimate of d_CF).
pub fn dcf(cf1: &CharFn, cf2: &CharFn, grid: &FreqGrid) -> Result<Witnessed> {
    check_dims(cf1, cf2)?;
    Ok(sup_over_freq(|u| (cf1.eval(u) - cf2.eval(u)).norm(), cf1.dim(), grid))
}

fn check_dims(cf1: &CharFn, cf2: &CharFn) -> Result<()> {
    if cf1.dim() != cf2.dim() {
        return Err(Error::GridMismatch(format!("cf dimensions {} and {}", cf1.dim(), cf2.dim())));
    }
    Ok(())
}

/// Lower bound sup_u |φ₁ − φ₂| / (2(k+1)(1+|u|)^k) for the order-k metric.
pub fn dk_lower(cf1: &CharFn, cf2: &CharFn, k: u32, grid: &FreqGrid) -> Result<Witnessed> {
    if k == 0 {
        return Err(Error::InvalidRegularity("order k must be >= 1".into()));
    }
    check_dims(cf1, cf2)?;
    let wave = |u: &[f64]| TestWave::dk_scale(k, norm(u));
    Ok(sup_over_freq(|u| (cf1.eval(u) - cf2.eval(u)).norm() * wave(u), cf1.dim(), grid))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricBracket {
    pub lower: f64,
    pub upper: f64,
    pub lower_witness: Vec<f64>,
    pub lower_method: String,
    pub upper_method: String,
}

/// lower = sup_u |φ₁ − φ₂|/(4(1+|u|)) from the smoothing inequality;
/// upper = W1 in one dimension, +∞ (tag "no_upper_bound") otherwise.
pub fn fm_bracket(a: &Law, b: &Law, grid: &FreqGrid) -> Result<MetricBracket> {
    if a.dim() != b.dim() {
        return Err(Error::GridMismatch(format!("law dimensions {} and {}", a.dim(), b.dim())));
    }
    let (c1, c2) = (a.cf(), b.cf());
    let lower = sup_over_freq(|u| (c1.eval(u) - c2.eval(u)).norm() / (4.0 * (1.0 + norm(u))), a.dim(), grid);
    let (upper, upper_method) =
        if a.dim() == 1 { (w1_1d(a, b)?, "w1".to_string()) } else { (f64::INFINITY, "no_upper_bound".to_string()) };
    Ok(MetricBracket {
        lower: lower.value.min(upper),
        upper,
        lower_witness: lower.witness,
        lower_method: "cf_smoothing".into(),
        upper_method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveKind {
    Sine,
    Cosine,
}

/// x ↦ scale·sin⟨u,x⟩ or scale·cos⟨u,x⟩, scaled into the unit ball of the
/// order-k test class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestWave {
    pub u: Vec<f64>,
    pub kind: WaveKind,
    pub order: u32,
    pub scale: f64,
}

impl TestWave {
    /// 1/(2(1+|u|)) at order 1 (the Fortet–Mourier class).
    pub fn fm_scale(r: f64) -> f64 {
        1.0 / (2.0 * (1.0 + r))
    }

    /// 1/(2(k+1)(1+|u|)^k).
    pub fn dk_scale(k: u32, r: f64) -> f64 {
        1.0 / (2.0 * (k + 1) as f64 * (1.0 + r).powi(k as i32))
    }

    pub fn new(u: Vec<f64>, kind: WaveKind, order: u32) -> Self {
        let r = norm(&u);
        let scale = if order == 1 { Self::fm_scale(r) } else { Self::dk_scale(order, r) };
        TestWave { u, kind, order, scale }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let t: f64 = self.u.iter().zip(x).map(|(a, b)| a * b).sum();
        self.scale
            * match self.kind {
                WaveKind::Sine => t.sin(),
                WaveKind::Cosine => t.cos(),
            }
    }

    /// Σ_{l≤k} sup|D^l f| = scale · Σ_{l≤k} |u|^l.
    pub fn derivative_norm_sum(&self) -> f64 {
        let r = norm(&self.u);
        self.scale * (0..=self.order).map(|l| r.powi(l as i32)).sum::<f64>()
    }

    /// E f(X₁) − E f(X₂) expressed through the characteristic functions.
    pub fn mean_difference(&self, cf1: &CharFn, cf2: &CharFn) -> f64 {
        let d: Complex64 = cf1.eval(&self.u) - cf2.eval(&self.u);
        self.scale
            * match self.kind {
                WaveKind::Sine => d.im,
                WaveKind::Cosine => d.re,
            }
    }
}

/// Empirical law helper: W1 between two sample sets.
pub fn w1_samples_1d(x: &Samples, y: &Samples) -> Result<f64> {
    w1_1d(&Law::Empirical(x.clone()), &Law::Empirical(y.clone()))
}
