// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::cf::CharFn;
use crate::error::{Error, Result};
use crate::special::sphere_area;

/// |φ(u)| ≤ c_phi·(1+|u|)^{−dim−gamma}, verified on an audit grid up to
/// `u_max_checked` when `certified` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub c_phi: f64,
    pub gamma: f64,
    pub dim: usize,
    pub u_max_checked: f64,
    pub certified: bool,
}

impl TailEnvelope {
    /// An envelope taken on trust (e.g. from a config file), not audited.
    pub fn declared(c_phi: f64, gamma: f64, dim: usize) -> Self {
        TailEnvelope { c_phi, gamma, dim, u_max_checked: f64::INFINITY, certified: true }
    }

    pub fn exponent(&self) -> f64 {
        self.dim as f64 + self.gamma
    }

    pub fn bound(&self, r: f64) -> f64 {
        self.c_phi * (1.0 + r).powf(-self.exponent())
    }

    /// Upper bound for ∫_{|u|>cutoff} c_phi(1+|u|)^{−d−γ} du (needs γ > 0).
    pub fn tail_integral(&self, cutoff: f64) -> f64 {
        if self.gamma <= 0.0 {
            return f64::INFINITY;
        }
        sphere_area(self.dim) * self.c_phi * cutoff.powf(-self.gamma) / self.gamma
    }

    /// Smallest cutoff whose tail integral, times (2π)^{−d}, is ≤ `tol`.
    pub fn cutoff_for(&self, tol: f64) -> f64 {
        let d = self.dim as f64;
        (sphere_area(self.dim) * self.c_phi / (self.gamma * (2.0 * PI).powf(d) * tol)).powf(1.0 / self.gamma)
    }

    /// Checks the envelope against `cf` on the standard audit grid over
    /// [0, u_max]; returns a copy with the `certified` flag set accordingly.
    pub fn audited(&self, cf: &CharFn, u_max: f64) -> TailEnvelope {
        let pts = audit_radii(u_max.min(1.0) * 0.5, u_max, 2 * AUDIT_POINTS);
        let dirs = directions(self.dim);
        let ok = pts.par_iter().all(|&r| modulus_max(cf, &dirs, r) <= self.bound(r) * (1.0 + 1e-12));
        TailEnvelope { u_max_checked: u_max, certified: ok, ..*self }
    }
}

pub const AUDIT_POINTS: usize = 512;
pub const DEFAULT_GAMMA_CAP: f64 = 50.0;
const LOG_FLOOR: f64 = 1e-300;
const FIT_FLOOR: f64 = 1e-280;

fn directions(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0]],
        _ => (0..8)
            .map(|k| {
                let t = k as f64 * PI / 8.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
    }
}

fn modulus_max(cf: &CharFn, dirs: &[Vec<f64>], r: f64) -> f64 {
    dirs.iter()
        .map(|e| {
            let u: Vec<f64> = e.iter().map(|c| c * r).collect();
            cf.eval(&u).norm()
        })
        .fold(0.0, f64::max)
}

/// Linear radii on [0, u_lo) followed by `n` log-spaced radii on [u_lo, u_hi].
fn audit_radii(u_lo: f64, u_hi: f64, n: usize) -> Vec<f64> {
    let lin = n / 8;
    let mut v: Vec<f64> = (0..lin).map(|i| u_lo * i as f64 / lin as f64).collect();
    let (a, b) = (u_lo.ln(), u_hi.ln());
    v.extend((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()));
    v
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Golden-section refinement of the largest interior local maxima of a
/// sampled function; returns the best value found.
fn refine_peaks<F: Fn(f64) -> f64 + Sync>(x: &[f64], y: &[f64], f: F) -> f64 {
    let mut peaks: Vec<usize> = (1..x.len() - 1).filter(|&i| y[i] >= y[i - 1] && y[i] >= y[i + 1]).collect();
    peaks.sort_by(|a, b| y[*b].total_cmp(&y[*a]));
    peaks.truncate(16);
    peaks
        .par_iter()
        .map(|&i| {
            let (mut a, mut b) = (x[i - 1], x[i + 1]);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (f(c), f(d));
            for _ in 0..60 {
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
            fc.max(fd)
        })
        .reduce(|| 0.0, f64::max)
}

/// Fits |φ(u)| ≤ c_φ(1+|u|)^{−d−γ} over the window [u_lo, u_hi].
///
/// The decay exponent is the least-squares slope of log|φ| against
/// log(1+|u|), capped by the slope over the last eighth of the window (so
/// the envelope does not overshoot where it is extrapolated) and by
/// d + gamma_cap, then floored to a multiple of 0.01. c_φ is the largest
/// audited ratio, and the result is re-audited on finer grids.
pub fn fit_tail_envelope(cf: &CharFn, u_lo: f64, u_hi: f64, gamma_cap: f64) -> Result<TailEnvelope> {
    if !(u_lo > 0.0 && u_hi > u_lo) {
        return Err(Error::InvalidSpec(format!("envelope window: need 0 < u_lo < u_hi, got [{u_lo}, {u_hi}]")));
    }
    let d = cf.dim();
    let dirs = directions(d);
    let radii = audit_radii(u_lo, u_hi, AUDIT_POINTS);
    let mods: Vec<f64> = radii.par_iter().map(|&r| modulus_max(cf, &dirs, r)).collect();

    let lin = AUDIT_POINTS / 8;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (r, m) in radii[lin..].iter().zip(&mods[lin..]) {
        if *m > FIT_FLOOR {
            xs.push((1.0 + r).ln());
            ys.push(m.max(LOG_FLOOR).ln());
        }
    }
    let cap = d as f64 + gamma_cap;
    let p = if xs.len() < 8 {
        // Decays below the floor almost at once: faster than any power.
        cap
    } else {
        let tail = (xs.len() / 8).max(4);
        let k = xs.len() - tail;
        let all = -ls_slope(&xs, &ys);
        let edge = -ls_slope(&xs[k..], &ys[k..]);
        all.min(edge).min(cap)
    };
    if !(p > 1e-3) {
        return Err(Error::NoPolynomialDecay { u_lo, u_hi });
    }
    let p = (p * 100.0).floor() / 100.0;
    let p = if p <= 0.0 { 1e-3 } else { p };

    let ratio = |r: f64, m: f64| m * (1.0 + r).powf(p);
    let ratios: Vec<f64> = radii.iter().zip(&mods).map(|(r, m)| ratio(*r, *m)).collect();
    let peak = refine_peaks(&radii, &ratios, |r| ratio(r, modulus_max(cf, &dirs, r)));
    let mut c = ratios.iter().copied().fold(1.0, f64::max).max(peak) * (1.0 + 1e-9);
    let mut certified = false;
    for round in 1..=3 {
        let finer = audit_radii(u_lo * (1.0 + 0.37 / round as f64), u_hi, AUDIT_POINTS << round);
        let worst = finer.par_iter().map(|&r| ratio(r, modulus_max(cf, &dirs, r))).reduce(|| 0.0, f64::max);
        if worst <= c {
            certified = true;
            break;
        }
        c = worst * (1.0 + 1e-9);
    }
    Ok(TailEnvelope { c_phi: c, gamma: p - d as f64, dim: d, u_max_checked: u_hi, certified })
}
