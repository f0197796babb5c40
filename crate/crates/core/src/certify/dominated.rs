// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::distkit::{invert_cf_with, CharFn, Cutoff, DistSpec, GridSpec, InversionOptions};
use crate::error::{Error, Result};
use crate::metrics::{tv_grid, FreqGrid};
use crate::quad::integrate;

#[derive(Debug, Clone)]
pub struct DominationOptions {
    /// Frequencies audited against ψ; also the inversion cutoff.
    pub audit: FreqGrid,
    /// Grid for the L1 trend.
    pub grid: GridSpec,
    /// The trend counts as converging when its last value is below this.
    pub trend_tol: f64,
    pub inversion: InversionOptions,
}

impl Default for DominationOptions {
    fn default() -> Self {
        DominationOptions {
            audit: FreqGrid { u_max: 40.0, points: 4001 },
            grid: GridSpec::new_1d(-12.0, 12.0, 2048),
            trend_tol: 1e-3,
            inversion: InversionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Dominated {
        converges_tv: bool,
    },
    /// `n` is `None` when the limit itself escapes the envelope.
    NotDominated {
        n: Option<u64>,
        u: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    #[serde(flatten)]
    pub verdict: Verdict,
    /// ∫ψ over the audited ball.
    pub psi_integral: f64,
    /// (2π)^{−d}·2∫_{|u|>U}ψ, estimated from a doubled ball.
    pub truncation_error: f64,
    /// (n, ∫|f_n − f|).
    pub l1_trend: Vec<(u64, f64)>,
}

fn audit_points(d: usize, grid: &FreqGrid) -> Vec<Vec<f64>> {
    let n = grid.points.max(2);
    let step = grid.u_max / (n - 1) as f64;
    match d {
        1 => (0..n).map(|i| vec![i as f64 * step]).collect(),
        _ => {
            let m = n.min(401);
            let h = 2.0 * grid.u_max / (m - 1) as f64;
            (0..m * m)
                .map(|i| vec![-grid.u_max + (i / m) as f64 * h, ((i % m) as f64 * h / 2.0).min(grid.u_max)])
                .collect()
        }
    }
}

/// ∫_{|u|≤U} ψ, using 16 directions for the angular average in 2-D.
fn psi_ball_integral(psi: &(dyn Fn(&[f64]) -> f64 + Sync), d: usize, u: f64) -> f64 {
    match d {
        1 => integrate(|t| psi(&[t]) + psi(&[-t]), 0.0, u, &[], 1e-12).value,
        _ => {
            let radial = |r: f64| {
                let avg = (0..16)
                    .map(|k| {
                        let t = k as f64 * PI / 8.0;
                        psi(&[r * t.cos(), r * t.sin()])
                    })
                    .sum::<f64>()
                    / 16.0;
                2.0 * PI * r * avg
            };
            integrate(radial, 0.0, u, &[], 1e-10).value
        }
    }
}

/// Scheffé-type criterion: if every |φ_n| and |φ| lie below an integrable
/// ψ and φ_n → φ pointwise, then ∫|f_n − f| → 0. Audits the domination on
/// a frequency grid and measures the L1 trend by inversion.
pub fn dominated_convergence_check(
    seq: &[(u64, CharFn)],
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    limit: &CharFn,
    opts: &DominationOptions,
) -> Result<DominationReport> {
    if seq.is_empty() {
        return Err(Error::InsufficientData("empty characteristic-function sequence".into()));
    }
    let d = limit.dim();
    let u_max = opts.audit.u_max;
    let quarter = psi_ball_integral(psi, d, u_max / 4.0);
    let half = psi_ball_integral(psi, d, u_max / 2.0);
    let full = psi_ball_integral(psi, d, u_max);
    let double = psi_ball_integral(psi, d, 2.0 * u_max);
    let settled = (full - half) <= (half - quarter) + 1e-15 && (double - full) <= 1e-3 * full.max(1e-300);
    if !full.is_finite() || !settled {
        return Err(Error::InvalidSpec(format!(
            "psi: integral over the audit ball does not settle under refinement ({quarter:.6e}, {half:.6e}, {full:.6e}, {double:.6e})"
        )));
    }

    let pts = audit_points(d, &opts.audit);
    let violation = |cf: &CharFn| -> Option<Vec<f64>> {
        pts.par_iter().find_first(|u| cf.eval(u).norm() > psi(u) * (1.0 + 1e-12) + 1e-300).cloned()
    };
    let mut verdict = None;
    for (n, cf) in seq {
        if let Some(u) = violation(cf) {
            verdict = Some(Verdict::NotDominated { n: Some(*n), u });
            break;
        }
    }
    if verdict.is_none() {
        if let Some(u) = violation(limit) {
            verdict = Some(Verdict::NotDominated { n: None, u });
        }
    }

    let cut = Cutoff::Fixed(u_max);
    let f = invert_cf_with(limit, &opts.grid, cut, &opts.inversion)?.density;
    let mut l1_trend = Vec::with_capacity(seq.len());
    for (n, cf) in seq {
        let fn_ = invert_cf_with(cf, &opts.grid, cut, &opts.inversion)?.density;
        l1_trend.push((*n, tv_grid(&fn_, &f)?.value));
    }
    let verdict = verdict.unwrap_or_else(|| {
        let tail = &l1_trend[l1_trend.len() / 2..];
        let monotone = tail.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-6);
        let last = l1_trend.last().map_or(f64::INFINITY, |x| x.1);
        Verdict::Dominated { converges_tv: monotone && last < opts.trend_tol }
    });
    Ok(DominationReport {
        verdict,
        psi_integral: full,
        truncation_error: 2.0 * (double - full).max(0.0) / (2.0 * PI).powi(d as i32),
        l1_trend,
    })
}

/// φ_n = CF of N(0, 1 + 1/n).
pub fn gaussian_variance_sequence(ns: &[u64]) -> Vec<(u64, CharFn)> {
    ns.iter().map(|&n| (n, CharFn::Analytic(DistSpec::gaussian_1d(0.0, 1.0 + 1.0 / n as f64)))).collect()
}

/// φ_n(u) = cos(nu)·e^{−u²/2}: a standard Gaussian plus an independent ±n coin.
pub fn cos_modulated_sequence(ns: &[u64]) -> Vec<(u64, CharFn)> {
    ns.iter()
        .map(|&n| {
            let coin = DistSpec::Discrete { atoms: vec![-(n as f64), n as f64], weights: vec![0.5, 0.5] };
            (n, CharFn::Product(vec![CharFn::Analytic(DistSpec::standard_gaussian(1)), CharFn::Analytic(coin)]))
        })
        .collect()
}
