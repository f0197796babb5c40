// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::{simulate_recursion, Recursion};
use crate::certify::{constants_from_proof, exponent_g, Ledger, Mode, Regularity, Variant};
use crate::distkit::{
    fit_tail_envelope, invert_cf_with, moment_bound, CharFn, Cutoff, GridDensity, GridSpec, InversionOptions, Samples,
    TailEnvelope, DEFAULT_GAMMA_CAP,
};
use crate::error::{Error, Result};
use crate::metrics::tv_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricKind {
    W1,
    TvCertified,
}

/// distance(n) ≤ c·rhoⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricRate {
    pub c: f64,
    pub rho: f64,
    pub kind: GeometricKind,
}

impl GeometricRate {
    pub fn at(&self, n: usize) -> f64 {
        let v = self.c * self.rho.powi(n as i32);
        match self.kind {
            GeometricKind::W1 => v,
            GeometricKind::TvCertified => v.min(2.0),
        }
    }
}

/// S ≥ sup_n E|X_n|: E|X_0| + (|ν(0)| + Σ|b_j|·E|ε|)/(1 − κ).
pub fn s_bound(rec: &Recursion) -> Result<f64> {
    let e_init = moment_bound(&rec.spec.init, 1.0)?.c_f;
    let e_eps = moment_bound(&rec.spec.innovation, 1.0)?.c_f;
    let s = e_init + (rec.nu_at_zero() + rec.coeff_abs_sum() * e_eps) / (1.0 - rec.kappa());
    if !s.is_finite() {
        return Err(Error::MomentDiverges("first moment of the recursion".into()));
    }
    Ok(s)
}

/// W1(X_n, μ*) ≤ 2S·κⁿ.
pub fn w1_geometric_bound(rec: &Recursion) -> Result<GeometricRate> {
    Ok(GeometricRate { c: 2.0 * s_bound(rec)?, rho: rec.kappa(), kind: GeometricKind::W1 })
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifiedTvRate {
    /// C′ = G·C^g, ϱ = κ^g.
    pub rate: GeometricRate,
    pub w1: GeometricRate,
    pub innovation_envelope: TailEnvelope,
    /// Pooled regularity of every X_n and of the limit.
    pub regularity: Regularity,
    pub ledger: Ledger,
    pub mode: Mode,
}

/// Every X_n (n ≥ 1) and the limit share the envelope
/// C_♭(1/|b_0| + 1)^{d+γ}(1+|u|)^{−d−γ}, since the CF factors through
/// φ_ε(b_0 u), and E|X_n| ≤ S. The fm certificate with δ = 1 applied to
/// the W1 rate then gives a geometric TV rate.
pub fn certified_tv_rate(rec: &Recursion, envelope: &TailEnvelope, mode: Mode) -> Result<CertifiedTvRate> {
    if !envelope.certified {
        return Err(Error::UncertifiedEnvelope);
    }
    let d = rec.dim();
    if envelope.dim != d {
        return Err(Error::InvalidSpec(format!(
            "innovation envelope has dimension {}, recursion has {d}",
            envelope.dim
        )));
    }
    let w1 = w1_geometric_bound(rec)?;
    let b0 = rec.coeffs[0].abs();
    let reg = Regularity {
        d,
        gamma: envelope.gamma,
        c_phi: envelope.c_phi * (1.0 / b0 + 1.0).powf(d as f64 + envelope.gamma),
        delta: 1.0,
        c_f: w1.c / 2.0,
    };
    reg.validate()?;
    let g = exponent_g(d, reg.gamma, 1.0, Variant::Fm)?;
    let ledger = constants_from_proof(d, reg.gamma, 1.0, reg.c_phi, reg.c_f, mode)?;
    let rate =
        GeometricRate { c: ledger.g_const * w1.c.powf(g), rho: rec.kappa().powf(g), kind: GeometricKind::TvCertified };
    Ok(CertifiedTvRate { rate, w1, innovation_envelope: *envelope, regularity: reg, ledger, mode })
}

#[derive(Debug, Clone)]
pub struct TvDecayOptions {
    pub horizon: usize,
    /// Defaults to 4·horizon.
    pub reference_horizon: Option<usize>,
    pub paths: usize,
    pub seed: u64,
    /// Gaussian smoothing bandwidth; defaults to Silverman's rule on the
    /// reference sample.
    pub bandwidth: Option<f64>,
    /// Defaults to the sample range padded by 8 bandwidths, 1024 points.
    pub grid: Option<GridSpec>,
    /// Defaults to a fit of the innovation CF on [1, 10³].
    pub envelope: Option<TailEnvelope>,
    pub mode: Mode,
}

impl TvDecayOptions {
    pub fn new(horizon: usize, paths: usize, seed: u64) -> Self {
        TvDecayOptions {
            horizon,
            reference_horizon: None,
            paths,
            seed,
            bandwidth: None,
            grid: None,
            envelope: None,
            mode: Mode::PaperFaithful,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvDecayRow {
    pub n: usize,
    pub tv_emp: f64,
    /// stat_err + smoothing_err.
    pub tv_emp_err: f64,
    /// Expected L1 size of the Monte-Carlo noise in the two smoothed
    /// density estimates.
    pub stat_err: f64,
    /// (h²/2)·(∫|f̂_n''| + ∫|f̂_ref''|): second-order smoothing bias.
    pub smoothing_err: f64,
    pub w1_bound: f64,
    pub tv_certified: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TvDecay {
    pub bandwidth: f64,
    pub reference_horizon: usize,
    pub paths: usize,
    pub grid: GridSpec,
    pub certified: CertifiedTvRate,
    pub rows: Vec<TvDecayRow>,
}

fn silverman(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| s[((p * (n - 1.0)).round() as usize).min(s.len() - 1)];
    let iqr = (q(0.75) - q(0.25)) / 1.34;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn kde_on_grid(x: &Samples, h: f64, grid: &GridSpec) -> Result<GridDensity> {
    // e^{−h²u²/2} ≤ 1e-14 beyond this cutoff.
    let cut = (2.0 * 14.0 * 10f64.ln()).sqrt() / h;
    let cf = CharFn::empirical(x.clone()).smoothed(h);
    let opts = InversionOptions { mass_tolerance: 1e-3, ..Default::default() };
    Ok(invert_cf_with(&cf, grid, Cutoff::Fixed(cut), &opts)?.density)
}

fn curvature(f: &GridDensity) -> f64 {
    let v = f.values();
    let dx = f.grid().spacing(0);
    v.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).abs()).sum::<f64>() / dx
}

/// ∫ sqrt(2/π)·sqrt(σ_a² + σ_b²) with σ²(x) = f(x)·R(K)/(P·h), R(K) = 1/(2√π).
fn noise_level(a: &GridDensity, b: &GridDensity, paths: usize, h: f64) -> f64 {
    let k = 1.0 / (2.0 * PI.sqrt() * paths as f64 * h);
    let dx = a.grid().spacing(0);
    a.values().iter().zip(b.values()).map(|(x, y)| ((x.max(0.0) + y.max(0.0)) * k).sqrt()).sum::<f64>()
        * dx
        * (2.0 / PI).sqrt()
}

/// ∫|f̂_n − f̂_ref| for n = 1..horizon, where f̂ are Gaussian-smoothed
/// empirical densities obtained by inverting the smoothed empirical CF and
/// the reference is the same simulation at a much later time.
pub fn empirical_tv_decay(rec: &Recursion, opts: &TvDecayOptions) -> Result<TvDecay> {
    if rec.dim() != 1 {
        return Err(Error::UnsupportedDimension { dim: rec.dim() });
    }
    let reference = opts.reference_horizon.unwrap_or(4 * opts.horizon);
    if opts.horizon == 0 || reference < opts.horizon {
        return Err(Error::InvalidSpec(format!(
            "reference_horizon = {reference} must be >= horizon = {} >= 1",
            opts.horizon
        )));
    }
    if opts.paths < 2 {
        return Err(Error::InsufficientData(format!("paths = {}, need at least 2", opts.paths)));
    }
    let envelope = match opts.envelope {
        Some(e) => e,
        None => fit_tail_envelope(&CharFn::Analytic(rec.spec.innovation.clone()), 1.0, 1e3, DEFAULT_GAMMA_CAP)?,
    };
    let certified = certified_tv_rate(rec, &envelope, opts.mode)?;

    let tr = simulate_recursion(rec, reference, opts.paths, opts.seed)?;
    let h = match opts.bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidSpec(format!("bandwidth = {h}, must be > 0"))),
        None => silverman(tr.slice(reference)),
    };
    let grid = match &opts.grid {
        Some(g) => g.clone(),
        None => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for n in (1..=opts.horizon).chain([reference]) {
                for &v in tr.slice(n) {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            GridSpec::new_1d(lo - 8.0 * h, hi + 8.0 * h, 1024)
        }
    };
    grid.validate()?;
    let f_ref = kde_on_grid(&tr.at(reference), h, &grid)?;
    let ref_curv = curvature(&f_ref);
    let rows: Vec<Result<TvDecayRow>> = (1..=opts.horizon)
        .into_par_iter()
        .map(|n| {
            let f_n = kde_on_grid(&tr.at(n), h, &grid)?;
            let tv_emp = tv_grid(&f_n, &f_ref)?.value;
            let stat_err = if n == reference { 0.0 } else { noise_level(&f_n, &f_ref, opts.paths, h) };
            let smoothing_err = 0.5 * h * h * (curvature(&f_n) + ref_curv);
            Ok(TvDecayRow {
                n,
                tv_emp,
                tv_emp_err: stat_err + smoothing_err,
                stat_err,
                smoothing_err,
                w1_bound: certified.w1.at(n),
                tv_certified: certified.rate.at(n),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(TvDecay { bandwidth: h, reference_horizon: reference, paths: opts.paths, grid, certified, rows })
}

#[cfg(test)]
mod tests {
    use super::super::tests::example;
    use super::super::{backward_coupling, NuSpec};
    use super::*;
    use crate::distkit::DistSpec;
    use crate::metrics::w1_samples_1d;

    #[test]
    fn s_bound_for_gaussian_example() {
        let rec = Recursion::new(example(0.0, DistSpec::standard_gaussian(1))).unwrap();
        let s = s_bound(&rec).unwrap();
        let expected = 2.0 * (2.0 / PI).sqrt() / 0.5;
        assert!((s - expected).abs() < 1e-9 && (s - 3.1915).abs() < 1e-4);
        let w1 = w1_geometric_bound(&rec).unwrap();
        assert!((w1.c - 6.383).abs() < 1e-3);
        assert!((w1.at(5) - 0.1995).abs() < 1e-4);
    }

    #[test]
    fn tiny_kappa_bound() {
        let mut s = example(0.0, DistSpec::standard_gaussian(1));
        s.nu = NuSpec::Affine { a: vec![vec![0.0]], b: vec![0.0] };
        s.kappa = 1e-6;
        let rec = Recursion::new(s).unwrap();
        let w1 = w1_geometric_bound(&rec).unwrap();
        let sb = s_bound(&rec).unwrap();
        assert!((w1.at(2) / (2.0 * sb * 1e-12) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certified_rate_examples() {
        let rec = Recursion::new(example(0.0, DistSpec::laplace(1.0))).unwrap();
        let r = certified_tv_rate(&rec, &TailEnvelope::declared(2.0, 1.0, 1), Mode::PaperFaithful).unwrap();
        assert_eq!(r.regularity.c_phi, 8.0);
        assert!((r.rate.rho - 0.5f64.powf(1.0 / 6.0)).abs() < 1e-15);
        assert!((r.rate.rho - 0.8909).abs() < 1e-4);
        assert!((r.rate.c - r.ledger.g_const * r.w1.c.powf(1.0 / 6.0)).abs() < 1e-9);
        let mut e = TailEnvelope::declared(2.0, 1.0, 1);
        e.certified = false;
        assert_eq!(certified_tv_rate(&rec, &e, Mode::Tight).unwrap_err().code(), "uncertified_envelope");
    }

    #[test]
    fn w1_bound_dominates_coupling_and_empirical_w1() {
        let rec = Recursion::new(example(10.0, DistSpec::laplace(1.0))).unwrap();
        let w1 = w1_geometric_bound(&rec).unwrap();
        for n in 1..=12 {
            let c = backward_coupling(&rec, n, n + 20, 4000, 11).unwrap();
            let g = c.mean_gap();
            assert!(g.mean <= w1.at(n) + 3.0 * g.mc_sigma, "n {n}");
        }
        let tr = simulate_recursion(&rec, 40, 4000, 12).unwrap();
        let far = tr.at(40);
        // Two-sample W1 noise: E ≈ sqrt(2/P)·∫sqrt(F(1−F)), F from the far sample.
        let mut xs = far.data().to_vec();
        xs.sort_by(f64::total_cmp);
        let p = xs.len() as f64;
        let spread: f64 = xs
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let f = (i + 1) as f64 / p;
                (f * (1.0 - f)).sqrt() * (w[1] - w[0])
            })
            .sum();
        let noise = (2.0 / p).sqrt() * spread;
        for n in 2..=10 {
            let emp = w1_samples_1d(&tr.at(n), &far).unwrap();
            assert!(emp <= w1.at(n) + 3.0 * noise, "n {n}: {emp} vs {} + 3·{noise}", w1.at(n));
        }
    }

    #[test]
    fn empirical_decay_at_reference_is_zero() {
        let rec = Recursion::new(example(0.0, DistSpec::laplace(1.0))).unwrap();
        let mut o = TvDecayOptions::new(4, 2000, 3);
        o.reference_horizon = Some(4);
        let d = empirical_tv_decay(&rec, &o).unwrap();
        assert_eq!(d.rows.len(), 4);
        assert_eq!(d.rows[3].tv_emp, 0.0);
        assert!(d.rows[0].tv_emp > 0.0);
    }

    #[test]
    fn empirical_decay_is_eventually_decreasing_and_dominated() {
        let rec = Recursion::new(example(10.0, DistSpec::laplace(1.0))).unwrap();
        let o = TvDecayOptions::new(12, 20_000, 4);
        let d = empirical_tv_decay(&rec, &o).unwrap();
        for w in d.rows.windows(2) {
            assert!(w[1].tv_emp <= w[0].tv_emp + 3.0 * w[1].stat_err, "{w:?}");
        }
        assert!(d.rows[0].tv_emp > 1.0);
        for r in &d.rows {
            assert!(r.tv_emp - r.tv_emp_err <= r.tv_certified);
        }
    }

    #[test]
    fn halving_bandwidth_stays_within_error() {
        let rec = Recursion::new(example(5.0, DistSpec::standard_gaussian(1))).unwrap();
        let mut o = TvDecayOptions::new(6, 20_000, 8);
        let base = empirical_tv_decay(&rec, &o).unwrap();
        o.bandwidth = Some(base.bandwidth / 2.0);
        o.grid = Some(base.grid.clone());
        let half = empirical_tv_decay(&rec, &o).unwrap();
        for (a, b) in base.rows.iter().zip(&half.rows) {
            assert!((a.tv_emp - b.tv_emp).abs() < a.tv_emp_err + b.tv_emp_err, "{a:?} {b:?}");
        }
    }
}
