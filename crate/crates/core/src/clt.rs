// SPDX-License-Identifier: Apache-2.0

//! Normalized sums S_n = (Y_1 + … + Y_n)/√n of a standardized base law:
//! characteristic functions, grid distances to the standard Gaussian, rate
//! fits and the small/moderate/large-frequency bounds on |φ_{S_n}|.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::distkit::{
    fit_tail_envelope, invert_cf_with, moment_bound, CharFn, Cutoff, DistSpec, GridSpec, InversionOptions, Sampler,
    TailEnvelope, DEFAULT_GAMMA_CAP,
};
use crate::error::{Error, Result};
use crate::metrics::{sup_density_dist, tv_grid};
use crate::rng::stream;
use crate::special::{ln_gamma, sphere_area, upper_incomplete_gamma};

const MOMENT_ORDERS: usize = 8;

/// A base law with mean 0 and identity covariance, its CF, a certified
/// envelope |φ(u)| ≤ C_♯(1+|u|)^{−α} and E|Y|^k for k = 0..=8.
#[derive(Debug, Clone)]
pub struct CltBase {
    pub base: DistSpec,
    pub cf: CharFn,
    pub envelope: TailEnvelope,
    pub moments: Vec<f64>,
}

impl CltBase {
    /// Standardizes `spec` and fits the envelope on [1, 10³].
    pub fn new(spec: &DistSpec) -> Result<Self> {
        let base = spec.standardized()?;
        let env = fit_tail_envelope(&CharFn::Analytic(base.clone()), 1.0, 1e3, DEFAULT_GAMMA_CAP)?;
        Self::with_envelope(base, env)
    }

    pub fn with_envelope(base: DistSpec, envelope: TailEnvelope) -> Result<Self> {
        base.validate()?;
        let (mean, cov) = base.mean_cov()?;
        for (i, row) in cov.iter().enumerate() {
            if mean[i].abs() > 1e-12 {
                return Err(Error::InvalidSpec(format!("base: mean[{i}] = {}, must be 0", mean[i])));
            }
            for (j, c) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (c - target).abs() > 1e-10 {
                    return Err(Error::InvalidSpec(format!("base: cov[{i}][{j}] = {c}, must be {target}")));
                }
            }
        }
        if !envelope.certified {
            return Err(Error::UncertifiedEnvelope);
        }
        if envelope.dim != base.dim() {
            return Err(Error::InvalidSpec("envelope dimension differs from base dimension".into()));
        }
        let mut moments = vec![1.0];
        for k in 1..=MOMENT_ORDERS {
            moments.push(moment_bound(&base, k as f64)?.c_f);
        }
        Ok(CltBase { cf: CharFn::Analytic(base.clone()), base, envelope, moments })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// α in |φ(u)| ≤ C_♯(1+|u|)^{−α}.
    pub fn alpha(&self) -> f64 {
        self.envelope.exponent()
    }

    /// C_♯, raised to 1 if needed.
    pub fn c_sharp(&self) -> f64 {
        self.envelope.c_phi.max(1.0)
    }
}

/// φ_{S_n}(u) = φ(u/√n)ⁿ.
pub fn sn_cf(base: &CltBase, n: u64, u: &[f64]) -> Complex64 {
    CharFn::power_scaled(base.cf.clone(), n).eval(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltGrid {
    /// The box is [−half_width, half_width)^d.
    pub half_width: f64,
    /// Per axis.
    pub points: usize,
    /// Target for the reported truncation error.
    pub tol: f64,
}

impl Default for CltGrid {
    fn default() -> Self {
        CltGrid { half_width: 8.0, points: 1 << 12, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltPoint {
    pub n: u64,
    pub tv: f64,
    pub supdist: f64,
    /// Bound on the L1 error over the box caused by cutting both Fourier
    /// integrals at `u_cutoff`.
    pub tv_trunc_err: f64,
    pub u_cutoff: f64,
}

/// ln of vol·(2π)^{−d}·∫_{|u|>√n·T} C^n(1+|u|/√n)^{−αn} du, bounded by
/// vol·(2π)^{−d}·a_d·n^{d/2}·C^n(1+T)^{d−αn}/(αn−d).
fn ln_sn_tail(base: &CltBase, n: u64, vol: f64, t: f64) -> f64 {
    let d = base.dim() as f64;
    let nf = n as f64;
    let p = base.alpha() * nf - d;
    (vol * sphere_area(base.dim()) / (2.0 * PI).powf(d)).ln() + 0.5 * d * nf.ln() + nf * base.c_sharp().ln()
        - p * (1.0 + t).ln()
        - p.ln()
}

/// vol·(2π)^{−d}·∫_{|u|>U} e^{−|u|²/2} du.
fn gauss_tail(d: usize, vol: f64, u: f64) -> f64 {
    let h = d as f64 / 2.0;
    vol / (2.0 * PI).powf(2.0 * h) * sphere_area(d) * 2f64.powf(h - 1.0) * upper_incomplete_gamma(h, u * u / 2.0)
}

fn trunc_err(base: &CltBase, n: u64, vol: f64, u: f64) -> f64 {
    ln_sn_tail(base, n, vol, u / (n as f64).sqrt()).exp() + gauss_tail(base.dim(), vol, u)
}

/// Inverts φ_{S_n} and the standard Gaussian CF on the same grid with the
/// same cutoff and compares them.
pub fn tv_to_gaussian(base: &CltBase, n: u64, grid: &CltGrid) -> Result<CltPoint> {
    if n == 0 {
        return Err(Error::InvalidSpec("n must be >= 1".into()));
    }
    let d = base.dim();
    if base.alpha() * n as f64 <= d as f64 {
        return Err(Error::InvalidRegularity(format!(
            "|phi_S_n| is not known to be integrable for n = {n}: alpha*n = {} <= d",
            base.alpha() * n as f64
        )));
    }
    let vol = (2.0 * grid.half_width).powi(d as i32);
    let half_tol = grid.tol / 2.0;
    let nf = n as f64;
    let p = base.alpha() * nf - d as f64;
    let t = ((ln_sn_tail(base, n, vol, 0.0) - half_tol.ln()) / p).exp_m1().max(0.0);
    let (mut lo, mut hi) = (0.0, 64.0);
    while gauss_tail(d, vol, hi) > half_tol {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gauss_tail(d, vol, mid) > half_tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let cut = (nf.sqrt() * t).max(hi);
    let spec = match d {
        1 => GridSpec::new_1d(-grid.half_width, grid.half_width, grid.points),
        _ => GridSpec::square(-grid.half_width, grid.half_width, grid.points),
    };
    let opts = InversionOptions::default();
    let sn = CharFn::power_scaled(base.cf.clone(), n);
    let fs = invert_cf_with(&sn, &spec, Cutoff::Fixed(cut), &opts)?;
    let gauss = CharFn::Analytic(DistSpec::standard_gaussian(d));
    let fg = invert_cf_with(&gauss, &spec, Cutoff::Fixed(fs.u_cutoff), &opts)?;
    Ok(CltPoint {
        n,
        tv: tv_grid(&fs.density, &fg.density)?.value,
        supdist: sup_density_dist(&fs.density, &fg.density)?,
        tv_trunc_err: trunc_err(base, n, vol, fs.u_cutoff),
        u_cutoff: fs.u_cutoff,
    })
}

/// Runs [`tv_to_gaussian`] for every n in parallel; results in input order.
pub fn tv_series(base: &CltBase, ns: &[u64], grid: &CltGrid) -> Result<Vec<CltPoint>> {
    let out: Vec<Result<CltPoint>> = ns.par_iter().map(|&n| tv_to_gaussian(base, n, grid)).collect();
    out.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% t-interval for the slope.
    pub band: f64,
    pub points: usize,
}

/// Least-squares slope of ln(value) against ln(n).
pub fn rate_fit(series: &[(f64, f64)]) -> Result<RateFit> {
    if series.len() < 4 {
        return Err(Error::InsufficientData(format!("rate fit needs >= 4 points, got {}", series.len())));
    }
    if let Some(index) = series.iter().position(|(n, v)| !(*v > 0.0 && *n > 0.0)) {
        return Err(Error::LogDomain { index });
    }
    let m = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (ssr / (m - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, m - 2.0).expect("dof >= 2").inverse_cdf(0.975);
    Ok(RateFit { slope, intercept, band: t * se, points: series.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: u64,
    pub estimate: f64,
    pub mc_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub k: u32,
    pub rows: Vec<MomentRow>,
    /// The row with the largest estimate.
    pub sup: MomentRow,
}

const MOMENT_CHUNK: usize = 1024;

/// Monte-Carlo estimates of E|S_n|^{2k}.
pub fn moment_check(base: &CltBase, k: u32, ns: &[u64], paths: usize, seed: u64) -> Result<MomentCheck> {
    if ns.is_empty() || paths < 2 || k == 0 {
        return Err(Error::InsufficientData("moment check needs k >= 1, a non-empty n list and >= 2 paths".into()));
    }
    moment_bound(&base.base, 2.0 * k as f64)?;
    let sampler = Sampler::new(&base.base)?;
    let d = base.dim();
    let rows: Vec<MomentRow> = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let chunks = paths.div_ceil(MOMENT_CHUNK);
            let vals: Vec<f64> = (0..chunks)
                .into_par_iter()
                .flat_map_iter(|c| {
                    let mut rng = stream(seed, ((i as u64) << 32) | c as u64);
                    let count = MOMENT_CHUNK.min(paths - c * MOMENT_CHUNK);
                    let (mut y, mut s) = (vec![0.0; d], vec![0.0; d]);
                    let scale = 1.0 / (n as f64).sqrt();
                    (0..count)
                        .map(|_| {
                            s.iter_mut().for_each(|v| *v = 0.0);
                            for _ in 0..n {
                                sampler.draw(&mut rng, &mut y);
                                s.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
                            }
                            (s.iter().map(|v| v * v).sum::<f64>() * scale * scale).powi(k as i32)
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            let m = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            MomentRow { n, estimate: mean, mc_sigma: (var / m).sqrt() }
        })
        .collect();
    let sup = *rows.iter().max_by(|a, b| a.estimate.total_cmp(&b.estimate)).expect("non-empty");
    Ok(MomentCheck { k, rows, sup })
}

/// Largest c ∈ {0.01, 0.02, …, 1} with |φ(x)| ≤ 1 − |x|²/3 ≤ e^{−|x|²/4}
/// for all |x| ≤ c, checked on a radial grid of step 10⁻⁴ (8 directions
/// in the plane).
pub fn c2_search(base: &CltBase) -> Result<f64> {
    let dirs = directions(base.dim());
    let step = 1e-4;
    let holds = |r: f64| {
        let q = 1.0 - r * r / 3.0;
        let phi = dirs.iter().map(|d| base.cf.eval(&scaled(d, r)).norm()).fold(0.0, f64::max);
        phi <= q * (1.0 + 1e-12) && q <= (-r * r / 4.0).exp()
    };
    let first_bad = (0..=10_000).map(|i| i as f64 * step).find(|&r| !holds(r));
    let c2 = match first_bad {
        None => 1.0,
        Some(r) => ((r - step) * 100.0).floor() / 100.0,
    };
    if c2 <= 0.0 {
        return Err(Error::NoSmallURadius);
    }
    Ok(c2)
}

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

fn scaled(dir: &[f64], r: f64) -> Vec<f64> {
    dir.iter().map(|v| v * r).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoEstimate {
    pub rho: f64,
    /// sup |φ| over c ≤ |u| ≤ search_limit and where it was attained.
    pub grid_sup: f64,
    pub witness: f64,
    /// Envelope value at search_limit, covering |u| > search_limit.
    pub envelope_sup: f64,
}

const RHO_POINTS: usize = 20_001;

/// sup_{|u| ≥ c} |φ(u)|: grid search with golden-section refinement on
/// [c, search_limit], and the envelope beyond.
pub fn rho_estimate(cf: &CharFn, c: f64, search_limit: f64, envelope: Option<&TailEnvelope>) -> Result<RhoEstimate> {
    if !(c > 0.0 && search_limit > c) {
        return Err(Error::InvalidSpec(format!("need 0 < c < search_limit, got c = {c}, limit = {search_limit}")));
    }
    let dirs = directions(cf.dim());
    let modulus = |r: f64| dirs.iter().map(|d| cf.eval(&scaled(d, r)).norm()).fold(0.0, f64::max);
    let h = (search_limit - c) / (RHO_POINTS - 1) as f64;
    let vals: Vec<f64> = (0..RHO_POINTS).into_par_iter().map(|i| modulus(c + i as f64 * h)).collect();
    let (mut witness, mut grid_sup) = (c, vals[0]);
    for (i, v) in vals.iter().enumerate() {
        if *v > grid_sup {
            grid_sup = *v;
            witness = c + i as f64 * h;
        }
    }
    // Refine every interior local maximum within 1e-3 of the best.
    for i in 1..RHO_POINTS - 1 {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] >= grid_sup - 1e-3 {
            let (r, v) = golden_max(&modulus, c + (i - 1) as f64 * h, c + (i + 1) as f64 * h);
            if v > grid_sup {
                grid_sup = v;
                witness = r;
            }
        }
    }
    if grid_sup >= 1.0 - 1e-9 {
        return Err(Error::LatticeSuspected { rho: grid_sup });
    }
    let env = match envelope {
        Some(e) => *e,
        None => fit_tail_envelope(cf, 1.0, 1e3, DEFAULT_GAMMA_CAP)?,
    };
    if !env.certified {
        return Err(Error::UncertifiedEnvelope);
    }
    let envelope_sup = env.bound(search_limit);
    let rho = grid_sup.max(envelope_sup);
    if rho >= 1.0 - 1e-9 {
        return Err(Error::LatticeSuspected { rho });
    }
    Ok(RhoEstimate { rho, grid_sup, witness, envelope_sup })
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BundiCase {
    /// |u| ≤ c₂√n: e³·l!/(1+|u|)^l.
    Small,
    /// c₂√n < |u| < Jn: ρⁿ.
    Moderate,
    /// |u| ≥ Jn: 2^l/(1+|u|)^l.
    Large,
}

/// Constants of the piecewise bound |φ_{S_n}(u)| ≤ H_l(1+|u|)^{−l}, valid
/// for n ≥ N(l) = max(Ñ, ⌈N̂⌉).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BundiBound {
    pub l: u32,
    pub c2: f64,
    pub c_sharp: f64,
    pub alpha: f64,
    /// C_♯^{2/α}.
    pub j: f64,
    /// 2l/α.
    pub n_hat: f64,
    pub rho: f64,
    /// Smallest n with ρ^{n′} ≤ (1+Jn′)^{−l} for every n′ ≥ n.
    pub n_tilde: u64,
    pub n_min: u64,
    /// e³·l!.
    pub h_l: f64,
}

/// Search limit for ρ: far enough out that the envelope is small.
const RHO_SEARCH_LIMIT: f64 = 100.0;

impl BundiBound {
    pub fn new(base: &CltBase, l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidSpec("l must be >= 1".into()));
        }
        let c2 = c2_search(base)?;
        let rho = rho_estimate(&base.cf, c2, RHO_SEARCH_LIMIT.max(2.0 * c2), Some(&base.envelope))?.rho;
        let alpha = base.alpha();
        let c_sharp = base.c_sharp();
        let j = c_sharp.powf(2.0 / alpha);
        let n_hat = 2.0 * l as f64 / alpha;
        let n_tilde = crossover(rho, j, l)?;
        let n_min = n_tilde.max(n_hat.ceil() as u64).max(1);
        let h_l = E.powi(3) * ln_gamma(l as f64 + 1.0).exp();
        Ok(BundiBound { l, c2, c_sharp, alpha, j, n_hat, rho, n_tilde, n_min, h_l })
    }

    pub fn bound(&self, n: u64, u: f64) -> Result<(f64, BundiCase)> {
        if n < self.n_min {
            return Err(Error::BelowCrossover { n, required: self.n_min });
        }
        let u = u.abs();
        let nf = n as f64;
        let l = self.l as i32;
        Ok(if u <= self.c2 * nf.sqrt() {
            (self.h_l / (1.0 + u).powi(l), BundiCase::Small)
        } else if u >= self.j * nf {
            (2f64.powi(l) / (1.0 + u).powi(l), BundiCase::Large)
        } else {
            (self.rho.powf(nf), BundiCase::Moderate)
        })
    }
}

/// h(n) = n·ln ρ + l·ln(1 + Jn) is concave, so past its maximum it
/// crosses zero once; Ñ is the first integer at or after that crossing.
fn crossover(rho: f64, j: f64, l: u32) -> Result<u64> {
    let (lr, lf) = (rho.ln(), l as f64);
    let h = |n: f64| n * lr + lf * (j * n).ln_1p();
    // h′(n) = ln ρ + lJ/(1+Jn) ≤ 0 from here on.
    let peak = (-lf / lr - 1.0 / j).max(1.0).floor();
    if h(peak) <= 0.0 {
        let mut n = peak;
        while n > 1.0 && h(n - 1.0) <= 0.0 && lr + lf * j / (1.0 + j * (n - 1.0)) <= 0.0 {
            n -= 1.0;
        }
        return Ok(n as u64);
    }
    let (mut lo, mut hi) = (peak, peak * 2.0);
    while h(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::InvalidSpec(format!("crossover index beyond 1e15 (rho = {rho})")));
        }
    }
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BundiAudit {
    pub l: u32,
    pub checked: usize,
    pub violations: usize,
    /// max |φ_{S_n}(u)| / bound over the lattice.
    pub worst_ratio: f64,
}

/// Checks the bound against |φ_{S_n}| for each n in `ns`, with
/// `per_case` points spread over each of the three frequency ranges
/// (the large range is sampled on [Jn, 4Jn]).
pub fn audit_bundi(base: &CltBase, bound: &BundiBound, ns: &[u64], per_case: usize) -> Result<BundiAudit> {
    let mut lattice = Vec::new();
    for &n in ns {
        let nf = n as f64;
        let (a, b) = (bound.c2 * nf.sqrt(), bound.j * nf);
        let span =
            |lo: f64, hi: f64| (0..per_case).map(move |i| lo + (hi - lo) * i as f64 / (per_case - 1).max(1) as f64);
        lattice.extend(span(0.0, a).map(|u| (n, u)));
        lattice.extend(span(a * (1.0 + 1e-12), b).map(|u| (n, u)));
        lattice.extend(span(b, 4.0 * b).map(|u| (n, u)));
    }
    let ratios: Vec<Result<f64>> = lattice
        .par_iter()
        .map(|&(n, u)| {
            let (v, _) = bound.bound(n, u)?;
            let dir = &directions(base.dim())[0];
            Ok(sn_cf(base, n, &scaled(dir, u)).norm() / v)
        })
        .collect();
    let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BundiAudit {
        l: bound.l,
        checked: ratios.len(),
        violations: ratios.iter().filter(|r| **r > 1.0).count(),
        worst_ratio: ratios.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplace() -> CltBase {
        CltBase::new(&DistSpec::laplace(1.0)).unwrap()
    }

    fn gauss() -> CltBase {
        CltBase::new(&DistSpec::standard_gaussian(1)).unwrap()
    }

    #[test]
    fn sn_cf_values() {
        let b = laplace();
        assert!((sn_cf(&b, 2, &[1.0]).re - 0.64).abs() < 1e-15);
        assert_eq!(sn_cf(&b, 1, &[0.7]), b.cf.eval(&[0.7]));
        let g = gauss();
        for n in [1, 3, 100] {
            assert!((sn_cf(&g, n, &[1.3]).re - (-0.845f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn laplace_envelope_has_exponent_two() {
        let b = laplace();
        assert_eq!(b.alpha(), 2.0);
        // max of 2(1+t)²/(2+t²) is 3 at t = 2.
        assert!((b.c_sharp() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn gaussian_fixed_point() {
        let g = gauss();
        for n in [1, 2, 7, 64] {
            let p = tv_to_gaussian(&g, n, &CltGrid::default()).unwrap();
            assert!(p.tv < 1e-10 && p.supdist < 1e-10, "{p:?}");
            assert!(p.tv_trunc_err <= 1e-8);
        }
    }

    #[test]
    fn laplace_tv_decreases() {
        let b = laplace();
        let ns = [2, 4, 8, 16, 32];
        let pts = tv_series(&b, &ns, &CltGrid::default()).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].tv < w[0].tv + w[0].tv_trunc_err + w[1].tv_trunc_err);
        }
        assert!(pts.iter().all(|p| p.tv_trunc_err <= 1e-8));
    }

    #[test]
    fn rate_fit_exact_series() {
        let s: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0].iter().map(|&n: &f64| (n, 3.0 * n.powf(-0.5))).collect();
        let f = rate_fit(&s).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && f.band < 1e-12);
        let c: Vec<(f64, f64)> = [1.0, 2.0, 3.0, 4.0].iter().map(|&n| (n, 7.0)).collect();
        assert!(rate_fit(&c).unwrap().slope.abs() < 1e-15);
        assert_eq!(rate_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]).unwrap_err().code(), "log_domain");
        assert!(rate_fit(&s[..3]).is_err());
    }

    #[test]
    fn fourth_moments() {
        let g = moment_check(&gauss(), 2, &[1, 5], 40_000, 1).unwrap();
        for r in &g.rows {
            assert!((r.estimate - 3.0).abs() < 3.0 * r.mc_sigma, "{r:?}");
        }
        // E S_n⁴ = 3 + (E Y⁴ − 3)/n with E Y⁴ = 6 for the unit Laplace law.
        let l = moment_check(&laplace(), 2, &[1, 4], 40_000, 2).unwrap();
        for r in &l.rows {
            let exact = 3.0 + 3.0 / r.n as f64;
            assert!((r.estimate - exact).abs() < 3.0 * r.mc_sigma, "{r:?}");
        }
    }

    #[test]
    fn c2_values() {
        assert_eq!(c2_search(&gauss()).unwrap(), 1.0);
        // Oracle: 1/(1+x²/2) ≤ 1 − x²/3 ⟺ x²(1 − x²) ≥ 0, so every x in [0, 1].
        let c = c2_search(&laplace()).unwrap();
        let direct = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .take_while(|&x| 1.0 / (1.0 + x * x / 2.0) <= (1.0 - x * x / 3.0) * (1.0 + 1e-12))
            .last()
            .unwrap();
        assert_eq!(c, (direct * 100.0).floor() / 100.0);
        let u = CltBase::new(&DistSpec::uniform_1d(0.0, 1.0)).unwrap();
        assert!(c2_search(&u).unwrap() <= 1.0);
    }

    #[test]
    fn rho_examples() {
        let lap = CharFn::Analytic(DistSpec::laplace(1.0));
        assert!((rho_estimate(&lap, 1.0, 100.0, None).unwrap().rho - 0.5).abs() < 1e-9);
        assert!((rho_estimate(&lap, 2.0, 100.0, None).unwrap().rho - 0.2).abs() < 1e-9);
        let g = CharFn::Analytic(DistSpec::standard_gaussian(1));
        assert!((rho_estimate(&g, 1.0, 100.0, None).unwrap().rho - (-0.5f64).exp()).abs() < 1e-9);
        let coin = CharFn::Analytic(DistSpec::Discrete { atoms: vec![-1.0, 1.0], weights: vec![0.5, 0.5] });
        assert_eq!(rho_estimate(&coin, 1.0, 100.0, None).unwrap_err().code(), "lattice_suspected");
    }

    #[test]
    fn bundi_constants_for_laplace() {
        let b = laplace();
        let bb = BundiBound::new(&b, 1).unwrap();
        assert!((bb.j - bb.c_sharp).abs() < 1e-12);
        assert_eq!(bb.n_hat, 1.0);
        assert!((bb.h_l - E.powi(3)).abs() < 1e-12);
        let (v, case) = bb.bound(bb.n_min, 0.0).unwrap();
        assert_eq!(case, BundiCase::Small);
        assert!((v - 20.0855).abs() < 1e-4);
        assert_eq!(bb.bound(bb.n_min - 1, 0.0).unwrap_err().code(), "below_crossover");
        // Ñ oracle by brute force over n up to 10⁴.
        let ok = |n: u64| bb.rho.powf(n as f64) <= (1.0 + bb.j * n as f64).powi(-1);
        let brute = (1..10_000u64).rev().take_while(|&n| ok(n)).last().unwrap();
        assert_eq!(bb.n_tilde, brute);
    }

    #[test]
    fn bundi_dominates_on_lattice() {
        let b = laplace();
        for l in 1..=3 {
            let bb = BundiBound::new(&b, l).unwrap();
            let ns: Vec<u64> = (bb.n_min..=4 * bb.n_min).step_by((bb.n_min as usize / 4).max(1)).collect();
            let a = audit_bundi(&b, &bb, &ns, 200).unwrap();
            assert_eq!(a.violations, 0, "{a:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sn_cf_is_a_cf(n in 1u64..2000, u in -50.0f64..50.0) {
            let b = laplace();
            prop_assert!((sn_cf(&b, n, &[0.0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            prop_assert!(sn_cf(&b, n, &[u]).norm() <= 1.0 + 1e-15);
        }

        #[test]
        fn crossover_is_minimal(rho in 0.05f64..0.95, j in 1.0f64..10.0, l in 1u32..4) {
            let n = crossover(rho, j, l).unwrap();
            let ok = |m: u64| rho.powf(m as f64) <= (1.0 + j * m as f64).powi(-(l as i32));
            prop_assert!(ok(n) && ok(n + 1) && ok(2 * n + 7));
            prop_assert!(n == 1 || !ok(n - 1));
        }
    }
}
