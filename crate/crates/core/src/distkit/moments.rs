// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::cf::Samples;
use super::spec::{mixture_weights, DistSpec};
use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::special::{chi_abs_moment, gamma_fn, norm_cdf};

/// c_f ≥ E|X|^δ (Euclidean norm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub c_f: f64,
    pub delta: f64,
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::MomentDiverges(what.to_string()))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidRegularity(format!("delta = {delta}, must be > 0")));
    }
    Ok(())
}

/// E|X|^δ of a 1-D law with a density, by adaptive quadrature (error
/// estimate added on top).
fn quadrature_moment(spec: &DistSpec, delta: f64) -> Result<f64> {
    let (lo, hi, mut breaks) = spec.support_hint();
    breaks.push(0.0);
    let q = integrate(|x| x.abs().powf(delta) * spec.pdf(&[x]).unwrap_or(0.0), lo, hi, &breaks, 1e-12);
    Ok(q.value + q.error)
}

/// Upper bound for E|X|^δ of a 2-vector from its total second moment
/// (Jensen, δ ≤ 2) or from a per-coordinate δ-moment (Minkowski on
/// |X| ≤ |X₁| + |X₂|, δ > 2).
fn planar_bound(delta: f64, second: f64, coord: impl Fn() -> Result<f64>) -> Result<f64> {
    if delta <= 2.0 {
        Ok(second.powf(delta / 2.0))
    } else {
        Ok(2f64.powf(delta) * coord()?)
    }
}

pub fn moment_bound(spec: &DistSpec, delta: f64) -> Result<MomentBound> {
    check_delta(delta)?;
    let d = spec.dim();
    let v = match spec {
        DistSpec::Gaussian { mean, cov } => {
            if d == 1 {
                let s = cov[0][0].sqrt();
                if mean[0] == 0.0 {
                    s.powf(delta) * chi_abs_moment(1, delta)
                } else {
                    quadrature_moment(spec, delta)?
                }
            } else {
                let isotropic = cov[0][1] == 0.0 && cov[0][0] == cov[1][1];
                let m2 = mean[0] * mean[0] + mean[1] * mean[1];
                if isotropic && m2 == 0.0 {
                    cov[0][0].powf(delta / 2.0) * chi_abs_moment(2, delta)
                } else if delta <= 2.0 {
                    (m2 + cov[0][0] + cov[1][1]).powf(delta / 2.0)
                } else {
                    let tr = cov[0][0] + cov[1][1];
                    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
                    let lmax = 0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt());
                    (m2.sqrt() + lmax.sqrt() * chi_abs_moment(2, delta).powf(1.0 / delta)).powf(delta)
                }
            }
        }
        DistSpec::Laplace { lambda, loc, dim } => {
            let one = || -> Result<f64> {
                if *loc == 0.0 {
                    Ok(gamma_fn(delta + 1.0) / lambda.powf(delta))
                } else {
                    quadrature_moment(&DistSpec::Laplace { lambda: *lambda, loc: *loc, dim: 1 }, delta)
                }
            };
            if *dim == 1 {
                one()?
            } else {
                planar_bound(delta, 2.0 * (2.0 / (lambda * lambda) + loc * loc), one)?
            }
        }
        DistSpec::LaplaceMixture { k, scale, dim } => {
            let w = mixture_weights(*k);
            let one = |p: f64| -> f64 {
                scale.powf(p)
                    * gamma_fn(p + 1.0)
                    * w.iter().enumerate().map(|(j, wk)| wk / ((j + 1) as f64).powf(p)).sum::<f64>()
            };
            if *dim == 1 {
                one(delta)
            } else {
                planar_bound(delta, 2.0 * one(2.0), || Ok(one(delta)))?
            }
        }
        DistSpec::Uniform { a, b } => {
            let anti = |x: f64, p: f64| x.signum() * x.abs().powf(p + 1.0) / (p + 1.0);
            let one = |i: usize, p: f64| (anti(b[i], p) - anti(a[i], p)) / (b[i] - a[i]);
            if d == 1 {
                one(0, delta)
            } else {
                planar_bound(delta, one(0, 2.0) + one(1, 2.0), || Ok(one(0, delta).max(one(1, delta))))?
            }
        }
        DistSpec::SmoothedUniform { .. } => quadrature_moment(spec, delta)?,
        DistSpec::Point { x } => x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(delta),
        DistSpec::Discrete { atoms, weights } => atoms.iter().zip(weights).map(|(a, w)| w * a.abs().powf(delta)).sum(),
        DistSpec::Grid { density, .. } => {
            let g = density.as_ref().ok_or_else(|| Error::InvalidSpec("grid density not loaded".into()))?;
            let m = g.mass();
            (0..g.values().len())
                .map(|i| {
                    let x = g.grid().node(i);
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    r.powf(delta) * g.values()[i] * g.grid().trapezoid_weight(i) / m
                })
                .sum()
        }
    };
    Ok(MomentBound { c_f: finite(v, "E|X|^delta is not finite")?, delta })
}

/// Sample mean of |x|^δ inflated by three standard errors.
pub fn moment_bound_samples(samples: &Samples, delta: f64) -> Result<MomentBound> {
    check_delta(delta)?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = samples.len() as f64;
    let vals: Vec<f64> =
        (0..samples.len()).map(|i| samples.point(i).iter().map(|v| v * v).sum::<f64>().sqrt().powf(delta)).collect();
    let mean = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let c = mean + 3.0 * (var / n).sqrt();
    Ok(MomentBound { c_f: finite(c, "sample moment is not finite")?, delta })
}

/// Exponential regularity constant
/// C_r = max(E e^{r|X|}, ∫|φ(u)| e^{r|u|} du), finite only when both the
/// law and its characteristic function have exponentially light tails.
/// Closed form for one-dimensional Gaussians.
pub fn exp_regularity(spec: &DistSpec, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidRegularity(format!("r = {r}, must be > 0")));
    }
    match spec {
        DistSpec::Gaussian { mean, cov } if mean.len() == 1 => {
            let (m, s) = (mean[0], cov[0][0].sqrt());
            let half = r * r * s * s / 2.0;
            let law = (r * m + half).exp() * norm_cdf(m / s + r * s) + (-r * m + half).exp() * norm_cdf(-m / s + r * s);
            let cf = 2.0 * (r * r / (2.0 * s * s)).exp() * (2.0 * PI).sqrt() / s * norm_cdf(r / s);
            Ok(law.max(cf))
        }
        DistSpec::Gaussian { .. } => Err(Error::UnsupportedDimension { dim: spec.dim() }),
        _ => Err(Error::MomentDiverges(
            "the characteristic function is not exponentially integrable for this family".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        assert_relative_eq!(moment_bound(&DistSpec::standard_gaussian(1), 2.0).unwrap().c_f, 1.0, epsilon = 1e-14);
        assert_relative_eq!(moment_bound(&DistSpec::laplace(1.0), 1.0).unwrap().c_f, 1.0, epsilon = 1e-14);
        assert_relative_eq!(moment_bound(&DistSpec::laplace(1.0), 2.0).unwrap().c_f, 2.0, epsilon = 1e-14);
        assert_relative_eq!(
            moment_bound(&DistSpec::uniform_1d(-1.0, 1.0), 2.0).unwrap().c_f,
            1.0 / 3.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(moment_bound(&DistSpec::standard_gaussian(2), 2.0).unwrap().c_f, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        let shifted = DistSpec::gaussian_1d(1e-300, 1.0);
        let q = moment_bound(&shifted, 3.0).unwrap().c_f;
        assert_relative_eq!(q, chi_abs_moment(1, 3.0), max_relative = 1e-9);
        let lap = DistSpec::Laplace { lambda: 1.0, loc: 1e-300, dim: 1 };
        assert_relative_eq!(moment_bound(&lap, 1.5).unwrap().c_f, gamma_fn(2.5), max_relative = 1e-9);
    }

    #[test]
    fn planar_bounds_dominate_truth() {
        // E|X|^3 for a standard 2-D Gaussian is 3√(π/2).
        let truth = 3.0 * (PI / 2.0).sqrt();
        let g = DistSpec::Gaussian { mean: vec![0.0, 0.0], cov: vec![vec![1.0, 0.0], vec![0.0, 1.0 + 1e-15]] };
        assert!(moment_bound(&g, 3.0).unwrap().c_f >= truth);
    }

    #[test]
    fn samples_are_inflated() {
        let s = Samples::from_1d(vec![1.0, -1.0, 2.0, -2.0]).unwrap();
        let m = moment_bound_samples(&s, 2.0).unwrap();
        assert!(m.c_f > 2.5);
    }

    #[test]
    fn gaussian_exp_regularity_matches_quadrature() {
        let spec = DistSpec::gaussian_1d(0.3, 0.7);
        let r = 1.0;
        let law = integrate(|x| (r * x.abs()).exp() * spec.pdf(&[x]).unwrap(), -40.0, 40.0, &[0.0], 1e-12).value;
        let cf = integrate(|u| spec.cf(&[u]).norm() * (r * u.abs()).exp(), -60.0, 60.0, &[0.0], 1e-12).value;
        assert_relative_eq!(exp_regularity(&spec, r).unwrap(), law.max(cf), max_relative = 1e-9);
        assert_eq!(exp_regularity(&DistSpec::laplace(1.0), 0.5).unwrap_err().code(), "moment_diverges");
    }
}
