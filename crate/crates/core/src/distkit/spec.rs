// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::GridDensity;
use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_pdf};

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

/// An analytic (or tabulated) probability law on ℝ^d, d ∈ {1, 2}.
///
/// The JSON form is internally tagged by `family`, e.g.
/// `{"family":"laplace","lambda":1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    /// Zero-mean (shifted by `loc`) Laplace law with density λe^{−λ|x|}/2,
    /// i.i.d. across `dim` coordinates.
    Laplace {
        lambda: f64,
        #[serde(default)]
        loc: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// Mixture Σ_{k≤K} w_k Laplace(k) with w_k ∝ 1/k², scaled by `scale`.
    LaplaceMixture {
        #[serde(rename = "K")]
        k: usize,
        #[serde(default = "one_f")]
        scale: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    Uniform {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// Uniform[a, b] plus an independent N(0, σ²), one-dimensional.
    SmoothedUniform {
        a: f64,
        b: f64,
        sigma: f64,
    },
    Point {
        x: Vec<f64>,
    },
    /// Finite one-dimensional law with the given atoms.
    Discrete {
        atoms: Vec<f64>,
        weights: Vec<f64>,
    },
    Grid {
        path: String,
        #[serde(skip)]
        density: Option<Arc<GridDensity>>,
    },
}

/// Normalized mixture weights 1/(k² H₂(K)), k = 1..=K.
pub fn mixture_weights(k_max: usize) -> Vec<f64> {
    let h2: f64 = (1..=k_max).map(|k| 1.0 / (k * k) as f64).sum();
    (1..=k_max).map(|k| 1.0 / ((k * k) as f64 * h2)).collect()
}

/// Weight Σ_{k>K} 6/(k²π²) dropped by truncating the infinite mixture.
pub fn mixture_tail_weight(k_max: usize) -> f64 {
    let head: f64 = (1..=k_max).map(|k| 6.0 / ((k * k) as f64 * PI * PI)).sum();
    (1.0 - head).max(0.0)
}

fn laplace_cdf(x: f64, lambda: f64) -> f64 {
    if x < 0.0 {
        0.5 * (lambda * x).exp()
    } else {
        1.0 - 0.5 * (-lambda * x).exp()
    }
}

/// Antiderivative of Φ: ∫Φ = zΦ(z) + φ(z).
fn norm_cdf_integral(z: f64) -> f64 {
    z * norm_cdf(z) + norm_pdf(z)
}

fn uniform_cf(u: f64, a: f64, b: f64) -> Complex64 {
    let half = 0.5 * u * (b - a);
    let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
    Complex64::from_polar(sinc, 0.5 * u * (a + b))
}

impl DistSpec {
    pub fn standard_gaussian(d: usize) -> Self {
        let cov = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        DistSpec::Gaussian { mean: vec![0.0; d], cov }
    }

    pub fn gaussian_1d(mean: f64, var: f64) -> Self {
        DistSpec::Gaussian { mean: vec![mean], cov: vec![vec![var]] }
    }

    pub fn laplace(lambda: f64) -> Self {
        DistSpec::Laplace { lambda, loc: 0.0, dim: 1 }
    }

    pub fn laplace_mixture(k: usize) -> Self {
        DistSpec::LaplaceMixture { k, scale: 1.0, dim: 1 }
    }

    pub fn uniform_1d(a: f64, b: f64) -> Self {
        DistSpec::Uniform { a: vec![a], b: vec![b] }
    }

    pub fn dim(&self) -> usize {
        match self {
            DistSpec::Gaussian { mean, .. } => mean.len(),
            DistSpec::Laplace { dim, .. } | DistSpec::LaplaceMixture { dim, .. } => *dim,
            DistSpec::Uniform { a, .. } => a.len(),
            DistSpec::SmoothedUniform { .. } | DistSpec::Discrete { .. } => 1,
            DistSpec::Point { x } => x.len(),
            DistSpec::Grid { density, .. } => density.as_ref().map_or(1, |g| g.dim()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let d = self.dim();
        if !(1..=2).contains(&d) {
            return Err(Error::UnsupportedDimension { dim: d });
        }
        match self {
            DistSpec::Gaussian { mean, cov } => {
                if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                    return bad(format!("cov: expected a {d}x{d} matrix"));
                }
                if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
                    return bad("mean/cov: non-finite entry".into());
                }
                if d == 2 && (cov[0][1] - cov[1][0]).abs() > 1e-12 * (1.0 + cov[0][1].abs()) {
                    return bad("cov: not symmetric".into());
                }
                let det = if d == 1 { cov[0][0] } else { cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0] };
                if !(cov[0][0] > 0.0 && det > 0.0) {
                    return bad("cov: not positive definite".into());
                }
            }
            DistSpec::Laplace { lambda, loc, .. } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return bad("lambda: must be > 0".into());
                }
                if !loc.is_finite() {
                    return bad("loc: must be finite".into());
                }
            }
            DistSpec::LaplaceMixture { k, scale, .. } => {
                if *k < 1 {
                    return bad("K: must be >= 1".into());
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return bad("scale: must be > 0".into());
                }
            }
            DistSpec::Uniform { a, b } => {
                if a.len() != b.len() {
                    return bad("a/b: dimension mismatch".into());
                }
                if a.iter().zip(b).any(|(x, y)| !(x < y) || !x.is_finite() || !y.is_finite()) {
                    return bad("a/b: need a < b coordinatewise".into());
                }
            }
            DistSpec::SmoothedUniform { a, b, sigma } => {
                if !(a < b) {
                    return bad("a/b: need a < b".into());
                }
                if !(*sigma > 0.0) {
                    return bad("sigma: must be > 0".into());
                }
            }
            DistSpec::Point { x } => {
                if x.iter().any(|v| !v.is_finite()) {
                    return bad("x: non-finite entry".into());
                }
            }
            DistSpec::Discrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return bad("atoms/weights: need equal, non-zero lengths".into());
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return bad("weights: must be >= 0".into());
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return bad(format!("weights: sum to {s}, expected 1"));
                }
            }
            DistSpec::Grid { density, path } => {
                if density.is_none() {
                    return bad(format!("path: grid density '{path}' not loaded"));
                }
            }
        }
        Ok(())
    }

    /// Loads the CSV behind a `grid` family, resolving `path` against `base`.
    pub fn load_grids(&mut self, base: &Path) -> Result<()> {
        if let DistSpec::Grid { path, density } = self {
            if density.is_none() {
                let p = base.join(path);
                *density = Some(Arc::new(GridDensity::read_csv(&p)?));
            }
        }
        Ok(())
    }

    /// Characteristic function φ(u) = E e^{i⟨u,X⟩}.
    pub fn cf(&self, u: &[f64]) -> Complex64 {
        match self {
            DistSpec::Gaussian { mean, cov } => {
                let mut quad = 0.0;
                let mut lin = 0.0;
                for i in 0..mean.len() {
                    lin += u[i] * mean[i];
                    for j in 0..mean.len() {
                        quad += u[i] * cov[i][j] * u[j];
                    }
                }
                Complex64::from_polar((-0.5 * quad).exp(), lin)
            }
            DistSpec::Laplace { lambda, loc, dim } => {
                let l2 = lambda * lambda;
                (0..*dim).fold(Complex64::new(1.0, 0.0), |acc, i| {
                    acc * Complex64::from_polar(l2 / (l2 + u[i] * u[i]), u[i] * loc)
                })
            }
            DistSpec::LaplaceMixture { k, scale, dim } => {
                let w = mixture_weights(*k);
                let mut out = 1.0;
                for i in 0..*dim {
                    let t = scale * u[i];
                    let t2 = t * t;
                    out *= w
                        .iter()
                        .enumerate()
                        .map(|(j, wk)| {
                            let k2 = ((j + 1) * (j + 1)) as f64;
                            wk * k2 / (k2 + t2)
                        })
                        .sum::<f64>();
                }
                Complex64::new(out, 0.0)
            }
            DistSpec::Uniform { a, b } => {
                (0..a.len()).fold(Complex64::new(1.0, 0.0), |acc, i| acc * uniform_cf(u[i], a[i], b[i]))
            }
            DistSpec::SmoothedUniform { a, b, sigma } => {
                uniform_cf(u[0], *a, *b) * (-0.5 * sigma * sigma * u[0] * u[0]).exp()
            }
            DistSpec::Point { x } => {
                let phase: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
                Complex64::from_polar(1.0, phase)
            }
            DistSpec::Discrete { atoms, weights } => {
                atoms.iter().zip(weights).map(|(a, w)| Complex64::from_polar(*w, a * u[0])).sum()
            }
            DistSpec::Grid { density, .. } => density.as_ref().map_or(Complex64::new(f64::NAN, 0.0), |g| g.cf(u)),
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, DistSpec::Point { .. } | DistSpec::Discrete { .. })
    }

    /// Closed-form density. Uniform laws take the value half-height on the
    /// boundary so that trapezoidal sums over node-aligned grids are exact.
    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            DistSpec::Gaussian { mean, cov } => {
                if mean.len() == 1 {
                    let s = cov[0][0].sqrt();
                    norm_pdf((x[0] - mean[0]) / s) / s
                } else {
                    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
                    let (d0, d1) = (x[0] - mean[0], x[1] - mean[1]);
                    let q = (cov[1][1] * d0 * d0 - 2.0 * cov[0][1] * d0 * d1 + cov[0][0] * d1 * d1) / det;
                    (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
                }
            }
            DistSpec::Laplace { lambda, loc, dim } => {
                (0..*dim).map(|i| 0.5 * lambda * (-lambda * (x[i] - loc).abs()).exp()).product()
            }
            DistSpec::LaplaceMixture { k, scale, dim } => {
                let w = mixture_weights(*k);
                (0..*dim)
                    .map(|i| {
                        let z = (x[i] / scale).abs();
                        w.iter()
                            .enumerate()
                            .map(|(j, wk)| {
                                let kk = (j + 1) as f64;
                                wk * 0.5 * kk * (-kk * z).exp()
                            })
                            .sum::<f64>()
                            / scale
                    })
                    .product()
            }
            DistSpec::Uniform { a, b } => (0..a.len())
                .map(|i| {
                    let h = 1.0 / (b[i] - a[i]);
                    if x[i] > a[i] && x[i] < b[i] {
                        h
                    } else if x[i] == a[i] || x[i] == b[i] {
                        0.5 * h
                    } else {
                        0.0
                    }
                })
                .product(),
            DistSpec::SmoothedUniform { a, b, sigma } => {
                (norm_cdf((x[0] - a) / sigma) - norm_cdf((x[0] - b) / sigma)) / (b - a)
            }
            DistSpec::Point { .. } | DistSpec::Discrete { .. } => {
                return Err(Error::InvalidSpec("law has no density".into()))
            }
            DistSpec::Grid { density, .. } => match density {
                Some(g) => g.value_at(x)?,
                None => return Err(Error::InvalidSpec("grid density not loaded".into())),
            },
        })
    }

    /// One-dimensional distribution function.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::UnsupportedDimension { dim: self.dim() });
        }
        Ok(match self {
            DistSpec::Gaussian { mean, cov } => norm_cdf((x - mean[0]) / cov[0][0].sqrt()),
            DistSpec::Laplace { lambda, loc, .. } => laplace_cdf(x - loc, *lambda),
            DistSpec::LaplaceMixture { k, scale, .. } => {
                let z = x / scale;
                mixture_weights(*k).iter().enumerate().map(|(j, w)| w * laplace_cdf(z, (j + 1) as f64)).sum()
            }
            DistSpec::Uniform { a, b } => ((x - a[0]) / (b[0] - a[0])).clamp(0.0, 1.0),
            DistSpec::SmoothedUniform { a, b, sigma } => {
                sigma * (norm_cdf_integral((x - a) / sigma) - norm_cdf_integral((x - b) / sigma)) / (b - a)
            }
            DistSpec::Point { x: p } => {
                if x >= p[0] {
                    1.0
                } else {
                    0.0
                }
            }
            DistSpec::Discrete { atoms, weights } => {
                atoms.iter().zip(weights).filter(|(a, _)| **a <= x).map(|(_, w)| w).sum()
            }
            DistSpec::Grid { density, .. } => match density {
                Some(g) => g.cdf_1d(x),
                None => return Err(Error::InvalidSpec("grid density not loaded".into())),
            },
        })
    }

    /// Interval outside which a one-dimensional law has (numerically)
    /// negligible mass, plus interior kink locations for quadrature.
    pub fn support_hint(&self) -> (f64, f64, Vec<f64>) {
        match self {
            DistSpec::Gaussian { mean, cov } => {
                let s = cov[0][0].sqrt();
                (mean[0] - 40.0 * s, mean[0] + 40.0 * s, vec![mean[0]])
            }
            DistSpec::Laplace { lambda, loc, .. } => (loc - 45.0 / lambda, loc + 45.0 / lambda, vec![*loc]),
            DistSpec::LaplaceMixture { scale, .. } => (-45.0 * scale, 45.0 * scale, vec![0.0]),
            DistSpec::Uniform { a, b } => (a[0], b[0], vec![]),
            DistSpec::SmoothedUniform { a, b, sigma } => (a - 40.0 * sigma, b + 40.0 * sigma, vec![*a, *b]),
            DistSpec::Point { x } => (x[0], x[0], vec![x[0]]),
            DistSpec::Discrete { atoms, .. } => {
                let lo = atoms.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi, atoms.clone())
            }
            DistSpec::Grid { density, .. } => match density {
                Some(g) => (g.grid().lo[0], g.grid().hi[0], vec![]),
                None => (0.0, 0.0, vec![]),
            },
        }
    }

    /// Mean vector and covariance matrix in closed form.
    pub fn mean_cov(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let d = self.dim();
        let diag = |v: f64| -> Vec<Vec<f64>> {
            (0..d).map(|i| (0..d).map(|j| if i == j { v } else { 0.0 }).collect()).collect()
        };
        Ok(match self {
            DistSpec::Gaussian { mean, cov } => (mean.clone(), cov.clone()),
            DistSpec::Laplace { lambda, loc, .. } => (vec![*loc; d], diag(2.0 / (lambda * lambda))),
            DistSpec::LaplaceMixture { k, scale, .. } => {
                let var: f64 =
                    mixture_weights(*k).iter().enumerate().map(|(j, w)| w * 2.0 / ((j + 1) * (j + 1)) as f64).sum();
                (vec![0.0; d], diag(var * scale * scale))
            }
            DistSpec::Uniform { a, b } => {
                let mean = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
                let cov = (0..d)
                    .map(|i| (0..d).map(|j| if i == j { (b[i] - a[i]).powi(2) / 12.0 } else { 0.0 }).collect())
                    .collect();
                (mean, cov)
            }
            DistSpec::SmoothedUniform { a, b, sigma } => {
                (vec![0.5 * (a + b)], vec![vec![(b - a).powi(2) / 12.0 + sigma * sigma]])
            }
            DistSpec::Point { x } => (x.clone(), diag(0.0)),
            DistSpec::Discrete { atoms, weights } => {
                let m: f64 = atoms.iter().zip(weights).map(|(a, w)| a * w).sum();
                let v: f64 = atoms.iter().zip(weights).map(|(a, w)| w * (a - m).powi(2)).sum();
                (vec![m], vec![vec![v]])
            }
            DistSpec::Grid { density, .. } => match density {
                Some(g) => g.mean_cov(),
                None => return Err(Error::InvalidSpec("grid density not loaded".into())),
            },
        })
    }

    /// The same family transformed to zero mean and identity covariance.
    /// Multivariate Gaussians and i.i.d.-coordinate families are supported.
    pub fn standardized(&self) -> Result<DistSpec> {
        let d = self.dim();
        Ok(match self {
            DistSpec::Gaussian { .. } => DistSpec::standard_gaussian(d),
            DistSpec::Laplace { dim, .. } => DistSpec::Laplace { lambda: 2f64.sqrt(), loc: 0.0, dim: *dim },
            DistSpec::LaplaceMixture { k, dim, .. } => {
                let unit = DistSpec::LaplaceMixture { k: *k, scale: 1.0, dim: 1 };
                let (_, cov) = unit.mean_cov()?;
                DistSpec::LaplaceMixture { k: *k, scale: 1.0 / cov[0][0].sqrt(), dim: *dim }
            }
            DistSpec::Uniform { a, .. } => {
                let h = 3f64.sqrt();
                DistSpec::Uniform { a: vec![-h; a.len()], b: vec![h; a.len()] }
            }
            DistSpec::SmoothedUniform { a, b, sigma } => {
                let sd = ((b - a).powi(2) / 12.0 + sigma * sigma).sqrt();
                let half = 0.5 * (b - a) / sd;
                DistSpec::SmoothedUniform { a: -half, b: half, sigma: sigma / sd }
            }
            DistSpec::Discrete { atoms, weights } => {
                let (m, c) = self.mean_cov()?;
                let sd = c[0][0].sqrt();
                if !(sd > 0.0) {
                    return Err(Error::InvalidSpec("degenerate law cannot be standardized".into()));
                }
                DistSpec::Discrete { atoms: atoms.iter().map(|a| (a - m[0]) / sd).collect(), weights: weights.clone() }
            }
            DistSpec::Point { .. } => return Err(Error::InvalidSpec("degenerate law cannot be standardized".into())),
            DistSpec::Grid { .. } => return Err(Error::InvalidSpec("tabulated laws cannot be standardized".into())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn json_forms() {
        let g: DistSpec = serde_json::from_str(r#"{"family":"gaussian","mean":[0],"cov":[[1]]}"#).unwrap();
        assert_eq!(g, DistSpec::gaussian_1d(0.0, 1.0));
        let l: DistSpec = serde_json::from_str(r#"{"family":"laplace","lambda":1.0}"#).unwrap();
        assert_eq!(l, DistSpec::laplace(1.0));
        let m: DistSpec = serde_json::from_str(r#"{"family":"laplace_mixture","K":100}"#).unwrap();
        assert_eq!(m, DistSpec::laplace_mixture(100));
        let u: DistSpec = serde_json::from_str(r#"{"family":"uniform","a":[0],"b":[1]}"#).unwrap();
        assert_eq!(u, DistSpec::uniform_1d(0.0, 1.0));
        let p: DistSpec = serde_json::from_str(r#"{"family":"point","x":[0]}"#).unwrap();
        assert_eq!(p.dim(), 1);
        assert!(serde_json::from_str::<DistSpec>(r#"{"family":"laplace","lambda":1.0,"bogus":2}"#).is_err());
    }

    #[test]
    fn cf_examples() {
        let g = DistSpec::gaussian_1d(0.0, 1.0);
        assert_relative_eq!(g.cf(&[1.0]).re, (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(DistSpec::laplace(1.0).cf(&[1.0]).re, 0.5, epsilon = 1e-15);
        for s in [g, DistSpec::laplace(2.0), DistSpec::laplace_mixture(5), DistSpec::uniform_1d(-1.0, 3.0)] {
            let v = s.cf(&[0.0]);
            assert_eq!(v, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn mixture_cf_matches_definition() {
        let w = mixture_weights(100);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        let t = 3.0;
        let expect: f64 = (1..=100).map(|k| w[k - 1] * (k * k) as f64 / ((k * k) as f64 + t * t)).sum();
        assert_relative_eq!(DistSpec::laplace_mixture(100).cf(&[t]).re, expect, epsilon = 1e-15);
        assert!(mixture_tail_weight(100) <= 6.0 / (100.0 * PI * PI));
    }

    #[test]
    fn standardization_gives_unit_variance() {
        for s in [
            DistSpec::laplace(1.0),
            DistSpec::laplace_mixture(100),
            DistSpec::uniform_1d(2.0, 5.0),
            DistSpec::SmoothedUniform { a: 0.0, b: 2.0, sigma: 0.5 },
            DistSpec::gaussian_1d(3.0, 4.0),
        ] {
            let (m, c) = s.standardized().unwrap().mean_cov().unwrap();
            assert!(m[0].abs() <= 1e-12);
            assert!((c[0][0] - 1.0).abs() <= 1e-10, "{s:?}: {}", c[0][0]);
        }
        assert!(DistSpec::Point { x: vec![0.0] }.standardized().is_err());
    }

    #[test]
    fn smoothed_uniform_cdf_is_consistent_with_pdf() {
        let s = DistSpec::SmoothedUniform { a: -1.0, b: 2.0, sigma: 0.3 };
        let h = 1e-5;
        for &x in &[-2.0, -1.0, 0.3, 2.0, 3.0] {
            let num = (s.cdf(x + h).unwrap() - s.cdf(x - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(num, s.pdf(&[x]).unwrap(), epsilon = 1e-7);
        }
        assert!(s.cdf(-20.0).unwrap() < 1e-12);
        assert!((s.cdf(20.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_names_fields() {
        let e = DistSpec::laplace(-1.0).validate().unwrap_err();
        assert!(e.to_string().contains("lambda"));
        let e = DistSpec::Gaussian { mean: vec![0.0], cov: vec![vec![-1.0]] }.validate().unwrap_err();
        assert!(e.to_string().contains("cov"));
        assert!(DistSpec::uniform_1d(1.0, 1.0).validate().is_err());
    }
}
