// SPDX-License-Identifier: Apache-2.0

//! Contractive recursions X_{n+1} = ν(X_n) + ξ_{n+1} driven by a causal
//! linear process ξ_n = Σ_j b_j ε_{n−j}: simulation, backward coupling,
//! geometric W1 and total-variation rates.

mod rates;
mod simulate;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distkit::{moment_bound, DistSpec, Sampler};
use crate::error::{Error, Result};
use crate::rng::stream;

pub use rates::{
    certified_tv_rate, empirical_tv_decay, s_bound, w1_geometric_bound, CertifiedTvRate, GeometricKind, GeometricRate,
    TvDecay, TvDecayOptions, TvDecayRow,
};
pub use simulate::{backward_coupling, simulate_recursion, Coupling, GapStat, Trajectories};

pub const DEFAULT_COEFF_TOL: f64 = 1e-8;
const MAX_TRUNCATION: usize = 100_000;
const FUZZ_PAIRS: usize = 1000;

fn default_tol() -> f64 {
    DEFAULT_COEFF_TOL
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NuSpec {
    /// x ↦ Ax + b.
    Affine {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    /// x ↦ scale·tanh(x), coordinatewise.
    ScaledTanh { scale: f64 },
    /// A map registered with [`register_map`].
    User { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoeffSpec {
    /// b_j = scale·ratio^j.
    Geometric {
        ratio: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// Finitely many coefficients; the rest are zero.
    Explicit {
        values: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecursionSpec {
    pub nu: NuSpec,
    pub coeffs: CoeffSpec,
    pub innovation: DistSpec,
    pub init: DistSpec,
    pub kappa: f64,
}

pub type UserMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

fn registry() -> &'static RwLock<HashMap<String, UserMap>> {
    static REG: OnceLock<RwLock<HashMap<String, UserMap>>> = OnceLock::new();
    REG.get_or_init(Default::default)
}

/// Makes `f` available as `{"type": "user", "name": name}`. Its Lipschitz
/// constant is the declared `kappa`, which is fuzz-audited.
pub fn register_map<F>(name: &str, f: F)
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
{
    registry().write().expect("map registry poisoned").insert(name.to_string(), Arc::new(f));
}

#[derive(Clone)]
enum Nu {
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
    Tanh(f64),
    User(UserMap),
}

impl Nu {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Nu::Affine { a, b } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = b[i] + a[i].iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
                }
            }
            Nu::Tanh(s) => out.iter_mut().zip(x).for_each(|(o, v)| *o = s * v.tanh()),
            Nu::User(f) => f(x, out),
        }
    }
}

/// Largest singular value of a 1×1 or 2×2 matrix.
fn operator_norm(a: &[Vec<f64>]) -> f64 {
    match a.len() {
        1 => a[0][0].abs(),
        _ => {
            let t: f64 = a.iter().flatten().map(|v| v * v).sum();
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            ((t + (t * t - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
        }
    }
}

fn gauss<R: rand::Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A validated recursion: coefficients truncated at J, samplers built,
/// declared κ audited.
#[derive(Clone)]
pub struct Recursion {
    spec: RecursionSpec,
    nu: Nu,
    coeffs: Vec<f64>,
    tail: f64,
    abs_sum: f64,
    innovation: Sampler,
    init: Sampler,
}

impl std::fmt::Debug for Recursion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Recursion").field("spec", &self.spec).field("J", &self.truncation()).finish()
    }
}

impl Recursion {
    pub fn new(spec: RecursionSpec) -> Result<Self> {
        let kappa = spec.kappa;
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidSpec(format!("kappa = {kappa}, must lie in (0, 1)")));
        }
        spec.innovation.validate()?;
        spec.init.validate()?;
        let d = spec.innovation.dim();
        if spec.init.dim() != d {
            return Err(Error::InvalidSpec(format!(
                "init: dimension {} differs from innovation dimension {d}",
                spec.init.dim()
            )));
        }
        let nu = match &spec.nu {
            NuSpec::Affine { a, b } => {
                if a.len() != d || a.iter().any(|r| r.len() != d) || b.len() != d {
                    return Err(Error::InvalidSpec(format!("nu.A / nu.b: expected a {d}x{d} matrix and a {d}-vector")));
                }
                if a.iter().flatten().chain(b).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("nu.A / nu.b: non-finite entry".into()));
                }
                let op = operator_norm(a);
                if op > kappa * (1.0 + 1e-12) {
                    return Err(Error::InvalidSpec(format!("kappa = {kappa} is below the operator norm {op} of nu.A")));
                }
                Nu::Affine { a: a.clone(), b: b.clone() }
            }
            NuSpec::ScaledTanh { scale } => {
                if !(scale.abs() <= kappa) {
                    return Err(Error::InvalidSpec(format!("nu.scale = {scale} exceeds kappa = {kappa}")));
                }
                Nu::Tanh(*scale)
            }
            NuSpec::User { name } => {
                let map = registry().read().expect("map registry poisoned").get(name).cloned();
                Nu::User(map.ok_or_else(|| Error::InvalidSpec(format!("nu.name: no map registered as {name:?}")))?)
            }
        };
        let (coeffs, tail, abs_sum) = truncate(&spec.coeffs)?;
        let innovation = Sampler::new(&spec.innovation)?;
        let init = Sampler::new(&spec.init)?;
        let rec = Recursion { spec, nu, coeffs, tail, abs_sum, innovation, init };
        rec.audit_kappa()?;
        Ok(rec)
    }

    /// Same recursion with the coefficient series cut at index `j` instead.
    pub fn truncated_at(&self, j: usize) -> Result<Self> {
        let all = coefficients(&self.spec.coeffs, j)?;
        let kept = &all[..=j.min(all.len() - 1)];
        let kept_abs: f64 = kept.iter().map(|v| v.abs()).sum();
        let mut out = self.clone();
        out.tail = (self.abs_sum - kept_abs).max(0.0);
        out.coeffs = kept.to_vec();
        Ok(out)
    }

    fn audit_kappa(&self) -> Result<()> {
        let d = self.dim();
        let mut rng = stream(0x006b_6170_7061, 0);
        let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
        for i in 0..FUZZ_PAIRS {
            let spread = [25.0, 1.0, 1e-3][i % 3];
            let x: Vec<f64> = (0..d).map(|_| 5.0 * gauss(&mut rng)).collect();
            let y: Vec<f64> = x.iter().map(|v| v + spread * gauss(&mut rng)).collect();
            self.nu.apply(&x, &mut fx);
            self.nu.apply(&y, &mut fy);
            let lhs = norm(&fx.iter().zip(&fy).map(|(a, b)| a - b).collect::<Vec<_>>());
            let dist = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
            if !(lhs <= self.spec.kappa * dist * (1.0 + 1e-9) + 1e-15) {
                return Err(Error::InvalidSpec(format!(
                    "kappa = {} violated by nu at x = {x:?}, y = {y:?} (ratio {})",
                    self.spec.kappa,
                    lhs / dist
                )));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &RecursionSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.innovation.dim()
    }

    pub fn kappa(&self) -> f64 {
        self.spec.kappa
    }

    /// The index J: b_0..b_J are kept.
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Σ_{j>J} |b_j|.
    pub fn coeff_tail(&self) -> f64 {
        self.tail
    }

    /// Σ_j |b_j| over the full series.
    pub fn coeff_abs_sum(&self) -> f64 {
        self.abs_sum
    }

    /// |ν(0)|.
    pub fn nu_at_zero(&self) -> f64 {
        let d = self.dim();
        let mut out = vec![0.0; d];
        self.nu.apply(&vec![0.0; d], &mut out);
        norm(&out)
    }

    /// Bound on E|X_n − X_n^trunc| caused by cutting the series at J:
    /// the dropped noise has mean norm ≤ tail·E|ε| and the contraction
    /// sums its effect geometrically.
    pub fn truncation_w1_bound(&self) -> Result<f64> {
        let e_eps = moment_bound(&self.spec.innovation, 1.0)?.c_f;
        Ok(self.tail * e_eps / (1.0 - self.spec.kappa))
    }

    fn apply_nu(&self, x: &[f64], out: &mut [f64]) {
        self.nu.apply(x, out)
    }
}

/// b_0..b_J with J the smallest index whose tail is ≤ tol, the tail itself
/// and Σ|b_j|.
fn truncate(spec: &CoeffSpec) -> Result<(Vec<f64>, f64, f64)> {
    match spec {
        CoeffSpec::Geometric { ratio, scale, tol } => {
            check_tol(*tol)?;
            if !(ratio.abs() < 1.0) {
                return Err(Error::InvalidSpec(format!("coeffs.ratio = {ratio}, need |ratio| < 1")));
            }
            if *scale == 0.0 || !scale.is_finite() {
                return Err(Error::InvalidSpec(format!("coeffs.scale = {scale}: b_0 must be nonzero")));
            }
            let r = ratio.abs();
            let abs_sum = scale.abs() / (1.0 - r);
            let tail_after = |j: usize| scale.abs() * r.powi(j as i32 + 1) / (1.0 - r);
            let j = (0..=MAX_TRUNCATION).find(|&j| tail_after(j) <= *tol).ok_or_else(|| {
                Error::InvalidSpec(format!("coeffs.tol = {tol} needs more than {MAX_TRUNCATION} terms"))
            })?;
            Ok((coefficients(spec, j)?, tail_after(j), abs_sum))
        }
        CoeffSpec::Explicit { values, tol } => {
            check_tol(*tol)?;
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec("coeffs.values: need at least one finite value".into()));
            }
            if values[0] == 0.0 {
                return Err(Error::InvalidSpec("coeffs.values: b_0 must be nonzero".into()));
            }
            let abs_sum: f64 = values.iter().map(|v| v.abs()).sum();
            let tails: Vec<f64> = (0..values.len()).map(|j| values[j + 1..].iter().map(|v| v.abs()).sum()).collect();
            let j = tails.iter().position(|t| *t <= *tol).expect("the tail after the last value is zero");
            Ok((values[..=j].to_vec(), tails[j], abs_sum))
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidSpec(format!("coeffs.tol = {tol}, must be > 0")));
    }
    Ok(())
}

/// b_0..b_j (explicit series are zero-padded).
fn coefficients(spec: &CoeffSpec, j: usize) -> Result<Vec<f64>> {
    Ok(match spec {
        CoeffSpec::Geometric { ratio, scale, .. } => {
            let mut v = Vec::with_capacity(j + 1);
            let mut b = *scale;
            for _ in 0..=j {
                v.push(b);
                b *= ratio;
            }
            v
        }
        CoeffSpec::Explicit { values, .. } => {
            let mut v = values.clone();
            v.resize(v.len().max(j + 1), 0.0);
            v
        }
    })
}
