// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::spec::DistSpec;
use crate::error::{Error, Result};

/// Points in ℝ^d stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidSpec(format!("samples: {} values do not split into dim {dim}", data.len())));
        }
        if data.is_empty() {
            return Err(Error::EmptySamples);
        }
        Ok(Samples { dim, data })
    }

    pub fn from_1d(data: Vec<f64>) -> Result<Self> {
        Samples::new(1, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// (1/N) Σ e^{i⟨u, x_j⟩}.
pub fn empirical_cf(samples: &[f64], dim: usize, u: &[f64]) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = samples.len() / dim;
    let mut acc = Complex64::new(0.0, 0.0);
    for x in samples.chunks_exact(dim) {
        let phase: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
        acc += Complex64::new(phase.cos(), phase.sin());
    }
    Ok(acc / n as f64)
}

/// z^n computed through modulus and argument, so large n neither
/// overflows nor loses the phase.
pub fn pow_polar(z: Complex64, n: u64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let nf = n as f64;
    Complex64::from_polar((nf * r.ln()).exp(), nf * z.arg())
}

type Evaluator = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

/// Where a characteristic function came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Empirical { samples: usize },
    PowerScaled { n: u64 },
    Product,
    Custom,
}

#[derive(Clone)]
pub enum CharFn {
    Analytic(DistSpec),
    Empirical(Arc<Samples>),
    /// u ↦ φ(u/√n)ⁿ, the law of (X₁ + … + Xₙ)/√n.
    PowerScaled {
        base: Box<CharFn>,
        n: u64,
    },
    /// Pointwise product: the law of a sum of independent terms.
    Product(Vec<CharFn>),
    /// Independent coordinate blocks stacked into one vector.
    Tensor(Vec<CharFn>),
    Custom {
        dim: usize,
        label: String,
        eval: Evaluator,
    },
}

impl fmt::Debug for CharFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CharFn::Analytic(s) => f.debug_tuple("Analytic").field(s).finish(),
            CharFn::Empirical(s) => write!(f, "Empirical(n={}, dim={})", s.len(), s.dim()),
            CharFn::PowerScaled { base, n } => f.debug_struct("PowerScaled").field("base", base).field("n", n).finish(),
            CharFn::Product(v) => f.debug_tuple("Product").field(v).finish(),
            CharFn::Tensor(v) => f.debug_tuple("Tensor").field(v).finish(),
            CharFn::Custom { label, dim, .. } => write!(f, "Custom({label}, dim={dim})"),
        }
    }
}

impl From<DistSpec> for CharFn {
    fn from(s: DistSpec) -> Self {
        CharFn::Analytic(s)
    }
}

impl CharFn {
    pub fn empirical(samples: Samples) -> Self {
        CharFn::Empirical(Arc::new(samples))
    }

    pub fn power_scaled(base: CharFn, n: u64) -> Self {
        CharFn::PowerScaled { base: Box::new(base), n }
    }

    pub fn custom<F>(dim: usize, label: &str, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        CharFn::Custom { dim, label: label.to_string(), eval: Arc::new(f) }
    }

    /// Multiplies by the CF of N(0, h²I), i.e. convolves with a Gaussian kernel.
    pub fn smoothed(self, bandwidth: f64) -> Self {
        let d = self.dim();
        let mut g = DistSpec::standard_gaussian(d);
        if let DistSpec::Gaussian { cov, .. } = &mut g {
            for (i, row) in cov.iter_mut().enumerate() {
                row[i] = bandwidth * bandwidth;
            }
        }
        CharFn::Product(vec![self, CharFn::Analytic(g)])
    }

    pub fn dim(&self) -> usize {
        match self {
            CharFn::Analytic(s) => s.dim(),
            CharFn::Empirical(s) => s.dim(),
            CharFn::PowerScaled { base, .. } => base.dim(),
            CharFn::Product(v) => v.first().map_or(1, |c| c.dim()),
            CharFn::Tensor(v) => v.iter().map(|c| c.dim()).sum(),
            CharFn::Custom { dim, .. } => *dim,
        }
    }

    pub fn provenance(&self) -> Provenance {
        match self {
            CharFn::Analytic(_) => Provenance::Analytic,
            CharFn::Empirical(s) => Provenance::Empirical { samples: s.len() },
            CharFn::PowerScaled { n, .. } => Provenance::PowerScaled { n: *n },
            CharFn::Product(_) | CharFn::Tensor(_) => Provenance::Product,
            CharFn::Custom { .. } => Provenance::Custom,
        }
    }

    pub fn eval(&self, u: &[f64]) -> Complex64 {
        match self {
            CharFn::Analytic(s) => s.cf(u),
            CharFn::Empirical(s) => empirical_cf(s.data(), s.dim(), u).expect("Samples are never empty"),
            CharFn::PowerScaled { base, n } => {
                let scale = 1.0 / (*n as f64).sqrt();
                let v: Vec<f64> = u.iter().map(|x| x * scale).collect();
                pow_polar(base.eval(&v), *n)
            }
            CharFn::Product(v) => v.iter().map(|c| c.eval(u)).product(),
            CharFn::Tensor(v) => {
                let mut off = 0;
                let mut acc = Complex64::new(1.0, 0.0);
                for c in v {
                    let d = c.dim();
                    acc *= c.eval(&u[off..off + d]);
                    off += d;
                }
                acc
            }
            CharFn::Custom { eval, .. } => eval(u),
        }
    }

    pub fn eval1(&self, t: f64) -> Complex64 {
        self.eval(&[t])
    }

    /// Values φ(k·du) for k in `k0..k1` (one-dimensional). Empirical
    /// factors use a phase-rotation recurrence instead of one exp per term.
    pub fn lattice_1d(&self, du: f64, k0: usize, k1: usize) -> Vec<Complex64> {
        match self {
            CharFn::Empirical(s) if s.dim() == 1 => {
                let mut acc = vec![Complex64::new(0.0, 0.0); k1 - k0];
                for &x in s.data() {
                    let step = Complex64::from_polar(1.0, du * x);
                    let mut z = Complex64::from_polar(1.0, k0 as f64 * du * x);
                    for (i, a) in acc.iter_mut().enumerate() {
                        // Re-anchor periodically to keep rounding drift negligible.
                        if i > 0 && i % 4096 == 0 {
                            z = Complex64::from_polar(1.0, (k0 + i) as f64 * du * x);
                        }
                        *a += z;
                        z *= step;
                    }
                }
                let inv = 1.0 / s.len() as f64;
                acc.iter_mut().for_each(|a| *a *= inv);
                acc
            }
            CharFn::Product(v) => {
                let mut out = vec![Complex64::new(1.0, 0.0); k1 - k0];
                for c in v {
                    for (o, x) in out.iter_mut().zip(c.lattice_1d(du, k0, k1)) {
                        *o *= x;
                    }
                }
                out
            }
            CharFn::PowerScaled { base, n } => {
                base.lattice_1d(du / (*n as f64).sqrt(), k0, k1).into_iter().map(|z| pow_polar(z, *n)).collect()
            }
            _ => (k0..k1).map(|k| self.eval1(k as f64 * du)).collect(),
        }
    }
}
