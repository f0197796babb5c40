// SPDX-License-Identifier: Apache-2.0

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use super::cf::Samples;
use super::spec::{mixture_weights, DistSpec};
use crate::error::{Error, Result};
use crate::rng::stream;

const CHUNK: usize = 4096;

/// Precomputed draw procedure for one law (Cholesky factor, cumulative
/// weights and so on), shareable across threads.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: Kind,
    dim: usize,
}

#[derive(Debug, Clone)]
enum Kind {
    Gaussian { mean: Vec<f64>, chol: Vec<Vec<f64>> },
    Laplace { lambda: f64, loc: f64 },
    Mixture { cum: Vec<f64>, scale: f64 },
    Uniform { a: Vec<f64>, b: Vec<f64> },
    SmoothedUniform { a: f64, b: f64, sigma: f64 },
    Point(Vec<f64>),
    Atoms { atoms: Vec<Vec<f64>>, cum: Vec<f64>, jitter: Vec<f64> },
}

fn cumulative(w: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut v: Vec<f64> = w
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    let total = acc;
    v.iter_mut().for_each(|c| *c /= total);
    v
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|c| *c <= u).min(cum.len() - 1)
}

impl Sampler {
    pub fn new(spec: &DistSpec) -> Result<Self> {
        spec.validate()?;
        let dim = spec.dim();
        let kind = match spec {
            DistSpec::Gaussian { mean, cov } => {
                let mut l = vec![vec![0.0; dim]; dim];
                l[0][0] = cov[0][0].sqrt();
                if dim == 2 {
                    l[1][0] = cov[1][0] / l[0][0];
                    l[1][1] = (cov[1][1] - l[1][0] * l[1][0]).sqrt();
                }
                Kind::Gaussian { mean: mean.clone(), chol: l }
            }
            DistSpec::Laplace { lambda, loc, .. } => Kind::Laplace { lambda: *lambda, loc: *loc },
            DistSpec::LaplaceMixture { k, scale, .. } => {
                Kind::Mixture { cum: cumulative(mixture_weights(*k).into_iter()), scale: *scale }
            }
            DistSpec::Uniform { a, b } => Kind::Uniform { a: a.clone(), b: b.clone() },
            DistSpec::SmoothedUniform { a, b, sigma } => Kind::SmoothedUniform { a: *a, b: *b, sigma: *sigma },
            DistSpec::Point { x } => Kind::Point(x.clone()),
            DistSpec::Discrete { atoms, weights } => Kind::Atoms {
                atoms: atoms.iter().map(|a| vec![*a]).collect(),
                cum: cumulative(weights.iter().copied()),
                jitter: vec![0.0],
            },
            DistSpec::Grid { density, .. } => {
                // Histogram sampling: a node by trapezoid weight, then a
                // uniform offset within its cell.
                let g = density.as_ref().ok_or_else(|| Error::InvalidSpec("grid density not loaded".into()))?;
                let grid = g.grid();
                Kind::Atoms {
                    atoms: (0..grid.len()).map(|i| grid.node(i)).collect(),
                    cum: cumulative((0..grid.len()).map(|i| g.values()[i] * grid.trapezoid_weight(i))),
                    jitter: (0..dim).map(|a| grid.spacing(a)).collect(),
                }
            }
        };
        Ok(Sampler { kind, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes one draw into `out` (length `dim`).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            Kind::Gaussian { mean, chol } => {
                let z: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
                for i in 0..self.dim {
                    out[i] = mean[i] + (0..=i).map(|j| chol[i][j] * z[j]).sum::<f64>();
                }
            }
            Kind::Laplace { lambda, loc } => {
                for o in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *o = loc + s * e / lambda;
                }
            }
            Kind::Mixture { cum, scale } => {
                for o in out.iter_mut() {
                    let k = (pick(cum, rng.random::<f64>()) + 1) as f64;
                    let e: f64 = Exp1.sample(rng);
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *o = scale * s * e / k;
                }
            }
            Kind::Uniform { a, b } => {
                for i in 0..self.dim {
                    out[i] = a[i] + (b[i] - a[i]) * rng.random::<f64>();
                }
            }
            Kind::SmoothedUniform { a, b, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                out[0] = a + (b - a) * rng.random::<f64>() + sigma * z;
            }
            Kind::Point(x) => out.copy_from_slice(x),
            Kind::Atoms { atoms, cum, jitter } => {
                let j = pick(cum, rng.random::<f64>());
                for i in 0..self.dim {
                    out[i] = atoms[j][i] + jitter[i] * (rng.random::<f64>() - 0.5);
                }
            }
        }
    }
}

/// `n` independent draws, reproducible from `seed` regardless of the number
/// of worker threads (each block of 4096 draws has its own stream).
pub fn sample(spec: &DistSpec, n: usize, seed: u64) -> Result<Samples> {
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let s = Sampler::new(spec)?;
    let d = s.dim();
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(CHUNK * d).enumerate().for_each(|(c, block)| {
        let mut rng = stream(seed, c as u64);
        for out in block.chunks_exact_mut(d) {
            s.draw(&mut rng, out);
        }
    });
    Samples::new(d, data)
}
