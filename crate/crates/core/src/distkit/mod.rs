// SPDX-License-Identifier: Apache-2.0

//! Distribution representations: analytic families, characteristic
//! functions, FFT inversion onto grids, tail envelopes, moments, sampling.

mod cf;
mod envelope;
mod grid;
mod invert;
mod moments;
mod sample;
mod spec;

pub use cf::{empirical_cf, pow_polar, CharFn, Provenance, Samples};
pub use envelope::{fit_tail_envelope, TailEnvelope, AUDIT_POINTS, DEFAULT_GAMMA_CAP};
pub use grid::{GridDensity, GridSpec, DEFAULT_MASS_TOLERANCE};
pub use invert::{invert_cf_to_density, invert_cf_with, Cutoff, Inversion, InversionOptions};
pub use moments::{exp_regularity, moment_bound, moment_bound_samples, MomentBound};
pub use sample::{sample, Sampler};
pub use spec::{mixture_tail_weight, mixture_weights, DistSpec};

use crate::error::Result;

/// Closed-form density of `spec` tabulated on `grid`.
pub fn density_on_grid(spec: &DistSpec, grid: &GridSpec, eta: f64) -> Result<GridDensity> {
    GridDensity::from_fn(grid.clone(), eta, |x| spec.pdf(x).unwrap_or(f64::NAN))
}

/// Either an analytic law or a sample from one.
#[derive(Debug, Clone)]
pub enum Law {
    Analytic(DistSpec),
    Empirical(Samples),
}

impl Law {
    pub fn dim(&self) -> usize {
        match self {
            Law::Analytic(s) => s.dim(),
            Law::Empirical(s) => s.dim(),
        }
    }

    pub fn cf(&self) -> CharFn {
        match self {
            Law::Analytic(s) => CharFn::Analytic(s.clone()),
            Law::Empirical(s) => CharFn::empirical(s.clone()),
        }
    }

    pub fn moment_bound(&self, delta: f64) -> Result<MomentBound> {
        match self {
            Law::Analytic(s) => moment_bound(s, delta),
            Law::Empirical(s) => moment_bound_samples(s, delta),
        }
    }
}
