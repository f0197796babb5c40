// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::cf::CharFn;
use super::envelope::TailEnvelope;
use super::grid::{GridDensity, GridSpec, DEFAULT_MASS_TOLERANCE};
use crate::error::{Error, Result};

/// How far out in frequency the inverse transform is summed.
#[derive(Debug, Clone, Copy)]
pub enum Cutoff {
    Fixed(f64),
    /// Pick the cutoff so the envelope's tail integral is at most `tolerance`.
    Envelope {
        envelope: TailEnvelope,
        tolerance: f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    /// The FFT length is the next power of two ≥ pad·points, which pushes
    /// periodic images of the density pad−1 box widths away.
    pub pad: usize,
    pub mass_tolerance: f64,
    /// Cap on evaluated frequencies (per half line in 1-D, per square in 2-D).
    pub max_terms: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions { pad: 4, mass_tolerance: DEFAULT_MASS_TOLERANCE, max_terms: 1 << 26 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Inversion {
    pub density: GridDensity,
    pub u_cutoff: f64,
    /// (2π)^{−d} ∫_{|u|>cutoff} envelope, when an envelope was supplied.
    pub truncation_error: Option<f64>,
    /// Trapezoid mass of the clipped negative ripples.
    pub clipped_mass: f64,
}

pub fn invert_cf_to_density(cf: &CharFn, grid: &GridSpec, cutoff: Cutoff) -> Result<Inversion> {
    invert_cf_with(cf, grid, cutoff, &InversionOptions::default())
}

/// f(x) = (2π)^{−d} ∫_{|u|≤U} e^{−i⟨u,x⟩} φ(u) du as a Riemann sum on the
/// frequency lattice dual to the padded grid, evaluated by one FFT.
/// Frequencies beyond the FFT length are folded (aliased) onto it, so the
/// cutoff is independent of the grid resolution.
pub fn invert_cf_with(cf: &CharFn, grid: &GridSpec, cutoff: Cutoff, opts: &InversionOptions) -> Result<Inversion> {
    grid.validate()?;
    let d = grid.dim();
    if cf.dim() != d {
        return Err(Error::GridMismatch(format!("cf dimension {} vs grid dimension {d}", cf.dim())));
    }
    let n_fft = (opts.pad.max(1) * grid.points).next_power_of_two();
    let du: Vec<f64> = (0..d).map(|a| 2.0 * PI / (n_fft as f64 * grid.spacing(a))).collect();
    let du_min = du.iter().copied().fold(f64::INFINITY, f64::min);
    let (u_cut, env) = match cutoff {
        Cutoff::Fixed(u) => (u, None),
        Cutoff::Envelope { envelope, tolerance } => {
            if envelope.gamma <= 0.0 {
                return Err(Error::InvalidRegularity(format!(
                    "envelope gamma = {} gives no finite tail integral",
                    envelope.gamma
                )));
            }
            (envelope.cutoff_for(tolerance), Some(envelope))
        }
    };
    if !(u_cut > 0.0) {
        return Err(Error::InvalidSpec(format!("u_cutoff must be > 0, got {u_cut}")));
    }
    let mut u_cut = u_cut;
    let k_cap = match d {
        1 => opts.max_terms,
        _ => (opts.max_terms as f64).sqrt() as usize,
    };
    let k_max = ((u_cut / du_min).ceil() as usize).min(k_cap);
    u_cut = k_max as f64 * du_min;
    let truncation_error = env.map(|e| e.tail_integral(u_cut) / (2.0 * PI).powi(d as i32));

    let raw = match d {
        1 => invert_1d(cf, grid.lo[0], du[0], k_max, n_fft, grid.points),
        _ => invert_2d(cf, grid, &du, k_max, n_fft),
    };
    let mut clipped = 0.0;
    let values: Vec<f64> = raw
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if v < 0.0 {
                clipped += -v * grid.trapezoid_weight(i);
                0.0
            } else {
                v
            }
        })
        .collect();
    let density = GridDensity::new(grid.clone(), values, opts.mass_tolerance)?;
    Ok(Inversion { density, u_cutoff: u_cut, truncation_error, clipped_mass: clipped })
}

const CHUNK: usize = 1 << 15;
const BATCH: usize = 32;

fn invert_1d(cf: &CharFn, lo: f64, du: f64, k_max: usize, n_fft: usize, points: usize) -> Vec<f64> {
    let mut acc = vec![Complex64::new(0.0, 0.0); n_fft];
    let total = k_max + 1;
    let n_chunks = total.div_ceil(CHUNK);
    // Chunks are computed in parallel but folded in index order, so the
    // result does not depend on the thread count.
    for batch in (0..n_chunks).collect::<Vec<_>>().chunks(BATCH) {
        let parts: Vec<Vec<Complex64>> = batch
            .par_iter()
            .map(|&c| {
                let k0 = c * CHUNK;
                let k1 = (k0 + CHUNK).min(total);
                let mut vals = cf.lattice_1d(du, k0, k1);
                for (i, v) in vals.iter_mut().enumerate() {
                    let k = (k0 + i) as f64;
                    *v *= Complex64::from_polar(1.0, -k * du * lo);
                }
                vals
            })
            .collect();
        for (&c, vals) in batch.iter().zip(parts) {
            let k0 = c * CHUNK;
            for (i, v) in vals.into_iter().enumerate() {
                let k = k0 + i;
                if k == 0 {
                    acc[0] += v;
                } else {
                    acc[k % n_fft] += v;
                    acc[(n_fft - k % n_fft) % n_fft] += v.conj();
                }
            }
        }
    }
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut acc);
    let scale = du / (2.0 * PI);
    acc[..points].iter().map(|z| z.re * scale).collect()
}

fn invert_2d(cf: &CharFn, grid: &GridSpec, du: &[f64], k_max: usize, n_fft: usize) -> Vec<f64> {
    let n = n_fft;
    let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
    let km = k_max as i64;
    let wrap = |k: i64| k.rem_euclid(n as i64) as usize;
    let rows: Vec<i64> = (0..=km).collect();
    for batch in rows.chunks(64) {
        let parts: Vec<Vec<Complex64>> = batch
            .par_iter()
            .map(|&k1| {
                let start = if k1 == 0 { 0 } else { -km };
                (start..=km)
                    .map(|k2| {
                        let u = [k1 as f64 * du[0], k2 as f64 * du[1]];
                        let phase = -(u[0] * grid.lo[0] + u[1] * grid.lo[1]);
                        cf.eval(&u) * Complex64::from_polar(1.0, phase)
                    })
                    .collect()
            })
            .collect();
        for (&k1, vals) in batch.iter().zip(parts) {
            let start = if k1 == 0 { 0 } else { -km };
            for (i, v) in vals.into_iter().enumerate() {
                let k2 = start + i as i64;
                acc[wrap(k1) * n + wrap(k2)] += v;
                if k1 != 0 || k2 != 0 {
                    acc[wrap(-k1) * n + wrap(-k2)] += v.conj();
                }
            }
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    for row in acc.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..grid.points {
        for i in 0..n {
            col[i] = acc[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            acc[i * n + j] = col[i];
        }
    }
    let scale = du[0] * du[1] / (4.0 * PI * PI);
    let p = grid.points;
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            out.push(acc[i * n + j].re * scale);
        }
    }
    out
}
