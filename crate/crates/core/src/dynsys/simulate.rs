// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde::Serialize;

use super::{norm, Recursion};
use crate::distkit::Samples;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Coupling runs use stream ids above this offset so they never share
/// randomness with forward simulations under the same seed.
const COUPLING_STREAMS: u64 = 1 << 48;

/// States X_0..X_N of P independent paths, stored time-major.
#[derive(Debug, Clone)]
pub struct Trajectories {
    dim: usize,
    paths: usize,
    horizon: usize,
    data: Vec<f64>,
}

impl Trajectories {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The P states at time n, path-major.
    pub fn slice(&self, n: usize) -> &[f64] {
        let w = self.paths * self.dim;
        &self.data[n * w..(n + 1) * w]
    }

    pub fn at(&self, n: usize) -> Samples {
        Samples::new(self.dim, self.slice(n).to_vec()).expect("paths >= 1")
    }
}

fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// ξ_t = Σ_{i≤J} b_i ε_{t−i}, with ε_s stored at `eps[pos(s)]`.
fn noise(rec: &Recursion, eps: &[f64], t: i64, pos: impl Fn(i64) -> usize, out: &mut [f64]) {
    let d = out.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, b) in rec.coeffs.iter().enumerate() {
        let at = pos(t - i as i64) * d;
        for (o, e) in out.iter_mut().zip(&eps[at..at + d]) {
            *o += b * e;
        }
    }
}

/// Per path: X_0, then ε_1..ε_N, then the prehistory ε_0, ε_{−1}, …,
/// ε_{1−J}. Extending J therefore leaves the earlier draws unchanged.
pub fn simulate_recursion(rec: &Recursion, horizon: usize, paths: usize, seed: u64) -> Result<Trajectories> {
    if horizon == 0 || paths == 0 {
        return Err(Error::InvalidSpec(format!("horizon = {horizon}, paths = {paths}: both must be >= 1")));
    }
    let d = rec.dim();
    let j = rec.truncation();
    let per_path: Vec<Result<Vec<f64>>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, p as u64);
            let mut states = vec![0.0; (horizon + 1) * d];
            rec.init.draw(&mut rng, &mut states[..d]);
            // ε_t lives at index t + J − 1.
            let pos = |t: i64| (t + j as i64 - 1) as usize;
            let mut eps = vec![0.0; (horizon + j) * d];
            for t in 1..=horizon as i64 {
                let at = pos(t) * d;
                rec.innovation.draw(&mut rng, &mut eps[at..at + d]);
            }
            for t in (1 - j as i64..=0).rev() {
                let at = pos(t) * d;
                rec.innovation.draw(&mut rng, &mut eps[at..at + d]);
            }
            let mut xi = vec![0.0; d];
            for n in 1..=horizon {
                noise(rec, &eps, n as i64, pos, &mut xi);
                let (prev, next) = states.split_at_mut(n * d);
                let next = &mut next[..d];
                rec.apply_nu(&prev[(n - 1) * d..], next);
                for (x, e) in next.iter_mut().zip(&xi) {
                    *x += e;
                }
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::DivergenceDetected { path: p, step: n as i64 });
                }
            }
            Ok(states)
        })
        .collect();
    let per_path = first_error(per_path)?;
    let mut data = vec![0.0; (horizon + 1) * paths * d];
    for (p, states) in per_path.iter().enumerate() {
        for n in 0..=horizon {
            let at = (n * paths + p) * d;
            data[at..at + d].copy_from_slice(&states[n * d..(n + 1) * d]);
        }
    }
    Ok(Trajectories { dim: d, paths, horizon, data })
}

/// Mean of |X̄_k(n) − X̄_k(m)| over paths at time k, with its Monte-Carlo
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapStat {
    pub k: i64,
    pub mean: f64,
    pub mc_sigma: f64,
}

#[derive(Debug, Clone)]
pub struct Coupling {
    pub n: usize,
    pub m: usize,
    /// k = −n, …, 0.
    pub gaps: Vec<GapStat>,
    /// X̄_0(n) for every path.
    pub near: Samples,
    /// X̄_0(m) for every path.
    pub far: Samples,
}

impl Coupling {
    /// The final gap E|X̄_0(n) − X̄_0(m)|.
    pub fn mean_gap(&self) -> GapStat {
        *self.gaps.last().expect("gaps cover k = -n..0")
    }
}

fn mean_se(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-path gaps, near end point and far end point.
type PathGaps = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Starts copies of the recursion at X_0 at times −n and −m and runs both
/// to time 0 on the same noise. Per path: X_0, then ε_0, ε_{−1}, … going
/// back in time.
pub fn backward_coupling(rec: &Recursion, n: usize, m: usize, paths: usize, seed: u64) -> Result<Coupling> {
    if n == 0 || m < n || paths == 0 {
        return Err(Error::InvalidSpec(format!(
            "need 1 <= n <= m and paths >= 1, got n = {n}, m = {m}, paths = {paths}"
        )));
    }
    let d = rec.dim();
    let j = rec.truncation();
    let per_path: Vec<Result<PathGaps>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, COUPLING_STREAMS + p as u64);
            let mut x0 = vec![0.0; d];
            rec.init.draw(&mut rng, &mut x0);
            // ε_t (t ≤ 0) lives at index −t.
            let pos = |t: i64| (-t) as usize;
            let mut eps = vec![0.0; (m + j) * d];
            for chunk in eps.chunks_mut(d) {
                rec.innovation.draw(&mut rng, chunk);
            }
            let (mut far, mut near) = (x0.clone(), x0.clone());
            let (mut xi, mut tmp) = (vec![0.0; d], vec![0.0; d]);
            let step = |x: &mut Vec<f64>, xi: &[f64], tmp: &mut Vec<f64>| {
                rec.apply_nu(x, tmp);
                for ((o, t), e) in x.iter_mut().zip(tmp.iter()).zip(xi) {
                    *o = t + e;
                }
            };
            let mut gaps = Vec::with_capacity(n + 1);
            for k in (1 - m as i64)..=0 {
                noise(rec, &eps, k, pos, &mut xi);
                step(&mut far, &xi, &mut tmp);
                if k > -(n as i64) {
                    step(&mut near, &xi, &mut tmp);
                }
                if far.iter().chain(&near).any(|v| !v.is_finite()) {
                    return Err(Error::DivergenceDetected { path: p, step: k });
                }
                if k >= -(n as i64) {
                    gaps.push(norm(&near.iter().zip(&far).map(|(a, b)| a - b).collect::<Vec<_>>()));
                }
            }
            if m == n {
                gaps.insert(0, 0.0);
            }
            Ok((gaps, near, far))
        })
        .collect();
    let per_path = first_error(per_path)?;
    let gaps = (0..=n)
        .map(|i| {
            let (mean, mc_sigma) = mean_se(per_path.iter().map(move |g| g.0[i]));
            GapStat { k: i as i64 - n as i64, mean, mc_sigma }
        })
        .collect();
    let near = per_path.iter().flat_map(|g| g.1.iter().copied()).collect();
    let far = per_path.iter().flat_map(|g| g.2.iter().copied()).collect();
    Ok(Coupling { n, m, gaps, near: Samples::new(d, near)?, far: Samples::new(d, far)? })
}

#[cfg(test)]
mod tests {
    use super::super::tests::example;
    use super::super::{CoeffSpec, NuSpec};
    use super::*;
    use crate::distkit::{empirical_cf, DistSpec};

    #[test]
    fn collapses_to_innovations() {
        let mut s = example(0.0, DistSpec::laplace(1.0));
        s.nu = NuSpec::Affine { a: vec![vec![0.0]], b: vec![0.0] };
        s.coeffs = CoeffSpec::Explicit { values: vec![1.0], tol: 1e-8 };
        let rec = Recursion::new(s).unwrap();
        let p = 20_000;
        let tr = simulate_recursion(&rec, 3, p, 1).unwrap();
        for n in 1..=3 {
            for u in [0.3, 1.0, 2.5] {
                let emp = empirical_cf(tr.slice(n), 1, &[u]).unwrap();
                let exact = DistSpec::laplace(1.0).cf(&[u]);
                assert!((emp - exact).norm() < 5.0 / (p as f64).sqrt());
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let rec = Recursion::new(example(1.0, DistSpec::laplace(1.0))).unwrap();
        let a = simulate_recursion(&rec, 10, 64, 5).unwrap();
        let b = simulate_recursion(&rec, 10, 64, 5).unwrap();
        let c = simulate_recursion(&rec, 10, 64, 6).unwrap();
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
        // A longer horizon keeps the shared prefix of each path.
        let long = simulate_recursion(&rec, 12, 64, 5).unwrap();
        assert_ne!(long.slice(10), a.slice(10));
        assert_eq!(long.slice(0), a.slice(0));
    }

    #[test]
    fn variance_matches_second_moment_recursion() {
        // Oracle: with ξ_n = Σ b_j ε_{n−j}, track the joint second moments
        // of (X_n, ε_n, ε_{n−1}, …) exactly. Here X_n = Σ_{i<n} 0.5^i ξ_{n−i},
        // so Var X_n = Σ_{i,i'<n} 0.5^{i+i'} Cov(ξ_{n−i}, ξ_{n−i'}) and
        // Cov(ξ_s, ξ_t) = Σ_j b_j b_{j+|s−t|}.
        let rec = Recursion::new(example(0.0, DistSpec::standard_gaussian(1))).unwrap();
        let b = rec.coeffs().to_vec();
        let acov = |h: usize| (0..b.len().saturating_sub(h)).map(|j| b[j] * b[j + h]).sum::<f64>();
        let n: usize = 50;
        let mut var = 0.0;
        for i in 0..n {
            for k in 0..n {
                var += 0.5f64.powi((i + k) as i32) * acov(i.abs_diff(k));
            }
        }
        let p = 40_000;
        let mut ests = Vec::new();
        for seed in [1, 2] {
            let tr = simulate_recursion(&rec, n, p, seed).unwrap();
            let x = tr.slice(n);
            let m = x.iter().sum::<f64>() / p as f64;
            let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (p - 1) as f64;
            // Var of the sample variance of a Gaussian ≈ 2σ⁴/P.
            let sigma = (2.0 / p as f64).sqrt() * var;
            assert!((v - var).abs() < 3.0 * sigma, "seed {seed}: {v} vs {var}");
            ests.push(v);
        }
        assert!((ests[0] - ests[1]).abs() < 3.0 * 2f64.sqrt() * (2.0 / p as f64).sqrt() * var);
    }

    #[test]
    fn noise_is_stationary() {
        let mut s = example(0.0, DistSpec::laplace(1.0));
        s.nu = NuSpec::Affine { a: vec![vec![0.0]], b: vec![0.0] };
        let rec = Recursion::new(s).unwrap();
        let p = 20_000;
        let tr = simulate_recursion(&rec, 6, p, 9).unwrap();
        // Var ξ = Var ε · Σ 4^{−j} = 2·4/3.
        let var = 8.0 / 3.0;
        for n in 1..=6 {
            let x = tr.slice(n);
            let m = x.iter().sum::<f64>() / p as f64;
            assert!(m.abs() < 3.0 * (var / p as f64).sqrt());
        }
    }

    #[test]
    fn equal_start_times_have_no_gap() {
        let rec = Recursion::new(example(3.0, DistSpec::laplace(1.0))).unwrap();
        let c = backward_coupling(&rec, 4, 4, 100, 1).unwrap();
        assert!(c.gaps.iter().all(|g| g.mean == 0.0));
    }

    #[test]
    fn coupling_contracts_each_step() {
        let rec = Recursion::new(example(3.0, DistSpec::laplace(1.0))).unwrap();
        let c = backward_coupling(&rec, 8, 20, 5000, 2).unwrap();
        assert_eq!(c.gaps.len(), 9);
        for w in c.gaps.windows(2) {
            assert!(w[1].mean <= 0.5 * w[0].mean + 3.0 * w[1].mc_sigma.max(w[0].mc_sigma) + 1e-15);
        }
    }

    #[test]
    fn longer_prehistory_moves_paths_by_at_most_the_tail_bound() {
        let rec = Recursion::new(example(0.0, DistSpec::laplace(1.0))).unwrap();
        let j = rec.truncation();
        let wide = rec.truncated_at(2 * j).unwrap();
        let a = simulate_recursion(&rec, 20, 2000, 3).unwrap();
        let b = simulate_recursion(&wide, 20, 2000, 3).unwrap();
        let bound = rec.truncation_w1_bound().unwrap();
        for n in 1..=20 {
            let diff = a.slice(n).iter().zip(b.slice(n)).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2000.0;
            assert!(diff <= bound, "n {n}: {diff} > {bound}");
        }
    }

    #[test]
    fn overflow_is_reported_with_path() {
        let mut s = example(1e308, DistSpec::standard_gaussian(1));
        s.nu = NuSpec::Affine { a: vec![vec![0.5]], b: vec![1e308] };
        let rec = Recursion::new(s).unwrap();
        let e = simulate_recursion(&rec, 3, 4, 1).unwrap_err();
        assert!(matches!(e, Error::DivergenceDetected { path: 0, .. }));
    }
}
