// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MASS_TOLERANCE: f64 = 1e-4;

/// Uniform box grid: `points` nodes per axis at lo + j·(hi − lo)/points,
/// j = 0..points (the upper edge `hi` itself is not a node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: usize,
}

impl GridSpec {
    pub fn new_1d(lo: f64, hi: f64, points: usize) -> Self {
        GridSpec { lo: vec![lo], hi: vec![hi], points }
    }

    pub fn square(lo: f64, hi: f64, points: usize) -> Self {
        GridSpec { lo: vec![lo, lo], hi: vec![hi, hi], points }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim()) {
            return Err(Error::UnsupportedDimension { dim: self.dim() });
        }
        if self.hi.len() != self.lo.len() {
            return Err(Error::InvalidSpec("grid: lo/hi dimension mismatch".into()));
        }
        if self.points < 3 {
            return Err(Error::InvalidSpec("grid: need at least 3 points per axis".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidSpec("grid: need finite lo < hi".into()));
        }
        Ok(())
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn axis_node(&self, axis: usize, j: usize) -> f64 {
        self.lo[axis] + j as f64 * self.spacing(axis)
    }

    /// Coordinates of the node with row-major flat index `idx`.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        match self.dim() {
            1 => vec![self.axis_node(0, idx)],
            _ => vec![self.axis_node(0, idx / self.points), self.axis_node(1, idx % self.points)],
        }
    }

    /// Trapezoid weight of a flat index (cell volume times ½ per boundary axis).
    pub fn trapezoid_weight(&self, idx: usize) -> f64 {
        let edge = |j: usize| if j == 0 || j + 1 == self.points { 0.5 } else { 1.0 };
        let w = match self.dim() {
            1 => edge(idx),
            _ => edge(idx / self.points) * edge(idx % self.points),
        };
        w * self.cell_volume()
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.points == other.points
            && self.lo.len() == other.lo.len()
            && self.lo.iter().zip(&other.lo).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
            && self.hi.iter().zip(&other.hi).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }
}

/// Nonnegative density values on the nodes of a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    grid: GridSpec,
    values: Vec<f64>,
    mass_tolerance: f64,
}

impl GridDensity {
    /// Checks nonnegativity and that the trapezoid mass is within `eta` of 1.
    pub fn new(grid: GridSpec, values: Vec<f64>, eta: f64) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidSpec("grid density: values must be finite and >= 0".into()));
        }
        let g = GridDensity { grid, values, mass_tolerance: eta };
        let mass = g.mass();
        if (mass - 1.0).abs() > eta {
            return Err(Error::InversionMassViolation { mass, tolerance: eta });
        }
        Ok(g)
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: GridSpec, eta: f64, f: F) -> Result<Self> {
        grid.validate()?;
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        GridDensity::new(grid, values, eta)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn mass_tolerance(&self) -> f64 {
        self.mass_tolerance
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, v)| v * self.grid.trapezoid_weight(i)).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Value at a node; off-node points are interpolated (multi)linearly.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        let mut pos = Vec::with_capacity(g.dim());
        for a in 0..g.dim() {
            if x[a] < g.lo[a] || x[a] > g.axis_node(a, g.points - 1) {
                return Ok(0.0);
            }
            let t = (x[a] - g.lo[a]) / g.spacing(a);
            let j = (t.floor() as usize).min(g.points - 2);
            pos.push((j, t - j as f64));
        }
        Ok(match g.dim() {
            1 => {
                let (j, t) = pos[0];
                (1.0 - t) * self.values[j] + t * self.values[j + 1]
            }
            _ => {
                let (i, s) = pos[0];
                let (j, t) = pos[1];
                let n = g.points;
                let v = |a: usize, b: usize| self.values[a * n + b];
                (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j + 1))
                    + s * ((1.0 - t) * v(i + 1, j) + t * v(i + 1, j + 1))
            }
        })
    }

    /// Distribution function of the piecewise-linear interpolant, 1-D only.
    pub fn cdf_1d(&self, x: f64) -> f64 {
        let g = &self.grid;
        let h = g.spacing(0);
        let mut acc = 0.0;
        for j in 0..g.points - 1 {
            let (a, b) = (g.axis_node(0, j), g.axis_node(0, j + 1));
            if x >= b {
                acc += 0.5 * h * (self.values[j] + self.values[j + 1]);
            } else {
                if x > a {
                    let t = x - a;
                    let slope = (self.values[j + 1] - self.values[j]) / h;
                    acc += self.values[j] * t + 0.5 * slope * t * t;
                }
                break;
            }
        }
        acc / self.mass()
    }

    /// Characteristic function of the trapezoid-weighted atoms.
    pub fn cf(&self, u: &[f64]) -> Complex64 {
        let m = self.mass();
        (0..self.values.len())
            .map(|i| {
                let x = self.grid.node(i);
                let phase: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
                Complex64::from_polar(self.values[i] * self.grid.trapezoid_weight(i) / m, phase)
            })
            .sum()
    }

    pub fn mean_cov(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.dim();
        let m = self.mass();
        let mut mean = vec![0.0; d];
        let mut second = vec![vec![0.0; d]; d];
        for i in 0..self.values.len() {
            let x = self.grid.node(i);
            let w = self.values[i] * self.grid.trapezoid_weight(i) / m;
            for a in 0..d {
                mean[a] += w * x[a];
                for b in 0..d {
                    second[a][b] += w * x[a] * x[b];
                }
            }
        }
        let cov = (0..d).map(|a| (0..d).map(|b| second[a][b] - mean[a] * mean[b]).collect()).collect();
        (mean, cov)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match self.dim() {
            1 => s.push_str("x1,f\n"),
            _ => s.push_str("x1,x2,f\n"),
        }
        for (i, v) in self.values.iter().enumerate() {
            for x in self.grid.node(i) {
                let _ = write!(s, "{x:e},");
            }
            let _ = writeln!(s, "{v:e}");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }

    /// Parses the `x1[,x2],f` format. Nodes must form a uniform row-major grid.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidSpec(format!("grid csv: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let d = match cols.as_slice() {
            ["x1", "f"] => 1,
            ["x1", "x2", "f"] => 2,
            _ => return Err(bad(format!("unexpected header '{header}'"))),
        };
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in lines.enumerate() {
            let r: std::result::Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let r = r.map_err(|e| bad(format!("row {}: {e}", ln + 2)))?;
            if r.len() != d + 1 {
                return Err(bad(format!("row {}: expected {} columns", ln + 2, d + 1)));
            }
            rows.push(r);
        }
        let n = match d {
            1 => rows.len(),
            _ => (rows.len() as f64).sqrt().round() as usize,
        };
        if n < 3 || n.pow(d as u32) != rows.len() {
            return Err(bad(format!("{} rows do not form a square grid", rows.len())));
        }
        let last = rows.len() - 1;
        let lo = rows[0][..d].to_vec();
        let hi = (0..d).map(|a| lo[a] + (rows[last][a] - lo[a]) * n as f64 / (n - 1) as f64).collect();
        let grid = GridSpec { lo, hi, points: n };
        grid.validate()?;
        for (i, r) in rows.iter().enumerate() {
            let x = grid.node(i);
            for a in 0..d {
                if (r[a] - x[a]).abs() > 1e-9 * (1.0 + x[a].abs()) + 1e-6 * grid.spacing(a) {
                    return Err(bad(format!("row {}: node not on a uniform row-major grid", i + 2)));
                }
            }
        }
        GridDensity::new(grid, rows.iter().map(|r| r[d]).collect(), DEFAULT_MASS_TOLERANCE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_pdf;

    #[test]
    fn trapezoid_mass_of_gaussian() {
        let g = GridDensity::from_fn(GridSpec::new_1d(-8.0, 8.0, 800), 1e-4, |x| norm_pdf(x[0])).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-12);
        assert!((g.cdf_1d(0.0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn mass_violation_is_reported() {
        let e = GridDensity::from_fn(GridSpec::new_1d(-1.0, 1.0, 101), 1e-4, |x| norm_pdf(x[0])).unwrap_err();
        assert_eq!(e.code(), "inversion_mass_violation");
    }

    #[test]
    fn csv_round_trip_2d() {
        let grid = GridSpec::square(-7.0, 7.0, 57);
        let g = GridDensity::from_fn(grid, 1e-4, |x| norm_pdf(x[0]) * norm_pdf(x[1])).unwrap();
        let back = GridDensity::parse_csv(&g.to_csv()).unwrap();
        assert!(back.grid().same_as(g.grid()));
        for (a, b) in back.values().iter().zip(g.values()) {
            assert!((a - b).abs() <= 1e-15 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(GridDensity::parse_csv("x,y\n0,1\n").is_err());
    }
}
