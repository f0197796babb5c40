// SPDX-License-Identifier: Apache-2.0

//! Thin wrappers over `statrs` special functions, in the forms the bound
//! chains use.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::{erf, gamma};

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn gamma_fn(x: f64) -> f64 {
    gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Non-regularized upper incomplete gamma Γ(a, x) = ∫ₓ^∞ t^{a−1} e^{−t} dt.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return gamma_fn(a);
    }
    gamma::gamma_ur(a, x) * gamma_fn(a)
}

/// Beta function B(a, b).
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Surface area of the unit sphere in ℝ^d: 2π^{d/2}/Γ(d/2).
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma_fn(h)
}

/// Volume of the unit ball in ℝ^d: π^{d/2}/Γ(d/2+1).
pub fn ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) / gamma_fn(h + 1.0)
}

/// E|Z|^p for a standard normal Z in ℝ^d (chi distribution moment).
pub fn chi_abs_moment(d: usize, p: f64) -> f64 {
    let h = d as f64 / 2.0;
    (p / 2.0 * 2f64.ln() + ln_gamma(h + p / 2.0) - ln_gamma(h)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_and_ball() {
        assert_relative_eq!(sphere_area(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(ball_volume(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(ball_volume(2), PI, epsilon = 1e-13);
    }

    #[test]
    fn upper_gamma_integer_orders() {
        // Γ(n, x) = (n−1)! e^{−x} Σ_{k<n} x^k/k! for integer n
        for x in [0.1f64, 1.0, 5.0, 30.0] {
            let g1 = (-x).exp();
            let g2 = (1.0 + x) * (-x).exp();
            let g3 = 2.0 * (1.0 + x + x * x / 2.0) * (-x).exp();
            assert_relative_eq!(upper_incomplete_gamma(1.0, x), g1, max_relative = 1e-10);
            assert_relative_eq!(upper_incomplete_gamma(2.0, x), g2, max_relative = 1e-10);
            assert_relative_eq!(upper_incomplete_gamma(3.0, x), g3, max_relative = 1e-10);
        }
    }

    #[test]
    fn normal_moments() {
        assert_relative_eq!(chi_abs_moment(1, 2.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(chi_abs_moment(1, 1.0), (2.0 / PI).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(chi_abs_moment(1, 4.0), 3.0, epsilon = 1e-11);
        assert_relative_eq!(chi_abs_moment(2, 2.0), 2.0, epsilon = 1e-12);
        assert_relative_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-15);
    }
}
