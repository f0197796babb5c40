// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{sphere_area, upper_incomplete_gamma};

/// Certificate for laws with E e^{r|X|} ≤ C_r and ∫|φ|e^{r|u|} ≤ C_r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpCertificate {
    pub r: f64,
    pub c_r: f64,
    pub d: usize,
    pub a_d: f64,
    /// A, the Fortet–Mourier bound.
    pub input_fm: f64,
    /// "small" (A ≤ e^{−r}) or "large".
    pub regime: String,
    /// Radius 2|ln A|/r of the frequency split.
    pub m_sup: f64,
    /// 8·2^d·M^{d+1}·A.
    pub sup_low_freq: f64,
    /// 2√C_r·√(a_d Γ(d, rM)/r^d).
    pub sup_high_freq: f64,
    pub supdensity_bound: f64,
    /// Radius |ln A|/r of the space split.
    pub m_tv: f64,
    /// 2^d M^d × sup bound.
    pub tv_inner: f64,
    /// 2C_r e^{−rM}.
    pub tv_outer: f64,
    pub tv_raw: f64,
    pub tv_bound: f64,
    pub cap_enforced: bool,
    pub version: String,
}

/// Every inequality of the exponential-regime argument evaluated exactly
/// (upper incomplete gamma in place of a power bound).
pub fn exp_regime_certificate(fm_upper: f64, r: f64, c_r: f64, d: usize) -> Result<ExpCertificate> {
    for (name, v) in [("r", r), ("C_r", c_r)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidRegularity(format!("{name} = {v}, must be > 0")));
        }
    }
    if !(fm_upper >= 0.0) {
        return Err(Error::InvalidRegularity(format!("input distance = {fm_upper}, must be >= 0")));
    }
    let a = fm_upper;
    let a_d = sphere_area(d);
    let df = d as f64;
    let mut c = ExpCertificate {
        r,
        c_r,
        d,
        a_d,
        input_fm: a,
        regime: "small".into(),
        m_sup: 0.0,
        sup_low_freq: 0.0,
        sup_high_freq: 0.0,
        supdensity_bound: 0.0,
        m_tv: 0.0,
        tv_inner: 0.0,
        tv_outer: 0.0,
        tv_raw: 0.0,
        tv_bound: 0.0,
        cap_enforced: false,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    if a == 0.0 {
        return Ok(c);
    }
    if a > (-r).exp() {
        c.regime = "large".into();
        c.tv_raw = 2.0 * a * r.exp();
        c.tv_bound = c.tv_raw.min(2.0);
        c.cap_enforced = c.tv_raw > 2.0;
        // Each density is bounded by ∫|φ_i| ≤ C_r.
        c.supdensity_bound = 2.0 * c_r;
        return Ok(c);
    }
    let l = a.ln().abs();
    c.m_sup = 2.0 * l / r;
    c.sup_low_freq = 8.0 * 2f64.powi(d as i32) * c.m_sup.powf(df + 1.0) * a;
    c.sup_high_freq = 2.0 * c_r.sqrt() * (a_d * upper_incomplete_gamma(df, r * c.m_sup) / r.powf(df)).sqrt();
    c.supdensity_bound = c.sup_low_freq + c.sup_high_freq;
    c.m_tv = l / r;
    c.tv_inner = 2f64.powi(d as i32) * c.m_tv.powf(df) * c.supdensity_bound;
    c.tv_outer = 2.0 * c_r * (-r * c.m_tv).exp();
    c.tv_raw = c.tv_inner + c.tv_outer;
    c.tv_bound = c.tv_raw.min(2.0);
    c.cap_enforced = c.tv_raw > 2.0;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    #[test]
    fn zero_input() {
        let c = exp_regime_certificate(0.0, 1.0, 5.0, 1).unwrap();
        assert_eq!((c.tv_bound, c.supdensity_bound), (0.0, 0.0));
    }

    #[test]
    fn tail_term_matches_quadrature() {
        // ∫_{|u|>M} e^{−r|u|} du in d = 1 is 2e^{−rM}/r.
        let (r, m) = (1.3f64, 4.0);
        let c = exp_regime_certificate((-r * m / 2.0).exp(), r, 1.0, 1).unwrap();
        let direct = 2.0 * integrate(|u| (-r * u).exp(), m, m + 80.0, &[], 1e-14).value;
        assert!((c.sup_high_freq - 2.0 * direct.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn shape_is_a_log_power() {
        let ratio = |a: f64| exp_regime_certificate(a, 1.0, 7.0, 1).unwrap().tv_raw / (a * a.ln().abs().powi(3));
        let v: Vec<f64> = [1e-6, 1e-8, 1e-10, 1e-12].iter().map(|&a| ratio(a)).collect();
        assert!(v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{v:?}");
        assert!(v.iter().all(|x| x.is_finite() && *x < 1e3));
    }

    #[test]
    fn large_regime() {
        let c = exp_regime_certificate(0.5, 1.0, 3.0, 1).unwrap();
        assert_eq!(c.regime, "large");
        assert_eq!(c.tv_bound, 2.0);
        assert!(c.cap_enforced);
        assert_eq!(exp_regime_certificate(0.2, 1.0, 3.0, 1).unwrap().regime, "small");
    }
}
