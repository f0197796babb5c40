// SPDX-License-Identifier: Apache-2.0

use super::{certify, Mode, Regularity, TvCertificate, Variant};
use crate::error::{Error, Result};

pub const ORDER_CAP: u32 = 10_000;

/// ε as num/den, read from its shortest round-trip decimal so that 0.1
/// means exactly 1/10.
fn decimal(eps: f64) -> Option<(u128, u128)> {
    let text = format!("{eps:e}");
    let (mant, exp) = text.split_once('e')?;
    let exp: i32 = exp.parse().ok()?;
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let frac_len = mant.split_once('.').map_or(0, |(_, f)| f.len()) as i32;
    let scale = frac_len - exp;
    if !(0..=28).contains(&scale) {
        return None;
    }
    Some((digits.parse().ok()?, 10u128.pow(scale as u32)))
}

/// kl/((d+1+l)(d+k)) > 1 − ε, decided in integer arithmetic.
fn feasible(k: u32, l: u32, d: u32, num: u128, den: u128) -> bool {
    let (k, l, d) = (k as u128, l as u128, d as u128);
    let lhs = k * l * den;
    let rhs = (d + 1 + l) * (d + k) * (den - num);
    lhs > rhs
}

/// Smallest k + l (ties: smaller l, then smaller k), 1 ≤ k, l ≤ 10⁴, with
/// kl/((d+1+l)(d+k)) > 1 − ε.
pub fn choose_orders(eps: f64, d: usize) -> Result<(u32, u32)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidSpec(format!("epsilon = {eps}, must lie in (0, 1)")));
    }
    let d = u32::try_from(d).map_err(|_| Error::UnsupportedDimension { dim: d })?;
    // The ratio is increasing in k and l, so (cap, cap) decides feasibility.
    if d > 1000 {
        return Err(Error::UnsupportedDimension { dim: d as usize });
    }
    let Some((num, den)) = decimal(eps) else {
        return Err(Error::OrderCapExceeded { cap: ORDER_CAP });
    };
    if !feasible(ORDER_CAP, ORDER_CAP, d, num, den) {
        return Err(Error::OrderCapExceeded { cap: ORDER_CAP });
    }
    for s in 2..=2 * ORDER_CAP {
        let l_lo = s.saturating_sub(ORDER_CAP).max(1);
        let l_hi = (s - 1).min(ORDER_CAP);
        for l in l_lo..=l_hi {
            if feasible(s - l, l, d, num, den) {
                return Ok((s - l, l));
            }
        }
    }
    Err(Error::OrderCapExceeded { cap: ORDER_CAP })
}

/// Certificate with exponent arbitrarily close to 1: picks (k, l) for ε
/// and applies the main certificate with δ = k, γ = l. `c_phi_at(l)` must
/// give an envelope constant valid for γ = l and `c_f_at(k)` a bound on
/// E|X|^k, for both laws.
pub fn orders_certificate(
    eps: f64,
    d: usize,
    input: f64,
    c_phi_at: impl Fn(u32) -> f64,
    c_f_at: impl Fn(u32) -> f64,
    mode: Mode,
) -> Result<(u32, u32, TvCertificate)> {
    let (k, l) = choose_orders(eps, d)?;
    let reg = Regularity { d, gamma: l as f64, c_phi: c_phi_at(l), delta: k as f64, c_f: c_f_at(k) };
    Ok((k, l, certify(input, &reg, Variant::Fm, mode)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio_exceeds(k: u64, l: u64, d: u64, p: u64, q: u64) -> bool {
        // kl/((d+1+l)(d+k)) > 1 − p/q  ⟺  q·kl > (q − p)(d+1+l)(d+k)
        q * k * l > (q - p) * (d + 1 + l) * (d + k)
    }

    #[test]
    fn examples() {
        assert!(ratio_exceeds(28, 28, 1, 1, 10));
        assert_eq!(choose_orders(0.99, 1).unwrap(), (1, 1));
    }

    #[test]
    fn matches_brute_force_oracle() {
        // Independent oracle: enumerate all pairs up to a smaller cap and
        // pick the lexicographic minimum of (k + l, l, k).
        for (eps, p, q) in [(0.5, 1u64, 2u64), (0.25, 1, 4), (0.125, 1, 8), (0.0625, 1, 16)] {
            for d in 1..=3u64 {
                let mut best: Option<(u64, u64, u64)> = None;
                for k in 1..=600u64 {
                    for l in 1..=600u64 {
                        if ratio_exceeds(k, l, d, p, q) {
                            let key = (k + l, l, k);
                            if best.is_none_or(|b| key < b) {
                                best = Some(key);
                            }
                        }
                    }
                }
                let (_, l, k) = best.unwrap();
                assert_eq!(choose_orders(eps, d as usize).unwrap(), (k as u32, l as u32), "eps {eps} d {d}");
            }
        }
    }

    #[test]
    fn returned_pair_is_feasible_for_decimal_eps() {
        // ε = 1/q exactly; the pair must be feasible and its predecessors
        // (same l, k − 1) must not be.
        for q in [10u64, 20, 100, 300, 1000] {
            let (k, l) = choose_orders(1.0 / q as f64, 1).unwrap();
            assert!(ratio_exceeds(k as u64, l as u64, 1, 1, q), "q {q}");
            assert!(!ratio_exceeds(k as u64 - 1, l as u64, 1, 1, q), "q {q}");
        }
        // kl/((l+2)(k+1)) = 0.9 exactly at (24, 30); strict inequality rejects it.
        assert_ne!(choose_orders(0.1, 1).unwrap(), (24, 30));
        assert_eq!(choose_orders(0.1, 1).unwrap(), (23, 31));
    }

    #[test]
    fn tiny_eps_exceeds_cap() {
        assert_eq!(choose_orders(1e-6, 1).unwrap_err().code(), "order_cap_exceeded");
        assert!(choose_orders(0.0, 1).is_err());
    }

    #[test]
    fn orders_certificate_uses_chosen_orders() {
        let (k, l, c) = orders_certificate(0.25, 1, 1e-6, |_| 10.0, |_| 10.0, Mode::PaperFaithful).unwrap();
        assert_eq!((c.delta, c.gamma), (k as f64, l as f64));
        assert!(c.ledger.g > 0.75);
    }
}
