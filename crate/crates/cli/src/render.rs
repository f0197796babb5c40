// SPDX-License-Identifier: Apache-2.0

use tvcert::certify::{ExpCertificate, Mode, TvCertificate};

use crate::output::num;

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn mode_name(m: Mode) -> String {
    serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Constants in the order they are built: a_d, C_γ, G̃, G′, G, then the bound.
pub fn tv_certificate(c: &TvCertificate) -> String {
    let l = &c.ledger;
    let mut s = format!("TV certificate (variant {}, mode {}, tvcert {})\n", c.variant, mode_name(c.mode), c.version);
    s += &format!(
        "  inputs: d = {}, gamma = {}, c_phi = {}, delta = {}, c_f = {}\n",
        c.d,
        num(c.gamma),
        num(c.c_phi),
        num(c.delta),
        num(c.c_f)
    );
    s += &format!("  a_d     = {}\n", num(l.a_d));
    s += &format!("  C_gamma = {}\n", num(l.c_gamma));
    s += &format!("  G~      = {}\n", num(l.g_tilde));
    s += &format!("  G'      = {}\n", num(l.g_prime));
    s += &format!("  G       = {}\n", num(l.g_const));
    s += &format!("  exponents: g = {}, g_bar = {}\n", num(l.g), num(l.g_bar));
    s += &format!("  input distance = {}, A = {}\n", num(c.input_fm), num(c.a));
    s += &format!("  sup-density bound = {}\n", num(c.supdensity_bound));
    s +=
        &format!("  TV bound = {} (raw {}) ≤ 2 enforced: {}\n", num(c.tv_bound), num(c.tv_raw), yes_no(c.cap_enforced));
    s
}

pub fn exp_certificate(c: &ExpCertificate) -> String {
    let mut s = format!("exponential-regime certificate (tvcert {})\n", c.version);
    s += &format!("  inputs: d = {}, r = {}, C_r = {}, A = {}\n", c.d, num(c.r), num(c.c_r), num(c.input_fm));
    s += &format!("  a_d     = {}\n", num(c.a_d));
    s += &format!("  regime  = {}\n", c.regime);
    s += &format!(
        "  M_sup = {}: low-frequency part = {}, high-frequency part = {}\n",
        num(c.m_sup),
        num(c.sup_low_freq),
        num(c.sup_high_freq)
    );
    s += &format!("  sup-density bound = {}\n", num(c.supdensity_bound));
    s += &format!("  M_tv = {}: inner = {}, outer = {}\n", num(c.m_tv), num(c.tv_inner), num(c.tv_outer));
    s +=
        &format!("  TV bound = {} (raw {}) ≤ 2 enforced: {}\n", num(c.tv_bound), num(c.tv_raw), yes_no(c.cap_enforced));
    s
}
