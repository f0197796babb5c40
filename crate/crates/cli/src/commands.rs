// SPDX-License-Identifier: Apache-2.0

use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};
use tvcert::certify::{
    certify as certify_reg, cos_modulated_sequence, dominated_convergence_check, exp_regime_certificate,
    gaussian_variance_sequence, DominationOptions, Regularity, Variant,
};
use tvcert::clt::{rate_fit, tv_series, CltBase, CltGrid};
use tvcert::distkit::{
    density_on_grid, exp_regularity, fit_tail_envelope, moment_bound, CharFn, DistSpec, GridSpec, Law, TailEnvelope,
    DEFAULT_GAMMA_CAP,
};
use tvcert::dynsys::{empirical_tv_decay, Recursion, TvDecayOptions};
use tvcert::metrics::{dcf, fm_bracket, sup_density_dist, tv_grid, w1_1d, FreqGrid, GridTv, MetricBracket, Witnessed};

use crate::config::{self, positive, CertifyConfig, ConfigError, MetricsConfig};
use crate::output::{num, write_csv, write_json};
use crate::{render, Global};

/// Frequency window over which envelopes are fitted.
const ENVELOPE_WINDOW: (f64, f64) = (1.0, 1e3);

fn envelope(spec: &DistSpec) -> anyhow::Result<TailEnvelope> {
    Ok(fit_tail_envelope(&CharFn::Analytic(spec.clone()), ENVELOPE_WINDOW.0, ENVELOPE_WINDOW.1, DEFAULT_GAMMA_CAP)?)
}

fn global_echo(g: &Global) -> Value {
    json!({ "mode": g.mode, "variant": g.variant.to_string() })
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// Config file or inline JSON.
    #[arg(long)]
    pub config: String,
}

#[derive(Serialize)]
struct PairInputs {
    distance: f64,
    distance_source: &'static str,
    envelopes: Vec<TailEnvelope>,
    moments: Vec<f64>,
}

pub fn certify(g: &Global, a: &CertifyArgs) -> anyhow::Result<()> {
    let (mut cfg, base): (CertifyConfig, _) = config::load(&a.config, "--config")?;
    if cfg.pair.is_some() == cfg.regularity.is_some() {
        return Err(ConfigError::new("exactly one of pair and regularity must be given").into());
    }
    if let Some(v) = cfg.fm_upper {
        config::nonnegative("fm_upper", v)?;
    }
    positive("delta", cfg.delta)?;
    let echo = json!({ "config": &cfg, "cli": global_echo(g) });

    let (reg, inputs, pair) = match (&mut cfg.pair, &cfg.regularity) {
        (Some(pair), _) => {
            config::check_pair(pair, &base)?;
            let envs = [envelope(&pair[0])?, envelope(&pair[1])?];
            let moms = [moment_bound(&pair[0], cfg.delta)?, moment_bound(&pair[1], cfg.delta)?];
            let reg = Regularity::pooled([&envs[0], &envs[1]], [&moms[0], &moms[1]])?;
            let (distance, source) = match (cfg.fm_upper, g.variant) {
                (Some(v), _) => (v, "config"),
                (None, Variant::Cf) => {
                    let w = dcf(
                        &CharFn::Analytic(pair[0].clone()),
                        &CharFn::Analytic(pair[1].clone()),
                        &FreqGrid::default(),
                    )?;
                    (w.value, "dcf")
                }
                (None, _) if pair[0].dim() == 1 => {
                    (w1_1d(&Law::Analytic(pair[0].clone()), &Law::Analytic(pair[1].clone()))?, "w1")
                }
                (None, _) => return Err(ConfigError::new("fm_upper: required for laws in dimension > 1").into()),
            };
            let inputs = PairInputs {
                distance,
                distance_source: source,
                envelopes: envs.to_vec(),
                moments: moms.iter().map(|m| m.c_f).collect(),
            };
            (reg, Some(inputs), Some(pair.clone()))
        }
        (None, Some(r)) => {
            let reg = Regularity { d: r.d, gamma: r.gamma, c_phi: r.c_phi, delta: r.delta, c_f: r.c_f };
            for (name, v) in [("gamma", r.gamma), ("c_phi", r.c_phi), ("delta", r.delta), ("c_f", r.c_f)] {
                positive(&format!("regularity.{name}"), v)?;
            }
            if r.d == 0 {
                return Err(ConfigError::new("regularity.d = 0, must be >= 1").into());
            }
            reg.validate()?;
            (reg, None, None)
        }
        (None, None) => unreachable!("checked above"),
    };
    let distance = match (&inputs, cfg.fm_upper) {
        (Some(i), _) => i.distance,
        (None, Some(v)) => v,
        (None, None) => return Err(ConfigError::new("fm_upper: required with explicit regularity").into()),
    };

    if let Some(exp) = &cfg.exp {
        positive("exp.r", exp.r)?;
        let c_r = match (exp.c_r, &pair) {
            (Some(c), _) => positive("exp.c_r", c)?,
            (None, Some(p)) => exp_regularity(&p[0], exp.r)?.max(exp_regularity(&p[1], exp.r)?),
            (None, None) => return Err(ConfigError::new("exp.c_r: required with explicit regularity").into()),
        };
        let cert = exp_regime_certificate(distance, exp.r, c_r, reg.d)?;
        print!("{}", render::exp_certificate(&cert));
        if g.out.is_some() {
            write_json(g, "certify", &echo, &json!({ "inputs": inputs, "certificate": cert }))?;
        }
        return Ok(());
    }
    let cert = certify_reg(distance, &reg, g.variant, g.mode)?;
    print!("{}", render::tv_certificate(&cert));
    if g.out.is_some() {
        write_json(g, "certify", &echo, &json!({ "inputs": inputs, "certificate": cert }))?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Config file or inline JSON.
    #[arg(long)]
    pub config: String,
}

#[derive(Serialize)]
struct MetricsReport {
    grid: Option<GridSpec>,
    tv: Option<GridTv>,
    sup_density: Option<f64>,
    w1: Option<f64>,
    dcf: Witnessed,
    fm: MetricBracket,
}

fn default_grid(pair: &[DistSpec]) -> GridSpec {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in pair {
        let (a, b, _) = s.support_hint();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    match pair[0].dim() {
        1 => GridSpec::new_1d(lo, hi, 1 << 14),
        _ => GridSpec::square(lo, hi, 512),
    }
}

pub fn metrics(g: &Global, a: &MetricsArgs) -> anyhow::Result<()> {
    let (mut cfg, base): (MetricsConfig, _) = config::load(&a.config, "--config")?;
    config::check_pair(&mut cfg.pair, &base)?;
    if let Some(gr) = &cfg.grid {
        gr.validate().map_err(|e| ConfigError::new(format!("grid: {e}")))?;
    }
    if let Some(f) = &cfg.freq {
        positive("freq.u_max", f.u_max)?;
        if f.points < 2 {
            return Err(ConfigError::new(format!("freq.points = {}, must be >= 2", f.points)).into());
        }
    }
    let echo = json!({ "config": &cfg, "cli": global_echo(g) });
    let pair = &cfg.pair;
    let freq = cfg.freq.unwrap_or_default();
    let (la, lb) = (Law::Analytic(pair[0].clone()), Law::Analytic(pair[1].clone()));
    let with_density = pair.iter().all(|s| s.has_density());
    let grid = with_density.then(|| cfg.grid.clone().unwrap_or_else(|| default_grid(pair)));
    let (tv, sup_density) = match &grid {
        Some(gr) => {
            let fa = density_on_grid(&pair[0], gr, 1e-2)?;
            let fb = density_on_grid(&pair[1], gr, 1e-2)?;
            (Some(tv_grid(&fa, &fb)?), Some(sup_density_dist(&fa, &fb)?))
        }
        None => (None, None),
    };
    let w1 = if pair[0].dim() == 1 { Some(w1_1d(&la, &lb)?) } else { None };
    let report = MetricsReport {
        grid,
        tv,
        sup_density,
        w1,
        dcf: dcf(&la.cf(), &lb.cf(), &freq)?,
        fm: fm_bracket(&la, &lb, &freq)?,
    };
    write_json(g, "metrics", &echo, &report)
}

#[derive(Args, Debug)]
pub struct DynsysArgs {
    /// Recursion spec file or inline JSON.
    #[arg(long)]
    pub config: String,
    #[arg(long, default_value_t = 16)]
    pub horizon: usize,
    /// Reference time standing in for the limit law (default 4 × horizon).
    #[arg(long)]
    pub reference_horizon: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    /// Gaussian smoothing bandwidth (default: Silverman's rule).
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

pub fn dynsys(g: &Global, a: &DynsysArgs) -> anyhow::Result<()> {
    let spec = config::recursion(&a.config)?;
    if a.horizon == 0 {
        return Err(ConfigError::new("--horizon must be >= 1").into());
    }
    if a.paths < 2 {
        return Err(ConfigError::new("--paths must be >= 2").into());
    }
    if let Some(h) = a.bandwidth {
        positive("--bandwidth", h)?;
    }
    let echo = json!({
        "recursion": &spec,
        "horizon": a.horizon,
        "reference_horizon": a.reference_horizon,
        "paths": a.paths,
        "bandwidth": a.bandwidth,
        "cli": global_echo(g),
    });
    let rec = Recursion::new(spec)?;
    let mut opts = TvDecayOptions::new(a.horizon, a.paths, g.seed);
    opts.reference_horizon = a.reference_horizon;
    opts.bandwidth = a.bandwidth;
    opts.mode = g.mode;
    let decay = empirical_tv_decay(&rec, &opts)?;
    let rows: Vec<Vec<String>> = decay
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), num(r.tv_emp), num(r.tv_emp_err), num(r.w1_bound), num(r.tv_certified)])
        .collect();
    let mut echo = echo;
    echo["bandwidth_used"] = json!(decay.bandwidth);
    write_csv(g, &echo, &["n", "tv_emp", "tv_emp_err", "w1_bound", "tv_certified"], &rows)
}

#[derive(Args, Debug)]
pub struct CltArgs {
    /// laplace | gaussian | laplace_mixture | uniform, inline JSON or a file.
    #[arg(long)]
    pub base: String,
    #[arg(long, default_value = "4,8,16,32,64,128,256,512,1024")]
    pub n_list: String,
    /// Grid points per axis.
    #[arg(long, default_value_t = 4096)]
    pub grid_pts: usize,
    /// Half-width of the grid box.
    #[arg(long = "box", default_value_t = 8.0)]
    pub half_width: f64,
}

pub fn clt(g: &Global, a: &CltArgs) -> anyhow::Result<()> {
    let spec = config::base_law(&a.base)?;
    let ns = config::n_list(&a.n_list, "--n-list")?;
    positive("--box", a.half_width)?;
    if a.grid_pts < 16 {
        return Err(ConfigError::new(format!("--grid-pts = {}, must be >= 16", a.grid_pts)).into());
    }
    let base = CltBase::new(&spec)?;
    let echo = json!({
        "base": &base.base,
        "n_list": &ns,
        "grid_pts": a.grid_pts,
        "box": a.half_width,
        "cli": global_echo(g),
    });
    let grid = CltGrid { half_width: a.half_width, points: a.grid_pts, ..Default::default() };
    let pts = tv_series(&base, &ns, &grid)?;
    let mut rows = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let so_far: Vec<(f64, f64)> = pts[..=i].iter().map(|q| (q.n as f64, q.tv)).collect();
        let slope =
            if so_far.len() >= 4 { rate_fit(&so_far).map(|f| num(f.slope)).unwrap_or_default() } else { String::new() };
        rows.push(vec![p.n.to_string(), num(p.tv), num(p.tv_trunc_err), num(p.supdist), slope]);
    }
    write_csv(g, &echo, &["n", "tv", "tv_trunc_err", "supdist", "slope_so_far"], &rows)
}

#[derive(Args, Debug)]
pub struct DominatedArgs {
    /// gaussian_variance (N(0, 1 + 1/n)) or cos_modulated (cos(nu)·e^{−u²/2}).
    #[arg(long, default_value = "gaussian_variance")]
    pub sequence: String,
    #[arg(long, default_value = "1,10,100,1000")]
    pub n_list: String,
    /// ψ(u) = exp(−rate·|u|²).
    #[arg(long, default_value_t = 0.25)]
    pub psi_rate: f64,
    /// Audit and inversion cutoff.
    #[arg(long, default_value_t = 40.0)]
    pub u_max: f64,
}

pub fn check_dominated(g: &Global, a: &DominatedArgs) -> anyhow::Result<()> {
    let ns = config::n_list(&a.n_list, "--n-list")?;
    positive("--psi-rate", a.psi_rate)?;
    positive("--u-max", a.u_max)?;
    let seq = match a.sequence.as_str() {
        "gaussian_variance" => gaussian_variance_sequence(&ns),
        "cos_modulated" => cos_modulated_sequence(&ns),
        other => {
            return Err(ConfigError::new(format!(
                "--sequence: unknown sequence {other:?} (expected gaussian_variance or cos_modulated)"
            ))
            .into())
        }
    };
    let echo = json!({
        "sequence": &a.sequence,
        "n_list": &ns,
        "psi_rate": a.psi_rate,
        "u_max": a.u_max,
        "cli": global_echo(g),
    });
    let rate = a.psi_rate;
    let psi = move |u: &[f64]| (-rate * u.iter().map(|v| v * v).sum::<f64>()).exp();
    let mut opts = DominationOptions::default();
    opts.audit.u_max = a.u_max;
    if a.sequence == "cos_modulated" {
        let far = ns.iter().max().copied().unwrap_or(1) as f64 + 12.0;
        opts.grid = GridSpec::new_1d(-far, far, 4096.max((2.0 * far * 64.0) as usize));
    }
    let limit = CharFn::Analytic(DistSpec::standard_gaussian(1));
    let report = dominated_convergence_check(&seq, &psi, &limit, &opts)?;
    write_json(g, "check-dominated", &echo, &report)
}
