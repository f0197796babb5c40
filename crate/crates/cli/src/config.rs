// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tvcert::distkit::{DistSpec, GridSpec};
use tvcert::dynsys::RecursionSpec;
use tvcert::metrics::FreqGrid;

/// Schema or usage problem: exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Exit code and tag for an error: 2 for configuration problems, 1 for
/// numeric failures (tagged with the library error code).
pub fn exit_code(e: &anyhow::Error) -> (u8, &'static str) {
    if e.downcast_ref::<ConfigError>().is_some() {
        return (2, "config");
    }
    if let Some(t) = e.downcast_ref::<tvcert::Error>() {
        let code = t.code();
        return match code {
            "invalid_spec" | "invalid_regularity" | "unsupported_dimension" | "io" => (2, code),
            _ => (1, code),
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return (2, "io");
    }
    (1, "internal")
}

/// Parses `arg` as inline JSON (when it starts with `{`) or as a path to a
/// JSON file. Grid-family laws are resolved relative to the file.
pub fn load<T: DeserializeOwned>(arg: &str, what: &str) -> anyhow::Result<(T, PathBuf)> {
    let (text, origin, base) = if arg.trim_start().starts_with('{') {
        (arg.to_string(), format!("{what} (inline)"), PathBuf::from("."))
    } else {
        let path = Path::new(arg);
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("{what}: cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        (text, path.display().to_string(), base)
    };
    let value = serde_json::from_str(&text)
        .map_err(|e| ConfigError::new(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
    Ok((value, base))
}

/// Field-level checks: the message names the offending field.
pub fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(format!("{name} = {v}, must be a finite number > 0")))
    }
}

pub fn nonnegative(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(format!("{name} = {v}, must be a finite number >= 0")))
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityConfig {
    pub d: usize,
    pub gamma: f64,
    pub c_phi: f64,
    pub delta: f64,
    pub c_f: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpConfig {
    pub r: f64,
    /// Computed from the pair when absent.
    #[serde(default)]
    pub c_r: Option<f64>,
}

/// Either two laws (envelopes and moments are derived) or explicit
/// regularity constants plus a distance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default)]
    pub pair: Option<Vec<DistSpec>>,
    #[serde(default)]
    pub regularity: Option<RegularityConfig>,
    /// Upper bound on the weak distance. Derived from the pair when absent
    /// (W1 for fm and dk, sup |φ₁ − φ₂| for cf).
    #[serde(default)]
    pub fm_upper: Option<f64>,
    /// Moment order used when the pair is given.
    #[serde(default = "one")]
    pub delta: f64,
    /// Switches to the exponential-moment certificate.
    #[serde(default)]
    pub exp: Option<ExpConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub pair: Vec<DistSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub freq: Option<FreqGrid>,
}

pub fn check_pair(pair: &mut [DistSpec], base: &Path) -> anyhow::Result<()> {
    if pair.len() != 2 {
        return Err(ConfigError::new(format!("pair: expected exactly 2 laws, got {}", pair.len())).into());
    }
    for (i, s) in pair.iter_mut().enumerate() {
        s.validate().map_err(|e| ConfigError::new(format!("pair[{i}]: {e}")))?;
        s.load_grids(base).map_err(|e| ConfigError::new(format!("pair[{i}]: {e}")))?;
    }
    if pair[0].dim() != pair[1].dim() {
        return Err(ConfigError::new(format!("pair: dimensions {} and {} differ", pair[0].dim(), pair[1].dim())).into());
    }
    Ok(())
}

/// `--base` accepts a family shorthand, inline JSON or a file path.
pub fn base_law(arg: &str) -> anyhow::Result<DistSpec> {
    Ok(match arg {
        "laplace" => DistSpec::laplace(2f64.sqrt()),
        "gaussian" => DistSpec::standard_gaussian(1),
        "laplace_mixture" => DistSpec::laplace_mixture(100),
        "uniform" => DistSpec::uniform_1d(0.0, 1.0),
        _ => {
            let (mut spec, base): (DistSpec, _) = load(arg, "--base")?;
            spec.validate().map_err(|e| ConfigError::new(format!("--base: {e}")))?;
            spec.load_grids(&base)?;
            spec
        }
    })
}

pub fn recursion(arg: &str) -> anyhow::Result<RecursionSpec> {
    let (spec, base): (RecursionSpec, _) = load(arg, "--config")?;
    let mut spec = spec;
    spec.innovation.load_grids(&base)?;
    spec.init.load_grids(&base)?;
    Ok(spec)
}

/// "4,16,64" → [4, 16, 64].
pub fn n_list(arg: &str, flag: &str) -> Result<Vec<u64>, ConfigError> {
    let v: Result<Vec<u64>, _> = arg.split(',').map(|s| s.trim().parse::<u64>()).collect();
    match v {
        Ok(v) if !v.is_empty() && v.iter().all(|n| *n >= 1) => Ok(v),
        _ => Err(ConfigError::new(format!("{flag}: expected a comma-separated list of integers >= 1, got {arg:?}"))),
    }
}
