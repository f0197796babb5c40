// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::Global;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip form, switching to exponent notation for very
/// small or large magnitudes.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e16) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn emit(global: &Global, text: &str) -> anyhow::Result<()> {
    match &global.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// CSV with two comment lines: a timestamp (the only line allowed to
/// differ between identical runs) and the version, seed and config echo.
pub fn write_csv(global: &Global, config: &Value, columns: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut text = format!("# generated_unix={now}\n");
    text += &format!("# tvcert {VERSION} seed={} config={}\n", global.seed, serde_json::to_string(config)?);
    text += &columns.join(",");
    text.push('\n');
    for r in rows {
        text += &r.join(",");
        text.push('\n');
    }
    emit(global, &text)
}

/// Pretty JSON report; no timestamp, so reruns are byte-identical.
pub fn write_json<T: Serialize>(global: &Global, command: &str, config: &Value, result: &T) -> anyhow::Result<()> {
    let report = json!({
        "tvcert_version": VERSION,
        "command": command,
        "seed": global.seed,
        "config": config,
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(global, &text)
}
