//! File formats: trace CSV, duration lists, sweep summaries, JSON reports,
//! and the flat key=value config format.
//!
//! Floats are serialized in decimal scientific notation with 17 significant
//! digits, which round-trips every binary64 value bit-exactly; +∞ is the
//! literal token `inf`; booleans are `0`/`1`.

use crate::analysis::{Contingency2x2, Trace};
use crate::environment::EnvConfig;
use crate::experiment::{RunConfig, SweepConfig, SweepRow};
use crate::inference::{InferenceConfig, Mode, StepRecord};
use crate::tailfit::ModelSelection;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("config key '{key}': {msg}")]
    BadValue { key: String, msg: String },
}

pub const TRACE_HEADER: &str = "t,d,eta,theta,phi,sigma,alpha,reset,active";

/// 17-significant-digit decimal form; `inf` for +∞.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64, String> {
    match s {
        "inf" => Ok(f64::INFINITY),
        other => other.parse().map_err(|e| format!("bad float '{other}': {e}")),
    }
}

fn parse_bool01(s: &str) -> Result<bool, String> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("bad boolean '{other}' (expected 0 or 1)")),
    }
}

pub fn write_trace<W: Write>(w: W, trace: &Trace) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{TRACE_HEADER}")?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            fmt_f64(r.d),
            fmt_f64(r.eta),
            fmt_f64(r.theta),
            fmt_f64(r.phi),
            fmt_f64(r.sigma),
            fmt_f64(r.alpha),
            u8::from(r.reset),
            u8::from(r.active),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a trace CSV. Change times are recovered as the positions where the
/// eta column differs from the previous row.
pub fn read_trace<R: BufRead>(r: R) -> Result<Trace, IoError> {
    let mut records: Vec<StepRecord> = Vec::new();
    let mut change_times = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 {
            if line != TRACE_HEADER {
                return Err(IoError::Parse {
                    line: 1,
                    msg: format!("unexpected header '{line}'"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(IoError::Parse {
                line: i + 1,
                msg: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let err = |msg: String| IoError::Parse { line: i + 1, msg };
        let record = StepRecord {
            t: fields[0].parse().map_err(|e| err(format!("bad t: {e}")))?,
            d: parse_f64(fields[1]).map_err(err)?,
            eta: parse_f64(fields[2]).map_err(err)?,
            theta: parse_f64(fields[3]).map_err(err)?,
            phi: parse_f64(fields[4]).map_err(err)?,
            sigma: parse_f64(fields[5]).map_err(err)?,
            alpha: parse_f64(fields[6]).map_err(err)?,
            reset: parse_bool01(fields[7]).map_err(err)?,
            active: parse_bool01(fields[8]).map_err(err)?,
        };
        if let Some(prev) = records.last() {
            if record.eta != prev.eta {
                change_times.push(records.len());
            }
        }
        records.push(record);
    }
    Ok(Trace::new(records, change_times))
}

pub fn write_durations<W: Write>(w: W, durations: &[u64]) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    writeln!(w, "tau")?;
    for d in durations {
        writeln!(w, "{d}")?;
    }
    w.flush()?;
    Ok(())
}

/// Single-column duration list; an optional non-numeric header line is
/// skipped.
pub fn read_durations<R: BufRead>(r: R) -> Result<Vec<u64>, IoError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() || (i == 0 && s.parse::<u64>().is_err()) {
            continue;
        }
        out.push(s.parse::<u64>().map_err(|e| IoError::Parse {
            line: i + 1,
            msg: format!("bad duration '{s}': {e}"),
        })?);
    }
    Ok(out)
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    writeln!(w, "mode,beta,rmse_f,rmse_s,replicas")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.mode,
            fmt_f64(row.beta),
            fmt_f64(row.rmse_f),
            fmt_f64(row.rmse_s),
            row.replicas
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `cmd_analyze` output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub rest_periods: Vec<u64>,
    pub reset_intervals: Vec<u64>,
    pub contingency: Contingency2x2,
    /// Fraction of analyzed steps with alpha > beta.
    pub active_fraction: f64,
    pub n_steps: usize,
    pub n_changes: usize,
}

/// One (τ, CCDF) pair of a fitted model with the matching empirical value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub tau: u64,
    pub model: f64,
    pub empirical: f64,
}

/// `cmd_fittail` output: the selection plus plot-ready CCDF point sets for
/// each model over its own fitted range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittailReport {
    pub selection: ModelSelection,
    pub ccdf_tp: Vec<CcdfPoint>,
    pub ccdf_ep: Vec<CcdfPoint>,
}

// ---------------------------------------------------------------------------
// Flat key=value config files
// ---------------------------------------------------------------------------

/// Apply `key=value` lines (`#` comments allowed) onto a default `RunConfig`.
/// Sweep-only keys are accepted and returned separately so one file can drive
/// both `sweep` and the other commands.
pub fn parse_config(text: &str) -> Result<(RunConfig, SweepOverrides), IoError> {
    let mut run = RunConfig::default();
    let mut sweep = SweepOverrides::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(IoError::Parse {
                line: i + 1,
                msg: format!("expected key=value, got '{line}'"),
            });
        };
        apply_key(&mut run, &mut sweep, key.trim(), value.trim())?;
    }
    Ok((run, sweep))
}

/// Sweep-specific keys found in a config file.
#[derive(Debug, Clone, Default)]
pub struct SweepOverrides {
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
    pub beta_step: Option<f64>,
    pub modes: Option<Vec<Mode>>,
}

impl SweepOverrides {
    pub fn into_sweep(self, base: RunConfig) -> SweepConfig {
        let mut cfg = SweepConfig {
            base,
            ..SweepConfig::default()
        };
        if let Some(v) = self.beta_start {
            cfg.beta_start = v;
        }
        if let Some(v) = self.beta_end {
            cfg.beta_end = v;
        }
        if let Some(v) = self.beta_step {
            cfg.beta_step = v;
        }
        if let Some(v) = self.modes {
            cfg.modes = v;
        }
        cfg
    }
}

fn apply_key(
    run: &mut RunConfig,
    sweep: &mut SweepOverrides,
    key: &str,
    value: &str,
) -> Result<(), IoError> {
    let bad = |msg: String| IoError::BadValue {
        key: key.to_string(),
        msg,
    };
    let f = |v: &str| parse_f64(v).map_err(|m| bad(m));
    match key {
        "beta" => run.inference.beta = f(value)?,
        "sigma0" => run.inference.sigma0 = f(value)?,
        "mode" => run.inference.mode = value.parse().map_err(|e| bad(format!("{e}")))?,
        "grid_n" => run.inference.grid_n = value.parse().map_err(|e| bad(format!("{e}")))?,
        "grid_origin" => run.inference.grid_origin = f(value)?,
        "grid_delta" => run.inference.grid_delta = f(value)?,
        "theta0" => run.inference.theta0 = f(value)?,
        "phi0" => run.inference.phi0 = f(value)?,
        "omega" => run.env.omega = f(value)?,
        "change_prob" => run.env.change_prob = f(value)?,
        "mean_low" => run.env.mean_low = f(value)?,
        "mean_high" => run.env.mean_high = f(value)?,
        "eta0" => run.env.eta0 = f(value)?,
        "steps" => run.steps = value.parse().map_err(|e| bad(format!("{e}")))?,
        "burnin" => run.burnin = value.parse().map_err(|e| bad(format!("{e}")))?,
        "seed" => run.seed = value.parse().map_err(|e| bad(format!("{e}")))?,
        "replicas" => run.replicas = value.parse().map_err(|e| bad(format!("{e}")))?,
        "beta_start" => sweep.beta_start = Some(f(value)?),
        "beta_end" => sweep.beta_end = Some(f(value)?),
        "beta_step" => sweep.beta_step = Some(f(value)?),
        "modes" => {
            let modes: Result<Vec<Mode>, _> =
                value.split(',').map(|m| m.trim().parse()).collect();
            sweep.modes = Some(modes.map_err(|e| bad(format!("{e}")))?);
        }
        other => return Err(IoError::UnknownKey(other.to_string())),
    }
    Ok(())
}

/// Small convenience used by acceptance checks and the CLI.
pub fn default_run_with(mode: Mode, beta: f64) -> RunConfig {
    RunConfig {
        inference: InferenceConfig {
            mode,
            beta,
            ..InferenceConfig::default()
        },
        env: EnvConfig::default(),
        ..RunConfig::default()
    }
}
