//! Scenario files: TOML with physical quantities in the units engineers quote.

use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;
use uav_wpcn::{PlannerConfig, Point2, Scenario, ScenarioParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    At {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ScenarioFile {
    pub gts: Spanned<Vec<[f64; 2]>>,
    pub T_seconds: Spanned<f64>,
    pub N_slots: Spanned<i64>,
    #[serde(default = "default_altitude")]
    pub altitude_H_m: Spanned<f64>,
    pub altitude_HI_m: Option<Spanned<f64>>,
    pub altitude_HE_m: Option<Spanned<f64>>,
    #[serde(default = "default_vmax")]
    pub vmax_mps: Spanned<f64>,
    pub vmax_I_mps: Option<Spanned<f64>>,
    pub vmax_E_mps: Option<Spanned<f64>>,
    #[serde(default = "default_p_dl")]
    pub p_dl_dbm: Spanned<f64>,
    #[serde(default = "default_p_ul")]
    pub p_ul_max_dbm: Spanned<f64>,
    #[serde(default = "default_zeta")]
    pub zeta: Spanned<f64>,
    #[serde(default = "default_eta")]
    pub eta: Spanned<f64>,
    #[serde(default = "default_g0")]
    pub g0_db: Spanned<f64>,
    #[serde(default = "default_noise")]
    pub noise_dbm: Spanned<f64>,
    #[serde(default)]
    pub planner: PlannerSection,
}

fn unspanned<T>(v: T) -> Spanned<T> {
    Spanned::new(0..0, v)
}
fn default_altitude() -> Spanned<f64> {
    unspanned(8.0)
}
fn default_vmax() -> Spanned<f64> {
    unspanned(5.0)
}
fn default_p_dl() -> Spanned<f64> {
    unspanned(30.0)
}
fn default_p_ul() -> Spanned<f64> {
    unspanned(-10.0)
}
fn default_zeta() -> Spanned<f64> {
    unspanned(0.6)
}
fn default_eta() -> Spanned<f64> {
    unspanned(0.9)
}
fn default_g0() -> Spanned<f64> {
    unspanned(-30.0)
}
fn default_noise() -> Spanned<f64> {
    unspanned(-90.0)
}

/// Optional overrides of [`PlannerConfig`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    pub cccp_tol: Option<f64>,
    pub cccp_max_iter: Option<usize>,
    pub outer_tol: Option<f64>,
    pub outer_max_iter: Option<usize>,
    pub barrier_tol: Option<f64>,
    pub eps_z: Option<f64>,
    pub r_slack: Option<f64>,
    pub eps_r: Option<f64>,
}

impl PlannerSection {
    pub fn apply(&self, base: PlannerConfig) -> PlannerConfig {
        PlannerConfig {
            cccp_tol: self.cccp_tol.unwrap_or(base.cccp_tol),
            cccp_max_iter: self.cccp_max_iter.unwrap_or(base.cccp_max_iter),
            outer_tol: self.outer_tol.unwrap_or(base.outer_tol),
            outer_max_iter: self.outer_max_iter.unwrap_or(base.outer_max_iter),
            barrier_tol: self.barrier_tol.unwrap_or(base.barrier_tol),
            eps_z: self.eps_z.unwrap_or(base.eps_z),
            r_slack: self.r_slack.unwrap_or(base.r_slack),
            eps_r: self.eps_r.unwrap_or(base.eps_r),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// A parsed scenario file.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub scenario: Scenario,
    pub planner: PlannerConfig,
    /// Raw file bytes, hashed into the run summary.
    pub raw: Vec<u8>,
}

/// 1-based line and column of byte offset `at` in `text`.
fn line_col(text: &str, at: usize) -> (usize, usize) {
    let at = at.min(text.len());
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(at, |i| at - i - 1) + 1;
    (line, column)
}

pub fn parse_scenario(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let raw = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8_lossy(&raw).into_owned();
    let mut cfg = parse_scenario_str(&text, &path.display().to_string())?;
    cfg.raw = raw;
    Ok(cfg)
}

pub fn parse_scenario_str(text: &str, origin: &str) -> Result<LoadedConfig, ConfigError> {
    let at = |span: Range<usize>, message: String| {
        let (line, column) = line_col(text, span.start);
        ConfigError::At {
            path: origin.to_string(),
            line,
            column,
            message,
        }
    };
    let file: ScenarioFile = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => at(span, e.message().to_string()),
        None => ConfigError::Invalid {
            path: origin.to_string(),
            message: e.message().to_string(),
        },
    })?;

    let check = |v: &Spanned<f64>,
                 name: &str,
                 ok: fn(f64) -> bool,
                 want: &str|
     -> Result<f64, ConfigError> {
        let x = *v.get_ref();
        if x.is_finite() && ok(x) {
            Ok(x)
        } else {
            Err(at(
                v.span(),
                format!("{name} = {x} is out of range ({want})"),
            ))
        }
    };
    let positive = |x: f64| x > 0.0;
    let nonneg = |x: f64| x >= 0.0;
    let unit = |x: f64| x > 0.0 && x <= 1.0;
    let any = |_: f64| true;

    let slots = *file.N_slots.get_ref();
    if slots < 2 {
        return Err(at(
            file.N_slots.span(),
            format!("N_slots = {slots} is out of range (at least 2)"),
        ));
    }
    if file.gts.get_ref().is_empty() {
        return Err(at(
            file.gts.span(),
            "gts must list at least one terminal".into(),
        ));
    }
    if file.gts.get_ref().iter().flatten().any(|c| !c.is_finite()) {
        return Err(at(file.gts.span(), "gts coordinates must be finite".into()));
    }
    let altitude = check(&file.altitude_H_m, "altitude_H_m", positive, "> 0 m")?;
    let opt = |v: &Option<Spanned<f64>>, name: &str, ok: fn(f64) -> bool, want: &str, dflt: f64| {
        match v {
            Some(v) => check(v, name, ok, want),
            None => Ok(dflt),
        }
    };
    let vmax = check(&file.vmax_mps, "vmax_mps", nonneg, ">= 0 m/s")?;
    let params = ScenarioParams {
        gts: file
            .gts
            .get_ref()
            .iter()
            .map(|&[x, y]| Point2::new(x, y))
            .collect(),
        horizon: check(&file.T_seconds, "T_seconds", positive, "> 0 s")?,
        slots: slots as usize,
        altitude,
        altitude_info: opt(
            &file.altitude_HI_m,
            "altitude_HI_m",
            positive,
            "> 0 m",
            altitude,
        )?,
        altitude_energy: opt(
            &file.altitude_HE_m,
            "altitude_HE_m",
            positive,
            "> 0 m",
            altitude,
        )?,
        vmax,
        vmax_info: opt(&file.vmax_I_mps, "vmax_I_mps", nonneg, ">= 0 m/s", vmax)?,
        vmax_energy: opt(&file.vmax_E_mps, "vmax_E_mps", nonneg, ">= 0 m/s", vmax)?,
        p_dl: dbm_to_watts(check(&file.p_dl_dbm, "p_dl_dbm", any, "finite")?),
        p_ul_max: dbm_to_watts(check(&file.p_ul_max_dbm, "p_ul_max_dbm", any, "finite")?),
        zeta: check(&file.zeta, "zeta", unit, "in (0, 1]")?,
        eta: check(&file.eta, "eta", unit, "in (0, 1]")?,
        g0: db_to_linear(check(&file.g0_db, "g0_db", any, "finite")?),
        sigma2: dbm_to_watts(check(&file.noise_dbm, "noise_dbm", any, "finite")?),
    };
    let invalid = |message: String| ConfigError::Invalid {
        path: origin.to_string(),
        message,
    };
    let scenario = Scenario::new(params).map_err(|e| invalid(e.to_string()))?;
    let planner = file.planner.apply(PlannerConfig::default());
    planner.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(LoadedConfig {
        scenario,
        planner,
        raw: text.as_bytes().to_vec(),
    })
}
