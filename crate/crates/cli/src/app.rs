//! Command-line orchestration.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use uav_wpcn::{check, sweep_horizons, PlanFailure, RunPlan, Scheme, SolutionBundle, SystemMode};

use crate::config::{parse_scenario, ConfigError, LoadedConfig};
use crate::output::{self, RunSummary, Staging};
use crate::plot;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Feasibility tolerance every emitted bundle has to meet.
const GATE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Integrated,
    Separated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Proposed,
    Static,
    Circular,
    Eta,
    Npc,
}

impl SchemeArg {
    fn scheme(self) -> Scheme {
        match self {
            SchemeArg::Proposed => Scheme::Proposed,
            SchemeArg::Static => Scheme::StaticAp,
            SchemeArg::Circular => Scheme::Circular,
            SchemeArg::Eta => Scheme::Eta,
            SchemeArg::Npc => Scheme::Npc,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SchemeArg::Proposed => "proposed",
            SchemeArg::Static => "static",
            SchemeArg::Circular => "circular",
            SchemeArg::Eta => "eta",
            SchemeArg::Npc => "npc",
        }
    }
}

/// Plan UAV trajectories, uplink powers and time allocation for a
/// wireless powered network under a max-min throughput objective.
#[derive(Debug, Parser)]
#[command(name = "uav-wpcn", version)]
pub struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value = "integrated")]
    pub system: SystemArg,
    #[arg(long, value_enum, default_value = "proposed")]
    pub scheme: SchemeArg,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Also render trajectory.svg.
    #[arg(long)]
    pub plot: bool,
    /// Comma-separated horizons in seconds, e.g. "30,50,100".
    #[arg(long = "sweep-T", value_name = "LIST", value_parser = parse_horizons)]
    pub sweep_t: Option<Horizons>,
    /// Accepted for interface stability; every run is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Horizons(pub Vec<f64>);

fn parse_horizons(s: &str) -> Result<Horizons, String> {
    let v = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() || v.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err("horizons must be positive numbers".into());
    }
    Ok(Horizons(v))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("planning failed: {0}")]
    Plan(#[from] PlanFailure),
    #[error("result failed the feasibility gate: {0}")]
    Infeasible(String),
    #[error("cannot write results: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_SOLVER,
        }
    }
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let LoadedConfig {
        scenario,
        planner,
        raw,
    } = parse_scenario(&args.config)?;
    let mode = match args.system {
        SystemArg::Integrated => SystemMode::Integrated,
        SystemArg::Separated => SystemMode::Separated,
    };
    let plan = RunPlan::new(mode, args.scheme.scheme());
    let started = Instant::now();

    let (bundle, sc, sweep): (SolutionBundle, _, Option<Vec<(f64, f64)>>) = match &args.sweep_t {
        None => (
            uav_wpcn::run(&scenario, &planner, &plan)?,
            scenario.clone(),
            None,
        ),
        Some(Horizons(ts)) => {
            let mut ts = ts.clone();
            if !ts.contains(&scenario.horizon()) {
                ts.push(scenario.horizon());
            }
            let results = sweep_horizons(&scenario, &planner, &plan, &ts)?;
            for (t, b) in &results {
                let sc_t = scenario.with_horizon(*t).expect("validated horizon");
                gate(b, &sc_t, *t)?;
            }
            let rows: Vec<(f64, f64)> = results
                .iter()
                .filter(|(t, _)| args.sweep_t.as_ref().is_some_and(|h| h.0.contains(t)))
                .map(|(t, b)| (*t, b.r_min))
                .collect();
            let (_, b) = results
                .into_iter()
                .find(|(t, _)| *t == scenario.horizon())
                .expect("configured horizon is swept");
            (b, scenario.clone(), Some(rows))
        }
    };
    let wall = started.elapsed().as_secs_f64();
    let report = gate(&bundle, &sc, sc.horizon())?;

    let summary = RunSummary::new(
        &bundle,
        &sc,
        args.scheme.name(),
        report,
        true,
        &raw,
        args.seed,
    );
    let mut st = Staging::new(&args.out)?;
    st.write("trajectory.csv", &output::trajectory_csv(&bundle, &sc))?;
    st.write("tau.csv", &output::tau_csv(&bundle))?;
    st.write("power.csv", &output::power_csv(&bundle))?;
    st.write("rates.csv", &output::rates_csv(&bundle))?;
    st.write("convergence.csv", &output::convergence_csv(&bundle))?;
    st.write(
        "summary.json",
        &(serde_json::to_string_pretty(&summary).expect("plain data") + "\n"),
    )?;
    st.write(
        "timing.json",
        &format!("{{\n  \"wall_time_s\": {wall}\n}}\n"),
    )?;
    if args.plot {
        st.write("trajectory.svg", &plot::trajectory_svg(&bundle, &sc))?;
    }
    if let Some(rows) = sweep {
        st.write("rmin_vs_T.csv", &output::sweep_csv(&rows))?;
    }
    st.commit()?;
    Ok(())
}

/// Feasibility-check a bundle; returns the recomputed minimum throughput.
fn gate(b: &SolutionBundle, sc: &uav_wpcn::Scenario, t: f64) -> Result<f64, CliError> {
    let rep = check(b, sc, GATE_EPS);
    if !rep.ok {
        let first = rep
            .violations
            .first()
            .map(|v| v.to_string())
            .unwrap_or_default();
        return Err(CliError::Infeasible(format!(
            "T = {t} s: {} violation(s), first: {first}",
            rep.violations.len()
        )));
    }
    Ok(rep.r_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_lists() {
        assert_eq!(
            parse_horizons("30, 50,100").unwrap(),
            Horizons(vec![30.0, 50.0, 100.0])
        );
        assert!(parse_horizons("30,-1").is_err());
        assert!(parse_horizons("abc").is_err());
    }

    #[test]
    fn flags_parse() {
        let a = Args::try_parse_from([
            "uav-wpcn",
            "--config",
            "c.toml",
            "--out",
            "o",
            "--system",
            "separated",
            "--scheme",
            "npc",
            "--sweep-T",
            "30,50",
        ])
        .unwrap();
        assert_eq!(a.system, SystemArg::Separated);
        assert_eq!(a.scheme, SchemeArg::Npc);
        assert_eq!(a.sweep_t, Some(Horizons(vec![30.0, 50.0])));
        assert!(Args::try_parse_from(["uav-wpcn", "--out", "o"]).is_err());
    }
}
