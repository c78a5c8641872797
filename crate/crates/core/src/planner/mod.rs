//! Alternating trajectory/power and time-allocation optimization.
//!
//! Each outer iteration runs the concave-convex procedure over trajectories
//! and uplink powers with the time allocation fixed ([`cccp_step`]), then
//! re-solves the time allocation as a linear program with everything else
//! fixed ([`time_allocation`]). Every accepted iterate is feasible for the
//! exact problem and its exact minimum throughput never decreases.

mod allocation;
mod joint;
mod runner;
mod subproblem;

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::convex_solver::SolverError;
use crate::model::{ModelError, Point2, Role, Scenario, SolutionBundle, SystemMode, Trajectory};

pub use allocation::{time_allocation, time_allocation_from, AllocationResult};
pub use joint::allocate_time_and_power;
pub use subproblem::{cccp_step, StepOptions, SubproblemSolution};

#[cfg(test)]
pub(crate) use runner::initial_powers;
pub use runner::{run, RunPlan, Scheme};

/// Tolerances and iteration caps of the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Stop the inner loop once the minimum throughput moves less than this (bits/s/Hz).
    pub cccp_tol: f64,
    pub cccp_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Duality-gap tolerance of every barrier solve.
    pub barrier_tol: f64,
    /// Strict-interior inflation of the auxiliary distance variables (m^2).
    pub eps_z: f64,
    /// Slack subtracted from the throughput variable at every start point.
    pub r_slack: f64,
    /// Relative shrink of the initial circle radius.
    pub eps_r: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            cccp_tol: 1e-4,
            cccp_max_iter: 30,
            outer_tol: 1e-4,
            outer_max_iter: 20,
            barrier_tol: 1e-8,
            eps_z: 1e-6,
            r_slack: 1e-9,
            eps_r: 1e-3,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let reals = [
            ("cccp_tol", self.cccp_tol),
            ("outer_tol", self.outer_tol),
            ("barrier_tol", self.barrier_tol),
            ("eps_z", self.eps_z),
            ("r_slack", self.r_slack),
            ("eps_r", self.eps_r),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlannerError::Config(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if self.eps_r >= 1.0 {
            return Err(PlannerError::Config(format!(
                "eps_r must be below 1, got {}",
                self.eps_r
            )));
        }
        if self.cccp_max_iter == 0 || self.outer_max_iter == 0 {
            return Err(PlannerError::Config(
                "iteration caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid planner configuration: {0}")]
    Config(String),
    #[error("{stage} failed: {source}")]
    Solver {
        stage: &'static str,
        #[source]
        source: SolverError,
    },
    #[error("could not build a strictly feasible start for the {0} subproblem")]
    NoInterior(&'static str),
}

/// A planner error together with the best feasible bundle found before it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanFailure {
    pub error: PlannerError,
    pub best: Option<Box<SolutionBundle>>,
}

impl fmt::Display for PlanFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.error)?;
        if let Some(b) = &self.best {
            write!(f, " (best feasible r_min so far: {:e})", b.r_min)?;
        }
        Ok(())
    }
}

impl std::error::Error for PlanFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<PlannerError> for PlanFailure {
    fn from(error: PlannerError) -> Self {
        Self { error, best: None }
    }
}

/// Center and radii of the circular initial path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleGeometry {
    pub center: Point2,
    /// Mean distance from the centroid to the terminals.
    pub r_md: f64,
    /// Largest radius flyable at speed `v` within the horizon.
    pub r_max: f64,
}

impl CircleGeometry {
    pub fn new(sc: &Scenario, v: f64) -> Self {
        let center = sc.centroid();
        let r_md = sc.gts().iter().map(|u| u.dist(center)).sum::<f64>() / sc.num_gts() as f64;
        let r_max = v * sc.horizon() / (2.0 * PI);
        Self {
            center,
            r_md,
            r_max,
        }
    }

    /// `min(r_md, r_max)`.
    pub fn radius(&self) -> f64 {
        self.r_md.min(self.r_max)
    }
}

/// Circular path around the terminal centroid with radius
/// `min(r_md, r_max) * (1 - eps_r)`, starting at angle `phase`.
pub fn circular_init(sc: &Scenario, role: Role, v: f64, phase: f64, eps_r: f64) -> Trajectory {
    let geo = CircleGeometry::new(sc, v);
    let r = geo.radius() * (1.0 - eps_r);
    let n = sc.slots();
    let positions = (0..n)
        .map(|i| {
            let a = 2.0 * PI * (i + 1) as f64 / n as f64 + phase;
            geo.center + Point2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    Trajectory::new(role, positions)
}

/// Initial trajectories for `mode`: the decoding UAV at phase 0, the
/// energy UAV (separated systems only) half a turn ahead.
pub fn initial_trajectories(sc: &Scenario, mode: SystemMode, eps_r: f64) -> Vec<Trajectory> {
    mode.roles()
        .iter()
        .map(|&role| {
            let phase = if role == Role::Energy { PI } else { 0.0 };
            circular_init(sc, role, sc.vmax(role), phase, eps_r)
        })
        .collect()
}

/// Plan `mode` with the proposed alternating algorithm.
pub fn solve(
    sc: &Scenario,
    cfg: &PlannerConfig,
    mode: SystemMode,
) -> Result<SolutionBundle, PlanFailure> {
    run(sc, cfg, &RunPlan::new(mode, Scheme::Proposed))
}

/// Like [`solve`], starting from a given feasible bundle instead of the
/// circular initialization.
pub fn solve_from(
    sc: &Scenario,
    cfg: &PlannerConfig,
    start: &SolutionBundle,
) -> Result<SolutionBundle, PlanFailure> {
    run(
        sc,
        cfg,
        &RunPlan::new(start.mode, Scheme::Proposed).with_start(start.clone()),
    )
}

/// Solve for each horizon in increasing order of `horizons`.
///
/// A solution for a horizon stays feasible, with the same average
/// throughput, for any longer horizon with the same slot count; when the
/// fresh solve ends below the previous horizon's value it is redone from
/// that solution, so the returned values never decrease.
pub fn sweep_horizons(
    sc: &Scenario,
    cfg: &PlannerConfig,
    plan: &RunPlan,
    horizons: &[f64],
) -> Result<Vec<(f64, SolutionBundle)>, PlanFailure> {
    let mut order: Vec<f64> = horizons.to_vec();
    order.sort_by(f64::total_cmp);
    order.dedup();
    let mut out: Vec<(f64, SolutionBundle)> = Vec::with_capacity(order.len());
    for &t in &order {
        let sc_t = sc.with_horizon(t).map_err(PlannerError::from)?;
        let mut best = run(&sc_t, cfg, plan)?;
        if let Some((_, prev)) = out.last() {
            if best.r_min < prev.r_min && plan.scheme.accepts_warm_start() {
                let warm = run(&sc_t, cfg, &plan.clone().with_start(prev.clone()))?;
                if warm.r_min > best.r_min {
                    best = warm;
                }
            }
        }
        out.push((t, best));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScenarioParams;
    use approx::assert_relative_eq;

    fn square(horizon: f64) -> Scenario {
        let gts = vec![
            Point2::new(10.0, 10.0),
            Point2::new(-10.0, 10.0),
            Point2::new(-10.0, -10.0),
            Point2::new(10.0, -10.0),
        ];
        Scenario::new(ScenarioParams::with_default_link_budget(gts, horizon, 12)).unwrap()
    }

    #[test]
    fn circle_geometry_example() {
        let geo = CircleGeometry::new(&square(30.0), 5.0);
        assert_eq!(geo.center, Point2::new(0.0, 0.0));
        assert_relative_eq!(geo.r_md, 200f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(geo.r_max, 150.0 / (2.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(geo.radius(), 14.142, epsilon = 1e-3);
        assert!((geo.r_max - 23.873).abs() < 1e-3);
    }

    #[test]
    fn circular_init_is_feasible_and_shrunk() {
        let sc = square(30.0);
        let t = circular_init(&sc, Role::Hybrid, 5.0, 0.0, 1e-3);
        assert_eq!(t.len(), 12);
        for p in &t.positions {
            assert_relative_eq!(p.norm(), 200f64.sqrt() * (1.0 - 1e-3), max_relative = 1e-12);
        }
        assert!(t.max_step() <= sc.step_limit(Role::Hybrid));
        // A short horizon makes the speed limit the binding radius.
        let sc = square(6.0);
        let t = circular_init(&sc, Role::Hybrid, 5.0, 0.0, 1e-3);
        assert!(t.max_step() < sc.step_limit(Role::Hybrid));
    }

    #[test]
    fn degenerate_layouts_hover() {
        let one = Scenario::new(ScenarioParams::with_default_link_budget(
            vec![Point2::new(10.0, 10.0)],
            30.0,
            5,
        ))
        .unwrap();
        let t = circular_init(&one, Role::Hybrid, 5.0, 0.0, 1e-3);
        assert!(t.positions.iter().all(|p| *p == Point2::new(10.0, 10.0)));
        let stacked = Scenario::new(ScenarioParams::with_default_link_budget(
            vec![Point2::new(3.0, -2.0); 3],
            30.0,
            5,
        ))
        .unwrap();
        let t = circular_init(&stacked, Role::Hybrid, 5.0, 1.0, 1e-3);
        assert!(t
            .positions
            .iter()
            .all(|p| p.dist(Point2::new(3.0, -2.0)) < 1e-12));
    }

    #[test]
    fn separated_init_uses_opposite_phases() {
        let sc = square(30.0);
        let trajs = initial_trajectories(&sc, SystemMode::Separated, 1e-3);
        assert_eq!(trajs[0].role, Role::Info);
        assert_eq!(trajs[1].role, Role::Energy);
        for (a, b) in trajs[0].positions.iter().zip(&trajs[1].positions) {
            assert!((*a + *b).norm() < 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        assert!(PlannerConfig::default().validate().is_ok());
        let bad = PlannerConfig {
            cccp_tol: 0.0,
            ..PlannerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PlannerConfig {
            outer_max_iter: 0,
            ..PlannerConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
