//! Trajectory, power and time-allocation planning for UAV-aided wireless
//! powered communication networks under a max-min throughput objective.
pub mod baselines;
pub mod bounds;
pub mod convex_solver;
pub mod feasibility;
pub mod model;
pub mod planner;

pub use baselines::{run_baseline, BaselineKind};
pub use feasibility::{check, FeasibilityReport};
pub use model::{
    Point2, PowerSchedule, Role, Scenario, ScenarioParams, SolutionBundle, SystemMode,
    TimeAllocation, TraceEntry, TraceStage, Trajectory,
};
pub use planner::{
    run, solve, solve_from, sweep_horizons, PlanFailure, PlannerConfig, PlannerError, RunPlan,
    Scheme,
};
