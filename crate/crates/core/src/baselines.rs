//! Reference schemes the proposed planner is compared against.

use crate::model::{
    gain_from_dist_sq, PowerSchedule, Scenario, SolutionBundle, SystemMode, TimeAllocation,
    Trajectory,
};
use crate::planner::{run, PlanFailure, PlannerConfig, RunPlan, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// UAVs hover at the terminal centroid; only powers and time are optimized.
    StaticAp,
    /// UAVs fly the fixed initial circle; only powers and time are optimized.
    Circular,
    /// Equal time allocation, never re-optimized.
    Eta,
    /// Each terminal spends exactly the energy it harvested in the previous slot.
    Npc,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::StaticAp,
        BaselineKind::Circular,
        BaselineKind::Eta,
        BaselineKind::Npc,
    ];

    pub fn scheme(self) -> Scheme {
        match self {
            BaselineKind::StaticAp => Scheme::StaticAp,
            BaselineKind::Circular => Scheme::Circular,
            BaselineKind::Eta => Scheme::Eta,
            BaselineKind::Npc => Scheme::Npc,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::StaticAp => "static",
            BaselineKind::Circular => "circular",
            BaselineKind::Eta => "eta",
            BaselineKind::Npc => "npc",
        }
    }
}

pub fn run_baseline(
    kind: BaselineKind,
    sc: &Scenario,
    cfg: &PlannerConfig,
    mode: SystemMode,
) -> Result<SolutionBundle, PlanFailure> {
    run(sc, cfg, &RunPlan::new(mode, kind.scheme()))
}

/// Power that spends `e_prev` (energy harvested in the previous slot, J) over
/// an uplink of `tau * delta` seconds, capped at `pmax`.
pub fn npc_power(e_prev: f64, delta: f64, tau: f64, pmax: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    (e_prev / (tau * delta)).min(pmax)
}

/// Harvest-and-spend power schedule for a charging trajectory under `alloc`.
pub fn npc_powers(sc: &Scenario, energy: &Trajectory, alloc: &TimeAllocation) -> PowerSchedule {
    let h = sc.altitude(energy.role);
    let coeff = sc.harvest_coeff() * sc.slot_len();
    let gts = sc.gts();
    PowerSchedule::from_fn(sc.slots(), sc.num_gts(), |n, k| {
        if n == 0 {
            return 0.0;
        }
        let e_prev = alloc.wet(n - 1)
            * coeff
            * gain_from_dist_sq(energy.positions[n - 1].dist_sq(gts[k]), h, 1.0);
        npc_power(e_prev, sc.slot_len(), alloc.uplink(n, k), sc.p_ul_max())
    })
}
