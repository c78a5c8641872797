//! The alternating loop shared by the proposed scheme and the baselines.

use crate::baselines::npc_powers;
use crate::feasibility::check;
use crate::model::{
    gain_from_dist_sq, PowerSchedule, Role, Scenario, SolutionBundle, SystemMode, TimeAllocation,
    TraceEntry, TraceStage, Trajectory,
};

use super::allocation::{split_roles, time_allocation_from};
use super::joint::allocate_time_and_power;
use super::subproblem::{cccp_step, StepOptions, SubproblemSolution};
use super::{circular_init, initial_trajectories, PlanFailure, PlannerConfig, PlannerError};

/// Optimization scheme run by [`run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Proposed,
    StaticAp,
    Circular,
    Eta,
    Npc,
}

impl Scheme {
    /// Whether a solution of another horizon is a legitimate start point.
    pub fn accepts_warm_start(self) -> bool {
        matches!(self, Scheme::Proposed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub mode: SystemMode,
    pub scheme: Scheme,
    pub start: Option<SolutionBundle>,
}

impl RunPlan {
    pub fn new(mode: SystemMode, scheme: Scheme) -> Self {
        Self {
            mode,
            scheme,
            start: None,
        }
    }

    pub fn with_start(mut self, start: SolutionBundle) -> Self {
        self.start = Some(start);
        self
    }
}

/// A strictly feasible power schedule for `alloc`: per terminal, a constant
/// power at half the largest value every energy row allows (and at most half
/// the peak), zero where nothing has been harvested yet.
pub(crate) fn initial_powers(
    sc: &Scenario,
    trajectories: &[Trajectory],
    alloc: &TimeAllocation,
) -> PowerSchedule {
    let (_, energy) = split_roles(trajectories).expect("one charging trajectory");
    let (slots, gts) = (sc.slots(), sc.num_gts());
    let h = sc.altitude(energy.role);
    let pmax = sc.p_ul_max();
    let mut powers = PowerSchedule::zeros(slots, gts);
    for (k, &u) in sc.gts().iter().enumerate() {
        let harvest: Vec<f64> = (0..slots)
            .map(|n| {
                alloc.wet(n)
                    * sc.harvest_coeff()
                    * gain_from_dist_sq(energy.positions[n].dist_sq(u), h, 1.0)
            })
            .collect();
        let mut level = 0.5 * pmax;
        let mut stored = 0.0;
        let mut spend_time = 0.0;
        for n in 1..slots {
            stored += harvest[n - 1];
            if stored > 0.0 {
                spend_time += alloc.uplink(n, k);
                if spend_time > 0.0 {
                    level = level.min(0.5 * stored / spend_time);
                }
            }
        }
        let mut stored = 0.0;
        for n in 1..slots {
            stored += harvest[n - 1];
            let tau = alloc.uplink(n, k);
            let p = if tau == 0.0 {
                pmax
            } else if stored > 0.0 {
                level
            } else {
                0.0
            };
            powers.set(n, k, p);
        }
    }
    powers
}

fn bundle(
    mode: SystemMode,
    cur: &SubproblemSolution,
    alloc: &TimeAllocation,
    trace: &[TraceEntry],
) -> SolutionBundle {
    SolutionBundle {
        mode,
        trajectories: cur.trajectories.clone(),
        allocation: alloc.clone(),
        powers: cur.powers.clone(),
        r_min: cur.r_min,
        per_gt_rates: cur.per_gt_rates.clone(),
        trace: trace.to_vec(),
    }
}

/// Both UAVs on the integrated path, with its allocation and powers.
/// `None` when that point breaks a separated-system limit.
fn lift(sc: &Scenario, integrated: &SolutionBundle) -> Option<SolutionBundle> {
    let path = &integrated.trajectories.first()?.positions;
    let trajectories = vec![
        Trajectory::new(Role::Info, path.clone()),
        Trajectory::new(Role::Energy, path.clone()),
    ];
    let cur = SubproblemSolution::from_point(
        sc,
        trajectories,
        &integrated.allocation,
        integrated.powers.clone(),
    )
    .ok()?;
    let b = bundle(SystemMode::Separated, &cur, &integrated.allocation, &[]);
    check(&b, sc, 1e-9).ok.then_some(b)
}

/// Run `plan.scheme` to convergence.
///
/// The proposed separated scheme without a given start runs twice: from
/// the circular initialization, and from the integrated solution flown by
/// both UAVs; the better result is returned.
pub fn run(
    sc: &Scenario,
    cfg: &PlannerConfig,
    plan: &RunPlan,
) -> Result<SolutionBundle, PlanFailure> {
    let from_circle = run_once(sc, cfg, plan);
    if !(plan.scheme == Scheme::Proposed
        && plan.mode == SystemMode::Separated
        && plan.start.is_none())
    {
        return from_circle;
    }
    let lifted = run_once(
        sc,
        cfg,
        &RunPlan::new(SystemMode::Integrated, Scheme::Proposed),
    )
    .ok()
    .and_then(|b| lift(sc, &b))
    .and_then(|start| run_once(sc, cfg, &plan.clone().with_start(start)).ok());
    match (from_circle, lifted) {
        (Ok(a), Some(b)) => Ok(if b.r_min > a.r_min { b } else { a }),
        (Err(_), Some(b)) => Ok(b),
        (a, None) => a,
    }
}

fn run_once(
    sc: &Scenario,
    cfg: &PlannerConfig,
    plan: &RunPlan,
) -> Result<SolutionBundle, PlanFailure> {
    cfg.validate()?;
    let mode = plan.mode;
    if let Some(start) = &plan.start {
        if start.mode != mode {
            return Err(
                PlannerError::Config("start bundle belongs to another system".into()).into(),
            );
        }
    }
    let roles: Vec<Role> = mode.roles().to_vec();
    let (trajectories, frozen) = match plan.scheme {
        Scheme::StaticAp => {
            let c = sc.centroid();
            (
                roles
                    .iter()
                    .map(|&r| Trajectory::hover(r, c, sc.slots()))
                    .collect::<Vec<_>>(),
                roles.clone(),
            )
        }
        Scheme::Circular => {
            // Both UAVs share one path; the slowest role sets the radius.
            let v = roles
                .iter()
                .map(|&r| sc.vmax(r))
                .fold(f64::INFINITY, f64::min);
            (
                roles
                    .iter()
                    .map(|&r| circular_init(sc, r, v, 0.0, cfg.eps_r))
                    .collect(),
                roles.clone(),
            )
        }
        Scheme::Proposed | Scheme::Eta | Scheme::Npc => {
            let t = match &plan.start {
                Some(s) => s.trajectories.clone(),
                None => initial_trajectories(sc, mode, cfg.eps_r),
            };
            (t, Vec::new())
        }
    };
    let mut alloc = match (&plan.start, plan.scheme) {
        (_, Scheme::Eta) | (None, _) => TimeAllocation::uniform(sc.slots(), sc.num_gts()),
        (Some(s), _) => s.allocation.clone(),
    };
    let powers = match (&plan.start, plan.scheme) {
        (_, Scheme::Npc) => npc_powers(
            sc,
            split_roles(&trajectories).map_err(PlannerError::from)?.1,
            &alloc,
        ),
        (Some(s), Scheme::Proposed) => s.powers.clone(),
        _ => initial_powers(sc, &trajectories, &alloc),
    };
    let mut cur = SubproblemSolution::from_point(sc, trajectories, &alloc, powers)
        .map_err(PlannerError::from)?;
    let mut trace = vec![TraceEntry {
        outer: 0,
        inner: 0,
        stage: TraceStage::Initial,
        r_min: cur.r_min,
    }];
    let fail = |error: PlannerError,
                cur: &SubproblemSolution,
                alloc: &TimeAllocation,
                trace: &[TraceEntry]| PlanFailure {
        error,
        best: Some(Box::new(bundle(mode, cur, alloc, trace))),
    };

    let step_opts = match plan.scheme {
        Scheme::Npc => StepOptions {
            frozen: frozen.clone(),
            fixed_powers: true,
        },
        _ => StepOptions {
            frozen: frozen.clone(),
            fixed_powers: false,
        },
    };
    for q in 1..=cfg.outer_max_iter {
        let outer_start = cur.r_min;
        let mut inner = 0;
        while inner < cfg.cccp_max_iter {
            inner += 1;
            let mut cand = match cccp_step(sc, cfg, &alloc, &cur, mode, &step_opts) {
                Ok(c) => c,
                Err(e) => return Err(fail(e, &cur, &alloc, &trace)),
            };
            if plan.scheme == Scheme::Npc {
                let (_, energy) = split_roles(&cand.trajectories).map_err(PlannerError::from)?;
                let p = npc_powers(sc, energy, &alloc);
                cand = SubproblemSolution::from_point(sc, cand.trajectories, &alloc, p)
                    .map_err(PlannerError::from)?;
            }
            let gain = cand.r_min - cur.r_min;
            if gain > 0.0 {
                cur = cand;
            }
            trace.push(TraceEntry {
                outer: q,
                inner,
                stage: TraceStage::Cccp,
                r_min: cur.r_min,
            });
            if gain < cfg.cccp_tol {
                break;
            }
        }
        if plan.scheme != Scheme::Eta {
            match reallocate(sc, cfg, plan.scheme, &cur, &alloc) {
                Ok(Some((a, next))) => {
                    alloc = a;
                    cur = next;
                }
                Ok(None) => {}
                Err(e) => return Err(fail(e, &cur, &alloc, &trace)),
            }
            trace.push(TraceEntry {
                outer: q,
                inner: inner + 1,
                stage: TraceStage::TimeAllocation,
                r_min: cur.r_min,
            });
        }
        if plan.scheme == Scheme::Eta || cur.r_min - outer_start < cfg.outer_tol {
            break;
        }
    }
    Ok(bundle(mode, &cur, &alloc, &trace))
}

/// New allocation (and, for NPC, new powers) if it improves the exact objective.
fn reallocate(
    sc: &Scenario,
    cfg: &PlannerConfig,
    scheme: Scheme,
    cur: &SubproblemSolution,
    alloc: &TimeAllocation,
) -> Result<Option<(TimeAllocation, SubproblemSolution)>, PlannerError> {
    let mut best: Option<(TimeAllocation, SubproblemSolution)> = None;
    let mut best_r = cur.r_min;
    if scheme != Scheme::Npc {
        // Powers are free here, so re-solve them together with the time split.
        // The plain LP is the fallback when that program fails numerically.
        if let Ok(found) = allocate_time_and_power(sc, cur, alloc, cfg.barrier_tol) {
            return Ok(found);
        }
        let res = time_allocation_from(
            sc,
            &cur.trajectories,
            &cur.powers,
            Some(alloc),
            cfg.barrier_tol,
        )?;
        if res.r_min > best_r {
            let next = SubproblemSolution {
                r_min: res.r_min,
                per_gt_rates: res.per_gt_rates,
                ..cur.clone()
            };
            best = Some((res.allocation, next));
        }
        return Ok(best);
    }
    // Powers follow the allocation through the harvest rule, and the
    // allocation is optimized for fixed powers: iterate to a fixed point.
    let (_, energy) = split_roles(&cur.trajectories)?;
    let mut powers = cur.powers.clone();
    let mut hint = alloc.clone();
    for _ in 0..10 {
        let res =
            time_allocation_from(sc, &cur.trajectories, &powers, Some(&hint), cfg.barrier_tol)?;
        let next_p = npc_powers(sc, energy, &res.allocation);
        let diff = (0..sc.slots())
            .flat_map(|n| (0..sc.num_gts()).map(move |k| (n, k)))
            .map(|(n, k)| (next_p.get(n, k) - powers.get(n, k)).abs())
            .fold(0.0, f64::max);
        let cand = SubproblemSolution::from_point(
            sc,
            cur.trajectories.clone(),
            &res.allocation,
            next_p.clone(),
        )?;
        if cand.r_min > best_r {
            best_r = cand.r_min;
            best = Some((res.allocation.clone(), cand));
        }
        powers = next_p;
        hint = res.allocation;
        if diff < 1e-9 {
            break;
        }
    }
    Ok(best)
}
