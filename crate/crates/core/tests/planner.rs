use proptest::prelude::*;
use uav_wpcn::model::{average_rates, channel_gain, harvested_energy};
use uav_wpcn::planner::{
    cccp_step, initial_trajectories, time_allocation, StepOptions, SubproblemSolution,
};
use uav_wpcn::{
    check, run_baseline, solve, solve_from, BaselineKind, PlannerConfig, Point2, PowerSchedule,
    Role, Scenario, ScenarioParams, SolutionBundle, SystemMode, TimeAllocation, Trajectory,
};

fn scenario(gts: Vec<Point2>, horizon: f64, slots: usize) -> Scenario {
    Scenario::new(ScenarioParams::with_default_link_budget(
        gts, horizon, slots,
    ))
    .unwrap()
}

fn triangle(horizon: f64, slots: usize) -> Scenario {
    scenario(
        vec![
            Point2::new(12.0, 0.0),
            Point2::new(-8.0, 9.0),
            Point2::new(-5.0, -14.0),
        ],
        horizon,
        slots,
    )
}

fn assert_consistent(b: &SolutionBundle, sc: &Scenario) {
    let rep = check(b, sc, 1e-6);
    assert!(rep.ok, "{:?}", rep.violations);
    let rates = average_rates(b.info_trajectory(), &b.allocation, &b.powers, sc).unwrap();
    for (a, c) in rates.iter().zip(&b.per_gt_rates) {
        assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0));
    }
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((min - b.r_min).abs() <= 1e-12);
    assert!(
        b.trace.windows(2).all(|w| w[1].r_min >= w[0].r_min - 1e-8),
        "trace decreased"
    );
}

#[test]
fn integrated_and_separated_plans_are_feasible_and_monotone() {
    let sc = triangle(20.0, 10);
    let cfg = PlannerConfig::default();
    for mode in [SystemMode::Integrated, SystemMode::Separated] {
        let b = solve(&sc, &cfg, mode).unwrap();
        assert_eq!(b.mode, mode);
        assert_eq!(b.trajectories.len(), mode.roles().len());
        assert!(b.r_min > 0.0);
        assert!(b.outer_iterations() <= cfg.outer_max_iter);
        assert_consistent(&b, &sc);
    }
}

#[test]
fn proposed_beats_every_baseline() {
    let sc = triangle(20.0, 10);
    let cfg = PlannerConfig::default();
    let proposed = solve(&sc, &cfg, SystemMode::Integrated).unwrap();
    for kind in BaselineKind::ALL {
        let b = run_baseline(kind, &sc, &cfg, SystemMode::Integrated).unwrap();
        assert!(
            proposed.r_min >= b.r_min - 1e-6,
            "{}: {} < {}",
            kind.as_str(),
            proposed.r_min,
            b.r_min
        );
    }
}

#[test]
fn cccp_keeps_auxiliary_distances_tight() {
    let sc = triangle(20.0, 10);
    let cfg = PlannerConfig::default();
    for mode in [SystemMode::Integrated, SystemMode::Separated] {
        let alloc = TimeAllocation::uniform(10, 3);
        let trajs = initial_trajectories(&sc, mode, cfg.eps_r);
        let powers = PowerSchedule::from_fn(10, 3, |n, _| if n == 0 { 0.0 } else { 1e-8 });
        let mut cur = SubproblemSolution::from_point(&sc, trajs, &alloc, powers).unwrap();
        for _ in 0..3 {
            cur = cccp_step(&sc, &cfg, &alloc, &cur, mode, &StepOptions::default()).unwrap();
            let info = cur.trajectories.iter().find(|t| t.role.decodes()).unwrap();
            let energy = cur.trajectories.iter().find(|t| t.role.charges()).unwrap();
            for n in 0..10 {
                for (k, &u) in sc.gts().iter().enumerate() {
                    for (z, t) in [
                        (cur.z_info[n * 3 + k], info),
                        (cur.z_energy[n * 3 + k], energy),
                    ] {
                        let d2 = t.positions[n].dist_sq(u);
                        assert!(
                            z >= d2 - 1e-9 && z - d2 <= 1e-6 * (1.0 + z),
                            "n {n} k {k}: z {z} vs {d2}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn baselines_are_feasible_in_both_modes() {
    let sc = triangle(15.0, 8);
    let cfg = PlannerConfig::default();
    for mode in [SystemMode::Integrated, SystemMode::Separated] {
        for kind in BaselineKind::ALL {
            let b = run_baseline(kind, &sc, &cfg, mode)
                .unwrap_or_else(|e| panic!("{}: {e}", kind.as_str()));
            assert!(b.r_min >= 0.0);
            assert_consistent(&b, &sc);
        }
    }
}

#[test]
fn warm_start_never_loses_throughput() {
    let sc = triangle(20.0, 10);
    let cfg = PlannerConfig {
        outer_max_iter: 2,
        ..PlannerConfig::default()
    };
    let first = solve(&sc, &cfg, SystemMode::Integrated).unwrap();
    let again = solve_from(&sc, &cfg, &first).unwrap();
    assert!(again.r_min >= first.r_min - 1e-12);
    assert_consistent(&again, &sc);
}

// A single terminal under a hovering UAV: the best plan harvests for the
// whole first slot, transmits for the whole last one and splits the slots in
// between. For a fixed split the best power is constant and spends the whole
// harvest, so a grid over the split alone finds the optimum.
#[test]
fn hover_matches_grid_search() {
    let (slots, horizon) = (8usize, 8.0);
    let mut params =
        ScenarioParams::with_default_link_budget(vec![Point2::new(5.0, -3.0)], horizon, slots);
    params.vmax = 0.0;
    let sc = Scenario::new(params).unwrap();
    let b = solve(&sc, &PlannerConfig::default(), SystemMode::Integrated).unwrap();
    assert_consistent(&b, &sc);

    let gain = channel_gain(Point2::new(5.0, -3.0), Point2::new(5.0, -3.0), 8.0, 1e-3).unwrap();
    let delta = horizon / slots as f64;
    let per_slot = harvested_energy(1.0, delta, 0.6, gain, 1.0);
    let mid = (slots - 2) as f64;
    let mut best = 0.0f64;
    for ai in 0..=500 {
        let a = ai as f64 / 500.0;
        let uplink = mid * (1.0 - a) + 1.0;
        let energy = per_slot * (1.0 + mid * a);
        let p = (energy / (uplink * delta)).min(1e-4);
        best = best
            .max(uplink * (0.9 * gain * p / 1e-12).ln_1p() / std::f64::consts::LN_2 / slots as f64);
    }
    assert!(
        (b.r_min - best).abs() <= 2e-3,
        "planner {} vs grid {}",
        b.r_min,
        best
    );
}

#[test]
fn allocation_beats_uniform_split() {
    let sc = triangle(10.0, 6);
    let traj = Trajectory::hover(Role::Hybrid, Point2::new(0.0, 0.0), 6);
    let uniform = TimeAllocation::uniform(6, 3);
    // Powers that the uniform split can just afford.
    let powers = uav_wpcn::baselines::npc_powers(&sc, &traj, &uniform);
    let base = average_rates(&traj, &uniform, &powers, &sc)
        .unwrap()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let res = time_allocation(&sc, std::slice::from_ref(&traj), &powers, 1e-9).unwrap();
    assert!(res.r_min >= base - 1e-9);
    assert!(res.r_min >= res.lp_objective - 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn allocation_is_always_feasible(
        seed_pts in prop::collection::vec((-30.0..30.0f64, -30.0..30.0f64), 1..4),
        slots in 2usize..7,
        horizon in 1.0..20.0f64,
        p_scale in 1e-3..1.0f64,
        ux in -20.0..20.0f64,
        uy in -20.0..20.0f64,
    ) {
        let gts: Vec<Point2> = seed_pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let k = gts.len();
        let sc = scenario(gts, horizon, slots);
        let traj = Trajectory::hover(Role::Hybrid, Point2::new(ux, uy), slots);
        let powers = PowerSchedule::from_fn(slots, k, |n, j| if n == 0 { 0.0 } else { p_scale * 1e-4 / (1 + j) as f64 });
        let res = time_allocation(&sc, std::slice::from_ref(&traj), &powers, 1e-9).unwrap();
        let bundle = SolutionBundle {
            mode: SystemMode::Integrated,
            trajectories: vec![traj],
            allocation: res.allocation,
            powers,
            r_min: res.r_min,
            per_gt_rates: res.per_gt_rates,
            trace: Vec::new(),
        };
        let rep = check(&bundle, &sc, 1e-6);
        prop_assert!(rep.ok, "{:?}", rep.violations);
        prop_assert!(res.r_min >= 0.0);
    }
}
