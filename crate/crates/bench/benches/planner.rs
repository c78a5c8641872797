use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use uav_wpcn::planner::{
    cccp_step, initial_trajectories, time_allocation, StepOptions, SubproblemSolution,
};
use uav_wpcn::{solve, PlannerConfig, PowerSchedule, SystemMode, TimeAllocation};
use uav_wpcn_bench::{reference, small};

fn start(sc: &uav_wpcn::Scenario, mode: SystemMode) -> (TimeAllocation, SubproblemSolution) {
    let alloc = TimeAllocation::uniform(sc.slots(), sc.num_gts());
    let trajs = initial_trajectories(sc, mode, 1e-3);
    let powers = PowerSchedule::from_fn(
        sc.slots(),
        sc.num_gts(),
        |n, _| if n == 0 { 0.0 } else { 1e-7 },
    );
    let cur = SubproblemSolution::from_point(sc, trajs, &alloc, powers).expect("start point");
    (alloc, cur)
}

fn steps(c: &mut Criterion) {
    let cfg = PlannerConfig::default();
    let sc = reference(30.0, 50);
    let mut g = c.benchmark_group("reference N=50");
    g.sample_size(10);
    for mode in [SystemMode::Integrated, SystemMode::Separated] {
        let (alloc, cur) = start(&sc, mode);
        g.bench_function(format!("cccp step {}", mode.as_str()), |b| {
            b.iter(|| {
                cccp_step(&sc, &cfg, &alloc, &cur, mode, &StepOptions::default()).expect("step")
            })
        });
    }
    let (_, cur) = start(&sc, SystemMode::Integrated);
    g.bench_function("allocation lp", |b| {
        b.iter(|| {
            time_allocation(&sc, &cur.trajectories, &cur.powers, cfg.barrier_tol).expect("lp")
        })
    });
    g.finish();
}

fn full_solve(c: &mut Criterion) {
    let cfg = PlannerConfig::default();
    let sc = small(20.0, 12);
    let mut g = c.benchmark_group("small N=12");
    g.sample_size(10);
    for mode in [SystemMode::Integrated, SystemMode::Separated] {
        g.bench_function(format!("solve {}", mode.as_str()), |b| {
            b.iter_batched(
                || sc.clone(),
                |sc| solve(&sc, &cfg, mode).expect("solve"),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, steps, full_solve);
criterion_main!(benches);
