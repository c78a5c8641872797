//! Compare every scheme on the reference layout.
//!
//! `cargo run --release -p uav-wpcn --example reference -- [T_seconds] [N_slots]`

use std::time::Instant;
use uav_wpcn::model::reference_layout;
use uav_wpcn::{
    check, run_baseline, solve, BaselineKind, PlannerConfig, Scenario, ScenarioParams, SystemMode,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let horizon: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(30.0);
    let slots: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(50);
    let sc = Scenario::new(ScenarioParams::with_default_link_budget(
        reference_layout(),
        horizon,
        slots,
    ))
    .unwrap();
    let cfg = PlannerConfig::default();
    for mode in [SystemMode::Integrated, SystemMode::Separated] {
        let t = Instant::now();
        let b = solve(&sc, &cfg, mode).unwrap();
        let rep = check(&b, &sc, 1e-6);
        println!(
            "{} r_min={:.6} outer={} feasible={} {:.1}s",
            mode.as_str(),
            b.r_min,
            b.outer_iterations(),
            rep.ok,
            t.elapsed().as_secs_f64()
        );
        for e in &b.trace {
            print!("{:.5} ", e.r_min);
        }
        println!();
    }
    for kind in BaselineKind::ALL {
        let t = Instant::now();
        let b = run_baseline(kind, &sc, &cfg, SystemMode::Integrated).unwrap();
        let rep = check(&b, &sc, 1e-6);
        println!(
            "{} r_min={:.6} feasible={} {:.1}s",
            kind.as_str(),
            b.r_min,
            rep.ok,
            t.elapsed().as_secs_f64()
        );
    }
}
