//! Shared scenarios for the benchmarks.

use uav_wpcn::model::reference_layout;
use uav_wpcn::{Point2, Scenario, ScenarioParams};

/// The seven-terminal reference layout with `slots` slots over `horizon` seconds.
pub fn reference(horizon: f64, slots: usize) -> Scenario {
    Scenario::new(ScenarioParams::with_default_link_budget(
        reference_layout(),
        horizon,
        slots,
    ))
    .expect("valid scenario")
}

/// Three terminals on a small triangle.
pub fn small(horizon: f64, slots: usize) -> Scenario {
    let gts = vec![
        Point2::new(12.0, 0.0),
        Point2::new(-8.0, 9.0),
        Point2::new(-5.0, -14.0),
    ];
    Scenario::new(ScenarioParams::with_default_link_budget(
        gts, horizon, slots,
    ))
    .expect("valid scenario")
}
