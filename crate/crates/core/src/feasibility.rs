//! Exact evaluation of candidate solutions against the full constraint set.
//!
//! Nothing here optimizes; every quantity is recomputed from the raw
//! trajectory, allocation and power schedule. A constraint `g <= b` passes
//! when `g <= b + eps * max(1, |b|)`. Energy and power rows are compared in
//! units of the peak uplink power so that `eps` means the same thing for
//! every row.

use std::fmt;

use serde::Serialize;

use crate::model::{
    average_rates, check_dims, gain_from_dist_sq, ModelError, PowerSchedule, Role, Scenario,
    SolutionBundle, TimeAllocation, Trajectory,
};

/// Per-terminal, per-slot energy bookkeeping in joules (slot index 0-based).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedger {
    slots: usize,
    gts: usize,
    harvested: Vec<f64>,
    consumed: Vec<f64>,
    available: Vec<f64>,
}

impl EnergyLedger {
    pub fn slots(&self) -> usize {
        self.slots
    }
    pub fn gts(&self) -> usize {
        self.gts
    }
    /// Energy harvested by terminal `k` during slot `n`.
    pub fn harvested(&self, n: usize, k: usize) -> f64 {
        self.harvested[n * self.gts + k]
    }
    /// Energy spent by terminal `k` on uplink in slot `n`.
    pub fn consumed(&self, n: usize, k: usize) -> f64 {
        self.consumed[n * self.gts + k]
    }
    /// Energy stored at the start of slot `n`: harvest minus spending over slots `< n`.
    pub fn available(&self, n: usize, k: usize) -> f64 {
        self.available[n * self.gts + k]
    }
}

/// Build the ledger from the charging trajectory (hybrid or energy role).
pub fn build_ledger(
    traj_energy: &Trajectory,
    alloc: &TimeAllocation,
    powers: &PowerSchedule,
    sc: &Scenario,
) -> Result<EnergyLedger, ModelError> {
    if !traj_energy.role.charges() {
        return Err(ModelError::Dimension(format!(
            "{} trajectory cannot transfer energy",
            traj_energy.role.as_str()
        )));
    }
    check_dims(traj_energy, alloc, powers, sc)?;
    let (slots, gts) = (sc.slots(), sc.num_gts());
    let h = sc.altitude(traj_energy.role);
    let delta = sc.slot_len();
    let mut harvested = vec![0.0; slots * gts];
    let mut consumed = vec![0.0; slots * gts];
    let mut available = vec![0.0; slots * gts];
    for n in 0..slots {
        for (k, &u) in sc.gts().iter().enumerate() {
            let gain = gain_from_dist_sq(traj_energy.positions[n].dist_sq(u), h, sc.g0());
            harvested[n * gts + k] = alloc.wet(n) * delta * sc.zeta() * gain * sc.p_dl();
            consumed[n * gts + k] = alloc.uplink(n, k) * delta * powers.get(n, k);
        }
    }
    for n in 1..slots {
        for k in 0..gts {
            let prev = (n - 1) * gts + k;
            available[n * gts + k] = available[prev] + harvested[prev] - consumed[prev];
        }
    }
    Ok(EnergyLedger {
        slots,
        gts,
        harvested,
        consumed,
        available,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintId {
    /// Shapes, roles or finiteness of the bundle itself.
    Structure,
    /// Reported `r_min` or per-terminal rates disagree with recomputation.
    Throughput,
    EnergyCausality,
    Speed,
    Periodicity,
    PowerBox,
    /// Nonzero uplink power in the first slot.
    FirstSlotPower,
    TauBox,
    SlotSum,
    /// Uplink time in the first slot (harmless, reported as a warning).
    FirstSlotUplink,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    /// 0-based slot, when the constraint is per slot.
    pub slot: Option<usize>,
    /// 0-based terminal, when the constraint is per terminal.
    pub gt: Option<usize>,
    pub role: Option<Role>,
    /// Amount by which the (normalized) constraint is exceeded.
    pub magnitude: f64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.constraint)?;
        if let Some(role) = self.role {
            write!(f, " [{}]", role.as_str())?;
        }
        if let Some(n) = self.slot {
            write!(f, " n={}", n + 1)?;
        }
        if let Some(k) = self.gt {
            write!(f, " k={}", k + 1)?;
        }
        write!(f, ": excess {:e}", self.magnitude)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
    /// Recomputed minimum throughput (bits/s/Hz); `NaN` if the bundle is malformed.
    pub r_min: f64,
    pub per_gt_rates: Vec<f64>,
    pub ledger: Option<EnergyLedger>,
}

struct Collector {
    violations: Vec<Violation>,
    eps: f64,
}

impl Collector {
    /// Record a violation if `g > b + eps * max(1, |b|)`.
    fn leq(
        &mut self,
        id: ConstraintId,
        g: f64,
        b: f64,
        at: (Option<usize>, Option<usize>, Option<Role>),
    ) {
        let allowed = b + self.eps * b.abs().max(1.0);
        if !(g <= allowed) {
            self.violations.push(Violation {
                constraint: id,
                slot: at.0,
                gt: at.1,
                role: at.2,
                magnitude: g - b,
                detail: String::new(),
            });
        }
    }

    fn structural(&mut self, detail: String) {
        self.violations.push(Violation {
            constraint: ConstraintId::Structure,
            slot: None,
            gt: None,
            role: None,
            magnitude: f64::INFINITY,
            detail,
        });
    }
}

fn malformed(violations: Vec<Violation>) -> FeasibilityReport {
    FeasibilityReport {
        ok: false,
        violations,
        warnings: Vec::new(),
        r_min: f64::NAN,
        per_gt_rates: Vec::new(),
        ledger: None,
    }
}

/// Check `bundle` against every constraint of its architecture.
///
/// `eps` must be positive; the usual value is `1e-6`.
pub fn check(bundle: &SolutionBundle, sc: &Scenario, eps: f64) -> FeasibilityReport {
    let mut c = Collector {
        violations: Vec::new(),
        eps,
    };
    let roles: Vec<Role> = bundle.trajectories.iter().map(|t| t.role).collect();
    if roles != bundle.mode.roles() {
        c.structural(format!(
            "{} system expects roles {:?}, got {:?}",
            bundle.mode.as_str(),
            bundle.mode.roles(),
            roles
        ));
        return malformed(c.violations);
    }
    for t in &bundle.trajectories {
        if let Err(e) = check_dims(t, &bundle.allocation, &bundle.powers, sc) {
            c.structural(e.to_string());
            return malformed(c.violations);
        }
        if t.positions.iter().any(|p| !p.is_finite()) {
            c.structural(format!(
                "{} trajectory has non-finite positions",
                t.role.as_str()
            ));
        }
    }
    let (slots, gts) = (sc.slots(), sc.num_gts());
    let finite = (0..slots).all(|n| {
        bundle.allocation.row(n).iter().all(|v| v.is_finite())
            && bundle.powers.row(n).iter().all(|v| v.is_finite())
    });
    if !finite {
        c.structural("allocation or power schedule has non-finite entries".into());
    }
    if bundle.per_gt_rates.len() != gts {
        c.structural(format!(
            "{} per-terminal rates for {gts} terminals",
            bundle.per_gt_rates.len()
        ));
    }
    if !c.violations.is_empty() {
        return malformed(c.violations);
    }

    // Trajectories.
    for t in &bundle.trajectories {
        let limit = sc.step_limit(t.role);
        let role = Some(t.role);
        for n in 1..slots {
            c.leq(
                ConstraintId::Speed,
                t.positions[n].dist(t.positions[n - 1]),
                limit,
                (Some(n), None, role),
            );
        }
        c.leq(
            ConstraintId::Periodicity,
            t.positions[slots - 1].dist(t.positions[0]),
            limit,
            (Some(0), None, role),
        );
    }

    // Time allocation.
    let alloc = &bundle.allocation;
    for n in 0..slots {
        for j in 0..=gts {
            let tau = alloc.get(n, j);
            let gt = j.checked_sub(1);
            c.leq(ConstraintId::TauBox, -tau, 0.0, (Some(n), gt, None));
            c.leq(ConstraintId::TauBox, tau, 1.0, (Some(n), gt, None));
        }
        let sum: f64 = alloc.row(n).iter().sum();
        c.leq(
            ConstraintId::SlotSum,
            (sum - 1.0).abs(),
            0.0,
            (Some(n), None, None),
        );
    }

    // Powers, normalized by the peak.
    let pmax = sc.p_ul_max();
    let powers = &bundle.powers;
    for n in 0..slots {
        for k in 0..gts {
            let p = powers.get(n, k) / pmax;
            c.leq(ConstraintId::PowerBox, -p, 0.0, (Some(n), Some(k), None));
            c.leq(ConstraintId::PowerBox, p, 1.0, (Some(n), Some(k), None));
        }
    }
    for k in 0..gts {
        c.leq(
            ConstraintId::FirstSlotPower,
            powers.get(0, k).abs() / pmax,
            0.0,
            (Some(0), Some(k), None),
        );
    }

    // Energy causality: uplink spending through slot n never exceeds the
    // energy harvested strictly before slot n.
    let energy = bundle.energy_trajectory();
    let ledger = build_ledger(energy, alloc, powers, sc).expect("dimensions already checked");
    let unit = pmax * sc.slot_len();
    for k in 0..gts {
        let mut spent = 0.0;
        let mut stored = 0.0;
        for n in 1..slots {
            spent += ledger.consumed(n, k);
            stored += ledger.harvested(n - 1, k);
            c.leq(
                ConstraintId::EnergyCausality,
                spent / unit,
                stored / unit,
                (Some(n), Some(k), None),
            );
        }
    }

    // Throughput.
    let rates = average_rates(bundle.info_trajectory(), alloc, powers, sc)
        .expect("dimensions already checked");
    let r_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = |x: f64| eps * x.abs().max(1.0);
    if (bundle.r_min - r_min).abs() > tol(r_min) {
        c.violations.push(Violation {
            constraint: ConstraintId::Throughput,
            slot: None,
            gt: None,
            role: None,
            magnitude: (bundle.r_min - r_min).abs(),
            detail: format!("reported r_min {:e}, recomputed {:e}", bundle.r_min, r_min),
        });
    }
    for (k, (&claimed, &actual)) in bundle.per_gt_rates.iter().zip(&rates).enumerate() {
        if (claimed - actual).abs() > tol(actual) {
            c.violations.push(Violation {
                constraint: ConstraintId::Throughput,
                slot: None,
                gt: Some(k),
                role: None,
                magnitude: (claimed - actual).abs(),
                detail: format!("reported rate {claimed:e}, recomputed {actual:e}"),
            });
        }
    }

    let warnings = (0..gts)
        .filter(|&k| alloc.uplink(0, k) > eps)
        .map(|k| Violation {
            constraint: ConstraintId::FirstSlotUplink,
            slot: Some(0),
            gt: Some(k),
            role: None,
            magnitude: alloc.uplink(0, k),
            detail: "uplink time in the first slot carries no data".into(),
        })
        .collect();

    FeasibilityReport {
        ok: c.violations.is_empty(),
        violations: c.violations,
        warnings,
        r_min,
        per_gt_rates: rates,
        ledger: Some(ledger),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point2, ScenarioParams, SystemMode, TraceEntry};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// One terminal at a horizontal distance chosen so the gain is exactly `1e-5`
    /// (`36 + 64 = 100` m^2 with `g0 = 1e-3`), slot length 1 s.
    fn unit_gain_scenario(slots: usize) -> (Scenario, Trajectory) {
        let sc = Scenario::new(ScenarioParams::with_default_link_budget(
            vec![Point2::new(6.0, 0.0)],
            slots as f64,
            slots,
        ))
        .unwrap();
        (
            sc,
            Trajectory::hover(Role::Hybrid, Point2::new(0.0, 0.0), slots),
        )
    }

    fn bundle(
        sc: &Scenario,
        traj: Trajectory,
        alloc: TimeAllocation,
        powers: PowerSchedule,
    ) -> SolutionBundle {
        let rates = average_rates(&traj, &alloc, &powers, sc).unwrap();
        let r_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        SolutionBundle {
            mode: SystemMode::Integrated,
            trajectories: vec![traj],
            allocation: alloc,
            powers,
            r_min,
            per_gt_rates: rates,
            trace: Vec::<TraceEntry>::new(),
        }
    }

    #[test]
    fn hand_ledger() {
        let (sc, traj) = unit_gain_scenario(3);
        let mut alloc = TimeAllocation::from_fn(3, 1, |_, _| 0.0);
        alloc.set(0, 0, 1.0);
        alloc.set(1, 1, 0.06);
        let mut powers = PowerSchedule::zeros(3, 1);
        powers.set(1, 0, 1e-4);
        let ledger = build_ledger(&traj, &alloc, &powers, &sc).unwrap();
        assert_relative_eq!(ledger.harvested(0, 0), 6e-6, max_relative = 1e-12);
        assert_relative_eq!(ledger.consumed(1, 0), 6e-6, max_relative = 1e-12);
        assert_eq!(ledger.available(0, 0), 0.0);
        assert!(ledger.available(2, 0).abs() < 1e-18);
    }

    #[test]
    fn zero_wet_with_power_is_infeasible() {
        let (sc, traj) = unit_gain_scenario(3);
        let alloc = TimeAllocation::from_fn(3, 1, |_, k| if k == 1 { 1.0 } else { 0.0 });
        let mut powers = PowerSchedule::zeros(3, 1);
        powers.set(2, 0, 1e-5);
        let ledger = build_ledger(&traj, &alloc, &powers, &sc).unwrap();
        assert_relative_eq!(ledger.available(2, 0), 0.0);
        let report = check(&bundle(&sc, traj, alloc, powers), &sc, 1e-6);
        assert!(!report.ok);
        assert!(report
            .violations
            .iter()
            .any(|v| v.constraint == ConstraintId::EnergyCausality && v.slot == Some(2)));
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn hover_zero_power_is_feasible() {
        let (sc, traj) = unit_gain_scenario(4);
        let alloc = TimeAllocation::from_fn(4, 1, |_, k| if k == 0 { 1.0 } else { 0.0 });
        let report = check(
            &bundle(&sc, traj, alloc, PowerSchedule::zeros(4, 1)),
            &sc,
            1e-6,
        );
        assert!(report.ok, "{:?}", report.violations);
        assert_eq!(report.r_min, 0.0);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn overdraw_in_slot_two_is_reported() {
        let (sc, traj) = unit_gain_scenario(3);
        let mut alloc = TimeAllocation::from_fn(3, 1, |_, k| if k == 0 { 1.0 } else { 0.0 });
        alloc.set(1, 0, 0.5);
        alloc.set(1, 1, 0.5);
        // Slot-1 harvest is 6e-6 J; spend 1e-3 J more than that in slot 2.
        let mut powers = PowerSchedule::zeros(3, 1);
        powers.set(1, 0, (6e-6 + 1e-3) / 0.5);
        let report = check(&bundle(&sc, traj, alloc, powers), &sc, 1e-6);
        let v = report
            .violations
            .iter()
            .find(|v| v.constraint == ConstraintId::EnergyCausality)
            .unwrap();
        assert_eq!((v.slot, v.gt), (Some(1), Some(0)));
        // Also far beyond the peak power.
        assert!(report
            .violations
            .iter()
            .any(|v| v.constraint == ConstraintId::PowerBox));
    }

    #[test]
    fn structural_problems_are_violations() {
        let (sc, traj) = unit_gain_scenario(3);
        let alloc = TimeAllocation::uniform(3, 1);
        let mut b = bundle(&sc, traj, alloc, PowerSchedule::zeros(3, 1));
        b.mode = SystemMode::Separated;
        let report = check(&b, &sc, 1e-6);
        assert!(!report.ok && report.ledger.is_none());
        assert_eq!(report.violations[0].constraint, ConstraintId::Structure);
        // A misreported objective.
        let (sc, traj) = unit_gain_scenario(3);
        let mut b = bundle(
            &sc,
            traj,
            TimeAllocation::uniform(3, 1),
            PowerSchedule::zeros(3, 1),
        );
        b.r_min = 1.0;
        assert!(check(&b, &sc, 1e-6)
            .violations
            .iter()
            .any(|v| v.constraint == ConstraintId::Throughput));
    }

    #[test]
    fn speed_and_periodicity() {
        let (sc, _) = unit_gain_scenario(3);
        // Step limit is 5 m per slot.
        let traj = Trajectory::new(
            Role::Hybrid,
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(5.0, 0.0),
                Point2::new(10.0, 0.0),
            ],
        );
        let alloc = TimeAllocation::from_fn(3, 1, |_, k| if k == 0 { 1.0 } else { 0.0 });
        let report = check(
            &bundle(&sc, traj, alloc, PowerSchedule::zeros(3, 1)),
            &sc,
            1e-6,
        );
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].constraint, ConstraintId::Periodicity);
        assert_relative_eq!(report.violations[0].magnitude, 5.0);
    }

    proptest! {
        #[test]
        fn ledger_telescopes(
            wet in proptest::collection::vec(0.0..1.0f64, 5),
            p in proptest::collection::vec(0.0..1e-4f64, 5),
            x in -50.0..50.0f64,
        ) {
            let sc = Scenario::new(ScenarioParams::with_default_link_budget(vec![Point2::new(x, 3.0), Point2::new(-4.0, 1.0)], 10.0, 5)).unwrap();
            let traj = Trajectory::hover(Role::Hybrid, Point2::new(1.0, 2.0), 5);
            let alloc = TimeAllocation::from_fn(5, 2, |n, k| match k { 0 => wet[n], 1 => (1.0 - wet[n]) * 0.3, _ => (1.0 - wet[n]) * 0.7 });
            let powers = PowerSchedule::from_fn(5, 2, |n, k| if n == 0 { 0.0 } else { p[(n + k) % 5] });
            let l = build_ledger(&traj, &alloc, &powers, &sc).unwrap();
            for k in 0..2 {
                prop_assert_eq!(l.available(0, k), 0.0);
                for n in 0..4 {
                    let step = l.available(n + 1, k) - l.available(n, k);
                    let expect = l.harvested(n, k) - l.consumed(n, k);
                    prop_assert!((step - expect).abs() <= 1e-12 * (l.harvested(n, k) + l.consumed(n, k)).max(1e-300));
                }
            }
            // Zero powers: stored energy never decreases.
            let l0 = build_ledger(&traj, &alloc, &PowerSchedule::zeros(5, 2), &sc).unwrap();
            for n in 0..4 {
                prop_assert!(l0.available(n + 1, 0) >= l0.available(n, 0));
            }
        }

        #[test]
        fn zeroing_powers_keeps_feasibility(wet in proptest::collection::vec(0.0..1.0f64, 4)) {
            let (sc, traj) = unit_gain_scenario(4);
            let alloc = TimeAllocation::from_fn(4, 1, |n, k| if k == 0 { wet[n] } else { 1.0 - wet[n] });
            let b = bundle(&sc, traj, alloc, PowerSchedule::zeros(4, 1));
            let r = check(&b, &sc, 1e-6);
            prop_assert!(r.ok);
            prop_assert_eq!(r.clone(), check(&b, &sc, 1e-6));
        }
    }
}
