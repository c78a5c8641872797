//! Time allocation for fixed trajectories and powers, as a linear program.

use crate::convex_solver::{solve_lp_from, LinearProgram};
use crate::model::{
    average_rates, gain_from_dist_sq, instantaneous_rate, ModelError, PowerSchedule, Scenario,
    TimeAllocation, Trajectory,
};

use super::PlannerError;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub allocation: TimeAllocation,
    /// Exact minimum throughput of the new allocation.
    pub r_min: f64,
    pub per_gt_rates: Vec<f64>,
    /// Optimal value reported by the LP (a lower bound on `r_min`).
    pub lp_objective: f64,
}

/// Variable index of `tau_j[n]` (`j = 0` is energy transfer); the throughput
/// variable comes last, at `slots * (gts + 1)`.
fn tau_index(n: usize, j: usize, gts: usize) -> usize {
    n * (gts + 1) + j
}

pub(crate) fn split_roles(
    trajectories: &[Trajectory],
) -> Result<(&Trajectory, &Trajectory), ModelError> {
    let info = trajectories.iter().find(|t| t.role.decodes());
    let energy = trajectories.iter().find(|t| t.role.charges());
    match (info, energy) {
        (Some(i), Some(e)) => Ok((i, e)),
        _ => Err(ModelError::Dimension(
            "need one decoding and one charging trajectory".into(),
        )),
    }
}

/// The allocation LP: maximize `R` subject to the throughput, energy
/// causality, non-negativity and per-slot sum rows.
pub fn allocation_lp(
    sc: &Scenario,
    trajectories: &[Trajectory],
    powers: &PowerSchedule,
) -> Result<LinearProgram, ModelError> {
    let (info, energy) = split_roles(trajectories)?;
    let (slots, gts) = (sc.slots(), sc.num_gts());
    if info.len() != slots
        || energy.len() != slots
        || powers.slots() != slots
        || powers.gts() != gts
    {
        return Err(ModelError::Dimension(
            "trajectories or powers do not match the scenario".into(),
        ));
    }
    let nv = slots * (gts + 1) + 1;
    let r = nv - 1;
    let mut objective = vec![0.0; nv];
    objective[r] = 1.0;
    let mut lp = LinearProgram::new(objective);
    let (h_i, h_e) = (sc.altitude(info.role), sc.altitude(energy.role));
    let inv_n = 1.0 / slots as f64;

    for (k, &u) in sc.gts().iter().enumerate() {
        let mut idx = vec![r];
        let mut coefs = vec![1.0];
        for n in 1..slots {
            let gain = gain_from_dist_sq(info.positions[n].dist_sq(u), h_i, sc.g0());
            let a = instantaneous_rate(powers.get(n, k), gain, sc.eta(), sc.sigma2());
            if a > 0.0 {
                idx.push(tau_index(n, k + 1, gts));
                coefs.push(-a * inv_n);
            }
        }
        lp.add_leq(idx, coefs, 0.0);

        let harvest: Vec<f64> = (0..slots)
            .map(|n| {
                sc.harvest_coeff() * gain_from_dist_sq(energy.positions[n].dist_sq(u), h_e, 1.0)
            })
            .collect();
        for m in 1..slots {
            let spends: Vec<usize> = (1..=m).filter(|&i| powers.get(i, k) > 0.0).collect();
            if spends.is_empty() {
                continue;
            }
            let mut idx = Vec::with_capacity(spends.len() + m);
            let mut coefs = Vec::with_capacity(spends.len() + m);
            for &i in &spends {
                idx.push(tau_index(i, k + 1, gts));
                coefs.push(powers.get(i, k));
            }
            for (i, &b) in harvest.iter().enumerate().take(m) {
                idx.push(tau_index(i, 0, gts));
                coefs.push(-b);
            }
            lp.add_leq(idx, coefs, 0.0);
        }
    }
    for i in 0..r {
        lp.add_leq(vec![i], vec![-1.0], 0.0);
    }
    // A slot may leave time unused. Moving it to energy transfer only adds
    // harvest, so the relaxation has the same optimum and sparser rows.
    for n in 0..slots {
        let idx: Vec<usize> = (0..=gts).map(|j| tau_index(n, j, gts)).collect();
        lp.add_leq(idx, vec![1.0; gts + 1], 1.0);
    }
    Ok(lp)
}

/// Optimal time allocation for fixed trajectories and powers.
pub fn time_allocation(
    sc: &Scenario,
    trajectories: &[Trajectory],
    powers: &PowerSchedule,
    tol: f64,
) -> Result<AllocationResult, PlannerError> {
    time_allocation_from(sc, trajectories, powers, None, tol)
}

/// Like [`time_allocation`], warm-started from `hint` when it is strictly feasible.
pub fn time_allocation_from(
    sc: &Scenario,
    trajectories: &[Trajectory],
    powers: &PowerSchedule,
    hint: Option<&TimeAllocation>,
    tol: f64,
) -> Result<AllocationResult, PlannerError> {
    let lp = allocation_lp(sc, trajectories, powers)?;
    let (slots, gts) = (sc.slots(), sc.num_gts());
    let start = hint
        .filter(|h| h.slots() == slots && h.gts() == gts)
        .map(|h| {
            // Points hugging the boundary stall Newton; pull slightly toward uniform.
            let u = 1.0 / (gts + 1) as f64;
            let blended =
                TimeAllocation::from_fn(slots, gts, |n, j| 0.999 * h.get(n, j) + 0.000999 * u);
            let mut x: Vec<f64> = (0..slots).flat_map(|n| blended.row(n).to_vec()).collect();
            let (info, _) = split_roles(trajectories).expect("checked by allocation_lp");
            let rates = average_rates(info, &blended, powers, sc).unwrap_or_default();
            let r = rates.iter().copied().fold(f64::INFINITY, f64::min);
            x.push(r - 0.5 * r.abs().max(1e-3));
            x
        });
    let status =
        solve_lp_from(&lp, start.as_deref(), tol).map_err(|source| PlannerError::Solver {
            stage: "time allocation",
            source,
        })?;
    let allocation = TimeAllocation::from_fn(slots, gts, |n, j| {
        let up = |k: usize| status.x[tau_index(n, k, gts)].max(0.0);
        if j == 0 {
            1.0 - (1..=gts).map(up).sum::<f64>()
        } else {
            up(j)
        }
    });
    let (info, _) = split_roles(trajectories)?;
    let per_gt_rates = average_rates(info, &allocation, powers, sc)?;
    let r_min = per_gt_rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AllocationResult {
        allocation,
        r_min,
        per_gt_rates,
        lp_objective: status.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point2, Role, ScenarioParams};
    use approx::assert_relative_eq;

    #[test]
    fn two_slot_hand_optimum() {
        // Distance 6 m at 8 m altitude: gain 1e-5, harvest rate 6e-6 W per unit tau0.
        let sc = Scenario::new(ScenarioParams::with_default_link_budget(
            vec![Point2::new(6.0, 0.0)],
            2.0,
            2,
        ))
        .unwrap();
        let traj = Trajectory::hover(Role::Hybrid, Point2::new(0.0, 0.0), 2);
        let mut powers = PowerSchedule::zeros(2, 1);
        powers.set(1, 0, 1e-4);
        let res = time_allocation(&sc, &[traj], &powers, 1e-10).unwrap();
        let a = 901f64.log2();
        assert_relative_eq!(res.r_min, 0.03 * a, epsilon = 1e-8);
        assert!((res.allocation.wet(0) - 1.0).abs() < 1e-8);
        assert!((res.allocation.uplink(1, 0) - 0.06).abs() < 1e-8);
        assert!(res.lp_objective <= res.r_min + 1e-12);
    }

    #[test]
    fn zero_powers_give_zero_throughput() {
        let sc = Scenario::new(ScenarioParams::with_default_link_budget(
            vec![Point2::new(1.0, 0.0), Point2::new(-3.0, 2.0)],
            6.0,
            4,
        ))
        .unwrap();
        let traj = Trajectory::hover(Role::Hybrid, Point2::new(0.0, 0.0), 4);
        let res = time_allocation(&sc, &[traj], &PowerSchedule::zeros(4, 2), 1e-9).unwrap();
        assert_eq!(res.r_min, 0.0);
        for n in 0..4 {
            assert!((res.allocation.row(n).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let sc = Scenario::new(ScenarioParams::with_default_link_budget(
            vec![Point2::new(5.0, 0.0), Point2::new(-5.0, 1.0)],
            6.0,
            4,
        ))
        .unwrap();
        let traj = Trajectory::hover(Role::Hybrid, Point2::new(0.0, 0.0), 4);
        let powers = PowerSchedule::from_fn(4, 2, |n, _| if n == 0 { 0.0 } else { 2e-6 });
        let cold = time_allocation(&sc, std::slice::from_ref(&traj), &powers, 1e-10).unwrap();
        let hint = TimeAllocation::from_fn(4, 2, |_, j| if j == 0 { 0.9 } else { 0.05 });
        let warm = time_allocation_from(&sc, &[traj], &powers, Some(&hint), 1e-10).unwrap();
        assert!(
            (cold.r_min - warm.r_min).abs() < 1e-8,
            "{} {} {} {}",
            cold.r_min,
            warm.r_min,
            cold.lp_objective,
            warm.lp_objective
        );
    }
}
